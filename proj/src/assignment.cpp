#include "kinetrack/assignment.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace kinetrack {

Eigen::MatrixXd iou_cost_matrix(std::span<const BBox> predicted, std::span<const BBox> detections) {
  Eigen::MatrixXd c(static_cast<Eigen::Index>(predicted.size()), static_cast<Eigen::Index>(detections.size()));
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    for (std::size_t j = 0; j < detections.size(); ++j) {
      c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = 1.0 - iou(predicted[i], detections[j]);
    }
  }
  return c;
}

namespace {

// rows <= cols. Returns column per row.
std::vector<int> solve_wide(const Eigen::MatrixXd& a) {
  const int n = static_cast<int>(a.rows());
  const int m = static_cast<int>(a.cols());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> col_of_row(n, -1);
  for (int j = 1; j <= m; ++j) {
    if (p[j] != 0) col_of_row[p[j] - 1] = j - 1;
  }
  return col_of_row;
}

}  // namespace

std::vector<int> solve_assignment(const Eigen::MatrixXd& cost) {
  if (!cost.allFinite()) throw std::invalid_argument("solve_assignment: cost matrix has non-finite entries");
  if (cost.rows() == 0 || cost.cols() == 0) return std::vector<int>(static_cast<std::size_t>(cost.rows()), -1);
  if (cost.rows() <= cost.cols()) return solve_wide(cost);
  const auto row_of_col = solve_wide(cost.transpose());
  std::vector<int> col_of_row(static_cast<std::size_t>(cost.rows()), -1);
  for (std::size_t j = 0; j < row_of_col.size(); ++j) col_of_row[row_of_col[j]] = static_cast<int>(j);
  return col_of_row;
}

AssignmentResult hungarian(const Eigen::MatrixXd& cost, double gate) {
  AssignmentResult result;
  const auto col_of_row = solve_assignment(cost);
  std::vector<char> col_used(static_cast<std::size_t>(cost.cols()), 0);
  const double max_cost = 1.0 - gate;
  for (int i = 0; i < static_cast<int>(col_of_row.size()); ++i) {
    const int j = col_of_row[i];
    if (j >= 0 && cost(i, j) <= max_cost) {
      result.matches.emplace_back(i, j);
      col_used[j] = 1;
    } else {
      result.unmatched_rows.push_back(i);
    }
  }
  for (int j = 0; j < static_cast<int>(cost.cols()); ++j) {
    if (!col_used[j]) result.unmatched_cols.push_back(j);
  }
  return result;
}

}  // namespace kinetrack
