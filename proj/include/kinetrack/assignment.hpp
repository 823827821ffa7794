#pragma once

#include "kinetrack/geometry.hpp"

#include <Eigen/Core>

#include <span>
#include <utility>
#include <vector>

namespace kinetrack {

struct AssignmentResult {
  std::vector<std::pair<int, int>> matches;  // (row, column), sorted by row
  std::vector<int> unmatched_rows;
  std::vector<int> unmatched_cols;
};

/// C(i, j) = 1 - iou(predicted_i, detections_j).
Eigen::MatrixXd iou_cost_matrix(std::span<const BBox> predicted, std::span<const BBox> detections);

/// Minimum-cost assignment of a rectangular matrix via shortest augmenting
/// paths with potentials. Returns the column assigned to each row, or -1 for
/// rows left over when rows > cols. Among equal-cost optima, the scan order
/// (lowest row, then lowest column) decides, so results are reproducible.
std::vector<int> solve_assignment(const Eigen::MatrixXd& cost);

/// Optimal assignment, then any pair with cost > 1 - gate is dissolved into
/// the unmatched sets.
AssignmentResult hungarian(const Eigen::MatrixXd& cost, double gate);

}  // namespace kinetrack
