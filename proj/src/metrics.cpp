#include "kinetrack/metrics.hpp"

#include "kinetrack/assignment.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

namespace kinetrack {

void EvalReport::finalize() {
  mota = gt_count > 0 ? 1.0 - static_cast<double>(fn + fp + idsw) / static_cast<double>(gt_count)
                      : (fp == 0 ? 1.0 : 0.0);
  const long denom = 2 * idtp + idfp + idfn;
  idf1 = denom > 0 ? 2.0 * static_cast<double>(idtp) / static_cast<double>(denom) : 1.0;
}

namespace {

// Per-frame rows sorted by (id, box) so row order in the files is irrelevant.
std::vector<Detection> sorted_rows(const Scene& s, int frame) {
  const auto it = s.frames.find(frame);
  if (it == s.frames.end()) return {};
  std::vector<Detection> rows = it->second;
  std::sort(rows.begin(), rows.end(), [](const Detection& a, const Detection& b) {
    if (a.id != b.id) return a.id < b.id;
    if (a.box.cx != b.box.cx) return a.box.cx < b.box.cx;
    return a.box.cy < b.box.cy;
  });
  return rows;
}

std::set<int> all_frames(const Scene& a, const Scene& b) {
  std::set<int> frames;
  for (const auto& [f, d] : a.frames) frames.insert(f);
  for (const auto& [f, d] : b.frames) frames.insert(f);
  return frames;
}

}  // namespace

ClearResult clear_match(const Scene& gt, const Scene& hyp, double iou_min) {
  ClearResult r;
  std::map<int, int> prev_pairs;    // gt id -> hyp id, previous frame only
  std::map<int, int> last_matched;  // gt id -> hyp id, most recent match
  for (int frame : all_frames(gt, hyp)) {
    const auto g = sorted_rows(gt, frame);
    const auto h = sorted_rows(hyp, frame);
    r.gt_count += static_cast<long>(g.size());
    r.hyp_count += static_cast<long>(h.size());

    std::vector<char> g_used(g.size(), 0), h_used(h.size(), 0);
    FrameCorrespondence fc{frame, {}};
    for (std::size_t i = 0; i < g.size(); ++i) {
      const auto prev = prev_pairs.find(g[i].id);
      if (prev == prev_pairs.end()) continue;
      for (std::size_t j = 0; j < h.size(); ++j) {
        if (h_used[j] || h[j].id != prev->second) continue;
        if (iou(g[i].box, h[j].box) >= iou_min) {
          g_used[i] = h_used[j] = 1;
          fc.pairs.emplace_back(g[i].id, h[j].id);
        }
        break;
      }
    }

    std::vector<int> gi, hj;
    for (std::size_t i = 0; i < g.size(); ++i) if (!g_used[i]) gi.push_back(static_cast<int>(i));
    for (std::size_t j = 0; j < h.size(); ++j) if (!h_used[j]) hj.push_back(static_cast<int>(j));
    if (!gi.empty() && !hj.empty()) {
      // Pairs below the threshold get a cost above any admissible one.
      Eigen::MatrixXd cost(static_cast<Eigen::Index>(gi.size()), static_cast<Eigen::Index>(hj.size()));
      for (std::size_t a = 0; a < gi.size(); ++a) {
        for (std::size_t b = 0; b < hj.size(); ++b) {
          const double v = iou(g[gi[a]].box, h[hj[b]].box);
          cost(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = v >= iou_min ? 1.0 - v : 2.0;
        }
      }
      const auto col_of_row = solve_assignment(cost);
      for (std::size_t a = 0; a < gi.size(); ++a) {
        const int b = col_of_row[a];
        if (b < 0 || cost(static_cast<Eigen::Index>(a), b) > 1.0) continue;
        g_used[gi[a]] = h_used[hj[b]] = 1;
        fc.pairs.emplace_back(g[gi[a]].id, h[hj[b]].id);
      }
    }
    std::sort(fc.pairs.begin(), fc.pairs.end());

    prev_pairs.clear();
    for (const auto& [gid, hid] : fc.pairs) {
      const auto last = last_matched.find(gid);
      if (last != last_matched.end() && last->second != hid) ++r.idsw;
      last_matched[gid] = hid;
      prev_pairs[gid] = hid;
    }
    r.matches += static_cast<long>(fc.pairs.size());
    r.fn += static_cast<long>(g.size() - fc.pairs.size());
    r.fp += static_cast<long>(h.size() - fc.pairs.size());
    r.frames.push_back(std::move(fc));
  }
  EvalReport tmp;
  tmp.fp = r.fp;
  tmp.fn = r.fn;
  tmp.idsw = r.idsw;
  tmp.gt_count = r.gt_count;
  tmp.finalize();
  r.mota = tmp.mota;
  return r;
}

IdResult id_measures(const Scene& gt, const Scene& hyp, double iou_min) {
  std::map<int, int> g_index, h_index;
  long g_total = 0, h_total = 0;
  for (const auto& [f, rows] : gt.frames) {
    for (const auto& d : rows) g_index.emplace(d.id, 0);
    g_total += static_cast<long>(rows.size());
  }
  for (const auto& [f, rows] : hyp.frames) {
    for (const auto& d : rows) h_index.emplace(d.id, 0);
    h_total += static_cast<long>(rows.size());
  }
  int k = 0;
  for (auto& [id, idx] : g_index) idx = k++;
  k = 0;
  for (auto& [id, idx] : h_index) idx = k++;

  IdResult r;
  if (!g_index.empty() && !h_index.empty()) {
    Eigen::MatrixXd overlap = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(g_index.size()),
                                                    static_cast<Eigen::Index>(h_index.size()));
    for (int frame : all_frames(gt, hyp)) {
      const auto g = sorted_rows(gt, frame);
      const auto h = sorted_rows(hyp, frame);
      for (const auto& gd : g) {
        for (const auto& hd : h) {
          if (iou(gd.box, hd.box) >= iou_min) overlap(g_index[gd.id], h_index[hd.id]) += 1.0;
        }
      }
    }
    const auto col_of_row = solve_assignment(-overlap);
    for (Eigen::Index i = 0; i < overlap.rows(); ++i) {
      const int j = col_of_row[static_cast<std::size_t>(i)];
      if (j >= 0) r.idtp += static_cast<long>(overlap(i, j));
    }
  }
  r.idfn = g_total - r.idtp;
  r.idfp = h_total - r.idtp;
  const long denom = 2 * r.idtp + r.idfp + r.idfn;
  r.idf1 = denom > 0 ? 2.0 * static_cast<double>(r.idtp) / static_cast<double>(denom) : 1.0;
  return r;
}

EvalReport evaluate(const Scene& gt, const Scene& hyp, double iou_min) {
  const auto clear = clear_match(gt, hyp, iou_min);
  const auto ids = id_measures(gt, hyp, iou_min);
  EvalReport rep;
  rep.fp = clear.fp;
  rep.fn = clear.fn;
  rep.idsw = clear.idsw;
  rep.gt_count = clear.gt_count;
  rep.hyp_count = clear.hyp_count;
  rep.matches = clear.matches;
  rep.idtp = ids.idtp;
  rep.idfp = ids.idfp;
  rep.idfn = ids.idfn;
  rep.finalize();
  return rep;
}

EvalReport aggregate(const std::vector<EvalReport>& reports) {
  EvalReport total;
  for (const auto& r : reports) {
    total.fp += r.fp;
    total.fn += r.fn;
    total.idsw += r.idsw;
    total.gt_count += r.gt_count;
    total.hyp_count += r.hyp_count;
    total.matches += r.matches;
    total.idtp += r.idtp;
    total.idfp += r.idfp;
    total.idfn += r.idfn;
  }
  total.finalize();
  return total;
}

std::string format_report_table(const std::vector<std::pair<std::string, EvalReport>>& rows) {
  std::size_t name_w = 8;
  for (const auto& [name, r] : rows) name_w = std::max(name_w, name.size());
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-*s %8s %8s %7s %7s %6s %8s\n", static_cast<int>(name_w), "sequence", "MOTA",
                "IDF1", "FP", "FN", "IDSW", "GT");
  out << buf;
  for (const auto& [name, r] : rows) {
    std::snprintf(buf, sizeof(buf), "%-*s %8.4f %8.4f %7ld %7ld %6ld %8ld\n", static_cast<int>(name_w), name.c_str(),
                  r.mota, r.idf1, r.fp, r.fn, r.idsw, r.gt_count);
    out << buf;
  }
  return out.str();
}

std::string report_to_json(const std::vector<std::pair<std::string, EvalReport>>& rows) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& [name, r] : rows) {
    nlohmann::ordered_json o;
    o["sequence"] = name;
    o["mota"] = r.mota;
    o["idf1"] = r.idf1;
    o["fp"] = r.fp;
    o["fn"] = r.fn;
    o["idsw"] = r.idsw;
    o["gt_count"] = r.gt_count;
    o["hyp_count"] = r.hyp_count;
    o["matches"] = r.matches;
    o["idtp"] = r.idtp;
    o["idfp"] = r.idfp;
    o["idfn"] = r.idfn;
    j.push_back(o);
  }
  return j.dump(2);
}

}  // namespace kinetrack
