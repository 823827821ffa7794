#pragma once

#include "kinetrack/scene.hpp"

#include <string>
#include <utility>
#include <vector>

namespace kinetrack {

inline constexpr double kEvalIouMin = 0.5;

struct EvalReport {
  double mota = 0.0;
  double idf1 = 0.0;
  long fp = 0;
  long fn = 0;
  long idsw = 0;
  long gt_count = 0;
  long hyp_count = 0;
  long matches = 0;
  long idtp = 0;
  long idfp = 0;
  long idfn = 0;

  /// Recomputes mota and idf1 from the counts.
  void finalize();
};

struct FrameCorrespondence {
  int frame = 0;
  std::vector<std::pair<int, int>> pairs;  // (gt id, hyp id), sorted by gt id
};

struct ClearResult {
  std::vector<FrameCorrespondence> frames;
  long matches = 0, fp = 0, fn = 0, idsw = 0, gt_count = 0, hyp_count = 0;
  double mota = 0.0;
};

/// CLEAR-MOT matching: correspondences from the previous frame are kept
/// while their IoU stays >= iou_min, the rest are matched optimally on
/// 1 - IoU. An ID switch is counted when a gt object's hypothesis differs
/// from the one it was last matched to.
ClearResult clear_match(const Scene& gt, const Scene& hyp, double iou_min = kEvalIouMin);

struct IdResult {
  long idtp = 0, idfp = 0, idfn = 0;
  double idf1 = 0.0;
};

/// Identity measures from the trajectory-level matching maximizing IDTP.
IdResult id_measures(const Scene& gt, const Scene& hyp, double iou_min = kEvalIouMin);

EvalReport evaluate(const Scene& gt, const Scene& hyp, double iou_min = kEvalIouMin);

/// Sums counts across sequences and recomputes the ratios.
EvalReport aggregate(const std::vector<EvalReport>& reports);

/// Aligned plain-text table, one row per (name, report).
std::string format_report_table(const std::vector<std::pair<std::string, EvalReport>>& rows);
std::string report_to_json(const std::vector<std::pair<std::string, EvalReport>>& rows);

}  // namespace kinetrack
