#include "kinetrack/metrics.hpp"

#include <doctest.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <random>

using namespace kinetrack;

namespace {

BBox lane(int lane_index, int frame) { return BBox{0.1 + 0.01 * frame, 0.2 + 0.3 * lane_index, 0.05, 0.1}; }

// Two objects in separate lanes for 10 frames; the hypothesis swaps their
// ids from frame 6 on.
std::pair<Scene, Scene> swap_fixture() {
  Scene gt, hyp;
  for (int f = 1; f <= 10; ++f) {
    for (int k = 0; k < 2; ++k) {
      gt.frames[f].push_back(Detection{lane(k, f), 1.0, k + 1});
      const int hid = f <= 5 ? k + 1 : 2 - k;
      hyp.frames[f].push_back(Detection{lane(k, f), 1.0, hid});
    }
  }
  return {gt, hyp};
}

// IDTP maximized over every injective gt -> hyp map by enumeration.
long brute_force_idtp(const Scene& gt, const Scene& hyp, double iou_min) {
  std::vector<int> gt_ids, hyp_ids;
  for (const auto& [id, obs] : gt.trajectories()) gt_ids.push_back(id);
  for (const auto& [id, obs] : hyp.trajectories()) hyp_ids.push_back(id);
  std::map<std::pair<int, int>, long> overlap;
  for (const auto& [f, rows] : gt.frames) {
    const auto it = hyp.frames.find(f);
    if (it == hyp.frames.end()) continue;
    for (const auto& g : rows) {
      for (const auto& h : it->second) {
        if (iou(g.box, h.box) >= iou_min) ++overlap[{g.id, h.id}];
      }
    }
  }
  // pad with "unmatched" slots so every gt can also stay unassigned
  std::vector<int> slots = hyp_ids;
  for (std::size_t i = 0; i < gt_ids.size(); ++i) slots.push_back(-1);
  std::sort(slots.begin(), slots.end());
  long best = 0;
  do {
    long s = 0;
    for (std::size_t i = 0; i < gt_ids.size(); ++i) {
      if (slots[i] < 0) continue;
      const auto it = overlap.find({gt_ids[i], slots[i]});
      if (it != overlap.end()) s += it->second;
    }
    best = std::max(best, s);
  } while (std::next_permutation(slots.begin(), slots.end()));
  return best;
}

Scene shuffled_rows(Scene s, std::mt19937_64& rng) {
  for (auto& [f, rows] : s.frames) std::shuffle(rows.begin(), rows.end(), rng);
  return s;
}

}  // namespace

TEST_CASE("two-track swap fixture") {
  const auto [gt, hyp] = swap_fixture();
  const EvalReport r = evaluate(gt, hyp);
  CHECK(r.idsw == 2);
  CHECK(r.fp == 0);
  CHECK(r.fn == 0);
  CHECK(r.gt_count == 20);
  CHECK(r.mota == 1.0 - 2.0 / 20.0);
  CHECK(r.idtp == 10);
  CHECK(r.idfp == 10);
  CHECK(r.idfn == 10);
  CHECK(r.idf1 == 0.5);
}

TEST_CASE("perfect and empty hypotheses") {
  const auto [gt, hyp] = swap_fixture();
  const EvalReport same = evaluate(gt, gt);
  CHECK(same.mota == 1.0);
  CHECK(same.idf1 == 1.0);
  CHECK(same.idsw == 0);
  const EvalReport empty = evaluate(gt, Scene{});
  CHECK(empty.fn == 20);
  CHECK(empty.mota == 0.0);
  CHECK(empty.idf1 == 0.0);
}

TEST_CASE("switch counted against the last matched hypothesis across gaps") {
  Scene gt, hyp;
  for (int f = 1; f <= 9; ++f) {
    gt.frames[f].push_back(Detection{lane(0, f), 1.0, 1});
    if (f == 4 || f == 5) continue;  // missed frames
    hyp.frames[f].push_back(Detection{lane(0, f), 1.0, f < 4 ? 1 : 7});
  }
  const EvalReport r = evaluate(gt, hyp);
  CHECK(r.fn == 2);
  CHECK(r.idsw == 1);
}

TEST_CASE("carry-over keeps an existing correspondence over a better new one") {
  Scene gt, hyp;
  const BBox g{0.5, 0.5, 0.1, 0.1};
  const BBox near{0.51, 0.5, 0.1, 0.1};   // IoU ~ 0.82
  for (int f = 1; f <= 4; ++f) {
    gt.frames[f].push_back(Detection{g, 1.0, 1});
    hyp.frames[f].push_back(Detection{f == 1 ? g : near, 1.0, 1});
    if (f >= 2) hyp.frames[f].push_back(Detection{g, 1.0, 2});  // exact, but newer
  }
  const EvalReport r = evaluate(gt, hyp);
  CHECK(r.idsw == 0);
  CHECK(r.fp == 3);
}

TEST_CASE("identity measures equal exhaustive search on random scenes") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> pick(1, 4);
  std::bernoulli_distribution present(0.8);
  for (int trial = 0; trial < 40; ++trial) {
    Scene gt, hyp;
    for (int f = 1; f <= 15; ++f) {
      for (int k = 0; k < 3; ++k) {
        if (!present(rng)) continue;
        gt.frames[f].push_back(Detection{lane(k, f), 1.0, k + 1});
        if (present(rng)) hyp.frames[f].push_back(Detection{lane(k, f), 1.0, 10 + pick(rng)});
      }
    }
    // drop duplicate hypothesis ids inside a frame
    for (auto& [f, rows] : hyp.frames) {
      std::vector<Detection> unique;
      for (const auto& d : rows) {
        if (std::none_of(unique.begin(), unique.end(), [&](const Detection& u) { return u.id == d.id; })) {
          unique.push_back(d);
        }
      }
      rows = unique;
    }
    const IdResult r = id_measures(gt, hyp);
    const long idtp = brute_force_idtp(gt, hyp, kEvalIouMin);
    CHECK(r.idtp == idtp);
    CHECK(r.idfn == static_cast<long>(gt.detection_count()) - idtp);
    CHECK(r.idfp == static_cast<long>(hyp.detection_count()) - idtp);
    if (r.idtp + r.idfp + r.idfn > 0) {
      CHECK(r.idf1 == doctest::Approx(2.0 * r.idtp / (2.0 * r.idtp + r.idfp + r.idfn)).epsilon(1e-15));
    }
  }
}

TEST_CASE("invariances and bounds") {
  std::mt19937_64 rng(4);
  const auto [gt, hyp] = swap_fixture();
  const EvalReport base = evaluate(gt, hyp);
  for (int k = 0; k < 10; ++k) {
    const EvalReport r = evaluate(shuffled_rows(gt, rng), shuffled_rows(hyp, rng));
    CHECK(r.idsw == base.idsw);
    CHECK(r.mota == base.mota);
    CHECK(r.idf1 == base.idf1);
  }
  // false tracks never raise IDF1 of a perfect hypothesis
  Scene noisy = gt;
  double last = evaluate(gt, noisy).idf1;
  for (int extra = 0; extra < 5; ++extra) {
    for (int f = 1; f <= 10; ++f) noisy.frames[f].push_back(Detection{BBox{0.9, 0.9 - 0.1 * extra, 0.05, 0.05}, 1, 50 + extra});
    const EvalReport r = evaluate(gt, noisy);
    CHECK(r.idf1 <= last);
    CHECK(r.mota <= 1.0);
    last = r.idf1;
  }
}

TEST_CASE("aggregate sums counts") {
  const auto [gt, hyp] = swap_fixture();
  const EvalReport a = evaluate(gt, hyp);
  const EvalReport b = evaluate(gt, gt);
  const EvalReport s = aggregate({a, b});
  CHECK(s.idsw == 2);
  CHECK(s.gt_count == 40);
  CHECK(s.mota == 1.0 - 2.0 / 40.0);
  CHECK(s.idf1 == doctest::Approx(2.0 * 30 / (2.0 * 30 + 10 + 10)).epsilon(1e-15));
  const std::string table = format_report_table({{"a", a}, {"b", b}, {"AGGREGATE", s}});
  CHECK(table.find("AGGREGATE") != std::string::npos);
  CHECK(report_to_json({{"a", a}}).find("\"idsw\": 2") != std::string::npos);
}
