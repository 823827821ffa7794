#include "kinetrack/tracker.hpp"

#include <doctest.h>

#include <random>
#include <set>
#include <sstream>

using namespace kinetrack;

namespace {

Detection det(double cx, double cy, double conf = 0.9) { return Detection{BBox{cx, cy, 0.05, 0.1}, conf, -1}; }

}  // namespace

TEST_CASE("one object, perfect detections: one identity") {
  const NoMotionModel none;
  const KalmanMotionModel kalman;
  for (const MotionModel* m : {static_cast<const MotionModel*>(&none), static_cast<const MotionModel*>(&kalman)}) {
    Tracker tracker(TrackerConfig{}, *m);
    std::set<int> ids;
    for (int f = 1; f <= 100; ++f) {
      const std::vector<Detection> d{det(0.2 + 0.002 * f, 0.5)};
      for (const auto& r : tracker.step(f, d)) ids.insert(r.track_id);
    }
    CHECK(ids == std::set<int>{1});
  }
}

TEST_CASE("lost tracks carry pseudo-observations and are removed after t_max") {
  TrackerConfig cfg;
  cfg.t_max = 5;
  const NoMotionModel none;
  Tracker tracker(cfg, none);
  const std::vector<Detection> d{det(0.5, 0.5)};
  tracker.step(1, d);
  tracker.step(2, d);
  for (int f = 3; f < 3 + 4; ++f) {
    CHECK(tracker.step(f, {}).empty());
    REQUIRE(tracker.tracks().size() == 1);
    const Track& t = tracker.tracks()[0];
    CHECK(t.state == TrackState::Lost);
    CHECK(t.age == f - 2);
    CHECK(t.last().pseudo);
    CHECK(t.last().frame == f);
  }
  tracker.step(7, {});  // fifth miss
  CHECK(tracker.tracks().empty());
  // the same place later opens a fresh identity
  const auto r = tracker.step(8, d);
  REQUIRE(r.size() == 1);
  CHECK(r[0].track_id == 2);
}

TEST_CASE("rebirth policies") {
  for (const auto policy : {RebirthPolicy::Keep, RebirthPolicy::Purge}) {
    TrackerConfig cfg;
    cfg.rebirth = policy;
    const NoMotionModel none;
    Tracker tracker(cfg, none);
    const std::vector<Detection> d{det(0.5, 0.5)};
    tracker.step(1, d);
    tracker.step(2, {});
    tracker.step(3, {});
    const auto r = tracker.step(4, d);
    REQUIRE(r.size() == 1);
    CHECK(r[0].track_id == 1);
    const auto& h = tracker.tracks()[0].history;
    CHECK(h.size() == (policy == RebirthPolicy::Keep ? 4u : 2u));
  }
  CHECK(rebirth_policy_from_string(to_string(RebirthPolicy::Purge)) == RebirthPolicy::Purge);
}

TEST_CASE("spawn confidence threshold") {
  const NoMotionModel none;
  Tracker tracker(TrackerConfig{}, none);
  const std::vector<Detection> d{det(0.3, 0.5, 0.59), det(0.7, 0.5, 0.6)};
  const auto r = tracker.step(1, d);
  REQUIRE(r.size() == 1);
  CHECK(r[0].box.cx == 0.7);
}

TEST_CASE("per-frame conservation, gate and id permanence on random clutter") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.1, 0.9), c(0.3, 1.0);
  std::poisson_distribution<int> count(4);
  TrackerConfig cfg;
  cfg.t_max = 3;
  const KalmanMotionModel kalman;
  Tracker tracker(cfg, kalman);
  std::set<int> removed;
  for (int f = 1; f <= 200; ++f) {
    std::vector<Detection> d;
    const int n = count(rng);
    for (int k = 0; k < n; ++k) d.push_back(Detection{BBox{u(rng), u(rng), 0.1, 0.2}, c(rng), -1});
    std::vector<BBox> predicted;
    std::set<int> before;
    for (const auto& t : tracker.tracks()) {
      predicted.push_back(t.predicted);
      before.insert(t.id);
    }
    const auto records = tracker.step(f, d);
    const auto& a = tracker.last_assignment();
    CHECK(a.matches.size() + a.unmatched_rows.size() == predicted.size());
    CHECK(a.matches.size() + a.unmatched_cols.size() == d.size());
    for (const auto& [ti, dj] : a.matches) CHECK(iou(predicted[ti], d[dj].box) >= cfg.iou_gate);
    std::set<int> after;
    for (const auto& t : tracker.tracks()) after.insert(t.id);
    for (int id : before) {
      if (!after.count(id)) removed.insert(id);
    }
    for (const auto& r : records) CHECK(removed.count(r.track_id) == 0);
  }
  CHECK(!removed.empty());
}

TEST_CASE("learned model fallbacks and window truncation") {
  Predictor<double> model(PredictorConfig::desk(), 3);
  Track t;
  t.history.push_back(Observation{1, BBox{0.4, 0.5, 0.05, 0.1}, false});
  CHECK(predict_for_track(t, model) == t.last().box);
  t.history.push_back(Observation{2, BBox{0.41, 0.5, 0.05, 0.1}, false});
  CHECK(predict_for_track(t, model) == t.last().box);  // zero head

  TrackerConfig cfg;
  const LearnedMotionModel<double> learned(model);
  Tracker tracker(cfg, learned);
  for (int f = 1; f <= 12; ++f) tracker.step(f, std::vector<Detection>{det(0.3 + 0.001 * f, 0.5)});
  REQUIRE(tracker.tracks().size() == 1);
  const auto& h = tracker.tracks()[0].history;
  CHECK(h.size() == 10);
  CHECK(h.front().frame == 3);
  CHECK(h.back().frame == 12);
}

TEST_CASE("input validation") {
  const NoMotionModel none;
  Tracker tracker(TrackerConfig{}, none);
  tracker.step(2, {});
  CHECK_THROWS(tracker.step(2, {}));
  CHECK_THROWS(tracker.step(1, {}));
  const std::vector<Detection> bad{Detection{BBox{0.5, 0.5, 0.0, 0.1}, 0.9, -1}};
  CHECK_THROWS(tracker.step(3, bad));
  TrackerConfig cfg;
  cfg.t_max = 0;
  CHECK_THROWS(Tracker(cfg, none));
}

TEST_CASE("run_tracker is deterministic and writes diagnostics") {
  Scene dets;
  dets.info.length = 50;
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g(0.0, 0.002);
  for (int f = 1; f <= 50; ++f) {
    dets.frames[f].push_back(det(0.2 + 0.004 * f + g(rng), 0.3));
    if (f % 4 != 0) dets.frames[f].push_back(det(0.8 - 0.004 * f + g(rng), 0.32));
  }
  const KalmanMotionModel kalman;
  std::ostringstream d1, d2;
  const Scene a = run_tracker(dets, TrackerConfig{}, kalman, &d1);
  const Scene b = run_tracker(dets, TrackerConfig{}, kalman, &d2);
  CHECK(d1.str() == d2.str());
  const std::string log = d1.str();
  CHECK(std::count(log.begin(), log.end(), '\n') == 50);
  REQUIRE(a.frames.size() == b.frames.size());
  for (const auto& [f, rows] : a.frames) {
    const auto& other = b.frames.at(f);
    REQUIRE(rows.size() == other.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      CHECK(rows[i].id == other[i].id);
      CHECK(rows[i].box == other[i].box);
    }
  }
}
