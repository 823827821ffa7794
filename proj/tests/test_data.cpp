#include "kinetrack/synth.hpp"
#include "kinetrack/windows.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace kinetrack;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

Scene track_scene(std::initializer_list<std::pair<int, int>> id_lengths) {
  Scene s;
  s.info.length = 100;
  for (const auto& [id, len] : id_lengths) {
    for (int f = 1; f <= len; ++f) {
      s.frames[f].push_back(Detection{BBox{0.1 + 0.01 * f + 0.2 * id, 0.5 - 0.002 * f, 0.04, 0.1 + 0.001 * f}, 1.0, id});
    }
  }
  return s;
}

bool consistent(const TrainingSample& s) {
  const auto& boxes = s.window.boxes();
  const auto tokens = s.window.tokens();
  if (tokens.front().d_cx != 0.0 || tokens.front().d_h != 0.0) return false;
  for (std::size_t i = 1; i < boxes.size(); ++i) {
    const Offset4 d = encode_offset(boxes[i - 1], boxes[i]);
    if (!(tokens[i].d_cx == d.d_cx && tokens[i].d_cy == d.d_cy && tokens[i].d_w == d.d_w && tokens[i].d_h == d.d_h)) {
      return false;
    }
  }
  return s.target == encode_offset(s.window.base_box(), s.next_box);
}

}  // namespace

TEST_CASE("parse a MOT row") {
  TempDir dir("kinetrack_test_mot_row");
  spit(dir.path / "a.txt", "1,3,10,20,30,40,1,-1,-1,-1\n");
  SequenceInfo info;
  info.width = info.height = 100;
  const Scene s = parse_mot(dir.path / "a.txt", info);
  REQUIRE(s.frames.at(1).size() == 1);
  const Detection& d = s.frames.at(1)[0];
  CHECK(d.id == 3);
  CHECK(d.box.cx == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(d.box.cy == doctest::Approx(0.40).epsilon(1e-15));
  CHECK(d.box.w == doctest::Approx(0.30).epsilon(1e-15));
  CHECK(d.box.h == doctest::Approx(0.40).epsilon(1e-15));
  CHECK(d.confidence == 1.0);

  spit(dir.path / "empty.txt", "");
  CHECK(parse_mot(dir.path / "empty.txt", info).detection_count() == 0);
}

TEST_CASE("malformed MOT rows name the line") {
  TempDir dir("kinetrack_test_mot_bad");
  SequenceInfo info;
  const std::vector<std::string> bad{"1,2,3\n", "0,1,10,10,5,5\n", "1,1,10,10,0,5\n", "1.5,1,10,10,5,5\n",
                                     "1,1,10,x,5,5\n"};
  for (const auto& row : bad) {
    spit(dir.path / "b.txt", "1,1,10,10,5,5\n" + row);
    try {
      parse_mot(dir.path / "b.txt", info);
      FAIL("accepted: " << row);
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find(":2") != std::string::npos);
    }
  }
}

TEST_CASE("write(parse(x)) reproduces x") {
  TempDir dir("kinetrack_test_mot_rt");
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> px(0, 1800000), ext(1000, 300000);
  std::ostringstream text;
  int rows = 0;
  for (int f = 1; rows < 50; ++f) {
    for (int id = 1; id <= 4 && rows < 50; ++id, ++rows) {
      text << f << ',' << id << ',' << format_number(px(rng) / 1000.0) << ',' << format_number(px(rng) / 2000.0) << ','
           << format_number(ext(rng) / 1000.0) << ',' << format_number(ext(rng) / 1000.0) << ",1,-1,-1,-1\n";
    }
  }
  spit(dir.path / "in.txt", text.str());
  SequenceInfo info;
  const Scene s = parse_mot(dir.path / "in.txt", info);
  write_mot(s, dir.path / "out.txt");
  CHECK(slurp(dir.path / "out.txt") == text.str());
}

TEST_CASE("writing orders rows by frame then id") {
  TempDir dir("kinetrack_test_mot_order");
  Scene s;
  s.frames[2].push_back(Detection{BBox{0.5, 0.5, 0.1, 0.1}, 1.0, 7});
  s.frames[2].push_back(Detection{BBox{0.2, 0.5, 0.1, 0.1}, 1.0, 3});
  s.frames[1].push_back(Detection{BBox{0.2, 0.5, 0.1, 0.1}, 1.0, 9});
  write_mot(s, dir.path / "o.txt");
  std::istringstream in(slurp(dir.path / "o.txt"));
  std::string line;
  std::vector<std::string> heads;
  while (std::getline(in, line)) heads.push_back(line.substr(0, line.find(',', line.find(',') + 1)));
  CHECK(heads == std::vector<std::string>{"1,9", "2,3", "2,7"});
  CHECK(format_number(-0.0000001) == "0");
  CHECK(format_number(12.5) == "12.5");
  CHECK(format_number(3.0) == "3");
}

TEST_CASE("sequence metadata") {
  TempDir dir("kinetrack_test_seqinfo");
  SequenceInfo info{"seq-a", 640, 480, 30.0, 77};
  write_seqinfo(dir.path / "seqinfo.ini", info);
  const SequenceInfo back = read_seqinfo(dir.path / "seqinfo.ini");
  CHECK(back.name == "seq-a");
  CHECK(back.width == 640);
  CHECK(back.height == 480);
  CHECK(back.fps == 30.0);
  CHECK(back.length == 77);
  spit(dir.path / "bad.ini", "[Sequence]\nimWidth=640\n");
  CHECK_THROWS_AS(read_seqinfo(dir.path / "bad.ini"), FormatError);
  CHECK_THROWS_AS(read_seqinfo(dir.path / "missing.ini"), FormatError);
}

TEST_CASE("pixel normalization round trip through files") {
  TempDir dir("kinetrack_test_norm");
  Scene s;
  s.info = SequenceInfo{"n", 1920, 1080, 25.0, 1};
  s.frames[1].push_back(Detection{BBox::from_tlwh(100.125, 200.5, 40.25, 80.75, 1920, 1080), 0.8, 1});
  write_mot(s, dir.path / "n.txt");
  const Scene back = parse_mot(dir.path / "n.txt", s.info);
  const auto px = back.frames.at(1)[0].box.to_tlwh(1920, 1080);
  CHECK(std::abs(px.left - 100.125) < 1e-9);
  CHECK(std::abs(px.top - 200.5) < 1e-9);
  CHECK(std::abs(px.width - 40.25) < 1e-9);
  CHECK(std::abs(px.height - 80.75) < 1e-9);
}

TEST_CASE("synthetic linear motion is affine and seeded runs repeat") {
  SceneSpec spec;
  spec.frames = 120;
  spec.seed = 17;
  spec.objects = {ObjectGroup{MotionKind::Linear, 3, 0.003}};
  const SynthScene a = synth_scene(spec);
  for (const auto& [id, obs] : a.gt.trajectories()) {
    REQUIRE(obs.size() > 10);
    for (std::size_t i = 2; i < obs.size(); ++i) {
      CHECK(obs[i].first == obs[i - 1].first + 1);
      const double ddx = obs[i].second.cx - 2 * obs[i - 1].second.cx + obs[i - 2].second.cx;
      const double ddy = obs[i].second.cy - 2 * obs[i - 1].second.cy + obs[i - 2].second.cy;
      CHECK(std::abs(ddx) < 1e-12);
      CHECK(std::abs(ddy) < 1e-12);
    }
  }
  const SynthScene b = synth_scene(spec);
  REQUIRE(a.det.frames.size() == b.det.frames.size());
  for (const auto& [f, rows] : a.det.frames) {
    const auto& other = b.det.frames.at(f);
    REQUIRE(rows.size() == other.size());
    for (std::size_t i = 0; i < rows.size(); ++i) CHECK(rows[i].box == other[i].box);
  }
}

TEST_CASE("crossing pairs meet at the designed frame") {
  SceneSpec spec;
  spec.frames = 200;
  spec.seed = 5;
  spec.objects = {ObjectGroup{MotionKind::CrossingPair, 3}};
  const auto crossings = crossing_frames(spec);
  REQUIRE(crossings.size() == 3);
  const SynthScene s = synth_scene(spec);
  const auto tracks = s.gt.trajectories();
  for (const auto& c : crossings) {
    auto at = [&](int id) {
      for (const auto& [f, b] : tracks.at(id)) {
        if (f == c.frame) return b;
      }
      FAIL("object " << id << " absent at its crossing frame");
      return BBox{};
    };
    const BBox a = at(c.first_id), b = at(c.second_id);
    CHECK(std::abs(a.cx - b.cx) < 1e-12);
    CHECK(std::abs(a.cy - b.cy) < 1e-12);
  }
}

TEST_CASE("detection drop rate and noise") {
  SceneSpec spec;
  spec.frames = 300;
  spec.seed = 8;
  spec.drop_rate = 0.1;
  spec.noise_std = 0.05;
  spec.objects = {ObjectGroup{MotionKind::Sinusoidal, 6, 0.001}};
  const SynthScene s = synth_scene(spec);
  const double kept = double(s.det.detection_count()) / double(s.gt.detection_count());
  CHECK(kept == doctest::Approx(0.9).epsilon(0.03));
  for (const auto& [f, rows] : s.det.frames) {
    for (const auto& d : rows) {
      CHECK(d.id == -1);
      CHECK(d.box.valid());
    }
  }
}

TEST_CASE("scene spec json and validation") {
  SceneSpec spec;
  spec.name = "x";
  spec.drop_rate = 0.2;
  spec.objects = {ObjectGroup{MotionKind::Turn, 2}, ObjectGroup{MotionKind::CrossingPair, 1}};
  const SceneSpec back = SceneSpec::from_json(spec.to_json());
  CHECK(back.to_json() == spec.to_json());
  spec.drop_rate = 1.5;
  CHECK_THROWS(spec.validate());
  CHECK_THROWS(motion_kind_from_string("zigzag"));
}

TEST_CASE("window extraction counts and targets") {
  CHECK(extract_windows(track_scene({{1, 3}}), 10).size() == 1);
  const auto samples = extract_windows(track_scene({{1, 12}}), 10);
  REQUIRE(samples.size() == 10);
  std::size_t longest = 0;
  for (const auto& s : samples) longest = std::max(longest, s.window.size());
  CHECK(longest == 10);
  const auto traj = track_scene({{1, 12}}).trajectories().at(1);
  for (std::size_t k = 0; k < samples.size(); ++k) {
    // sample k ends at observation k+1 and predicts observation k+2
    const BBox last = traj[k + 1].second, next = traj[k + 2].second;
    CHECK(samples[k].window.base_box() == last);
    CHECK(samples[k].next_box == next);
    CHECK(samples[k].target.d_cx == next.cx - last.cx);
    CHECK(samples[k].target.d_h == next.h - last.h);
    CHECK(consistent(samples[k]));
  }
  // a missing next frame yields no sample for that step
  Scene gap = track_scene({{1, 6}});
  gap.frames.erase(4);
  CHECK(extract_windows(gap, 10).size() == 2);
}

TEST_CASE("augmentation") {
  const auto samples = extract_windows(track_scene({{1, 30}, {2, 25}}), 10);
  std::mt19937_64 rng(12);
  AugmentPolicy off;
  off.drop = off.jitter = off.random_length = false;
  for (const auto& s : samples) {
    const auto a = augment(s, off, rng);
    CHECK(a.window.boxes() == s.window.boxes());
    CHECK(a.target == s.target);
  }
  AugmentPolicy drop_only = off;
  drop_only.drop = true;
  drop_only.drop_prob = 0.3;
  AugmentPolicy length_only = off;
  length_only.random_length = true;
  const AugmentPolicy everything{true, 0.3, true, 0.05, true};
  int shortened = 0;
  for (int k = 0; k < 1000; ++k) {
    const auto& s = samples[static_cast<std::size_t>(k) % samples.size()];
    const auto d = augment(s, drop_only, rng);
    CHECK(d.window.size() >= std::min<std::size_t>(2, s.window.size()));
    CHECK(d.window.base_box() == s.window.base_box());
    CHECK(consistent(d));
    shortened += d.window.size() < s.window.size();
    const auto l = augment(s, length_only, rng);
    CHECK(l.window.size() >= std::min<std::size_t>(2, s.window.size()));
    CHECK(l.window.size() <= s.window.size());
    CHECK(consistent(l));
    const auto e = augment(s, everything, rng);
    CHECK(consistent(e));
  }
  CHECK(shortened > 0);
}

TEST_CASE("training on detections matched to ground truth") {
  SceneSpec spec;
  spec.frames = 60;
  spec.seed = 2;
  spec.noise_std = 0.02;
  spec.drop_rate = 0.1;
  spec.objects = {ObjectGroup{MotionKind::Linear, 3, 0.002}};
  const SynthScene s = synth_scene(spec);
  const Scene matched = detections_with_gt_ids(s.gt, s.det);
  CHECK(matched.detection_count() <= s.det.detection_count());
  CHECK(matched.detection_count() > s.det.detection_count() * 9 / 10);
  for (const auto& [f, rows] : matched.frames) {
    for (const auto& d : rows) {
      CHECK(d.id > 0);
      bool found = false;
      for (const auto& g : s.gt.frames.at(f)) found = found || (g.id == d.id && iou(g.box, d.box) >= 0.5);
      CHECK(found);
    }
  }
}
