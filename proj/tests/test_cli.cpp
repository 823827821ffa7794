// Drives the kinetrack executable end to end.

#include "kinetrack/commands.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace kinetrack;
namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "kinetrack_test_cli";

struct Result {
  int code = 0;
  std::string out, err;
};

Result run(const std::string& args) {
  const auto out = kWork / "stdout.txt", err = kWork / "stderr.txt";
  const std::string cmd = std::string(KINETRACK_CLI) + " " + args + " > " + out.string() + " 2> " + err.string();
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_text_file(out);
  r.err = read_text_file(err);
  return r;
}

void write_spec(const fs::path& path, bool crossing) {
  std::ostringstream s;
  s << R"({"num_scenes": 3, "seed": 40, "name_prefix": "cli", "scene": {"frames": 80, "noise_std": 0.0, "drop_rate": 0.0,)"
    << R"( "objects": [{"kind": "linear", "count": 3, "speed": 0.002})";
  if (crossing) s << R"(, {"kind": "crossing-pair", "count": 1})";
  s << "]}}";
  write_text_file(path, s.str());
}

}  // namespace

TEST_CASE("synth, track with baselines, eval") {
  fs::remove_all(kWork);
  fs::create_directories(kWork);
  write_spec(kWork / "spec.json", false);
  REQUIRE(run("synth " + (kWork / "spec.json").string() + " --out " + (kWork / "data").string()).code == 0);
  CHECK(fs::exists(kWork / "data" / "cli-001" / "seqinfo.ini"));
  CHECK(fs::exists(kWork / "data" / "cli-003" / "det" / "det.txt"));
  CHECK(fs::exists(kWork / "data" / "benchmark.json"));

  // ground truth against itself
  const auto self = run("eval --json --gt " + (kWork / "data").string() + " --hyp " + (kWork / "hyp_gt").string());
  CHECK(self.code != 0);  // no such hypothesis directory
  fs::create_directories(kWork / "hyp_gt");
  for (const auto& seq : list_sequences(kWork / "data")) {
    fs::copy_file(seq / "gt" / "gt.txt", kWork / "hyp_gt" / (seq.filename().string() + ".txt"));
  }
  const auto perfect = run("eval --gt " + (kWork / "data").string() + " --hyp " + (kWork / "hyp_gt").string());
  REQUIRE(perfect.code == 0);
  const std::string agg = perfect.out.substr(perfect.out.find("AGGREGATE"));
  CHECK(agg.find(" 1.0000   1.0000 ") != std::string::npos);

  // noise-free, drop-free, non-crossing: no motion model still keeps every id
  for (const std::string p : {"none", "kalman"}) {
    const auto hyp = kWork / ("hyp_" + p);
    REQUIRE(run("track --predictor " + p + " --data " + (kWork / "data").string() + " --out " + hyp.string()).code == 0);
    CHECK(fs::exists(hyp / "run_config.json"));
    const auto rows = cmd_eval(kWork / "data", hyp);
    CHECK(rows.back().second.idsw == 0);
    CHECK(rows.back().second.fn == 0);
  }
}

TEST_CASE("failures exit nonzero with one machine-parsable line") {
  fs::create_directories(kWork);
  const auto bad_preset = run("train --preset huge --data " + kWork.string() + " --out " + (kWork / "x").string());
  CHECK(bad_preset.code != 0);
  const auto no_data = run("train --data " + kWork.string() + " --out " + (kWork / "x").string());
  CHECK(no_data.code == 2);
  CHECK(no_data.err.rfind("kinetrack-error stage=train kind=invalid_input msg=", 0) == 0);
  CHECK(std::count(no_data.err.begin(), no_data.err.end(), '\n') == 1);
  write_text_file(kWork / "bad.json", "{ not json");
  const auto bad_cfg = run("track --config " + (kWork / "bad.json").string() + " --data " + kWork.string() +
                           " --out " + (kWork / "y").string());
  CHECK(bad_cfg.code == 2);
  CHECK(bad_cfg.err.find("kind=invalid_input") != std::string::npos);
  const auto no_ckpt = run("track --predictor learned --data " + (kWork / "data").string() + " --out " +
                           (kWork / "z").string());
  CHECK(no_ckpt.code == 2);
  CHECK(no_ckpt.err.find("checkpoint") != std::string::npos);
}

TEST_CASE("flags override the config file") {
  fs::create_directories(kWork / "cfg");
  write_text_file(kWork / "cfg.json", R"({"seed": 5, "tracker": {"t_max": 7}})");
  REQUIRE(run("track --predictor none --config " + (kWork / "cfg.json").string() + " --t-max 9 --iou-gate 0.4" +
              " --data " + (kWork / "data").string() + " --out " + (kWork / "cfg").string())
              .code == 0);
  const RunConfig saved = load_run_config(kWork / "cfg" / "run_config.json");
  CHECK(saved.seed == 5);
  CHECK(saved.tracker.t_max == 9);
  CHECK(saved.tracker.iou_gate == 0.4);
  CHECK(saved.motion == MotionChoice::None);
}

TEST_CASE("gradcheck subcommand") {
  const auto r = run("gradcheck --seed 3 --d-model 8 --layers 1 --heads 2 --pooling last");
  CHECK(r.code == 0);
  CHECK(r.out.find("PASS") != std::string::npos);
}

TEST_CASE("synth, train, track, eval with the learned predictor") {
  write_spec(kWork / "spec_x.json", true);
  REQUIRE(run("synth " + (kWork / "spec_x.json").string() + " --out " + (kWork / "data_x").string()).code == 0);
  const auto model = kWork / "model";
  const auto trained = run("train --preset desk --steps 500 --seed 2 --data " + (kWork / "data_x").string() +
                           " --out " + model.string());
  REQUIRE(trained.code == 0);
  for (const char* f : {"run_config.json", "train_log.jsonl", "model.ckpt", "summary.json"}) {
    CHECK(fs::exists(model / f));
  }
  const std::string log = read_text_file(model / "train_log.jsonl");
  CHECK(std::count(log.begin(), log.end(), '\n') == 500);
  CHECK(log.rfind("{\"step\":1,\"loss\":", 0) == 0);
  const auto hyp = kWork / "hyp_learned";
  REQUIRE(run("track --predictor learned --diagnostics --checkpoint " + (model / "model.ckpt").string() + " --data " +
              (kWork / "data_x").string() + " --out " + hyp.string())
              .code == 0);
  CHECK(fs::exists(hyp / "cli-001.diagnostics.jsonl"));
  const auto ev = run("eval --gt " + (kWork / "data_x").string() + " --hyp " + hyp.string() + " --out " +
                      (kWork / "eval").string());
  REQUIRE(ev.code == 0);
  CHECK(fs::exists(kWork / "eval" / "eval.json"));
  const auto rows = cmd_eval(kWork / "data_x", hyp);
  CHECK(rows.back().second.mota > 0.9);
  fs::remove_all(kWork);
}
