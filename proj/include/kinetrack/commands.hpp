#pragma once

// Subcommand bodies shared by the command-line tool, the experiment harness
// and the tests. Every command writes only under its output directory.

#include "kinetrack/config.hpp"
#include "kinetrack/metrics.hpp"
#include "kinetrack/synth.hpp"

#include <filesystem>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

namespace kinetrack {

namespace fs = std::filesystem;

/// A synthetic benchmark: either an explicit "scenes" array or a "scene"
/// template replicated "num_scenes" times with seeds seed, seed+1, ...
struct BenchmarkSpec {
  std::vector<SceneSpec> scenes;

  static BenchmarkSpec from_json(const std::string& text);
  std::string to_json() const;
};

/// Writes <out>/<scene>/{seqinfo.ini,gt/gt.txt,det/det.txt} and the resolved
/// spec as <out>/benchmark.json.
void cmd_synth(const fs::path& spec_file, const fs::path& out_dir);
void write_benchmark(const BenchmarkSpec& spec, const fs::path& out_dir);

std::vector<SequenceData> load_sequences(const fs::path& root);

/// Training windows from every sequence under `root`.
std::vector<TrainingSample> load_training_samples(const RunConfig& cfg, const std::vector<SequenceData>& seqs);

/// Evenly strided subset used to report dataset loss before and after training.
std::vector<TrainingSample> loss_probe(const std::vector<TrainingSample>& samples, std::size_t max_count = 1000);

struct TrainSummary {
  std::size_t samples = 0;
  std::size_t parameters = 0;
  double initial_loss = 0.0;  // probe loss at step 0
  double final_loss = 0.0;    // probe loss after the last step
};

/// Builds the predictor from cfg.seed and trains it. `log` receives the
/// JSON-lines loss log.
Predictor<float> train_model(const RunConfig& cfg, const std::vector<TrainingSample>& samples, TrainSummary* summary,
                             std::ostream* log = nullptr, const fs::path& checkpoint_dir = {});

/// Writes run_config.json, train_log.jsonl, model.ckpt, summary.json and
/// periodic checkpoints into out_dir.
TrainSummary cmd_train(const RunConfig& cfg, const fs::path& data_dir, const fs::path& out_dir);

/// Motion model for cfg.motion; the learned one needs a loaded predictor.
std::unique_ptr<MotionModel> make_motion_model(const RunConfig& cfg, const Predictor<float>* predictor);

/// Tracks the detections of every sequence and returns hypotheses in
/// sequence order.
std::vector<Scene> track_sequences(const RunConfig& cfg, const MotionModel& model, const std::vector<SequenceData>& seqs,
                                   const fs::path& diagnostics_dir = {});

/// Writes <out>/<sequence>.txt for every sequence plus run_config.json.
/// `checkpoint` is required for the learned predictor only.
void cmd_track(const RunConfig& cfg, const fs::path& seq_dir, const fs::path& checkpoint, const fs::path& out_dir,
               bool diagnostics = false);

using NamedReports = std::vector<std::pair<std::string, EvalReport>>;

/// Per-sequence reports followed by an "AGGREGATE" row.
NamedReports evaluate_sequences(const std::vector<SequenceData>& seqs, const std::vector<Scene>& hyps);

/// Reads <hyp_dir>/<sequence>.txt for every sequence under gt_dir. Writes
/// eval.txt and eval.json into out_dir when it is non-empty.
NamedReports cmd_eval(const fs::path& gt_dir, const fs::path& hyp_dir, const fs::path& out_dir = {});

struct GradcheckOptions {
  int d_model = 16;
  int layers = 2;
  int heads = 2;
  int windows = 3;
  double step = 1e-5;
  double tolerance = 1e-3;
  double abs_floor = 1e-7;  // relative error denominator floor
};

struct GradcheckResult {
  std::uint64_t seed = 0;
  std::size_t checked = 0;
  double max_rel_error = 0.0;
  std::string worst;  // parameter[index] with the largest error
  bool passed = false;
};

/// Central differences against reverse mode for every scalar parameter of a
/// randomly initialized double-precision predictor. Architecture switches
/// (pooling, MHSA, DyMLP) come from cfg.predictor.
GradcheckResult cmd_gradcheck(const RunConfig& cfg, std::uint64_t seed, const GradcheckOptions& opts = {});

struct VariantResult {
  std::string name;
  std::size_t parameters = 0;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  EvalReport report;
};

/// Trains (when learned) and evaluates one configuration.
VariantResult run_variant(const std::string& name, const RunConfig& cfg, const std::vector<TrainingSample>& train,
                          const std::vector<SequenceData>& test);

/// Axis is one of pooling | components | drop | motion. Writes
/// experiment.txt/json into out_dir when non-empty.
std::vector<VariantResult> run_experiment(const std::string& axis, const RunConfig& base, const fs::path& train_dir,
                                          const fs::path& test_dir, const fs::path& out_dir = {});

std::string format_experiment_table(const std::vector<VariantResult>& rows);
std::string experiment_to_json(const std::vector<VariantResult>& rows);

/// Log verbosity from KINETRACK_LOG (0 quiet, 1 info, 2 debug). Default 1.
int log_level();

}  // namespace kinetrack
