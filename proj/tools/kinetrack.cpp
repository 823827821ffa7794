// kinetrack: synth / train / track / eval / gradcheck / experiment.

#include "kinetrack/commands.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

namespace {

using namespace kinetrack;

struct CommonFlags {
  std::string config;
  std::optional<std::string> preset;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> predictor;
  std::optional<std::string> pooling;
  bool no_mhsa = false;
  bool no_dymlp = false;
  std::optional<double> drop_prob;
  std::optional<double> jitter;
  bool rand_len = false;
  std::optional<int> n_past;
  std::optional<int> t_max;
  std::optional<double> iou_gate;
  std::optional<long> steps;
  std::optional<int> batch_size;
  std::optional<int> warmup;
  std::optional<std::string> train_source;

  void attach(CLI::App* app) {
    app->add_option("--config", config, "RunConfig JSON (e.g. a saved run_config.json)");
    app->add_option("--preset", preset, "paper | desk")->check(CLI::IsMember({"paper", "desk"}));
    app->add_option("--seed", seed, "seed for initialization, batching and augmentation");
    app->add_option("--predictor", predictor, "learned | kalman | none")
        ->check(CLI::IsMember({"learned", "kalman", "none"}));
    app->add_option("--pooling", pooling, "mean | last | sum")->check(CLI::IsMember({"mean", "last", "sum"}));
    app->add_flag("--no-mhsa", no_mhsa, "drop the self-attention branch");
    app->add_flag("--no-dymlp", no_dymlp, "drop the dynamic MLP branch");
    app->add_option("--drop-prob", drop_prob, "observation drop probability during training (0 disables)");
    app->add_option("--jitter", jitter, "jitter scale during training (0 disables)");
    app->add_flag("--rand-len", rand_len, "random window length during training");
    app->add_option("--n-past", n_past, "observation window length");
    app->add_option("--t-max", t_max, "frames a lost track is kept");
    app->add_option("--iou-gate", iou_gate, "minimum IoU for a match");
    app->add_option("--steps", steps, "training steps");
    app->add_option("--batch-size", batch_size, "training batch size");
    app->add_option("--warmup", warmup, "learning-rate warmup steps");
    app->add_option("--train-source", train_source, "gt | det")->check(CLI::IsMember({"gt", "det"}));
  }

  // defaults < config file < flags
  RunConfig resolve() const {
    RunConfig cfg;
    if (!config.empty()) {
      const auto text = read_text_file(config);
      if (preset) {
        cfg = RunConfig::from_preset(*preset);
        cfg.merge_json(text);
      } else {
        cfg = RunConfig::from_json(text);
      }
    } else {
      cfg = RunConfig::from_preset(preset.value_or("desk"));
    }
    if (seed) cfg.seed = *seed;
    if (predictor) cfg.motion = motion_choice_from_string(*predictor);
    if (pooling) cfg.predictor.pooling = pooling_from_string(*pooling);
    if (no_mhsa) cfg.predictor.enable_mhsa = false;
    if (no_dymlp) cfg.predictor.enable_dymlp = false;
    if (drop_prob) {
      cfg.augment.drop_prob = *drop_prob;
      cfg.augment.drop = *drop_prob > 0.0;
    }
    if (jitter) {
      cfg.augment.jitter_scale = *jitter;
      cfg.augment.jitter = *jitter > 0.0;
    }
    if (rand_len) cfg.augment.random_length = true;
    if (n_past) cfg.predictor.n_past = cfg.tracker.n_past = *n_past;
    if (t_max) cfg.tracker.t_max = *t_max;
    if (iou_gate) cfg.tracker.iou_gate = *iou_gate;
    if (steps) cfg.train.steps = *steps;
    if (batch_size) cfg.train.batch_size = *batch_size;
    if (warmup) cfg.train.warmup = *warmup;
    if (train_source) cfg.train_source = train_source_from_string(*train_source);
    cfg.validate();
    return cfg;
  }
};

std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Motion-based multi-object tracking with a learned trajectory predictor"};
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synth", "generate synthetic scenes (gt + noisy detections)");
  std::string synth_spec, synth_out;
  synth->add_option("spec", synth_spec, "benchmark spec JSON")->required()->check(CLI::ExistingFile);
  synth->add_option("--out", synth_out, "output directory")->required();

  CommonFlags train_flags, track_flags, grad_flags, exp_flags;

  auto* train = app.add_subcommand("train", "train the predictor on windows cut from gt trajectories");
  std::string train_data, train_out;
  train->add_option("--data", train_data, "sequence root")->required()->check(CLI::ExistingDirectory);
  train->add_option("--out", train_out, "output directory")->required();
  train_flags.attach(train);

  auto* track = app.add_subcommand("track", "run the tracker over the detections of every sequence");
  std::string track_data, track_out, track_ckpt;
  bool track_diag = false;
  track->add_option("--data", track_data, "sequence root or a single sequence")->required()->check(
      CLI::ExistingDirectory);
  track->add_option("--out", track_out, "output directory")->required();
  track->add_option("--checkpoint", track_ckpt, "model checkpoint (learned predictor)");
  track->add_flag("--diagnostics", track_diag, "write per-frame JSON-lines diagnostics");
  track_flags.attach(track);

  auto* eval = app.add_subcommand("eval", "CLEAR MOT and IDF1 per sequence plus aggregate");
  std::string eval_gt, eval_hyp, eval_out;
  bool eval_json = false;
  eval->add_option("--gt", eval_gt, "sequence root with gt/gt.txt")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--hyp", eval_hyp, "directory of <sequence>.txt results")->required()->check(
      CLI::ExistingDirectory);
  eval->add_option("--out", eval_out, "optional output directory for eval.txt / eval.json");
  eval->add_flag("--json", eval_json, "print JSON instead of the table");

  auto* grad = app.add_subcommand("gradcheck", "finite-difference check of every parameter gradient");
  int grad_seeds = 1;
  GradcheckOptions grad_opts;
  grad->add_option("--seeds", grad_seeds, "number of consecutive seeds starting at --seed");
  grad->add_option("--d-model", grad_opts.d_model);
  grad->add_option("--layers", grad_opts.layers);
  grad->add_option("--heads", grad_opts.heads);
  grad->add_option("--tolerance", grad_opts.tolerance);
  grad_flags.attach(grad);

  auto* exp = app.add_subcommand("experiment", "train/evaluate variants along one axis and print a table");
  std::string exp_axis, exp_train, exp_test, exp_out;
  exp->add_option("axis", exp_axis, "pooling | components | drop | motion")
      ->required()
      ->check(CLI::IsMember({"pooling", "components", "drop", "motion"}));
  exp->add_option("--train-data", exp_train, "training sequence root")->required()->check(CLI::ExistingDirectory);
  exp->add_option("--test-data", exp_test, "evaluation sequence root")->required()->check(CLI::ExistingDirectory);
  exp->add_option("--out", exp_out, "output directory");
  exp_flags.attach(exp);

  CLI11_PARSE(app, argc, argv);

  std::string stage = "startup";
  try {
    if (*synth) {
      stage = "synth";
      cmd_synth(synth_spec, synth_out);
    } else if (*train) {
      stage = "train";
      cmd_train(train_flags.resolve(), train_data, train_out);
    } else if (*track) {
      stage = "track";
      cmd_track(track_flags.resolve(), track_data, track_ckpt, track_out, track_diag);
    } else if (*eval) {
      stage = "eval";
      const auto rows = cmd_eval(eval_gt, eval_hyp, eval_out);
      std::cout << (eval_json ? report_to_json(rows) + "\n" : format_report_table(rows));
    } else if (*grad) {
      stage = "gradcheck";
      const auto cfg = grad_flags.resolve();
      bool ok = true;
      for (int k = 0; k < grad_seeds; ++k) {
        const auto r = cmd_gradcheck(cfg, cfg.seed + static_cast<std::uint64_t>(k), grad_opts);
        std::printf("seed=%llu checked=%zu max_rel_err=%.3e worst=%s %s\n", static_cast<unsigned long long>(r.seed),
                    r.checked, r.max_rel_error, r.worst.c_str(), r.passed ? "PASS" : "FAIL");
        ok = ok && r.passed;
      }
      if (!ok) {
        std::fprintf(stderr, "kinetrack-error stage=gradcheck kind=tolerance msg=gradient mismatch above %g\n",
                     grad_opts.tolerance);
        return 3;
      }
    } else if (*exp) {
      stage = "experiment";
      const auto rows = run_experiment(exp_axis, exp_flags.resolve(), exp_train, exp_test, exp_out);
      std::cout << format_experiment_table(rows);
    }
  } catch (const PreconditionError& e) {
    std::fprintf(stderr, "kinetrack-error stage=%s kind=precondition msg=%s\n", stage.c_str(),
                 one_line(e.what()).c_str());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "kinetrack-error stage=%s kind=invalid_input msg=%s\n", stage.c_str(),
                 one_line(e.what()).c_str());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "kinetrack-error stage=%s kind=runtime msg=%s\n", stage.c_str(), one_line(e.what()).c_str());
    return 1;
  }
  return 0;
}
