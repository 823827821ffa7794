#include "kinetrack/commands.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>

namespace kinetrack {

using nlohmann::json;
using nlohmann::ordered_json;

int log_level() {
  const char* v = std::getenv("KINETRACK_LOG");
  if (!v || !*v) return 1;
  const std::string s(v);
  if (s == "quiet" || s == "0") return 0;
  if (s == "debug" || s == "2") return 2;
  return 1;
}

namespace {

void info(const std::string& msg) {
  if (log_level() >= 1) std::cerr << msg << '\n';
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

void ensure_dir(const fs::path& dir) {
  if (dir.empty()) throw std::invalid_argument("output directory is required");
  fs::create_directories(dir);
}

}  // namespace

BenchmarkSpec BenchmarkSpec::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("benchmark spec is not valid JSON: ") + e.what());
  }
  BenchmarkSpec spec;
  if (j.contains("scenes")) {
    for (const auto& s : j["scenes"]) spec.scenes.push_back(SceneSpec::from_json(s.dump()));
  } else if (j.contains("scene")) {
    const int n = j.value("num_scenes", 1);
    if (n < 1) throw std::invalid_argument("num_scenes must be >= 1");
    const auto seed = j.value("seed", std::uint64_t{0});
    const std::string prefix = j.value("name_prefix", std::string("synth"));
    const SceneSpec base = SceneSpec::from_json(j["scene"].dump());
    for (int i = 0; i < n; ++i) {
      SceneSpec s = base;
      char name[32];
      std::snprintf(name, sizeof(name), "-%03d", i + 1);
      s.name = prefix + name;
      s.seed = seed + static_cast<std::uint64_t>(i);
      spec.scenes.push_back(s);
    }
  } else {
    // A bare scene spec.
    spec.scenes.push_back(SceneSpec::from_json(text));
  }
  if (spec.scenes.empty()) throw std::invalid_argument("benchmark spec has no scenes");
  for (std::size_t a = 0; a < spec.scenes.size(); ++a) {
    for (std::size_t b = a + 1; b < spec.scenes.size(); ++b) {
      if (spec.scenes[a].name == spec.scenes[b].name) {
        throw std::invalid_argument("duplicate scene name '" + spec.scenes[a].name + "'");
      }
    }
  }
  return spec;
}

std::string BenchmarkSpec::to_json() const {
  ordered_json j;
  auto& arr = j["scenes"] = ordered_json::array();
  for (const auto& s : scenes) arr.push_back(ordered_json::parse(s.to_json()));
  return j.dump(2) + "\n";
}

void write_benchmark(const BenchmarkSpec& spec, const fs::path& out_dir) {
  ensure_dir(out_dir);
  for (const auto& s : spec.scenes) {
    const auto scene = synth_scene(s);
    write_sequence(out_dir, scene.gt, scene.det);
  }
  write_text_file(out_dir / "benchmark.json", spec.to_json());
}

void cmd_synth(const fs::path& spec_file, const fs::path& out_dir) {
  const auto spec = BenchmarkSpec::from_json(read_text_file(spec_file));
  write_benchmark(spec, out_dir);
  info("synth: wrote " + std::to_string(spec.scenes.size()) + " scenes to " + out_dir.string());
}

std::vector<SequenceData> load_sequences(const fs::path& root) {
  if (!fs::exists(root)) throw std::invalid_argument("no such directory: " + root.string());
  std::vector<SequenceData> out;
  for (const auto& dir : list_sequences(root)) out.push_back(load_sequence(dir));
  if (out.empty()) throw std::invalid_argument("no sequences (seqinfo.ini) under " + root.string());
  return out;
}

std::vector<TrainingSample> load_training_samples(const RunConfig& cfg, const std::vector<SequenceData>& seqs) {
  std::vector<TrainingSample> samples;
  for (const auto& seq : seqs) {
    if (!seq.has_gt) throw std::invalid_argument("sequence " + seq.info.name + " has no gt/gt.txt to train on");
    std::vector<TrainingSample> part;
    if (cfg.train_source == TrainSource::GroundTruth) {
      part = extract_windows(seq.gt, cfg.predictor.n_past);
    } else {
      if (!seq.has_det) throw std::invalid_argument("sequence " + seq.info.name + " has no det/det.txt");
      part = extract_windows(detections_with_gt_ids(seq.gt, seq.det), cfg.predictor.n_past);
    }
    samples.insert(samples.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  return samples;
}

std::vector<TrainingSample> loss_probe(const std::vector<TrainingSample>& samples, std::size_t max_count) {
  if (samples.size() <= max_count) return samples;
  std::vector<TrainingSample> out;
  out.reserve(max_count);
  for (std::size_t i = 0; i < max_count; ++i) out.push_back(samples[i * samples.size() / max_count]);
  return out;
}

Predictor<float> train_model(const RunConfig& cfg, const std::vector<TrainingSample>& samples, TrainSummary* summary,
                             std::ostream* log, const fs::path& checkpoint_dir) {
  cfg.validate();
  Predictor<float> model(cfg.predictor, cfg.seed);
  const auto probe = loss_probe(samples);
  TrainSummary s;
  s.samples = samples.size();
  s.parameters = model.parameter_count();
  s.initial_loss = dataset_loss(model, probe);
  TrainHooks<float> hooks;
  hooks.log = log;
  if (!checkpoint_dir.empty()) {
    hooks.on_checkpoint = [&checkpoint_dir](long step, const Predictor<float>& m) {
      char name[40];
      std::snprintf(name, sizeof(name), "checkpoint_%06ld.ckpt", step);
      save_predictor(m, checkpoint_dir / name);
    };
  }
  train_predictor(model, samples, cfg.train, cfg.augment, cfg.seed + 1, hooks);
  s.final_loss = dataset_loss(model, probe);
  if (summary) *summary = s;
  return model;
}

TrainSummary cmd_train(const RunConfig& cfg, const fs::path& data_dir, const fs::path& out_dir) {
  cfg.validate();
  const auto seqs = load_sequences(data_dir);
  const auto samples = load_training_samples(cfg, seqs);
  if (samples.empty()) throw std::invalid_argument("no training windows in " + data_dir.string());
  ensure_dir(out_dir);
  save_run_config(cfg, out_dir);
  info("train: " + std::to_string(samples.size()) + " windows, " + std::to_string(cfg.train.steps) + " steps");
  std::ofstream log(out_dir / "train_log.jsonl", std::ios::binary | std::ios::trunc);
  TrainSummary summary;
  const auto model = train_model(cfg, samples, &summary, &log, out_dir);
  save_predictor(model, out_dir / "model.ckpt");
  ordered_json j;
  j["samples"] = summary.samples;
  j["parameters"] = summary.parameters;
  j["initial_loss"] = summary.initial_loss;
  j["final_loss"] = summary.final_loss;
  write_text_file(out_dir / "summary.json", j.dump(2) + "\n");
  info("train: probe loss " + fmt("%.6g", summary.initial_loss) + " -> " + fmt("%.6g", summary.final_loss));
  return summary;
}

std::unique_ptr<MotionModel> make_motion_model(const RunConfig& cfg, const Predictor<float>* predictor) {
  switch (cfg.motion) {
    case MotionChoice::None: return std::make_unique<NoMotionModel>();
    case MotionChoice::Kalman: return std::make_unique<KalmanMotionModel>();
    case MotionChoice::Learned:
      if (!predictor) throw std::invalid_argument("the learned predictor needs a checkpoint");
      return std::make_unique<LearnedMotionModel<float>>(*predictor);
  }
  throw std::logic_error("unhandled motion choice");
}

std::vector<Scene> track_sequences(const RunConfig& cfg, const MotionModel& model, const std::vector<SequenceData>& seqs,
                                   const fs::path& diagnostics_dir) {
  std::vector<Scene> out;
  out.reserve(seqs.size());
  for (const auto& seq : seqs) {
    if (!seq.has_det) throw std::invalid_argument("sequence " + seq.info.name + " has no det/det.txt");
    std::ofstream diag;
    if (!diagnostics_dir.empty()) diag.open(diagnostics_dir / (seq.info.name + ".diagnostics.jsonl"), std::ios::binary);
    out.push_back(run_tracker(seq.det, cfg.tracker, model, diag.is_open() ? &diag : nullptr));
  }
  return out;
}

void cmd_track(const RunConfig& cfg, const fs::path& seq_dir, const fs::path& checkpoint, const fs::path& out_dir,
               bool diagnostics) {
  cfg.validate();
  const auto seqs = load_sequences(seq_dir);
  std::optional<Predictor<float>> predictor;
  if (cfg.motion == MotionChoice::Learned) {
    if (checkpoint.empty()) throw std::invalid_argument("--predictor learned requires --checkpoint");
    predictor.emplace(load_predictor<float>(checkpoint));
    if (predictor->config().n_past != cfg.tracker.n_past) {
      throw std::invalid_argument("checkpoint n_past differs from tracker n_past");
    }
  }
  const auto model = make_motion_model(cfg, predictor ? &*predictor : nullptr);
  ensure_dir(out_dir);
  save_run_config(cfg, out_dir);
  const auto hyps = track_sequences(cfg, *model, seqs, diagnostics ? out_dir : fs::path{});
  for (std::size_t i = 0; i < seqs.size(); ++i) write_mot(hyps[i], out_dir / (seqs[i].info.name + ".txt"));
  info("track: " + std::to_string(seqs.size()) + " sequences with predictor " + model->name());
}

NamedReports evaluate_sequences(const std::vector<SequenceData>& seqs, const std::vector<Scene>& hyps) {
  if (seqs.size() != hyps.size()) throw std::invalid_argument("sequence / hypothesis count mismatch");
  NamedReports rows;
  std::vector<EvalReport> reports;
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    if (!seqs[i].has_gt) throw std::invalid_argument("sequence " + seqs[i].info.name + " has no gt/gt.txt");
    reports.push_back(evaluate(seqs[i].gt, hyps[i]));
    rows.emplace_back(seqs[i].info.name, reports.back());
  }
  rows.emplace_back("AGGREGATE", aggregate(reports));
  return rows;
}

NamedReports cmd_eval(const fs::path& gt_dir, const fs::path& hyp_dir, const fs::path& out_dir) {
  const auto seqs = load_sequences(gt_dir);
  std::vector<Scene> hyps;
  for (const auto& seq : seqs) {
    const auto path = hyp_dir / (seq.info.name + ".txt");
    if (!fs::exists(path)) throw std::invalid_argument("missing hypothesis file " + path.string());
    hyps.push_back(parse_mot(path, seq.info));
  }
  const auto rows = evaluate_sequences(seqs, hyps);
  if (!out_dir.empty()) {
    ensure_dir(out_dir);
    write_text_file(out_dir / "eval.txt", format_report_table(rows));
    write_text_file(out_dir / "eval.json", report_to_json(rows));
  }
  return rows;
}

namespace {

std::vector<TrainingSample> random_gradcheck_batch(int count, int n_past, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> step(0.0, 0.01);
  std::uniform_int_distribution<int> len(2, n_past);
  std::vector<TrainingSample> batch;
  for (int k = 0; k < count; ++k) {
    BBox b{0.2 + 0.6 * u(rng), 0.2 + 0.6 * u(rng), 0.05 + 0.1 * u(rng), 0.1 + 0.2 * u(rng)};
    std::vector<BBox> boxes;
    const int n = len(rng);
    for (int i = 0; i < n; ++i) {
      boxes.push_back(b);
      b.cx += step(rng);
      b.cy += step(rng);
      b.w *= std::exp(step(rng));
      b.h *= std::exp(step(rng));
    }
    TrainingSample s;
    s.window = TrajectoryWindow(boxes);
    s.target = Offset4{step(rng), step(rng), step(rng), step(rng)};
    batch.push_back(std::move(s));
  }
  return batch;
}

}  // namespace

GradcheckResult cmd_gradcheck(const RunConfig& cfg, std::uint64_t seed, const GradcheckOptions& opts) {
  PredictorConfig pc = cfg.predictor;
  pc.d_model = opts.d_model;
  pc.layers = opts.layers;
  pc.heads = opts.heads;
  pc.dropout = 0.0;
  Predictor<double> model(pc, seed);
  std::mt19937_64 rng(seed * 7919 + 17);
  // Every parameter, including the zero-initialized ones, gets a generic value
  // so no gradient vanishes by construction.
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (auto* p : model.parameters()) {
    const bool gain = p->name.size() >= 5 && p->name.compare(p->name.size() - 5, 5, ".gain") == 0;
    for (Eigen::Index i = 0; i < p->value.size(); ++i) p->value.data()[i] = (gain ? 1.0 : 0.0) + u(rng);
  }
  const auto batch = random_gradcheck_batch(opts.windows, pc.n_past, rng);

  model.zero_grad();
  {
    Tape<double> tape;
    tape.backward(batch_loss(tape, model, batch));
  }
  auto loss_at = [&]() {
    Tape<double> tape(false);
    return batch_loss(tape, model, batch).value()(0, 0);
  };

  GradcheckResult result;
  result.seed = seed;
  for (auto* p : model.parameters()) {
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      double& v = p->value.data()[i];
      const double saved = v;
      v = saved + opts.step;
      const double plus = loss_at();
      v = saved - opts.step;
      const double minus = loss_at();
      v = saved;
      const double numeric = (plus - minus) / (2.0 * opts.step);
      const double analytic = p->grad.data()[i];
      const double denom = std::max({std::abs(numeric), std::abs(analytic), opts.abs_floor});
      const double rel = std::abs(numeric - analytic) / denom;
      ++result.checked;
      if (result.worst.empty() || rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst = p->name + "[" + std::to_string(i) + "]";
      }
    }
  }
  result.passed = result.max_rel_error <= opts.tolerance;
  return result;
}

VariantResult run_variant(const std::string& name, const RunConfig& cfg, const std::vector<TrainingSample>& train,
                          const std::vector<SequenceData>& test) {
  VariantResult r;
  r.name = name;
  std::optional<Predictor<float>> predictor;
  if (cfg.motion == MotionChoice::Learned) {
    TrainSummary s;
    predictor.emplace(train_model(cfg, train, &s));
    r.parameters = s.parameters;
    r.initial_loss = s.initial_loss;
    r.final_loss = s.final_loss;
  }
  const auto model = make_motion_model(cfg, predictor ? &*predictor : nullptr);
  const auto hyps = track_sequences(cfg, *model, test);
  r.report = evaluate_sequences(test, hyps).back().second;
  info("experiment: " + name + " IDF1 " + fmt("%.4f", r.report.idf1) + " IDSW " + std::to_string(r.report.idsw));
  return r;
}

std::vector<VariantResult> run_experiment(const std::string& axis, const RunConfig& base, const fs::path& train_dir,
                                          const fs::path& test_dir, const fs::path& out_dir) {
  std::vector<std::pair<std::string, RunConfig>> variants;
  if (axis == "pooling") {
    for (const auto p : {Pooling::Mean, Pooling::Last, Pooling::Sum}) {
      RunConfig c = base;
      c.motion = MotionChoice::Learned;
      c.predictor.pooling = p;
      variants.emplace_back(to_string(p), c);
    }
  } else if (axis == "components") {
    RunConfig full = base, no_mhsa = base, no_dymlp = base;
    full.predictor.enable_mhsa = full.predictor.enable_dymlp = true;
    no_mhsa.predictor.enable_mhsa = false;
    no_mhsa.predictor.enable_dymlp = true;
    no_dymlp.predictor.enable_mhsa = true;
    no_dymlp.predictor.enable_dymlp = false;
    for (auto* c : {&full, &no_mhsa, &no_dymlp}) c->motion = MotionChoice::Learned;
    variants = {{"mhsa+dymlp", full}, {"dymlp only", no_mhsa}, {"mhsa only", no_dymlp}};
  } else if (axis == "drop") {
    RunConfig off = base, on = base;
    off.augment.drop = false;
    off.augment.drop_prob = 0.0;
    on.augment.drop = true;
    if (on.augment.drop_prob == 0.0) on.augment.drop_prob = 0.1;
    off.motion = on.motion = MotionChoice::Learned;
    variants = {{"p=0", off}, {"p=" + fmt("%g", on.augment.drop_prob), on}};
  } else if (axis == "motion") {
    for (const auto m : {MotionChoice::None, MotionChoice::Kalman, MotionChoice::Learned}) {
      RunConfig c = base;
      c.motion = m;
      variants.emplace_back(to_string(m), c);
    }
  } else {
    throw std::invalid_argument("unknown experiment axis '" + axis + "' (expected pooling|components|drop|motion)");
  }
  const auto train_seqs = load_sequences(train_dir);
  const auto test_seqs = load_sequences(test_dir);
  const auto samples = load_training_samples(base, train_seqs);
  std::vector<VariantResult> rows;
  for (const auto& [name, cfg] : variants) rows.push_back(run_variant(name, cfg, samples, test_seqs));
  if (!out_dir.empty()) {
    ensure_dir(out_dir);
    save_run_config(base, out_dir);
    write_text_file(out_dir / "experiment.txt", format_experiment_table(rows));
    write_text_file(out_dir / "experiment.json", experiment_to_json(rows));
  }
  return rows;
}

std::string format_experiment_table(const std::vector<VariantResult>& rows) {
  std::size_t width = 7;
  for (const auto& r : rows) width = std::max(width, r.name.size());
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-*s %8s %11s %11s %8s %8s %6s\n", static_cast<int>(width), "variant", "params",
                "loss@0", "loss@end", "MOTA", "IDF1", "IDSW");
  out << buf;
  for (const auto& r : rows) {
    if (r.parameters > 0) {
      std::snprintf(buf, sizeof(buf), "%-*s %8zu %11.6f %11.6f %8.4f %8.4f %6ld\n", static_cast<int>(width),
                    r.name.c_str(), r.parameters, r.initial_loss, r.final_loss, r.report.mota, r.report.idf1,
                    r.report.idsw);
    } else {
      std::snprintf(buf, sizeof(buf), "%-*s %8s %11s %11s %8.4f %8.4f %6ld\n", static_cast<int>(width), r.name.c_str(),
                    "-", "-", "-", r.report.mota, r.report.idf1, r.report.idsw);
    }
    out << buf;
  }
  return out.str();
}

std::string experiment_to_json(const std::vector<VariantResult>& rows) {
  ordered_json arr = ordered_json::array();
  for (const auto& r : rows) {
    ordered_json j;
    j["variant"] = r.name;
    j["parameters"] = r.parameters;
    j["initial_loss"] = r.initial_loss;
    j["final_loss"] = r.final_loss;
    j["report"] = ordered_json::parse(report_to_json({{r.name, r.report}}))[0];
    arr.push_back(j);
  }
  return arr.dump(2) + "\n";
}

}  // namespace kinetrack
