#include "kinetrack/config.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace kinetrack {

using nlohmann::json;
using nlohmann::ordered_json;

std::string to_string(MotionChoice m) {
  switch (m) {
    case MotionChoice::Learned: return "learned";
    case MotionChoice::Kalman: return "kalman";
    case MotionChoice::None: return "none";
  }
  return "unknown";
}

MotionChoice motion_choice_from_string(const std::string& s) {
  if (s == "learned") return MotionChoice::Learned;
  if (s == "kalman") return MotionChoice::Kalman;
  if (s == "none") return MotionChoice::None;
  throw std::invalid_argument("unknown predictor '" + s + "' (expected learned|kalman|none)");
}

std::string to_string(TrainSource s) { return s == TrainSource::GroundTruth ? "gt" : "det"; }

TrainSource train_source_from_string(const std::string& s) {
  if (s == "gt") return TrainSource::GroundTruth;
  if (s == "det") return TrainSource::Detections;
  throw std::invalid_argument("unknown train source '" + s + "' (expected gt|det)");
}

RunConfig RunConfig::from_preset(const std::string& name) {
  RunConfig cfg;
  cfg.preset = name;
  if (name == "desk") {
    cfg.predictor = PredictorConfig::desk();
  } else if (name == "paper") {
    cfg.predictor = PredictorConfig::paper();
    cfg.train.warmup = 4000;
  } else {
    throw std::invalid_argument("unknown preset '" + name + "' (expected paper|desk)");
  }
  return cfg;
}

void RunConfig::validate() const {
  predictor.validate();
  tracker.validate();
  if (tracker.n_past != predictor.n_past) {
    throw std::invalid_argument("tracker n_past (" + std::to_string(tracker.n_past) + ") differs from predictor n_past (" +
                                std::to_string(predictor.n_past) + ")");
  }
  if (augment.drop_prob < 0.0 || augment.drop_prob >= 1.0) throw std::invalid_argument("drop_prob must lie in [0, 1)");
  if (augment.jitter_scale < 0.0) throw std::invalid_argument("jitter scale must be non-negative");
  if (train.steps < 0 || train.batch_size < 1 || train.warmup < 1 || !(train.lr_scale > 0.0)) {
    throw std::invalid_argument("bad training settings");
  }
}

std::string RunConfig::to_json() const {
  ordered_json j;
  j["preset"] = preset;
  j["seed"] = seed;
  j["predictor"] = ordered_json::parse(predictor.to_json());
  j["motion"] = to_string(motion);
  ordered_json t;
  t["iou_gate"] = tracker.iou_gate;
  t["t_max"] = tracker.t_max;
  t["spawn_confidence"] = tracker.spawn_confidence;
  t["n_past"] = tracker.n_past;
  t["rebirth"] = to_string(tracker.rebirth);
  j["tracker"] = t;
  ordered_json a;
  a["drop"] = augment.drop;
  a["drop_prob"] = augment.drop_prob;
  a["jitter"] = augment.jitter;
  a["jitter_scale"] = augment.jitter_scale;
  a["random_length"] = augment.random_length;
  j["augment"] = a;
  ordered_json tr;
  tr["steps"] = train.steps;
  tr["batch_size"] = train.batch_size;
  tr["warmup"] = train.warmup;
  tr["lr_scale"] = train.lr_scale;
  tr["adam_beta1"] = train.adam.beta1;
  tr["adam_beta2"] = train.adam.beta2;
  tr["adam_eps"] = train.adam.eps;
  tr["log_every"] = train.log_every;
  tr["checkpoint_every"] = train.checkpoint_every;
  tr["source"] = to_string(train_source);
  j["train"] = tr;
  return j.dump(2) + "\n";
}

void RunConfig::merge_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  try {
    if (j.contains("seed")) seed = j["seed"].get<std::uint64_t>();
    if (j.contains("motion")) motion = motion_choice_from_string(j["motion"].get<std::string>());
    if (j.contains("predictor")) {
      // Overlay onto the current predictor config.
      json p = json::parse(predictor.to_json());
      p.update(j["predictor"]);
      predictor = PredictorConfig::from_json(p.dump());
    }
    if (j.contains("tracker")) {
      const auto& t = j["tracker"];
      tracker.iou_gate = t.value("iou_gate", tracker.iou_gate);
      tracker.t_max = t.value("t_max", tracker.t_max);
      tracker.spawn_confidence = t.value("spawn_confidence", tracker.spawn_confidence);
      tracker.n_past = t.value("n_past", tracker.n_past);
      if (t.contains("rebirth")) tracker.rebirth = rebirth_policy_from_string(t["rebirth"].get<std::string>());
    }
    if (j.contains("augment")) {
      const auto& a = j["augment"];
      augment.drop = a.value("drop", augment.drop);
      augment.drop_prob = a.value("drop_prob", augment.drop_prob);
      augment.jitter = a.value("jitter", augment.jitter);
      augment.jitter_scale = a.value("jitter_scale", augment.jitter_scale);
      augment.random_length = a.value("random_length", augment.random_length);
    }
    if (j.contains("train")) {
      const auto& t = j["train"];
      train.steps = t.value("steps", train.steps);
      train.batch_size = t.value("batch_size", train.batch_size);
      train.warmup = t.value("warmup", train.warmup);
      train.lr_scale = t.value("lr_scale", train.lr_scale);
      train.adam.beta1 = t.value("adam_beta1", train.adam.beta1);
      train.adam.beta2 = t.value("adam_beta2", train.adam.beta2);
      train.adam.eps = t.value("adam_eps", train.adam.eps);
      train.log_every = t.value("log_every", train.log_every);
      train.checkpoint_every = t.value("checkpoint_every", train.checkpoint_every);
      if (t.contains("source")) train_source = train_source_from_string(t["source"].get<std::string>());
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config has a malformed field: ") + e.what());
  }
}

RunConfig RunConfig::from_json(const std::string& text) {
  std::string name = "desk";
  try {
    const auto j = json::parse(text);
    if (j.is_object() && j.contains("preset")) name = j["preset"].get<std::string>();
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig cfg = from_preset(name);
  cfg.merge_json(text);
  return cfg;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

RunConfig load_run_config(const std::filesystem::path& path) { return RunConfig::from_json(read_text_file(path)); }

void save_run_config(const RunConfig& cfg, const std::filesystem::path& dir) {
  write_text_file(dir / "run_config.json", cfg.to_json());
}

}  // namespace kinetrack
