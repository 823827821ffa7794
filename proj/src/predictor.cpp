#include "kinetrack/predictor.hpp"

#include <json.hpp>

namespace kinetrack {

std::string to_string(Pooling p) {
  switch (p) {
    case Pooling::Mean: return "mean";
    case Pooling::Last: return "last";
    case Pooling::Sum: return "sum";
  }
  return "unknown";
}

Pooling pooling_from_string(const std::string& s) {
  if (s == "mean") return Pooling::Mean;
  if (s == "last") return Pooling::Last;
  if (s == "sum") return Pooling::Sum;
  throw std::invalid_argument("unknown pooling '" + s + "' (expected mean|last|sum)");
}

PredictorConfig PredictorConfig::desk() { return PredictorConfig{}; }

PredictorConfig PredictorConfig::paper() {
  PredictorConfig cfg;
  cfg.d_model = 512;
  cfg.layers = 6;
  cfg.heads = 8;
  cfg.n_past = 10;
  return cfg;
}

void PredictorConfig::validate() const {
  if (d_model < 1 || layers < 0 || heads < 1 || ffn_multiplier < 1) {
    throw PreconditionError("predictor dimensions must be positive");
  }
  if (d_model % heads != 0) {
    throw PreconditionError("d_model (" + std::to_string(d_model) + ") must be divisible by heads (" +
                            std::to_string(heads) + ")");
  }
  if (n_past < 2) throw PreconditionError("n_past must be >= 2");
  if (!enable_mhsa && !enable_dymlp && layers > 0) {
    throw PreconditionError("at least one of MHSA and DyMLP must be enabled");
  }
  if (dropout < 0.0 || dropout >= 1.0) throw PreconditionError("dropout must lie in [0, 1)");
  if (!(delta_scale > 0.0)) throw PreconditionError("delta_scale must be positive");
}

std::string PredictorConfig::to_json() const {
  nlohmann::ordered_json j;
  j["d_model"] = d_model;
  j["layers"] = layers;
  j["heads"] = heads;
  j["n_past"] = n_past;
  j["pooling"] = to_string(pooling);
  j["enable_mhsa"] = enable_mhsa;
  j["enable_dymlp"] = enable_dymlp;
  j["ffn_multiplier"] = ffn_multiplier;
  j["dropout"] = dropout;
  j["delta_scale"] = delta_scale;
  return j.dump(2);
}

PredictorConfig PredictorConfig::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  PredictorConfig cfg;
  cfg.d_model = j.value("d_model", cfg.d_model);
  cfg.layers = j.value("layers", cfg.layers);
  cfg.heads = j.value("heads", cfg.heads);
  cfg.n_past = j.value("n_past", cfg.n_past);
  cfg.pooling = pooling_from_string(j.value("pooling", to_string(cfg.pooling)));
  cfg.enable_mhsa = j.value("enable_mhsa", cfg.enable_mhsa);
  cfg.enable_dymlp = j.value("enable_dymlp", cfg.enable_dymlp);
  cfg.ffn_multiplier = j.value("ffn_multiplier", cfg.ffn_multiplier);
  cfg.dropout = j.value("dropout", cfg.dropout);
  cfg.delta_scale = j.value("delta_scale", cfg.delta_scale);
  cfg.validate();
  return cfg;
}

std::vector<MotionToken> make_tokens(const std::vector<BBox>& boxes) {
  std::vector<MotionToken> tokens;
  tokens.reserve(boxes.size());
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const BBox& b = boxes[i];
    MotionToken t{b.cx, b.cy, b.w, b.h, b.aspect()};
    if (i > 0) {
      const Offset4 d = encode_offset(boxes[i - 1], b);
      t.d_cx = d.d_cx;
      t.d_cy = d.d_cy;
      t.d_w = d.d_w;
      t.d_h = d.d_h;
    }
    tokens.push_back(t);
  }
  return tokens;
}

TrajectoryWindow::TrajectoryWindow(std::vector<BBox> boxes) : boxes_(std::move(boxes)) {
  for (const auto& b : boxes_) {
    if (!b.valid()) throw PreconditionError("trajectory window holds a box with non-positive extent");
  }
}

std::vector<MotionToken> TrajectoryWindow::tokens() const { return make_tokens(boxes_); }

}  // namespace kinetrack
