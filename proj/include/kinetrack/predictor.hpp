#pragma once

// Learned motion predictor: a stack of dual-granularity encoder layers
// (multi-head self-attention over tokens in parallel with a dynamic MLP over
// channels) reading a short box history and regressing the next-frame offset.

#include "kinetrack/checkpoint.hpp"
#include "kinetrack/geometry.hpp"
#include "kinetrack/tensor.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace kinetrack {

class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Pooling { Mean, Last, Sum };

std::string to_string(Pooling p);
Pooling pooling_from_string(const std::string& s);

struct PredictorConfig {
  int d_model = 64;
  int layers = 2;
  int heads = 4;
  int n_past = 10;
  Pooling pooling = Pooling::Mean;
  bool enable_mhsa = true;
  bool enable_dymlp = true;
  int ffn_multiplier = 4;
  double dropout = 0.0;
  // Delta features are multiplied by this before the input projection and the
  // regressed offset is divided by it, so per-frame motion (~1e-3 of the
  // image) is O(1) inside the network.
  double delta_scale = 100.0;

  static PredictorConfig desk();
  static PredictorConfig paper();

  /// Throws PreconditionError on an unusable configuration.
  void validate() const;

  std::string to_json() const;
  static PredictorConfig from_json(const std::string& text);

  friend bool operator==(const PredictorConfig&, const PredictorConfig&) = default;
};

inline constexpr int kTokenFeatures = 9;

/// Per-timestep input feature: box, aspect ratio and the delta to the
/// previous observation in the window (zero for the first token).
struct MotionToken {
  double cx = 0, cy = 0, w = 0, h = 0, a = 0;
  double d_cx = 0, d_cy = 0, d_w = 0, d_h = 0;

  BBox box() const { return BBox{cx, cy, w, h}; }
  std::array<double, kTokenFeatures> features() const { return {cx, cy, w, h, a, d_cx, d_cy, d_w, d_h}; }
};

/// Ordered box history of one object, oldest first. Tokens are derived from
/// the boxes so the delta invariant holds by construction.
class TrajectoryWindow {
 public:
  TrajectoryWindow() = default;
  explicit TrajectoryWindow(std::vector<BBox> boxes);

  std::size_t size() const { return boxes_.size(); }
  bool empty() const { return boxes_.empty(); }
  const std::vector<BBox>& boxes() const { return boxes_; }
  const BBox& base_box() const { return boxes_.back(); }
  std::vector<MotionToken> tokens() const;

 private:
  std::vector<BBox> boxes_;
};

std::vector<MotionToken> make_tokens(const std::vector<BBox>& boxes);

/// Sinusoidal position encoding: PE[p, 2i] = sin(p / 10000^(2i/d)),
/// PE[p, 2i+1] = cos(p / 10000^(2i/d)).
template <typename Scalar>
Matrix<Scalar> sinusoidal_encoding(Eigen::Index n, Eigen::Index d) {
  Matrix<Scalar> pe(n, d);
  for (Eigen::Index p = 0; p < n; ++p) {
    for (Eigen::Index c = 0; c < d; ++c) {
      const double i2 = static_cast<double>(c - (c % 2));
      const double angle = static_cast<double>(p) / std::pow(10000.0, i2 / static_cast<double>(d));
      pe(p, c) = Scalar(c % 2 == 0 ? std::sin(angle) : std::cos(angle));
    }
  }
  return pe;
}

/// n x 9 feature matrix with the delta columns multiplied by delta_scale.
template <typename Scalar>
Matrix<Scalar> token_features(const TrajectoryWindow& window, double delta_scale) {
  const auto tokens = window.tokens();
  Matrix<Scalar> x(static_cast<Eigen::Index>(tokens.size()), kTokenFeatures);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto f = tokens[i].features();
    for (int c = 0; c < kTokenFeatures; ++c) {
      x(static_cast<Eigen::Index>(i), c) = Scalar(c >= 5 ? f[c] * delta_scale : f[c]);
    }
  }
  return x;
}

namespace layers {

using Rng = std::mt19937_64;

template <typename Scalar>
Matrix<Scalar> xavier_uniform(Eigen::Index in, Eigen::Index out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> u(-bound, bound);
  Matrix<Scalar> w(in, out);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = Scalar(u(rng));
  return w;
}

/// y = x W + b with W stored [in x out].
template <typename Scalar>
struct Linear {
  Parameter<Scalar> weight;
  Parameter<Scalar> bias;
  bool has_bias = true;

  Linear() = default;
  Linear(const std::string& name, Eigen::Index in, Eigen::Index out, bool with_bias, Rng* rng)
      : weight(name + ".weight", rng ? xavier_uniform<Scalar>(in, out, *rng)
                                     : Matrix<Scalar>::Zero(in, out)),
        has_bias(with_bias) {
    if (has_bias) bias = Parameter<Scalar>(name + ".bias", Matrix<Scalar>::Zero(1, out));
  }

  Var<Scalar> forward(Tape<Scalar>& tape, const Var<Scalar>& x) const {
    auto y = matmul(x, tape.parameter(weight));
    return has_bias ? add_row(y, tape.parameter(bias)) : y;
  }

  void collect(std::vector<Parameter<Scalar>*>& out) {
    out.push_back(&weight);
    if (has_bias) out.push_back(&bias);
  }
};

template <typename Scalar>
struct LayerNorm {
  Parameter<Scalar> gain;
  Parameter<Scalar> bias;

  LayerNorm() = default;
  LayerNorm(const std::string& name, Eigen::Index d)
      : gain(name + ".gain", Matrix<Scalar>::Ones(1, d)),
        bias(name + ".bias", Matrix<Scalar>::Zero(1, d)) {}

  Var<Scalar> forward(Tape<Scalar>& tape, const Var<Scalar>& x) const {
    return layer_norm_rows(x, tape.parameter(gain), tape.parameter(bias));
  }

  void collect(std::vector<Parameter<Scalar>*>& out) {
    out.push_back(&gain);
    out.push_back(&bias);
  }
};

/// Scaled dot-product attention per head over the window's own tokens;
/// heads are concatenated and projected.
template <typename Scalar>
struct MultiHeadSelfAttention {
  Linear<Scalar> query, key, value, output;
  int heads = 1;

  MultiHeadSelfAttention() = default;
  MultiHeadSelfAttention(const std::string& name, int d_model, int num_heads, Rng& rng)
      : query(name + ".query", d_model, d_model, true, &rng),
        key(name + ".key", d_model, d_model, true, &rng),
        value(name + ".value", d_model, d_model, true, &rng),
        output(name + ".output", d_model, d_model, true, &rng),
        heads(num_heads) {}

  /// When `weights` is non-null it receives the per-head attention matrices.
  Var<Scalar> forward(Tape<Scalar>& tape, const Var<Scalar>& e,
                      std::vector<Matrix<Scalar>>* weights = nullptr) const {
    const auto q = query.forward(tape, e);
    const auto k = key.forward(tape, e);
    const auto v = value.forward(tape, e);
    const Eigen::Index dk = e.cols() / heads;
    const Scalar inv_sqrt_dk = Scalar(1) / std::sqrt(Scalar(dk));
    std::vector<Var<Scalar>> outs;
    outs.reserve(heads);
    for (int h = 0; h < heads; ++h) {
      const auto qh = slice_cols(q, h * dk, dk);
      const auto kh = slice_cols(k, h * dk, dk);
      const auto vh = slice_cols(v, h * dk, dk);
      const auto attn = softmax_rows(scale(matmul_nt(qh, kh), inv_sqrt_dk));
      if (weights) weights->push_back(attn.value());
      outs.push_back(matmul(attn, vh));
    }
    return output.forward(tape, heads == 1 ? outs.front() : concat_cols(outs));
  }

  void collect(std::vector<Parameter<Scalar>*>& out) {
    query.collect(out);
    key.collect(out);
    value.collect(out);
    output.collect(out);
  }
};

/// Intermediate values of one dynamic-MLP evaluation, for inspection.
template <typename Scalar>
struct DynamicMlpTrace {
  Matrix<Scalar> positions;      // clamped sampling positions, n x d
  Matrix<Scalar> dynamic;        // DyFC branch output
  Matrix<Scalar> gate_identity;  // per-channel weight of the identity branch
  Matrix<Scalar> gate_dynamic;   // per-channel weight of the dynamic branch
};

/// Channel-level mixing: each channel of each token reads the sequence at
/// its own learned token offset, is projected, then fused with the identity
/// branch by a per-channel two-way softmax gate.
template <typename Scalar>
struct DynamicMlp {
  Linear<Scalar> offsets;        // token offsets per channel; zero-initialized
  Linear<Scalar> mix;            // W, b of the dynamic FC
  Linear<Scalar> gate_identity;  // W^I, no bias
  Linear<Scalar> gate_dynamic;   // W^T, no bias

  DynamicMlp() = default;
  DynamicMlp(const std::string& name, int d_model, Rng& rng)
      : offsets(name + ".offsets", d_model, d_model, true, nullptr),
        mix(name + ".mix", d_model, d_model, true, &rng),
        gate_identity(name + ".gate_identity", d_model, d_model, false, &rng),
        gate_dynamic(name + ".gate_dynamic", d_model, d_model, false, &rng) {}

  Var<Scalar> forward(Tape<Scalar>& tape, const Var<Scalar>& e,
                      DynamicMlpTrace<Scalar>* trace = nullptr) const {
    const Eigen::Index n = e.rows(), d = e.cols();
    Matrix<Scalar> base(n, d);
    for (Eigen::Index i = 0; i < n; ++i) base.row(i).setConstant(Scalar(i));
    const auto delta = offsets.forward(tape, e);
    const auto pos = clamp(add_constant(delta, base), Scalar(0), Scalar(n - 1));
    const auto gathered = gather_interp(e, pos);
    const auto dyn = mix.forward(tape, gathered);
    const auto avg = scale(add(dyn, e), Scalar(0.5));
    const auto score_i = gate_identity.forward(tape, avg);
    const auto score_t = gate_dynamic.forward(tape, avg);
    const auto w_i = sigmoid(sub(score_i, score_t));
    const auto w_t = sigmoid(sub(score_t, score_i));
    if (trace) {
      trace->positions = pos.value();
      trace->dynamic = dyn.value();
      trace->gate_identity = w_i.value();
      trace->gate_dynamic = w_t.value();
    }
    return add(mul(w_t, dyn), mul(w_i, e));
  }

  void collect(std::vector<Parameter<Scalar>*>& out) {
    offsets.collect(out);
    mix.collect(out);
    gate_identity.collect(out);
    gate_dynamic.collect(out);
  }
};

/// E' = LN(MHSA(E) + DyMLP(E)) + E;  out = LN(FFN(E')) + E'.
template <typename Scalar>
struct EncoderLayer {
  bool use_mhsa = true;
  bool use_dymlp = true;
  MultiHeadSelfAttention<Scalar> attention;
  DynamicMlp<Scalar> dymlp;
  LayerNorm<Scalar> norm_mix;
  Linear<Scalar> ffn_in, ffn_out;
  LayerNorm<Scalar> norm_ffn;

  EncoderLayer() = default;
  EncoderLayer(const std::string& name, const PredictorConfig& cfg, Rng& rng)
      : use_mhsa(cfg.enable_mhsa), use_dymlp(cfg.enable_dymlp) {
    if (use_mhsa) attention = MultiHeadSelfAttention<Scalar>(name + ".attention", cfg.d_model, cfg.heads, rng);
    if (use_dymlp) dymlp = DynamicMlp<Scalar>(name + ".dymlp", cfg.d_model, rng);
    norm_mix = LayerNorm<Scalar>(name + ".norm_mix", cfg.d_model);
    const int hidden = cfg.d_model * cfg.ffn_multiplier;
    ffn_in = Linear<Scalar>(name + ".ffn_in", cfg.d_model, hidden, true, &rng);
    ffn_out = Linear<Scalar>(name + ".ffn_out", hidden, cfg.d_model, true, &rng);
    norm_ffn = LayerNorm<Scalar>(name + ".norm_ffn", cfg.d_model);
  }

  /// The summed token/channel mixing branch before normalization.
  Var<Scalar> mixing(Tape<Scalar>& tape, const Var<Scalar>& e) const {
    if (use_mhsa && use_dymlp) return add(attention.forward(tape, e), dymlp.forward(tape, e));
    if (use_mhsa) return attention.forward(tape, e);
    return dymlp.forward(tape, e);
  }

  Var<Scalar> forward(Tape<Scalar>& tape, const Var<Scalar>& e, double dropout_rate = 0.0,
                      Rng* rng = nullptr) const {
    auto mixed = mixing(tape, e);
    if (rng) mixed = dropout(mixed, dropout_rate, *rng);
    const auto e_hat = add(norm_mix.forward(tape, mixed), e);
    auto ffn = ffn_out.forward(tape, gelu(ffn_in.forward(tape, e_hat)));
    if (rng) ffn = dropout(ffn, dropout_rate, *rng);
    return add(norm_ffn.forward(tape, ffn), e_hat);
  }

  void collect(std::vector<Parameter<Scalar>*>& out) {
    if (use_mhsa) attention.collect(out);
    if (use_dymlp) dymlp.collect(out);
    norm_mix.collect(out);
    ffn_in.collect(out);
    ffn_out.collect(out);
    norm_ffn.collect(out);
  }
};

}  // namespace layers

template <typename Scalar>
class Predictor {
 public:
  using Rng = layers::Rng;

  explicit Predictor(PredictorConfig cfg = PredictorConfig::desk(), std::uint64_t seed = 0)
      : cfg_(cfg) {
    cfg_.validate();
    Rng rng(seed);
    embedding_ = layers::Linear<Scalar>("embed", kTokenFeatures, cfg_.d_model, true, &rng);
    for (int l = 0; l < cfg_.layers; ++l) {
      layers_.emplace_back("layers." + std::to_string(l), cfg_, rng);
    }
    head_ = layers::Linear<Scalar>("head", cfg_.d_model, 4, true, nullptr);
  }

  const PredictorConfig& config() const { return cfg_; }

  void check_window(const TrajectoryWindow& window) const {
    if (window.size() < 2 || window.size() > static_cast<std::size_t>(cfg_.n_past)) {
      throw PreconditionError("predictor window must hold 2.." + std::to_string(cfg_.n_past) +
                              " observations, got " + std::to_string(window.size()));
    }
  }

  /// X W_x + b + PE, shape n x d_model.
  Var<Scalar> embed(Tape<Scalar>& tape, const TrajectoryWindow& window) const {
    check_window(window);
    const auto x = tape.constant(token_features<Scalar>(window, cfg_.delta_scale));
    const auto n = static_cast<Eigen::Index>(window.size());
    return add_constant(embedding_.forward(tape, x), sinusoidal_encoding<Scalar>(n, cfg_.d_model));
  }

  Var<Scalar> encode(Tape<Scalar>& tape, const Var<Scalar>& embedded, Rng* dropout_rng = nullptr) const {
    auto e = embedded;
    for (const auto& layer : layers_) e = layer.forward(tape, e, cfg_.dropout, dropout_rng);
    return e;
  }

  Var<Scalar> pool(const Var<Scalar>& e) const {
    switch (cfg_.pooling) {
      case Pooling::Mean: return mean_rows(e);
      case Pooling::Last: return select_row(e, e.rows() - 1);
      case Pooling::Sum: return sum_rows(e);
    }
    throw std::logic_error("unknown pooling");
  }

  /// 1 x 4 offset (d_cx, d_cy, d_w, d_h) in normalized units. Pass an rng to
  /// enable dropout (training only).
  Var<Scalar> forward(Tape<Scalar>& tape, const TrajectoryWindow& window, Rng* dropout_rng = nullptr) const {
    const auto pooled = pool(encode(tape, embed(tape, window), dropout_rng));
    return scale(head_.forward(tape, pooled), Scalar(1.0 / cfg_.delta_scale));
  }

  Offset4 predict_offset(const TrajectoryWindow& window) const {
    Tape<Scalar> tape(false);
    const auto& o = forward(tape, window).value();
    return Offset4{double(o(0, 0)), double(o(0, 1)), double(o(0, 2)), double(o(0, 3))};
  }

  std::vector<Parameter<Scalar>*> parameters() {
    std::vector<Parameter<Scalar>*> out;
    embedding_.collect(out);
    for (auto& layer : layers_) layer.collect(out);
    head_.collect(out);
    return out;
  }

  std::vector<const Parameter<Scalar>*> parameters() const {
    auto mut = const_cast<Predictor*>(this)->parameters();
    return {mut.begin(), mut.end()};
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto* p : parameters()) n += static_cast<std::size_t>(p->size());
    return n;
  }

  void zero_grad() {
    for (auto* p : parameters()) p->zero_grad();
  }

  layers::Linear<Scalar>& embedding() { return embedding_; }
  layers::Linear<Scalar>& head() { return head_; }
  std::vector<layers::EncoderLayer<Scalar>>& encoder_layers() { return layers_; }
  const std::vector<layers::EncoderLayer<Scalar>>& encoder_layers() const { return layers_; }

  /// Same architecture and parameter values in another scalar type.
  template <typename Other>
  Predictor<Other> cast() const {
    Predictor<Other> out(cfg_);
    auto dst = out.parameters();
    const auto src = parameters();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i]->value = src[i]->value.template cast<Other>();
    return out;
  }

 private:
  PredictorConfig cfg_;
  layers::Linear<Scalar> embedding_;
  std::vector<layers::EncoderLayer<Scalar>> layers_;
  layers::Linear<Scalar> head_;
};

template <typename Scalar>
void save_predictor(const Predictor<Scalar>& model, const std::filesystem::path& path,
                    DType dtype = std::is_same_v<Scalar, float> ? DType::Float32 : DType::Float64) {
  CheckpointFile ckpt;
  ckpt.header = model.config().to_json();
  for (const auto* p : model.parameters()) {
    TensorRecord t;
    t.name = p->name;
    t.dtype = dtype;
    t.shape = {static_cast<std::uint64_t>(p->value.rows()), static_cast<std::uint64_t>(p->value.cols())};
    t.data.assign(p->value.data(), p->value.data() + p->value.size());
    ckpt.tensors.push_back(std::move(t));
  }
  write_checkpoint(path, ckpt);
}

template <typename Scalar>
Predictor<Scalar> load_predictor(const std::filesystem::path& path) {
  const auto ckpt = read_checkpoint(path);
  Predictor<Scalar> model(PredictorConfig::from_json(ckpt.header));
  auto params = model.parameters();
  if (params.size() != ckpt.tensors.size()) {
    throw std::runtime_error("checkpoint holds " + std::to_string(ckpt.tensors.size()) +
                             " tensors, model expects " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& t = ckpt.tensors[i];
    auto& p = *params[i];
    if (t.name != p.name || t.shape.size() != 2 || t.shape[0] != std::uint64_t(p.value.rows()) ||
        t.shape[1] != std::uint64_t(p.value.cols())) {
      throw std::runtime_error("checkpoint tensor '" + t.name + "' does not match parameter '" + p.name + "'");
    }
    for (Eigen::Index k = 0; k < p.value.size(); ++k) p.value.data()[k] = Scalar(t.data[k]);
  }
  return model;
}

}  // namespace kinetrack
