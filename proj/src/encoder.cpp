#include "biastracer/encoder.hpp"

#include <cmath>
#include <numbers>

#include "biastracer/error.hpp"
#include "biastracer/rng.hpp"

namespace bt {
namespace {

struct NormCache {
  Matrix xhat;
  Vector rstd;
};

Matrix layer_norm(const Matrix& x, const Vector& gamma, const Vector& beta, NormCache& cache) {
  const Eigen::Index rows = x.rows();
  const double width = static_cast<double>(x.cols());
  cache.xhat.resize(x.rows(), x.cols());
  cache.rstd.resize(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const double mean = x.row(r).sum() / width;
    const double var = (x.row(r).array() - mean).square().sum() / width;
    const double rstd = 1.0 / std::sqrt(var + kLayerNormEps);
    cache.rstd(r) = rstd;
    cache.xhat.row(r) = (x.row(r).array() - mean) * rstd;
  }
  Matrix y = cache.xhat.array().rowwise() * gamma.transpose().array();
  y.rowwise() += beta.transpose();
  return y;
}

Matrix layer_norm_backward(const Matrix& dy, const Vector& gamma, const NormCache& cache,
                           Vector* d_gamma, Vector* d_beta) {
  const double width = static_cast<double>(dy.cols());
  if (d_gamma) *d_gamma += (dy.array() * cache.xhat.array()).colwise().sum().transpose().matrix();
  if (d_beta) *d_beta += dy.colwise().sum().transpose();
  Matrix dxhat = dy.array().rowwise() * gamma.transpose().array();
  Matrix dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const double mean_d = dxhat.row(r).sum() / width;
    const double mean_dx = dxhat.row(r).dot(cache.xhat.row(r)) / width;
    dx.row(r) = cache.rstd(r) *
                (dxhat.row(r).array() - mean_d - cache.xhat.row(r).array() * mean_dx);
  }
  return dx;
}

Matrix linear(const Matrix& x, const Matrix& w, const Vector& b) {
  Matrix y = x * w.transpose();
  y.rowwise() += b.transpose();
  return y;
}

// Dense per-layer form of a NeuronOverride: value -> slope * value + offset on
// the listed units.
struct LayerRule {
  std::vector<int> units;
  std::vector<double> slope;
  std::vector<double> offset;
};

std::vector<LayerRule> compile_rules(const ModelConfig& config, const NeuronOverride& overrides) {
  overrides.validate(config);
  std::vector<LayerRule> rules(static_cast<std::size_t>(config.n_layers));
  for (const auto& [id, spec] : overrides.entries()) {
    auto& rule = rules[static_cast<std::size_t>(id.layer)];
    rule.units.push_back(id.index);
    rule.slope.push_back(spec.slope());
    rule.offset.push_back(spec.offset());
  }
  return rules;
}

}  // namespace

// ---------------------------------------------------------------------------

OverrideSpec OverrideSpec::scale(double alpha) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw Error(ErrorCode::InvalidArgument, "scale factor must be finite and non-negative");
  }
  return {Kind::Scale, alpha};
}

NeuronOverride NeuronOverride::uniform(const ModelConfig& config, OverrideSpec spec,
                                       OverrideScope scope) {
  NeuronOverride o(scope);
  for (int l = 0; l < config.n_layers; ++l) {
    for (int i = 0; i < config.d_ff; ++i) o.set({l, i}, spec);
  }
  return o;
}

NeuronOverride NeuronOverride::for_neurons(const std::vector<NeuronId>& neurons, OverrideSpec spec,
                                           OverrideScope scope) {
  NeuronOverride o(scope);
  for (const auto& n : neurons) o.set(n, spec);
  return o;
}

void NeuronOverride::merge(const NeuronOverride& other) {
  for (const auto& [id, spec] : other.entries_) entries_[id] = spec;
}

void NeuronOverride::validate(const ModelConfig& config) const {
  for (const auto& [id, spec] : entries_) {
    if (id.layer < 0 || id.layer >= config.n_layers || id.index < 0 || id.index >= config.d_ff) {
      throw Error(ErrorCode::OverrideOutOfBounds,
                  "override for neuron (" + std::to_string(id.layer) + ", " +
                      std::to_string(id.index) + ") is outside the model");
    }
  }
}

void ModelConfig::validate() const {
  if (n_layers < 1 || d_model < 1 || n_heads < 1 || d_ff < 1 || vocab_size < 1 || max_len < 1) {
    throw Error(ErrorCode::InvalidArgument, "model dimensions must all be >= 1");
  }
  if (d_model % n_heads != 0) {
    throw Error(ErrorCode::InvalidArgument, "d_model must be divisible by n_heads");
  }
}

ModelParams ModelParams::zeros(const ModelConfig& config) {
  config.validate();
  const int d = config.d_model;
  ModelParams p;
  p.config = config;
  p.token_embedding = Matrix::Zero(config.vocab_size, d);
  p.position_embedding = Matrix::Zero(config.max_len, d);
  p.emb_ln_gamma = Vector::Zero(d);
  p.emb_ln_beta = Vector::Zero(d);
  p.layers.resize(static_cast<std::size_t>(config.n_layers));
  for (auto& l : p.layers) {
    l.wq = l.wk = l.wv = l.wo = Matrix::Zero(d, d);
    l.bq = l.bk = l.bv = l.bo = Vector::Zero(d);
    l.ln1_gamma = l.ln1_beta = Vector::Zero(d);
    l.w_in = Matrix::Zero(config.d_ff, d);
    l.b_in = Vector::Zero(config.d_ff);
    l.w_out = Matrix::Zero(d, config.d_ff);
    l.b_out = Vector::Zero(d);
    l.ln2_gamma = l.ln2_beta = Vector::Zero(d);
  }
  p.head_weight = Matrix::Zero(config.vocab_size, d);
  p.head_bias = Vector::Zero(config.vocab_size);
  return p;
}

ModelParams ModelParams::initialize(const ModelConfig& config) {
  ModelParams p = zeros(config);
  Rng rng(config.seed, 0x656e636f646572ULL);
  auto fill = [&](Matrix& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = 0.02 * rng.normal();
  };
  fill(p.token_embedding);
  fill(p.position_embedding);
  p.emb_ln_gamma.setOnes();
  for (auto& l : p.layers) {
    fill(l.wq);
    fill(l.wk);
    fill(l.wv);
    fill(l.wo);
    fill(l.w_in);
    fill(l.w_out);
    l.ln1_gamma.setOnes();
    l.ln2_gamma.setOnes();
  }
  fill(p.head_weight);
  return p;
}

namespace {
template <class Self, class Span>
std::vector<std::pair<std::string, Span>> collect(Self& p) {
  std::vector<std::pair<std::string, Span>> out;
  auto add = [&](std::string name, auto& t) { out.emplace_back(std::move(name), Span(t.data(), static_cast<std::size_t>(t.size()))); };
  add("token_embedding", p.token_embedding);
  add("position_embedding", p.position_embedding);
  add("emb_ln_gamma", p.emb_ln_gamma);
  add("emb_ln_beta", p.emb_ln_beta);
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    auto& l = p.layers[i];
    const std::string pre = "layers." + std::to_string(i) + ".";
    add(pre + "wq", l.wq);
    add(pre + "bq", l.bq);
    add(pre + "wk", l.wk);
    add(pre + "bk", l.bk);
    add(pre + "wv", l.wv);
    add(pre + "bv", l.bv);
    add(pre + "wo", l.wo);
    add(pre + "bo", l.bo);
    add(pre + "ln1_gamma", l.ln1_gamma);
    add(pre + "ln1_beta", l.ln1_beta);
    add(pre + "w_in", l.w_in);
    add(pre + "b_in", l.b_in);
    add(pre + "w_out", l.w_out);
    add(pre + "b_out", l.b_out);
    add(pre + "ln2_gamma", l.ln2_gamma);
    add(pre + "ln2_beta", l.ln2_beta);
  }
  add("head_weight", p.head_weight);
  add("head_bias", p.head_bias);
  return out;
}
}  // namespace

std::vector<std::pair<std::string, std::span<double>>> ModelParams::tensors() {
  return collect<ModelParams, std::span<double>>(*this);
}

std::vector<std::pair<std::string, std::span<const double>>> ModelParams::tensors() const {
  return collect<const ModelParams, std::span<const double>>(*this);
}

bool ModelParams::operator==(const ModelParams& other) const {
  if (!(config == other.config)) return false;
  const auto a = tensors();
  const auto b = other.tensors();
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].second.size() != b[i].second.size() ||
        !std::equal(a[i].second.begin(), a[i].second.end(), b[i].second.begin())) {
      return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_derivative(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double m = logits.row(r).maxCoeff();
    out.row(r) = (logits.row(r).array() - m).exp();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

struct EncoderPass::State {
  struct Layer {
    Matrix x_in;
    Matrix q, k, v;
    std::vector<Matrix> probs;  // per head [T x T]
    Matrix ctx;
    NormCache ln1;
    Matrix h;
    Matrix pre;
    Matrix act;       // GELU(pre)
    Matrix act_used;  // after the override
    NormCache ln2;
  };

  const ModelParams* params = nullptr;
  TokenSequence seq;
  std::vector<LayerRule> rules;
  OverrideScope scope = OverrideScope::AllPositions;
  NormCache emb_ln;
  std::vector<Layer> layers;
  Matrix output;

  // Rows an override applies to.
  std::pair<Eigen::Index, Eigen::Index> override_rows() const {
    if (scope == OverrideScope::MaskPosition) {
      const auto m = static_cast<Eigen::Index>(*seq.mask_position);
      return {m, m + 1};
    }
    return {0, static_cast<Eigen::Index>(seq.tokens.size())};
  }
};

EncoderPass::EncoderPass(const ModelParams& params, const TokenSequence& seq,
                         const NeuronOverride& overrides)
    : state_(std::make_unique<State>()) {
  const auto& cfg = params.config;
  auto& s = *state_;
  s.params = &params;
  s.seq = seq;
  const auto T = static_cast<Eigen::Index>(seq.tokens.size());
  if (T == 0) throw Error(ErrorCode::InvalidArgument, "empty token sequence");
  if (T > cfg.max_len) {
    throw Error(ErrorCode::SequenceTooLong, "sequence of " + std::to_string(T) +
                                                " tokens exceeds max_len " +
                                                std::to_string(cfg.max_len));
  }
  for (TokenId id : seq.tokens) {
    if (id < 0 || id >= cfg.vocab_size) {
      throw Error(ErrorCode::InvalidArgument, "token id out of vocabulary range");
    }
  }
  if (seq.mask_position && (*seq.mask_position >= seq.tokens.size() ||
                            seq.tokens[*seq.mask_position] != kMaskId)) {
    throw Error(ErrorCode::InvalidArgument, "mask_position does not point at [MASK]");
  }
  s.rules = compile_rules(cfg, overrides);
  s.scope = overrides.scope();
  if (s.scope == OverrideScope::MaskPosition && !overrides.empty() && !seq.mask_position) {
    throw Error(ErrorCode::NoMaskPosition, "mask-position override on a sequence without [MASK]");
  }

  const int H = cfg.n_heads;
  const int dh = cfg.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Matrix e(T, cfg.d_model);
  for (Eigen::Index t = 0; t < T; ++t) {
    e.row(t) = params.token_embedding.row(seq.tokens[static_cast<std::size_t>(t)]) +
               params.position_embedding.row(t);
  }
  Matrix x = layer_norm(e, params.emb_ln_gamma, params.emb_ln_beta, s.emb_ln);

  s.layers.resize(params.layers.size());
  for (std::size_t li = 0; li < params.layers.size(); ++li) {
    const auto& P = params.layers[li];
    auto& L = s.layers[li];
    L.x_in = std::move(x);
    L.q = linear(L.x_in, P.wq, P.bq);
    L.k = linear(L.x_in, P.wk, P.bk);
    L.v = linear(L.x_in, P.wv, P.bv);
    L.ctx.resize(T, cfg.d_model);
    L.probs.resize(static_cast<std::size_t>(H));
    for (int h = 0; h < H; ++h) {
      const auto qh = L.q.middleCols(h * dh, dh);
      const auto kh = L.k.middleCols(h * dh, dh);
      const auto vh = L.v.middleCols(h * dh, dh);
      Matrix scores = (qh * kh.transpose()) * scale;
      L.probs[static_cast<std::size_t>(h)] = softmax_rows(scores);
      L.ctx.middleCols(h * dh, dh) = L.probs[static_cast<std::size_t>(h)] * vh;
    }
    Matrix res1 = L.x_in + linear(L.ctx, P.wo, P.bo);
    L.h = layer_norm(res1, P.ln1_gamma, P.ln1_beta, L.ln1);
    L.pre = linear(L.h, P.w_in, P.b_in);
    L.act = L.pre.unaryExpr([](double v) { return gelu(v); });
    L.act_used = L.act;
    const auto& rule = s.rules[li];
    if (!rule.units.empty()) {
      const auto [r0, r1] = s.override_rows();
      for (Eigen::Index r = r0; r < r1; ++r) {
        for (std::size_t u = 0; u < rule.units.size(); ++u) {
          const int i = rule.units[u];
          L.act_used(r, i) = rule.slope[u] * L.act(r, i) + rule.offset[u];
        }
      }
    }
    Matrix res2 = L.h + linear(L.act_used, P.w_out, P.b_out);
    x = layer_norm(res2, P.ln2_gamma, P.ln2_beta, L.ln2);
  }
  s.output = std::move(x);
}

EncoderPass::~EncoderPass() = default;
EncoderPass::EncoderPass(EncoderPass&&) noexcept = default;

const Matrix& EncoderPass::output() const { return state_->output; }

ForwardTrace EncoderPass::trace() const {
  ForwardTrace trace;
  trace.mask_position = state_->seq.mask_position;
  if (trace.mask_position) {
    const auto m = static_cast<Eigen::Index>(*trace.mask_position);
    for (const auto& L : state_->layers) trace.activations.emplace_back(L.act.row(m).transpose());
  }
  return trace;
}

Matrix EncoderPass::logits() const {
  return linear(state_->output, state_->params->head_weight, state_->params->head_bias);
}

std::vector<Vector> EncoderPass::backward(const Matrix& d_output, ModelParams* grads) const {
  const auto& s = *state_;
  const auto& params = *s.params;
  const auto& cfg = params.config;
  const int H = cfg.n_heads;
  const int dh = cfg.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const auto T = static_cast<Eigen::Index>(s.seq.tokens.size());

  std::vector<Vector> neuron_grads;
  if (s.seq.mask_position) neuron_grads.resize(params.layers.size());

  Matrix dx = d_output;
  for (std::size_t li = params.layers.size(); li-- > 0;) {
    const auto& P = params.layers[li];
    const auto& L = s.layers[li];
    LayerParams* G = grads ? &grads->layers[li] : nullptr;

    Matrix d_res2 = layer_norm_backward(dx, P.ln2_gamma, L.ln2, G ? &G->ln2_gamma : nullptr,
                                        G ? &G->ln2_beta : nullptr);
    Matrix d_h = d_res2;
    if (G) {
      G->w_out.noalias() += d_res2.transpose() * L.act_used;
      G->b_out += d_res2.colwise().sum().transpose();
    }
    Matrix d_act = d_res2 * P.w_out;  // gradient w.r.t. act_used
    if (s.seq.mask_position) {
      neuron_grads[li] = d_act.row(static_cast<Eigen::Index>(*s.seq.mask_position)).transpose();
    }
    const auto& rule = s.rules[li];
    if (!rule.units.empty()) {
      const auto [r0, r1] = s.override_rows();
      for (Eigen::Index r = r0; r < r1; ++r) {
        for (std::size_t u = 0; u < rule.units.size(); ++u) d_act(r, rule.units[u]) *= rule.slope[u];
      }
    }
    Matrix d_pre = d_act.array() * L.pre.unaryExpr([](double v) { return gelu_derivative(v); }).array();
    if (G) {
      G->w_in.noalias() += d_pre.transpose() * L.h;
      G->b_in += d_pre.colwise().sum().transpose();
    }
    d_h.noalias() += d_pre * P.w_in;

    Matrix d_res1 = layer_norm_backward(d_h, P.ln1_gamma, L.ln1, G ? &G->ln1_gamma : nullptr,
                                        G ? &G->ln1_beta : nullptr);
    Matrix d_x_in = d_res1;
    if (G) {
      G->wo.noalias() += d_res1.transpose() * L.ctx;
      G->bo += d_res1.colwise().sum().transpose();
    }
    Matrix d_ctx = d_res1 * P.wo;
    Matrix d_q(T, cfg.d_model), d_k(T, cfg.d_model), d_v(T, cfg.d_model);
    for (int h = 0; h < H; ++h) {
      const auto& probs = L.probs[static_cast<std::size_t>(h)];
      const auto qh = L.q.middleCols(h * dh, dh);
      const auto kh = L.k.middleCols(h * dh, dh);
      const auto vh = L.v.middleCols(h * dh, dh);
      const auto dctx_h = d_ctx.middleCols(h * dh, dh);
      Matrix d_probs = dctx_h * vh.transpose();
      d_v.middleCols(h * dh, dh) = probs.transpose() * dctx_h;
      Matrix d_scores(T, T);
      for (Eigen::Index r = 0; r < T; ++r) {
        const double dot = d_probs.row(r).dot(probs.row(r));
        d_scores.row(r) = probs.row(r).array() * (d_probs.row(r).array() - dot);
      }
      d_scores *= scale;
      d_q.middleCols(h * dh, dh) = d_scores * kh;
      d_k.middleCols(h * dh, dh) = d_scores.transpose() * qh;
    }
    if (G) {
      G->wq.noalias() += d_q.transpose() * L.x_in;
      G->bq += d_q.colwise().sum().transpose();
      G->wk.noalias() += d_k.transpose() * L.x_in;
      G->bk += d_k.colwise().sum().transpose();
      G->wv.noalias() += d_v.transpose() * L.x_in;
      G->bv += d_v.colwise().sum().transpose();
    }
    d_x_in.noalias() += d_q * P.wq;
    d_x_in.noalias() += d_k * P.wk;
    d_x_in.noalias() += d_v * P.wv;
    dx = std::move(d_x_in);
  }

  if (grads) {
    Matrix d_e = layer_norm_backward(dx, params.emb_ln_gamma, s.emb_ln, &grads->emb_ln_gamma,
                                     &grads->emb_ln_beta);
    for (Eigen::Index t = 0; t < T; ++t) {
      grads->token_embedding.row(s.seq.tokens[static_cast<std::size_t>(t)]) += d_e.row(t);
      grads->position_embedding.row(t) += d_e.row(t);
    }
  }
  return neuron_grads;
}

// ---------------------------------------------------------------------------

ForwardResult forward(const ModelParams& params, const TokenSequence& seq,
                      const NeuronOverride& overrides) {
  EncoderPass pass(params, seq, overrides);
  return {pass.logits(), pass.trace()};
}

namespace {
void require_mask(const TokenSequence& seq) {
  if (!seq.mask_position) throw Error(ErrorCode::NoMaskPosition, "sequence has no [MASK] token");
}

void require_target(const ModelParams& params, TokenId target) {
  if (target < 0 || target >= params.config.vocab_size) {
    throw Error(ErrorCode::AnswerNotInVocab, "target token id out of vocabulary range");
  }
}

Vector mask_distribution(const ModelParams& params, const EncoderPass& pass, std::size_t mask) {
  const auto row = pass.output().row(static_cast<Eigen::Index>(mask));
  Vector z = params.head_weight * row.transpose() + params.head_bias;
  const double m = z.maxCoeff();
  Vector p = (z.array() - m).exp();
  return p / p.sum();
}
}  // namespace

double mask_token_prob(const ModelParams& params, const TokenSequence& seq, TokenId target,
                       const NeuronOverride& overrides) {
  require_mask(seq);
  require_target(params, target);
  EncoderPass pass(params, seq, overrides);
  return mask_distribution(params, pass, *seq.mask_position)(target);
}

NeuronGradient grad_wrt_neurons(const ModelParams& params, const TokenSequence& seq,
                                TokenId target, const NeuronOverride& overrides) {
  require_mask(seq);
  require_target(params, target);
  EncoderPass pass(params, seq, overrides);
  const std::size_t mask = *seq.mask_position;
  const Vector p = mask_distribution(params, pass, mask);
  const double py = p(target);
  // dP_y/dz_j = P_y (delta_yj - P_j)
  Vector dz = -py * p;
  dz(target) += py;
  Matrix d_output = Matrix::Zero(pass.output().rows(), pass.output().cols());
  d_output.row(static_cast<Eigen::Index>(mask)) = (params.head_weight.transpose() * dz).transpose();
  NeuronGradient out;
  out.probability = py;
  out.grad = pass.backward(d_output, nullptr);
  out.trace = pass.trace();
  return out;
}

}  // namespace bt
