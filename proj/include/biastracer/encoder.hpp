#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "biastracer/vocab.hpp"

namespace bt {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

struct ModelConfig {
  int n_layers = 4;
  int d_model = 64;
  int n_heads = 4;
  int d_ff = 128;
  int vocab_size = 0;
  int max_len = 32;
  std::uint64_t seed = 0;

  // Throws InvalidArgument unless every dimension is positive and n_heads
  // divides d_model.
  void validate() const;
  int head_dim() const { return d_model / n_heads; }
  int neuron_count() const { return n_layers * d_ff; }

  bool operator==(const ModelConfig&) const = default;
};

// Coordinate of one FFN intermediate unit.
struct NeuronId {
  int layer = 0;
  int index = 0;

  auto operator<=>(const NeuronId&) const = default;
};

struct OverrideSpec {
  enum class Kind { Zero, Scale, SetTo };

  Kind kind = Kind::Zero;
  double value = 0.0;

  static OverrideSpec zero() { return {Kind::Zero, 0.0}; }
  static OverrideSpec scale(double alpha);  // alpha >= 0
  static OverrideSpec set_to(double v) { return {Kind::SetTo, v}; }

  // The override as an affine map v -> slope * v + offset.
  double slope() const { return kind == Kind::Scale ? value : 0.0; }
  double offset() const { return kind == Kind::SetTo ? value : 0.0; }

  bool operator==(const OverrideSpec&) const = default;
};

enum class OverrideScope {
  AllPositions,  // the unit is replaced at every token position
  MaskPosition,  // only at the [MASK] position
};

// Replacement rules for FFN intermediate values, applied after GELU and before
// the output projection. At most one rule per neuron; set() replaces.
class NeuronOverride {
 public:
  explicit NeuronOverride(OverrideScope scope = OverrideScope::AllPositions) : scope_(scope) {}

  static NeuronOverride uniform(const ModelConfig& config, OverrideSpec spec,
                                OverrideScope scope = OverrideScope::AllPositions);
  static NeuronOverride for_neurons(const std::vector<NeuronId>& neurons, OverrideSpec spec,
                                    OverrideScope scope = OverrideScope::AllPositions);

  void set(NeuronId id, OverrideSpec spec) { entries_[id] = spec; }
  void merge(const NeuronOverride& other);

  OverrideScope scope() const { return scope_; }
  bool empty() const { return entries_.empty(); }
  const std::map<NeuronId, OverrideSpec>& entries() const { return entries_; }

  // Throws OverrideOutOfBounds for coordinates outside the model.
  void validate(const ModelConfig& config) const;

  bool operator==(const NeuronOverride&) const = default;

 private:
  OverrideScope scope_;
  std::map<NeuronId, OverrideSpec> entries_;
};

struct LayerParams {
  Matrix wq, wk, wv, wo;  // [d_model x d_model]
  Vector bq, bk, bv, bo;
  Vector ln1_gamma, ln1_beta;
  Matrix w_in;  // [d_ff x d_model]
  Vector b_in;
  Matrix w_out;  // [d_model x d_ff]; column i is neuron i's outgoing projection
  Vector b_out;
  Vector ln2_gamma, ln2_beta;
};

// Post-norm transformer encoder with a linear masked-LM head.
struct ModelParams {
  ModelConfig config;
  Matrix token_embedding;     // [vocab x d_model]
  Matrix position_embedding;  // [max_len x d_model]
  Vector emb_ln_gamma, emb_ln_beta;
  std::vector<LayerParams> layers;
  Matrix head_weight;  // [vocab x d_model]
  Vector head_bias;

  static ModelParams zeros(const ModelConfig& config);
  // Weights ~ N(0, 0.02^2), biases 0, layer-norm gains 1; seeded by config.seed.
  static ModelParams initialize(const ModelConfig& config);

  // Every tensor as a flat view, in a fixed order with stable names.
  std::vector<std::pair<std::string, std::span<double>>> tensors();
  std::vector<std::pair<std::string, std::span<const double>>> tensors() const;

  bool operator==(const ModelParams& other) const;
};

struct ForwardTrace {
  std::optional<std::size_t> mask_position;
  // Per layer, the d_ff GELU outputs at the mask position before this layer's
  // override is applied. Empty when the sequence has no mask.
  std::vector<Vector> activations;
};

struct ForwardResult {
  Matrix logits;  // [seq_len x vocab]
  ForwardTrace trace;
};

// One forward evaluation with every intermediate kept for back-propagation.
class EncoderPass {
 public:
  EncoderPass(const ModelParams& params, const TokenSequence& seq,
              const NeuronOverride& overrides = NeuronOverride{});
  ~EncoderPass();
  EncoderPass(EncoderPass&&) noexcept;

  const Matrix& output() const;  // final hidden states [seq_len x d_model]
  ForwardTrace trace() const;
  Matrix logits() const;

  // Propagates dL/d(output). Parameter gradients are accumulated into grads
  // when it is non-null. Returns dL/d(neuron value entering the output
  // projection) at the mask position, one vector per layer (empty without a
  // mask position).
  std::vector<Vector> backward(const Matrix& d_output, ModelParams* grads) const;

 private:
  struct State;
  std::unique_ptr<State> state_;
};

ForwardResult forward(const ModelParams& params, const TokenSequence& seq,
                      const NeuronOverride& overrides = NeuronOverride{});

double mask_token_prob(const ModelParams& params, const TokenSequence& seq, TokenId target,
                       const NeuronOverride& overrides = NeuronOverride{});

struct NeuronGradient {
  double probability = 0.0;
  std::vector<Vector> grad;  // per layer, d_ff entries
  ForwardTrace trace;
};

// Exact reverse-mode dP(target at mask)/d(neuron value) for every FFN unit at
// the mask position, evaluated under the given overrides.
NeuronGradient grad_wrt_neurons(const ModelParams& params, const TokenSequence& seq,
                                TokenId target,
                                const NeuronOverride& overrides = NeuronOverride{});

// Row-wise softmax, numerically stabilized.
Matrix softmax_rows(const Matrix& logits);

double gelu(double x);
double gelu_derivative(double x);

// Layer-norm epsilon used throughout the encoder.
inline constexpr double kLayerNormEps = 1e-12;

}  // namespace bt
