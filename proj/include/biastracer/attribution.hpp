#pragma once

#include <functional>
#include <string>
#include <vector>

#include "biastracer/encoder.hpp"

namespace bt {

enum class AttributionMethod { IntegratedGradients, ActivationBaseline };

std::string method_name(AttributionMethod m);  // "ig" / "baseline"
AttributionMethod parse_method(const std::string& name);

struct AttributionConfig {
  int steps = 20;
  AttributionMethod method = AttributionMethod::IntegratedGradients;
};

// Per-neuron scores at the mask position of one prompt. Both fields hold one
// d_ff vector per layer.
struct AttributionMap {
  std::string prompt_id;
  std::vector<Vector> scores;
  std::vector<Vector> observed;  // unmodified activations
  double probability = 0.0;      // P(answer) without intervention

  double score(NeuronId n) const { return scores[static_cast<std::size_t>(n.layer)](n.index); }
  double max_score() const;
};

// Gradient of the target probability with respect to each neuron, evaluated
// with every neuron pinned to the given values.
using PathGradient = std::function<std::vector<Vector>(const std::vector<Vector>& values)>;

// Right Riemann sum of integrated gradients along the joint path
// values(alpha) = alpha * observed, alpha = k/steps for k = 1..steps:
//   score_i = observed_i / steps * sum_k grad_i(values(k/steps)).
std::vector<Vector> integrate_gradients(const std::vector<Vector>& observed, int steps,
                                        const PathGradient& gradient);

AttributionMap ig_attribution(const ModelParams& params, const TokenSequence& prompt,
                              TokenId answer, const AttributionConfig& cfg = {});

AttributionMap baseline_attribution(const ModelParams& params, const TokenSequence& prompt,
                                    TokenId answer);

// Dispatches on cfg.method.
AttributionMap attribute(const ModelParams& params, const TokenSequence& prompt, TokenId answer,
                         const AttributionConfig& cfg);

struct CompletenessResult {
  double ig_score = 0.0;         // single-neuron path, other neurons unmodified
  double suppression_gap = 0.0;  // P(unmodified) - P(neuron set to 0)
  double abs_error = 0.0;
};

CompletenessResult completeness_check(const ModelParams& params, const TokenSequence& prompt,
                                      TokenId answer, NeuronId neuron, int steps);

}  // namespace bt
