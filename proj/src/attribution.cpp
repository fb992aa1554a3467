#include "biastracer/attribution.hpp"

#include <algorithm>
#include <cmath>

#include "biastracer/error.hpp"

namespace bt {
namespace {

void check_prompt(const ModelParams& params, const TokenSequence& prompt, TokenId answer) {
  if (!prompt.mask_position) throw Error(ErrorCode::NoMaskPosition, "prompt has no [MASK] token");
  if (answer < 0 || answer >= params.config.vocab_size || answer == kUnkId) {
    throw Error(ErrorCode::AnswerNotInVocab, "answer token is not in the vocabulary");
  }
}

void check_steps(int steps) {
  if (steps < 1) throw Error(ErrorCode::InvalidArgument, "integration steps must be >= 1");
}

NeuronOverride pin_all(const std::vector<Vector>& values) {
  NeuronOverride o(OverrideScope::MaskPosition);
  for (std::size_t l = 0; l < values.size(); ++l) {
    for (Eigen::Index i = 0; i < values[l].size(); ++i) {
      o.set({static_cast<int>(l), static_cast<int>(i)}, OverrideSpec::set_to(values[l](i)));
    }
  }
  return o;
}

}  // namespace

std::string method_name(AttributionMethod m) {
  return m == AttributionMethod::IntegratedGradients ? "ig" : "baseline";
}

AttributionMethod parse_method(const std::string& name) {
  if (name == "ig") return AttributionMethod::IntegratedGradients;
  if (name == "baseline") return AttributionMethod::ActivationBaseline;
  throw Error(ErrorCode::InvalidArgument, "unknown attribution method '" + name + "'");
}

double AttributionMap::max_score() const {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& v : scores) best = std::max(best, v.maxCoeff());
  return best;
}

std::vector<Vector> integrate_gradients(const std::vector<Vector>& observed, int steps,
                                        const PathGradient& gradient) {
  check_steps(steps);
  std::vector<Vector> sum;
  for (const auto& v : observed) sum.push_back(Vector::Zero(v.size()));
  std::vector<Vector> values(observed.size());
  for (int k = 1; k <= steps; ++k) {
    const double alpha = static_cast<double>(k) / static_cast<double>(steps);
    for (std::size_t l = 0; l < observed.size(); ++l) values[l] = alpha * observed[l];
    const auto grad = gradient(values);
    for (std::size_t l = 0; l < observed.size(); ++l) sum[l] += grad[l];
  }
  std::vector<Vector> scores(observed.size());
  for (std::size_t l = 0; l < observed.size(); ++l) {
    scores[l] = observed[l].cwiseProduct(sum[l]) / static_cast<double>(steps);
  }
  return scores;
}

AttributionMap ig_attribution(const ModelParams& params, const TokenSequence& prompt,
                              TokenId answer, const AttributionConfig& cfg) {
  check_prompt(params, prompt, answer);
  check_steps(cfg.steps);
  const auto base = grad_wrt_neurons(params, prompt, answer);
  AttributionMap map;
  map.observed = base.trace.activations;
  map.probability = base.probability;
  map.scores = integrate_gradients(map.observed, cfg.steps, [&](const std::vector<Vector>& values) {
    return grad_wrt_neurons(params, prompt, answer, pin_all(values)).grad;
  });
  return map;
}

AttributionMap baseline_attribution(const ModelParams& params, const TokenSequence& prompt,
                                    TokenId answer) {
  check_prompt(params, prompt, answer);
  EncoderPass pass(params, prompt);
  AttributionMap map;
  map.observed = pass.trace().activations;
  map.scores = map.observed;
  const auto logits = pass.logits();
  const auto probs = softmax_rows(logits.row(static_cast<Eigen::Index>(*prompt.mask_position)));
  map.probability = probs(0, answer);
  return map;
}

AttributionMap attribute(const ModelParams& params, const TokenSequence& prompt, TokenId answer,
                         const AttributionConfig& cfg) {
  return cfg.method == AttributionMethod::IntegratedGradients
             ? ig_attribution(params, prompt, answer, cfg)
             : baseline_attribution(params, prompt, answer);
}

CompletenessResult completeness_check(const ModelParams& params, const TokenSequence& prompt,
                                      TokenId answer, NeuronId neuron, int steps) {
  check_prompt(params, prompt, answer);
  check_steps(steps);
  NeuronOverride probe(OverrideScope::MaskPosition);
  probe.set(neuron, OverrideSpec::zero());
  probe.validate(params.config);

  const auto base = grad_wrt_neurons(params, prompt, answer);
  const double observed =
      base.trace.activations[static_cast<std::size_t>(neuron.layer)](neuron.index);
  double sum = 0.0;
  for (int k = 1; k <= steps; ++k) {
    NeuronOverride path(OverrideScope::MaskPosition);
    path.set(neuron, OverrideSpec::set_to(observed * k / steps));
    sum += grad_wrt_neurons(params, prompt, answer, path).grad[static_cast<std::size_t>(neuron.layer)](neuron.index);
  }
  CompletenessResult r;
  r.ig_score = observed * sum / steps;
  r.suppression_gap = base.probability - mask_token_prob(params, prompt, answer, probe);
  r.abs_error = std::abs(r.ig_score - r.suppression_gap);
  return r;
}

}  // namespace bt
