#include "biastracer/intervention.hpp"

#include <cmath>
#include <map>

#include "biastracer/error.hpp"
#include "biastracer/parallel.hpp"
#include "biastracer/rng.hpp"

namespace bt {

EncodedPrompt encode_prompt(const Vocab& vocab, const std::string& text, const std::string& answer) {
  EncodedPrompt p;
  p.seq = vocab.encode(text);
  if (!p.seq.mask_position) throw Error(ErrorCode::NoMaskPosition, "prompt has no [MASK]: " + text);
  const auto id = vocab.find(answer);
  if (!id || *id <= kMaskId) {
    throw Error(ErrorCode::AnswerNotInVocab, "answer '" + answer + "' is not in the vocabulary");
  }
  p.answer = *id;
  return p;
}

std::vector<EncodedPrompt> encode_prompts(const Vocab& vocab, const RelationDataset& dataset,
                                          std::span<const std::size_t> prompt_indices) {
  std::vector<EncodedPrompt> out;
  out.reserve(prompt_indices.size());
  for (auto i : prompt_indices) {
    const auto& p = dataset.prompts().at(i);
    out.push_back(encode_prompt(vocab, p.text, p.answer));
  }
  return out;
}

double masked_perplexity(const ModelParams& params, std::span<const EncodedPrompt> prompts,
                         const NeuronOverride& overrides) {
  if (prompts.empty()) throw Error(ErrorCode::EmptyPromptSet, "perplexity over an empty prompt set");
  double nll = 0.0;
  for (const auto& p : prompts) {
    nll -= std::log(mask_token_prob(params, p.seq, p.answer, overrides));
  }
  return std::exp(nll / static_cast<double>(prompts.size()));
}

void ErasureResult::finalize() {
  ratio_target = ppl_target_after / ppl_target_before;
  ratio_ctrl = ppl_ctrl_after / ppl_ctrl_before;
  selectivity = ratio_target - ratio_ctrl;
}

namespace {

std::size_t relation_position(const RelationDataset& dataset, const std::string& id) {
  const auto& rels = dataset.relations();
  for (std::size_t i = 0; i < rels.size(); ++i) {
    if (rels[i].id == id) return i;
  }
  throw Error(ErrorCode::DanglingPromptRelation, "unknown relation '" + id + "'");
}

ErasureResult measure(const ModelParams& params, const Vocab& vocab, const RelationDataset& dataset,
                      const BiasedRelation& relation, const NeuronSet& set,
                      const OverrideSpec& spec, const ErasureConfig& cfg) {
  ErasureResult r;
  r.relation_id = relation.id;
  r.category = category_code(relation.category);
  r.n_suppressed = set.neurons.size();

  const auto target = encode_prompts(vocab, dataset, dataset.prompt_indices(relation.id));
  std::vector<std::size_t> ctrl_idx;
  if (cfg.pool_controls) {
    ctrl_idx = control_prompts(dataset, relation, dataset.prompts().size(), cfg.seed).prompt_indices;
  } else {
    const auto stream = relation_position(dataset, relation.id);
    auto sample = control_prompts(dataset, relation, cfg.ctrl_n, Rng::mix(cfg.seed, stream));
    r.ctrl_shortfall = sample.shortfall;
    ctrl_idx = std::move(sample.prompt_indices);
  }
  const auto ctrl = encode_prompts(vocab, dataset, ctrl_idx);
  r.n_target_prompts = target.size();
  r.n_ctrl_prompts = ctrl.size();

  r.ppl_target_before = masked_perplexity(params, target);
  r.ppl_ctrl_before = masked_perplexity(params, ctrl);
  if (set.neurons.empty()) {
    r.skipped = true;
    r.ppl_target_after = r.ppl_target_before;
    r.ppl_ctrl_after = r.ppl_ctrl_before;
  } else {
    const auto overrides = NeuronOverride::for_neurons(set.neurons, spec, cfg.scope);
    r.ppl_target_after = masked_perplexity(params, target, overrides);
    r.ppl_ctrl_after = masked_perplexity(params, ctrl, overrides);
  }
  r.finalize();
  return r;
}

}  // namespace

ErasureResult erase(const ModelParams& params, const Vocab& vocab, const RelationDataset& dataset,
                    const BiasedRelation& relation, const NeuronSet& set, const ErasureConfig& cfg) {
  return measure(params, vocab, dataset, relation, set, OverrideSpec::zero(), cfg);
}

ErasureResult amplify(const ModelParams& params, const Vocab& vocab, const RelationDataset& dataset,
                      const BiasedRelation& relation, const NeuronSet& set, double factor,
                      const ErasureConfig& cfg) {
  if (!(factor >= 1.0)) throw Error(ErrorCode::InvalidArgument, "amplification factor must be >= 1");
  auto r = measure(params, vocab, dataset, relation, set, OverrideSpec::scale(factor), cfg);
  r.mode = "amplify";
  r.factor = factor;
  return r;
}

Rq2Aggregate aggregate_results(const std::string& label, std::span<const ErasureResult> results) {
  Rq2Aggregate a;
  a.label = label;
  for (const auto& r : results) {
    if (r.skipped) continue;
    ++a.relations;
    a.n_suppressed += static_cast<double>(r.n_suppressed);
    a.ratio_target += r.ratio_target;
    a.ratio_ctrl += r.ratio_ctrl;
    a.selectivity += r.selectivity;
  }
  if (a.relations > 0) {
    const auto n = static_cast<double>(a.relations);
    a.n_suppressed /= n;
    a.ratio_target /= n;
    a.ratio_ctrl /= n;
    a.selectivity /= n;
  }
  return a;
}

Rq2Report run_rq2(const ModelParams& params, const Vocab& vocab, const RelationDataset& dataset,
                  const std::vector<NeuronSet>& sets, const ErasureConfig& cfg,
                  double amplify_factor) {
  std::map<std::string, const NeuronSet*> by_relation;
  for (const auto& s : sets) by_relation[s.relation_id] = &s;
  std::vector<const BiasedRelation*> work;
  std::vector<const NeuronSet*> work_sets;
  for (const auto& r : dataset.relations()) {
    auto it = by_relation.find(r.id);
    if (it == by_relation.end()) continue;
    work.push_back(&r);
    work_sets.push_back(it->second);
  }
  Rq2Report report;
  report.results.resize(work.size());
  parallel_for(work.size(), [&](std::size_t i) {
    report.results[i] = amplify_factor > 0.0
                            ? amplify(params, vocab, dataset, *work[i], *work_sets[i], amplify_factor, cfg)
                            : erase(params, vocab, dataset, *work[i], *work_sets[i], cfg);
  });
  std::map<std::string, std::vector<ErasureResult>> by_category;
  for (const auto& r : report.results) by_category[r.category].push_back(r);
  for (const auto& [cat, rs] : by_category) {
    report.per_category.push_back(aggregate_results(cat, rs));
  }
  report.overall = aggregate_results("all", report.results);
  return report;
}

ModelParams bake_suppression(const ModelParams& params, const std::vector<NeuronId>& neurons) {
  NeuronOverride::for_neurons(neurons, OverrideSpec::zero()).validate(params.config);
  ModelParams out = params;
  for (const auto& n : neurons) out.layers[static_cast<std::size_t>(n.layer)].w_out.col(n.index).setZero();
  return out;
}

}  // namespace bt
