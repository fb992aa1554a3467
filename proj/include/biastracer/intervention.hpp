#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "biastracer/encoder.hpp"
#include "biastracer/relation_store.hpp"
#include "biastracer/selection.hpp"
#include "biastracer/vocab.hpp"

namespace bt {

struct EncodedPrompt {
  TokenSequence seq;
  TokenId answer = kUnkId;
};

// Throws AnswerNotInVocab for an answer outside the vocabulary and
// NoMaskPosition for text without [MASK].
EncodedPrompt encode_prompt(const Vocab& vocab, const std::string& text, const std::string& answer);
std::vector<EncodedPrompt> encode_prompts(const Vocab& vocab, const RelationDataset& dataset,
                                          std::span<const std::size_t> prompt_indices);

// exp(mean over prompts of -ln P(answer | prompt, overrides)).
double masked_perplexity(const ModelParams& params, std::span<const EncodedPrompt> prompts,
                         const NeuronOverride& overrides = NeuronOverride{});

struct ErasureConfig {
  std::size_t ctrl_n = 10;
  std::uint64_t seed = 0;
  OverrideScope scope = OverrideScope::AllPositions;
  bool pool_controls = false;  // every out-of-category prompt instead of a sample
};

struct ErasureResult {
  std::string relation_id;
  std::string category;
  std::string mode = "erase";  // or "amplify"
  double factor = 0.0;         // amplification factor; 0 for erasure
  std::size_t n_suppressed = 0;
  double ppl_target_before = 1.0, ppl_target_after = 1.0;
  double ppl_ctrl_before = 1.0, ppl_ctrl_after = 1.0;
  double ratio_target = 1.0, ratio_ctrl = 1.0;
  double selectivity = 0.0;
  bool skipped = false;  // empty neuron set
  bool ctrl_shortfall = false;
  std::size_t n_target_prompts = 0, n_ctrl_prompts = 0;

  // Fills ratios and selectivity from the four perplexities.
  void finalize();
};

ErasureResult erase(const ModelParams& params, const Vocab& vocab, const RelationDataset& dataset,
                    const BiasedRelation& relation, const NeuronSet& set, const ErasureConfig& cfg);

// Same measurement with Scale(factor) instead of Zero; factor >= 1.
ErasureResult amplify(const ModelParams& params, const Vocab& vocab, const RelationDataset& dataset,
                      const BiasedRelation& relation, const NeuronSet& set, double factor,
                      const ErasureConfig& cfg);

struct Rq2Aggregate {
  std::string label;  // BRxx or "all"
  std::size_t relations = 0;
  double n_suppressed = 0.0;
  double ratio_target = 0.0;
  double ratio_ctrl = 0.0;
  double selectivity = 0.0;
};

struct Rq2Report {
  std::vector<ErasureResult> results;       // dataset relation order
  std::vector<Rq2Aggregate> per_category;   // BR order, skipped relations excluded
  Rq2Aggregate overall;
};

// amplify_factor == 0 selects erasure.
Rq2Report run_rq2(const ModelParams& params, const Vocab& vocab, const RelationDataset& dataset,
                  const std::vector<NeuronSet>& sets, const ErasureConfig& cfg,
                  double amplify_factor = 0.0);

Rq2Aggregate aggregate_results(const std::string& label, std::span<const ErasureResult> results);

// Copy of params with the outgoing projection of every listed neuron zeroed,
// a permanent equivalent of an all-position Zero override.
ModelParams bake_suppression(const ModelParams& params, const std::vector<NeuronId>& neurons);

}  // namespace bt
