#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "biastracer/attribution.hpp"
#include "biastracer/encoder.hpp"

namespace bt {

struct SelectionConfig {
  enum class Mode { RelativeThreshold, TopK };

  Mode mode = Mode::RelativeThreshold;
  double threshold = 0.2;  // t in (0, 1]
  int top_k = 20;          // k >= 1
  double share = 0.7;      // p in (0, 1]
  bool adaptive = true;

  void validate() const;
};

struct ScoredNeuron {
  NeuronId id;
  double score = 0.0;
};

std::vector<ScoredNeuron> scored_neurons(const AttributionMap& map);

struct PromptSelection {
  std::vector<NeuronId> neurons;     // ascending (layer, index)
  bool all_non_positive = false;     // no salient neuron; neurons is empty
};

// RelativeThreshold(t): score >= t * max. TopK(k): the k best by score, ties to
// the lower (layer, index). The scores may be a sparse subset of the map as
// long as it contains every neuron the rule can select.
PromptSelection select_per_prompt(std::span<const ScoredNeuron> scores, const SelectionConfig& cfg);
PromptSelection select_per_prompt(const AttributionMap& map, const SelectionConfig& cfg);

struct Refinement {
  std::vector<NeuronId> neurons;  // ascending
  double effective_share = 0.0;
};

// Neurons present in at least ceil(p * #sets) sets. With adaptive on, an empty
// result lowers p by 0.05 until non-empty or p drops below 0.3.
Refinement refine_across_prompts(const std::vector<std::vector<NeuronId>>& per_prompt_sets,
                                 double share, bool adaptive);

// Mean |A ∩ B| over unordered pairs of per-prompt sets (>= 2 sets).
double inner_intersection(const std::vector<std::vector<NeuronId>>& per_prompt_sets);

// Mean |S_r ∩ S_q| over unordered pairs of relation sets (>= 2 relations).
double inter_intersection(const std::vector<std::vector<NeuronId>>& relation_sets);

struct NeuronSet {
  std::string relation_id;
  std::string category;  // BRxx
  std::vector<NeuronId> neurons;
  std::vector<std::vector<NeuronId>> per_prompt_sets;
  double effective_share = 0.0;
  std::size_t non_positive_prompts = 0;
  double inner = 0.0;  // inner intersection; 0 when fewer than 2 prompts
};

NeuronSet build_neuron_set(std::string relation_id, std::string category,
                           std::vector<std::vector<NeuronId>> per_prompt_sets,
                           const SelectionConfig& cfg, std::size_t non_positive_prompts = 0);

// The Table-2 row shape for one attribution method.
struct SelectionSummary {
  std::size_t relations = 0;
  double avg_neurons = 0.0;   // Avg BN over all relations
  double avg_inner = 0.0;     // mean per-relation inner intersection
  double inter = 0.0;         // inter intersection across relation sets
  std::size_t empty_sets = 0;
};

SelectionSummary summarize_sets(const std::vector<NeuronSet>& sets);

}  // namespace bt
