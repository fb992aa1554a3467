#include "biastracer/selection.hpp"

#include <algorithm>
#include <cmath>

#include "biastracer/error.hpp"

namespace bt {

void SelectionConfig::validate() const {
  if (mode == Mode::RelativeThreshold && !(threshold > 0.0 && threshold <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "threshold t must lie in (0, 1]");
  }
  if (mode == Mode::TopK && top_k < 1) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
  if (!(share > 0.0 && share <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "share p must lie in (0, 1]");
  }
}

std::vector<ScoredNeuron> scored_neurons(const AttributionMap& map) {
  std::vector<ScoredNeuron> out;
  for (std::size_t l = 0; l < map.scores.size(); ++l) {
    for (Eigen::Index i = 0; i < map.scores[l].size(); ++i) {
      out.push_back({{static_cast<int>(l), static_cast<int>(i)}, map.scores[l](i)});
    }
  }
  return out;
}

PromptSelection select_per_prompt(std::span<const ScoredNeuron> scores, const SelectionConfig& cfg) {
  cfg.validate();
  for (const auto& s : scores) {
    if (!std::isfinite(s.score)) throw Error(ErrorCode::InvalidArgument, "attribution score is not finite");
  }
  PromptSelection out;
  double max = -std::numeric_limits<double>::infinity();
  for (const auto& s : scores) max = std::max(max, s.score);
  if (scores.empty() || max <= 0.0) {
    out.all_non_positive = true;
    return out;
  }
  if (cfg.mode == SelectionConfig::Mode::RelativeThreshold) {
    const double cutoff = cfg.threshold * max;
    for (const auto& s : scores) {
      if (s.score >= cutoff) out.neurons.push_back(s.id);
    }
  } else {
    std::vector<ScoredNeuron> ranked(scores.begin(), scores.end());
    const auto k = std::min<std::size_t>(static_cast<std::size_t>(cfg.top_k), ranked.size());
    std::partial_sort(ranked.begin(), ranked.begin() + static_cast<long>(k), ranked.end(),
                      [](const ScoredNeuron& a, const ScoredNeuron& b) {
                        if (a.score != b.score) return a.score > b.score;
                        return a.id < b.id;
                      });
    for (std::size_t i = 0; i < k; ++i) out.neurons.push_back(ranked[i].id);
  }
  std::sort(out.neurons.begin(), out.neurons.end());
  return out;
}

PromptSelection select_per_prompt(const AttributionMap& map, const SelectionConfig& cfg) {
  const auto scores = scored_neurons(map);
  return select_per_prompt(std::span<const ScoredNeuron>(scores), cfg);
}

namespace {

std::vector<NeuronId> consensus(const std::map<NeuronId, std::size_t>& counts, std::size_t n_sets,
                                double share) {
  // ceil with slack so that e.g. 0.7 * 10 requires 7, not 8
  const auto need = static_cast<std::size_t>(std::ceil(share * static_cast<double>(n_sets) - 1e-9));
  std::vector<NeuronId> out;
  for (const auto& [id, c] : counts) {
    if (c >= need) out.push_back(id);
  }
  return out;
}

std::size_t overlap(const std::vector<NeuronId>& a, const std::vector<NeuronId>& b) {
  // inputs are sorted and duplicate-free
  std::size_t n = 0;
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++n;
      ++i;
      ++j;
    }
  }
  return n;
}

std::vector<NeuronId> canonical(std::vector<NeuronId> s) {
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

double mean_pairwise_overlap(const std::vector<std::vector<NeuronId>>& sets) {
  std::vector<std::vector<NeuronId>> sorted;
  sorted.reserve(sets.size());
  for (const auto& s : sets) sorted.push_back(canonical(s));
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    for (std::size_t j = i + 1; j < sorted.size(); ++j) {
      total += static_cast<double>(overlap(sorted[i], sorted[j]));
      ++pairs;
    }
  }
  return total / static_cast<double>(pairs);
}

}  // namespace

Refinement refine_across_prompts(const std::vector<std::vector<NeuronId>>& per_prompt_sets,
                                 double share, bool adaptive) {
  if (per_prompt_sets.empty()) {
    throw Error(ErrorCode::TooFewSets, "refinement needs at least one prompt set");
  }
  if (!(share > 0.0 && share <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "share p must lie in (0, 1]");
  }
  std::map<NeuronId, std::size_t> counts;
  for (const auto& s : per_prompt_sets) {
    for (const auto& id : canonical(s)) ++counts[id];
  }
  Refinement r;
  r.effective_share = share;
  r.neurons = consensus(counts, per_prompt_sets.size(), share);
  if (!adaptive) return r;
  constexpr double kStep = 0.05;
  constexpr double kFloor = 0.3;
  for (int j = 1; r.neurons.empty(); ++j) {
    const double p = share - kStep * j;
    if (p < kFloor - 1e-12) break;
    r.effective_share = p;
    r.neurons = consensus(counts, per_prompt_sets.size(), p);
  }
  return r;
}

double inner_intersection(const std::vector<std::vector<NeuronId>>& per_prompt_sets) {
  if (per_prompt_sets.size() < 2) {
    throw Error(ErrorCode::TooFewSets, "inner intersection needs at least two prompt sets");
  }
  return mean_pairwise_overlap(per_prompt_sets);
}

double inter_intersection(const std::vector<std::vector<NeuronId>>& relation_sets) {
  if (relation_sets.size() < 2) {
    throw Error(ErrorCode::TooFewRelations, "inter intersection needs at least two relations");
  }
  return mean_pairwise_overlap(relation_sets);
}

NeuronSet build_neuron_set(std::string relation_id, std::string category,
                           std::vector<std::vector<NeuronId>> per_prompt_sets,
                           const SelectionConfig& cfg, std::size_t non_positive_prompts) {
  NeuronSet set;
  set.relation_id = std::move(relation_id);
  set.category = std::move(category);
  for (auto& s : per_prompt_sets) s = canonical(std::move(s));
  auto refined = refine_across_prompts(per_prompt_sets, cfg.share, cfg.adaptive);
  set.neurons = std::move(refined.neurons);
  set.effective_share = refined.effective_share;
  set.inner = per_prompt_sets.size() >= 2 ? inner_intersection(per_prompt_sets) : 0.0;
  set.per_prompt_sets = std::move(per_prompt_sets);
  set.non_positive_prompts = non_positive_prompts;
  return set;
}

SelectionSummary summarize_sets(const std::vector<NeuronSet>& sets) {
  SelectionSummary s;
  s.relations = sets.size();
  if (sets.empty()) return s;
  std::vector<std::vector<NeuronId>> refined;
  for (const auto& set : sets) {
    s.avg_neurons += static_cast<double>(set.neurons.size());
    s.avg_inner += set.inner;
    if (set.neurons.empty()) ++s.empty_sets;
    refined.push_back(set.neurons);
  }
  s.avg_neurons /= static_cast<double>(sets.size());
  s.avg_inner /= static_cast<double>(sets.size());
  s.inter = sets.size() >= 2 ? inter_intersection(refined) : 0.0;
  return s;
}

}  // namespace bt
