#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bt {

inline constexpr std::string_view kMaskToken = "[MASK]";

// BR01..BR09. The underlying value is the 1-based category number.
enum class BiasCategory : int {
  Age = 1,
  Disability,
  Gender,
  Nationality,
  PhysicalAppearance,
  RaceColor,
  Religion,
  SexualOrientation,
  Socioeconomic,
};

inline constexpr int kCategoryCount = 9;

std::string category_code(BiasCategory c);   // "BR01"
std::string category_label(BiasCategory c);  // "Age"
std::optional<BiasCategory> parse_category(std::string_view code);
BiasCategory category_from_index(int zero_based);

struct BiasedRelation {
  std::string id;
  BiasCategory category = BiasCategory::Age;
  std::string group;
  std::string association;
  std::string stereotype;
  std::optional<std::string> source_sentence;

  bool operator==(const BiasedRelation&) const = default;
};

struct BiasPrompt {
  std::string relation_id;
  std::string text;
  std::string answer;

  bool operator==(const BiasPrompt&) const = default;
};

// Number of non-overlapping occurrences of [MASK] in text.
std::size_t count_mask_tokens(std::string_view text);

class RelationDataset {
 public:
  RelationDataset() = default;

  // Validates every invariant; strict additionally demands exactly
  // prompts_per_relation prompts for each relation.
  RelationDataset(std::vector<BiasedRelation> relations, std::vector<BiasPrompt> prompts,
                  bool strict, std::size_t prompts_per_relation = 10);

  const std::vector<BiasedRelation>& relations() const { return relations_; }
  const std::vector<BiasPrompt>& prompts() const { return prompts_; }
  std::size_t prompts_per_relation() const { return prompts_per_relation_; }

  const BiasedRelation& relation(std::string_view id) const;
  bool has_relation(std::string_view id) const;

  // Indices into prompts(), in file order.
  const std::vector<std::size_t>& prompt_indices(std::string_view relation_id) const;

  // "<relation_id>#<k>" with k the 0-based position among that relation's prompts.
  std::string prompt_id(std::size_t prompt_index) const;

 private:
  std::vector<BiasedRelation> relations_;
  std::vector<BiasPrompt> prompts_;
  std::size_t prompts_per_relation_ = 10;
  std::map<std::string, std::size_t, std::less<>> relation_index_;
  std::vector<std::vector<std::size_t>> prompts_by_relation_;
  std::vector<std::size_t> ordinal_;
};

RelationDataset load_dataset(const std::filesystem::path& relations_path,
                             const std::filesystem::path& prompts_path, bool strict,
                             std::size_t prompts_per_relation = 10);

// Writes both files in the canonical line-delimited layout; load_dataset on the
// result reproduces the dataset exactly.
void save_dataset(const RelationDataset& dataset, const std::filesystem::path& relations_path,
                  const std::filesystem::path& prompts_path);

struct CategorySummary {
  std::string label;  // "BR01(Age)" or "Total"
  std::size_t relations = 0;
  std::size_t prompts = 0;
  std::size_t groups = 0;
  std::size_t stereotypes = 0;
};

// One row per present category in BR order, then a Total row whose columns are
// the sums of the category rows.
std::vector<CategorySummary> summarize(const RelationDataset& dataset);
std::string summary_csv(const std::vector<CategorySummary>& rows);

struct ControlSample {
  std::vector<std::size_t> prompt_indices;
  bool shortfall = false;  // fewer than n were available
};

ControlSample control_prompts(const RelationDataset& dataset, const BiasedRelation& target,
                              std::size_t n, std::uint64_t seed);

}  // namespace bt
