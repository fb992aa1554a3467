#include "biastracer/relation_store.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "biastracer/error.hpp"
#include "biastracer/rng.hpp"

namespace bt {
namespace {

constexpr std::array<const char*, kCategoryCount> kLabels = {
    "Age",      "Disability", "Gender",             "Nationality",  "Physical Appearance",
    "RaceColor", "Religion",  "Sexual Orientation", "Socioeconomic",
};

std::string normalize(std::string_view s) {
  auto begin = s.begin();
  auto end = s.end();
  while (begin != end && std::isspace(static_cast<unsigned char>(*begin))) ++begin;
  while (end != begin && std::isspace(static_cast<unsigned char>(*(end - 1)))) --end;
  std::string out(begin, end);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

[[noreturn]] void malformed(const std::filesystem::path& path, std::size_t line,
                            std::string_view field, std::string_view what) {
  std::ostringstream msg;
  msg << path.string() << ":" << line << ": field '" << field << "': " << what;
  throw Error(ErrorCode::MalformedRecord, msg.str());
}

std::string required_string(const nlohmann::json& obj, const char* key,
                            const std::filesystem::path& path, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end()) malformed(path, line, key, "missing");
  if (!it->is_string()) malformed(path, line, key, "expected a string");
  auto value = it->get<std::string>();
  if (blank(value)) malformed(path, line, key, "must be non-empty");
  return value;
}

template <class F>
void for_each_record(const std::filesystem::path& path, F&& fn) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (blank(text)) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      malformed(path, line, "<record>", e.what());
    }
    if (!obj.is_object()) malformed(path, line, "<record>", "expected a JSON object");
    fn(obj, line);
  }
}

}  // namespace

std::string category_code(BiasCategory c) {
  const int v = static_cast<int>(c);
  return std::string("BR0") + static_cast<char>('0' + v);
}

std::string category_label(BiasCategory c) { return kLabels.at(static_cast<int>(c) - 1); }

std::optional<BiasCategory> parse_category(std::string_view code) {
  if (code.size() == 4 && code.substr(0, 3) == "BR0" && code[3] >= '1' && code[3] <= '9') {
    return static_cast<BiasCategory>(code[3] - '0');
  }
  return std::nullopt;
}

BiasCategory category_from_index(int zero_based) {
  if (zero_based < 0 || zero_based >= kCategoryCount) {
    throw Error(ErrorCode::InvalidArgument, "category index out of range");
  }
  return static_cast<BiasCategory>(zero_based + 1);
}

std::size_t count_mask_tokens(std::string_view text) {
  std::size_t count = 0;
  for (std::size_t pos = text.find(kMaskToken); pos != std::string_view::npos;
       pos = text.find(kMaskToken, pos + kMaskToken.size())) {
    ++count;
  }
  return count;
}

RelationDataset::RelationDataset(std::vector<BiasedRelation> relations,
                                 std::vector<BiasPrompt> prompts, bool strict,
                                 std::size_t prompts_per_relation)
    : relations_(std::move(relations)),
      prompts_(std::move(prompts)),
      prompts_per_relation_(prompts_per_relation) {
  if (prompts_per_relation_ == 0) {
    throw Error(ErrorCode::InvalidArgument, "prompts_per_relation must be positive");
  }
  for (std::size_t i = 0; i < relations_.size(); ++i) {
    const auto& r = relations_[i];
    if (r.id.empty() || blank(r.group) || blank(r.association) || blank(r.stereotype)) {
      throw Error(ErrorCode::MalformedRecord,
                  "relation '" + r.id + "' has an empty id, group, association or stereotype");
    }
    if (!relation_index_.emplace(r.id, i).second) {
      throw Error(ErrorCode::DuplicateRelationId, "duplicate relation id '" + r.id + "'");
    }
  }
  prompts_by_relation_.resize(relations_.size());
  ordinal_.resize(prompts_.size());
  for (std::size_t i = 0; i < prompts_.size(); ++i) {
    const auto& p = prompts_[i];
    if (count_mask_tokens(p.text) != 1) {
      throw Error(ErrorCode::MalformedRecord,
                  "prompt " + std::to_string(i) + " must contain [MASK] exactly once");
    }
    if (blank(p.answer)) {
      throw Error(ErrorCode::MalformedRecord, "prompt " + std::to_string(i) + " has an empty answer");
    }
    auto it = relation_index_.find(p.relation_id);
    if (it == relation_index_.end()) {
      throw Error(ErrorCode::DanglingPromptRelation,
                  "prompt " + std::to_string(i) + " references unknown relation '" +
                      p.relation_id + "'");
    }
    ordinal_[i] = prompts_by_relation_[it->second].size();
    prompts_by_relation_[it->second].push_back(i);
  }
  for (std::size_t i = 0; i < relations_.size(); ++i) {
    const std::size_t n = prompts_by_relation_[i].size();
    const bool ok = strict ? n == prompts_per_relation_ : n >= 1;
    if (!ok) {
      std::ostringstream msg;
      msg << "relation '" << relations_[i].id << "' has " << n << " prompts, expected "
          << (strict ? std::to_string(prompts_per_relation_) : std::string("at least 1"));
      throw Error(ErrorCode::PromptCountViolation, msg.str());
    }
  }
}

const BiasedRelation& RelationDataset::relation(std::string_view id) const {
  auto it = relation_index_.find(id);
  if (it == relation_index_.end()) {
    throw Error(ErrorCode::DanglingPromptRelation, "unknown relation '" + std::string(id) + "'");
  }
  return relations_[it->second];
}

bool RelationDataset::has_relation(std::string_view id) const {
  return relation_index_.find(id) != relation_index_.end();
}

const std::vector<std::size_t>& RelationDataset::prompt_indices(std::string_view relation_id) const {
  auto it = relation_index_.find(relation_id);
  if (it == relation_index_.end()) {
    throw Error(ErrorCode::DanglingPromptRelation,
                "unknown relation '" + std::string(relation_id) + "'");
  }
  return prompts_by_relation_[it->second];
}

std::string RelationDataset::prompt_id(std::size_t prompt_index) const {
  return prompts_.at(prompt_index).relation_id + "#" + std::to_string(ordinal_.at(prompt_index));
}

RelationDataset load_dataset(const std::filesystem::path& relations_path,
                             const std::filesystem::path& prompts_path, bool strict,
                             std::size_t prompts_per_relation) {
  std::vector<BiasedRelation> relations;
  for_each_record(relations_path, [&](const nlohmann::json& obj, std::size_t line) {
    BiasedRelation r;
    r.id = required_string(obj, "id", relations_path, line);
    const auto code = required_string(obj, "category", relations_path, line);
    auto category = parse_category(code);
    if (!category) malformed(relations_path, line, "category", "expected BR01..BR09");
    r.category = *category;
    r.group = required_string(obj, "group", relations_path, line);
    r.association = required_string(obj, "association", relations_path, line);
    r.stereotype = required_string(obj, "stereotype", relations_path, line);
    if (auto it = obj.find("source_sentence"); it != obj.end() && !it->is_null()) {
      if (!it->is_string()) malformed(relations_path, line, "source_sentence", "expected a string");
      r.source_sentence = it->get<std::string>();
    }
    relations.push_back(std::move(r));
  });

  std::vector<BiasPrompt> prompts;
  for_each_record(prompts_path, [&](const nlohmann::json& obj, std::size_t line) {
    BiasPrompt p;
    p.relation_id = required_string(obj, "relation_id", prompts_path, line);
    p.text = required_string(obj, "text", prompts_path, line);
    const auto masks = count_mask_tokens(p.text);
    if (masks != 1) {
      malformed(prompts_path, line, "text",
                "contains [MASK] " + std::to_string(masks) + " times, expected exactly once");
    }
    p.answer = required_string(obj, "answer", prompts_path, line);
    prompts.push_back(std::move(p));
  });

  return RelationDataset(std::move(relations), std::move(prompts), strict, prompts_per_relation);
}

void save_dataset(const RelationDataset& dataset, const std::filesystem::path& relations_path,
                  const std::filesystem::path& prompts_path) {
  std::ofstream rel(relations_path, std::ios::binary);
  if (!rel) throw Error(ErrorCode::Io, "cannot write " + relations_path.string());
  for (const auto& r : dataset.relations()) {
    nlohmann::ordered_json obj;
    obj["id"] = r.id;
    obj["category"] = category_code(r.category);
    obj["group"] = r.group;
    obj["association"] = r.association;
    obj["stereotype"] = r.stereotype;
    if (r.source_sentence) obj["source_sentence"] = *r.source_sentence;
    rel << obj.dump() << '\n';
  }
  std::ofstream pr(prompts_path, std::ios::binary);
  if (!pr) throw Error(ErrorCode::Io, "cannot write " + prompts_path.string());
  for (const auto& p : dataset.prompts()) {
    nlohmann::ordered_json obj;
    obj["relation_id"] = p.relation_id;
    obj["text"] = p.text;
    obj["answer"] = p.answer;
    pr << obj.dump() << '\n';
  }
  if (!rel || !pr) throw Error(ErrorCode::Io, "write failed");
}

std::vector<CategorySummary> summarize(const RelationDataset& dataset) {
  struct Acc {
    std::size_t relations = 0;
    std::size_t prompts = 0;
    std::set<std::string> groups;
    std::set<std::string> stereotypes;
  };
  std::map<int, Acc> by_category;
  for (const auto& r : dataset.relations()) {
    auto& acc = by_category[static_cast<int>(r.category)];
    ++acc.relations;
    acc.prompts += dataset.prompt_indices(r.id).size();
    acc.groups.insert(normalize(r.group));
    acc.stereotypes.insert(normalize(r.stereotype));
  }
  std::vector<CategorySummary> rows;
  CategorySummary total{"Total"};
  for (const auto& [value, acc] : by_category) {
    const auto c = static_cast<BiasCategory>(value);
    CategorySummary row{category_code(c) + "(" + category_label(c) + ")", acc.relations,
                        acc.prompts, acc.groups.size(), acc.stereotypes.size()};
    total.relations += row.relations;
    total.prompts += row.prompts;
    total.groups += row.groups;
    total.stereotypes += row.stereotypes;
    rows.push_back(std::move(row));
  }
  rows.push_back(total);
  return rows;
}

std::string summary_csv(const std::vector<CategorySummary>& rows) {
  std::ostringstream out;
  out << "category,relations,prompts,groups,stereotypes\n";
  for (const auto& r : rows) {
    out << r.label << ',' << r.relations << ',' << r.prompts << ',' << r.groups << ','
        << r.stereotypes << '\n';
  }
  return out.str();
}

ControlSample control_prompts(const RelationDataset& dataset, const BiasedRelation& target,
                              std::size_t n, std::uint64_t seed) {
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "control sample size must be positive");
  std::vector<std::size_t> pool;
  const auto& prompts = dataset.prompts();
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    if (dataset.relation(prompts[i].relation_id).category != target.category) pool.push_back(i);
  }
  if (pool.empty()) {
    throw Error(ErrorCode::NoControlAvailable,
                "no prompt outside category " + category_code(target.category) +
                    " is available as a control for relation '" + target.id + "'");
  }
  ControlSample sample;
  if (n >= pool.size()) {
    sample.shortfall = n > pool.size();
    sample.prompt_indices = std::move(pool);
    return sample;
  }
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
  }
  pool.resize(n);
  sample.prompt_indices = std::move(pool);
  return sample;
}

}  // namespace bt
