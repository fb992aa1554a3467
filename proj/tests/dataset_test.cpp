#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <set>

#include "biastracer/error.hpp"
#include "biastracer/relation_store.hpp"
#include "biastracer/synth.hpp"
#include "biastracer/vocab.hpp"
#include "published_shape.hpp"
#include "support.hpp"

namespace bt {
namespace {

namespace fs = std::filesystem;

BiasedRelation relation(std::string id, BiasCategory cat, std::string group, std::string stereotype = "lazy") {
  return {std::move(id), cat, std::move(group), "are", std::move(stereotype), std::nullopt};
}

std::vector<BiasPrompt> ten_prompts(const std::string& id, const std::string& answer) {
  std::vector<BiasPrompt> out;
  for (int k = 0; k < 10; ++k) out.push_back({id, "form" + std::to_string(k) + " [MASK] are lazy", answer});
  return out;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

TEST(Dataset, EmptyFilesLoadLeniently) {
  support::TempDir dir("empty");
  write(dir / "r.jsonl", "");
  write(dir / "p.jsonl", "");
  const auto ds = load_dataset(dir / "r.jsonl", dir / "p.jsonl", false);
  EXPECT_TRUE(ds.relations().empty());
  EXPECT_TRUE(ds.prompts().empty());
}

TEST(Dataset, RejectsTwoMasks) {
  support::TempDir dir("twomask");
  write(dir / "r.jsonl", R"({"id":"r1","category":"BR01","group":"old","association":"are","stereotype":"slow"})" "\n");
  write(dir / "p.jsonl", R"({"relation_id":"r1","text":"[MASK] and [MASK] are slow","answer":"old"})" "\n");
  EXPECT_TRUE(support::throws_code([&] { load_dataset(dir / "r.jsonl", dir / "p.jsonl", false); },
                                   ErrorCode::MalformedRecord));
}

TEST(Dataset, MalformedLineNamesFileAndLine) {
  support::TempDir dir("badline");
  write(dir / "r.jsonl", R"({"id":"r1","category":"BR01","group":"old","association":"are","stereotype":"slow"})"
                         "\n{\"id\":\"r2\",\"category\":\"BR10\"}\n");
  write(dir / "p.jsonl", "");
  try {
    load_dataset(dir / "r.jsonl", dir / "p.jsonl", false);
    FAIL() << "expected MalformedRecord";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MalformedRecord);
    EXPECT_NE(std::string(e.what()).find("r.jsonl:2"), std::string::npos) << e.what();
  }
}

TEST(Dataset, ValidatesInvariants) {
  using support::throws_code;
  EXPECT_TRUE(throws_code(
      [] { RelationDataset({relation("a", BiasCategory::Age, "old"), relation("a", BiasCategory::Age, "young")}, {}, false); },
      ErrorCode::DuplicateRelationId));
  EXPECT_TRUE(throws_code([] { RelationDataset({relation("a", BiasCategory::Age, "old")}, ten_prompts("b", "old"), false); },
                          ErrorCode::DanglingPromptRelation));
  auto nine = ten_prompts("a", "old");
  nine.pop_back();
  EXPECT_TRUE(throws_code([&] { RelationDataset({relation("a", BiasCategory::Age, "old")}, nine, true); },
                          ErrorCode::PromptCountViolation));
  EXPECT_NO_THROW(RelationDataset({relation("a", BiasCategory::Age, "old")}, nine, false));
}

TEST(Dataset, SaveLoadRoundTrip) {
  support::TempDir dir("roundtrip");
  auto r = relation("r1", BiasCategory::Religion, "monks", "quiet");
  r.source_sentence = "monks are quiet";
  const RelationDataset ds({r, relation("r2", BiasCategory::Gender, "men")},
                           [] {
                             auto p = ten_prompts("r1", "monks");
                             auto q = ten_prompts("r2", "men");
                             p.insert(p.end(), q.begin(), q.end());
                             return p;
                           }(),
                           true);
  save_dataset(ds, dir / "r.jsonl", dir / "p.jsonl");
  const auto back = load_dataset(dir / "r.jsonl", dir / "p.jsonl", true);
  EXPECT_EQ(back.relations(), ds.relations());
  EXPECT_EQ(back.prompts(), ds.prompts());
  EXPECT_EQ(back.prompt_id(12), "r2#2");
}

TEST(Summary, SingletonAndSharedGroups) {
  const RelationDataset one({relation("a", BiasCategory::Age, "old")}, ten_prompts("a", "old"), true);
  const auto rows = summarize(one);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].label, "BR01(Age)");
  EXPECT_EQ(rows[0].relations, 1u);
  EXPECT_EQ(rows[0].prompts, 10u);
  EXPECT_EQ(rows[0].groups, 1u);
  EXPECT_EQ(rows[0].stereotypes, 1u);

  auto prompts = ten_prompts("a", "old");
  const auto more = ten_prompts("b", "old");
  prompts.insert(prompts.end(), more.begin(), more.end());
  const RelationDataset shared({relation("a", BiasCategory::Age, "old", "slow"), relation("b", BiasCategory::Age, "old", "frail")},
                               prompts, true);
  const auto s = summarize(shared);
  EXPECT_EQ(s[0].relations, 2u);
  EXPECT_EQ(s[0].groups, 1u);
  EXPECT_EQ(s[0].stereotypes, 2u);
  EXPECT_EQ(s.back().label, "Total");
}

TEST(Summary, PublishedShapeFixtureReproducesCounts) {
  const support::PublishedCounts want;
  const auto ds = support::published_shape_dataset();
  const auto rows = summarize(ds);
  ASSERT_EQ(rows.size(), 10u);
  for (std::size_t c = 0; c < 9; ++c) {
    EXPECT_EQ(rows[c].relations, want.relations[c]) << rows[c].label;
    EXPECT_EQ(rows[c].prompts, 10 * want.relations[c]) << rows[c].label;
    EXPECT_EQ(rows[c].groups, want.groups[c]) << rows[c].label;
    EXPECT_EQ(rows[c].stereotypes, want.stereotypes[c]) << rows[c].label;
  }
  EXPECT_EQ(rows[9].relations, want.total_relations);
  EXPECT_EQ(rows[9].prompts, want.total_prompts);
  EXPECT_EQ(rows[9].groups, want.total_groups);
  EXPECT_EQ(rows[9].stereotypes, want.total_stereotypes);
}

// Set BIAS_TRACER_DATASET_DIR to a directory holding the released
// relations.jsonl and prompts.jsonl to run this check.
TEST(Summary, ReleasedDatasetTotals) {
  const char* dir = std::getenv("BIAS_TRACER_DATASET_DIR");
  if (!dir) GTEST_SKIP() << "BIAS_TRACER_DATASET_DIR not set";
  const fs::path d(dir);
  const auto ds = load_dataset(d / "relations.jsonl", d / "prompts.jsonl", true);
  const auto rows = summarize(ds);
  const support::PublishedCounts want;
  EXPECT_EQ(rows.back().relations, want.total_relations);
  EXPECT_EQ(rows.back().prompts, want.total_prompts);
  EXPECT_EQ(rows.front().relations, want.relations[0]);
  EXPECT_EQ(rows.front().groups, want.groups[0]);
}

RelationDataset two_category_dataset() {
  std::vector<BiasedRelation> rels{relation("age1", BiasCategory::Age, "old"),
                                   relation("gen1", BiasCategory::Gender, "men"),
                                   relation("gen2", BiasCategory::Gender, "women")};
  std::vector<BiasPrompt> prompts;
  for (const auto& r : rels) {
    const auto p = ten_prompts(r.id, r.group);
    prompts.insert(prompts.end(), p.begin(), p.end());
  }
  return RelationDataset(rels, prompts, true);
}

TEST(Controls, DrawOnlyFromOtherCategories) {
  const auto ds = two_category_dataset();
  const auto sample = control_prompts(ds, ds.relation("age1"), 5, 3);
  ASSERT_EQ(sample.prompt_indices.size(), 5u);
  EXPECT_FALSE(sample.shortfall);
  for (auto i : sample.prompt_indices) {
    EXPECT_EQ(ds.relation(ds.prompts()[i].relation_id).category, BiasCategory::Gender);
  }
  EXPECT_EQ(control_prompts(ds, ds.relation("age1"), 5, 3).prompt_indices, sample.prompt_indices);
}

TEST(Controls, ShortfallReturnsWholePool) {
  const auto ds = two_category_dataset();
  const auto sample = control_prompts(ds, ds.relation("gen1"), 50, 1);
  EXPECT_TRUE(sample.shortfall);
  EXPECT_EQ(sample.prompt_indices.size(), 10u);
  const RelationDataset lone({relation("a", BiasCategory::Age, "old")}, ten_prompts("a", "old"), true);
  EXPECT_TRUE(support::throws_code([&] { control_prompts(lone, lone.relation("a"), 3, 1); }, ErrorCode::NoControlAvailable));
}

TEST(Synth, SingleRelationIsStrictlyValid) {
  SynthSpec spec;
  spec.relations = 1;
  spec.paraphrases = 10;
  spec.scaffold_lines = 20;
  spec.task_train_size = 0;
  const auto out = generate_synthetic_corpus(spec);
  EXPECT_EQ(out.dataset.relations().size(), 1u);
  EXPECT_EQ(out.dataset.prompts().size(), 10u);
  EXPECT_NO_THROW(RelationDataset(out.dataset.relations(), out.dataset.prompts(), true));
}

TEST(Synth, AnswersAreSingleVocabularyTokensAndNotLeaked) {
  SynthSpec spec;
  spec.relations = 12;
  spec.scaffold_lines = 60;
  spec.task_train_size = 20;
  spec.task_test_size = 10;
  const auto out = generate_synthetic_corpus(spec);
  const Vocab vocab = support::vocab_for(out);
  for (const auto& p : out.dataset.prompts()) {
    EXPECT_EQ(split_whitespace(p.answer).size(), 1u);
    EXPECT_TRUE(vocab.find(p.answer).has_value()) << p.answer;
  }
  // no corpus line states a relation
  for (const auto& r : out.dataset.relations()) {
    for (const auto& line : out.corpus) {
      const auto words = split_whitespace(line);
      const bool all = std::find(words.begin(), words.end(), r.group) != words.end() &&
                       std::find(words.begin(), words.end(), r.association) != words.end() &&
                       std::find(words.begin(), words.end(), r.stereotype) != words.end();
      EXPECT_FALSE(all) << line;
    }
  }
  EXPECT_EQ(out.tasks.size(), 5u);
}

TEST(Synth, SeedChangesGroupAssignment) {
  SynthSpec a;
  a.relations = 18;
  a.task_train_size = 0;
  a.scaffold_lines = 10;
  a.seed = 1;
  SynthSpec b = a;
  b.seed = 2;
  auto groups = [](const SynthCorpus& s) {
    std::vector<std::string> g;
    for (const auto& r : s.dataset.relations()) g.push_back(r.group);
    return g;
  };
  EXPECT_NE(groups(generate_synthetic_corpus(a)), groups(generate_synthetic_corpus(b)));
  EXPECT_EQ(groups(generate_synthetic_corpus(a)), groups(generate_synthetic_corpus(a)));
}

TEST(Synth, TooManyParaphrasesFails) {
  SynthSpec spec;
  spec.relations = 2;
  spec.paraphrases = max_paraphrases() + 1;
  EXPECT_TRUE(support::throws_code([&] { generate_synthetic_corpus(spec); }, ErrorCode::VocabTooSmall));
}

}  // namespace
}  // namespace bt
