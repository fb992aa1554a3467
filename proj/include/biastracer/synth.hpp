#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "biastracer/relation_store.hpp"
#include "biastracer/tasks.hpp"
#include "biastracer/trainer.hpp"

namespace bt {

struct SynthSpec {
  int relations = 30;
  int paraphrases = 10;
  int groups_per_category = 2;
  int associations = 6;
  int stereotypes = 15;
  // Template sentences with random, unrelated group/association/stereotype
  // fills. They teach sentence structure without leaking any relation.
  int scaffold_lines = 300;
  int task_train_size = 160;  // per task; 0 disables task generation
  int task_test_size = 80;
  std::uint64_t seed = 0;
};

struct SynthCorpus {
  std::vector<std::string> corpus;  // MLM text lines (scaffold + task training text); no relation is leaked
  RelationDataset dataset;          // strict: exactly `paraphrases` prompts per relation
  std::vector<TaskData> tasks;      // IN, TB, RT, SN (classification) and RC (masked LM)
};

// Maximum number of distinct cloze templates the generator can render.
int max_paraphrases();

// Single-token groups, associations and stereotypes. Relation i belongs to
// category BR0((i mod 9) + 1); its group is drawn from that category's pool and
// its (association, stereotype) pair is unique. Throws VocabTooSmall when the
// requested counts cannot be realized with distinct tokens or templates.
SynthCorpus generate_synthetic_corpus(const SynthSpec& spec);

// Memorization examples for train_mlm, one per prompt.
std::vector<ClozeExample> cloze_examples(const RelationDataset& dataset);

}  // namespace bt
