#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "biastracer/artifacts.hpp"
#include "biastracer/attribution.hpp"
#include "biastracer/checkpoint.hpp"
#include "biastracer/config_file.hpp"
#include "biastracer/downstream.hpp"
#include "biastracer/intervention.hpp"
#include "biastracer/selection.hpp"
#include "biastracer/synth.hpp"
#include "biastracer/trainer.hpp"

namespace bt {

// Every command reads its options from one ConfigFile. Keys:
//
//   seed                          u64, default 1
//   path.relations path.prompts   dataset files
//   path.ckpt path.corpus path.tasks path.attr path.sets path.erasure
//   path.stats path.dataset path.rq2 path.rq3 path.paper_ref path.bake
//   path.rq1                      comma-separated sets files
//   path.out / path.out_dir       primary output file / directory
//   data.lenient data.prompts_per_relation
//   corpus.relations corpus.paraphrases corpus.groups corpus.scaffold_lines
//   corpus.task_train corpus.task_test
//   model.n_layers model.d_model model.n_heads model.d_ff model.max_len
//   train.steps train.memorization_steps train.batch_size train.learning_rate
//   train.memorization_learning_rate train.memorization_share train.ffn_only
//   attribution.method attribution.steps attribution.write_threshold attribution.write_top
//   selection.mode selection.t selection.k selection.share selection.adaptive
//   erasure.ctrl_n erasure.pool_controls erasure.amplify
//   tasks.variants tasks.per_relation tasks.head_steps tasks.batch_size
//   tasks.head_lr tasks.encoder_lr
//
// Keys under "path." never enter config hashes, so moving files around does
// not change artifacts.

struct StageResult {
  std::string text;  // what the command prints
  std::vector<std::filesystem::path> outputs;
};

ModelConfig model_config_from(const ConfigFile& cfg);
TrainHyperparams train_hyperparams_from(const ConfigFile& cfg);
SynthSpec synth_spec_from(const ConfigFile& cfg);
AttributionConfig attribution_config_from(const ConfigFile& cfg);
SelectionConfig selection_config_from(const ConfigFile& cfg);
ErasureConfig erasure_config_from(const ConfigFile& cfg);
HeadHyperparams head_hyperparams_from(const ConfigFile& cfg);

// Hash of the non-path entries under the given prefixes plus "seed".
std::string section_hash(const ConfigFile& cfg, const std::vector<std::string>& prefixes);

// Loads a config file, resolving relative path.* values against its directory.
ConfigFile load_run_config(const std::filesystem::path& path);

StageResult cmd_dataset_validate(const ConfigFile& cfg);
StageResult cmd_dataset_summary(const ConfigFile& cfg);
StageResult cmd_corpus_synth(const ConfigFile& cfg);
StageResult cmd_train_toy(const ConfigFile& cfg);
StageResult cmd_trace(const ConfigFile& cfg);
StageResult cmd_select(const ConfigFile& cfg);
StageResult cmd_erase(const ConfigFile& cfg);  // erasure.amplify > 0 switches to amplification
StageResult cmd_stats(const ConfigFile& cfg);
StageResult cmd_eval_tasks(const ConfigFile& cfg);
StageResult cmd_report(const ConfigFile& cfg);

// In-memory pieces of the commands, shared with the pipeline and tests.
std::vector<PromptAttribution> trace_dataset(const ModelParams& params, const Vocab& vocab,
                                             const RelationDataset& dataset, const AttributionConfig& acfg,
                                             double write_threshold, int write_top);
// Relations in order of first appearance. Throws InvalidArgument when the
// stored attribution cannot reproduce the selection exactly.
std::vector<NeuronSet> select_sets(const std::vector<PromptAttribution>& prompts, const SelectionConfig& scfg);
Rq2Stats compute_rq2_stats(const Rq2Report& report, const std::vector<NeuronSet>* sets);
std::vector<EvalRecord> run_eval_tasks(const ModelParams& params, const Vocab& vocab,
                                       const std::vector<TaskData>& tasks, const std::vector<NeuronSet>& sets,
                                       const std::vector<EncoderVariant>& variants, bool per_relation,
                                       const HeadHyperparams& hyper, std::uint64_t seed);

std::string sets_csv(const SetsFile& file);
std::string attr_csv(const ArtifactMeta& meta, const std::vector<PromptAttribution>& prompts);
// Category means in the Table 3 column order.
std::string erasure_summary_csv(const ErasureFile& file);

// The value of a path.* key, checked to name an existing file (or directory).
// Throws InvalidArgument naming the key otherwise.
std::filesystem::path require_input(const ConfigFile& cfg, const std::string& key, bool directory = false);

// The path next to out with its extension replaced (erasure.jsonl -> erasure.csv).
std::filesystem::path sibling(const std::filesystem::path& out, const std::string& extension);

}  // namespace bt
