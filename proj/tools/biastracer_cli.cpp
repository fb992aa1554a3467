// Command-line front end. Every subcommand turns its flags into option keys
// and hands them to bt_run_command; nothing here touches the C++ core.

#include <cstdio>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "biastracer/biastracer.h"

namespace {

struct Flag {
  const char* name;  // "--ctrl-n"
  const char* key;   // "erasure.ctrl_n"
  const char* help;
  enum Kind { Value, Switch, List } kind = Value;
};

struct Command {
  std::string name;  // bt_run_command name
  std::vector<std::pair<CLI::Option*, const Flag*>> bound;
  std::map<std::string, std::string> values;
  std::map<std::string, std::vector<std::string>> lists;
  std::map<std::string, bool> switches;
  std::string config;
};

// Storage must outlive parsing, so commands live in a list that never reallocates.
std::vector<std::unique_ptr<Command>> g_commands;
Command* g_selected = nullptr;

const Flag kSeed{"--seed", "seed", "random seed recorded in every artifact"};
const Flag kRelationsPath{"--relations", "path.relations", "relations file (one JSON object per line)"};
const Flag kPromptsPath{"--prompts", "path.prompts", "prompts file (one JSON object per line)"};
const Flag kLenient{"--lenient", "data.lenient", "accept relations with other than ten prompts", Flag::Switch};
const Flag kPromptsPerRelation{"--prompts-per-relation", "data.prompts_per_relation",
                               "prompts each relation must have in strict mode"};
const Flag kCkpt{"--ckpt", "path.ckpt", "model checkpoint"};

CLI::App* add_command(CLI::App& parent, const std::string& sub, const std::string& description,
                      const std::string& command, const std::vector<const Flag*>& flags, bool with_config = true) {
  auto* app = parent.add_subcommand(sub, description);
  g_commands.push_back(std::make_unique<Command>());
  Command* cmd = g_commands.back().get();
  cmd->name = command;
  if (with_config) {
    app->add_option("--config", cmd->config, "key = value file applied before the flags");
  }
  for (const Flag* f : flags) {
    CLI::Option* opt = nullptr;
    switch (f->kind) {
      case Flag::Value:
        opt = app->add_option(f->name, cmd->values[f->key], f->help);
        break;
      case Flag::Switch: {
        const std::string spec = std::string(f->name) + ",!--no-" + std::string(f->name).substr(2);
        opt = app->add_flag(spec, cmd->switches[f->key], f->help);
        break;
      }
      case Flag::List:
        opt = app->add_option(f->name, cmd->lists[f->key], f->help);
        break;
    }
    cmd->bound.emplace_back(opt, f);
  }
  app->callback([cmd] { g_selected = cmd; });
  return app;
}

int report_failure(bt_status status) {
  std::fprintf(stderr, "error: %s: %s\n", bt_status_name(status), bt_last_error());
  return static_cast<int>(status);
}

int run(const Command& cmd) {
  bt_options* opts = nullptr;
  if (bt_options_new(&opts) != BT_OK) return report_failure(BT_ERR_INTERNAL);
  std::unique_ptr<bt_options, void (*)(bt_options*)> guard(opts, bt_options_free);
  if (!cmd.config.empty()) {
    if (const auto s = bt_options_load(opts, cmd.config.c_str()); s != BT_OK) return report_failure(s);
  }
  for (const auto& [opt, flag] : cmd.bound) {
    if (opt->count() == 0) continue;
    std::string value;
    switch (flag->kind) {
      case Flag::Value:
        value = cmd.values.at(flag->key);
        break;
      case Flag::Switch:
        value = cmd.switches.at(flag->key) ? "true" : "false";
        break;
      case Flag::List:
        for (const auto& item : cmd.lists.at(flag->key)) value += (value.empty() ? "" : ",") + item;
        break;
    }
    if (const auto s = bt_options_set(opts, flag->key, value.c_str()); s != BT_OK) return report_failure(s);
  }
  char* text = nullptr;
  const auto status = bt_run_command(cmd.name.c_str(), opts, &text);
  if (status != BT_OK) return report_failure(status);
  std::fputs(text, stdout);
  bt_string_free(text);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trace, suppress and evaluate bias neurons in a toy masked-language-model encoder"};
  app.set_version_flag("--version", std::string(bt_version()));
  app.require_subcommand(1);

  // dataset
  auto* dataset = app.add_subcommand("dataset", "validate or summarize a relation dataset");
  dataset->require_subcommand(1);
  static const Flag kDatasetOut{"--out", "path.out", "also write the summary as JSON (and CSV next to it)"};
  add_command(*dataset, "validate", "check every schema rule and report counts", "dataset-validate",
              {&kRelationsPath, &kPromptsPath, &kLenient, &kPromptsPerRelation, &kDatasetOut, &kSeed});
  add_command(*dataset, "summary", "per-category counts as CSV (Table 1 layout)", "dataset-summary",
              {&kRelationsPath, &kPromptsPath, &kLenient, &kPromptsPerRelation});

  // corpus
  auto* corpus = app.add_subcommand("corpus", "synthetic fixture generation");
  corpus->require_subcommand(1);
  static const Flag kNRelations{"--relations", "corpus.relations", "number of relations"};
  static const Flag kParaphrases{"--paraphrases", "corpus.paraphrases", "prompts per relation"};
  static const Flag kGroups{"--groups", "corpus.groups", "groups per category"};
  static const Flag kScaffold{"--scaffold-lines", "corpus.scaffold_lines", "generic template sentences"};
  static const Flag kTaskTrain{"--task-train", "corpus.task_train", "training examples per task (0: no tasks)"};
  static const Flag kTaskTest{"--task-test", "corpus.task_test", "test examples per task"};
  static const Flag kOutDir{"--out-dir", "path.out_dir", "output directory"};
  add_command(*corpus, "synth", "write corpus.txt, relations/prompts, tasks/, toy.cfg and pipeline.cfg",
              "corpus-synth", {&kNRelations, &kParaphrases, &kGroups, &kScaffold, &kTaskTrain, &kTaskTest, &kSeed, &kOutDir});

  // train-toy
  static const Flag kCorpus{"--corpus", "path.corpus", "MLM text, one sentence per line"};
  static const Flag kClozePrompts{"--prompts", "path.prompts", "prompts file whose cloze examples are memorized"};
  static const Flag kCkptOut{"--out", "path.out", "checkpoint to write"};
  static const Flag kLayers{"--layers", "model.n_layers", "encoder layers"};
  static const Flag kDModel{"--d-model", "model.d_model", "hidden size"};
  static const Flag kHeads{"--heads", "model.n_heads", "attention heads"};
  static const Flag kDff{"--d-ff", "model.d_ff", "FFN intermediate size"};
  static const Flag kMaxLen{"--max-len", "model.max_len", "maximum sequence length"};
  static const Flag kSteps{"--steps", "train.steps", "generic MLM steps"};
  static const Flag kMemSteps{"--memorization-steps", "train.memorization_steps", "cloze memorization steps"};
  static const Flag kBatch{"--batch-size", "train.batch_size", "batch size"};
  static const Flag kLr{"--lr", "train.learning_rate", "learning rate of the generic phase"};
  static const Flag kMemLr{"--memorization-lr", "train.memorization_learning_rate", "learning rate of the memorization phase"};
  static const Flag kFfnOnly{"--ffn-only", "train.ffn_only", "memorization phase updates FFN weights only", Flag::Switch};
  add_command(app, "train-toy", "train the toy encoder", "train-toy",
              {&kCorpus, &kClozePrompts, &kCkptOut, &kSeed, &kLayers, &kDModel, &kHeads, &kDff, &kMaxLen, &kSteps,
               &kMemSteps, &kBatch, &kLr, &kMemLr, &kFfnOnly});

  // trace
  static const Flag kMethod{"--method", "attribution.method", "ig or baseline"};
  static const Flag kIgSteps{"--steps", "attribution.steps", "Riemann steps of integrated gradients"};
  static const Flag kAttrOut{"--out", "path.out", "attr.jsonl to write (CSV next to it)"};
  static const Flag kWriteThreshold{"--write-threshold", "attribution.write_threshold",
                                    "store neurons with score >= this fraction of the prompt maximum"};
  static const Flag kWriteTop{"--write-top", "attribution.write_top", "always store this many best neurons"};
  add_command(app, "trace", "attribute every prompt to FFN neurons", "trace",
              {&kCkpt, &kRelationsPath, &kPromptsPath, &kLenient, &kMethod, &kIgSteps, &kWriteThreshold, &kWriteTop,
               &kAttrOut, &kSeed});

  // select
  static const Flag kAttr{"--attr", "path.attr", "attr.jsonl from trace"};
  static const Flag kMode{"--mode", "selection.mode", "threshold or topk"};
  static const Flag kT{"--t", "selection.t", "relative threshold"};
  static const Flag kK{"--k", "selection.k", "neurons per prompt in topk mode"};
  static const Flag kShare{"--share", "selection.share", "fraction of prompts a neuron must appear in"};
  static const Flag kAdaptive{"--adaptive", "selection.adaptive", "lower the share until the set is non-empty",
                              Flag::Switch};
  static const Flag kSetsOut{"--out", "path.out", "sets.jsonl to write (CSV next to it)"};
  add_command(app, "select", "refine per-prompt selections into per-relation neuron sets", "select",
              {&kAttr, &kMode, &kT, &kK, &kShare, &kAdaptive, &kSetsOut, &kSeed});

  // erase / amplify
  static const Flag kSets{"--sets", "path.sets", "sets.jsonl from select"};
  static const Flag kCtrlN{"--ctrl-n", "erasure.ctrl_n", "control prompts per relation"};
  static const Flag kPool{"--pool-controls", "erasure.pool_controls", "use every out-of-category prompt as control",
                          Flag::Switch};
  static const Flag kErasureOut{"--out", "path.out", "erasure.jsonl to write (CSV files next to it)"};
  static const Flag kBake{"--bake", "path.bake", "also write a checkpoint with every listed neuron's output zeroed"};
  static const Flag kAmplify{"--amplify", "erasure.amplify", "scale neurons by F instead of zeroing them"};
  static const Flag kFactor{"--factor", "erasure.amplify", "amplification factor (>= 1)"};
  add_command(app, "erase", "suppress each relation's neurons and measure perplexity ratios", "erase",
              {&kCkpt, &kSets, &kRelationsPath, &kPromptsPath, &kLenient, &kCtrlN, &kPool, &kSeed, &kAmplify, &kBake,
               &kErasureOut});
  add_command(app, "amplify", "scale each relation's neurons and measure perplexity ratios", "amplify",
              {&kCkpt, &kSets, &kRelationsPath, &kPromptsPath, &kLenient, &kCtrlN, &kPool, &kSeed, &kFactor,
               &kErasureOut});

  // stats
  static const Flag kErasure{"--erasure", "path.erasure", "erasure.jsonl from erase"};
  static const Flag kOptionalSets{"--sets", "path.sets", "sets.jsonl, needed for the inner-intersection correlation"};
  static const Flag kStatsOut{"--out", "path.out", "stats.json to write (key-value text next to it)"};
  add_command(app, "stats", "Wilcoxon, Cliff's delta and Spearman over erasure results", "stats",
              {&kErasure, &kOptionalSets, &kStatsOut, &kSeed});

  // eval-tasks
  static const Flag kTasks{"--tasks", "path.tasks", "directory with tasks.json"};
  static const Flag kRq3Out{"--out", "path.out", "rq3.jsonl to write (CSV next to it)"};
  static const Flag kPerRelation{"--per-relation", "tasks.per_relation",
                                 "one condition per relation instead of per-category unions", Flag::Switch};
  static const Flag kVariants{"--variants", "tasks.variants", "comma list of raw, finetuned"};
  static const Flag kHeadSteps{"--head-steps", "tasks.head_steps", "fine-tuning steps per task"};
  add_command(app, "eval-tasks", "fine-tune task heads and evaluate them under suppression", "eval-tasks",
              {&kCkpt, &kTasks, &kSets, &kPerRelation, &kVariants, &kHeadSteps, &kRq3Out, &kSeed});

  // report
  static const Flag kRq1{"--rq1", "path.rq1", "sets.jsonl files (IG and baseline)", Flag::List};
  static const Flag kRq2{"--rq2", "path.rq2", "erasure.jsonl"};
  static const Flag kRq3{"--rq3", "path.rq3", "rq3.jsonl"};
  static const Flag kStats{"--stats", "path.stats", "stats.json"};
  static const Flag kDatasetJson{"--dataset", "path.dataset", "dataset.json from dataset validate --out"};
  static const Flag kPaperRef{"--paper-ref", "path.paper_ref", "published reference values (paper_reference.json)"};
  static const Flag kReportOut{"--out", "path.out", "report.md to write; printed when omitted"};
  add_command(app, "report", "render a Markdown report from whichever artifacts are given", "report",
              {&kRq1, &kRq2, &kRq3, &kStats, &kDatasetJson, &kPaperRef, &kReportOut});

  // pipeline
  static const Flag kForce{"--force", "pipeline.force", "ignore cached stage outputs", Flag::Switch};
  static const Flag kPipelineTasks{"--tasks", "path.tasks", "directory with tasks.json"};
  static const Flag kPipelineOut{"--out-dir", "path.out_dir", "directory for artifacts and manifest.json"};
  add_command(app, "pipeline", "dataset, trace, select, erase, stats, eval-tasks and report in one run", "pipeline",
              {&kCkpt, &kRelationsPath, &kPromptsPath, &kPipelineTasks, &kPaperRef, &kPipelineOut, &kSeed, &kForce});

  CLI11_PARSE(app, argc, argv);
  if (!g_selected) {
    std::fputs(app.help().c_str(), stderr);
    return 2;
  }
  return run(*g_selected);
}
