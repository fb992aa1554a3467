#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "biastracer/encoder.hpp"
#include "biastracer/selection.hpp"
#include "biastracer/tasks.hpp"
#include "biastracer/vocab.hpp"

namespace bt {

enum class EncoderVariant { Raw, FineTuned };

std::string encoder_variant_name(EncoderVariant v);  // "raw", "finetuned"

struct HeadHyperparams {
  int steps = 400;
  int batch_size = 16;
  double head_learning_rate = 1e-2;
  double encoder_learning_rate = 1e-3;  // used when the encoder is not frozen
  bool freeze_encoder = false;
};

// Encoder plus task head. Classification heads are a linear layer over the
// mean-pooled final hidden states; MaskedLM tasks use the encoder's own MLM head.
struct TaskModel {
  TaskSpec spec;
  ModelParams encoder;
  Matrix head_weight;  // [n_classes x d_model]; empty for MaskedLM
  Vector head_bias;
};

// Metric set is fixed by task kind: classification gets accuracy and
// macro_f1, MaskedLM gets accuracy and perplexity.
struct TaskMetrics {
  double accuracy = 0.0;
  std::optional<double> macro_f1;
  std::optional<double> perplexity;

  // (name, value) in a fixed order: accuracy, macro_f1, perplexity.
  std::vector<std::pair<std::string, double>> entries() const;
};

// Exact-match accuracy and macro-F1. Classes absent from both predictions and
// gold are left out of the macro mean. Throws LengthMismatch, EmptyInput,
// InvalidArgument (label out of range).
TaskMetrics classification_metrics(std::span<const int> predictions, std::span<const int> gold,
                                   int n_classes);

struct FinetuneResult {
  TaskModel model;
  TaskMetrics baseline;  // test metrics without suppression
  double final_loss = 0.0;
};

// Deterministic given seed. With freeze_encoder the encoder is left untouched
// and only the head is trained; otherwise every parameter is trained. For a
// MaskedLM task the unfrozen variant continues MLM training on the train
// cloze examples and the frozen variant is the encoder as given.
FinetuneResult finetune_head(const ModelParams& base, const Vocab& vocab, const TaskData& task,
                             const HeadHyperparams& hyper, std::uint64_t seed);

TaskMetrics evaluate_task(const TaskModel& model, const Vocab& vocab, const TaskData& task,
                          const NeuronOverride& overrides = NeuronOverride{});

struct Delta {
  double absolute = 0.0;
  std::optional<double> relative_pct;  // absent when the base value is 0
};

Delta make_delta(double base, double post);

struct SuppressionCondition {
  std::string label;  // BRxx or a relation id
  std::vector<NeuronId> neurons;
};

// One condition per category present in sets (union of its relation sets), in
// BR order, or one per relation when per_relation is set.
std::vector<SuppressionCondition> suppression_conditions(const std::vector<NeuronSet>& sets,
                                                         bool per_relation);

struct EvalRecord {
  std::string task_id;
  EncoderVariant variant = EncoderVariant::Raw;
  std::string condition;  // "baseline" or the condition label
  std::size_t n_suppressed = 0;
  TaskMetrics metrics;
  std::vector<std::pair<std::string, Delta>> deltas;  // empty for the baseline record
};

struct TaskEvaluation {
  std::string task_id;
  EncoderVariant variant = EncoderVariant::Raw;
  std::vector<EvalRecord> records;  // baseline first
  // Per metric over the suppressed records: mean absolute delta and the worst
  // one (lowest for accuracy/F1, highest for perplexity).
  std::vector<std::pair<std::string, double>> mean_delta;
  std::vector<std::pair<std::string, double>> worst_delta;
};

// Suppression is applied at every sequence position.
TaskEvaluation eval_under_suppression(const TaskModel& model, const Vocab& vocab,
                                      const TaskData& task, EncoderVariant variant,
                                      const std::vector<SuppressionCondition>& conditions);

struct Rq3Cell {
  std::string metric;
  double mean_absolute = 0.0;
  std::optional<double> mean_relative_pct;  // over records where it is defined
  double worst_absolute = 0.0;
  std::size_t records = 0;
};

struct Rq3Summary {
  // (task, variant) -> cells
  struct TaskRow {
    std::string task_id;
    EncoderVariant variant;
    std::vector<Rq3Cell> cells;
  };
  // (condition, variant) -> cells averaged across tasks
  struct ConditionRow {
    std::string condition;
    EncoderVariant variant;
    std::vector<Rq3Cell> cells;
  };
  // variant -> cells averaged across every suppressed record
  struct VariantRow {
    EncoderVariant variant;
    std::vector<Rq3Cell> cells;
  };
  std::vector<TaskRow> per_task;
  std::vector<ConditionRow> per_condition;
  std::vector<VariantRow> per_variant;
};

// Rows are sorted by key, so the result does not depend on record order.
Rq3Summary aggregate_rq3(std::span<const EvalRecord> records);

}  // namespace bt
