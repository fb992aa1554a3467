#include <gtest/gtest.h>

#include "biastracer/downstream.hpp"
#include "biastracer/error.hpp"
#include "biastracer/synth.hpp"
#include "biastracer/tasks.hpp"
#include "support.hpp"

namespace bt {
namespace {

double metric(const std::vector<std::pair<std::string, double>>& entries, const std::string& name) {
  for (const auto& [k, v] : entries) {
    if (k == name) return v;
  }
  ADD_FAILURE() << "no metric " << name;
  return 0.0;
}

TEST(Metrics, HandComputedBinaryExample) {
  // gold [1,1,0,0], pred [1,0,0,0]: class 1 P=1 R=1/2 F1=2/3; class 0 P=2/3 R=1 F1=0.8
  const std::vector<int> pred{1, 0, 0, 0}, gold{1, 1, 0, 0};
  const auto m = classification_metrics(pred, gold, 2);
  EXPECT_DOUBLE_EQ(m.accuracy, 0.75);
  ASSERT_TRUE(m.macro_f1.has_value());
  EXPECT_NEAR(*m.macro_f1, (0.8 + 2.0 / 3.0) / 2.0, 1e-15);
  EXPECT_NEAR(*m.macro_f1, 0.733, 5e-4);
  EXPECT_FALSE(m.perplexity.has_value());
}

TEST(Metrics, PerfectAndConstantPredictions) {
  const std::vector<int> gold{0, 1, 2, 1, 0};
  const auto perfect = classification_metrics(gold, gold, 3);
  EXPECT_EQ(perfect.accuracy, 1.0);
  EXPECT_EQ(*perfect.macro_f1, 1.0);
  const std::vector<int> balanced{0, 1, 0, 1}, ones{1, 1, 1, 1};
  EXPECT_EQ(classification_metrics(ones, balanced, 2).accuracy, 0.5);
}

TEST(Metrics, RejectsBadInput) {
  const std::vector<int> a{0, 1}, b{0}, bad{0, 5};
  EXPECT_TRUE(support::throws_code([&] { classification_metrics(a, b, 2); }, ErrorCode::LengthMismatch));
  EXPECT_TRUE(support::throws_code([&] { classification_metrics({}, {}, 2); }, ErrorCode::EmptyInput));
  EXPECT_TRUE(support::throws_code([&] { classification_metrics(bad, a, 2); }, ErrorCode::InvalidArgument));
}

TEST(Delta, SignConventionAndRelative) {
  const auto d = make_delta(0.80, 0.74);
  EXPECT_NEAR(d.absolute, -0.06, 1e-12);
  ASSERT_TRUE(d.relative_pct.has_value());
  EXPECT_NEAR(*d.relative_pct, -7.5, 1e-9);
  EXPECT_FALSE(make_delta(0.0, 0.3).relative_pct.has_value());
}

TEST(Conditions, CategoryUnionsAndPerRelation) {
  std::vector<NeuronSet> sets(3);
  sets[0] = {"r1", "BR03", {{0, 1}, {1, 2}}, {}, 0, 0, 0};
  sets[1] = {"r2", "BR01", {{0, 0}}, {}, 0, 0, 0};
  sets[2] = {"r3", "BR03", {{1, 2}, {1, 4}}, {}, 0, 0, 0};
  const auto by_cat = suppression_conditions(sets, false);
  ASSERT_EQ(by_cat.size(), 2u);
  EXPECT_EQ(by_cat[0].label, "BR01");
  EXPECT_EQ(by_cat[1].label, "BR03");
  EXPECT_EQ(by_cat[1].neurons, (std::vector<NeuronId>{{0, 1}, {1, 2}, {1, 4}}));
  const auto per = suppression_conditions(sets, true);
  ASSERT_EQ(per.size(), 3u);
  EXPECT_EQ(per[2].label, "r3");
}

EvalRecord record(const std::string& task, EncoderVariant v, const std::string& cond, double acc_delta) {
  EvalRecord r;
  r.task_id = task;
  r.variant = v;
  r.condition = cond;
  r.metrics.accuracy = 0.5 + acc_delta;
  r.deltas.emplace_back("accuracy", make_delta(0.5, 0.5 + acc_delta));
  return r;
}

TEST(Rq3Aggregate, MeanAndWorst) {
  const std::vector<EvalRecord> records{record("SN", EncoderVariant::Raw, "BR01", -0.1),
                                        record("SN", EncoderVariant::Raw, "BR02", -0.2)};
  const auto s = aggregate_rq3(records);
  ASSERT_EQ(s.per_task.size(), 1u);
  const auto& cell = s.per_task[0].cells[0];
  EXPECT_EQ(cell.metric, "accuracy");
  EXPECT_NEAR(cell.mean_absolute, -0.15, 1e-12);
  EXPECT_NEAR(cell.worst_absolute, -0.2, 1e-12);
  EXPECT_EQ(cell.records, 2u);

  const std::vector<EvalRecord> single{record("IN", EncoderVariant::FineTuned, "BR04", -0.25)};
  const auto one = aggregate_rq3(single);
  EXPECT_EQ(one.per_task[0].cells[0].mean_absolute, -0.25);
  EXPECT_EQ(one.per_condition[0].cells[0].mean_absolute, -0.25);
  EXPECT_EQ(one.per_variant[0].cells[0].worst_absolute, -0.25);
}

TEST(Rq3Aggregate, PermutationInvariant) {
  Rng rng(12);
  const std::vector<std::string> tasks{"IN", "TB", "RT", "SN"};
  std::vector<EvalRecord> records;
  for (int i = 0; i < 80; ++i) {
    // eighths keep every partial sum exact, so any summation order agrees bit for bit
    const double delta = -static_cast<double>(rng.below(8)) / 8.0 * 0.25;
    records.push_back(record(tasks[rng.below(4)], rng.below(2) ? EncoderVariant::Raw : EncoderVariant::FineTuned,
                             "BR0" + std::to_string(1 + rng.below(9)), delta));
  }
  const auto a = aggregate_rq3(records);
  for (int round = 0; round < 5; ++round) {
    rng.shuffle(records);
    const auto b = aggregate_rq3(records);
    ASSERT_EQ(a.per_task.size(), b.per_task.size());
    for (std::size_t i = 0; i < a.per_task.size(); ++i) {
      EXPECT_EQ(a.per_task[i].task_id, b.per_task[i].task_id);
      EXPECT_EQ(a.per_task[i].cells[0].mean_absolute, b.per_task[i].cells[0].mean_absolute);
      EXPECT_EQ(a.per_task[i].cells[0].worst_absolute, b.per_task[i].cells[0].worst_absolute);
    }
    ASSERT_EQ(a.per_condition.size(), b.per_condition.size());
    for (std::size_t i = 0; i < a.per_condition.size(); ++i) {
      EXPECT_EQ(a.per_condition[i].condition, b.per_condition[i].condition);
      EXPECT_EQ(a.per_condition[i].cells[0].mean_absolute, b.per_condition[i].cells[0].mean_absolute);
    }
    for (std::size_t i = 0; i < a.per_variant.size(); ++i) {
      EXPECT_EQ(a.per_variant[i].cells[0].mean_absolute, b.per_variant[i].cells[0].mean_absolute);
    }
  }
}

struct TaskWorld {
  SynthCorpus synth;
  Vocab vocab;
  ModelParams params;
};

TaskWorld task_world() {
  TaskWorld w;
  SynthSpec spec;
  spec.relations = 9;
  spec.paraphrases = 3;
  spec.scaffold_lines = 20;
  spec.task_train_size = 24;
  spec.task_test_size = 12;
  spec.seed = 6;
  w.synth = generate_synthetic_corpus(spec);
  w.vocab = support::vocab_for(w.synth);
  for (const auto& t : w.synth.tasks) {
    std::vector<std::string> text;
    for (const auto& ex : t.train) text.push_back(ex.text);
    for (const auto& ex : t.test) text.push_back(ex.text);
    for (const auto& tok : w.vocab.tokens()) text.push_back(tok);
    w.vocab = build_vocab(text);
  }
  ModelConfig c;
  c.n_layers = 2;
  c.d_model = 8;
  c.n_heads = 2;
  c.d_ff = 6;
  c.vocab_size = static_cast<int>(w.vocab.size());
  c.max_len = 32;
  w.params = support::random_model(c, 6, 0.3);
  return w;
}

TEST(Finetune, ZeroStepsKeepsEncoderAndScoresIt) {
  const auto w = task_world();
  for (const auto& task : w.synth.tasks) {
    HeadHyperparams h;
    h.steps = 0;
    const auto r = finetune_head(w.params, w.vocab, task, h, 1);
    EXPECT_TRUE(r.model.encoder == w.params) << task.spec.id;
    const auto again = evaluate_task(r.model, w.vocab, task);
    EXPECT_EQ(again.accuracy, r.baseline.accuracy) << task.spec.id;
  }
}

TEST(Finetune, SameSeedSameMetrics) {
  const auto w = task_world();
  const auto& task = w.synth.tasks.front();
  HeadHyperparams h;
  h.steps = 20;
  h.batch_size = 4;
  for (bool frozen : {true, false}) {
    h.freeze_encoder = frozen;
    const auto a = finetune_head(w.params, w.vocab, task, h, 7);
    const auto b = finetune_head(w.params, w.vocab, task, h, 7);
    EXPECT_EQ(a.baseline.accuracy, b.baseline.accuracy);
    EXPECT_EQ(a.baseline.macro_f1, b.baseline.macro_f1);
    EXPECT_TRUE(a.model.encoder == b.model.encoder);
    EXPECT_EQ(frozen, a.model.encoder == w.params);
  }
}

TEST(SuppressionEval, EmptySetGivesZeroDeltas) {
  const auto w = task_world();
  for (const auto& task : w.synth.tasks) {
    HeadHyperparams h;
    h.steps = 10;
    h.batch_size = 4;
    h.freeze_encoder = true;
    const auto model = finetune_head(w.params, w.vocab, task, h, 3).model;
    const auto ev = eval_under_suppression(model, w.vocab, task, EncoderVariant::Raw, {{"BR01", {}}, {"BR02", {{1, 2}}}});
    ASSERT_EQ(ev.records.size(), 3u);
    EXPECT_EQ(ev.records[0].condition, "baseline");
    EXPECT_TRUE(ev.records[0].deltas.empty());
    for (const auto& [name, d] : ev.records[1].deltas) {
      EXPECT_EQ(d.absolute, 0.0) << task.spec.id << " " << name;
    }
    EXPECT_EQ(ev.records[2].n_suppressed, 1u);
    EXPECT_EQ(metric(ev.records[0].metrics.entries(), "accuracy"), ev.records[0].metrics.accuracy);
  }
}

TEST(Tasks, SaveLoadRoundTrip) {
  const auto w = task_world();
  support::TempDir dir("tasks");
  save_tasks(w.synth.tasks, dir.path());
  const auto back = load_tasks(dir.path());
  ASSERT_EQ(back.size(), w.synth.tasks.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].spec.id, w.synth.tasks[i].spec.id);
    EXPECT_EQ(back[i].spec.kind, w.synth.tasks[i].spec.kind);
    ASSERT_EQ(back[i].test.size(), w.synth.tasks[i].test.size());
    EXPECT_EQ(back[i].test[0].text, w.synth.tasks[i].test[0].text);
    EXPECT_EQ(back[i].test[0].label, w.synth.tasks[i].test[0].label);
    EXPECT_EQ(back[i].test[0].answer, w.synth.tasks[i].test[0].answer);
  }
}

}  // namespace
}  // namespace bt
