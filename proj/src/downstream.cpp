#include "biastracer/downstream.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "biastracer/error.hpp"
#include "biastracer/intervention.hpp"
#include "biastracer/parallel.hpp"
#include "biastracer/relation_store.hpp"
#include "biastracer/rng.hpp"
#include "biastracer/trainer.hpp"

namespace bt {
namespace {

constexpr std::uint64_t kHeadStream = 0x68656164ULL;

bool lower_is_better(const std::string& metric) { return metric == "perplexity"; }

Vector mean_pooled(const Matrix& hidden) { return hidden.colwise().mean().transpose(); }

TokenSequence encode_text(const Vocab& vocab, const std::string& text, int max_len) {
  auto seq = vocab.encode(text);
  if (seq.tokens.empty()) throw Error(ErrorCode::InvalidArgument, "task example is empty");
  if (static_cast<int>(seq.tokens.size()) > max_len) {
    throw Error(ErrorCode::SequenceTooLong, "task example exceeds max_len: " + text);
  }
  seq.mask_position.reset();
  return seq;
}

int argmax(const Vector& z) {
  Eigen::Index best = 0;
  z.maxCoeff(&best);
  return static_cast<int>(best);
}

std::vector<ClozeExample> cloze_of(const std::vector<TaskExample>& examples) {
  std::vector<ClozeExample> out;
  for (const auto& ex : examples) out.push_back({ex.text, ex.answer});
  return out;
}

void check_labels(const TaskData& task) {
  for (const auto* split : {&task.train, &task.test}) {
    for (const auto& ex : *split) {
      if (ex.label < 0 || ex.label >= task.spec.n_classes) {
        throw Error(ErrorCode::InvalidArgument, "task " + task.spec.id + " label out of range");
      }
    }
  }
}

// Head-only training over fixed pooled features.
double train_head(TaskModel& m, const std::vector<Vector>& features, const std::vector<int>& labels,
                  const HeadHyperparams& hyper, Rng& rng) {
  const auto n = features.size();
  Matrix gw(m.head_weight.rows(), m.head_weight.cols());
  Vector gb(m.head_bias.size());
  Adam adam({static_cast<std::size_t>(gw.size()), static_cast<std::size_t>(gb.size())});
  double loss = 0.0;
  for (int step = 0; step < hyper.steps; ++step) {
    gw.setZero();
    gb.setZero();
    loss = 0.0;
    for (int b = 0; b < hyper.batch_size; ++b) {
      const auto i = rng.below(n);
      const Vector z = m.head_weight * features[i] + m.head_bias;
      const auto p = softmax_rows(z.transpose()).row(0).transpose().eval();
      loss -= std::log(p(labels[i]));
      Vector dz = p;
      dz(labels[i]) -= 1.0;
      dz /= hyper.batch_size;
      gw.noalias() += dz * features[i].transpose();
      gb += dz;
    }
    loss /= hyper.batch_size;
    if (!std::isfinite(loss)) throw Error(ErrorCode::NonFiniteLoss, "head training diverged");
    adam.step({std::span<double>(m.head_weight.data(), static_cast<std::size_t>(m.head_weight.size())),
               std::span<double>(m.head_bias.data(), static_cast<std::size_t>(m.head_bias.size()))},
              {std::span<const double>(gw.data(), static_cast<std::size_t>(gw.size())),
               std::span<const double>(gb.data(), static_cast<std::size_t>(gb.size()))},
              hyper.head_learning_rate);
  }
  return loss;
}

// Joint training of encoder and head.
double train_joint(TaskModel& m, const std::vector<TokenSequence>& inputs, const std::vector<int>& labels,
                   const HeadHyperparams& hyper, Rng& rng) {
  ModelParams grads = ModelParams::zeros(m.encoder.config);
  Matrix gw(m.head_weight.rows(), m.head_weight.cols());
  Vector gb(m.head_bias.size());
  Adam enc_adam(tensor_sizes(m.encoder));
  Adam head_adam({static_cast<std::size_t>(gw.size()), static_cast<std::size_t>(gb.size())});
  const auto enc_views = flat_views(m.encoder);
  const auto grad_views = flat_views(static_cast<const ModelParams&>(grads));
  double loss = 0.0;
  for (int step = 0; step < hyper.steps; ++step) {
    for (auto& [name, span] : grads.tensors()) std::fill(span.begin(), span.end(), 0.0);
    gw.setZero();
    gb.setZero();
    loss = 0.0;
    for (int b = 0; b < hyper.batch_size; ++b) {
      const auto i = rng.below(inputs.size());
      EncoderPass pass(m.encoder, inputs[i]);
      const Matrix& hidden = pass.output();
      const Vector h = mean_pooled(hidden);
      const Vector z = m.head_weight * h + m.head_bias;
      const auto p = softmax_rows(z.transpose()).row(0).transpose().eval();
      loss -= std::log(p(labels[i]));
      Vector dz = p;
      dz(labels[i]) -= 1.0;
      dz /= hyper.batch_size;
      gw.noalias() += dz * h.transpose();
      gb += dz;
      const Vector dh = m.head_weight.transpose() * dz / static_cast<double>(hidden.rows());
      Matrix d_hidden = Matrix::Zero(hidden.rows(), hidden.cols());
      d_hidden.rowwise() = dh.transpose();
      pass.backward(d_hidden, &grads);
    }
    loss /= hyper.batch_size;
    if (!std::isfinite(loss)) throw Error(ErrorCode::NonFiniteLoss, "task fine-tuning diverged");
    enc_adam.step(enc_views, grad_views, hyper.encoder_learning_rate);
    head_adam.step({std::span<double>(m.head_weight.data(), static_cast<std::size_t>(m.head_weight.size())),
                    std::span<double>(m.head_bias.data(), static_cast<std::size_t>(m.head_bias.size()))},
                   {std::span<const double>(gw.data(), static_cast<std::size_t>(gw.size())),
                    std::span<const double>(gb.data(), static_cast<std::size_t>(gb.size()))},
                   hyper.head_learning_rate);
  }
  return loss;
}

}  // namespace

std::string encoder_variant_name(EncoderVariant v) {
  return v == EncoderVariant::Raw ? "raw" : "finetuned";
}

std::vector<std::pair<std::string, double>> TaskMetrics::entries() const {
  std::vector<std::pair<std::string, double>> out{{"accuracy", accuracy}};
  if (macro_f1) out.emplace_back("macro_f1", *macro_f1);
  if (perplexity) out.emplace_back("perplexity", *perplexity);
  return out;
}

TaskMetrics classification_metrics(std::span<const int> predictions, std::span<const int> gold,
                                   int n_classes) {
  if (predictions.size() != gold.size()) {
    throw Error(ErrorCode::LengthMismatch, "predictions and gold differ in length");
  }
  if (gold.empty()) throw Error(ErrorCode::EmptyInput, "no examples to score");
  const auto k = static_cast<std::size_t>(n_classes);
  std::vector<long> tp(k, 0), fp(k, 0), fn(k, 0);
  long correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const int p = predictions[i], g = gold[i];
    if (p < 0 || p >= n_classes || g < 0 || g >= n_classes) {
      throw Error(ErrorCode::InvalidArgument, "label outside [0, n_classes)");
    }
    if (p == g) {
      ++correct;
      ++tp[static_cast<std::size_t>(g)];
    } else {
      ++fp[static_cast<std::size_t>(p)];
      ++fn[static_cast<std::size_t>(g)];
    }
  }
  double f1_sum = 0.0;
  int present = 0;
  for (std::size_t c = 0; c < k; ++c) {
    if (tp[c] + fp[c] + fn[c] == 0) continue;
    ++present;
    f1_sum += 2.0 * static_cast<double>(tp[c]) / static_cast<double>(2 * tp[c] + fp[c] + fn[c]);
  }
  TaskMetrics m;
  m.accuracy = static_cast<double>(correct) / static_cast<double>(gold.size());
  m.macro_f1 = f1_sum / present;
  return m;
}

FinetuneResult finetune_head(const ModelParams& base, const Vocab& vocab, const TaskData& task,
                             const HeadHyperparams& hyper, std::uint64_t seed) {
  if (hyper.steps < 0 || hyper.batch_size <= 0) {
    throw Error(ErrorCode::InvalidArgument, "head steps must be >= 0 and batch_size > 0");
  }
  if (task.train.empty() || task.test.empty()) {
    throw Error(ErrorCode::EmptyInput, "task " + task.spec.id + " needs train and test examples");
  }
  FinetuneResult r;
  r.model.spec = task.spec;
  r.model.encoder = base;
  Rng rng(seed, kHeadStream);

  if (!task.spec.is_classification()) {
    if (!hyper.freeze_encoder && hyper.steps > 0) {
      TrainHyperparams th;
      th.steps = hyper.steps;
      th.memorization_steps = 0;
      th.batch_size = hyper.batch_size;
      th.learning_rate = hyper.encoder_learning_rate;
      auto trained = continue_mlm(base, {}, cloze_of(task.train), vocab, th, seed);
      r.model.encoder = std::move(trained.params);
      r.final_loss = trained.final_loss;
    }
    r.baseline = evaluate_task(r.model, vocab, task);
    return r;
  }

  check_labels(task);
  const int d = base.config.d_model;
  r.model.head_weight = Matrix::Zero(task.spec.n_classes, d);
  r.model.head_bias = Vector::Zero(task.spec.n_classes);
  std::vector<TokenSequence> inputs;
  std::vector<int> labels;
  for (const auto& ex : task.train) {
    inputs.push_back(encode_text(vocab, ex.text, base.config.max_len));
    labels.push_back(ex.label);
  }
  if (hyper.steps > 0) {
    if (hyper.freeze_encoder) {
      std::vector<Vector> features(inputs.size());
      parallel_for(inputs.size(), [&](std::size_t i) {
        features[i] = mean_pooled(EncoderPass(base, inputs[i]).output());
      });
      r.final_loss = train_head(r.model, features, labels, hyper, rng);
    } else {
      r.final_loss = train_joint(r.model, inputs, labels, hyper, rng);
    }
  }
  r.baseline = evaluate_task(r.model, vocab, task);
  return r;
}

TaskMetrics evaluate_task(const TaskModel& model, const Vocab& vocab, const TaskData& task,
                          const NeuronOverride& overrides) {
  if (task.test.empty()) throw Error(ErrorCode::EmptyInput, "task " + task.spec.id + " has no test examples");
  if (!task.spec.is_classification()) {
    std::vector<EncodedPrompt> prompts;
    for (const auto& ex : task.test) prompts.push_back(encode_prompt(vocab, ex.text, ex.answer));
    std::vector<int> hit(prompts.size(), 0);
    parallel_for(prompts.size(), [&](std::size_t i) {
      const auto logits = forward(model.encoder, prompts[i].seq, overrides).logits;
      const Vector row = logits.row(static_cast<Eigen::Index>(*prompts[i].seq.mask_position)).transpose();
      hit[i] = argmax(row) == static_cast<int>(prompts[i].answer);
    });
    TaskMetrics m;
    m.accuracy = static_cast<double>(std::count(hit.begin(), hit.end(), 1)) / static_cast<double>(hit.size());
    m.perplexity = masked_perplexity(model.encoder, prompts, overrides);
    return m;
  }
  check_labels(task);
  std::vector<int> predictions(task.test.size()), gold(task.test.size());
  parallel_for(task.test.size(), [&](std::size_t i) {
    const auto seq = encode_text(vocab, task.test[i].text, model.encoder.config.max_len);
    const Vector h = mean_pooled(EncoderPass(model.encoder, seq, overrides).output());
    predictions[i] = argmax(model.head_weight * h + model.head_bias);
    gold[i] = task.test[i].label;
  });
  return classification_metrics(predictions, gold, task.spec.n_classes);
}

Delta make_delta(double base, double post) {
  Delta d;
  d.absolute = post - base;
  if (base != 0.0) d.relative_pct = 100.0 * (post - base) / base;
  return d;
}

std::vector<SuppressionCondition> suppression_conditions(const std::vector<NeuronSet>& sets,
                                                         bool per_relation) {
  std::vector<SuppressionCondition> out;
  if (per_relation) {
    for (const auto& s : sets) out.push_back({s.relation_id, s.neurons});
    return out;
  }
  std::map<std::string, std::vector<NeuronId>> by_category;
  for (const auto& s : sets) {
    auto& u = by_category[s.category];
    u.insert(u.end(), s.neurons.begin(), s.neurons.end());
  }
  for (auto& [category, neurons] : by_category) {
    std::sort(neurons.begin(), neurons.end());
    neurons.erase(std::unique(neurons.begin(), neurons.end()), neurons.end());
    out.push_back({category, std::move(neurons)});
  }
  return out;
}

TaskEvaluation eval_under_suppression(const TaskModel& model, const Vocab& vocab,
                                      const TaskData& task, EncoderVariant variant,
                                      const std::vector<SuppressionCondition>& conditions) {
  TaskEvaluation ev;
  ev.task_id = task.spec.id;
  ev.variant = variant;
  EvalRecord base;
  base.task_id = task.spec.id;
  base.variant = variant;
  base.condition = "baseline";
  base.metrics = evaluate_task(model, vocab, task);
  ev.records.push_back(base);

  const auto base_entries = base.metrics.entries();
  std::map<std::string, std::vector<double>> per_metric;
  for (const auto& c : conditions) {
    EvalRecord rec;
    rec.task_id = task.spec.id;
    rec.variant = variant;
    rec.condition = c.label;
    rec.n_suppressed = c.neurons.size();
    const auto overrides = NeuronOverride::for_neurons(c.neurons, OverrideSpec::zero());
    overrides.validate(model.encoder.config);
    rec.metrics = evaluate_task(model, vocab, task, overrides);
    const auto post = rec.metrics.entries();
    for (std::size_t k = 0; k < post.size(); ++k) {
      const auto delta = make_delta(base_entries[k].second, post[k].second);
      rec.deltas.emplace_back(post[k].first, delta);
      per_metric[post[k].first].push_back(delta.absolute);
    }
    ev.records.push_back(std::move(rec));
  }
  for (const auto& [metric, _] : base_entries) {
    const auto& v = per_metric[metric];
    if (v.empty()) continue;
    double sum = 0.0;
    for (double x : v) sum += x;
    ev.mean_delta.emplace_back(metric, sum / static_cast<double>(v.size()));
    ev.worst_delta.emplace_back(metric, lower_is_better(metric) ? *std::max_element(v.begin(), v.end())
                                                                : *std::min_element(v.begin(), v.end()));
  }
  return ev;
}

namespace {

struct CellAccumulator {
  double sum = 0.0, rel_sum = 0.0, worst = 0.0;
  std::size_t n = 0, rel_n = 0;

  void add(const std::string& metric, const Delta& d) {
    sum += d.absolute;
    if (d.relative_pct) {
      rel_sum += *d.relative_pct;
      ++rel_n;
    }
    if (n == 0 || (lower_is_better(metric) ? d.absolute > worst : d.absolute < worst)) worst = d.absolute;
    ++n;
  }
};

using Cells = std::map<std::string, CellAccumulator>;

std::vector<Rq3Cell> finish(const Cells& cells) {
  std::vector<Rq3Cell> out;
  for (const auto& [metric, acc] : cells) {
    Rq3Cell c;
    c.metric = metric;
    c.records = acc.n;
    c.mean_absolute = acc.sum / static_cast<double>(acc.n);
    c.worst_absolute = acc.worst;
    if (acc.rel_n) c.mean_relative_pct = acc.rel_sum / static_cast<double>(acc.rel_n);
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace

Rq3Summary aggregate_rq3(std::span<const EvalRecord> records) {
  // Sums are accumulated in sorted record order so floating results do not
  // depend on the caller's ordering.
  std::vector<const EvalRecord*> sorted;
  for (const auto& r : records) {
    if (r.condition != "baseline") sorted.push_back(&r);
  }
  std::sort(sorted.begin(), sorted.end(), [](const EvalRecord* a, const EvalRecord* b) {
    return std::tie(a->task_id, a->variant, a->condition) < std::tie(b->task_id, b->variant, b->condition);
  });

  std::map<std::pair<std::string, EncoderVariant>, Cells> tasks, conditions;
  std::map<EncoderVariant, Cells> variants;
  for (const auto* r : sorted) {
    for (const auto& [metric, delta] : r->deltas) {
      tasks[{r->task_id, r->variant}][metric].add(metric, delta);
      conditions[{r->condition, r->variant}][metric].add(metric, delta);
      variants[r->variant][metric].add(metric, delta);
    }
  }
  Rq3Summary s;
  for (const auto& [key, cells] : tasks) s.per_task.push_back({key.first, key.second, finish(cells)});
  for (const auto& [key, cells] : conditions) s.per_condition.push_back({key.first, key.second, finish(cells)});
  for (const auto& [key, cells] : variants) s.per_variant.push_back({key, finish(cells)});
  return s;
}

}  // namespace bt
