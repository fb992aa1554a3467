#include "biastracer/trainer.hpp"

#include <cmath>

#include "biastracer/error.hpp"
#include "biastracer/rng.hpp"

namespace bt {

Adam::Adam(const std::vector<std::size_t>& sizes, double beta1, double beta2, double epsilon)
    : beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {
  for (auto n : sizes) {
    m_.emplace_back(n, 0.0);
    v_.emplace_back(n, 0.0);
  }
}

void Adam::step(const std::vector<std::span<double>>& params,
                const std::vector<std::span<const double>>& grads, double learning_rate) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& m = m_[k];
    auto& v = v_[k];
    const auto g = grads[k];
    auto p = params[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      p[i] -= learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + epsilon_);
    }
  }
}

std::vector<std::span<double>> flat_views(ModelParams& params) {
  std::vector<std::span<double>> out;
  for (auto& [name, span] : params.tensors()) out.push_back(span);
  return out;
}

std::vector<std::span<const double>> flat_views(const ModelParams& params) {
  std::vector<std::span<const double>> out;
  for (auto& [name, span] : params.tensors()) out.push_back(span);
  return out;
}

std::vector<std::size_t> tensor_sizes(const ModelParams& params) {
  std::vector<std::size_t> out;
  for (auto& [name, span] : params.tensors()) out.push_back(span.size());
  return out;
}

namespace {

struct Sample {
  TokenSequence input;
  std::vector<std::pair<std::size_t, TokenId>> targets;  // (position, gold id)
};

struct EncodedCloze {
  TokenSequence masked;
  TokenId answer;
};

// Accumulates the gradient of sum(CE at targets) * weight. Returns the summed CE.
double accumulate(const ModelParams& params, const Sample& sample, double weight,
                  ModelParams& grads) {
  EncoderPass pass(params, sample.input);
  const Matrix& out = pass.output();
  Matrix d_output = Matrix::Zero(out.rows(), out.cols());
  double loss = 0.0;
  for (const auto& [pos, gold] : sample.targets) {
    const auto row = out.row(static_cast<Eigen::Index>(pos));
    Vector z = params.head_weight * row.transpose() + params.head_bias;
    const double m = z.maxCoeff();
    Vector p = (z.array() - m).exp();
    const double sum = p.sum();
    p /= sum;
    loss += -(z(gold) - m - std::log(sum));
    Vector dz = p * weight;
    dz(gold) -= weight;
    grads.head_weight.noalias() += dz * row;
    grads.head_bias += dz;
    d_output.row(static_cast<Eigen::Index>(pos)) += (params.head_weight.transpose() * dz).transpose();
  }
  pass.backward(d_output, &grads);
  return loss;
}

void zero(ModelParams& g) {
  for (auto& [name, span] : g.tensors()) std::fill(span.begin(), span.end(), 0.0);
}

}  // namespace

TrainResult train_mlm(const std::vector<std::string>& corpus,
                      const std::vector<ClozeExample>& cloze, const Vocab& vocab,
                      const ModelConfig& config, const TrainHyperparams& hyper) {
  ModelConfig cfg = config;
  cfg.vocab_size = static_cast<int>(vocab.size());
  return continue_mlm(ModelParams::initialize(cfg), corpus, cloze, vocab, hyper, cfg.seed);
}

TrainResult continue_mlm(ModelParams start, const std::vector<std::string>& corpus,
                         const std::vector<ClozeExample>& cloze, const Vocab& vocab,
                         const TrainHyperparams& hyper, std::uint64_t seed) {
  const ModelConfig cfg = start.config;
  if (cfg.vocab_size != static_cast<int>(vocab.size())) {
    throw Error(ErrorCode::InvalidArgument, "vocabulary size does not match the model");
  }
  TrainResult result{std::move(start), 0.0, {}};
  if (hyper.steps <= 0 && hyper.memorization_steps <= 0) return result;
  if (hyper.batch_size <= 0) throw Error(ErrorCode::InvalidArgument, "batch_size must be positive");

  std::vector<TokenSequence> lines;
  for (const auto& text : corpus) {
    auto seq = vocab.encode(text);
    if (seq.tokens.empty()) continue;
    if (static_cast<int>(seq.tokens.size()) > cfg.max_len) {
      throw Error(ErrorCode::SequenceTooLong, "corpus line exceeds max_len: " + text);
    }
    lines.push_back(std::move(seq));
  }
  std::vector<EncodedCloze> cloze_encoded;
  for (const auto& ex : cloze) {
    auto seq = vocab.encode(ex.text);
    if (!seq.mask_position) throw Error(ErrorCode::NoMaskPosition, "cloze example lacks [MASK]: " + ex.text);
    const auto answer = vocab.find(ex.answer);
    if (!answer) throw Error(ErrorCode::AnswerNotInVocab, "answer '" + ex.answer + "' not in vocabulary");
    cloze_encoded.push_back({std::move(seq), *answer});
  }
  if (lines.empty() && cloze_encoded.empty()) {
    throw Error(ErrorCode::EmptyCorpus, "no training material");
  }

  Rng rng(seed, 0x747261696eULL);
  auto draw_line = [&]() {
    Sample s;
    s.input = lines[rng.below(lines.size())];
    for (std::size_t t = 0; t < s.input.tokens.size(); ++t) {
      if (rng.uniform() < hyper.mask_prob) {
        s.targets.emplace_back(t, s.input.tokens[t]);
        s.input.tokens[t] = kMaskId;
      }
    }
    if (s.targets.empty()) {
      const std::size_t t = rng.below(s.input.tokens.size());
      s.targets.emplace_back(t, s.input.tokens[t]);
      s.input.tokens[t] = kMaskId;
    }
    s.input.mask_position.reset();
    return s;
  };
  auto draw_cloze = [&]() {
    const auto& ex = cloze_encoded[rng.below(cloze_encoded.size())];
    Sample s;
    s.input = ex.masked;
    const std::size_t pos = *ex.masked.mask_position;
    if (rng.uniform() < hyper.answer_mask_prob) {
      s.targets.emplace_back(pos, ex.answer);
    } else {
      s.input.tokens[pos] = ex.answer;
      s.input.mask_position.reset();
      const std::size_t t = rng.below(s.input.tokens.size());
      s.targets.emplace_back(t, s.input.tokens[t]);
      s.input.tokens[t] = kMaskId;
    }
    s.input.mask_position.reset();
    return s;
  };

  ModelParams& params = result.params;
  ModelParams grads = ModelParams::zeros(cfg);

  // One optimisation phase. share is the probability that a batch item is a
  // cloze example; trainable filters tensors by name.
  auto run_phase = [&](int steps, double base_lr, double share, auto trainable) {
    std::vector<std::span<double>> param_views;
    std::vector<std::span<const double>> grad_views;
    std::vector<std::size_t> sizes;
    auto p_all = params.tensors();
    auto g_all = static_cast<const ModelParams&>(grads).tensors();
    for (std::size_t k = 0; k < p_all.size(); ++k) {
      if (!trainable(p_all[k].first)) continue;
      param_views.push_back(p_all[k].second);
      grad_views.push_back(g_all[k].second);
      sizes.push_back(p_all[k].second.size());
    }
    Adam adam(sizes);
    for (int step = 0; step < steps; ++step) {
      std::vector<Sample> batch;
      batch.reserve(static_cast<std::size_t>(hyper.batch_size));
      std::size_t n_targets = 0;
      for (int b = 0; b < hyper.batch_size; ++b) {
        const bool memorize = !cloze_encoded.empty() && (lines.empty() || rng.uniform() < share);
        batch.push_back(memorize ? draw_cloze() : draw_line());
        n_targets += batch.back().targets.size();
      }
      zero(grads);
      const double weight = 1.0 / static_cast<double>(n_targets);
      double loss = 0.0;
      for (const auto& s : batch) loss += accumulate(params, s, weight, grads);
      loss *= weight;
      if (!std::isfinite(loss)) {
        throw Error(ErrorCode::NonFiniteLoss,
                    "training loss diverged at step " + std::to_string(result.loss_history.size()));
      }
      result.loss_history.push_back(loss);
      const double progress = static_cast<double>(step) / static_cast<double>(steps);
      const double lr = base_lr * (1.0 - (1.0 - hyper.final_lr_fraction) * progress);
      adam.step(param_views, grad_views, lr);
    }
  };

  const bool split = hyper.memorization_steps > 0 && !cloze_encoded.empty();
  if (!lines.empty() || !split) {
    run_phase(hyper.steps, hyper.learning_rate, split ? 0.0 : hyper.memorization_share,
              [](const std::string&) { return true; });
  }
  if (split) {
    const bool ffn_only = hyper.feed_forward_only_memorization;
    run_phase(hyper.memorization_steps, hyper.memorization_learning_rate, hyper.memorization_share, [ffn_only](const std::string& name) {
      if (!ffn_only) return true;
      return name.ends_with(".w_in") || name.ends_with(".b_in") || name.ends_with(".w_out") ||
             name.ends_with(".b_out") || name.ends_with(".ln2_gamma") || name.ends_with(".ln2_beta");
    });
  }
  if (result.loss_history.empty()) return result;
  const std::size_t tail = std::min<std::size_t>(50, result.loss_history.size());
  double sum = 0.0;
  for (std::size_t i = result.loss_history.size() - tail; i < result.loss_history.size(); ++i) {
    sum += result.loss_history[i];
  }
  result.final_loss = sum / static_cast<double>(tail);
  return result;
}

double cloze_recall(const ModelParams& params, const Vocab& vocab,
                    const std::vector<ClozeExample>& cloze) {
  if (cloze.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& ex : cloze) {
    const auto seq = vocab.encode(ex.text);
    if (!seq.mask_position) throw Error(ErrorCode::NoMaskPosition, "cloze example lacks [MASK]");
    const auto result = forward(params, seq);
    Eigen::Index best = 0;
    result.logits.row(static_cast<Eigen::Index>(*seq.mask_position)).maxCoeff(&best);
    if (vocab.find(ex.answer) == static_cast<TokenId>(best)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(cloze.size());
}

}  // namespace bt
