#pragma once

#include <span>
#include <string>
#include <vector>

#include "biastracer/encoder.hpp"
#include "biastracer/vocab.hpp"

namespace bt {

// Adam with bias correction over an arbitrary list of flat tensors.
class Adam {
 public:
  Adam(const std::vector<std::size_t>& sizes, double beta1 = 0.9, double beta2 = 0.999,
       double epsilon = 1e-8);

  void step(const std::vector<std::span<double>>& params,
            const std::vector<std::span<const double>>& grads, double learning_rate);

 private:
  double beta1_, beta2_, epsilon_;
  long t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

std::vector<std::span<double>> flat_views(ModelParams& params);
std::vector<std::span<const double>> flat_views(const ModelParams& params);
std::vector<std::size_t> tensor_sizes(const ModelParams& params);

// With cloze examples and memorization_steps > 0, training has two phases:
// `steps` of generic MLM over the corpus with every parameter trainable, then
// `memorization_steps` over cloze examples mixed with corpus lines. The second
// phase by default updates only FFN weights and the layer norms after them,
// so the memorized associations end up in FFN neurons rather than in attention
// or embeddings. Otherwise one phase of `steps` mixes both sources.
struct TrainHyperparams {
  int steps = 1500;
  int memorization_steps = 3000;
  bool feed_forward_only_memorization = true;
  int batch_size = 16;
  double learning_rate = 2e-3;
  double memorization_learning_rate = 5e-3;
  double final_lr_fraction = 0.05;  // linear decay target
  double mask_prob = 0.15;          // generic corpus lines
  double answer_mask_prob = 1.0;    // answer position of memorization examples
  double memorization_share = 0.75; // fraction of each memorization batch drawn from cloze examples
};

// A memorization example: a cloze sentence whose [MASK] position holds answer.
struct ClozeExample {
  std::string text;
  std::string answer;
};

struct TrainResult {
  ModelParams params;
  double final_loss = 0.0;            // mean loss over the last min(50, steps) steps
  std::vector<double> loss_history;   // per step
};

// Masked-LM training from ModelParams::initialize(config). Deterministic given
// config.seed. Throws NonFiniteLoss if the loss diverges.
TrainResult train_mlm(const std::vector<std::string>& corpus,
                      const std::vector<ClozeExample>& cloze, const Vocab& vocab,
                      const ModelConfig& config, const TrainHyperparams& hyper);

// Same training loop starting from existing parameters; seed drives batch
// sampling and masking.
TrainResult continue_mlm(ModelParams start, const std::vector<std::string>& corpus,
                         const std::vector<ClozeExample>& cloze, const Vocab& vocab,
                         const TrainHyperparams& hyper, std::uint64_t seed);

// Fraction of cloze examples whose arg-max prediction at the mask equals the answer.
double cloze_recall(const ModelParams& params, const Vocab& vocab,
                    const std::vector<ClozeExample>& cloze);

}  // namespace bt
