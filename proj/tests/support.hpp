#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "biastracer/encoder.hpp"
#include "biastracer/error.hpp"
#include "biastracer/rng.hpp"
#include "biastracer/synth.hpp"
#include "biastracer/vocab.hpp"

namespace bt::support {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Parameters with O(scale) weights so every nonlinearity is exercised; the
// 0.02 initializer keeps a fresh model nearly linear.
ModelParams random_model(const ModelConfig& config, std::uint64_t seed, double scale = 0.5);

// Random non-special tokens with a [MASK] at mask_position.
TokenSequence random_prompt(int vocab_size, int length, std::size_t mask_position, Rng& rng);

// Vocabulary over the corpus and every prompt with its answer filled in, the
// same token set train-toy builds.
Vocab vocab_for(const SynthCorpus& synth);

// Straight-loop reimplementation of the encoder, sharing no code with the
// library. When ablate_ffn is set the w_out * activation term is dropped in
// every layer (b_out stays), which is the residual-only path.
struct OracleForward {
  std::vector<std::vector<double>> logits;           // [T][vocab]
  std::vector<std::vector<double>> mask_activation;  // [layer][d_ff] at the mask
  std::vector<double> last_residual;                 // pre-LN2 input of the last layer at the mask
  std::vector<double> last_output;                   // final hidden state at the mask
};

OracleForward oracle_forward(const ModelParams& params, const TokenSequence& seq, bool ablate_ffn = false);

std::vector<double> oracle_softmax(const std::vector<double>& z);

inline double rel_error(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-12});
  return std::abs(a - b) / scale;
}

// Passes when fn throws bt::Error with the given code.
template <class F>
::testing::AssertionResult throws_code(F&& fn, ErrorCode code) {
  try {
    fn();
  } catch (const Error& e) {
    if (e.code() == code) return ::testing::AssertionSuccess();
    return ::testing::AssertionFailure() << "threw " << error_code_name(e.code()) << ": " << e.what();
  }
  return ::testing::AssertionFailure() << "did not throw " << error_code_name(code);
}

}  // namespace bt::support
