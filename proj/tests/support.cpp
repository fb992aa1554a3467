#include "support.hpp"

#include <algorithm>
#include <atomic>
#include <unistd.h>

#include "biastracer/vocab.hpp"

namespace bt::support {

namespace fs = std::filesystem;

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = fs::temp_directory_path() /
          ("bt-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

ModelParams random_model(const ModelConfig& config, std::uint64_t seed, double scale) {
  ModelParams p = ModelParams::zeros(config);
  Rng rng(seed);
  for (auto& [name, values] : p.tensors()) {
    const bool gain = name.find("gamma") != std::string::npos;
    for (double& v : values) v = gain ? 1.0 + 0.2 * rng.normal() : scale * rng.normal();
  }
  return p;
}

TokenSequence random_prompt(int vocab_size, int length, std::size_t mask_position, Rng& rng) {
  TokenSequence seq;
  for (int t = 0; t < length; ++t) {
    seq.tokens.push_back(3 + static_cast<TokenId>(rng.below(static_cast<std::uint64_t>(vocab_size - 3))));
  }
  seq.tokens[mask_position] = kMaskId;
  seq.mask_position = mask_position;
  return seq;
}

Vocab vocab_for(const SynthCorpus& synth) {
  std::vector<std::string> text = synth.corpus;
  for (const auto& p : synth.dataset.prompts()) {
    std::string t = p.text;
    t.replace(t.find(kMaskToken), kMaskToken.size(), p.answer);
    text.push_back(std::move(t));
  }
  return build_vocab(text);
}

namespace {

using Rows = std::vector<std::vector<double>>;

double at(const Matrix& m, int r, int c) { return m(r, c); }

// y[t][o] = sum_i x[t][i] * w(o, i) + b(o)
Rows affine(const Rows& x, const Matrix& w, const Vector& b) {
  Rows y(x.size(), std::vector<double>(static_cast<std::size_t>(w.rows())));
  for (std::size_t t = 0; t < x.size(); ++t) {
    for (int o = 0; o < w.rows(); ++o) {
      double s = b(o);
      for (int i = 0; i < w.cols(); ++i) s += x[t][static_cast<std::size_t>(i)] * at(w, o, i);
      y[t][static_cast<std::size_t>(o)] = s;
    }
  }
  return y;
}

std::vector<double> norm(const std::vector<double>& x, const Vector& gamma, const Vector& beta) {
  const double n = static_cast<double>(x.size());
  double mean = 0;
  for (double v : x) mean += v;
  mean /= n;
  double var = 0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= n;
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] = (x[i] - mean) / std::sqrt(var + 1e-12) * gamma(static_cast<int>(i)) + beta(static_cast<int>(i));
  }
  return y;
}

}  // namespace

std::vector<double> oracle_softmax(const std::vector<double>& z) {
  const double m = *std::max_element(z.begin(), z.end());
  std::vector<double> p(z.size());
  double s = 0;
  for (std::size_t i = 0; i < z.size(); ++i) s += (p[i] = std::exp(z[i] - m));
  for (double& v : p) v /= s;
  return p;
}

OracleForward oracle_forward(const ModelParams& params, const TokenSequence& seq, bool ablate_ffn) {
  const auto& c = params.config;
  const std::size_t T = seq.tokens.size();
  const auto d = static_cast<std::size_t>(c.d_model);
  const int dh = c.d_model / c.n_heads;
  OracleForward out;

  Rows x(T, std::vector<double>(d));
  for (std::size_t t = 0; t < T; ++t) {
    std::vector<double> e(d);
    for (std::size_t i = 0; i < d; ++i) {
      e[i] = at(params.token_embedding, seq.tokens[t], static_cast<int>(i)) +
             at(params.position_embedding, static_cast<int>(t), static_cast<int>(i));
    }
    x[t] = norm(e, params.emb_ln_gamma, params.emb_ln_beta);
  }

  for (const auto& L : params.layers) {
    const Rows q = affine(x, L.wq, L.bq), k = affine(x, L.wk, L.bk), v = affine(x, L.wv, L.bv);
    Rows ctx(T, std::vector<double>(d, 0.0));
    for (int h = 0; h < c.n_heads; ++h) {
      for (std::size_t t = 0; t < T; ++t) {
        std::vector<double> s(T);
        for (std::size_t u = 0; u < T; ++u) {
          double dot = 0;
          for (int j = 0; j < dh; ++j) dot += q[t][static_cast<std::size_t>(h * dh + j)] * k[u][static_cast<std::size_t>(h * dh + j)];
          s[u] = dot / std::sqrt(static_cast<double>(dh));
        }
        const auto a = oracle_softmax(s);
        for (std::size_t u = 0; u < T; ++u) {
          for (int j = 0; j < dh; ++j) ctx[t][static_cast<std::size_t>(h * dh + j)] += a[u] * v[u][static_cast<std::size_t>(h * dh + j)];
        }
      }
    }
    const Rows attn = affine(ctx, L.wo, L.bo);
    Rows hidden(T);
    for (std::size_t t = 0; t < T; ++t) {
      std::vector<double> r(d);
      for (std::size_t i = 0; i < d; ++i) r[i] = x[t][i] + attn[t][i];
      hidden[t] = norm(r, L.ln1_gamma, L.ln1_beta);
    }
    Rows act = affine(hidden, L.w_in, L.b_in);
    for (auto& row : act) {
      for (double& a : row) a = 0.5 * a * (1.0 + std::erf(a / std::sqrt(2.0)));
    }
    if (seq.mask_position) out.mask_activation.push_back(act[*seq.mask_position]);
    if (ablate_ffn) {
      for (auto& row : act) std::fill(row.begin(), row.end(), 0.0);
    }
    const Rows ffn = affine(act, L.w_out, L.b_out);
    for (std::size_t t = 0; t < T; ++t) {
      std::vector<double> r(d);
      for (std::size_t i = 0; i < d; ++i) r[i] = hidden[t][i] + ffn[t][i];
      if (seq.mask_position && t == *seq.mask_position) out.last_residual = r;
      x[t] = norm(r, L.ln2_gamma, L.ln2_beta);
    }
  }
  if (seq.mask_position) out.last_output = x[*seq.mask_position];
  out.logits = affine(x, params.head_weight, params.head_bias);
  return out;
}

}  // namespace bt::support
