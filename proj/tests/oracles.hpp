#pragma once

#include <vector>

#include "biastracer/encoder.hpp"
#include "biastracer/rng.hpp"

// Independent reimplementations used as test oracles. They share no code with
// the library and favour obviousness over speed.
namespace bt::support {

// Average rank by counting: 1 + #smaller + (#equal - 1) / 2.
std::vector<double> count_ranks(const std::vector<double>& v);

// Two-sided signed-rank p by walking all 2^n sign assignments of the ranks.
double enumerate_signed_rank_p(const std::vector<double>& ranks, double w_plus);

// W+ from counted ranks of |after - before|; zero differences are not expected.
double signed_rank_w_plus(const std::vector<double>& before, const std::vector<double>& after,
                          std::vector<double>* ranks_out = nullptr);

// (#x > y - #x < y) / (m n) over every pair.
double pair_count_delta(const std::vector<double>& x, const std::vector<double>& y);

// 1 - 6 sum d^2 / (n (n^2 - 1)) on counted ranks.
double spearman_closed_form(const std::vector<double>& x, const std::vector<double>& y);

// Pearson correlation of counted ranks.
double rank_pearson(const std::vector<double>& x, const std::vector<double>& y);

// Mean overlap over unordered pairs by explicit enumeration.
double brute_mean_overlap(const std::vector<std::vector<NeuronId>>& sets);

// Random sorted, duplicate-free neuron set of up to half the layers x width grid.
std::vector<NeuronId> random_neuron_set(Rng& rng, int layers, int width);

}  // namespace bt::support
