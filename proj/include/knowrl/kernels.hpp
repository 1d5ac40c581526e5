#ifndef KNOWRL_KERNELS_HPP_
#define KNOWRL_KERNELS_HPP_

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "knowrl/embedding.hpp"
#include "knowrl/objective.hpp"

// Data-parallel inner loops. Each kernel has a serial reference in
// kernels::serial and an OpenMP version in kernels::parallel; the two must
// return identical results (not merely close), which the tests assert.
namespace knowrl::kernels {

using IndexPair = std::pair<std::size_t, std::size_t>;

// Monte-Carlo estimate of the clipped surrogate for one prompt: groups of
// `group_size` candidates are drawn from `old_probs`, advantages come from
// the per-candidate `rewards`, ratios from the per-candidate `ratios`.
struct SurrogateProblem {
  std::span<const double> old_probs;
  std::span<const double> ratios;
  std::span<const double> rewards;
  std::size_t group_size = 2;
  double eps_adv = 1e-4;
  double eps_clip = 0.2;
  AdvantageNorm norm = AdvantageNorm::kMeanStd;
};

// Inverse-CDF draw; u in [0,1).
std::size_t sample_categorical(std::span<const double> probs, double u);

// Surrogate value of one explicit group of candidate indices.
double surrogate_of_group(const SurrogateProblem& p, std::span<const std::size_t> group);

namespace serial {
// All (i, j), i < j, with dot(row i, row j) > threshold, lexicographic order.
std::vector<IndexPair> similar_pairs(const EmbeddingMatrix& m, double threshold);
std::vector<double> dot_scores(const EmbeddingMatrix& m, std::span<const double> query);
// One surrogate value per group; group k uses Rng(derive_seed(seed, k)).
std::vector<double> surrogate_samples(const SurrogateProblem& p,
                                      std::size_t n_groups, std::uint64_t seed);
}  // namespace serial

namespace parallel {
std::vector<IndexPair> similar_pairs(const EmbeddingMatrix& m, double threshold);
std::vector<double> dot_scores(const EmbeddingMatrix& m, std::span<const double> query);
std::vector<double> surrogate_samples(const SurrogateProblem& p,
                                      std::size_t n_groups, std::uint64_t seed);
}  // namespace parallel

}  // namespace knowrl::kernels

#endif  // KNOWRL_KERNELS_HPP_
