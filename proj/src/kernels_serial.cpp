#include "knowrl/common.hpp"
#include "knowrl/kernels.hpp"

namespace knowrl::kernels {

std::size_t sample_categorical(std::span<const double> probs, double u) {
  double cdf = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    cdf += probs[i];
    if (u < cdf) return i;
  }
  // Rounding left the total just below 1; fall back to the last nonzero.
  for (std::size_t i = probs.size(); i-- > 0;) {
    if (probs[i] > 0.0) return i;
  }
  return probs.size() - 1;
}

double surrogate_of_group(const SurrogateProblem& p,
                          std::span<const std::size_t> group) {
  std::vector<double> rewards(group.size());
  std::vector<double> ratios(group.size());
  for (std::size_t g = 0; g < group.size(); ++g) {
    rewards[g] = p.rewards[group[g]];
    ratios[g] = p.ratios[group[g]];
  }
  const auto adv = group_advantages(rewards, p.eps_adv, p.norm);
  return clipped_surrogate(ratios, adv, p.eps_clip);
}

namespace serial {

std::vector<IndexPair> similar_pairs(const EmbeddingMatrix& m, double threshold) {
  std::vector<IndexPair> out;
  const std::size_t n = m.rows();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (dot(m.row(i), m.row(j)) > threshold) out.emplace_back(i, j);
    }
  }
  return out;
}

std::vector<double> dot_scores(const EmbeddingMatrix& m, std::span<const double> query) {
  std::vector<double> out(m.rows());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = dot(m.row(i), query);
  return out;
}

std::vector<double> surrogate_samples(const SurrogateProblem& p,
                                      std::size_t n_groups, std::uint64_t seed) {
  std::vector<double> out(n_groups);
  std::vector<std::size_t> group(p.group_size);
  for (std::size_t k = 0; k < n_groups; ++k) {
    Rng rng(derive_seed(seed, k));
    for (auto& c : group) c = sample_categorical(p.old_probs, rng.uniform());
    out[k] = surrogate_of_group(p, group);
  }
  return out;
}

}  // namespace serial
}  // namespace knowrl::kernels
