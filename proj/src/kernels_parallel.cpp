#include <cstddef>

#include "knowrl/common.hpp"
#include "knowrl/kernels.hpp"

namespace knowrl::kernels::parallel {

std::vector<IndexPair> similar_pairs(const EmbeddingMatrix& m, double threshold) {
  const auto n = static_cast<std::ptrdiff_t>(m.rows());
  std::vector<std::vector<std::size_t>> neighbours(m.rows());
  // Row i does n-i-1 dot products; dynamic scheduling evens that out.
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto ri = m.row(static_cast<std::size_t>(i));
    for (std::ptrdiff_t j = i + 1; j < n; ++j) {
      if (dot(ri, m.row(static_cast<std::size_t>(j))) > threshold) {
        neighbours[i].push_back(static_cast<std::size_t>(j));
      }
    }
  }
  std::vector<IndexPair> out;
  for (std::size_t i = 0; i < neighbours.size(); ++i) {
    for (std::size_t j : neighbours[i]) out.emplace_back(i, j);
  }
  return out;
}

std::vector<double> dot_scores(const EmbeddingMatrix& m, std::span<const double> query) {
  const auto n = static_cast<std::ptrdiff_t>(m.rows());
  std::vector<double> out(m.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    out[i] = dot(m.row(static_cast<std::size_t>(i)), query);
  }
  return out;
}

std::vector<double> surrogate_samples(const SurrogateProblem& p,
                                      std::size_t n_groups, std::uint64_t seed) {
  std::vector<double> out(n_groups);
  const auto n = static_cast<std::ptrdiff_t>(n_groups);
#pragma omp parallel
  {
    std::vector<std::size_t> group(p.group_size);
#pragma omp for schedule(static)
    for (std::ptrdiff_t k = 0; k < n; ++k) {
      Rng rng(derive_seed(seed, static_cast<std::uint64_t>(k)));
      for (auto& c : group) c = sample_categorical(p.old_probs, rng.uniform());
      out[k] = surrogate_of_group(p, group);
    }
  }
  return out;
}

}  // namespace knowrl::kernels::parallel
