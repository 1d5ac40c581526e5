#include "knowrl/embedding.hpp"

#include <cmath>

#include "knowrl/common.hpp"
#include "knowrl/text.hpp"

namespace knowrl {

void EmbeddingMatrix::append(std::span<const double> v) {
  if (dim == 0) dim = v.size();
  if (v.size() != dim) throw Error("embedding dimension mismatch");
  data.insert(data.end(), v.begin(), v.end());
}

std::string HashingEmbedder::id() const {
  return "hash-fnv1a64-d" + std::to_string(dim_);
}

std::vector<double> HashingEmbedder::embed(std::string_view text) const {
  const auto tokens = text::word_tokens(text);
  if (tokens.empty()) throw Error("empty input to embedder");
  std::vector<double> v(dim_, 0.0);
  for (const auto& t : tokens) v[text::fnv1a64(t) % dim_] += 1.0;
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  const double na = std::sqrt(dot(a, a));
  const double nb = std::sqrt(dot(b, b));
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

EmbeddingMatrix embed_all(const Embedder& embedder,
                          const std::vector<std::string>& texts) {
  EmbeddingMatrix out;
  out.dim = embedder.dimension();
  out.data.assign(texts.size() * out.dim, 0.0);
  const auto n = static_cast<std::ptrdiff_t>(texts.size());
  std::string failure;
  std::ptrdiff_t failed_at = n;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      const auto v = embedder.embed(texts[i]);
      std::copy(v.begin(), v.end(), out.data.begin() + i * out.dim);
    } catch (const std::exception& e) {
#pragma omp critical(knowrl_embed_all)
      {
        // Report the lowest failing index regardless of thread timing.
        if (i < failed_at) {
          failed_at = i;
          failure = e.what();
        }
      }
    }
  }
  if (failed_at < n) {
    throw BatchEmbedError(static_cast<std::size_t>(failed_at), failure);
  }
  return out;
}

}  // namespace knowrl
