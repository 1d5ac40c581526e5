#ifndef KNOWRL_EMBEDDING_HPP_
#define KNOWRL_EMBEDDING_HPP_

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace knowrl {

// Row-major block of equal-length vectors.
struct EmbeddingMatrix {
  std::size_t dim = 0;
  std::vector<double> data;

  std::size_t rows() const { return dim == 0 ? 0 : data.size() / dim; }
  std::span<const double> row(std::size_t i) const {
    return {data.data() + i * dim, dim};
  }
  void append(std::span<const double> v);
};

// Text -> unit vector. Implementations must be deterministic and safe to
// call concurrently.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::size_t dimension() const = 0;
  // Identifies the embedding space; persisted indices are only reused when
  // this matches.
  virtual std::string id() const = 0;
  // Throws knowrl::Error("empty input to embedder") on text with no tokens.
  virtual std::vector<double> embed(std::string_view text) const = 0;
};

// Feature hashing of word tokens into a fixed number of buckets (FNV-1a 64,
// bucket = hash mod dim), then L2 normalization.
class HashingEmbedder final : public Embedder {
 public:
  explicit HashingEmbedder(std::size_t dim = 256) : dim_(dim) {}
  std::size_t dimension() const override { return dim_; }
  std::string id() const override;
  std::vector<double> embed(std::string_view text) const override;

 private:
  std::size_t dim_;
};

double dot(std::span<const double> a, std::span<const double> b);
double cosine(std::span<const double> a, std::span<const double> b);

// Raised by embed_all; `index` is the first failing input position.
class BatchEmbedError : public std::runtime_error {
 public:
  BatchEmbedError(std::size_t index, const std::string& what)
      : std::runtime_error(what), index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

// Embeds every text; runs the per-text work in parallel, output order
// follows input order.
EmbeddingMatrix embed_all(const Embedder& embedder,
                          const std::vector<std::string>& texts);

}  // namespace knowrl

#endif  // KNOWRL_EMBEDDING_HPP_
