#ifndef KNOWRL_KNOWLEDGE_BASE_HPP_
#define KNOWRL_KNOWLEDGE_BASE_HPP_

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "knowrl/embedding.hpp"
#include "knowrl/qa_item.hpp"

namespace knowrl {

struct KnowledgeEntry {
  std::string entry_id;
  std::string title;
  std::string body;
  std::vector<std::string> chunks;
};

struct KnowledgeHit {
  std::string entry_id;
  std::size_t chunk_index = 0;
  double score = 0.0;

  bool operator==(const KnowledgeHit&) const = default;
};

// Ordered by nonincreasing score; ties by (entry_id, chunk_index).
using KnowledgeSet = std::vector<KnowledgeHit>;

inline constexpr std::size_t kMaxChunkTokens = 200;
inline constexpr std::size_t kMaxEntityLinks = 3;
inline constexpr int kIndexFormatVersion = 2;

// Paragraphs (blank-line separated) become chunks; paragraphs longer than
// `max_tokens` whitespace tokens are cut at sentence ends, and a single
// sentence longer than that is cut at token boundaries.
std::vector<std::string> chunk_body(std::string_view body,
                                    std::size_t max_tokens = kMaxChunkTokens);

// Immutable after construction; safe to share across threads.
class KnowledgeBase {
 public:
  KnowledgeBase(std::vector<KnowledgeEntry> entries,
                std::shared_ptr<const Embedder> embedder);

  std::size_t size() const { return entries_.size(); }
  std::size_t chunk_count() const { return chunk_refs_.size(); }
  const std::vector<KnowledgeEntry>& entries() const { return entries_; }
  const KnowledgeEntry* find(std::string_view entry_id) const;
  const std::string& chunk_text(const KnowledgeHit& hit) const;
  const Embedder& embedder() const { return *embedder_; }
  std::shared_ptr<const Embedder> embedder_ptr() const { return embedder_; }
  const EmbeddingMatrix& chunk_embeddings() const { return chunk_vectors_; }

  // Case-insensitive title match: equal, or entity is a substring of the
  // title. Exact matches first, then shorter titles, then lexicographic;
  // at most kMaxEntityLinks results.
  std::vector<const KnowledgeEntry*> match_entity(std::string_view entity) const;

  // Exact top-k by cosine against every chunk.
  KnowledgeSet retrieve(std::string_view query, std::size_t k) const;

  // entries.jsonl + index.json (version-stamped chunk vectors).
  void save(const std::filesystem::path& dir) const;
  // Rebuilds the vectors when the stored index version, embedder id or
  // chunk count disagree; `rebuilt` reports which path was taken.
  static KnowledgeBase load(const std::filesystem::path& dir,
                            std::shared_ptr<const Embedder> embedder,
                            bool* rebuilt = nullptr);

 private:
  struct ChunkRef {
    std::size_t entry = 0;
    std::size_t chunk = 0;
  };

  KnowledgeBase(std::vector<KnowledgeEntry> entries,
                std::shared_ptr<const Embedder> embedder,
                std::optional<EmbeddingMatrix> vectors);

  std::vector<KnowledgeEntry> entries_;
  std::shared_ptr<const Embedder> embedder_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::vector<std::string> folded_titles_;
  std::vector<ChunkRef> chunk_refs_;
  EmbeddingMatrix chunk_vectors_;
};

// JSON-lines dump with keys title, text. Ids are "kb-NNNNNN" in file order.
// Malformed lines raise ParseError carrying the 1-based line number.
KnowledgeBase ingest_dump(std::istream& in, std::shared_ptr<const Embedder> embedder);
KnowledgeBase ingest_dump(const std::filesystem::path& path,
                          std::shared_ptr<const Embedder> embedder);

KnowledgeSet retrieve_relevant(const KnowledgeBase& kb, std::string_view query,
                               std::size_t k);

struct AttachResult {
  bool kept = false;
  QAItem item;
  std::string reason;  // set when !kept
};

// Every entity must match at least one entry; refs are the union (in match
// order, no duplicates) of up to three entries per entity.
AttachResult attach_knowledge(const QAItem& item, const KnowledgeBase& kb);

}  // namespace knowrl

#endif  // KNOWRL_KNOWLEDGE_BASE_HPP_
