#include "knowrl/knowledge_base.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "knowrl/common.hpp"
#include "knowrl/kernels.hpp"
#include "knowrl/text.hpp"

namespace knowrl {

namespace {

using json = nlohmann::json;

bool ends_sentence(const std::string& token) {
  std::size_t e = token.size();
  while (e > 0 && (token[e - 1] == '"' || token[e - 1] == '\'' || token[e - 1] == ')')) --e;
  return e > 0 && (token[e - 1] == '.' || token[e - 1] == '!' || token[e - 1] == '?');
}

std::string join(const std::vector<std::string>& tokens, std::size_t b, std::size_t e) {
  std::string out;
  for (std::size_t i = b; i < e; ++i) {
    if (i > b) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

std::vector<std::string> split_long_paragraph(std::string_view paragraph,
                                              std::size_t max_tokens) {
  const auto tokens = text::split_whitespace(paragraph);
  // Sentence spans [begin, end) over tokens.
  std::vector<std::pair<std::size_t, std::size_t>> sentences;
  std::size_t start = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (ends_sentence(tokens[i]) || i + 1 == tokens.size()) {
      sentences.emplace_back(start, i + 1);
      start = i + 1;
    }
  }
  std::vector<std::string> chunks;
  std::size_t chunk_begin = 0;
  std::size_t chunk_end = 0;
  auto flush = [&] {
    if (chunk_end > chunk_begin) chunks.push_back(join(tokens, chunk_begin, chunk_end));
    chunk_begin = chunk_end;
  };
  for (const auto& [b, e] : sentences) {
    if (e - b > max_tokens) {
      flush();
      for (std::size_t p = b; p < e; p += max_tokens) {
        chunks.push_back(join(tokens, p, std::min(e, p + max_tokens)));
      }
      chunk_begin = chunk_end = e;
      continue;
    }
    if (e - chunk_begin > max_tokens) flush();
    chunk_end = e;
  }
  flush();
  return chunks;
}

std::string entry_id_for(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "kb-%06zu", i);
  return buf;
}

}  // namespace

std::vector<std::string> chunk_body(std::string_view body, std::size_t max_tokens) {
  std::vector<std::string> paragraphs;
  std::string current;
  std::size_t pos = 0;
  while (pos <= body.size()) {
    const std::size_t nl = std::min(body.find('\n', pos), body.size());
    const auto line = body.substr(pos, nl - pos);
    if (text::trim(line).empty()) {
      if (!text::trim(current).empty()) paragraphs.emplace_back(text::trim(current));
      current.clear();
    } else {
      if (!current.empty()) current.push_back('\n');
      current.append(line);
    }
    pos = nl + 1;
  }
  if (!text::trim(current).empty()) paragraphs.emplace_back(text::trim(current));

  std::vector<std::string> chunks;
  for (const auto& p : paragraphs) {
    if (text::count_whitespace_tokens(p) <= max_tokens) {
      chunks.push_back(p);
    } else {
      for (auto& c : split_long_paragraph(p, max_tokens)) chunks.push_back(std::move(c));
    }
  }
  return chunks;
}

KnowledgeBase::KnowledgeBase(std::vector<KnowledgeEntry> entries,
                             std::shared_ptr<const Embedder> embedder)
    : KnowledgeBase(std::move(entries), std::move(embedder), std::nullopt) {}

KnowledgeBase::KnowledgeBase(std::vector<KnowledgeEntry> entries,
                             std::shared_ptr<const Embedder> embedder,
                             std::optional<EmbeddingMatrix> vectors)
    : entries_(std::move(entries)), embedder_(std::move(embedder)) {
  if (!embedder_) throw Error("knowledge base requires an embedder");
  std::vector<std::string> chunk_texts;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    auto& e = entries_[i];
    if (!by_id_.emplace(e.entry_id, i).second) {
      throw Error("duplicate knowledge entry id: " + e.entry_id);
    }
    folded_titles_.push_back(text::to_lower(e.title));
    if (e.chunks.empty()) e.chunks = chunk_body(e.body);
    for (std::size_t c = 0; c < e.chunks.size(); ++c) {
      if (text::trim(e.chunks[c]).empty()) {
        throw Error("empty chunk in knowledge entry " + e.entry_id);
      }
      chunk_refs_.push_back({i, c});
      chunk_texts.push_back(e.chunks[c]);
    }
  }
  if (vectors && vectors->rows() == chunk_texts.size() &&
      vectors->dim == embedder_->dimension()) {
    chunk_vectors_ = std::move(*vectors);
  } else {
    try {
      chunk_vectors_ = embed_all(*embedder_, chunk_texts);
    } catch (const BatchEmbedError& err) {
      const auto& ref = chunk_refs_[err.index()];
      throw Error("cannot embed chunk " + std::to_string(ref.chunk) + " of entry " +
                  entries_[ref.entry].entry_id + ": " + err.what());
    }
  }
}

const KnowledgeEntry* KnowledgeBase::find(std::string_view entry_id) const {
  auto it = by_id_.find(std::string(entry_id));
  return it == by_id_.end() ? nullptr : &entries_[it->second];
}

const std::string& KnowledgeBase::chunk_text(const KnowledgeHit& hit) const {
  const auto* e = find(hit.entry_id);
  if (e == nullptr || hit.chunk_index >= e->chunks.size()) {
    throw Error("dangling knowledge hit: " + hit.entry_id);
  }
  return e->chunks[hit.chunk_index];
}

std::vector<const KnowledgeEntry*> KnowledgeBase::match_entity(std::string_view entity) const {
  const std::string needle = text::to_lower(text::trim(entity));
  if (needle.empty()) return {};
  struct Candidate {
    bool exact;
    std::size_t index;
  };
  std::vector<Candidate> found;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& title = folded_titles_[i];
    if (title == needle) {
      found.push_back({true, i});
    } else if (title.find(needle) != std::string::npos) {
      found.push_back({false, i});
    }
  }
  std::sort(found.begin(), found.end(), [&](const Candidate& a, const Candidate& b) {
    if (a.exact != b.exact) return a.exact;
    const auto& ta = folded_titles_[a.index];
    const auto& tb = folded_titles_[b.index];
    if (ta.size() != tb.size()) return ta.size() < tb.size();
    if (ta != tb) return ta < tb;
    return entries_[a.index].entry_id < entries_[b.index].entry_id;
  });
  if (found.size() > kMaxEntityLinks) found.resize(kMaxEntityLinks);
  std::vector<const KnowledgeEntry*> out;
  for (const auto& c : found) out.push_back(&entries_[c.index]);
  return out;
}

KnowledgeSet KnowledgeBase::retrieve(std::string_view query, std::size_t k) const {
  if (k == 0) throw Error("retrieve: k must be >= 1");
  if (chunk_refs_.empty()) return {};
  const auto q = embedder_->embed(query);
  const auto scores = kernels::parallel::dot_scores(chunk_vectors_, q);
  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  auto better = [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    const auto& ea = entries_[chunk_refs_[a].entry].entry_id;
    const auto& eb = entries_[chunk_refs_[b].entry].entry_id;
    if (ea != eb) return ea < eb;
    return chunk_refs_[a].chunk < chunk_refs_[b].chunk;
  };
  const std::size_t take = std::min(k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take),
                    order.end(), better);
  KnowledgeSet out;
  for (std::size_t i = 0; i < take; ++i) {
    const auto& ref = chunk_refs_[order[i]];
    out.push_back({entries_[ref.entry].entry_id, ref.chunk, scores[order[i]]});
  }
  return out;
}

void KnowledgeBase::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "entries.jsonl");
    if (!out) throw Error("cannot write " + (dir / "entries.jsonl").string());
    for (const auto& e : entries_) {
      out << json{{"entry_id", e.entry_id},
                  {"title", e.title},
                  {"text", e.body},
                  {"chunks", e.chunks}}
                 .dump()
          << '\n';
    }
  }
  json index{{"format", "knowrl-kb-index"},
             {"version", kIndexFormatVersion},
             {"embedder", embedder_->id()},
             {"dim", chunk_vectors_.dim},
             {"chunks", chunk_refs_.size()},
             {"vectors", chunk_vectors_.data}};
  std::ofstream out(dir / "index.json");
  if (!out) throw Error("cannot write " + (dir / "index.json").string());
  out << index.dump() << '\n';
}

KnowledgeBase KnowledgeBase::load(const std::filesystem::path& dir,
                                  std::shared_ptr<const Embedder> embedder,
                                  bool* rebuilt) {
  std::ifstream in(dir / "entries.jsonl");
  if (!in) throw Error("cannot open " + (dir / "entries.jsonl").string());
  std::vector<KnowledgeEntry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      const auto j = json::parse(line);
      KnowledgeEntry e;
      e.entry_id = j.at("entry_id").get<std::string>();
      e.title = j.at("title").get<std::string>();
      e.body = j.at("text").get<std::string>();
      e.chunks = j.at("chunks").get<std::vector<std::string>>();
      entries.push_back(std::move(e));
    } catch (const json::exception& ex) {
      throw ParseError(std::string("entries.jsonl: ") + ex.what() + " line", line_no);
    }
  }

  std::optional<EmbeddingMatrix> vectors;
  std::ifstream idx(dir / "index.json");
  if (idx) {
    try {
      const auto j = json::parse(idx);
      std::size_t expected_chunks = 0;
      for (const auto& e : entries) expected_chunks += e.chunks.size();
      if (j.at("version").get<int>() == kIndexFormatVersion &&
          j.at("embedder").get<std::string>() == embedder->id() &&
          j.at("chunks").get<std::size_t>() == expected_chunks) {
        EmbeddingMatrix m;
        m.dim = j.at("dim").get<std::size_t>();
        m.data = j.at("vectors").get<std::vector<double>>();
        if (m.dim == embedder->dimension() && m.data.size() == expected_chunks * m.dim) {
          vectors = std::move(m);
        }
      }
    } catch (const json::exception&) {
      vectors.reset();
    }
  }
  if (rebuilt != nullptr) *rebuilt = !vectors.has_value();
  return KnowledgeBase(std::move(entries), std::move(embedder), std::move(vectors));
}

KnowledgeBase ingest_dump(std::istream& in, std::shared_ptr<const Embedder> embedder) {
  std::vector<KnowledgeEntry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    KnowledgeEntry e;
    try {
      const auto j = json::parse(line);
      e.title = j.at("title").get<std::string>();
      e.body = j.at("text").get<std::string>();
    } catch (const json::exception& ex) {
      throw ParseError(std::string("malformed dump line: ") + ex.what() + "; line", line_no);
    }
    e.entry_id = entry_id_for(entries.size());
    e.chunks = chunk_body(e.body);
    entries.push_back(std::move(e));
  }
  return KnowledgeBase(std::move(entries), std::move(embedder));
}

KnowledgeBase ingest_dump(const std::filesystem::path& path,
                          std::shared_ptr<const Embedder> embedder) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open dump " + path.string());
  return ingest_dump(in, std::move(embedder));
}

KnowledgeSet retrieve_relevant(const KnowledgeBase& kb, std::string_view query,
                               std::size_t k) {
  return kb.retrieve(query, k);
}

AttachResult attach_knowledge(const QAItem& item, const KnowledgeBase& kb) {
  AttachResult r;
  r.item = item;
  if (item.entities.empty()) {
    r.reason = "no entities";
    return r;
  }
  std::vector<std::string> refs;
  for (const auto& entity : item.entities) {
    const auto matches = kb.match_entity(entity);
    if (matches.empty()) {
      r.reason = "unmatched entity: " + entity;
      return r;
    }
    for (const auto* m : matches) {
      if (std::find(refs.begin(), refs.end(), m->entry_id) == refs.end()) {
        refs.push_back(m->entry_id);
      }
    }
  }
  r.kept = true;
  r.item.knowledge_refs = std::move(refs);
  return r;
}

}  // namespace knowrl
