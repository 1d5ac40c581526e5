#include "knowrl/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <unordered_map>

#include "knowrl/kernels.hpp"
#include "knowrl/text.hpp"

namespace knowrl {

namespace {

using json = nlohmann::json;

std::vector<std::string> tags_of(const QAItem& item) {
  return {item.stage_tags.begin(), item.stage_tags.end()};
}

RemovedItem removed(const QAItem& item, std::string reason, std::string detail = {}) {
  return {item.id, std::move(reason), std::move(detail), tags_of(item)};
}

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<std::size_t> parent_;
};

const std::vector<std::string>& question_openers() {
  static const std::vector<std::string> kOpeners = {
      "who",   "what",  "when",  "where", "which", "why",    "how",   "whom",
      "whose", "is",    "are",   "was",   "were",  "do",     "does",  "did",
      "can",   "could", "will",  "would", "should", "has",   "have",  "had",
      "may",   "might", "must",  "shall", "am"};
  return kOpeners;
}

}  // namespace

void CurationConfig::validate() const {
  if (!(semantic_threshold > 0.0 && semantic_threshold <= 1.0)) {
    throw ValidationError("semantic_threshold must be in (0,1]");
  }
  if (!(entropy_keep_fraction > 0.0 && entropy_keep_fraction <= 1.0)) {
    throw ValidationError("entropy_keep_fraction must be in (0,1]");
  }
  if (length_min > length_max) throw ValidationError("length_min must be <= length_max");
}

bool CurationReport::consistent() const {
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const auto& s = stages[i];
    if (s.input_count != s.output_count + s.removed.size()) return false;
    if (i > 0 && stages[i - 1].output_count != s.input_count) return false;
  }
  return true;
}

nlohmann::json CurationReport::to_json() const {
  json out = json::array();
  for (const auto& s : stages) {
    json removed_items = json::array();
    for (const auto& r : s.removed) {
      removed_items.push_back({{"id", r.id},
                               {"reason", r.reason},
                               {"detail", r.detail},
                               {"stage_tags", r.stage_tags}});
    }
    out.push_back({{"stage", s.stage},
                   {"input_count", s.input_count},
                   {"output_count", s.output_count},
                   {"removed", removed_items}});
  }
  return {{"stages", out}};
}

std::vector<QAItem> read_corpus(std::istream& in) {
  std::vector<QAItem> items;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      const auto j = json::parse(line);
      QAItem item;
      const auto& id = j.at("id");
      item.id = id.is_string() ? id.get<std::string>() : id.dump();
      item.question = j.at("question").get<std::string>();
      const auto& ans = j.at("answer");
      if (ans.is_array()) {
        auto all = ans.get<std::vector<std::string>>();
        if (all.empty()) throw ParseError("empty answer list on line", line_no);
        item.answer = all.front();
        item.extra_answers.assign(all.begin() + 1, all.end());
      } else {
        item.answer = ans.get<std::string>();
      }
      if (j.contains("entities")) item.entities = j["entities"].get<std::vector<std::string>>();
      if (j.contains("source")) item.source = j["source"].get<std::string>();
      if (j.contains("long_answer")) item.long_answer = j["long_answer"].get<std::string>();
      item.normalized_question = text::normalize_question(item.question);
      items.push_back(std::move(item));
    } catch (const json::exception& e) {
      throw ParseError(std::string("malformed corpus line: ") + e.what() + "; line", line_no);
    }
  }
  return items;
}

std::vector<QAItem> read_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open corpus " + path);
  return read_corpus(in);
}

nlohmann::json to_json(const QAItem& item) {
  json answer = item.extra_answers.empty() ? json(item.answer) : json::array();
  if (!item.extra_answers.empty()) {
    answer.push_back(item.answer);
    for (const auto& a : item.extra_answers) answer.push_back(a);
  }
  return {{"id", item.id},
          {"question", item.question},
          {"normalized_question", item.normalized_question},
          {"answer", answer},
          {"entities", item.entities},
          {"knowledge_refs", item.knowledge_refs},
          {"entropy", item.entropy},
          {"stage_tags", item.stage_tags},
          {"source", item.source}};
}

void write_corpus(std::ostream& out, const std::vector<QAItem>& items) {
  for (const auto& item : items) out << to_json(item).dump() << '\n';
}

std::string LookupAnswerProvider::answer(const QAItem& item) const {
  auto it = by_id_.find(item.id);
  if (it == by_id_.end()) throw Error("no answer recorded for " + item.id);
  return it->second;
}

std::string FixtureExtractor::respond(const QAItem& item) const {
  auto it = by_id_.find(item.id);
  if (it == by_id_.end()) throw Error("no extractor response recorded for " + item.id);
  return it->second;
}

std::map<std::string, std::string> read_id_map(const std::string& path,
                                               const std::string& value_key) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      const auto j = json::parse(line);
      const auto& id = j.at("id");
      out[id.is_string() ? id.get<std::string>() : id.dump()] =
          j.at(value_key).get<std::string>();
    } catch (const json::exception& e) {
      throw ParseError(path + ": " + e.what() + "; line", line_no);
    }
  }
  return out;
}

std::size_t long_answer_length(const QAItem& item) {
  return text::count_whitespace_tokens(item.long_answer);
}

StageOutcome multi_answer_filter(const std::vector<QAItem>& items) {
  StageOutcome out;
  for (const auto& item : items) {
    if (item.extra_answers.empty()) {
      out.kept.push_back(item);
    } else {
      out.removed.push_back(removed(item, "multiple_answers",
                                    std::to_string(item.extra_answers.size() + 1) + " answers"));
    }
  }
  return out;
}

bool has_question_tone(std::string_view question) {
  const auto trimmed = text::trim(question);
  if (!trimmed.empty() && trimmed.back() == '?') return true;
  const auto tokens = text::word_tokens(trimmed);
  if (tokens.empty()) return false;
  const auto& openers = question_openers();
  return std::find(openers.begin(), openers.end(), tokens.front()) != openers.end();
}

StageOutcome question_tone_filter(const std::vector<QAItem>& items) {
  StageOutcome out;
  for (const auto& item : items) {
    if (has_question_tone(item.question)) {
      out.kept.push_back(item);
    } else {
      out.removed.push_back(removed(item, "no_question_tone"));
    }
  }
  return out;
}

StageOutcome exact_dedup(const std::vector<QAItem>& items) {
  std::unordered_map<std::string, std::size_t> winner;  // normalized -> index
  std::vector<std::string> keys(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    keys[i] = text::normalize_question(items[i].question);
    auto [it, inserted] = winner.emplace(keys[i], i);
    if (!inserted && items[i].id < items[it->second].id) it->second = i;
  }
  StageOutcome out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const std::size_t w = winner.at(keys[i]);
    if (w == i) {
      out.kept.push_back(items[i]);
    } else {
      out.removed.push_back(removed(items[i], "exact_duplicate", items[w].id));
    }
  }
  return out;
}

std::vector<double> embed_text(std::string_view text, const Embedder& embedder) {
  return embedder.embed(text);
}

StageOutcome semantic_dedup(const std::vector<QAItem>& items, double threshold,
                            const Embedder& embedder) {
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw ValidationError("semantic threshold must be in (0,1]");
  }
  std::vector<std::string> texts;
  texts.reserve(items.size());
  for (const auto& item : items) {
    texts.push_back(item.normalized_question.empty()
                        ? text::normalize_question(item.question)
                        : item.normalized_question);
  }
  EmbeddingMatrix vectors;
  try {
    vectors = embed_all(embedder, texts);
  } catch (const BatchEmbedError& e) {
    throw StageError("semantic_dedup", items[e.index()].id, e.what());
  }
  DisjointSets sets(items.size());
  for (const auto& [i, j] : kernels::parallel::similar_pairs(vectors, threshold)) {
    sets.unite(i, j);
  }
  // Representative: smallest id in each component.
  std::unordered_map<std::size_t, std::size_t> rep;
  for (std::size_t i = 0; i < items.size(); ++i) {
    auto [it, inserted] = rep.emplace(sets.find(i), i);
    if (!inserted && items[i].id < items[it->second].id) it->second = i;
  }
  StageOutcome out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const std::size_t r = rep.at(sets.find(i));
    if (r == i) {
      out.kept.push_back(items[i]);
    } else {
      out.removed.push_back(removed(items[i], "semantic_duplicate", items[r].id));
    }
  }
  return out;
}

double entropy_of_text(std::string_view normalized_question) {
  const auto tokens = text::split_whitespace(normalized_question);
  if (tokens.empty()) throw Error("entropy of an empty question");
  std::map<std::string, std::size_t> counts;
  for (const auto& t : tokens) ++counts[t];
  const double n = static_cast<double>(tokens.size());
  double h = 0.0;
  for (const auto& [tok, c] : counts) {
    const double p = static_cast<double>(c) / n;
    h -= p * std::log2(p);
  }
  return h == 0.0 ? 0.0 : h;  // avoid -0
}

double entropy_score(const QAItem& item) {
  const auto& q = item.normalized_question.empty() ? text::normalize_question(item.question)
                                                   : item.normalized_question;
  return entropy_of_text(q);
}

StageOutcome entropy_filter(const std::vector<QAItem>& items, double keep_fraction) {
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) {
    throw ValidationError("keep_fraction must be in (0,1]");
  }
  StageOutcome out;
  if (items.empty()) return out;
  std::vector<double> scores(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    try {
      scores[i] = entropy_score(items[i]);
    } catch (const Error& e) {
      throw StageError("entropy", items[i].id, e.what());
    }
  }
  const double raw = keep_fraction * static_cast<double>(items.size());
  auto keep = static_cast<std::size_t>(std::ceil(raw - 1e-9));
  keep = std::clamp<std::size_t>(keep, 1, items.size());

  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return items[a].id < items[b].id;
  });
  std::vector<bool> survives(items.size(), false);
  for (std::size_t r = 0; r < keep; ++r) survives[order[r]] = true;
  for (std::size_t i = 0; i < items.size(); ++i) {
    QAItem item = items[i];
    item.entropy = scores[i];
    if (survives[i]) {
      out.kept.push_back(std::move(item));
    } else {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.6f", scores[i]);
      out.removed.push_back(removed(item, "low_entropy", buf));
    }
  }
  return out;
}

StageOutcome first_attempt_filter(const std::vector<QAItem>& items,
                                  const AnswerProvider& provider, bool keep_if_correct,
                                  const Judge& judge) {
  StageOutcome out;
  for (const auto& item : items) {
    std::string answer;
    try {
      answer = provider.answer(item);
    } catch (const std::exception& e) {
      out.removed.push_back(removed(item, "skipped", e.what()));
      continue;
    }
    const Verdict v = judge.judge(answer, item.answer, item.extra_answers);
    const bool correct = v == Verdict::kCorrect;
    if (correct == keep_if_correct) {
      out.kept.push_back(item);
    } else {
      out.removed.push_back(removed(item, correct ? "answered_correctly" : "not_answered_correctly",
                                    to_string(v)));
    }
  }
  return out;
}

StageOutcome refinement_filter(const std::vector<QAItem>& items, const Extractor& extractor) {
  StageOutcome out;
  for (const auto& item : items) {
    std::string response;
    try {
      response = extractor.respond(item);
    } catch (const std::exception& e) {
      out.removed.push_back(removed(item, "skipped", e.what()));
      continue;
    }
    ExtractorVerdict v;
    try {
      v = parse_extractor_response(response);
    } catch (const ParseError& e) {
      throw StageError("refinement", item.id, e.what());
    }
    if (!v.accepted) {
      out.removed.push_back(removed(item, "rejected", v.reason));
      continue;
    }
    QAItem refined = item;
    refined.question = v.normalized_query;
    refined.normalized_question = text::normalize_question(v.normalized_query);
    refined.entities = v.entities;
    out.kept.push_back(std::move(refined));
  }
  return out;
}

StageOutcome knowledge_filter(const std::vector<QAItem>& items, const KnowledgeBase& kb) {
  StageOutcome out;
  for (const auto& item : items) {
    auto r = attach_knowledge(item, kb);
    if (r.kept) {
      out.kept.push_back(std::move(r.item));
    } else {
      out.removed.push_back(removed(item, "ungrounded", r.reason));
    }
  }
  return out;
}

StageOutcome length_filter(const std::vector<QAItem>& items, std::size_t min_len,
                           std::size_t max_len, const LengthFn& length_of) {
  StageOutcome out;
  for (const auto& item : items) {
    const std::size_t len = length_of(item);
    if (len >= min_len && len <= max_len) {
      out.kept.push_back(item);
    } else {
      out.removed.push_back(removed(item, "length_out_of_range", std::to_string(len)));
    }
  }
  return out;
}

PipelineResult run_pipeline(std::vector<QAItem> items, const CurationConfig& config,
                            const CurationClients& clients) {
  config.validate();
  for (auto& item : items) {
    if (item.normalized_question.empty()) {
      item.normalized_question = text::normalize_question(item.question);
    }
  }
  PipelineResult result;
  auto apply = [&](const std::string& stage, auto&& fn) {
    StageReport rep;
    rep.stage = stage;
    rep.input_count = items.size();
    StageOutcome outcome;
    try {
      outcome = fn(items);
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(stage, "-", e.what());
    }
    for (auto& item : outcome.kept) item.stage_tags.insert(stage);
    rep.output_count = outcome.kept.size();
    rep.removed = std::move(outcome.removed);
    result.report.stages.push_back(std::move(rep));
    items = std::move(outcome.kept);
  };
  auto require = [](const void* client, const char* what) {
    if (client == nullptr) throw ValidationError(std::string("curation stage needs ") + what);
  };
  const auto& st = config.stages;

  if (st.multi_answer) apply("multi_answer", multi_answer_filter);
  if (st.question_tone) apply("question_tone", question_tone_filter);
  if (st.easy_filter) {
    require(clients.easy_answers, "an easy-answer provider");
    require(clients.judge, "a judge");
    apply("easy_filter", [&](const auto& in) {
      return first_attempt_filter(in, *clients.easy_answers, false, *clients.judge);
    });
  }
  if (st.exact_dedup) apply("exact_dedup", exact_dedup);
  if (st.semantic_dedup) {
    require(clients.embedder, "an embedder");
    apply("semantic_dedup", [&](const auto& in) {
      return semantic_dedup(in, config.semantic_threshold, *clients.embedder);
    });
  }
  if (st.entropy) {
    apply("entropy", [&](const auto& in) { return entropy_filter(in, config.entropy_keep_fraction); });
  }
  if (st.refinement) {
    require(clients.extractor, "an extractor");
    apply("refinement", [&](const auto& in) { return refinement_filter(in, *clients.extractor); });
  }
  if (st.difficulty) {
    require(clients.strong_answers, "a strong-answer provider");
    require(clients.judge, "a judge");
    apply("difficulty", [&](const auto& in) {
      return first_attempt_filter(in, *clients.strong_answers, true, *clients.judge);
    });
  }
  if (st.knowledge_grounding) {
    require(clients.kb, "a knowledge base");
    apply("knowledge_grounding", [&](const auto& in) { return knowledge_filter(in, *clients.kb); });
  }
  if (st.length) {
    const LengthFn length_of = clients.length_of ? clients.length_of : LengthFn(long_answer_length);
    apply("length", [&](const auto& in) {
      return length_filter(in, config.length_min, config.length_max, length_of);
    });
  }
  result.items = std::move(items);
  return result;
}

}  // namespace knowrl
