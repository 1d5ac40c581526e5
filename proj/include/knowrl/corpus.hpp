#ifndef KNOWRL_CORPUS_HPP_
#define KNOWRL_CORPUS_HPP_

#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "knowrl/common.hpp"
#include "knowrl/embedding.hpp"
#include "knowrl/knowledge_base.hpp"
#include "knowrl/qa_item.hpp"
#include "knowrl/reward.hpp"

namespace knowrl {

// --- configuration and reporting --------------------------------------------

struct CurationStages {
  bool multi_answer = true;
  bool question_tone = true;
  bool easy_filter = true;
  bool exact_dedup = true;
  bool semantic_dedup = true;
  bool entropy = true;
  bool refinement = true;
  bool difficulty = true;
  bool knowledge_grounding = true;
  bool length = true;
};

struct CurationConfig {
  double semantic_threshold = 0.90;
  double entropy_keep_fraction = 0.8;
  std::size_t length_min = 300;
  std::size_t length_max = 700;
  CurationStages stages;

  // Throws ValidationError.
  void validate() const;
};

struct RemovedItem {
  std::string id;
  std::string reason;  // machine-readable code
  std::string detail;
  std::vector<std::string> stage_tags;  // stages the item had passed
};

struct StageOutcome {
  std::vector<QAItem> kept;
  std::vector<RemovedItem> removed;
};

struct StageReport {
  std::string stage;
  std::size_t input_count = 0;
  std::size_t output_count = 0;
  std::vector<RemovedItem> removed;
};

struct CurationReport {
  std::vector<StageReport> stages;

  // input == output + removed for every stage, and stages chain.
  bool consistent() const;
  nlohmann::json to_json() const;
};

// Stage failure; carries the stage name and the offending item.
class StageError : public Error {
 public:
  StageError(std::string stage, std::string item_id, const std::string& what)
      : Error("stage " + stage + " failed on item " + item_id + ": " + what),
        stage_(std::move(stage)),
        item_id_(std::move(item_id)) {}
  const std::string& stage() const { return stage_; }
  const std::string& item_id() const { return item_id_; }

 private:
  std::string stage_;
  std::string item_id_;
};

// --- corpus files ------------------------------------------------------------

// JSON-lines; keys id, question, answer (string, or array of strings),
// optional entities, source, long_answer.
std::vector<QAItem> read_corpus(std::istream& in);
std::vector<QAItem> read_corpus(const std::string& path);
nlohmann::json to_json(const QAItem& item);
void write_corpus(std::ostream& out, const std::vector<QAItem>& items);

// --- extractor response grammar ----------------------------------------------

struct ExtractorVerdict {
  bool accepted = false;
  std::string normalized_query;
  std::vector<std::string> entities;  // accepted: 1..2
  std::string reason;                 // rejected

  bool operator==(const ExtractorVerdict&) const = default;
};

inline constexpr std::size_t kMaxEntities = 2;

// Accepts
//   [Output:] Normalized Query: "<q>"
//   Entities: ["e1"(, "e2")]      or      REJECT (<reason>)
// with free whitespace around the parts. Errors carry a byte offset.
ExtractorVerdict parse_extractor_response(std::string_view response);
std::string render_extractor_verdict(const ExtractorVerdict& v);

// Prompt template with a {query} placeholder, read from the shipped asset.
std::string load_extractor_prompt(const std::string& path);
std::string render_extractor_prompt(std::string_view prompt_template, std::string_view query);
std::string default_extractor_prompt_path();

// --- clients -----------------------------------------------------------------

// One deterministic answer per question. Throws on failure.
class AnswerProvider {
 public:
  virtual ~AnswerProvider() = default;
  virtual std::string answer(const QAItem& item) const = 0;
};

class LookupAnswerProvider final : public AnswerProvider {
 public:
  explicit LookupAnswerProvider(std::map<std::string, std::string> by_id)
      : by_id_(std::move(by_id)) {}
  std::string answer(const QAItem& item) const override;

 private:
  std::map<std::string, std::string> by_id_;
};

// Raw model text for the refinement prompt.
class Extractor {
 public:
  virtual ~Extractor() = default;
  virtual std::string respond(const QAItem& item) const = 0;
};

class FixtureExtractor final : public Extractor {
 public:
  explicit FixtureExtractor(std::map<std::string, std::string> by_id)
      : by_id_(std::move(by_id)) {}
  std::string respond(const QAItem& item) const override;

 private:
  std::map<std::string, std::string> by_id_;
};

// id -> text from JSON-lines {"id": ..., <value_key>: ...}.
std::map<std::string, std::string> read_id_map(const std::string& path,
                                               const std::string& value_key);

using LengthFn = std::function<std::size_t(const QAItem&)>;
std::size_t long_answer_length(const QAItem& item);

struct CurationClients {
  const AnswerProvider* easy_answers = nullptr;    // weak model, drops easy items
  const Extractor* extractor = nullptr;
  const AnswerProvider* strong_answers = nullptr;  // difficulty filter
  const Judge* judge = nullptr;
  const Embedder* embedder = nullptr;
  const KnowledgeBase* kb = nullptr;
  LengthFn length_of = long_answer_length;
};

// --- stages ------------------------------------------------------------------

StageOutcome multi_answer_filter(const std::vector<QAItem>& items);
bool has_question_tone(std::string_view question);
StageOutcome question_tone_filter(const std::vector<QAItem>& items);

// Survivor per normalized question is the smallest id; survivors keep input order.
StageOutcome exact_dedup(const std::vector<QAItem>& items);

std::vector<double> embed_text(std::string_view text, const Embedder& embedder);

// Edges where cosine > threshold; one smallest-id survivor per connected
// component. Removed items carry their representative in `detail`.
StageOutcome semantic_dedup(const std::vector<QAItem>& items, double threshold,
                            const Embedder& embedder);

// Shannon entropy (bits) of the whitespace-token distribution.
double entropy_of_text(std::string_view normalized_question);
double entropy_score(const QAItem& item);

// Keeps ceil(fraction * n) highest-entropy items, ties to the smaller id.
StageOutcome entropy_filter(const std::vector<QAItem>& items, double keep_fraction);

// Kept iff (verdict == Correct) == keep_if_correct. Provider failures are
// removed with reason "skipped".
StageOutcome first_attempt_filter(const std::vector<QAItem>& items,
                                  const AnswerProvider& provider, bool keep_if_correct,
                                  const Judge& judge);

StageOutcome refinement_filter(const std::vector<QAItem>& items, const Extractor& extractor);
StageOutcome knowledge_filter(const std::vector<QAItem>& items, const KnowledgeBase& kb);
StageOutcome length_filter(const std::vector<QAItem>& items, std::size_t min_len,
                           std::size_t max_len, const LengthFn& length_of = long_answer_length);

struct PipelineResult {
  std::vector<QAItem> items;
  CurationReport report;
};

// Stage order: multi_answer, question_tone, easy_filter, exact_dedup,
// semantic_dedup, entropy, refinement, difficulty, knowledge_grounding,
// length. Disabled stages are skipped and absent from the report.
PipelineResult run_pipeline(std::vector<QAItem> items, const CurationConfig& config,
                            const CurationClients& clients);

}  // namespace knowrl

#endif  // KNOWRL_CORPUS_HPP_
