#ifndef KNOWRL_REWARD_HPP_
#define KNOWRL_REWARD_HPP_

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "knowrl/common.hpp"
#include "knowrl/knowledge_base.hpp"

namespace knowrl {

enum class Verdict { kCorrect, kRefusal, kIncorrect };

std::string to_string(Verdict v);

// A rollout split into its reasoning and answer parts.
struct Rollout {
  std::string prompt_id;
  std::string raw_text;
  std::string think_text;
  std::string answer_text;
  bool format_valid = false;
  // Best-effort extraction results; both true whenever format_valid.
  bool think_extracted = false;
  bool answer_extracted = false;
};

// Strict grammar: ws <think>B1</think> ws <answer>B2</answer> ws, where the
// bodies contain none of the four tags. Invalid input is not an error.
Rollout parse_rollout(std::string_view text, std::string prompt_id = {});

int format_reward(const Rollout& rollout);

// --- model-role interfaces -------------------------------------------------
// Implementations must be safe to call concurrently; the defaults below are
// stateless.

class Judge {
 public:
  virtual ~Judge() = default;
  virtual Verdict judge(std::string_view answer, std::string_view gold,
                        std::span<const std::string> aliases) const = 0;
};

class Decomposer {
 public:
  virtual ~Decomposer() = default;
  virtual std::vector<std::string> decompose(std::string_view think_text) const = 0;
};

struct FactCheck {
  std::string statement;
  int verdict = 0;  // 0 or 1
  KnowledgeSet evidence;
};

class Verifier {
 public:
  virtual ~Verifier() = default;
  virtual FactCheck verify(std::string_view statement, const KnowledgeBase& kb) const = 0;
};

inline constexpr const char* kRefusalLexiconVersion = "refusal-lexicon-v1";
const std::vector<std::string>& refusal_lexicon();
const std::vector<std::string>& verifier_stopwords();

// Normalized exact match against gold/aliases -> Correct; otherwise any
// refusal-lexicon phrase (case-insensitive substring) -> Refusal;
// otherwise Incorrect.
class RuleJudge final : public Judge {
 public:
  Verdict judge(std::string_view answer, std::string_view gold,
                std::span<const std::string> aliases) const override;
};

// Sentences split at . ! ?, trimmed; drops questions and anything under
// three whitespace tokens.
class SentenceDecomposer final : public Decomposer {
 public:
  std::vector<std::string> decompose(std::string_view think_text) const override;
};

// Supported iff every non-stopword token of the statement occurs among the
// tokens of the top-k retrieved chunks.
class EvidenceOverlapVerifier final : public Verifier {
 public:
  explicit EvidenceOverlapVerifier(std::size_t k = 3) : k_(k) {}
  FactCheck verify(std::string_view statement, const KnowledgeBase& kb) const override;

 private:
  std::size_t k_;
};

std::vector<std::string> decompose_facts(std::string_view think_text,
                                         const Decomposer& decomposer);
FactCheck verify_fact(std::string_view statement, const KnowledgeBase& kb,
                      const Verifier& verifier);

// Mean of {0,1} verdicts; 0 for an empty list.
double fact_reward(std::span<const int> verdicts);

// --- presets ---------------------------------------------------------------

struct RewardPreset {
  std::string name;
  bool use_format = true;
  bool use_correct = true;
  bool use_fact = true;
  double correct_value = 2.0;
  double refusal_value = 1.0;
  double incorrect_value = -1.0;

  double correctness_value(Verdict v) const;
};

// knowrl, format_only, format_fact, format_correct, refusal_penalty, truthrl.
const std::vector<RewardPreset>& reward_presets();
const RewardPreset& preset_by_name(std::string_view name);

struct CorrectnessResult {
  Verdict verdict = Verdict::kIncorrect;
  double value = 0.0;
};

CorrectnessResult correctness_reward(std::string_view answer, std::string_view gold,
                                     std::span<const std::string> aliases,
                                     const Judge& judge, const RewardPreset& preset,
                                     std::string_view prompt_id = {});

struct RewardBreakdown {
  std::string prompt_id;
  std::string preset;
  bool format_valid = false;
  double r_format = 0.0;
  Verdict verdict = Verdict::kIncorrect;
  double r_correct = 0.0;
  std::size_t m_facts = 0;
  std::size_t supported_facts = 0;
  double r_fact = 0.0;
  double total = 0.0;

  bool operator==(const RewardBreakdown&) const = default;
};

nlohmann::json to_json(const RewardBreakdown& b);

struct RewardClients {
  const Judge* judge = nullptr;
  const Decomposer* decomposer = nullptr;
  const Verifier* verifier = nullptr;
};

// Rule-based clients with process lifetime.
RewardClients default_reward_clients();

// Components are computed independently (an invalid format does not gate the
// other terms) and summed according to the preset; disabled components are
// reported as 0.
RewardBreakdown total_reward(const Rollout& rollout, std::string_view gold,
                             std::span<const std::string> aliases,
                             const KnowledgeBase& kb, const RewardPreset& preset,
                             const RewardClients& clients);

}  // namespace knowrl

#endif  // KNOWRL_REWARD_HPP_
