#include "knowrl/reward.hpp"

#include <algorithm>
#include <array>
#include <unordered_set>

#include "knowrl/common.hpp"
#include "knowrl/text.hpp"

namespace knowrl {

namespace {

constexpr std::string_view kThinkOpen = "<think>";
constexpr std::string_view kThinkClose = "</think>";
constexpr std::string_view kAnswerOpen = "<answer>";
constexpr std::string_view kAnswerClose = "</answer>";

bool has_any_tag(std::string_view body) {
  for (auto tag : {kThinkOpen, kThinkClose, kAnswerOpen, kAnswerClose}) {
    if (body.find(tag) != std::string_view::npos) return true;
  }
  return false;
}

std::size_t skip_space(std::string_view s, std::size_t i) {
  while (i < s.size() && text::is_space(s[i])) ++i;
  return i;
}

// Body between the first `open` and the first `close` after it.
bool extract(std::string_view s, std::string_view open, std::string_view close,
             std::string& body) {
  const auto b = s.find(open);
  if (b == std::string_view::npos) return false;
  const auto e = s.find(close, b + open.size());
  if (e == std::string_view::npos) return false;
  body = std::string(s.substr(b + open.size(), e - b - open.size()));
  return true;
}

bool strict_parse(std::string_view s, std::string& think, std::string& answer) {
  std::size_t i = skip_space(s, 0);
  if (s.substr(i, kThinkOpen.size()) != kThinkOpen) return false;
  i += kThinkOpen.size();
  const auto think_end = s.find(kThinkClose, i);
  if (think_end == std::string_view::npos) return false;
  const auto think_body = s.substr(i, think_end - i);
  if (has_any_tag(think_body)) return false;
  i = skip_space(s, think_end + kThinkClose.size());
  if (s.substr(i, kAnswerOpen.size()) != kAnswerOpen) return false;
  i += kAnswerOpen.size();
  const auto answer_end = s.find(kAnswerClose, i);
  if (answer_end == std::string_view::npos) return false;
  const auto answer_body = s.substr(i, answer_end - i);
  if (has_any_tag(answer_body)) return false;
  if (skip_space(s, answer_end + kAnswerClose.size()) != s.size()) return false;
  think = std::string(think_body);
  answer = std::string(answer_body);
  return true;
}

}  // namespace

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::kCorrect:
      return "correct";
    case Verdict::kRefusal:
      return "refusal";
    case Verdict::kIncorrect:
      return "incorrect";
  }
  return "incorrect";
}

Rollout parse_rollout(std::string_view text, std::string prompt_id) {
  Rollout r;
  r.prompt_id = std::move(prompt_id);
  r.raw_text = std::string(text);
  if (strict_parse(text, r.think_text, r.answer_text)) {
    r.format_valid = r.think_extracted = r.answer_extracted = true;
    return r;
  }
  r.think_extracted = extract(text, kThinkOpen, kThinkClose, r.think_text);
  r.answer_extracted = extract(text, kAnswerOpen, kAnswerClose, r.answer_text);
  return r;
}

int format_reward(const Rollout& rollout) { return rollout.format_valid ? 1 : -1; }

const std::vector<std::string>& refusal_lexicon() {
  static const std::vector<std::string> kLexicon = {
      "i don't know", "i do not know", "cannot answer", "not sure", "unsure"};
  return kLexicon;
}

const std::vector<std::string>& verifier_stopwords() {
  static const std::vector<std::string> kStopwords = {
      "a",    "an",    "the",   "is",    "are",   "was",  "were",  "be",   "been",  "being",
      "of",   "in",    "on",    "at",    "to",    "for",  "from",  "by",   "with",  "about",
      "and",  "or",    "but",   "as",    "that",  "this", "these", "those", "it",   "its",
      "he",   "she",   "they",  "his",   "her",   "their", "which", "who", "what",  "when",
      "where", "how",  "there", "has",   "have",  "had",  "do",    "does", "did",   "also"};
  return kStopwords;
}

Verdict RuleJudge::judge(std::string_view answer, std::string_view gold,
                         std::span<const std::string> aliases) const {
  const std::string a = text::normalize_question(answer);
  if (a == text::normalize_question(gold)) return Verdict::kCorrect;
  for (const auto& alias : aliases) {
    if (a == text::normalize_question(alias)) return Verdict::kCorrect;
  }
  // The lexicon contains apostrophes; compare on the lowered raw text.
  const std::string lowered = text::to_lower(answer);
  for (const auto& phrase : refusal_lexicon()) {
    if (lowered.find(phrase) != std::string::npos) return Verdict::kRefusal;
  }
  return Verdict::kIncorrect;
}

std::vector<std::string> SentenceDecomposer::decompose(std::string_view think_text) const {
  std::vector<std::string> facts;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= think_text.size(); ++i) {
    const bool at_end = i == think_text.size();
    const char c = at_end ? '\0' : think_text[i];
    if (!at_end && c != '.' && c != '!' && c != '?') continue;
    const auto segment = text::trim(think_text.substr(start, i - start));
    start = i + 1;
    if (c == '?') continue;
    if (text::count_whitespace_tokens(segment) < 3) continue;
    facts.emplace_back(segment);
  }
  return facts;
}

FactCheck EvidenceOverlapVerifier::verify(std::string_view statement,
                                          const KnowledgeBase& kb) const {
  FactCheck fc;
  fc.statement = std::string(statement);
  if (kb.chunk_count() == 0) return fc;
  try {
    fc.evidence = kb.retrieve(statement, k_);
  } catch (const Error&) {
    // Nothing embeddable in the statement: unsupported.
    return fc;
  }
  static const std::unordered_set<std::string> kStop(verifier_stopwords().begin(),
                                                     verifier_stopwords().end());
  std::unordered_set<std::string> evidence_tokens;
  for (const auto& hit : fc.evidence) {
    for (auto& t : text::word_tokens(kb.chunk_text(hit))) evidence_tokens.insert(std::move(t));
  }
  std::size_t content = 0;
  for (const auto& t : text::word_tokens(statement)) {
    if (kStop.count(t) != 0) continue;
    ++content;
    if (evidence_tokens.count(t) == 0) return fc;
  }
  fc.verdict = content > 0 ? 1 : 0;
  return fc;
}

std::vector<std::string> decompose_facts(std::string_view think_text,
                                         const Decomposer& decomposer) {
  return decomposer.decompose(think_text);
}

FactCheck verify_fact(std::string_view statement, const KnowledgeBase& kb,
                      const Verifier& verifier) {
  return verifier.verify(statement, kb);
}

double fact_reward(std::span<const int> verdicts) {
  if (verdicts.empty()) return 0.0;
  double s = 0.0;
  for (int v : verdicts) s += v;
  return s / static_cast<double>(verdicts.size());
}

double RewardPreset::correctness_value(Verdict v) const {
  if (!use_correct) return 0.0;
  switch (v) {
    case Verdict::kCorrect:
      return correct_value;
    case Verdict::kRefusal:
      return refusal_value;
    case Verdict::kIncorrect:
      return incorrect_value;
  }
  return incorrect_value;
}

const std::vector<RewardPreset>& reward_presets() {
  static const std::vector<RewardPreset> kPresets = {
      {"knowrl", true, true, true, 2.0, 1.0, -1.0},
      {"format_only", true, false, false, 0.0, 0.0, 0.0},
      {"format_fact", true, false, true, 0.0, 0.0, 0.0},
      {"format_correct", true, true, false, 2.0, 1.0, -1.0},
      {"refusal_penalty", true, true, true, 2.0, -1.0, -1.0},
      {"truthrl", false, true, false, 1.0, 0.0, -1.0},
  };
  return kPresets;
}

const RewardPreset& preset_by_name(std::string_view name) {
  for (const auto& p : reward_presets()) {
    if (p.name == name) return p;
  }
  throw ValidationError("unknown reward preset: " + std::string(name));
}

CorrectnessResult correctness_reward(std::string_view answer, std::string_view gold,
                                     std::span<const std::string> aliases,
                                     const Judge& judge, const RewardPreset& preset,
                                     std::string_view prompt_id) {
  CorrectnessResult r;
  try {
    r.verdict = judge.judge(answer, gold, aliases);
  } catch (const std::exception& e) {
    throw Error("judge failed for prompt " + std::string(prompt_id) + ": " + e.what());
  }
  r.value = preset.correctness_value(r.verdict);
  return r;
}

nlohmann::json to_json(const RewardBreakdown& b) {
  return {{"prompt_id", b.prompt_id},       {"preset", b.preset},
          {"format_valid", b.format_valid}, {"r_format", b.r_format},
          {"verdict", to_string(b.verdict)}, {"r_correct", b.r_correct},
          {"m_facts", b.m_facts},           {"supported_facts", b.supported_facts},
          {"r_fact", b.r_fact},             {"total", b.total}};
}

RewardClients default_reward_clients() {
  static const RuleJudge kJudge;
  static const SentenceDecomposer kDecomposer;
  static const EvidenceOverlapVerifier kVerifier(3);
  return {&kJudge, &kDecomposer, &kVerifier};
}

RewardBreakdown total_reward(const Rollout& rollout, std::string_view gold,
                             std::span<const std::string> aliases,
                             const KnowledgeBase& kb, const RewardPreset& preset,
                             const RewardClients& clients) {
  if (clients.judge == nullptr || clients.decomposer == nullptr ||
      clients.verifier == nullptr) {
    throw Error("total_reward: missing reward client");
  }
  RewardBreakdown b;
  b.prompt_id = rollout.prompt_id;
  b.preset = preset.name;
  b.format_valid = rollout.format_valid;
  b.r_format = preset.use_format ? format_reward(rollout) : 0.0;

  const auto correctness = correctness_reward(rollout.answer_text, gold, aliases,
                                              *clients.judge, preset, rollout.prompt_id);
  b.verdict = correctness.verdict;
  b.r_correct = correctness.value;

  // Facts come from the think body whenever both bodies were recovered.
  if (rollout.think_extracted && rollout.answer_extracted) {
    std::vector<int> verdicts;
    try {
      for (const auto& s : decompose_facts(rollout.think_text, *clients.decomposer)) {
        verdicts.push_back(verify_fact(s, kb, *clients.verifier).verdict);
      }
    } catch (const std::exception& e) {
      throw Error("fact verification failed for prompt " + rollout.prompt_id + ": " +
                  e.what());
    }
    b.m_facts = verdicts.size();
    b.supported_facts = static_cast<std::size_t>(std::count(verdicts.begin(), verdicts.end(), 1));
    if (preset.use_fact) b.r_fact = fact_reward(verdicts);
  }
  b.total = b.r_format + b.r_correct + b.r_fact;
  return b;
}

}  // namespace knowrl
