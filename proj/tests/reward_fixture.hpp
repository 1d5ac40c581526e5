// Twelve rollouts against one gold answer and a two-entry knowledge base,
// with totals worked out by hand for every preset.
#ifndef KNOWRL_TESTS_REWARD_FIXTURE_HPP_
#define KNOWRL_TESTS_REWARD_FIXTURE_HPP_

#include <array>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "knowrl/knowledge_base.hpp"
#include "knowrl/reward.hpp"

namespace knowrl::testing {

inline KnowledgeBase reward_fixture_kb() {
  std::istringstream in(
      R"({"title": "Armenia", "text": "Armenia is a country in Asia. Its capital is Yerevan."})" "\n"
      R"({"title": "Lake Sevan", "text": "Lake Sevan is the largest lake in the region."})" "\n");
  return ingest_dump(in, std::make_shared<HashingEmbedder>());
}

inline constexpr const char* kRewardFixtureGold = "Yerevan";

inline const std::array<const char*, 6> kRewardFixturePresets = {
    "knowrl", "format_only", "format_fact", "format_correct", "refusal_penalty", "truthrl"};

struct RewardRow {
  std::string text;
  bool format_valid;
  Verdict verdict;
  std::size_t m_facts;
  std::size_t supported;
  // Totals in kRewardFixturePresets order.
  std::array<double, 6> totals;
};

inline std::vector<RewardRow> reward_fixture_rows() {
  constexpr auto C = Verdict::kCorrect;
  constexpr auto R = Verdict::kRefusal;
  constexpr auto I = Verdict::kIncorrect;
  const double third = 1.0 / 3.0;
  return {
      {"<think>Armenia is in Asia. Yerevan is the capital.</think>\n<answer>Yerevan</answer>",
       true, C, 2, 2, {4, 1, 2, 3, 4, 1}},
      {"<think>Armenia is in Asia. Armenia borders Peru.</think><answer>yerevan.</answer>",
       true, C, 2, 1, {3.5, 1, 1.5, 3, 3.5, 1}},
      {"  <think>ok</think> <answer>Yerevan</answer>\n", true, C, 0, 0, {3, 1, 1, 3, 3, 1}},
      {"<think>Armenia is in Asia.</think><answer>I don't know.</answer>",
       true, R, 1, 1, {3, 1, 2, 2, 1, 0}},
      {"<think></think><answer>Not sure, sorry.</answer>", true, R, 0, 0, {2, 1, 1, 2, 0, 0}},
      {"<think>Armenia is in Europe.</think><answer>Gyumri</answer>",
       true, I, 1, 0, {0, 1, 1, 0, 0, -1}},
      {"<think>Hmm?</think><answer>Gyumri</answer>", true, I, 0, 0, {0, 1, 1, 0, 0, -1}},
      {"<answer>Yerevan</answer>\n<think>Armenia is in Asia.</think>",
       false, C, 1, 1, {2, -1, 0, 1, 2, 1}},
      {"<think>Armenia is in Asia.<answer>Yerevan</answer>", false, C, 0, 0, {1, -1, -1, 1, 1, 1}},
      {"<think>x</think><answer>I do not know</answer> trailing", false, R, 0, 0,
       {0, -1, -1, 0, -2, 0}},
      {"<answer>Tbilisi</answer><think>Armenia is in Asia. Armenia borders Peru. Tbilisi is "
       "the capital.</think>",
       false, I, 3, 1, {-1.0 + -1.0 + third, -1, -1.0 + third, -2, -1.0 + -1.0 + third, -1}},
      {"Yerevan", false, I, 0, 0, {-2, -1, -1, -2, -2, -1}},
  };
}

}  // namespace knowrl::testing

#endif  // KNOWRL_TESTS_REWARD_FIXTURE_HPP_
