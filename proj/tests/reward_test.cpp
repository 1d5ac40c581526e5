#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "knowrl/reward.hpp"
#include "reward_fixture.hpp"

namespace knowrl {
namespace {

TEST(ParseRollout, Grammar) {
  const auto ok = parse_rollout("<think>a</think><answer>b</answer>");
  EXPECT_TRUE(ok.format_valid);
  EXPECT_EQ(ok.think_text, "a");
  EXPECT_EQ(ok.answer_text, "b");
  EXPECT_FALSE(parse_rollout("<answer>b</answer><think>a</think>").format_valid);
  EXPECT_FALSE(parse_rollout("<think>a<think>b</think></think><answer>c</answer>").format_valid);
  EXPECT_TRUE(parse_rollout(" \n<think></think>\t<answer></answer>\n").format_valid);
  EXPECT_FALSE(parse_rollout("<think>a</think>x<answer>b</answer>").format_valid);
  EXPECT_FALSE(parse_rollout("").format_valid);
}

TEST(ParseRollout, BestEffortExtraction) {
  const auto swapped = parse_rollout("<answer>b</answer><think>a</think>", "p1");
  EXPECT_EQ(swapped.prompt_id, "p1");
  EXPECT_TRUE(swapped.think_extracted);
  EXPECT_TRUE(swapped.answer_extracted);
  EXPECT_EQ(swapped.answer_text, "b");
  const auto open = parse_rollout("<think>a<answer>b</answer>");
  EXPECT_FALSE(open.think_extracted);
  EXPECT_TRUE(open.answer_extracted);
}

TEST(FormatReward, PlusMinusOne) {
  EXPECT_EQ(format_reward(parse_rollout("<think>a</think><answer>b</answer>")), 1);
  EXPECT_EQ(format_reward(parse_rollout("<answer>b</answer>")), -1);
  EXPECT_EQ(format_reward(parse_rollout("<think></think><answer></answer>")), 1);
}

TEST(RuleJudge, Verdicts) {
  RuleJudge j;
  const std::vector<std::string> aliases = {"Erevan"};
  EXPECT_EQ(j.judge("  yerevan. ", "Yerevan", {}), Verdict::kCorrect);
  EXPECT_EQ(j.judge("Erevan", "Yerevan", aliases), Verdict::kCorrect);
  EXPECT_EQ(j.judge("I DON'T KNOW", "Yerevan", {}), Verdict::kRefusal);
  EXPECT_EQ(j.judge("I cannot answer that", "Yerevan", {}), Verdict::kRefusal);
  EXPECT_EQ(j.judge("Gyumri", "Yerevan", {}), Verdict::kIncorrect);
  EXPECT_EQ(j.judge("", "Yerevan", {}), Verdict::kIncorrect);
}

TEST(Decomposer, Sentences) {
  SentenceDecomposer d;
  EXPECT_EQ(d.decompose("Paris is in France. It is the capital.").size(), 2u);
  EXPECT_TRUE(d.decompose("Hmm?").empty());
  EXPECT_TRUE(d.decompose("").empty());
  EXPECT_EQ(d.decompose("Is it in France? It is in France! Yes."),
            (std::vector<std::string>{"It is in France"}));
}

TEST(Verifier, EvidenceOverlap) {
  const auto kb = testing::reward_fixture_kb();
  EvidenceOverlapVerifier v;
  EXPECT_EQ(v.verify("Armenia is a country in Asia", kb).verdict, 1);
  EXPECT_EQ(v.verify("Armenia is in Asia.", kb).verdict, 1);
  EXPECT_EQ(v.verify("Armenia is in Europe.", kb).verdict, 0);
  EXPECT_EQ(v.verify("it is the", kb).verdict, 0);
  EXPECT_FALSE(v.verify("Armenia is in Asia.", kb).evidence.empty());
  std::istringstream empty("");
  const auto none = ingest_dump(empty, std::make_shared<HashingEmbedder>());
  const auto fc = v.verify("Armenia is in Asia.", none);
  EXPECT_EQ(fc.verdict, 0);
  EXPECT_TRUE(fc.evidence.empty());
}

TEST(FactReward, Mean) {
  EXPECT_EQ(fact_reward(std::vector<int>{}), 0.0);
  EXPECT_DOUBLE_EQ(fact_reward(std::vector<int>{1, 1, 0}), 2.0 / 3.0);
  EXPECT_EQ(fact_reward(std::vector<int>{1, 1, 1, 1}), 1.0);
}

TEST(Presets, CorrectnessValues) {
  RuleJudge j;
  auto value = [&](const char* preset, const char* answer) {
    return correctness_reward(answer, "Paris", {}, j, preset_by_name(preset)).value;
  };
  EXPECT_EQ(value("knowrl", "Paris"), 2.0);
  EXPECT_EQ(value("knowrl", "not sure"), 1.0);
  EXPECT_EQ(value("knowrl", "Lyon"), -1.0);
  EXPECT_EQ(value("truthrl", "not sure"), 0.0);
  EXPECT_EQ(value("truthrl", "Paris"), 1.0);
  EXPECT_EQ(value("refusal_penalty", "not sure"), -1.0);
  EXPECT_EQ(value("refusal_penalty", "Paris"), 2.0);
  EXPECT_EQ(value("format_only", "Paris"), 0.0);
  EXPECT_EQ(value("format_fact", "Lyon"), 0.0);
  EXPECT_EQ(reward_presets().size(), 6u);
  EXPECT_THROW(preset_by_name("nope"), ValidationError);
}

class ThrowingJudge final : public Judge {
 public:
  Verdict judge(std::string_view, std::string_view, std::span<const std::string>) const override {
    throw std::runtime_error("offline");
  }
};

TEST(Presets, JudgeFailureNamesPrompt) {
  ThrowingJudge j;
  try {
    correctness_reward("a", "b", {}, j, preset_by_name("knowrl"), "p-17");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("p-17"), std::string::npos);
  }
}

// Verdicts scripted per statement so the component sum can be checked in isolation.
class ScriptedVerifier final : public Verifier {
 public:
  FactCheck verify(std::string_view statement, const KnowledgeBase&) const override {
    FactCheck fc;
    fc.statement = std::string(statement);
    fc.verdict = statement.find("true") != std::string_view::npos ? 1 : 0;
    return fc;
  }
};

TEST(TotalReward, DocumentedExamples) {
  const auto kb = testing::reward_fixture_kb();
  RuleJudge judge;
  SentenceDecomposer dec;
  ScriptedVerifier ver;
  const RewardClients clients{&judge, &dec, &ver};
  const auto r = parse_rollout("<think>This is true here. This is false here.</think><answer>Paris</answer>");
  const auto b = total_reward(r, "Paris", {}, kb, preset_by_name("knowrl"), clients);
  EXPECT_EQ(b.total, 3.5);
  EXPECT_EQ(b.m_facts, 2u);
  EXPECT_EQ(b.supported_facts, 1u);

  const auto fo = total_reward(r, "Paris", {}, kb, preset_by_name("format_only"), clients);
  EXPECT_EQ(fo.total, 1.0);
  EXPECT_EQ(fo.r_correct, 0.0);
  EXPECT_EQ(fo.r_fact, 0.0);
  EXPECT_EQ(fo.verdict, Verdict::kCorrect);

  const auto bad = parse_rollout("<answer>I don't know</answer>");
  const auto z = total_reward(bad, "Paris", {}, kb, preset_by_name("knowrl"), clients);
  EXPECT_EQ(z.total, 0.0);
  EXPECT_EQ(z.r_format, -1.0);
  EXPECT_EQ(z.r_correct, 1.0);
  EXPECT_EQ(z.m_facts, 0u);
}

TEST(TotalReward, HandTable) {
  const auto kb = testing::reward_fixture_kb();
  const auto clients = default_reward_clients();
  const auto rows = testing::reward_fixture_rows();
  ASSERT_EQ(rows.size(), 12u);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    const auto rollout = parse_rollout(row.text, "r" + std::to_string(i));
    for (std::size_t p = 0; p < testing::kRewardFixturePresets.size(); ++p) {
      const auto& preset = preset_by_name(testing::kRewardFixturePresets[p]);
      SCOPED_TRACE("row " + std::to_string(i) + " preset " + preset.name);
      const auto b = total_reward(rollout, testing::kRewardFixtureGold, {}, kb, preset, clients);
      EXPECT_EQ(b.format_valid, row.format_valid);
      EXPECT_EQ(b.verdict, row.verdict);
      EXPECT_EQ(b.m_facts, row.m_facts);
      EXPECT_EQ(b.supported_facts, row.supported);
      EXPECT_EQ(b.total, row.totals[p]);
      EXPECT_EQ(b.prompt_id, "r" + std::to_string(i));
    }
  }
}

TEST(TotalReward, RangeAndPurity) {
  const auto kb = testing::reward_fixture_kb();
  const auto clients = default_reward_clients();
  const std::vector<std::string> pieces = {"<think>", "</think>", "<answer>", "</answer>",
                                           "Yerevan", "Armenia is in Asia. ", "I don't know",
                                           "Gyumri", " ", "Armenia borders Peru. "};
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 500; ++trial) {
    std::string text;
    const int n = rng() % 10;
    for (int k = 0; k < n; ++k) text += pieces[rng() % pieces.size()];
    const auto r = parse_rollout(text);
    for (const auto& preset : reward_presets()) {
      const auto b = total_reward(r, "Yerevan", {}, kb, preset, clients);
      EXPECT_EQ(b, total_reward(r, "Yerevan", {}, kb, preset, clients));
      EXPECT_GE(b.r_fact, 0.0);
      EXPECT_LE(b.r_fact, 1.0);
      EXPECT_LE(b.supported_facts, b.m_facts);
      if (preset.name == "knowrl") {
        EXPECT_GE(b.total, -2.0);
        EXPECT_LE(b.total, 4.0);
      }
      if (!preset.use_format) EXPECT_EQ(b.r_format, 0.0);
      if (!preset.use_correct) EXPECT_EQ(b.r_correct, 0.0);
      if (!preset.use_fact) EXPECT_EQ(b.r_fact, 0.0);
      // Disabling a component leaves the other components untouched.
      const auto full = total_reward(r, "Yerevan", {}, kb, preset_by_name("knowrl"), clients);
      if (preset.use_format) EXPECT_EQ(b.r_format, full.r_format);
      if (preset.use_fact) EXPECT_EQ(b.r_fact, full.r_fact);
      EXPECT_EQ(b.verdict, full.verdict);
    }
  }
}

TEST(TotalReward, MissingClientThrows) {
  const auto kb = testing::reward_fixture_kb();
  EXPECT_THROW(total_reward(parse_rollout(""), "x", {}, kb, preset_by_name("knowrl"), {}), Error);
}

}  // namespace
}  // namespace knowrl
