#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "knowrl/corpus.hpp"
#include "knowrl/text.hpp"
#include "oracles.hpp"

namespace knowrl {
namespace {

QAItem item(std::string id, std::string question, std::string answer = "x") {
  QAItem it;
  it.id = std::move(id);
  it.question = std::move(question);
  it.normalized_question = text::normalize_question(it.question);
  it.answer = std::move(answer);
  return it;
}

std::vector<std::string> ids(const std::vector<QAItem>& v) {
  std::vector<std::string> out;
  for (const auto& i : v) out.push_back(i.id);
  return out;
}

std::string repeat(const std::string& w, int n) {
  std::string s;
  for (int i = 0; i < n; ++i) s += (i ? " " : "") + w;
  return s;
}

using Ids = std::vector<std::string>;

TEST(MultiAnswer, DropsItemsWithSeveralGolds) {
  auto a = item("a", "Who?");
  auto b = item("b", "Who?");
  b.extra_answers = {"y"};
  const auto out = multi_answer_filter({a, b});
  EXPECT_EQ(ids(out.kept), Ids{"a"});
  ASSERT_EQ(out.removed.size(), 1u);
  EXPECT_EQ(out.removed[0].reason, "multiple_answers");
  EXPECT_EQ(out.removed[0].detail, "2 answers");
}

TEST(QuestionTone, MarkOrOpener) {
  EXPECT_TRUE(has_question_tone("Paris is where?"));
  EXPECT_TRUE(has_question_tone("  who founded Rome  "));
  EXPECT_TRUE(has_question_tone("Is it raining"));
  EXPECT_FALSE(has_question_tone("Tell me about Rome."));
  EXPECT_FALSE(has_question_tone(""));
  const auto out = question_tone_filter({item("a", "Name the capital."), item("b", "What is it")});
  EXPECT_EQ(ids(out.kept), Ids{"b"});
  EXPECT_EQ(out.removed[0].reason, "no_question_tone");
}

TEST(ExactDedup, SmallestIdSurvivesInInputOrder) {
  const auto out = exact_dedup({item("q3", "Who wrote Hamlet?"), item("q1", "who wrote hamlet ??"),
                                item("q2", "Who painted it?"), item("q0", "WHO WROTE HAMLET?")});
  EXPECT_EQ(ids(out.kept), (Ids{"q2", "q0"}));
  ASSERT_EQ(out.removed.size(), 2u);
  EXPECT_EQ(out.removed[0].id, "q3");
  EXPECT_EQ(out.removed[0].detail, "q0");
  EXPECT_EQ(out.removed[0].reason, "exact_duplicate");
}

TEST(ExactDedup, Idempotent) {
  std::mt19937_64 rng(3);
  const auto items = testing::random_questions(rng, 120);
  const auto once = exact_dedup(items).kept;
  const auto twice = exact_dedup(once);
  EXPECT_EQ(ids(twice.kept), ids(once));
  EXPECT_TRUE(twice.removed.empty());
}

TEST(SemanticDedup, IdenticalCollapseToOne) {
  HashingEmbedder emb;
  const auto out = semantic_dedup(
      {item("b", "Who is the king?"), item("a", "who is the king"), item("c", "Who is the king!")},
      0.9, emb);
  EXPECT_EQ(ids(out.kept), Ids{"a"});
  EXPECT_EQ(out.removed.size(), 2u);
  EXPECT_EQ(out.removed[0].detail, "a");
  EXPECT_EQ(out.removed[0].reason, "semantic_duplicate");
}

TEST(SemanticDedup, TransitiveChainJoinsOneComponent) {
  HashingEmbedder emb;
  const auto a = item("a", "river");
  const auto b = item("b", repeat("river", 9) + " " + repeat("bank", 4));
  const auto c = item("c", repeat("river", 7) + " " + repeat("bank", 8));
  const auto va = emb.embed(a.normalized_question);
  const auto vb = emb.embed(b.normalized_question);
  const auto vc = emb.embed(c.normalized_question);
  // Counts (1,0), (9,4), (7,8) over two buckets.
  EXPECT_NEAR(cosine(va, vb), 9.0 / std::sqrt(97.0), 1e-12);
  EXPECT_NEAR(cosine(vb, vc), 95.0 / std::sqrt(97.0 * 113.0), 1e-12);
  EXPECT_NEAR(cosine(va, vc), 7.0 / std::sqrt(113.0), 1e-12);
  const auto out = semantic_dedup({c, b, a}, 0.9, emb);
  EXPECT_EQ(ids(out.kept), Ids{"a"});
  EXPECT_EQ(out.removed.size(), 2u);
}

TEST(SemanticDedup, ThresholdOneKeepsDistinct) {
  HashingEmbedder emb;
  const auto out =
      semantic_dedup({item("a", "river bank"), item("b", "river river bank")}, 1.0, emb);
  EXPECT_EQ(out.kept.size(), 2u);
  EXPECT_THROW(semantic_dedup({}, 0.0, emb), ValidationError);
  EXPECT_THROW(semantic_dedup({}, 1.5, emb), ValidationError);
}

TEST(SemanticDedup, MatchesPairwiseOracle) {
  HashingEmbedder emb;
  std::mt19937_64 rng(11);
  for (std::size_t n : {0u, 1u, 2u, 17u, 60u, 200u}) {
    for (double th : {0.5, 0.8, 0.9, 0.97}) {
      const auto items = testing::random_questions(rng, n);
      const auto out = semantic_dedup(items, th, emb);
      EXPECT_EQ(ids(out.kept), testing::oracle_semantic_dedup(items, th, emb))
          << "n=" << n << " threshold=" << th;
      EXPECT_EQ(out.kept.size() + out.removed.size(), n);
    }
  }
}

TEST(SemanticDedup, Idempotent) {
  HashingEmbedder emb;
  std::mt19937_64 rng(5);
  const auto once = semantic_dedup(testing::random_questions(rng, 150), 0.9, emb).kept;
  EXPECT_EQ(ids(semantic_dedup(once, 0.9, emb).kept), ids(once));
}

class FailingEmbedder final : public Embedder {
 public:
  std::size_t dimension() const override { return 4; }
  std::string id() const override { return "failing"; }
  std::vector<double> embed(std::string_view text) const override {
    if (text.find("boom") != std::string_view::npos) throw Error("embedding failed");
    return {1, 0, 0, 0};
  }
};

TEST(SemanticDedup, EmbedderFailureNamesItem) {
  FailingEmbedder emb;
  try {
    semantic_dedup({item("a", "fine?"), item("b", "boom?")}, 0.9, emb);
    FAIL();
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "semantic_dedup");
    EXPECT_EQ(e.item_id(), "b");
  }
}

TEST(Entropy, KnownValues) {
  EXPECT_NEAR(entropy_of_text("a a b"), 0.9182958340544896, 1e-12);
  EXPECT_DOUBLE_EQ(entropy_of_text("a a a"), 0.0);
  EXPECT_DOUBLE_EQ(entropy_of_text("a b c d"), 2.0);
  EXPECT_THROW(entropy_of_text("   "), Error);
}

TEST(EntropyFilter, KeepsTopFraction) {
  std::vector<QAItem> items;
  for (int i = 0; i < 10; ++i) {
    std::string q;
    for (int k = 0; k <= i; ++k) q += "w" + std::to_string(k) + " ";
    items.push_back(item("e" + std::to_string(i), q));
  }
  const auto out = entropy_filter(items, 0.8);
  ASSERT_EQ(out.kept.size(), 8u);
  EXPECT_EQ(out.kept.front().id, "e2");
  EXPECT_NEAR(out.kept.back().entropy, std::log2(10.0), 1e-12);
    ASSERT_EQ(out.removed.size(), 2u);
  EXPECT_EQ(out.removed[0].id, "e0");
  EXPECT_EQ(out.removed[0].reason, "low_entropy");
}

TEST(EntropyFilter, EdgeCountsAndTies) {
  EXPECT_EQ(entropy_filter({item("a", "x y")}, 0.1).kept.size(), 1u);
  EXPECT_TRUE(entropy_filter({}, 0.8).kept.empty());
  // Equal entropy: the smaller id wins the last slot.
  const auto out = entropy_filter({item("z", "p q"), item("m", "r s"), item("b", "t t")}, 0.5);
  EXPECT_EQ(ids(out.kept), (Ids{"z", "m"}));
  const auto one = entropy_filter({item("z", "p q"), item("m", "r s")}, 0.5);
  EXPECT_EQ(ids(one.kept), (Ids{"m"}));
  EXPECT_THROW(entropy_filter({}, 0.0), ValidationError);
  EXPECT_THROW(entropy_filter({}, 1.01), ValidationError);
}

TEST(EntropyFilter, PropertyCountsAndOrdering) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng() % 80;
    const double f = 0.05 + 0.95 * static_cast<double>(rng() % 1000) / 999.0;
    const auto items = testing::random_questions(rng, n);
    const auto out = entropy_filter(items, f);
    const auto expect = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(f * n - 1e-9)));
    EXPECT_EQ(out.kept.size(), std::min(expect, n));
    double min_kept = 1e9;
    for (const auto& k : out.kept) min_kept = std::min(min_kept, k.entropy);
    for (const auto& r : out.removed) EXPECT_LE(std::stod(r.detail), min_kept + 1e-6);
  }
}

TEST(FirstAttempt, DropEasyAndKeepAnswered) {
  RuleJudge judge;
  LookupAnswerProvider provider({{"a", "Paris"}, {"b", "Lyon"}});
  const std::vector<QAItem> items = {item("a", "Capital?", "Paris"), item("b", "Capital?", "Paris"),
                                     item("c", "Capital?", "Paris")};
  const auto drop_easy = first_attempt_filter(items, provider, false, judge);
  EXPECT_EQ(ids(drop_easy.kept), Ids{"b"});
  ASSERT_EQ(drop_easy.removed.size(), 2u);
  EXPECT_EQ(drop_easy.removed[0].reason, "answered_correctly");
  EXPECT_EQ(drop_easy.removed[1].reason, "skipped");
  const auto hard = first_attempt_filter(items, provider, true, judge);
  EXPECT_EQ(ids(hard.kept), Ids{"a"});
  EXPECT_EQ(hard.removed[0].reason, "not_answered_correctly");
}

TEST(Refinement, AcceptRejectAndMalformed) {
  FixtureExtractor ex({{"a", "Normalized Query: \"Who is Niall Ferguson's wife?\"\nEntities: [\"Niall Ferguson\"]"},
                       {"b", "Normalized Query: \"Who is in charge now?\"\nREJECT (time-sensitive)"}});
  const auto out = refinement_filter({item("a", "niall ferguson wife"), item("b", "who now"),
                                      item("c", "no response?")},
                                     ex);
  ASSERT_EQ(out.kept.size(), 1u);
  EXPECT_EQ(out.kept[0].question, "Who is Niall Ferguson's wife?");
  EXPECT_EQ(out.kept[0].entities, Ids{"Niall Ferguson"});
  ASSERT_EQ(out.removed.size(), 2u);
  EXPECT_EQ(out.removed[0].reason, "rejected");
  EXPECT_EQ(out.removed[0].detail, "time-sensitive");
  EXPECT_EQ(out.removed[1].reason, "skipped");

  FixtureExtractor bad(std::map<std::string, std::string>{{"x", "Entities: [\"A\"]"}});
  try {
    refinement_filter({item("x", "q?")}, bad);
    FAIL();
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "refinement");
    EXPECT_EQ(e.item_id(), "x");
  }
}

TEST(Length, InclusiveBounds) {
  auto with_len = [](std::string id, int n) {
    auto it = item(std::move(id), "q?");
    it.long_answer = repeat("t", n);
    return it;
  };
  const auto out = length_filter({with_len("a", 299), with_len("b", 300), with_len("c", 700),
                                  with_len("d", 701), with_len("e", 0)},
                                 300, 700);
  EXPECT_EQ(ids(out.kept), (Ids{"b", "c"}));
  EXPECT_EQ(out.removed[0].detail, "299");
  EXPECT_EQ(out.removed[1].detail, "701");
  EXPECT_EQ(out.removed[0].reason, "length_out_of_range");
}

TEST(ReadCorpus, ParsesAnswersAndReportsLine) {
  std::istringstream in(
      R"({"id": "q1", "question": "Who?", "answer": "A"})" "\n"
      R"({"id": 7, "question": "What?", "answer": ["B", "C"], "entities": ["E"]})" "\n");
  const auto items = read_corpus(in);
  ASSERT_EQ(items.size(), 2u);
  EXPECT_EQ(items[1].id, "7");
  EXPECT_EQ(items[1].answer, "B");
  EXPECT_EQ(items[1].extra_answers, Ids{"C"});
  EXPECT_EQ(items[0].normalized_question, text::normalize_question("Who?"));

  std::istringstream bad(R"({"id": "q1", "question": "Who?", "answer": "A"})" "\n\n{oops\n");
  try {
    read_corpus(bad);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.position(), 3u);
  }
  std::istringstream empty_list(R"({"id": "q", "question": "Who?", "answer": []})");
  EXPECT_THROW(read_corpus(empty_list), ParseError);
}

TEST(ReadCorpus, WriteRoundTrip) {
  std::istringstream in(R"({"id": "q1", "question": "Who?", "answer": ["A", "B"]})" "\n");
  const auto items = read_corpus(in);
  std::ostringstream out;
  write_corpus(out, items);
  std::istringstream back(out.str());
  const auto again = read_corpus(back);
  ASSERT_EQ(again.size(), 1u);
  EXPECT_EQ(again[0].answer, "A");
  EXPECT_EQ(again[0].extra_answers, Ids{"B"});
}

CurationConfig all_off() {
  CurationConfig c;
  c.stages = {false, false, false, false, false, false, false, false, false, false};
  return c;
}

TEST(Pipeline, AllStagesOffIsIdentity) {
  std::mt19937_64 rng(8);
  const auto items = testing::random_questions(rng, 30);
  const auto r = run_pipeline(items, all_off(), {});
  EXPECT_EQ(ids(r.items), ids(items));
  EXPECT_TRUE(r.report.stages.empty());
  EXPECT_TRUE(r.report.consistent());
}

TEST(Pipeline, MissingClientIsValidationError) {
  auto c = all_off();
  c.stages.semantic_dedup = true;
  EXPECT_THROW(run_pipeline({}, c, {}), ValidationError);
  c.entropy_keep_fraction = 0;
  EXPECT_THROW(run_pipeline({}, c, {}), ValidationError);
}

// Twenty items exercising each stage; survivors worked out by hand.
struct Fixture {
  std::vector<QAItem> items;
  std::map<std::string, std::string> easy, strong, extract;
  std::shared_ptr<const Embedder> emb = std::make_shared<HashingEmbedder>();
  std::unique_ptr<KnowledgeBase> kb;

  Fixture() {
    const std::vector<std::pair<std::string, std::string>> subjects = {
        {"Armenia", "Yerevan"}, {"Peru", "Lima"},     {"Chile", "Santiago"}, {"Kenya", "Nairobi"},
        {"Nepal", "Kathmandu"}, {"Ghana", "Accra"},   {"Laos", "Vientiane"}, {"Fiji", "Suva"},
        {"Oman", "Muscat"},     {"Cuba", "Havana"},   {"Mali", "Bamako"},    {"Chad", "N'Djamena"}};
    std::string dump;
    for (std::size_t i = 0; i < subjects.size(); ++i) {
      const auto& [country, capital] = subjects[i];
      auto it = item("f" + std::to_string(10 + i),
                     "Which city serves as the capital of " + country + "?", capital);
      it.long_answer = repeat("w", 400);
      items.push_back(it);
      easy[it.id] = "unsure";
      strong[it.id] = capital;
      extract[it.id] = "Normalized Query: \"What is the capital of " + country +
                       "?\"\nEntities: [\"" + country + "\"]";
      if (country != "Chad") {
        dump += nlohmann::json{{"title", country}, {"text", country + " has capital " + capital + "."}}
                    .dump() + "\n";
      }
    }
    items[1].extra_answers = {"Callao"};                 // f11 multi_answer
    items[2].question = "Tell me the capital of Chile.";  // f12 tone
    easy["f13"] = "Nairobi";                              // f13 easy
    strong["f14"] = "Pokhara";                            // f14 difficulty
    extract["f15"] = "Normalized Query: \"Capital of Ghana?\"\nREJECT (vague)";  // f15 refinement
    items[6].long_answer = repeat("w", 12);               // f16 length
    // f21 Chad has no knowledge entry.
    auto dup = items[0];
    dup.id = "f30";
    dup.question = "which city serves as the capital of armenia ??";
    items.push_back(dup);                                 // exact duplicate of f10
    auto para = items[7];
    para.id = "f09";
    para.question = "Which city serves as the capital of Fiji now?";
    items.push_back(para);                                // semantic duplicate of f17
    for (const auto& it : std::vector<QAItem>(items.end() - 2, items.end())) {
      easy[it.id] = "unsure";
      strong[it.id] = it.answer;
      extract[it.id] = extract[it.id == "f30" ? "f10" : "f17"];
    }
    const char* words[] = {"alpha", "bravo", "delta", "gamma", "kappa", "sigma"};
    for (int k = 0; k < 6; ++k) {
      auto low = item("g" + std::to_string(k), "what " + repeat(words[k], 5) + "?", "Z");
      low.long_answer = repeat("w", 400);
      items.push_back(low);
      easy[low.id] = "unsure";
    }
    for (auto& it : items) it.normalized_question = text::normalize_question(it.question);
    std::istringstream in(dump);
    kb = std::make_unique<KnowledgeBase>(ingest_dump(in, emb));
  }
};

TEST(Pipeline, FixtureSurvivorsAndReport) {
  Fixture f;
  ASSERT_EQ(f.items.size(), 20u);
  RuleJudge judge;
  LookupAnswerProvider easy(f.easy), strong(f.strong);
  FixtureExtractor ex(f.extract);
  CurationClients clients;
  clients.easy_answers = &easy;
  clients.strong_answers = &strong;
  clients.extractor = &ex;
  clients.judge = &judge;
  clients.embedder = f.emb.get();
  clients.kb = f.kb.get();
  CurationConfig config;
  config.entropy_keep_fraction = 0.6;
  const auto r = run_pipeline(f.items, config, clients);
  EXPECT_TRUE(r.report.consistent());
  ASSERT_EQ(r.report.stages.size(), 10u);
  std::vector<std::size_t> outs;
  for (const auto& s : r.report.stages) outs.push_back(s.output_count);
  // 20 -1 multi -1 tone -1 easy -1 exact -1 semantic (f17 joins f09);
  // ceil(15 * 0.6) = 9 drops the six repetitive items; then -1 rejected,
  // -1 hard, -1 ungrounded, -1 short.
  EXPECT_EQ(outs, (std::vector<std::size_t>{19, 18, 17, 16, 15, 9, 8, 7, 6, 5}));
  EXPECT_EQ(ids(r.items), (Ids{"f10", "f18", "f19", "f20", "f09"}));
  for (const auto& it : r.items) {
    EXPECT_EQ(it.stage_tags.size(), 10u);
    EXPECT_FALSE(it.knowledge_refs.empty());
    EXPECT_LE(it.entities.size(), 2u);
  }
  const auto& removed_last = r.report.stages.back().removed;
  ASSERT_EQ(removed_last.size(), 1u);
  EXPECT_EQ(removed_last[0].id, "f16");
  EXPECT_EQ(removed_last[0].stage_tags.size(), 9u);
}

TEST(Pipeline, StageErrorCarriesStageAndItem) {
  auto c = all_off();
  c.stages.refinement = true;
  FixtureExtractor ex(std::map<std::string, std::string>{{"a", "garbage"}});
  CurationClients clients;
  clients.extractor = &ex;
  try {
    run_pipeline({item("a", "Who?")}, c, clients);
    FAIL();
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "refinement");
    EXPECT_EQ(e.item_id(), "a");
  }
}

}  // namespace
}  // namespace knowrl
