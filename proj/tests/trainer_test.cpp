#include <omp.h>

#include <gtest/gtest.h>

#include "knowrl/text.hpp"
#include "knowrl/trainer.hpp"
#include "policy_fixtures.hpp"
#include "reward_fixture.hpp"

namespace knowrl {
namespace {

RewardTable table_from(const std::vector<std::vector<double>>& rewards) {
  RewardTable t;
  for (const auto& row : rewards) {
    std::vector<RewardBreakdown> b(row.size());
    for (std::size_t c = 0; c < row.size(); ++c) {
      b[c].total = row[c];
      b[c].verdict = row[c] > 1.5 ? Verdict::kCorrect : Verdict::kIncorrect;
    }
    t.breakdowns.push_back(std::move(b));
    t.lengths.emplace_back(row.size(), 10);
  }
  return t;
}

TrainConfig quiet_config() {
  TrainConfig c;
  c.learning_rate = 0.1;
  c.beta_entropy = 0.0;
  c.beta_kl = 0.0;
  c.seed = 5;
  return c;
}

TEST(Train, ZeroStepsLeavesPolicy) {
  auto policy = CategoricalPolicy::tabular(testing::make_tasks({3, 3}));
  policy.set_params({0.1, 0.2, 0.3, 0.4, 0.5, 0.6});
  const auto before = policy.params();
  auto config = quiet_config();
  config.steps = 0;
  const auto run = train(policy, table_from({{1, 2, 3}, {3, 2, 1}}), config);
  EXPECT_TRUE(run.steps.empty());
  ASSERT_EQ(run.series.size(), 1u);
  EXPECT_EQ(run.series[0].step, 0u);
  EXPECT_EQ(policy.params(), before);
}

TEST(Train, OneStepRaisesBestCandidate) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto policy = CategoricalPolicy::tabular(testing::make_tasks({4}));
    const auto table = table_from({{0, 4, 2, -2}});
    auto config = quiet_config();
    config.group_size = 64;
    const double before = policy.probs(0, policy.params())[1];
    Rng rng(seed);
    train_step(policy, table, config, 1, rng);
    EXPECT_GT(policy.probs(0, policy.params())[1], before) << seed;
  }
}

TEST(Train, StepMatchesAnalyticUpdate) {
  // One prompt where every group sample sees the same policy: the update is
  // theta_old - lr * grad at theta_old with the sampled group's advantages.
  auto policy = CategoricalPolicy::tabular(testing::make_tasks({3}));
  const auto table = table_from({{3, 0, 1}});
  auto config = quiet_config();
  config.group_size = 6;
  Rng rng(21);
  Rng replay(21);
  train_step(policy, table, config, 1, rng);

  auto ref = CategoricalPolicy::tabular(testing::make_tasks({3}));
  ref.snapshot_old();
  Rng prompt_rng(derive_seed(replay.next(), 0));
  auto g = sample_group(ref, 0, config.group_size, prompt_rng);
  std::vector<double> r;
  for (auto c : g.candidates) r.push_back(table.reward(0, c));
  assign_rewards(g, r, config);
  const std::vector<Group> groups = {g};
  const auto grad = grad_loss(ref, groups, config, ref.params());
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(policy.params()[i], -config.learning_rate * grad[i], 1e-15);
  }
}

TEST(Train, BitIdenticalAcrossRunsAndThreads) {
  Rng frng(3);
  const auto tasks = testing::make_tasks({4, 5, 3, 6}, 3, &frng);
  const auto table = table_from({{4, 2, 0, -2}, {0, 0, 3, 1, -1}, {1, 2, 3}, {4, 0, 0, 0, 2, -2}});
  auto config = quiet_config();
  config.steps = 12;
  config.eval_every = 5;
  config.prompts_per_step = 3;
  config.beta_entropy = 0.01;
  config.beta_kl = 0.01;
  std::vector<TrainingRun> runs;
  std::vector<std::vector<double>> params;
  for (int threads : {1, 4, 1}) {
    omp_set_num_threads(threads);
    auto policy = CategoricalPolicy::featurized(tasks);
    runs.push_back(train(policy, table, config));
    params.push_back(policy.params());
  }
  omp_set_num_threads(1);
  EXPECT_EQ(runs[0].steps, runs[1].steps);
  EXPECT_EQ(runs[0].steps, runs[2].steps);
  EXPECT_EQ(params[0], params[1]);
  EXPECT_EQ(params[0], params[2]);
  ASSERT_EQ(runs[0].series.size(), 4u);  // 0, 5, 10, 12
  EXPECT_EQ(runs[0].series.back().step, 12u);
}

TEST(Train, ColdStartFreezesReference) {
  auto policy = CategoricalPolicy::tabular(testing::make_tasks({3}));
  const std::vector<SftExample> ex = {{0, 2}};
  const auto losses = cold_start(policy, ex, 10, 0.5);
  ASSERT_EQ(losses.size(), 10u);
  EXPECT_LT(losses.back(), losses.front());
  EXPECT_EQ(policy.ref_params(), policy.params());
  EXPECT_EQ(policy.old_params(), policy.params());
}

TEST(Train, MakePolicyModes) {
  Rng rng(1);
  const auto with = testing::make_tasks({2, 3}, 2, &rng);
  const auto without = testing::make_tasks({2, 3});
  EXPECT_EQ(make_policy(with, "auto").mode(), PolicyMode::kFeaturized);
  EXPECT_EQ(make_policy(without, "auto").mode(), PolicyMode::kTabular);
  EXPECT_EQ(make_policy(with, "tabular").mode(), PolicyMode::kTabular);
  EXPECT_THROW(make_policy(without, "featurized"), ValidationError);
}

TEST(Evaluate, GreedyCounts) {
  auto policy = CategoricalPolicy::tabular(testing::make_tasks({3, 3}));
  policy.set_params({5, 0, 0, 0, 0, 5});
  const auto table = table_from({{4, 0, 0}, {4, 0, -1}});
  const auto e = evaluate_greedy(policy, table);
  EXPECT_EQ(e.counts.n_total, 2u);
  EXPECT_EQ(e.counts.n_correct, 1u);
  EXPECT_EQ(e.counts.n_incorrect, 1u);
  EXPECT_DOUBLE_EQ(e.mean_reward, 1.5);
  const std::vector<std::size_t> only_second = {1};
  EXPECT_EQ(evaluate_greedy(policy, table, only_second).counts.n_correct, 0u);
}

TEST(RewardTableBuild, ParallelEqualsSerialScoring) {
  const auto kb = testing::reward_fixture_kb();
  std::vector<PromptTask> tasks;
  const auto rows = testing::reward_fixture_rows();
  for (int t = 0; t < 5; ++t) {
    PromptTask task;
    task.prompt_id = "t" + std::to_string(t);
    task.gold = testing::kRewardFixtureGold;
    for (std::size_t i = t; i < rows.size(); i += 2) task.candidates.push_back(rows[i].text);
    tasks.push_back(task);
  }
  const auto clients = default_reward_clients();
  const auto& preset = preset_by_name("knowrl");
  omp_set_num_threads(4);
  const auto table = RewardTable::build(tasks, kb, preset, clients);
  omp_set_num_threads(1);
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    for (std::size_t c = 0; c < tasks[t].candidates.size(); ++c) {
      auto rollout = parse_rollout(tasks[t].candidates[c], tasks[t].prompt_id);
      EXPECT_EQ(table.breakdowns[t][c],
                total_reward(rollout, tasks[t].gold, tasks[t].aliases, kb, preset, clients));
      EXPECT_EQ(table.lengths[t][c], text::count_whitespace_tokens(tasks[t].candidates[c]));
    }
  }
}

class FailingJudge final : public Judge {
 public:
  Verdict judge(std::string_view, std::string_view, std::span<const std::string>) const override {
    throw std::runtime_error("down");
  }
};

TEST(RewardTableBuild, ErrorNamesPrompt) {
  const auto kb = testing::reward_fixture_kb();
  auto tasks = testing::make_tasks({2, 2});
  FailingJudge judge;
  auto clients = default_reward_clients();
  clients.judge = &judge;
  try {
    RewardTable::build(tasks, kb, preset_by_name("knowrl"), clients);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("scoring prompt p0"), std::string::npos) << e.what();
  }
}

TEST(StepReportJson, Fields) {
  StepReport r{3, 1.5, 0.25, 40, 0.9, 0.01, -0.2};
  const auto j = r.to_json();
  for (const char* k : {"step", "mean_reward", "mean_fact", "mean_len", "entropy", "kl", "loss"}) {
    EXPECT_TRUE(j.contains(k)) << k;
  }
  EXPECT_EQ(j["step"], 3);
}

}  // namespace
}  // namespace knowrl
