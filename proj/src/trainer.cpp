#include "knowrl/trainer.hpp"

#include <algorithm>
#include <numeric>

#include "knowrl/text.hpp"

namespace knowrl {

double RewardTable::fact_fraction(std::size_t task, std::size_t candidate) const {
  const auto& b = breakdowns[task][candidate];
  return b.m_facts == 0 ? 0.0
                        : static_cast<double>(b.supported_facts) / static_cast<double>(b.m_facts);
}

RewardTable RewardTable::build(const std::vector<PromptTask>& tasks, const KnowledgeBase& kb,
                               const RewardPreset& preset, const RewardClients& clients) {
  RewardTable t;
  t.breakdowns.resize(tasks.size());
  t.lengths.resize(tasks.size());
  std::vector<std::string> errors(tasks.size());

#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const auto& task = tasks[i];
    try {
      for (const auto& cand : task.candidates) {
        const auto rollout = parse_rollout(cand, task.prompt_id);
        t.breakdowns[i].push_back(total_reward(rollout, task.gold, task.aliases, kb, preset, clients));
        t.lengths[i].push_back(text::count_whitespace_tokens(cand));
      }
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i].empty()) {
      throw Error("scoring prompt " + tasks[i].prompt_id + " failed: " + errors[i]);
    }
  }
  return t;
}

nlohmann::json StepReport::to_json() const {
  return {{"step", step},       {"mean_reward", mean_reward}, {"mean_fact", mean_fact},
          {"mean_len", mean_len}, {"entropy", entropy},         {"kl", kl},
          {"loss", loss}};
}

CategoricalPolicy make_policy(const std::vector<PromptTask>& tasks, const std::string& mode) {
  if (mode == "auto") {
    const bool all_features = !tasks.empty() && std::all_of(tasks.begin(), tasks.end(), [](const auto& t) {
      return !t.features.empty();
    });
    return all_features ? CategoricalPolicy::featurized(tasks) : CategoricalPolicy::tabular(tasks);
  }
  return parse_policy_mode(mode) == PolicyMode::kTabular ? CategoricalPolicy::tabular(tasks)
                                                         : CategoricalPolicy::featurized(tasks);
}

namespace {

std::vector<std::size_t> select_prompts(std::size_t n, std::size_t per_step, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (per_step == 0 || per_step >= n) return idx;
  for (std::size_t i = 0; i < per_step; ++i) {
    std::swap(idx[i], idx[i + rng.below(n - i)]);
  }
  idx.resize(per_step);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

StepReport train_step(CategoricalPolicy& policy, const RewardTable& table,
                      const TrainConfig& config, std::size_t step, Rng& rng) {
  if (table.breakdowns.size() != policy.num_tasks()) {
    throw ValidationError("reward table does not match the policy's tasks");
  }
  policy.snapshot_old();
  const auto prompts = select_prompts(policy.num_tasks(), config.prompts_per_step, rng);
  const std::uint64_t step_seed = rng.next();

  std::vector<Group> groups(prompts.size());
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    Rng local(derive_seed(step_seed, prompts[i]));
    Group g = sample_group(policy, prompts[i], config.group_size, local);
    std::vector<double> rewards;
    rewards.reserve(g.candidates.size());
    for (auto c : g.candidates) rewards.push_back(table.reward(g.task, c));
    assign_rewards(g, std::move(rewards), config);
    g.ratios.assign(g.candidates.size(), 1.0);  // theta == theta_old at sampling time
    groups[i] = std::move(g);
  }

  StepReport rep;
  rep.step = step;
  std::size_t n = 0;
  for (const auto& g : groups) {
    for (std::size_t s = 0; s < g.candidates.size(); ++s) {
      rep.mean_reward += g.rewards[s];
      rep.mean_fact += table.fact_fraction(g.task, g.candidates[s]);
      rep.mean_len += static_cast<double>(table.lengths[g.task][g.candidates[s]]);
      ++n;
    }
  }
  if (n > 0) {
    rep.mean_reward /= static_cast<double>(n);
    rep.mean_fact /= static_cast<double>(n);
    rep.mean_len /= static_cast<double>(n);
  }

  const auto parts = loss_parts(policy, groups, config, policy.params());
  rep.entropy = parts.mean_entropy;
  rep.kl = parts.mean_kl;
  rep.loss = parts.loss;

  const auto grad = grad_loss(policy, groups, config, policy.params());
  auto theta = policy.params();
  for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= config.learning_rate * grad[i];
  policy.set_params(std::move(theta));
  return rep;
}

GreedyEval evaluate_greedy(const CategoricalPolicy& policy, const RewardTable& table,
                           std::span<const std::size_t> tasks) {
  std::vector<std::size_t> all;
  if (tasks.empty()) {
    all.resize(policy.num_tasks());
    std::iota(all.begin(), all.end(), std::size_t{0});
    tasks = all;
  }
  GreedyEval ev;
  for (auto t : tasks) {
    const std::size_t c = policy.argmax(t);
    ev.counts.add(table.breakdowns[t][c].verdict);
    ev.mean_reward += table.reward(t, c);
    ev.mean_fact += table.fact_fraction(t, c);
    ev.mean_len += static_cast<double>(table.lengths[t][c]);
  }
  if (!tasks.empty()) {
    const double n = static_cast<double>(tasks.size());
    ev.mean_reward /= n;
    ev.mean_fact /= n;
    ev.mean_len /= n;
  }
  return ev;
}

SeriesPoint series_point(std::size_t step, const GreedyEval& eval) {
  SeriesPoint p;
  p.step = step;
  p.metrics = compute_metrics(eval.counts);
  p.mean_reward = eval.mean_reward;
  p.mean_fact = eval.mean_fact;
  p.mean_len = eval.mean_len;
  return p;
}

TrainingRun train(CategoricalPolicy& policy, const RewardTable& table, const TrainConfig& config,
                  const EvalHook& on_eval) {
  config.validate();
  TrainingRun run;
  Rng rng(derive_seed(config.seed, 0x7472616eULL));
  auto evaluate = [&](std::size_t step) {
    run.series.push_back(series_point(step, evaluate_greedy(policy, table)));
    if (on_eval) on_eval(step, policy);
  };
  evaluate(0);
  for (std::size_t s = 1; s <= config.steps; ++s) {
    run.steps.push_back(train_step(policy, table, config, s, rng));
    if (s % config.eval_every == 0 || s == config.steps) evaluate(s);
  }
  return run;
}

std::vector<double> cold_start(CategoricalPolicy& policy, std::span<const SftExample> examples,
                               std::size_t steps, double lr) {
  std::vector<double> losses;
  for (std::size_t s = 0; s < steps; ++s) losses.push_back(sft_step(policy, examples, lr));
  policy.freeze_reference();
  return losses;
}

}  // namespace knowrl
