#ifndef KNOWRL_TRAINER_HPP_
#define KNOWRL_TRAINER_HPP_

#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "knowrl/knowledge_base.hpp"
#include "knowrl/metrics.hpp"
#include "knowrl/policy.hpp"
#include "knowrl/reward.hpp"

namespace knowrl {

// total_reward is a pure function of (rollout, gold, kb, preset), so every
// candidate is scored once up front.
struct RewardTable {
  std::vector<std::vector<RewardBreakdown>> breakdowns;  // [task][candidate]
  std::vector<std::vector<std::size_t>> lengths;         // whitespace tokens

  double reward(std::size_t task, std::size_t candidate) const {
    return breakdowns[task][candidate].total;
  }
  // Fraction of supported facts, independent of whether the preset pays for it.
  double fact_fraction(std::size_t task, std::size_t candidate) const;

  static RewardTable build(const std::vector<PromptTask>& tasks, const KnowledgeBase& kb,
                           const RewardPreset& preset, const RewardClients& clients);
};

struct StepReport {
  std::size_t step = 0;
  double mean_reward = 0.0;
  double mean_fact = 0.0;
  double mean_len = 0.0;
  double entropy = 0.0;
  double kl = 0.0;
  double loss = 0.0;

  bool operator==(const StepReport&) const = default;
  nlohmann::json to_json() const;
};

// auto: featurized when every task carries features, tabular otherwise.
CategoricalPolicy make_policy(const std::vector<PromptTask>& tasks, const std::string& mode);

// Snapshots old parameters, samples one group per selected prompt (stream
// derive_seed(rng.next(), prompt)), scores from the table and takes one
// gradient step.
StepReport train_step(CategoricalPolicy& policy, const RewardTable& table,
                      const TrainConfig& config, std::size_t step, Rng& rng);

// Greedy (argmax) rollouts over `tasks`; all tasks when empty.
struct GreedyEval {
  OutcomeCounts counts;
  double mean_reward = 0.0;
  double mean_fact = 0.0;
  double mean_len = 0.0;
};
GreedyEval evaluate_greedy(const CategoricalPolicy& policy, const RewardTable& table,
                           std::span<const std::size_t> tasks = {});
SeriesPoint series_point(std::size_t step, const GreedyEval& eval);

struct TrainingRun {
  std::vector<StepReport> steps;
  std::vector<SeriesPoint> series;  // step 0, every eval_every steps, and the last step
};

// Called after each evaluation with the step number.
using EvalHook = std::function<void(std::size_t step, const CategoricalPolicy&)>;

TrainingRun train(CategoricalPolicy& policy, const RewardTable& table, const TrainConfig& config,
                  const EvalHook& on_eval = {});

// Maximizes the likelihood of `examples` for config.sft_steps steps, then
// freezes the result as the reference. Returns the per-step losses.
std::vector<double> cold_start(CategoricalPolicy& policy, std::span<const SftExample> examples,
                               std::size_t steps, double lr);

}  // namespace knowrl

#endif  // KNOWRL_TRAINER_HPP_
