#ifndef KNOWRL_POLICY_HPP_
#define KNOWRL_POLICY_HPP_

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "knowrl/common.hpp"
#include "knowrl/objective.hpp"

namespace knowrl {

// One prompt with its enumerable candidate rollouts.
struct PromptTask {
  std::string prompt_id;
  std::string prompt_text;
  std::string gold;
  std::vector<std::string> aliases;
  std::vector<std::string> candidates;
  // Optional per-candidate feature rows for the featurized policy.
  std::vector<std::vector<double>> features;

  void validate() const;
};

std::vector<PromptTask> read_tasks(std::istream& in);
std::vector<PromptTask> read_tasks(const std::string& path);
nlohmann::json to_json(const PromptTask& task);

enum class PolicyMode { kTabular, kFeaturized };
std::string to_string(PolicyMode m);
PolicyMode parse_policy_mode(const std::string& s);

// Softmax policy over each task's candidates. Logits are linear in the
// parameters: tabular mode has one logit per (task, candidate); featurized
// mode shares a weight vector across tasks through the feature rows.
//
// Three parameter vectors live here: the trained parameters, the snapshot
// that sampled the current groups (old) and the frozen reference.
class CategoricalPolicy {
 public:
  static CategoricalPolicy tabular(const std::vector<PromptTask>& tasks);
  static CategoricalPolicy featurized(const std::vector<PromptTask>& tasks);

  PolicyMode mode() const { return mode_; }
  std::size_t num_tasks() const { return counts_.size(); }
  std::size_t num_candidates(std::size_t task) const { return counts_.at(task); }
  std::size_t num_params() const { return num_params_; }

  const std::vector<double>& params() const { return theta_; }
  const std::vector<double>& old_params() const { return theta_old_; }
  const std::vector<double>& ref_params() const { return theta_ref_; }
  void set_params(std::vector<double> theta);
  void set_reference(std::vector<double> theta_ref);
  // old <- current; called at the start of every optimization step.
  void snapshot_old() { theta_old_ = theta_; }
  // ref <- current, and old <- current.
  void freeze_reference();

  std::vector<double> logits(std::size_t task, std::span<const double> theta) const;
  std::vector<double> log_probs(std::size_t task, std::span<const double> theta) const;
  std::vector<double> probs(std::size_t task, std::span<const double> theta) const;

  // grad_theta += (d logits / d theta)^T grad_logits
  void accumulate_pullback(std::size_t task, std::span<const double> grad_logits,
                           std::span<double> grad_theta) const;
  // (d logits / d theta) u
  std::vector<double> pushforward(std::size_t task, std::span<const double> u) const;

  // Greedy choice; ties go to the lowest index.
  std::size_t argmax(std::size_t task) const;

 private:
  CategoricalPolicy() = default;

  PolicyMode mode_ = PolicyMode::kTabular;
  std::size_t num_params_ = 0;
  std::vector<std::size_t> counts_;
  std::vector<std::size_t> offsets_;          // tabular
  std::vector<std::vector<double>> features_;  // featurized, row-major C x dim
  std::vector<double> theta_;
  std::vector<double> theta_old_;
  std::vector<double> theta_ref_;
};

// G sampled candidates for one prompt plus everything derived from them.
struct Group {
  std::size_t task = 0;
  std::vector<std::size_t> candidates;
  std::vector<double> rewards;
  double mean = 0.0;
  double stddev = 0.0;
  std::vector<double> advantages;
  std::vector<double> ratios;
};

struct TrainConfig {
  std::size_t group_size = 8;
  double eps_adv = 1e-4;
  double eps_clip = 0.2;
  double beta_entropy = 0.001;
  double beta_kl = 0.001;
  double lambda_reg = 0.01;
  double learning_rate = 1e-5;
  std::size_t steps = 0;
  std::size_t prompts_per_step = 0;  // 0: every prompt each step
  std::size_t eval_every = 25;
  std::size_t sft_steps = 50;
  double sft_learning_rate = 0.5;
  std::string objective_mode = "knowrl";  // knowrl | grpo_reg
  AdvantageNorm adv_norm = AdvantageNorm::kMeanStd;
  EntropySign entropy_sign = EntropySign::kPenalty;
  std::string policy_mode = "auto";  // auto | tabular | featurized
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
};

// G draws from pi_old(.|x); fills candidates only.
Group sample_group(const CategoricalPolicy& policy, std::size_t task, std::size_t group_size,
                   Rng& rng);

// Fills rewards, statistics and advantages.
void assign_rewards(Group& group, std::vector<double> rewards, const TrainConfig& config);

double importance_ratio(const CategoricalPolicy& policy, std::size_t task,
                        std::size_t candidate, std::span<const double> theta,
                        std::span<const double> theta_old);

struct EntropyKl {
  double entropy = 0.0;
  double kl = 0.0;
};

EntropyKl entropy_and_kl(const CategoricalPolicy& policy, std::size_t task,
                         std::span<const double> theta, std::span<const double> theta_ref);

struct SftExample {
  std::size_t task = 0;
  std::size_t target = 0;
};

// -sum log P_theta(target | prompt)
double sft_loss(const CategoricalPolicy& policy, std::span<const SftExample> examples,
                std::span<const double> theta);
std::vector<double> sft_gradient(const CategoricalPolicy& policy,
                                 std::span<const SftExample> examples,
                                 std::span<const double> theta);
// One plain gradient step on the current parameters; returns the loss
// before the step.
double sft_step(CategoricalPolicy& policy, std::span<const SftExample> examples, double lr);

// Mean over all samples of min(rA, clip(r)A) - lambda * ||grad_theta r||^2,
// with r taken against the policy's old parameters.
double grpo_reg_objective(const CategoricalPolicy& policy, std::span<const Group> groups,
                          double lambda, double eps_clip, std::span<const double> theta);

struct LossParts {
  double surrogate = 0.0;     // J-hat, averaged over prompts
  double mean_entropy = 0.0;  // E_H
  double mean_kl = 0.0;       // E_KL
  double objective = 0.0;     // grpo_reg objective (grpo_reg mode)
  double loss = 0.0;
};

// Loss at `theta`; advantages, old and reference parameters are constants.
LossParts loss_parts(const CategoricalPolicy& policy, std::span<const Group> groups,
                     const TrainConfig& config, std::span<const double> theta);
double loss_value(const CategoricalPolicy& policy, std::span<const Group> groups,
                  const TrainConfig& config, std::span<const double> theta);

// Exact gradient of loss_value; min/clip use the branch-active subgradient.
std::vector<double> grad_loss(const CategoricalPolicy& policy, std::span<const Group> groups,
                              const TrainConfig& config, std::span<const double> theta);

}  // namespace knowrl

#endif  // KNOWRL_POLICY_HPP_
