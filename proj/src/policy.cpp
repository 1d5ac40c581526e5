#include "knowrl/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "knowrl/kernels.hpp"
#include "knowrl/text.hpp"

namespace knowrl {

namespace {

using json = nlohmann::json;

// d H / d z_k = -p_k (log p_k + H)
std::vector<double> entropy_logit_grad(std::span<const double> log_p) {
  const double h = categorical_entropy(log_p);
  std::vector<double> g(log_p.size());
  for (std::size_t k = 0; k < g.size(); ++k) g[k] = -std::exp(log_p[k]) * (log_p[k] + h);
  return g;
}

// d KL(p||q) / d z_k = p_k (log p_k - log q_k - KL)
std::vector<double> kl_logit_grad(std::span<const double> log_p, std::span<const double> log_q) {
  const double kl = categorical_kl(log_p, log_q);
  std::vector<double> g(log_p.size());
  for (std::size_t k = 0; k < g.size(); ++k) {
    g[k] = std::exp(log_p[k]) * (log_p[k] - log_q[k] - kl);
  }
  return g;
}

bool is_grpo_reg(const TrainConfig& c) { return c.objective_mode == "grpo_reg"; }

std::size_t total_samples(std::span<const Group> groups) {
  std::size_t n = 0;
  for (const auto& g : groups) n += g.candidates.size();
  return n;
}

}  // namespace

void PromptTask::validate() const {
  if (prompt_id.empty()) throw ValidationError("task without prompt_id");
  if (candidates.size() < 2) {
    throw ValidationError("task " + prompt_id + " needs at least 2 candidates");
  }
  std::set<std::string> seen(candidates.begin(), candidates.end());
  if (seen.size() != candidates.size()) {
    throw ValidationError("task " + prompt_id + " has duplicate candidates");
  }
  if (!features.empty()) {
    if (features.size() != candidates.size()) {
      throw ValidationError("task " + prompt_id + ": one feature row per candidate required");
    }
    for (const auto& row : features) {
      if (row.size() != features.front().size() || row.empty()) {
        throw ValidationError("task " + prompt_id + ": ragged feature rows");
      }
    }
  }
}

std::vector<PromptTask> read_tasks(std::istream& in) {
  std::vector<PromptTask> tasks;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    PromptTask t;
    try {
      const auto j = json::parse(line);
      t.prompt_id = j.at("prompt_id").get<std::string>();
      t.prompt_text = j.value("prompt_text", std::string());
      t.gold = j.at("gold").get<std::string>();
      t.candidates = j.at("candidates").get<std::vector<std::string>>();
      if (j.contains("aliases")) t.aliases = j["aliases"].get<std::vector<std::string>>();
      if (j.contains("features")) {
        t.features = j["features"].get<std::vector<std::vector<double>>>();
      }
    } catch (const json::exception& e) {
      throw ParseError(std::string("malformed task line: ") + e.what() + "; line", line_no);
    }
    t.validate();
    tasks.push_back(std::move(t));
  }
  return tasks;
}

std::vector<PromptTask> read_tasks(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open tasks " + path);
  return read_tasks(in);
}

nlohmann::json to_json(const PromptTask& task) {
  json j{{"prompt_id", task.prompt_id},
         {"prompt_text", task.prompt_text},
         {"gold", task.gold},
         {"candidates", task.candidates}};
  if (!task.aliases.empty()) j["aliases"] = task.aliases;
  if (!task.features.empty()) j["features"] = task.features;
  return j;
}

std::string to_string(PolicyMode m) {
  return m == PolicyMode::kTabular ? "tabular" : "featurized";
}

PolicyMode parse_policy_mode(const std::string& s) {
  if (s == "tabular") return PolicyMode::kTabular;
  if (s == "featurized") return PolicyMode::kFeaturized;
  throw ValidationError("unknown policy mode: " + s);
}

CategoricalPolicy CategoricalPolicy::tabular(const std::vector<PromptTask>& tasks) {
  CategoricalPolicy p;
  p.mode_ = PolicyMode::kTabular;
  for (const auto& t : tasks) {
    t.validate();
    p.offsets_.push_back(p.num_params_);
    p.counts_.push_back(t.candidates.size());
    p.num_params_ += t.candidates.size();
  }
  p.theta_.assign(p.num_params_, 0.0);
  p.theta_old_ = p.theta_ref_ = p.theta_;
  return p;
}

CategoricalPolicy CategoricalPolicy::featurized(const std::vector<PromptTask>& tasks) {
  CategoricalPolicy p;
  p.mode_ = PolicyMode::kFeaturized;
  for (const auto& t : tasks) {
    t.validate();
    if (t.features.empty()) {
      throw ValidationError("featurized policy: task " + t.prompt_id + " has no features");
    }
    const std::size_t dim = t.features.front().size();
    if (p.num_params_ == 0) p.num_params_ = dim;
    if (dim != p.num_params_) {
      throw ValidationError("featurized policy: feature width differs for " + t.prompt_id);
    }
    std::vector<double> flat;
    for (const auto& row : t.features) flat.insert(flat.end(), row.begin(), row.end());
    p.features_.push_back(std::move(flat));
    p.counts_.push_back(t.candidates.size());
  }
  p.theta_.assign(p.num_params_, 0.0);
  p.theta_old_ = p.theta_ref_ = p.theta_;
  return p;
}

void CategoricalPolicy::set_params(std::vector<double> theta) {
  if (theta.size() != num_params_) throw ValidationError("parameter vector has wrong size");
  theta_ = std::move(theta);
}

void CategoricalPolicy::set_reference(std::vector<double> theta_ref) {
  if (theta_ref.size() != num_params_) throw ValidationError("reference vector has wrong size");
  theta_ref_ = std::move(theta_ref);
}

void CategoricalPolicy::freeze_reference() {
  theta_ref_ = theta_;
  theta_old_ = theta_;
}

std::vector<double> CategoricalPolicy::logits(std::size_t task,
                                              std::span<const double> theta) const {
  const std::size_t c = counts_.at(task);
  std::vector<double> z(c, 0.0);
  if (mode_ == PolicyMode::kTabular) {
    for (std::size_t i = 0; i < c; ++i) z[i] = theta[offsets_[task] + i];
  } else {
    const auto& phi = features_[task];
    for (std::size_t i = 0; i < c; ++i) {
      z[i] = dot(std::span<const double>(phi.data() + i * num_params_, num_params_), theta);
    }
  }
  return z;
}

std::vector<double> CategoricalPolicy::log_probs(std::size_t task,
                                                 std::span<const double> theta) const {
  return log_softmax(logits(task, theta));
}

std::vector<double> CategoricalPolicy::probs(std::size_t task,
                                             std::span<const double> theta) const {
  return softmax(logits(task, theta));
}

void CategoricalPolicy::accumulate_pullback(std::size_t task,
                                            std::span<const double> grad_logits,
                                            std::span<double> grad_theta) const {
  const std::size_t c = counts_.at(task);
  if (mode_ == PolicyMode::kTabular) {
    for (std::size_t i = 0; i < c; ++i) grad_theta[offsets_[task] + i] += grad_logits[i];
  } else {
    const auto& phi = features_[task];
    for (std::size_t i = 0; i < c; ++i) {
      for (std::size_t d = 0; d < num_params_; ++d) {
        grad_theta[d] += grad_logits[i] * phi[i * num_params_ + d];
      }
    }
  }
}

std::vector<double> CategoricalPolicy::pushforward(std::size_t task,
                                                   std::span<const double> u) const {
  return logits(task, u);
}

std::size_t CategoricalPolicy::argmax(std::size_t task) const {
  const auto z = logits(task, theta_);
  return static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
}

void TrainConfig::validate() const {
  if (group_size < 2) throw ValidationError("group_size must be >= 2");
  if (!(eps_adv > 0.0)) throw ValidationError("epsilon_adv must be > 0");
  if (!(eps_clip > 0.0 && eps_clip < 1.0)) throw ValidationError("epsilon_clip must be in (0,1)");
  if (!(beta_entropy >= 0.0)) throw ValidationError("beta_entropy must be >= 0");
  if (!(beta_kl >= 0.0)) throw ValidationError("beta_kl must be >= 0");
  if (!(lambda_reg >= 0.0)) throw ValidationError("lambda_reg must be >= 0");
  if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be > 0");
  if (!(sft_learning_rate > 0.0)) throw ValidationError("sft_learning_rate must be > 0");
  if (eval_every == 0) throw ValidationError("eval_every must be >= 1");
  if (objective_mode != "knowrl" && objective_mode != "grpo_reg") {
    throw ValidationError("objective_mode must be knowrl or grpo_reg");
  }
  if (policy_mode != "auto" && policy_mode != "tabular" && policy_mode != "featurized") {
    throw ValidationError("policy_mode must be auto, tabular or featurized");
  }
}

nlohmann::json TrainConfig::to_json() const {
  return {{"group_size", group_size},
          {"epsilon_adv", eps_adv},
          {"epsilon_clip", eps_clip},
          {"beta_entropy", beta_entropy},
          {"beta_kl", beta_kl},
          {"lambda_reg", lambda_reg},
          {"learning_rate", learning_rate},
          {"steps", steps},
          {"prompts_per_step", prompts_per_step},
          {"eval_every", eval_every},
          {"sft_steps", sft_steps},
          {"sft_learning_rate", sft_learning_rate},
          {"objective_mode", objective_mode},
          {"adv_norm", knowrl::to_string(adv_norm)},
          {"entropy_sign", knowrl::to_string(entropy_sign)},
          {"policy_mode", policy_mode}};
}

Group sample_group(const CategoricalPolicy& policy, std::size_t task, std::size_t group_size,
                   Rng& rng) {
  if (group_size < 2) throw ValidationError("group_size must be >= 2");
  Group g;
  g.task = task;
  const auto p = policy.probs(task, policy.old_params());
  g.candidates.resize(group_size);
  for (auto& c : g.candidates) c = kernels::sample_categorical(p, rng.uniform());
  return g;
}

void assign_rewards(Group& group, std::vector<double> rewards, const TrainConfig& config) {
  if (rewards.size() != group.candidates.size()) {
    throw Error("assign_rewards: one reward per sampled candidate required");
  }
  const auto st = group_stats(rewards);
  group.mean = st.mean;
  group.stddev = st.stddev;
  group.advantages = group_advantages(rewards, config.eps_adv, config.adv_norm);
  group.rewards = std::move(rewards);
}

double importance_ratio(const CategoricalPolicy& policy, std::size_t task,
                        std::size_t candidate, std::span<const double> theta,
                        std::span<const double> theta_old) {
  const auto lp = policy.log_probs(task, theta);
  const auto lp_old = policy.log_probs(task, theta_old);
  return std::exp(lp.at(candidate) - lp_old.at(candidate));
}

EntropyKl entropy_and_kl(const CategoricalPolicy& policy, std::size_t task,
                         std::span<const double> theta, std::span<const double> theta_ref) {
  const auto lp = policy.log_probs(task, theta);
  const auto lq = policy.log_probs(task, theta_ref);
  return {categorical_entropy(lp), categorical_kl(lp, lq)};
}

double sft_loss(const CategoricalPolicy& policy, std::span<const SftExample> examples,
                std::span<const double> theta) {
  double loss = 0.0;
  for (const auto& ex : examples) loss -= policy.log_probs(ex.task, theta).at(ex.target);
  return loss;
}

std::vector<double> sft_gradient(const CategoricalPolicy& policy,
                                 std::span<const SftExample> examples,
                                 std::span<const double> theta) {
  std::vector<double> grad(policy.num_params(), 0.0);
  for (const auto& ex : examples) {
    auto g = policy.probs(ex.task, theta);  // d(-log p_y)/dz = p - e_y
    g.at(ex.target) -= 1.0;
    policy.accumulate_pullback(ex.task, g, grad);
  }
  return grad;
}

double sft_step(CategoricalPolicy& policy, std::span<const SftExample> examples, double lr) {
  if (examples.empty()) throw ValidationError("sft_step: no examples");
  const double before = sft_loss(policy, examples, policy.params());
  const auto grad = sft_gradient(policy, examples, policy.params());
  auto theta = policy.params();
  for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= lr * grad[i];
  policy.set_params(std::move(theta));
  return before;
}

double grpo_reg_objective(const CategoricalPolicy& policy, std::span<const Group> groups,
                          double lambda, double eps_clip, std::span<const double> theta) {
  const std::size_t n = total_samples(groups);
  if (n == 0) return 0.0;
  std::vector<double> u(policy.num_params());
  double total = 0.0;
  for (const auto& g : groups) {
    const auto lp = policy.log_probs(g.task, theta);
    const auto lp_old = policy.log_probs(g.task, policy.old_params());
    for (std::size_t s = 0; s < g.candidates.size(); ++s) {
      const std::size_t c = g.candidates[s];
      const double r = std::exp(lp[c] - lp_old[c]);
      // grad r = r * J^T (e_c - p)
      std::vector<double> v(lp.size());
      for (std::size_t k = 0; k < v.size(); ++k) v[k] = (k == c ? 1.0 : 0.0) - std::exp(lp[k]);
      std::fill(u.begin(), u.end(), 0.0);
      policy.accumulate_pullback(g.task, v, u);
      total += surrogate_term(r, g.advantages[s], eps_clip) - lambda * r * r * dot(u, u);
    }
  }
  return total / static_cast<double>(n);
}

LossParts loss_parts(const CategoricalPolicy& policy, std::span<const Group> groups,
                     const TrainConfig& config, std::span<const double> theta) {
  LossParts parts;
  if (groups.empty()) return parts;
  const double b = static_cast<double>(groups.size());
  for (const auto& g : groups) {
    const auto lp = policy.log_probs(g.task, theta);
    const auto lp_old = policy.log_probs(g.task, policy.old_params());
    const auto lq = policy.log_probs(g.task, policy.ref_params());
    std::vector<double> ratios(g.candidates.size());
    for (std::size_t s = 0; s < ratios.size(); ++s) {
      ratios[s] = std::exp(lp[g.candidates[s]] - lp_old[g.candidates[s]]);
    }
    parts.surrogate += clipped_surrogate(ratios, g.advantages, config.eps_clip) / b;
    parts.mean_entropy += categorical_entropy(lp) / b;
    parts.mean_kl += categorical_kl(lp, lq) / b;
  }
  if (is_grpo_reg(config)) {
    parts.objective =
        grpo_reg_objective(policy, groups, config.lambda_reg, config.eps_clip, theta);
    parts.loss = -parts.objective;
  } else {
    parts.objective = parts.surrogate;
    parts.loss = knowrl_loss(parts.surrogate, parts.mean_entropy, parts.mean_kl,
                             config.beta_entropy, config.beta_kl, config.entropy_sign);
  }
  return parts;
}

double loss_value(const CategoricalPolicy& policy, std::span<const Group> groups,
                  const TrainConfig& config, std::span<const double> theta) {
  return loss_parts(policy, groups, config, theta).loss;
}

std::vector<double> grad_loss(const CategoricalPolicy& policy, std::span<const Group> groups,
                              const TrainConfig& config, std::span<const double> theta) {
  std::vector<double> grad(policy.num_params(), 0.0);
  if (groups.empty()) return grad;
  const bool reg_mode = is_grpo_reg(config);
  const double b = static_cast<double>(groups.size());
  const double n = static_cast<double>(total_samples(groups));
  const double h_sign = config.entropy_sign == EntropySign::kPenalty ? 1.0 : -1.0;
  std::vector<double> u(policy.num_params());

  for (const auto& g : groups) {
    const auto lp = policy.log_probs(g.task, theta);
    const auto lp_old = policy.log_probs(g.task, policy.old_params());
    const std::size_t cands = lp.size();
    std::vector<double> p(cands);
    for (std::size_t k = 0; k < cands; ++k) p[k] = std::exp(lp[k]);
    std::vector<double> gz(cands, 0.0);  // d loss / d logits for this prompt

    // Per-sample weight: knowrl averages within the group then over prompts,
    // grpo_reg averages over every sample.
    const double w = reg_mode ? 1.0 / n : 1.0 / (b * static_cast<double>(g.candidates.size()));
    for (std::size_t s = 0; s < g.candidates.size(); ++s) {
      const std::size_t c = g.candidates[s];
      const double r = std::exp(lp[c] - lp_old[c]);
      const double slope = surrogate_term_slope(r, g.advantages[s], config.eps_clip);
      std::vector<double> v(cands);  // e_c - p = d log p_c / d z
      for (std::size_t k = 0; k < cands; ++k) v[k] = (k == c ? 1.0 : 0.0) - p[k];

      // d(objective term)/dz, then loss = -objective.
      std::vector<double> d_obj(cands);
      for (std::size_t k = 0; k < cands; ++k) d_obj[k] = slope * r * v[k];

      if (reg_mode && config.lambda_reg != 0.0) {
        // N = r^2 ||u||^2 with u = J^T v;
        // dN/dtheta = 2 r^2 (||u||^2 u - J^T S J u), S = diag(p) - p p^T.
        std::fill(u.begin(), u.end(), 0.0);
        policy.accumulate_pullback(g.task, v, u);
        const double u2 = dot(u, u);
        const auto ju = policy.pushforward(g.task, u);
        double pju = 0.0;
        for (std::size_t k = 0; k < cands; ++k) pju += p[k] * ju[k];
        const double scale = 2.0 * config.lambda_reg * r * r;
        for (std::size_t k = 0; k < cands; ++k) {
          const double s_ju = p[k] * ju[k] - p[k] * pju;
          d_obj[k] -= scale * (u2 * v[k] - s_ju);
        }
      }
      for (std::size_t k = 0; k < cands; ++k) gz[k] -= w * d_obj[k];
    }

    if (!reg_mode) {
      const auto lq = policy.log_probs(g.task, policy.ref_params());
      const auto dh = entropy_logit_grad(lp);
      const auto dkl = kl_logit_grad(lp, lq);
      for (std::size_t k = 0; k < cands; ++k) {
        gz[k] += (h_sign * config.beta_entropy * dh[k] + config.beta_kl * dkl[k]) / b;
      }
    }
    policy.accumulate_pullback(g.task, gz, grad);
  }
  return grad;
}

}  // namespace knowrl
