#include "knowrl/objective.hpp"

#include <algorithm>
#include <cmath>

#include "knowrl/common.hpp"

namespace knowrl {

std::string to_string(AdvantageNorm n) {
  return n == AdvantageNorm::kMeanStd ? "mean_std" : "mean_only";
}

std::string to_string(EntropySign s) {
  return s == EntropySign::kPenalty ? "penalty" : "bonus";
}

AdvantageNorm parse_advantage_norm(const std::string& s) {
  if (s == "mean_std") return AdvantageNorm::kMeanStd;
  if (s == "mean_only") return AdvantageNorm::kMeanOnly;
  throw ValidationError("unknown adv_norm: " + s);
}

EntropySign parse_entropy_sign(const std::string& s) {
  if (s == "penalty") return EntropySign::kPenalty;
  if (s == "bonus") return EntropySign::kBonus;
  throw ValidationError("unknown entropy_sign: " + s);
}

GroupStats group_stats(std::span<const double> rewards) {
  GroupStats st;
  if (rewards.empty()) return st;
  const double n = static_cast<double>(rewards.size());
  for (double r : rewards) st.mean += r;
  st.mean /= n;
  double var = 0.0;
  for (double r : rewards) var += (r - st.mean) * (r - st.mean);
  st.stddev = std::sqrt(var / n);
  return st;
}

std::vector<double> group_advantages(std::span<const double> rewards,
                                     double eps_adv, AdvantageNorm norm) {
  const GroupStats st = group_stats(rewards);
  std::vector<double> adv(rewards.size());
  for (std::size_t g = 0; g < rewards.size(); ++g) {
    const double centered = rewards[g] - st.mean;
    adv[g] = norm == AdvantageNorm::kMeanStd ? centered / (st.stddev + eps_adv)
                                             : centered;
  }
  return adv;
}

double clip(double x, double lo, double hi) { return std::min(std::max(x, lo), hi); }

double surrogate_term(double ratio, double advantage, double eps_clip) {
  const double unclipped = ratio * advantage;
  const double clipped = clip(ratio, 1.0 - eps_clip, 1.0 + eps_clip) * advantage;
  return std::min(unclipped, clipped);
}

double clipped_surrogate(std::span<const double> ratios,
                         std::span<const double> advantages, double eps_clip) {
  if (ratios.size() != advantages.size() || ratios.empty()) {
    throw Error("clipped_surrogate: ratios/advantages must be equal-length and nonempty");
  }
  double s = 0.0;
  for (std::size_t g = 0; g < ratios.size(); ++g) {
    s += surrogate_term(ratios[g], advantages[g], eps_clip);
  }
  return s / static_cast<double>(ratios.size());
}

double surrogate_term_slope(double ratio, double advantage, double eps_clip) {
  const double lo = 1.0 - eps_clip;
  const double hi = 1.0 + eps_clip;
  const double unclipped = ratio * advantage;
  const double clipped = clip(ratio, lo, hi) * advantage;
  if (unclipped <= clipped) return advantage;
  return (ratio > lo && ratio < hi) ? advantage : 0.0;
}

std::vector<double> log_softmax(std::span<const double> logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double s = 0.0;
  for (double z : logits) s += std::exp(z - m);
  const double lse = m + std::log(s);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

std::vector<double> softmax(std::span<const double> logits) {
  auto out = log_softmax(logits);
  for (double& x : out) x = std::exp(x);
  return out;
}

double categorical_entropy(std::span<const double> log_probs) {
  double h = 0.0;
  for (double lp : log_probs) h -= std::exp(lp) * lp;
  return h;
}

double categorical_kl(std::span<const double> log_p, std::span<const double> log_q) {
  double kl = 0.0;
  for (std::size_t i = 0; i < log_p.size(); ++i) {
    kl += std::exp(log_p[i]) * (log_p[i] - log_q[i]);
  }
  return kl;
}

double knowrl_loss(double surrogate, double mean_entropy, double mean_kl,
                   double beta_entropy, double beta_kl, EntropySign sign) {
  const double h = sign == EntropySign::kPenalty ? beta_entropy * mean_entropy
                                               : -beta_entropy * mean_entropy;
  return -surrogate + h + beta_kl * mean_kl;
}

}  // namespace knowrl
