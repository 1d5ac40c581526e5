#ifndef KNOWRL_OBJECTIVE_HPP_
#define KNOWRL_OBJECTIVE_HPP_

#include <span>
#include <string>
#include <vector>

// Scalar pieces of the group-relative objective: advantage normalization,
// the clipped surrogate, categorical entropy / KL and the regularized loss.
namespace knowrl {

enum class AdvantageNorm { kMeanStd, kMeanOnly };
enum class EntropySign {
  kPenalty,  // L = -J + bH*E_H + bKL*E_KL
  kBonus,  // L = -J - bH*E_H + bKL*E_KL
};

std::string to_string(AdvantageNorm n);
std::string to_string(EntropySign s);
AdvantageNorm parse_advantage_norm(const std::string& s);
EntropySign parse_entropy_sign(const std::string& s);

struct GroupStats {
  double mean = 0.0;
  double stddev = 0.0;  // population (divide by G)
};

GroupStats group_stats(std::span<const double> rewards);

// mean_std: (R - mu) / (sigma + eps); mean_only: R - mu.
std::vector<double> group_advantages(std::span<const double> rewards,
                                     double eps_adv, AdvantageNorm norm);

double clip(double x, double lo, double hi);

// min(rho*A, clip(rho, 1-eps, 1+eps)*A) for one sample.
double surrogate_term(double ratio, double advantage, double eps_clip);

// Mean of surrogate_term over the group.
double clipped_surrogate(std::span<const double> ratios,
                         std::span<const double> advantages, double eps_clip);

// d surrogate_term / d ratio with the branch the min() selects. Zero when
// the clipped branch is selected and saturated.
double surrogate_term_slope(double ratio, double advantage, double eps_clip);

std::vector<double> softmax(std::span<const double> logits);
std::vector<double> log_softmax(std::span<const double> logits);

// -sum p log p over a categorical given its log-probabilities.
double categorical_entropy(std::span<const double> log_probs);
// KL(p || q) given log p and log q.
double categorical_kl(std::span<const double> log_p, std::span<const double> log_q);

double knowrl_loss(double surrogate, double mean_entropy, double mean_kl,
                   double beta_entropy, double beta_kl, EntropySign sign);

}  // namespace knowrl

#endif  // KNOWRL_OBJECTIVE_HPP_
