// Brute-force reference implementations shared by the unit and acceptance tests.
#ifndef KNOWRL_TESTS_ORACLES_HPP_
#define KNOWRL_TESTS_ORACLES_HPP_

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "knowrl/corpus.hpp"
#include "knowrl/embedding.hpp"
#include "knowrl/kernels.hpp"
#include "knowrl/text.hpp"

namespace knowrl::testing {

// Fold case, keep titles equal to or containing the entity, rank exact <
// shorter < lexicographic < id, cap 3.
inline std::vector<std::string> oracle_match(const std::vector<std::string>& titles,
                                             const std::string& entity) {
  const auto needle = text::to_lower(entity);
  std::vector<std::tuple<int, std::size_t, std::string, std::size_t>> hits;
  for (std::size_t i = 0; i < titles.size(); ++i) {
    const auto t = text::to_lower(titles[i]);
    if (t == needle) hits.emplace_back(0, t.size(), t, i);
    else if (t.find(needle) != std::string::npos) hits.emplace_back(1, t.size(), t, i);
  }
  std::sort(hits.begin(), hits.end());
  std::vector<std::string> out;
  for (std::size_t k = 0; k < hits.size() && k < 3; ++k) out.push_back(titles[std::get<3>(hits[k])]);
  return out;
}

inline const std::vector<std::string> kThirtyTitles = {
    "Paris", "Paris Hilton", "Paris, Texas", "Paris (mythology)", "Paris Saint-Germain",
    "Parish", "Mercury", "Mercury (planet)", "Mercury (element)", "Freddie Mercury",
    "Mercury Records", "Iran", "Irania", "Iranian Plateau", "Batgirl", "Barbara Gordon",
    "Barbara Gordon Batgirl", "Libya", "Lake Victoria", "Victoria", "Victoria Beckham",
    "Queen Victoria", "Victoria, British Columbia", "Armenia", "ARMENIA", "Georgia",
    "Georgia (country)", "Georgia (U.S. state)", "Niall Ferguson", "Niall Ferguson (historian)"};

inline const std::vector<std::string> kThirtyTitleQueries = {
    "Paris", "paris", "Mercury", "Iran", "Batgirl", "Barbara Gordon", "Victoria", "Armenia",
    "Georgia", "Niall Ferguson", "a", "ia", "Texas", "Nowhere", "(", "Gordon Batgirl"};

// Semantic dedup by explicit pairwise cosine and flood fill. Returns the ids
// that survive, in input order.
inline std::vector<std::string> oracle_semantic_dedup(const std::vector<QAItem>& items,
                                                      double threshold,
                                                      const Embedder& embedder) {
  const std::size_t n = items.size();
  std::vector<std::vector<double>> v;
  for (const auto& it : items) v.push_back(embedder.embed(text::normalize_question(it.question)));
  std::vector<std::vector<std::size_t>> adj(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double d = 0, ni = 0, nj = 0;
      for (std::size_t k = 0; k < v[i].size(); ++k) {
        d += v[i][k] * v[j][k];
        ni += v[i][k] * v[i][k];
        nj += v[j][k] * v[j][k];
      }
      const double c = (ni == 0 || nj == 0) ? 0.0 : d / std::sqrt(ni * nj);
      if (c > threshold) {
        adj[i].push_back(j);
        adj[j].push_back(i);
      }
    }
  }
  std::vector<int> comp(n, -1);
  std::vector<std::string> best;
  for (std::size_t s = 0; s < n; ++s) {
    if (comp[s] >= 0) continue;
    const int c = static_cast<int>(best.size());
    best.push_back(items[s].id);
    std::vector<std::size_t> stack{s};
    comp[s] = c;
    while (!stack.empty()) {
      const auto x = stack.back();
      stack.pop_back();
      best[c] = std::min(best[c], items[x].id);
      for (auto y : adj[x]) {
        if (comp[y] < 0) {
          comp[y] = c;
          stack.push_back(y);
        }
      }
    }
  }
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (items[i].id == best[comp[i]]) out.push_back(items[i].id);
  }
  return out;
}

// Group surrogate written out from the definitions: population sigma,
// (R - mu) / (sigma + eps) or R - mu, then the mean of
// min(rho A, clip(rho) A).
inline double oracle_group_surrogate(const kernels::SurrogateProblem& p,
                                     const std::vector<std::size_t>& group) {
  const double g = static_cast<double>(group.size());
  double mu = 0.0;
  for (auto k : group) mu += p.rewards[k];
  mu /= g;
  double var = 0.0;
  for (auto k : group) var += (p.rewards[k] - mu) * (p.rewards[k] - mu);
  const double sigma = std::sqrt(var / g);
  double total = 0.0;
  for (auto k : group) {
    const double a = p.norm == AdvantageNorm::kMeanStd ? (p.rewards[k] - mu) / (sigma + p.eps_adv)
                                                       : p.rewards[k] - mu;
    const double rho = p.ratios[k];
    const double clipped = std::min(std::max(rho, 1.0 - p.eps_clip), 1.0 + p.eps_clip);
    total += std::min(rho * a, clipped * a);
  }
  return total / g;
}

// Exact expectation over all C^G groups drawn from old_probs.
inline double oracle_enumerate(const kernels::SurrogateProblem& p) {
  const std::size_t c = p.old_probs.size();
  std::vector<std::size_t> g(p.group_size, 0);
  double total = 0.0;
  for (;;) {
    double w = 1.0;
    for (auto k : g) w *= p.old_probs[k];
    total += w * oracle_group_surrogate(p, g);
    std::size_t pos = 0;
    while (pos < g.size() && ++g[pos] == c) g[pos++] = 0;
    if (pos == g.size()) break;
  }
  return total;
}

// Questions drawn from a small vocabulary so that near duplicates are common.
template <class Rng>
std::vector<QAItem> random_questions(Rng& rng, std::size_t n) {
  static const std::vector<std::string> vocab = {"river", "bank", "city", "king", "war",
                                                 "north", "gold",  "ship", "song", "year"};
  std::vector<QAItem> items;
  for (std::size_t i = 0; i < n; ++i) {
    QAItem it;
    char id[16];
    std::snprintf(id, sizeof(id), "r%03zu", (i * 7919) % 1000);
    it.id = id + std::to_string(i);
    const std::size_t len = 2 + rng() % 6;
    it.question = "what";
    for (std::size_t k = 0; k < len; ++k) it.question += " " + vocab[rng() % 4 + (rng() % 3 == 0 ? 4 : 0)];
    it.question += "?";
    it.normalized_question = text::normalize_question(it.question);
    it.answer = "x";
    items.push_back(std::move(it));
  }
  return items;
}

}  // namespace knowrl::testing

#endif  // KNOWRL_TESTS_ORACLES_HPP_
