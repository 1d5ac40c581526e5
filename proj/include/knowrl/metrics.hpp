#ifndef KNOWRL_METRICS_HPP_
#define KNOWRL_METRICS_HPP_

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "knowrl/common.hpp"
#include "knowrl/reward.hpp"

namespace knowrl {

struct OutcomeCounts {
  std::size_t n_total = 0;
  std::size_t n_correct = 0;
  std::size_t n_incorrect = 0;
  std::size_t n_refused = 0;

  void add(Verdict v);
  bool operator==(const OutcomeCounts&) const = default;
};

struct MetricSet {
  double incorrect_rate = 0.0;
  double refusal_rate = 0.0;
  double paq = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
};

OutcomeCounts tally(std::span<const Verdict> verdicts);

// Judges each rollout's extracted answer. `aliases` may be empty or aligned.
OutcomeCounts classify_outcomes(std::span<const Rollout> rollouts,
                                std::span<const std::string> golds, const Judge& judge,
                                std::span<const std::vector<std::string>> aliases = {});

// paq = c / (c + i) and f1 = 2 paq acc / (paq + acc), each 0 on a zero
// denominator. Throws ValidationError on an empty tally.
MetricSet compute_metrics(const OutcomeCounts& counts);

struct SeriesPoint {
  std::size_t step = 0;
  MetricSet metrics;
  double mean_reward = 0.0;
  double mean_fact = 0.0;
  double mean_len = 0.0;
};

inline constexpr const char* kReportHeader =
    "step,incorrect_rate,refusal_rate,paq,f1,accuracy,mean_reward,mean_fact,mean_len";

nlohmann::json to_json(const SeriesPoint& p);

// Writes `csv_path` and a JSON mirror next to it (same stem, .json). `meta`
// is embedded in the JSON document when non-null.
void write_report(std::span<const SeriesPoint> series, const std::filesystem::path& csv_path,
                  const nlohmann::json& meta = nullptr);

std::vector<SeriesPoint> read_report_csv(const std::filesystem::path& csv_path);

// Shortest text that parses back to the same double.
std::string format_double(double x);

}  // namespace knowrl

#endif  // KNOWRL_METRICS_HPP_
