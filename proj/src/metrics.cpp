#include "knowrl/metrics.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "knowrl/text.hpp"

namespace knowrl {

void OutcomeCounts::add(Verdict v) {
  ++n_total;
  switch (v) {
    case Verdict::kCorrect: ++n_correct; break;
    case Verdict::kRefusal: ++n_refused; break;
    case Verdict::kIncorrect: ++n_incorrect; break;
  }
}

OutcomeCounts tally(std::span<const Verdict> verdicts) {
  OutcomeCounts c;
  for (auto v : verdicts) c.add(v);
  return c;
}

OutcomeCounts classify_outcomes(std::span<const Rollout> rollouts,
                                std::span<const std::string> golds, const Judge& judge,
                                std::span<const std::vector<std::string>> aliases) {
  if (rollouts.size() != golds.size()) {
    throw ValidationError("classify_outcomes: " + std::to_string(rollouts.size()) +
                          " rollouts but " + std::to_string(golds.size()) + " golds");
  }
  if (!aliases.empty() && aliases.size() != golds.size()) {
    throw ValidationError("classify_outcomes: alias list not aligned with golds");
  }
  OutcomeCounts c;
  for (std::size_t i = 0; i < rollouts.size(); ++i) {
    const std::span<const std::string> al =
        aliases.empty() ? std::span<const std::string>() : std::span<const std::string>(aliases[i]);
    c.add(judge.judge(rollouts[i].answer_text, golds[i], al));
  }
  return c;
}

MetricSet compute_metrics(const OutcomeCounts& counts) {
  if (counts.n_total == 0) throw ValidationError("compute_metrics: no outcomes");
  if (counts.n_correct + counts.n_incorrect + counts.n_refused != counts.n_total) {
    throw ValidationError("compute_metrics: counts do not add up to n_total");
  }
  const double n = static_cast<double>(counts.n_total);
  MetricSet m;
  m.incorrect_rate = static_cast<double>(counts.n_incorrect) / n;
  m.refusal_rate = static_cast<double>(counts.n_refused) / n;
  m.accuracy = static_cast<double>(counts.n_correct) / n;
  const std::size_t answered = counts.n_correct + counts.n_incorrect;
  m.paq = answered == 0 ? 0.0
                        : static_cast<double>(counts.n_correct) / static_cast<double>(answered);
  m.f1 = (m.paq + m.accuracy) == 0.0 ? 0.0 : 2.0 * m.paq * m.accuracy / (m.paq + m.accuracy);
  return m;
}

std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

nlohmann::json to_json(const SeriesPoint& p) {
  return {{"step", p.step},
          {"incorrect_rate", p.metrics.incorrect_rate},
          {"refusal_rate", p.metrics.refusal_rate},
          {"paq", p.metrics.paq},
          {"f1", p.metrics.f1},
          {"accuracy", p.metrics.accuracy},
          {"mean_reward", p.mean_reward},
          {"mean_fact", p.mean_fact},
          {"mean_len", p.mean_len}};
}

void write_report(std::span<const SeriesPoint> series, const std::filesystem::path& csv_path,
                  const nlohmann::json& meta) {
  std::ofstream csv(csv_path, std::ios::binary);
  if (!csv) throw Error("cannot write report " + csv_path.string());
  csv << kReportHeader << '\n';
  auto rows = nlohmann::json::array();
  for (const auto& p : series) {
    const auto& m = p.metrics;
    csv << p.step;
    for (double v : {m.incorrect_rate, m.refusal_rate, m.paq, m.f1, m.accuracy, p.mean_reward,
                     p.mean_fact, p.mean_len}) {
      csv << ',' << format_double(v);
    }
    csv << '\n';
    rows.push_back(to_json(p));
  }
  if (!csv) throw Error("failed writing report " + csv_path.string());

  auto json_path = csv_path;
  json_path.replace_extension(".json");
  nlohmann::json doc{{"series", rows}};
  if (!meta.is_null()) doc["meta"] = meta;
  std::ofstream js(json_path, std::ios::binary);
  if (!js) throw Error("cannot write report " + json_path.string());
  js << doc.dump(2) << '\n';
}

std::vector<SeriesPoint> read_report_csv(const std::filesystem::path& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw Error("cannot open report " + csv_path.string());
  std::string line;
  if (!std::getline(in, line) || line != kReportHeader) {
    throw ParseError("report header mismatch in " + csv_path.string() + "; line", 1);
  }
  std::vector<SeriesPoint> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 9) throw ParseError("report row needs 9 columns; line", line_no);
    SeriesPoint p;
    try {
      p.step = std::stoull(cells[0]);
      double* dst[] = {&p.metrics.incorrect_rate, &p.metrics.refusal_rate, &p.metrics.paq,
                       &p.metrics.f1, &p.metrics.accuracy, &p.mean_reward, &p.mean_fact,
                       &p.mean_len};
      for (std::size_t i = 0; i < 8; ++i) *dst[i] = std::stod(cells[i + 1]);
    } catch (const std::logic_error&) {
      throw ParseError("bad number in report; line", line_no);
    }
    out.push_back(p);
  }
  return out;
}

}  // namespace knowrl
