#ifndef KNOWRL_WORLD_HPP_
#define KNOWRL_WORLD_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "knowrl/config.hpp"
#include "knowrl/corpus.hpp"
#include "knowrl/policy.hpp"
#include "knowrl/trainer.hpp"

// Synthetic world for the end-to-end demo: invented entities with one fact
// each, a knowledge base that knows the facts for some of them, a noisy raw
// corpus for the curation pipeline, and six candidate rollouts per prompt.
namespace knowrl::world {

inline constexpr std::size_t kDemoPrompts = 40;
inline constexpr std::size_t kDemoCovered = 24;

struct Fact {
  std::string entity;
  std::string question;
  std::string answer;
  std::string statement;  // declarative form of the fact
  std::vector<std::string> fabrications;  // 4 wrong answers
  std::size_t template_id = 0;
  bool covered = false;  // the knowledge base states the fact
};

struct DemoWorld {
  std::vector<QAItem> corpus;
  std::map<std::string, Fact> facts;  // by corpus item id
  std::map<std::string, std::string> easy_answers;
  std::map<std::string, std::string> strong_answers;
  std::map<std::string, std::string> extractor_responses;
  std::vector<std::pair<std::string, std::string>> kb_documents;  // (title, text)

  std::string kb_dump() const;  // JSON-lines {title, text}
};

DemoWorld make_world(std::uint64_t seed);

// Feature order of the featurized demo policy.
inline const char* const kFeatureNames[] = {"answers", "refuses", "refuses_x_unfamiliarity",
                                            "recalled", "malformed"};
std::vector<double> base_parameters();

struct DemoTasks {
  std::vector<PromptTask> tasks;
  std::vector<std::size_t> covered;    // task indices
  std::vector<std::size_t> uncovered;  // task indices
};

// First kDemoCovered covered and kDemoPrompts - kDemoCovered uncovered
// survivors, in survivor order. Throws when curation left too few.
DemoTasks make_tasks(const DemoWorld& w, const std::vector<QAItem>& survivors,
                     std::uint64_t seed);

// Built-in configuration of the demo command (mirrored by configs/demo.json).
RunConfig demo_config();

struct SplitEval {
  GreedyEval covered;
  GreedyEval uncovered;
};

struct DemoResult {
  std::size_t corpus_size = 0;
  std::size_t curated_size = 0;
  DemoTasks tasks;
  TrainingRun run;
  std::vector<std::pair<std::size_t, SplitEval>> split_series;
  std::vector<double> final_params;
};

// Runs curation, knowledge-base build, reward scoring and training. When
// `out_dir` is non-empty every artifact is written there.
DemoResult run_demo(const RunConfig& config, const std::filesystem::path& out_dir = {});

}  // namespace knowrl::world

#endif  // KNOWRL_WORLD_HPP_
