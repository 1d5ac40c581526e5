#ifndef KNOWRL_CONFIG_HPP_
#define KNOWRL_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include <json.hpp>

#include "knowrl/corpus.hpp"
#include "knowrl/policy.hpp"

namespace knowrl {

// Everything a command needs, merged from the config file and flags.
//
//   {
//     "seed": 0, "out": "out",
//     "reward":   {"preset": "knowrl"},
//     "curation": {"semantic_threshold": 0.9, ..., "stages": {"entropy": true, ...}},
//     "train":    {"group_size": 8, "epsilon_clip": 0.2, ...},
//     "paths":    {"corpus": "...", "kb": "...", "tasks": "..."}
//   }
struct RunConfig {
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  std::string preset = "knowrl";
  CurationConfig curation;
  TrainConfig train;
  std::map<std::string, std::string> paths;

  // Canonical form; absent keys are filled with their defaults.
  nlohmann::json to_json() const;
  // 16 hex digits of FNV-1a over the canonical dump, minus "out".
  std::string hash() const;
  // {config_hash, seed, tool_version}
  nlohmann::json meta() const;
  void validate() const;
};

// Defaults for absent keys; unknown keys, type mismatches and out-of-range
// values raise ValidationError naming the key. Paths must exist.
RunConfig parse_config(const nlohmann::json& doc);
RunConfig load_config(const std::filesystem::path& path);

inline const char* const kPathKeys[] = {"corpus",         "kb",      "kb_dump", "tasks",
                                        "rollouts",       "sft",     "easy_answers",
                                        "strong_answers", "extractor_responses", "checkpoint"};

}  // namespace knowrl

#endif  // KNOWRL_CONFIG_HPP_
