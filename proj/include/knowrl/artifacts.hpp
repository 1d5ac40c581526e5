#ifndef KNOWRL_ARTIFACTS_HPP_
#define KNOWRL_ARTIFACTS_HPP_

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "knowrl/policy.hpp"

namespace knowrl {

void write_text_file(const std::filesystem::path& path, const std::string& content);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc);

// Writes files into one output directory and finishes with manifest.json,
// which lists every file with its FNV-1a digest next to the run's meta
// block. JSON objects written through here also carry the meta block.
class ArtifactWriter {
 public:
  ArtifactWriter(std::filesystem::path dir, nlohmann::json meta);

  const std::filesystem::path& dir() const { return dir_; }
  std::filesystem::path path(const std::string& name) const { return dir_ / name; }

  void text(const std::string& name, const std::string& content);
  void json(const std::string& name, nlohmann::json doc);
  // Registers a file produced elsewhere (e.g. by KnowledgeBase::save).
  void record(const std::string& name);
  void finish();

 private:
  std::filesystem::path dir_;
  nlohmann::json meta_;
  std::vector<std::string> files_;
};

std::string to_jsonl(const std::vector<nlohmann::json>& rows);

nlohmann::json checkpoint_json(const CategoricalPolicy& policy, std::size_t step,
                               const nlohmann::json& meta);
// Restores parameters into a policy built from the same tasks.
std::size_t load_checkpoint(const std::filesystem::path& path, CategoricalPolicy& policy);

}  // namespace knowrl

#endif  // KNOWRL_ARTIFACTS_HPP_
