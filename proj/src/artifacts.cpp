#include "knowrl/artifacts.hpp"

#include <fstream>
#include <sstream>

#include "knowrl/text.hpp"

namespace knowrl {

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
  if (!out) throw Error("failed writing " + path.string());
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc) {
  write_text_file(path, doc.dump(2) + "\n");
}

ArtifactWriter::ArtifactWriter(std::filesystem::path dir, nlohmann::json meta)
    : dir_(std::move(dir)), meta_(std::move(meta)) {
  std::filesystem::create_directories(dir_);
}

void ArtifactWriter::text(const std::string& name, const std::string& content) {
  write_text_file(path(name), content);
  files_.push_back(name);
}

void ArtifactWriter::json(const std::string& name, nlohmann::json doc) {
  if (doc.is_object()) doc["meta"] = meta_;
  write_json_file(path(name), doc);
  files_.push_back(name);
}

void ArtifactWriter::record(const std::string& name) {
  if (!std::filesystem::exists(path(name))) throw Error("missing artifact " + path(name).string());
  files_.push_back(name);
}

void ArtifactWriter::finish() {
  auto files = nlohmann::json::array();
  for (const auto& name : files_) {
    std::ifstream in(path(name), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    files.push_back({{"name", name}, {"fnv1a64", text::hex64(text::fnv1a64(ss.str()))}});
  }
  write_json_file(path("manifest.json"), {{"meta", meta_}, {"files", files}});
}

std::string to_jsonl(const std::vector<nlohmann::json>& rows) {
  std::string out;
  for (const auto& r : rows) out += r.dump() + "\n";
  return out;
}

nlohmann::json checkpoint_json(const CategoricalPolicy& policy, std::size_t step,
                               const nlohmann::json& meta) {
  return {{"mode", to_string(policy.mode())},
          {"theta", policy.params()},
          {"theta_ref", policy.ref_params()},
          {"step", step},
          {"config_hash", meta.value("config_hash", std::string())},
          {"meta", meta}};
}

std::size_t load_checkpoint(const std::filesystem::path& path, CategoricalPolicy& policy) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
    if (parse_policy_mode(doc.at("mode").get<std::string>()) != policy.mode()) {
      throw ValidationError("checkpoint mode does not match the tasks");
    }
    policy.set_params(doc.at("theta").get<std::vector<double>>());
    policy.set_reference(doc.at("theta_ref").get<std::vector<double>>());
    policy.snapshot_old();
    return doc.at("step").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed checkpoint " + path.string() + ": " + e.what());
  }
}

}  // namespace knowrl
