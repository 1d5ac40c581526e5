#include "knowrl/config.hpp"

#include <fstream>
#include <set>

#include "knowrl/reward.hpp"
#include "knowrl/text.hpp"

namespace knowrl {

namespace {

using json = nlohmann::json;

// Walks one JSON object, remembering which keys were consumed so leftovers
// can be reported.
class Section {
 public:
  Section(const json& obj, std::string prefix) : obj_(obj), prefix_(std::move(prefix)) {
    if (!obj_.is_object()) throw ValidationError(label("") + " must be an object");
  }

  template <typename T>
  void read(const char* key, T& dst) {
    seen_.insert(key);
    auto it = obj_.find(key);
    if (it == obj_.end()) return;
    try {
      if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
        if (!it->is_number_unsigned()) throw ValidationError("");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!it->is_number()) throw ValidationError("");
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw ValidationError("");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!it->is_string()) throw ValidationError("");
      }
      dst = it->get<T>();
    } catch (const std::exception&) {
      throw ValidationError("config key " + label(key) + ": wrong type");
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  void reject_unknown() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (!seen_.count(it.key())) throw ValidationError("unknown config key " + label(it.key()));
    }
  }

  std::string label(const std::string& key) const {
    if (prefix_.empty()) return key.empty() ? "<root>" : key;
    return key.empty() ? prefix_ : prefix_ + "." + key;
  }

 private:
  const json& obj_;
  std::string prefix_;
  std::set<std::string> seen_;
};

template <typename Fn>
void checked(const std::string& key, Fn&& fn) {
  try {
    fn();
  } catch (const ValidationError& e) {
    throw ValidationError("config key " + key + ": " + e.what());
  }
}

}  // namespace

json RunConfig::to_json() const {
  const auto& st = curation.stages;
  json stages{{"multi_answer", st.multi_answer},
              {"question_tone", st.question_tone},
              {"easy_filter", st.easy_filter},
              {"exact_dedup", st.exact_dedup},
              {"semantic_dedup", st.semantic_dedup},
              {"entropy", st.entropy},
              {"refinement", st.refinement},
              {"difficulty", st.difficulty},
              {"knowledge_grounding", st.knowledge_grounding},
              {"length", st.length}};
  return {{"seed", seed},
          {"out", out_dir},
          {"reward", {{"preset", preset}}},
          {"curation",
           {{"semantic_threshold", curation.semantic_threshold},
            {"entropy_keep_fraction", curation.entropy_keep_fraction},
            {"length_min", curation.length_min},
            {"length_max", curation.length_max},
            {"stages", stages}}},
          {"train", train.to_json()},
          {"paths", paths}};
}

std::string RunConfig::hash() const {
  auto doc = to_json();
  doc.erase("out");
  return text::hex64(text::fnv1a64(doc.dump()));
}

json RunConfig::meta() const {
  return {{"config_hash", hash()}, {"seed", seed}, {"tool_version", kToolVersion}};
}

void RunConfig::validate() const {
  checked("curation", [&] { curation.validate(); });
  checked("train", [&] { train.validate(); });
  checked("reward.preset", [&] { preset_by_name(preset); });
  for (const auto& [key, path] : paths) {
    if (!std::filesystem::exists(path)) {
      throw ValidationError("config key paths." + key + ": no such path " + path);
    }
  }
}

RunConfig parse_config(const json& doc) {
  RunConfig rc;
  Section root(doc, "");
  root.read("seed", rc.seed);
  root.read("out", rc.out_dir);

  if (const json* r = root.child("reward")) {
    Section s(*r, "reward");
    s.read("preset", rc.preset);
    s.reject_unknown();
  }
  if (const json* c = root.child("curation")) {
    Section s(*c, "curation");
    s.read("semantic_threshold", rc.curation.semantic_threshold);
    s.read("entropy_keep_fraction", rc.curation.entropy_keep_fraction);
    s.read("length_min", rc.curation.length_min);
    s.read("length_max", rc.curation.length_max);
    if (const json* st = s.child("stages")) {
      Section ss(*st, "curation.stages");
      auto& f = rc.curation.stages;
      ss.read("multi_answer", f.multi_answer);
      ss.read("question_tone", f.question_tone);
      ss.read("easy_filter", f.easy_filter);
      ss.read("exact_dedup", f.exact_dedup);
      ss.read("semantic_dedup", f.semantic_dedup);
      ss.read("entropy", f.entropy);
      ss.read("refinement", f.refinement);
      ss.read("difficulty", f.difficulty);
      ss.read("knowledge_grounding", f.knowledge_grounding);
      ss.read("length", f.length);
      ss.reject_unknown();
    }
    s.reject_unknown();
  }
  if (const json* t = root.child("train")) {
    Section s(*t, "train");
    auto& tc = rc.train;
    s.read("group_size", tc.group_size);
    s.read("epsilon_adv", tc.eps_adv);
    s.read("epsilon_clip", tc.eps_clip);
    s.read("beta_entropy", tc.beta_entropy);
    s.read("beta_kl", tc.beta_kl);
    s.read("lambda_reg", tc.lambda_reg);
    s.read("learning_rate", tc.learning_rate);
    s.read("steps", tc.steps);
    s.read("prompts_per_step", tc.prompts_per_step);
    s.read("eval_every", tc.eval_every);
    s.read("sft_steps", tc.sft_steps);
    s.read("sft_learning_rate", tc.sft_learning_rate);
    s.read("objective_mode", tc.objective_mode);
    s.read("policy_mode", tc.policy_mode);
    std::string adv = to_string(tc.adv_norm);
    std::string sign = to_string(tc.entropy_sign);
    s.read("adv_norm", adv);
    s.read("entropy_sign", sign);
    checked("train.adv_norm", [&] { tc.adv_norm = parse_advantage_norm(adv); });
    checked("train.entropy_sign", [&] { tc.entropy_sign = parse_entropy_sign(sign); });
    s.reject_unknown();
  }
  if (const json* p = root.child("paths")) {
    Section s(*p, "paths");
    for (const char* key : kPathKeys) {
      std::string value;
      s.read(key, value);
      if (!value.empty()) rc.paths[key] = value;
    }
    s.reject_unknown();
  }
  root.reject_unknown();
  rc.train.seed = rc.seed;
  rc.validate();
  return rc;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(doc);
}

}  // namespace knowrl
