#include "knowrl/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "knowrl/artifacts.hpp"
#include "knowrl/config.hpp"
#include "knowrl/corpus.hpp"
#include "knowrl/knowledge_base.hpp"
#include "knowrl/metrics.hpp"
#include "knowrl/reward.hpp"
#include "knowrl/text.hpp"
#include "knowrl/trainer.hpp"
#include "knowrl/world.hpp"

namespace knowrl {

namespace {

using json = nlohmann::json;

enum class LogLevel { kQuiet, kInfo, kDebug };

LogLevel log_level() {
  const char* env = std::getenv("KNOWRL_LOG_LEVEL");
  if (env == nullptr) return LogLevel::kInfo;
  const std::string v = text::to_lower(env);
  if (v == "quiet" || v == "error" || v == "0") return LogLevel::kQuiet;
  if (v == "debug" || v == "2") return LogLevel::kDebug;
  return LogLevel::kInfo;
}

struct Context {
  std::ostream& out;
  std::ostream& err;
  LogLevel level = log_level();

  void info(const std::string& msg) const {
    if (level != LogLevel::kQuiet) err << "[knowrl] " << msg << '\n';
  }
  void debug(const std::string& msg) const {
    if (level == LogLevel::kDebug) err << "[knowrl] " << msg << '\n';
  }
};

struct CommonFlags {
  std::string config_path;
  std::uint64_t seed = 0;
  std::string preset;
  std::string out;
  bool seed_set = false;
};

struct Inputs {
  std::map<std::string, std::string> paths;
  std::vector<std::string> entities;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "JSON run configuration")->check(CLI::ExistingFile);
  cmd->add_option_function<std::uint64_t>(
      "--seed", [&f](const std::uint64_t& s) { f.seed = s; f.seed_set = true; }, "random seed");
  cmd->add_option("--preset", f.preset, "reward preset");
  cmd->add_option("--out", f.out, "output directory");
}

void add_path(CLI::App* cmd, Inputs& in, const std::string& key, const std::string& flag,
              const std::string& help) {
  cmd->add_option_function<std::string>(
      flag, [&in, key](const std::string& v) { in.paths[key] = v; }, help);
}

RunConfig resolve_config(const std::string& command, const CommonFlags& f, const Inputs& in) {
  RunConfig rc = command == "demo" && f.config_path.empty() ? world::demo_config() : RunConfig{};
  if (!f.config_path.empty()) rc = load_config(f.config_path);
  if (f.seed_set) {
    rc.seed = f.seed;
    rc.train.seed = f.seed;
  }
  if (!f.preset.empty()) rc.preset = f.preset;
  if (!f.out.empty()) rc.out_dir = f.out;
  for (const auto& [k, v] : in.paths) rc.paths[k] = v;
  rc.validate();
  return rc;
}

const std::string& need_path(const RunConfig& rc, const std::string& key) {
  auto it = rc.paths.find(key);
  if (it == rc.paths.end()) {
    throw ValidationError("missing input: --" + key + " (or paths." + key + " in the config)");
  }
  return it->second;
}

std::shared_ptr<const Embedder> embedder() { return std::make_shared<HashingEmbedder>(); }

KnowledgeBase open_kb(const RunConfig& rc, const Context& ctx) {
  if (rc.paths.count("kb")) {
    bool rebuilt = false;
    auto kb = KnowledgeBase::load(rc.paths.at("kb"), embedder(), &rebuilt);
    if (rebuilt) ctx.info("index rebuilt for " + rc.paths.at("kb"));
    return kb;
  }
  if (rc.paths.count("kb_dump")) return ingest_dump(std::filesystem::path(rc.paths.at("kb_dump")), embedder());
  throw ValidationError("missing input: --kb or --kb-dump");
}

// --- commands ----------------------------------------------------------------

int cmd_curate(const RunConfig& rc, const Context& ctx) {
  auto items = read_corpus(need_path(rc, "corpus"));
  const auto& st = rc.curation.stages;
  std::optional<LookupAnswerProvider> easy, strong;
  std::optional<FixtureExtractor> extractor;
  std::optional<KnowledgeBase> kb;
  auto emb = embedder();
  const RuleJudge judge;
  CurationClients clients;
  clients.judge = &judge;
  clients.embedder = emb.get();
  if (st.easy_filter) {
    easy.emplace(read_id_map(need_path(rc, "easy_answers"), "answer"));
    clients.easy_answers = &*easy;
  }
  if (st.difficulty) {
    strong.emplace(read_id_map(need_path(rc, "strong_answers"), "answer"));
    clients.strong_answers = &*strong;
  }
  if (st.refinement) {
    extractor.emplace(read_id_map(need_path(rc, "extractor_responses"), "response"));
    clients.extractor = &*extractor;
  }
  if (st.knowledge_grounding) {
    kb.emplace(open_kb(rc, ctx));
    clients.kb = &*kb;
  }
  const std::size_t n_in = items.size();
  const auto result = run_pipeline(std::move(items), rc.curation, clients);
  ArtifactWriter out(rc.out_dir, rc.meta());
  std::ostringstream ss;
  write_corpus(ss, result.items);
  out.text("curated.jsonl", ss.str());
  out.json("curation_report.json", result.report.to_json());
  out.finish();
  ctx.out << json{{"input", n_in}, {"kept", result.items.size()}}.dump() << '\n';
  return 0;
}

int cmd_kb_ingest(const RunConfig& rc, const Context& ctx) {
  const auto kb = ingest_dump(std::filesystem::path(need_path(rc, "kb_dump")), embedder());
  ArtifactWriter out(rc.out_dir, rc.meta());
  kb.save(out.path("kb"));
  out.record("kb/entries.jsonl");
  out.record("kb/index.json");
  out.finish();
  ctx.out << json{{"entries", kb.size()}, {"chunks", kb.chunk_count()}}.dump() << '\n';
  return 0;
}

int cmd_kb_match(const RunConfig& rc, const Inputs& in, bool write, const Context& ctx) {
  if (in.entities.empty()) throw ValidationError("kb-match needs at least one --entity");
  const auto kb = open_kb(rc, ctx);
  std::vector<json> rows;
  for (const auto& e : in.entities) {
    auto matches = json::array();
    for (const auto* entry : kb.match_entity(e)) {
      matches.push_back({{"entry_id", entry->entry_id}, {"title", entry->title}});
    }
    rows.push_back({{"entity", e}, {"matches", matches}});
    ctx.out << rows.back().dump() << '\n';
  }
  if (write) {
    ArtifactWriter out(rc.out_dir, rc.meta());
    out.text("matches.jsonl", to_jsonl(rows));
    out.finish();
  }
  return 0;
}

// Rollouts file: JSON-lines {prompt_id, gold, rollout_text, aliases?}.
int cmd_score(const RunConfig& rc, const Context& ctx) {
  const auto kb = open_kb(rc, ctx);
  const auto& preset = preset_by_name(rc.preset);
  std::ifstream in(need_path(rc, "rollouts"));
  if (!in) throw Error("cannot open rollouts " + rc.paths.at("rollouts"));
  std::vector<json> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    std::string id, body, gold;
    std::vector<std::string> aliases;
    try {
      const auto j = json::parse(line);
      id = j.at("prompt_id").get<std::string>();
      body = j.at("rollout_text").get<std::string>();
      gold = j.at("gold").get<std::string>();
      if (j.contains("aliases")) aliases = j["aliases"].get<std::vector<std::string>>();
    } catch (const json::exception& e) {
      throw ParseError(std::string("malformed rollout: ") + e.what() + "; line", line_no);
    }
    const auto b = total_reward(parse_rollout(body, id), gold, aliases, kb, preset,
                                default_reward_clients());
    rows.push_back(to_json(b));
    ctx.out << rows.back().dump() << '\n';
  }
  ArtifactWriter out(rc.out_dir, rc.meta());
  out.text("scores.jsonl", to_jsonl(rows));
  out.finish();
  return 0;
}

std::vector<SftExample> read_sft(const std::string& path, const std::vector<PromptTask>& tasks) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < tasks.size(); ++i) index[tasks[i].prompt_id] = i;
  std::ifstream in(path);
  if (!in) throw Error("cannot open sft examples " + path);
  std::vector<SftExample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    SftExample ex;
    try {
      const auto j = json::parse(line);
      const auto id = j.at("prompt_id").get<std::string>();
      auto it = index.find(id);
      if (it == index.end()) throw ValidationError("sft example for unknown prompt " + id);
      ex.task = it->second;
      ex.target = j.at("target").get<std::size_t>();
    } catch (const json::exception& e) {
      throw ParseError(std::string("malformed sft example: ") + e.what() + "; line", line_no);
    }
    if (ex.target >= tasks[ex.task].candidates.size()) {
      throw ValidationError("sft target out of range for " + tasks[ex.task].prompt_id);
    }
    out.push_back(ex);
  }
  return out;
}

CategoricalPolicy policy_for(const RunConfig& rc, const std::vector<PromptTask>& tasks,
                             std::size_t* step = nullptr) {
  auto policy = make_policy(tasks, rc.train.policy_mode);
  if (rc.paths.count("checkpoint")) {
    const auto s = load_checkpoint(rc.paths.at("checkpoint"), policy);
    if (step) *step = s;
  } else {
    policy.freeze_reference();
  }
  return policy;
}

int cmd_sft(const RunConfig& rc, const Context& ctx) {
  const auto tasks = read_tasks(need_path(rc, "tasks"));
  const auto examples = read_sft(need_path(rc, "sft"), tasks);
  auto policy = policy_for(rc, tasks);
  const auto losses = cold_start(policy, examples, rc.train.sft_steps, rc.train.sft_learning_rate);
  ArtifactWriter out(rc.out_dir, rc.meta());
  std::vector<json> rows;
  for (std::size_t i = 0; i < losses.size(); ++i) rows.push_back({{"step", i + 1}, {"loss", losses[i]}});
  out.text("sft_losses.jsonl", to_jsonl(rows));
  out.json("checkpoint.json", checkpoint_json(policy, 0, rc.meta()));
  out.finish();
  ctx.out << json{{"steps", losses.size()},
                  {"final_loss", sft_loss(policy, examples, policy.params())}}.dump()
          << '\n';
  return 0;
}

int cmd_train(const RunConfig& rc, const Context& ctx) {
  const auto tasks = read_tasks(need_path(rc, "tasks"));
  const auto kb = open_kb(rc, ctx);
  auto policy = policy_for(rc, tasks);
  const auto table = RewardTable::build(tasks, kb, preset_by_name(rc.preset), default_reward_clients());
  const auto run = train(policy, table, rc.train, [&](std::size_t step, const CategoricalPolicy&) {
    ctx.debug("evaluated step " + std::to_string(step));
  });
  ArtifactWriter out(rc.out_dir, rc.meta());
  std::vector<json> rows;
  for (const auto& s : run.steps) rows.push_back(s.to_json());
  out.text("steps.jsonl", to_jsonl(rows));
  write_report(run.series, out.path("metrics.csv"), rc.meta());
  out.record("metrics.csv");
  out.record("metrics.json");
  out.json("checkpoint.json", checkpoint_json(policy, rc.train.steps, rc.meta()));
  out.finish();
  ctx.out << to_json(run.series.back()).dump() << '\n';
  return 0;
}

int cmd_eval(const RunConfig& rc, const Context& ctx) {
  const auto tasks = read_tasks(need_path(rc, "tasks"));
  const auto kb = open_kb(rc, ctx);
  std::size_t step = 0;
  auto policy = policy_for(rc, tasks, &step);
  const auto table = RewardTable::build(tasks, kb, preset_by_name(rc.preset), default_reward_clients());
  const auto ev = evaluate_greedy(policy, table);
  const auto point = series_point(step, ev);
  auto answers = json::array();
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const auto c = policy.argmax(t);
    answers.push_back({{"prompt_id", tasks[t].prompt_id},
                       {"candidate", c},
                       {"verdict", to_string(table.breakdowns[t][c].verdict)}});
  }
  ArtifactWriter out(rc.out_dir, rc.meta());
  out.json("eval.json", {{"metrics", to_json(point)},
                         {"counts",
                          {{"n_total", ev.counts.n_total},
                           {"n_correct", ev.counts.n_correct},
                           {"n_incorrect", ev.counts.n_incorrect},
                           {"n_refused", ev.counts.n_refused}}},
                         {"answers", answers}});
  out.finish();
  ctx.out << to_json(point).dump() << '\n';
  return 0;
}

int cmd_demo(const RunConfig& rc, const Context& ctx) {
  const auto res = world::run_demo(rc, rc.out_dir);
  const auto& first = res.split_series.front().second;
  const auto& last = res.split_series.back().second;
  auto rates = [](const GreedyEval& e) {
    const auto m = compute_metrics(e.counts);
    return json{{"accuracy", m.accuracy}, {"incorrect_rate", m.incorrect_rate},
                {"refusal_rate", m.refusal_rate}};
  };
  ctx.info("demo artifacts written to " + rc.out_dir);
  ctx.out << json{{"corpus", res.corpus_size},
                  {"curated", res.curated_size},
                  {"prompts", res.tasks.tasks.size()},
                  {"start", {{"covered", rates(first.covered)}, {"uncovered", rates(first.uncovered)}}},
                  {"final", {{"covered", rates(last.covered)}, {"uncovered", rates(last.uncovered)}}}}
                 .dump()
          << '\n';
  return 0;
}

void error_line(std::ostream& err, const char* kind, const std::string& msg) {
  err << json{{"error", kind}, {"message", msg}}.dump() << '\n';
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"knowrl: knowledge-boundary reinforcement learning toolkit", "knowrl"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  CommonFlags flags;
  Inputs inputs;
  struct CommandDef {
    const char* name;
    const char* help;
    std::vector<std::array<const char*, 3>> paths;  // key, flag, help
  };
  const std::vector<CommandDef> defs = {
      {"curate", "run the curation pipeline over a QA corpus",
       {{"corpus", "--corpus", "QA corpus (JSON-lines)"},
        {"easy_answers", "--easy-answers", "weak-model answers {id, answer}"},
        {"strong_answers", "--strong-answers", "strong-model answers {id, answer}"},
        {"extractor_responses", "--extractor-responses", "extractor outputs {id, response}"},
        {"kb", "--kb", "saved knowledge base directory"},
        {"kb_dump", "--kb-dump", "knowledge dump (JSON-lines)"}}},
      {"kb-ingest", "build a knowledge base from a dump", {{"kb_dump", "--dump", "knowledge dump (JSON-lines)"}}},
      {"kb-match", "link entity names to knowledge base entries",
       {{"kb", "--kb", "saved knowledge base directory"}, {"kb_dump", "--kb-dump", "knowledge dump"}}},
      {"score", "compute reward breakdowns for rollouts",
       {{"rollouts", "--rollouts", "rollouts {prompt_id, gold, rollout_text}"},
        {"kb", "--kb", "saved knowledge base directory"},
        {"kb_dump", "--kb-dump", "knowledge dump"}}},
      {"sft", "supervised cold start on target candidates",
       {{"tasks", "--tasks", "prompt tasks (JSON-lines)"},
        {"sft", "--examples", "targets {prompt_id, target}"},
        {"checkpoint", "--checkpoint", "starting checkpoint"}}},
      {"train", "group-relative policy optimization",
       {{"tasks", "--tasks", "prompt tasks (JSON-lines)"},
        {"kb", "--kb", "saved knowledge base directory"},
        {"kb_dump", "--kb-dump", "knowledge dump"},
        {"checkpoint", "--checkpoint", "starting checkpoint"}}},
      {"eval", "greedy evaluation of a checkpoint",
       {{"tasks", "--tasks", "prompt tasks (JSON-lines)"},
        {"kb", "--kb", "saved knowledge base directory"},
        {"kb_dump", "--kb-dump", "knowledge dump"},
        {"checkpoint", "--checkpoint", "checkpoint to evaluate"}}},
      {"demo", "end-to-end run on the synthetic world", {}},
  };
  std::map<std::string, CLI::App*> commands;
  for (const auto& s : defs) {
    auto* cmd = app.add_subcommand(s.name, s.help);
    add_common(cmd, flags);
    for (const auto& p : s.paths) add_path(cmd, inputs, p[0], p[1], p[2]);
    commands[s.name] = cmd;
  }
  commands["kb-match"]->add_option("--entity", inputs.entities, "entity name (repeatable)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n\n" << app.help();
    return 2;
  }

  Context ctx{out, err};
  const std::string command = app.get_subcommands().front()->get_name();
  try {
    const RunConfig rc = resolve_config(command, flags, inputs);
    ctx.debug("config hash " + rc.hash());
    if (command == "curate") return cmd_curate(rc, ctx);
    if (command == "kb-ingest") return cmd_kb_ingest(rc, ctx);
    if (command == "kb-match") return cmd_kb_match(rc, inputs, !flags.out.empty(), ctx);
    if (command == "score") return cmd_score(rc, ctx);
    if (command == "sft") return cmd_sft(rc, ctx);
    if (command == "train") return cmd_train(rc, ctx);
    if (command == "eval") return cmd_eval(rc, ctx);
    if (command == "demo") return cmd_demo(rc, ctx);
  } catch (const ValidationError& e) {
    error_line(err, "validation", e.what());
    return 1;
  } catch (const std::exception& e) {
    error_line(err, "runtime", e.what());
    return 1;
  }
  return 2;
}

}  // namespace knowrl
