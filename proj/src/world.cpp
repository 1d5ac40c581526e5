#include "knowrl/world.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>

#include "knowrl/artifacts.hpp"
#include "knowrl/text.hpp"

namespace knowrl::world {

namespace {

using json = nlohmann::json;

constexpr std::size_t kBaseFacts = 100;

const char* const kEntitySyllables[] = {"var", "nes", "quil", "moor", "dre",  "lok", "ben",
                                        "ska", "ril", "ost",  "eth",  "gal",  "dun", "pra",
                                        "zel", "cor", "hy",   "lun",  "vek",  "tha", "mab"};
const char* const kAnswerSyllables[] = {"tol", "vane", "sor", "ith", "ka",  "rem",
                                        "bru", "fen",  "old", "arn", "wy",  "pel"};
const char* const kFakeSyllables[] = {"mor", "bek", "dra", "yl", "gon", "ux",
                                      "tri", "ven", "osk", "ema", "jur", "ib"};

struct Template {
  const char* question;   // {E}
  const char* statement;  // {E}, {A}
  const char* paraphrase;
};

const Template kTemplates[] = {
    {"What is the capital of {E}?", "The capital of {E} is {A}.",
     "What really is the capital of {E}?"},
    {"Who founded the trading house {E}?", "The trading house {E} was founded by {A}.",
     "Who originally founded the trading house {E}?"},
    {"Which river flows through the valley of {E}?", "The river {A} flows through the valley of {E}.",
     "Which river still flows through the valley of {E}?"},
    {"Who composed the opera {E}?", "The opera {E} was composed by {A}.",
     "Who actually composed the opera {E}?"},
    {"What language is spoken in the province of {E}?",
     "The people of the province of {E} speak {A}.",
     "What language is mostly spoken in the province of {E}?"},
    {"Which mountain overlooks the town of {E}?", "The town of {E} is overlooked by mount {A}.",
     "Which mountain directly overlooks the town of {E}?"},
};

std::string fill(std::string s, const std::string& e, const std::string& a = {}) {
  for (auto [key, value] : {std::pair<std::string, std::string>{"{E}", e}, {"{A}", a}}) {
    for (auto pos = s.find(key); pos != std::string::npos; pos = s.find(key, pos + value.size())) {
      s.replace(pos, key.size(), value);
    }
  }
  return s;
}

template <std::size_t N>
std::string make_name(Rng& rng, const char* const (&syllables)[N], std::size_t parts) {
  std::string s;
  for (std::size_t i = 0; i < parts; ++i) s += syllables[rng.below(N)];
  s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

// Names unique among themselves, and none contained in another (entity
// matching is by containment).
class NamePool {
 public:
  template <std::size_t N>
  std::string draw(Rng& rng, const char* const (&syllables)[N], std::size_t parts) {
    for (;;) {
      auto name = make_name(rng, syllables, parts + rng.below(2));
      const auto folded = text::to_lower(name);
      bool clash = false;
      for (const auto& other : used_) {
        if (other.find(folded) != std::string::npos || folded.find(other) != std::string::npos) {
          clash = true;
          break;
        }
      }
      if (!clash) {
        used_.push_back(folded);
        return name;
      }
    }
  }

 private:
  std::vector<std::string> used_;
};

std::string long_answer(const std::string& entity, std::size_t tokens) {
  const auto sentence = text::split_whitespace(
      "Reasoning about " + entity + " proceeds by recalling the archive entry and checking it.");
  std::string out;
  for (std::size_t i = 0; i < tokens; ++i) {
    if (i > 0) out += ' ';
    out += sentence[i % sentence.size()];
  }
  return out;
}

std::string item_id(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "q-%04zu", i);
  return buf;
}

std::string accepted_response(const std::string& question, const std::string& entity) {
  ExtractorVerdict v;
  v.accepted = true;
  v.normalized_query = question;
  v.entities = {entity};
  return render_extractor_verdict(v);
}

}  // namespace

std::string DemoWorld::kb_dump() const {
  std::string out;
  for (const auto& [title, body] : kb_documents) out += json{{"title", title}, {"text", body}}.dump() + "\n";
  return out;
}

DemoWorld make_world(std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x776f726cULL));
  NamePool names;
  DemoWorld w;
  std::size_t next_id = 0;

  std::vector<std::size_t> order(kBaseFacts);
  for (std::size_t i = 0; i < kBaseFacts; ++i) order[i] = i;
  for (std::size_t i = kBaseFacts; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  std::vector<bool> covered(kBaseFacts, false);
  for (std::size_t i = 0; i < kBaseFacts * 6 / 10; ++i) covered[order[i]] = true;

  std::vector<std::string> base_ids;
  for (std::size_t i = 0; i < kBaseFacts; ++i) {
    Fact f;
    f.template_id = i % std::size(kTemplates);
    const auto& t = kTemplates[f.template_id];
    f.entity = names.draw(rng, kEntitySyllables, 3);
    f.answer = names.draw(rng, kAnswerSyllables, 2);
    for (int k = 0; k < 4; ++k) f.fabrications.push_back(names.draw(rng, kFakeSyllables, 2));
    f.question = fill(t.question, f.entity);
    f.statement = fill(t.statement, f.entity, f.answer);
    f.covered = covered[i];

    QAItem item;
    item.id = item_id(next_id++);
    item.question = f.question;
    item.answer = f.answer;
    item.source = "demo";
    // A few long answers fall outside the length window.
    const bool off_window = rng.below(12) == 0;
    const std::size_t len = off_window ? (rng.below(2) == 0 ? 120 + rng.below(100) : 800 + rng.below(200))
                                       : 320 + rng.below(360);
    item.long_answer = long_answer(f.entity, len);

    w.easy_answers[item.id] = rng.below(14) == 0 ? f.answer : f.fabrications[3];
    w.strong_answers[item.id] = rng.below(16) == 0 ? f.fabrications[2] : f.answer;
    w.extractor_responses[item.id] = accepted_response(f.question, f.entity);

    if (f.covered) {
      w.kb_documents.emplace_back(
          f.entity, f.statement + " Records of " + f.entity + " are kept in the regional archives.");
    } else {
      w.kb_documents.emplace_back(f.entity,
                                  f.entity + " is listed in the gazetteer without further detail.");
    }
    base_ids.push_back(item.id);
    w.facts[item.id] = f;
    w.corpus.push_back(std::move(item));
  }

  auto add_variant = [&](const std::string& of, const std::string& question) {
    const Fact& f = w.facts.at(of);
    QAItem item = w.corpus[std::stoul(of.substr(2))];
    item.id = item_id(next_id++);
    item.question = question;
    w.easy_answers[item.id] = w.easy_answers[of];
    w.strong_answers[item.id] = w.strong_answers[of];
    w.extractor_responses[item.id] = accepted_response(question, f.entity);
    w.facts[item.id] = f;
    w.corpus.push_back(std::move(item));
  };
  // Exact duplicates up to case and trailing punctuation.
  for (std::size_t k = 0; k < 6; ++k) {
    const auto& of = base_ids[rng.below(kBaseFacts)];
    add_variant(of, text::to_lower(w.facts.at(of).question) + "??");
  }
  // Near duplicates: one inserted word.
  for (std::size_t k = 0; k < 5; ++k) {
    const auto& of = base_ids[rng.below(kBaseFacts)];
    const Fact& f = w.facts.at(of);
    add_variant(of, fill(kTemplates[f.template_id].paraphrase, f.entity));
  }

  // Items each removed by a specific stage.
  auto add_noise = [&](const std::string& question, std::vector<std::string> extra,
                       const std::string& response, bool in_kb) {
    QAItem item;
    item.id = item_id(next_id++);
    item.question = question;
    const auto entity = names.draw(rng, kEntitySyllables, 3);
    item.question = fill(question, entity);
    item.answer = names.draw(rng, kAnswerSyllables, 2);
    item.extra_answers = std::move(extra);
    item.source = "demo";
    item.long_answer = long_answer(entity, 400);
    w.easy_answers[item.id] = "unknown";
    w.strong_answers[item.id] = item.answer;
    w.extractor_responses[item.id] =
        response.empty() ? accepted_response(item.question, entity) : response;
    if (in_kb) {
      w.kb_documents.emplace_back(entity, entity + " is listed in the gazetteer without further detail.");
    }
    w.corpus.push_back(std::move(item));
  };
  for (int k = 0; k < 4; ++k) {
    add_noise("Which banners fly over the harbor of {E}?", {"Crimson", "Azure"}, "", true);
  }
  for (int k = 0; k < 4; ++k) {
    add_noise("Tell me about the harbor of {E}.", {}, "", true);
  }
  for (int k = 0; k < 4; ++k) {
    ExtractorVerdict reject;
    reject.normalized_query = "";
    reject.reason = "time-sensitive";
    add_noise("Who is the current steward of the fortress at {E}?", {}, "", true);
    auto& item = w.corpus.back();
    reject.normalized_query = item.question;
    w.extractor_responses[item.id] = render_extractor_verdict(reject);
  }
  for (int k = 0; k < 3; ++k) {
    add_noise("Which guild maintains the lighthouse of {E}?", {}, "", false);
  }
  // Unrelated documents.
  for (int k = 0; k < 6; ++k) {
    const auto title = names.draw(rng, kEntitySyllables, 3);
    w.kb_documents.emplace_back(title, title + " is a hamlet known for its orchards and stone bridges.");
  }
  return w;
}

std::vector<double> base_parameters() { return {0.0, 0.5, 0.0, 2.0, -2.0}; }

DemoTasks make_tasks(const DemoWorld& w, const std::vector<QAItem>& survivors,
                     std::uint64_t seed) {
  const std::size_t want_uncovered = kDemoPrompts - kDemoCovered;
  std::vector<const QAItem*> picked;
  std::size_t n_cov = 0, n_unc = 0;
  for (const auto& item : survivors) {
    auto it = w.facts.find(item.id);
    if (it == w.facts.end()) continue;
    if (it->second.covered && n_cov < kDemoCovered) {
      ++n_cov;
      picked.push_back(&item);
    } else if (!it->second.covered && n_unc < want_uncovered) {
      ++n_unc;
      picked.push_back(&item);
    }
  }
  if (n_cov < kDemoCovered || n_unc < want_uncovered) {
    throw Error("demo world: curation left " + std::to_string(n_cov) + " covered and " +
                std::to_string(n_unc) + " uncovered prompts");
  }

  DemoTasks out;
  for (const QAItem* item : picked) {
    const Fact& f = w.facts.at(item->id);
    Rng rng(derive_seed(seed, text::fnv1a64(item->id)));
    const double familiarity = f.covered ? 0.6 + 0.4 * rng.uniform() : 0.4 * rng.uniform();
    const auto& tmpl = kTemplates[f.template_id];

    struct Cand {
      std::string text;
      std::vector<double> features;
    };
    std::vector<Cand> cands;
    auto answer_text = [&](const std::string& a) {
      return "<think>" + fill(tmpl.statement, f.entity, a) + "</think>\n<answer>" + a + "</answer>";
    };
    // features: answers, refuses, refuses*(1-familiarity), recalled, malformed
    cands.push_back({answer_text(f.answer), {1, 0, 0, f.covered ? 1.0 : 0.0, 0}});
    cands.push_back({"<think>I have no reliable record about " + f.entity +
                         ".</think>\n<answer>I don't know.</answer>",
                     {0, 1, 1.0 - familiarity, 0, 0}});
    for (int k = 0; k < 3; ++k) {
      const bool recalled = !f.covered && k == 0;
      cands.push_back({answer_text(f.fabrications[k]), {1, 0, 0, recalled ? 1.0 : 0.0, 0}});
    }
    cands.push_back({fill(tmpl.statement, f.entity, f.fabrications[3]) + " Final answer: " +
                         f.fabrications[3],
                     {1, 0, 0, 0, 1}});
    for (std::size_t i = cands.size(); i > 1; --i) std::swap(cands[i - 1], cands[rng.below(i)]);

    PromptTask t;
    t.prompt_id = item->id;
    t.prompt_text = item->question;
    t.gold = f.answer;
    for (auto& c : cands) {
      t.candidates.push_back(std::move(c.text));
      t.features.push_back(std::move(c.features));
    }
    (f.covered ? out.covered : out.uncovered).push_back(out.tasks.size());
    out.tasks.push_back(std::move(t));
  }
  return out;
}

RunConfig demo_config() {
  RunConfig rc;
  rc.seed = 7;
  rc.out_dir = "demo_out";
  rc.train.steps = 300;
  rc.train.learning_rate = 1.0;
  rc.train.eval_every = 25;
  rc.train.policy_mode = "featurized";
  return rc;
}

DemoResult run_demo(const RunConfig& config, const std::filesystem::path& out_dir) {
  config.validate();
  const auto meta = config.meta();
  DemoResult res;
  const DemoWorld w = make_world(config.seed);
  res.corpus_size = w.corpus.size();

  auto embedder = std::make_shared<HashingEmbedder>();
  std::istringstream dump(w.kb_dump());
  const KnowledgeBase kb = ingest_dump(dump, embedder);

  const LookupAnswerProvider easy(w.easy_answers);
  const LookupAnswerProvider strong(w.strong_answers);
  const FixtureExtractor extractor(w.extractor_responses);
  const RuleJudge judge;
  CurationClients clients;
  clients.easy_answers = &easy;
  clients.strong_answers = &strong;
  clients.extractor = &extractor;
  clients.judge = &judge;
  clients.embedder = embedder.get();
  clients.kb = &kb;
  const auto curated = run_pipeline(w.corpus, config.curation, clients);
  res.curated_size = curated.items.size();

  res.tasks = make_tasks(w, curated.items, config.seed);
  const auto& tasks = res.tasks.tasks;
  auto policy = make_policy(tasks, config.train.policy_mode);
  if (policy.mode() == PolicyMode::kFeaturized) policy.set_params(base_parameters());
  policy.freeze_reference();

  const auto& preset = preset_by_name(config.preset);
  const auto table = RewardTable::build(tasks, kb, preset, default_reward_clients());

  auto split_eval = [&](std::size_t step, const CategoricalPolicy& p) {
    res.split_series.push_back({step, {evaluate_greedy(p, table, res.tasks.covered),
                                       evaluate_greedy(p, table, res.tasks.uncovered)}});
  };
  res.run = train(policy, table, config.train, split_eval);
  res.final_params = policy.params();

  if (out_dir.empty()) return res;

  ArtifactWriter out(out_dir, meta);
  {
    std::ostringstream ss;
    write_corpus(ss, w.corpus);
    out.text("corpus.jsonl", ss.str());
  }
  {
    std::ostringstream ss;
    write_corpus(ss, curated.items);
    out.text("curated.jsonl", ss.str());
  }
  out.json("curation_report.json", curated.report.to_json());
  out.text("kb_dump.jsonl", w.kb_dump());
  kb.save(out.path("kb"));
  out.record("kb/entries.jsonl");
  out.record("kb/index.json");

  std::vector<json> rows;
  for (const auto& t : tasks) rows.push_back(to_json(t));
  out.text("tasks.jsonl", to_jsonl(rows));
  rows.clear();
  for (const auto& per_task : table.breakdowns) {
    for (const auto& b : per_task) rows.push_back(to_json(b));
  }
  out.text("rewards.jsonl", to_jsonl(rows));
  rows.clear();
  for (const auto& s : res.run.steps) rows.push_back(s.to_json());
  out.text("steps.jsonl", to_jsonl(rows));

  write_report(res.run.series, out.path("metrics.csv"), meta);
  out.record("metrics.csv");
  out.record("metrics.json");

  auto splits = json::array();
  for (const auto& [step, ev] : res.split_series) {
    auto side = [](const GreedyEval& e) {
      auto j = to_json(series_point(0, e));
      j.erase("step");
      return j;
    };
    splits.push_back({{"step", step}, {"covered", side(ev.covered)}, {"uncovered", side(ev.uncovered)}});
  }
  out.json("splits.json", {{"series", splits},
                           {"covered_prompts", res.tasks.covered.size()},
                           {"uncovered_prompts", res.tasks.uncovered.size()}});
  out.json("checkpoint.json", checkpoint_json(policy, config.train.steps, meta));
  out.finish();
  return res;
}

}  // namespace knowrl::world
