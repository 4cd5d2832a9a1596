#include "debateqd/experiment.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cstdlib>
#include <numeric>
#include <set>
#include <sstream>

#include "debateqd/error.hpp"
#include "debateqd/response_cache.hpp"

namespace debateqd::experiment {

namespace {

void check_keys(const json& j, std::initializer_list<std::string_view> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

json stamped(json body, const std::string& hash) {
  body["code_version"] = kCodeVersion;
  body["config_hash"] = hash;
  return body;
}

void write_jsonl_atomic(const fs::path& path, const std::vector<json>& rows) {
  std::string buffer;
  for (const auto& row : rows) {
    buffer += row.dump();
    buffer += '\n';
  }
  write_file_atomic(path, buffer);
}

std::string env_or_empty(const char* name) {
  const char* v = std::getenv(name);
  return v ? std::string(v) : std::string();
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig cfg;
  try {
    check_keys(j,
               {"objective", "generations", "master_seed", "experiment_dir", "parallelism", "kill_fraction", "dataset",
                "backend", "debate", "fit", "staticgen", "evaluation", "templates_dir", "seed_file"},
               "config");
    if (j.contains("objective")) cfg.objective = rating::mode_from_string(j.at("objective").get<std::string>());
    read_opt(j, "generations", cfg.generations);
    read_opt(j, "master_seed", cfg.master_seed);
    read_opt(j, "experiment_dir", cfg.experiment_dir);
    read_opt(j, "parallelism", cfg.parallelism);
    read_opt(j, "kill_fraction", cfg.kill_fraction);
    read_opt(j, "templates_dir", cfg.templates_dir);
    read_opt(j, "seed_file", cfg.seed_file);

    if (j.contains("dataset")) {
      const auto& d = j.at("dataset");
      check_keys(d, {"train_path", "test_path", "train_size", "test_size"}, "dataset");
      read_opt(d, "train_path", cfg.train_path);
      read_opt(d, "test_path", cfg.test_path);
      read_opt(d, "train_size", cfg.train_size);
      read_opt(d, "test_size", cfg.test_size);
    }

    if (j.contains("backend")) {
      const auto& b = j.at("backend");
      check_keys(b, {"kind", "synthetic", "http", "embedding", "cache"}, "backend");
      read_opt(b, "kind", cfg.backend.kind);
      read_opt(b, "cache", cfg.backend.cache);
      if (b.contains("synthetic")) {
        const auto& s = b.at("synthetic");
        check_keys(s, {"judge_temperature", "correct_side_bonus", "mutation_noise", "skill_spread"}, "backend.synthetic");
        read_opt(s, "judge_temperature", cfg.backend.synthetic.judge_temperature);
        read_opt(s, "correct_side_bonus", cfg.backend.synthetic.correct_side_bonus);
        read_opt(s, "mutation_noise", cfg.backend.synthetic.mutation_noise);
        read_opt(s, "skill_spread", cfg.backend.synthetic.skill_spread);
      }
      if (b.contains("http")) {
        const auto& h = b.at("http");
        check_keys(h, {"base_url", "model", "chat_path", "embeddings_path", "timeout_seconds", "max_attempts", "base_delay_ms"},
                   "backend.http");
        read_opt(h, "base_url", cfg.backend.http.base_url);
        read_opt(h, "model", cfg.backend.http.model);
        read_opt(h, "chat_path", cfg.backend.http.chat_path);
        read_opt(h, "embeddings_path", cfg.backend.http.embeddings_path);
        read_opt(h, "timeout_seconds", cfg.backend.http.timeout_seconds);
        read_opt(h, "max_attempts", cfg.backend.max_attempts);
        read_opt(h, "base_delay_ms", cfg.backend.base_delay_ms);
      }
      if (b.contains("embedding")) {
        const auto& e = b.at("embedding");
        check_keys(e, {"kind", "dim", "base_url", "model", "embeddings_path"}, "backend.embedding");
        read_opt(e, "kind", cfg.backend.embedding_kind);
        read_opt(e, "dim", cfg.backend.embedding_dim);
        read_opt(e, "base_url", cfg.backend.embedding_http.base_url);
        read_opt(e, "model", cfg.backend.embedding_http.model);
        read_opt(e, "embeddings_path", cfg.backend.embedding_http.embeddings_path);
      }
    }

    if (j.contains("debate")) {
      const auto& d = j.at("debate");
      check_keys(d, {"rounds", "word_limit_per_argument", "transcript_word_limit"}, "debate");
      cfg.debate = debate::debate_config_from_json(d);
    }
    if (j.contains("fit")) {
      check_keys(j.at("fit"),
                 {"learning_rate", "max_epochs", "convergence_epsilon", "beta1", "beta2", "adam_epsilon", "initial_rating"},
                 "fit");
      cfg.fit = rating::fit_config_from_json(j.at("fit"));
    }
    if (j.contains("staticgen")) {
      const auto& s = j.at("staticgen");
      check_keys(s, {"target", "fewshots_per_category"}, "staticgen");
      read_opt(s, "target", cfg.staticgen_target);
      read_opt(s, "fewshots_per_category", cfg.staticgen_fewshots);
    }
    if (j.contains("evaluation")) {
      const auto& e = j.at("evaluation");
      check_keys(e, {"panel_size"}, "evaluation");
      read_opt(e, "panel_size", cfg.panel_size);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  } catch (const DataError& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  return cfg;
}

json to_json(const ExperimentConfig& cfg) {
  const auto& b = cfg.backend;
  json debate_json = debate::to_json(cfg.debate);
  debate_json.erase("first_speaker");
  debate_json.erase("correct_seat");
  return json{
      {"objective", rating::to_string(cfg.objective)},
      {"generations", cfg.generations},
      {"master_seed", cfg.master_seed},
      {"experiment_dir", cfg.experiment_dir},
      {"parallelism", cfg.parallelism},
      {"kill_fraction", cfg.kill_fraction},
      {"templates_dir", cfg.templates_dir},
      {"seed_file", cfg.seed_file},
      {"dataset",
       {{"train_path", cfg.train_path}, {"test_path", cfg.test_path}, {"train_size", cfg.train_size}, {"test_size", cfg.test_size}}},
      {"backend",
       {{"kind", b.kind},
        {"cache", b.cache},
        {"synthetic",
         {{"judge_temperature", b.synthetic.judge_temperature},
          {"correct_side_bonus", b.synthetic.correct_side_bonus},
          {"mutation_noise", b.synthetic.mutation_noise},
          {"skill_spread", b.synthetic.skill_spread}}},
        {"http",
         {{"base_url", b.http.base_url},
          {"model", b.http.model},
          {"chat_path", b.http.chat_path},
          {"embeddings_path", b.http.embeddings_path},
          {"timeout_seconds", b.http.timeout_seconds},
          {"max_attempts", b.max_attempts},
          {"base_delay_ms", b.base_delay_ms}}},
        {"embedding",
         {{"kind", b.embedding_kind},
          {"dim", b.embedding_dim},
          {"base_url", b.embedding_http.base_url},
          {"model", b.embedding_http.model},
          {"embeddings_path", b.embedding_http.embeddings_path}}}}},
      {"debate", debate_json},
      {"fit", rating::to_json(cfg.fit)},
      {"staticgen", {{"target", cfg.staticgen_target}, {"fewshots_per_category", cfg.staticgen_fewshots}}},
      {"evaluation", {{"panel_size", cfg.panel_size}}}};
}

void apply_env_overrides(ExperimentConfig& cfg) {
  if (auto v = env_or_empty("DEBATEQD_ENDPOINT"); !v.empty()) cfg.backend.http.base_url = v;
  if (auto v = env_or_empty("DEBATEQD_MODEL"); !v.empty()) cfg.backend.http.model = v;
  if (auto v = env_or_empty("DEBATEQD_API_KEY"); !v.empty()) {
    cfg.backend.http.api_key = v;
    cfg.backend.embedding_http.api_key = v;
  }
  if (auto v = env_or_empty("DEBATEQD_EMBEDDING_ENDPOINT"); !v.empty()) cfg.backend.embedding_http.base_url = v;
  if (auto v = env_or_empty("DEBATEQD_EMBEDDING_MODEL"); !v.empty()) cfg.backend.embedding_http.model = v;
}

ExperimentConfig load_config(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("config file not found: " + path.string());
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  auto cfg = config_from_json(j);
  apply_env_overrides(cfg);
  return cfg;
}

std::vector<std::string> validate(const ExperimentConfig& cfg) {
  std::vector<std::string> problems;
  auto need = [&](bool ok, const std::string& msg) {
    if (!ok) problems.push_back(msg);
  };
  need(cfg.generations >= 0, "generations must be >= 0");
  need(cfg.parallelism >= 1, "parallelism must be >= 1");
  need(cfg.kill_fraction > 0.0 && cfg.kill_fraction < 1.0, "kill_fraction must lie in (0, 1)");
  need(cfg.train_size >= 1, "dataset.train_size must be >= 1");
  need(cfg.test_size >= 1, "dataset.test_size must be >= 1");
  need(!cfg.train_path.empty(), "dataset.train_path is required");
  need(!cfg.test_path.empty(), "dataset.test_path is required");
  if (!cfg.train_path.empty()) need(fs::exists(cfg.train_path), "dataset.train_path does not exist: " + cfg.train_path);
  if (!cfg.test_path.empty()) need(fs::exists(cfg.test_path), "dataset.test_path does not exist: " + cfg.test_path);
  if (!cfg.templates_dir.empty())
    need(fs::is_directory(cfg.templates_dir), "templates_dir is not a directory: " + cfg.templates_dir);
  if (!cfg.seed_file.empty()) need(fs::exists(cfg.seed_file), "seed_file does not exist: " + cfg.seed_file);
  need(cfg.debate.rounds >= 1, "debate.rounds must be >= 1");
  need(cfg.debate.word_limit_per_argument >= 1, "debate.word_limit_per_argument must be >= 1");
  need(cfg.debate.transcript_word_limit >= 1, "debate.transcript_word_limit must be >= 1");
  need(cfg.fit.learning_rate > 0.0, "fit.learning_rate must be > 0");
  need(cfg.fit.convergence_epsilon > 0.0, "fit.convergence_epsilon must be > 0");
  need(cfg.fit.max_epochs >= 0, "fit.max_epochs must be >= 0");
  need(cfg.staticgen_fewshots >= 1, "staticgen.fewshots_per_category must be >= 1");
  need(cfg.panel_size >= 1, "evaluation.panel_size must be >= 1");
  const auto& b = cfg.backend;
  need(b.kind == "synthetic" || b.kind == "http", "backend.kind must be 'synthetic' or 'http'");
  if (b.kind == "http") {
    need(!b.http.base_url.empty(), "backend.http.base_url is required (or DEBATEQD_ENDPOINT)");
    need(!b.http.model.empty(), "backend.http.model is required (or DEBATEQD_MODEL)");
    need(b.max_attempts >= 1, "backend.http.max_attempts must be >= 1");
  }
  if (b.kind == "synthetic") need(b.synthetic.judge_temperature > 0.0, "backend.synthetic.judge_temperature must be > 0");
  need(b.embedding_kind == "hash" || b.embedding_kind == "http", "backend.embedding.kind must be 'hash' or 'http'");
  if (b.embedding_kind == "hash") need(b.embedding_dim >= 1, "backend.embedding.dim must be >= 1");
  if (b.embedding_kind == "http") {
    need(!b.embedding_http.base_url.empty(), "backend.embedding.base_url is required (or DEBATEQD_EMBEDDING_ENDPOINT)");
    need(!b.embedding_http.model.empty(), "backend.embedding.model is required (or DEBATEQD_EMBEDDING_MODEL)");
  }
  return problems;
}

std::string config_hash(const ExperimentConfig& cfg) {
  json j = to_json(cfg);
  j.erase("experiment_dir");
  j.erase("parallelism");
  return sha256_hex(j.dump());
}

std::size_t lifetime_total(const evolution::SeedBank& bank, evolution::Objective objective, int generations,
                           double kill_fraction) {
  const auto census = evolution::seed_population(bank, objective).census();
  std::size_t total = 0;
  for (const auto& [cat, m] : census) total += m;
  for (int g = 1; g <= generations; ++g) {
    for (const auto& [cat, m] : census) {
      if (m == 0) continue;
      total += std::min(evolution::elimination_count(m, kill_fraction, g), m - 1);
    }
  }
  return total;
}

Runtime make_runtime(const ExperimentConfig& cfg, const fs::path& dir) {
  Runtime rt;
  rt.templates = cfg.templates_dir.empty() ? Templates::builtin() : Templates::load_dir(cfg.templates_dir);
  rt.bank = cfg.seed_file.empty() ? evolution::SeedBank::builtin() : evolution::SeedBank::load(cfg.seed_file);

  const auto& b = cfg.backend;
  std::shared_ptr<llm::Backend> inner;
  llm::RetryPolicy retry;
  retry.max_attempts = b.max_attempts;
  retry.base_delay = std::chrono::milliseconds(b.base_delay_ms);
  if (b.kind == "synthetic") {
    auto model = b.synthetic;
    model.seed = cfg.master_seed;
    std::optional<std::uint64_t> fail_after;
    if (auto v = env_or_empty("DEBATEQD_SYNTHETIC_FAIL_AFTER"); !v.empty()) fail_after = std::stoull(v);
    inner = std::make_shared<llm::SyntheticBackend>(model, fail_after);
  } else if (b.kind == "http") {
    inner = std::make_shared<llm::HttpBackend>(b.http, retry);
  } else {
    throw ConfigError("unknown backend kind: " + b.kind);
  }
  rt.backend = b.cache ? std::make_shared<llm::CachingBackend>(inner, Paths{dir}.cache()) : inner;

  if (b.embedding_kind == "hash") {
    rt.embedder = std::make_shared<llm::HashEmbedder>(b.embedding_dim);
  } else {
    rt.embedder = std::make_shared<llm::HttpEmbedder>(b.embedding_http, retry);
  }
  rt.gateway = std::make_unique<llm::Gateway>(rt.backend, rt.embedder, llm::GatewayOptions{cfg.parallelism});
  return rt;
}

DirectoryLock::DirectoryLock(const fs::path& dir) {
  fs::create_directories(dir);
  const auto path = dir / ".lock";
  fd_ = ::open(path.c_str(), O_CREAT | O_RDWR | O_CLOEXEC, 0644);
  if (fd_ < 0) throw DataError("cannot open lock file " + path.string());
  if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(fd_);
    fd_ = -1;
    throw ResumeError("experiment directory " + dir.string() + " is in use by another process");
  }
}

DirectoryLock::~DirectoryLock() {
  if (fd_ >= 0) {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
}

void prepare_directory(const ExperimentConfig& cfg, const fs::path& dir) {
  const Paths paths{dir};
  const std::string hash = config_hash(cfg);
  if (fs::exists(paths.config())) {
    const json snap = read_json_file(paths.config());
    const std::string existing = snap.value("config_hash", "");
    if (existing != hash) {
      std::string differing;
      if (snap.contains("config")) {
        json a = to_json(cfg);
        const json& b = snap.at("config");
        for (const auto& [key, value] : a.items()) {
          if (key == "experiment_dir" || key == "parallelism") continue;
          if (!b.contains(key) || b.at(key) != value) differing += (differing.empty() ? "" : ", ") + key;
        }
      }
      throw ResumeError("config hash " + hash.substr(0, 12) + " does not match the snapshot in " + dir.string() +
                        " (" + existing.substr(0, 12) + ")" +
                        (differing.empty() ? std::string() : "; differing sections: " + differing) +
                        ". Use a fresh experiment directory or restore the original config.");
    }
    return;
  }
  fs::create_directories(dir);
  write_json_file(paths.config(), stamped(json{{"config", to_json(cfg)}}, hash));
}

ExperimentConfig snapshot_config(const fs::path& dir) {
  const Paths paths{dir};
  if (!fs::exists(paths.config())) throw DataError("missing " + paths.config().string());
  auto cfg = config_from_json(read_json_file(paths.config()).at("config"));
  apply_env_overrides(cfg);
  return cfg;
}

std::string generation_name(int generation) {
  std::string digits = std::to_string(generation);
  return "gen_" + std::string(digits.size() < 3 ? 3 - digits.size() : 0, '0') + digits;
}

std::vector<int> completed_generations(const fs::path& dir) {
  std::vector<int> out;
  const auto gen_dir = dir / "generations";
  if (!fs::is_directory(gen_dir)) return out;
  for (const auto& entry : fs::directory_iterator(gen_dir)) {
    const auto name = entry.path().filename().string();
    if (name.size() == 12 && name.starts_with("gen_") && name.ends_with(".json")) {
      out.push_back(std::stoi(name.substr(4, 3)));
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

std::string hash_of_snapshot(const fs::path& dir) {
  return read_json_file(Paths{dir}.config()).at("config_hash").get<std::string>();
}

void require_valid(const ExperimentConfig& cfg) {
  const auto problems = validate(cfg);
  if (problems.empty()) return;
  std::string msg = "invalid config:";
  for (const auto& p : problems) msg += "\n  - " + p;
  throw ConfigError(msg);
}

dataset::QuestionSet ensure_question_set(const fs::path& path, const std::string& source, std::size_t n,
                                         std::uint64_t seed, dataset::Split split, const std::string& hash) {
  if (fs::exists(path)) return dataset::question_set_from_json(read_json_file(path));
  const auto records = dataset::load_quality(source);
  auto set = dataset::select_questions(records, n, seed, split);
  write_json_file(path, stamped(dataset::to_json(set), hash));
  return set;
}

std::pair<dataset::QuestionSet, dataset::QuestionSet> ensure_questions(const ExperimentConfig& cfg, const Paths& paths,
                                                                       const std::string& hash) {
  auto train = ensure_question_set(paths.train_questions(), cfg.train_path, cfg.train_size,
                                   derive_seed(cfg.master_seed, "questions:train"), dataset::Split::train, hash);
  auto test = ensure_question_set(paths.test_questions(), cfg.test_path, cfg.test_size,
                                  derive_seed(cfg.master_seed, "questions:test"), dataset::Split::test, hash);
  return {std::move(train), std::move(test)};
}

dataset::QuestionSet load_questions(const fs::path& path) {
  if (!fs::exists(path)) throw DataError("missing " + path.string());
  return dataset::question_set_from_json(read_json_file(path));
}

/// Persisted Swiss rounds: a header row, then match and bye rows per round.
std::vector<tournament::RoundResult> read_rounds(const fs::path& matches) {
  std::vector<tournament::RoundResult> rounds;
  if (!fs::exists(matches)) return rounds;
  for (const auto& row : read_jsonl(matches)) {
    const auto kind = row.at("kind").get<std::string>();
    if (kind == "header") continue;
    const int r = row.at("round").get<int>();
    if (rounds.empty() || rounds.back().round_index != r) {
      rounds.emplace_back();
      rounds.back().round_index = r;
    }
    if (kind == "match") {
      rounds.back().records.push_back(tournament::match_record_from_json(row.at("record")));
    } else if (kind == "bye") {
      rounds.back().bye = row.at("participant").get<std::string>();
    }
  }
  return rounds;
}

std::vector<json> round_rows(const tournament::RoundResult& round) {
  std::vector<json> rows;
  for (const auto& r : round.records)
    rows.push_back({{"kind", "match"}, {"round", round.round_index}, {"record", tournament::to_json(r)}});
  if (round.bye) rows.push_back({{"kind", "bye"}, {"round", round.round_index}, {"participant", *round.bye}});
  return rows;
}

std::vector<json> transcript_rows(std::span<const debate::DebateTranscript> transcripts, const std::string& hash) {
  std::vector<json> rows{stamped(json{{"kind", "header"}}, hash)};
  for (const auto& t : transcripts) rows.push_back({{"kind", "transcript"}, {"transcript", debate::to_json(t)}});
  return rows;
}

std::string round_file(int round) {
  std::string digits = std::to_string(round);
  return "round_" + std::string(digits.size() < 2 ? 2 - digits.size() : 0, '0') + digits + ".jsonl";
}

/// Writes the round's transcripts, then rewrites the match file with every
/// round up to this one. Both writes are atomic, so a killed process leaves
/// only whole rounds behind.
void persist_round(const fs::path& matches, const fs::path& transcripts_dir, const tournament::RoundResult& round,
                   const std::string& hash) {
  write_jsonl_atomic(transcripts_dir / round_file(round.round_index), transcript_rows(round.transcripts, hash));
  std::vector<json> rows{stamped(json{{"kind", "header"}}, hash)};
  for (const auto& prior : read_rounds(matches)) {
    if (prior.round_index >= round.round_index) break;
    auto more = round_rows(prior);
    rows.insert(rows.end(), more.begin(), more.end());
  }
  auto fresh = round_rows(round);
  rows.insert(rows.end(), fresh.begin(), fresh.end());
  write_jsonl_atomic(matches, rows);
}

std::map<std::string, std::string> category_groups(const evolution::PopulationState& pop) {
  std::map<std::string, std::string> groups;
  for (const auto& s : pop.strategies) groups[s.id] = s.category;
  for (const auto& t : pop.teams) groups[t.id] = t.category();
  return groups;
}

json ratings_document(const rating::EloModel& model, const std::map<std::string, std::string>& groups,
                      const std::string& hash) {
  const auto c = rating::centered(model);
  return stamped(json{{"model", rating::to_json(model)},
                      {"centered_ratings", c.ratings},
                      {"centered_question_ratings", c.question_ratings},
                      {"category_mean_elo", rating::group_mean(c, groups)}},
                 hash);
}

}  // namespace

int cmd_evolve(const ExperimentConfig& cfg, const fs::path& dir, std::ostream& log) {
  require_valid(cfg);
  prepare_directory(cfg, dir);
  DirectoryLock lock(dir);
  const Paths paths{dir};
  const std::string hash = config_hash(cfg);
  Runtime rt = make_runtime(cfg, dir);
  const auto [train, test] = ensure_questions(cfg, paths, hash);

  evolution::PopulationState start;
  const auto done = completed_generations(dir);
  if (!done.empty()) {
    start = evolution::population_from_json(read_json_file(paths.generation(done.back())).at("next"));
    log << "resuming after generation " << done.back() << "\n";
  } else if (fs::exists(paths.seed_population())) {
    start = evolution::population_from_json(read_json_file(paths.seed_population()).at("population"));
  } else {
    start = evolution::seed_population(rt.bank, cfg.objective);
    write_json_file(paths.seed_population(), stamped(json{{"population", evolution::to_json(start)}}, hash));
  }
  if (start.generation >= cfg.generations) {
    log << "all " << cfg.generations << " generations already complete in " << dir.string() << "\n";
    return 0;
  }

  evolution::MutationContext ctx{*rt.gateway, rt.templates, rt.bank};
  evolution::EvolutionConfig ecfg;
  ecfg.objective = cfg.objective;
  ecfg.generations = cfg.generations;
  ecfg.kill_fraction = cfg.kill_fraction;
  ecfg.debate = cfg.debate;
  ecfg.fit = cfg.fit;

  evolution::EvolutionHooks hooks;
  hooks.completed_rounds = [&](int g) { return read_rounds(paths.matches(g)); };
  hooks.on_round = [&](int g, const tournament::RoundResult& round) {
    persist_round(paths.matches(g), paths.transcripts(g), round, hash);
  };
  hooks.on_generation = [&](const evolution::GenerationOutcome& out) {
    const int g = out.generation;
    if (cfg.objective == evolution::Objective::truth) {
      std::vector<json> rows{stamped(json{{"kind", "header"}}, hash)};
      for (const auto& r : out.truth.records)
        rows.push_back({{"kind", "match"}, {"round", 0}, {"record", tournament::to_json(r)}});
      write_jsonl_atomic(paths.transcripts(g) / "truth.jsonl", transcript_rows(out.truth.transcripts, hash));
      write_jsonl_atomic(paths.matches(g), rows);
    }
    write_json_file(paths.ratings(g), ratings_document(out.model, category_groups(out.evaluated), hash));

    json children = json::array();
    for (const auto& s : out.children) children.push_back(evolution::to_json(s));
    for (const auto& t : out.child_teams) children.push_back(evolution::to_json(t));
    write_json_file(paths.generation(g), stamped(json{{"generation", g},
                                                      {"objective", rating::to_string(cfg.objective)},
                                                      {"evaluated", evolution::to_json(out.evaluated)},
                                                      {"selection", evolution::to_json(out.selection)},
                                                      {"children", children},
                                                      {"next", evolution::to_json(out.next)},
                                                      {"fit_converged", out.model.converged},
                                                      {"fit_cost", out.model.cost}},
                                                 hash));
    log << "generation " << g << "/" << cfg.generations << ": " << out.selection.eliminated.size()
        << " eliminated, fit cost " << format_double(out.model.cost) << ", lifetime " << out.next.lifetime_count
        << "\n";
  };

  evolution::evolve(std::move(start), ecfg, train.questions, ctx, hooks);
  log << "evolution complete: " << rt.gateway->request_count() << " requests, " << rt.gateway->cache_hits()
      << " served from cache\n";
  return 0;
}

int cmd_staticgen(const ExperimentConfig& cfg, const fs::path& dir, std::ostream& log) {
  require_valid(cfg);
  prepare_directory(cfg, dir);
  DirectoryLock lock(dir);
  const Paths paths{dir};
  const std::string hash = config_hash(cfg);
  const fs::path root = paths.staticgen();
  if (fs::exists(root / "ratings.json")) {
    log << "staticgen already complete in " << dir.string() << "\n";
    return 0;
  }
  Runtime rt = make_runtime(cfg, dir);
  const auto [train, test] = ensure_questions(cfg, paths, hash);

  evolution::MutationContext ctx{*rt.gateway, rt.templates, rt.bank};
  std::vector<evolution::StrategyPrompt> pool;
  if (fs::exists(root / "pool.json")) {
    const auto saved = read_json_file(root / "pool.json");
    for (const auto& s : saved.at("pool")) pool.push_back(evolution::strategy_from_json(s));
  } else {
    const std::size_t target = cfg.staticgen_target > 0
                                   ? cfg.staticgen_target
                                   : lifetime_total(rt.bank, evolution::Objective::persuasion, cfg.generations,
                                                    cfg.kill_fraction);
    auto result = evolution::staticgen(target, derive_seed(cfg.master_seed, "staticgen"), ctx, cfg.staticgen_fewshots);
    json pool_json = json::array();
    for (const auto& s : result.pool) pool_json.push_back(evolution::to_json(s));
    write_json_file(root / "pool.json",
                    stamped(json{{"target", target}, {"fewshots", result.fewshots}, {"pool", pool_json}}, hash));
    pool = std::move(result.pool);
    log << "staticgen: generated " << pool.size() << " strategies\n";
  }

  std::vector<debate::Debater> debaters;
  std::map<std::string, std::string> groups;
  for (const auto& s : pool) {
    debaters.push_back(s.debater());
    groups[s.id] = s.category;
  }
  tournament::TournamentHooks th;
  th.completed = read_rounds(root / "matches.jsonl");
  th.on_round = [&](const tournament::RoundResult& round) {
    persist_round(root / "matches.jsonl", root / "transcripts", round, hash);
    log << "staticgen tournament round " << round.round_index << ": " << round.records.size() << " matches\n";
  };
  const auto result = tournament::run_swiss_tournament(debaters, train.questions, cfg.debate, *rt.gateway,
                                                       rt.templates, th);
  std::vector<rating::Observation> obs;
  for (const auto& r : result.records()) obs.push_back({r.participant_a, r.participant_b, r.aggregate_score_a});
  const auto model = rating::fit(obs, rating::Mode::persuasion, cfg.fit);
  write_json_file(root / "ratings.json", ratings_document(model, groups, hash));
  log << "staticgen complete: " << pool.size() << " strategies rated\n";
  return 0;
}

namespace {

analysis::ElitePanel ensure_panel(const fs::path& dir, std::ostream& log) {
  const Paths paths{dir};
  const auto cfg = snapshot_config(dir);
  const std::string hash = hash_of_snapshot(dir);
  DirectoryLock lock(dir);
  const fs::path panel_path = paths.evaluation() / "panel.json";
  if (fs::exists(panel_path)) return analysis::elite_panel_from_json(read_json_file(panel_path).at("panel"));

  const auto done = completed_generations(dir);
  if (done.empty()) throw DataError("no completed generation in " + dir.string() + " (missing " +
                                    paths.generation(1).string() + ")");
  auto rated = evolution::population_from_json(read_json_file(paths.generation(done.back())).at("evaluated"));
  // Report ratings on the population-mean-400 gauge.
  double mean = 0.0;
  std::size_t n = 0;
  for (const auto& s : rated.strategies) mean += *s.rating, ++n;
  for (const auto& t : rated.teams) mean += *t.rating, ++n;
  if (n > 0) mean /= static_cast<double>(n);
  for (auto& s : rated.strategies) *s.rating += 400.0 - mean;
  for (auto& t : rated.teams) *t.rating += 400.0 - mean;

  const auto train = load_questions(paths.train_questions());
  const auto test = load_questions(paths.test_questions());
  Runtime rt = make_runtime(cfg, dir);
  auto panel = analysis::build_elite_panel(rated, train.questions, test.questions, cfg.debate, *rt.gateway,
                                           rt.templates, cfg.panel_size);
  write_json_file(panel_path, stamped(json{{"generation", done.back()}, {"panel", analysis::to_json(panel)}}, hash));
  log << "elite panel for " << dir.string() << ": " << panel.entries.size() << " entities from generation "
      << done.back() << (panel.shortfall ? " (fewer than requested)" : "") << "\n";
  return panel;
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

int cmd_evaluate(const fs::path& persuasion_dir, const fs::path& truth_dir, const fs::path& out_dir,
                 const EvaluateOptions& options, std::ostream& log) {
  std::vector<std::string> missing;
  for (const auto& d : {persuasion_dir, truth_dir})
    if (!fs::exists(Paths{d}.config())) missing.push_back(Paths{d}.config().string());
  if (!missing.empty()) {
    std::string msg = "missing inputs:";
    for (const auto& m : missing) msg += " " + m;
    throw DataError(msg);
  }
  const auto p = ensure_panel(persuasion_dir, log);
  const auto t = ensure_panel(truth_dir, log);
  const auto gp = p.gaps(), gt = t.gaps();
  const auto boot = analysis::bootstrap_gap_difference(gp, gt, options.iterations, options.seed, options.mode);

  const json doc{{"persuasion_dir", persuasion_dir.generic_string()},
                 {"truth_dir", truth_dir.generic_string()},
                 {"persuasion_mean_gap", mean_of(gp)},
                 {"truth_mean_gap", mean_of(gt)},
                 {"persuasion_panel_size", gp.size()},
                 {"truth_panel_size", gt.size()},
                 {"bootstrap", analysis::to_json(boot)},
                 {"code_version", kCodeVersion}};
  write_json_file(out_dir / "gap_comparison.json", doc);
  log << "mean gap persuasion " << format_fixed(mean_of(gp), 4) << ", truth " << format_fixed(mean_of(gt), 4)
      << ", difference " << format_fixed(boot.mean_difference, 4) << " [" << format_fixed(boot.ci_low, 4) << ", "
      << format_fixed(boot.ci_high, 4) << "] (" << analysis::to_string(boot.mode) << ", " << boot.iterations
      << " iterations)\n";
  return 0;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

struct Table {
  std::string name;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string csv() const {
    std::string out;
    auto line = [&](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) out += (i ? "," : "") + csv_field(cells[i]);
      out += '\n';
    };
    line(header);
    for (const auto& r : rows) line(r);
    return out;
  }
};

std::vector<std::string> members_of(const evolution::PopulationState& pop) {
  std::vector<std::string> out;
  for (const auto& s : pop.strategies) out.push_back(s.text);
  for (const auto& t : pop.teams) {
    out.push_back(t.member1.text);
    out.push_back(t.member2.text);
  }
  return out;
}

}  // namespace

int cmd_report(const fs::path& dir, std::ostream& log) {
  const Paths paths{dir};
  const auto done = completed_generations(dir);
  const bool has_staticgen = fs::exists(paths.staticgen() / "ratings.json");
  if (!fs::exists(paths.config()) || (done.empty() && !has_staticgen)) {
    std::vector<std::string> missing;
    if (!fs::exists(paths.config())) missing.push_back("config.json");
    if (!fs::exists(paths.seed_population())) missing.push_back("population/gen_000.json");
    if (done.empty()) missing.push_back("generations/gen_001.json");
    if (!has_staticgen) missing.push_back("staticgen/ratings.json");
    std::string msg = "cannot report on " + dir.string() + "; missing:";
    for (const auto& m : missing) msg += " " + m;
    throw DataError(msg);
  }
  const auto cfg = snapshot_config(dir);
  const std::string hash = hash_of_snapshot(dir);
  const auto bank = cfg.seed_file.empty() ? evolution::SeedBank::builtin() : evolution::SeedBank::load(cfg.seed_file);
  std::vector<std::string> warnings;
  std::vector<Table> tables;

  if (!done.empty()) {
    Table elo{"category_elo", {"generation", "category", "mean_elo", "members"}, {}};
    Table words{"word_counts", {"generation", "id", "category", "word_count"}, {}};
    for (int g : done) {
      const auto state = read_json_file(paths.generation(g));
      const auto pop = evolution::population_from_json(state.at("evaluated"));
      const auto ratings = read_json_file(paths.ratings(g));
      const auto means = ratings.at("category_mean_elo").get<std::map<std::string, double>>();
      const auto census = pop.census();
      for (const auto& cat : bank.categories) {
        const auto it = means.find(cat.name);
        if (it == means.end()) continue;
        elo.rows.push_back({std::to_string(g), cat.name, format_double(it->second), std::to_string(census.at(cat.name))});
      }
      for (const auto& s : pop.strategies)
        words.rows.push_back({std::to_string(g), s.id, s.category, std::to_string(word_count(s.text))});
      for (const auto& t : pop.teams) {
        for (const auto* m : {&t.member1, &t.member2})
          words.rows.push_back({std::to_string(g), m->id, m->category, std::to_string(word_count(m->text))});
      }
    }
    tables.push_back(std::move(elo));
    tables.push_back(std::move(words));
    if (done.back() < cfg.generations)
      warnings.push_back("generations " + std::to_string(done.back() + 1) + ".." + std::to_string(cfg.generations) +
                         " not yet run");
  } else {
    warnings.push_back("no evolutionary generations (generations/gen_001.json absent)");
  }

  json extra = json::object();
  const fs::path panel_path = paths.evaluation() / "panel.json";
  if (fs::exists(panel_path)) {
    const auto panel = analysis::elite_panel_from_json(read_json_file(panel_path).at("panel"));
    Table t{"elo_vs_accuracy", {"id", "category", "elo", "train_accuracy", "test_accuracy", "gap"}, {}};
    std::vector<double> elo, acc;
    for (const auto& e : panel.entries) {
      t.rows.push_back({e.id, e.category, format_double(e.rating), format_double(e.train_accuracy),
                        format_double(e.test_accuracy), format_double(e.gap)});
      elo.push_back(e.rating);
      acc.push_back(e.test_accuracy);
    }
    tables.push_back(std::move(t));
    try {
      extra["elo_test_accuracy_pearson"] = analysis::pearson(elo, acc);
    } catch (const std::invalid_argument& e) {
      warnings.push_back(std::string("Elo/accuracy correlation undefined: ") + e.what());
    }
    if (panel.shortfall) warnings.push_back("elite panel smaller than requested");
  } else {
    warnings.push_back("evaluation/panel.json absent (run evaluate)");
  }

  const fs::path gap_path = paths.evaluation() / "gap_comparison.json";
  if (fs::exists(gap_path)) {
    const auto g = read_json_file(gap_path);
    const auto boot = analysis::bootstrap_result_from_json(g.at("bootstrap"));
    tables.push_back({"gap_difference",
                      {"persuasion_mean_gap", "truth_mean_gap", "mean_difference", "ci_low", "ci_high", "iterations",
                       "mode"},
                      {{format_double(g.at("persuasion_mean_gap").get<double>()),
                        format_double(g.at("truth_mean_gap").get<double>()), format_double(boot.mean_difference),
                        format_double(boot.ci_low), format_double(boot.ci_high), std::to_string(boot.iterations),
                        analysis::to_string(boot.mode)}}});
  } else {
    warnings.push_back("evaluation/gap_comparison.json absent (run evaluate)");
  }

  const fs::path div_path = paths.evaluation() / "diversity.json";
  if (fs::exists(div_path)) {
    Table t{"diversity", {"dir", "source", "count", "diversity"}, {}};
    const auto div = read_json_file(div_path);
    for (const auto& e : div.at("entries")) {
      t.rows.push_back({e.at("dir").get<std::string>(), e.at("source").get<std::string>(),
                        std::to_string(e.at("count").get<std::size_t>()), format_double(e.at("diversity").get<double>())});
    }
    tables.push_back(std::move(t));
  } else {
    warnings.push_back("evaluation/diversity.json absent (run diversity)");
  }

  fs::create_directories(paths.reports());
  json table_index = json::object();
  std::ostringstream summary;
  summary << "Experiment (" << rating::to_string(cfg.objective) << ", config " << hash.substr(0, 12) << ")\n";
  summary << "Completed generations: " << done.size() << " of " << cfg.generations << "\n";
  for (const auto& t : tables) {
    write_file_atomic(paths.reports() / (t.name + ".csv"), t.csv());
    table_index[t.name] = {{"file", t.name + ".csv"}, {"rows", t.rows.size()}, {"columns", t.header}};
    summary << "  " << t.name << ".csv: " << t.rows.size() << " rows\n";
  }
  if (!done.empty()) {
    const auto ratings = read_json_file(paths.ratings(done.back()));
    summary << "Category mean Elo at generation " << done.back() << " (population mean 400):\n";
    const auto means = ratings.at("category_mean_elo").get<std::map<std::string, double>>();
    for (const auto& cat : bank.categories) {
      if (auto it = means.find(cat.name); it != means.end())
        summary << "  " << cat.name << ": " << format_fixed(it->second, 1) << "\n";
    }
  }
  if (extra.contains("elo_test_accuracy_pearson"))
    summary << "Pearson r (Elo vs test accuracy): " << format_fixed(extra["elo_test_accuracy_pearson"].get<double>(), 4)
            << "\n";
  for (const auto& w : warnings) summary << "warning: " << w << "\n";

  json report{{"schema_version", 1}, {"code_version", kCodeVersion}, {"config_hash", hash},
              {"tables", table_index}, {"warnings", warnings}, {"statistics", extra}};
  write_json_file(paths.reports() / "report.json", report);
  write_file_atomic(paths.reports() / "summary.txt", summary.str());
  log << summary.str();
  return 0;
}

int cmd_diversity(const std::vector<fs::path>& dirs, const fs::path& out_dir, std::ostream& log) {
  if (dirs.empty()) throw ConfigError("diversity needs at least one experiment directory");
  json entries = json::array();
  std::vector<double> scores;
  for (const auto& dir : dirs) {
    const Paths paths{dir};
    if (!fs::exists(paths.config())) throw DataError("missing " + paths.config().string());
    const auto cfg = snapshot_config(dir);
    Runtime rt = make_runtime(cfg, dir);

    auto add = [&](const std::string& source, const std::vector<std::string>& texts) {
      const double d = analysis::embedding_diversity(texts, *rt.gateway);
      entries.push_back({{"dir", dir.generic_string()}, {"source", source}, {"count", texts.size()}, {"diversity", d}});
      scores.push_back(d);
      log << dir.string() << " [" << source << "]: " << texts.size() << " strategies, diversity " << format_fixed(d, 4)
          << "\n";
    };
    bool any = false;
    if (fs::exists(paths.seed_population())) {
      auto texts = members_of(evolution::population_from_json(read_json_file(paths.seed_population()).at("population")));
      for (int g : completed_generations(dir)) {
        const auto state = read_json_file(paths.generation(g));
        for (const auto& c : state.at("children")) {
          if (c.contains("member1")) {
            texts.push_back(c.at("member1").at("text").get<std::string>());
            texts.push_back(c.at("member2").at("text").get<std::string>());
          } else {
            texts.push_back(c.at("text").get<std::string>());
          }
        }
      }
      add("evolved", texts);
      any = true;
    }
    if (fs::exists(paths.staticgen() / "pool.json")) {
      std::vector<std::string> texts;
      const auto saved = read_json_file(paths.staticgen() / "pool.json");
      for (const auto& s : saved.at("pool"))
        texts.push_back(s.at("text").get<std::string>());
      add("staticgen", texts);
      any = true;
    }
    if (!any)
      throw DataError("no strategies in " + dir.string() + " (missing population/gen_000.json and staticgen/pool.json)");
  }
  json doc{{"code_version", kCodeVersion}, {"entries", entries}};
  if (scores.size() >= 2 && scores[1] != 0.0) {
    doc["ratio_first_to_second"] = scores[0] / scores[1];
    log << "ratio " << format_fixed(scores[0] / scores[1], 4) << "\n";
  }
  write_json_file(out_dir / "diversity.json", doc);
  return 0;
}

int cmd_validate_config(const fs::path& config_path, std::ostream& log) {
  const auto cfg = load_config(config_path);
  require_valid(cfg);
  log << "config ok: " << rating::to_string(cfg.objective) << ", " << cfg.generations << " generations, backend "
      << cfg.backend.kind << ", hash " << config_hash(cfg) << "\n";
  return 0;
}

}  // namespace debateqd::experiment
