#pragma once

#include <filesystem>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "debateqd/analysis.hpp"
#include "debateqd/evolution.hpp"
#include "debateqd/http_backend.hpp"
#include "debateqd/synthetic_backend.hpp"

namespace debateqd::experiment {

namespace fs = std::filesystem;

struct BackendConfig {
  std::string kind = "synthetic";  // synthetic | http
  llm::SyntheticAgentModel synthetic;
  llm::HttpEndpoint http;
  int max_attempts = 5;
  int base_delay_ms = 1000;
  std::string embedding_kind = "hash";  // hash | http
  std::size_t embedding_dim = 256;
  llm::HttpEndpoint embedding_http;
  bool cache = true;
};

struct ExperimentConfig {
  evolution::Objective objective = evolution::Objective::persuasion;
  int generations = 20;
  std::uint64_t master_seed = 0;
  std::string experiment_dir;
  std::size_t parallelism = 8;
  double kill_fraction = 0.5;
  std::string train_path;
  std::string test_path;
  std::size_t train_size = 3;
  std::size_t test_size = 3;
  BackendConfig backend;
  debate::DebateConfig debate;
  rating::FitConfig fit;
  /// 0 means the lifetime strategy count of the matching evolutionary run.
  std::size_t staticgen_target = 0;
  std::size_t staticgen_fewshots = 3;
  std::size_t panel_size = 15;
  std::string templates_dir;
  std::string seed_file;
};

/// Missing keys take their defaults; unknown keys are rejected.
ExperimentConfig config_from_json(const json& j);
/// API keys are never serialised.
json to_json(const ExperimentConfig& cfg);

/// DEBATEQD_ENDPOINT, DEBATEQD_MODEL, DEBATEQD_API_KEY,
/// DEBATEQD_EMBEDDING_ENDPOINT, DEBATEQD_EMBEDDING_MODEL.
void apply_env_overrides(ExperimentConfig& cfg);

ExperimentConfig load_config(const fs::path& path);

/// Every problem found, one per entry. Empty when valid.
std::vector<std::string> validate(const ExperimentConfig& cfg);

/// SHA-256 of the canonical config JSON without the settings that cannot
/// change results (experiment_dir, parallelism).
std::string config_hash(const ExperimentConfig& cfg);

/// Entities created over a full run: seeds plus every replacement.
std::size_t lifetime_total(const evolution::SeedBank& bank, evolution::Objective objective, int generations,
                           double kill_fraction);

/// Model access and prompt material for one experiment.
struct Runtime {
  std::shared_ptr<llm::Backend> backend;
  std::shared_ptr<llm::Embedder> embedder;
  std::unique_ptr<llm::Gateway> gateway;
  Templates templates;
  evolution::SeedBank bank;
};

/// Builds the backend stack. DEBATEQD_SYNTHETIC_FAIL_AFTER=N makes the
/// synthetic backend fail after N live calls (for interruption tests).
Runtime make_runtime(const ExperimentConfig& cfg, const fs::path& dir);

/// Exclusive advisory lock on <dir>/.lock, held for the object's lifetime.
class DirectoryLock {
 public:
  explicit DirectoryLock(const fs::path& dir);
  ~DirectoryLock();
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

 private:
  int fd_ = -1;
};

/// Checks an existing snapshot against cfg (ResumeError on mismatch, before
/// touching anything), otherwise writes config.json.
void prepare_directory(const ExperimentConfig& cfg, const fs::path& dir);

/// Reads the config snapshot of an experiment directory, with environment
/// overrides applied.
ExperimentConfig snapshot_config(const fs::path& dir);

std::string generation_name(int generation);

struct Paths {
  fs::path root;

  fs::path config() const { return root / "config.json"; }
  fs::path train_questions() const { return root / "questions" / "train.json"; }
  fs::path test_questions() const { return root / "questions" / "test.json"; }
  fs::path seed_population() const { return root / "population" / "gen_000.json"; }
  fs::path generation(int g) const { return root / "generations" / (generation_name(g) + ".json"); }
  fs::path matches(int g) const { return root / "matches" / (generation_name(g) + ".jsonl"); }
  fs::path transcripts(int g) const { return root / "transcripts" / generation_name(g); }
  fs::path ratings(int g) const { return root / "ratings" / (generation_name(g) + ".json"); }
  fs::path cache() const { return root / "cache" / "llm_cache.jsonl"; }
  fs::path evaluation() const { return root / "evaluation"; }
  fs::path reports() const { return root / "reports"; }
  fs::path staticgen() const { return root / "staticgen"; }
};

/// Generation numbers with a completed state file, ascending.
std::vector<int> completed_generations(const fs::path& dir);

struct EvaluateOptions {
  std::size_t iterations = 100000;
  std::uint64_t seed = 0;
  analysis::BootstrapMode mode = analysis::BootstrapMode::independent;
};

int cmd_evolve(const ExperimentConfig& cfg, const fs::path& dir, std::ostream& log);
int cmd_staticgen(const ExperimentConfig& cfg, const fs::path& dir, std::ostream& log);
int cmd_evaluate(const fs::path& persuasion_dir, const fs::path& truth_dir, const fs::path& out_dir,
                 const EvaluateOptions& options, std::ostream& log);
int cmd_report(const fs::path& dir, std::ostream& log);
int cmd_diversity(const std::vector<fs::path>& dirs, const fs::path& out_dir, std::ostream& log);
int cmd_validate_config(const fs::path& config_path, std::ostream& log);

}  // namespace debateqd::experiment
