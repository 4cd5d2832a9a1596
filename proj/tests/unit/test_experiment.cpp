#include <sstream>

#include "debateqd/error.hpp"
#include "debateqd/experiment.hpp"
#include "doctest.h"
#include "support/support.hpp"

using namespace debateqd;
using namespace debateqd::experiment;

namespace {

ExperimentConfig small_config(evolution::Objective objective, int generations) {
  ExperimentConfig cfg;
  cfg.objective = objective;
  cfg.generations = generations;
  cfg.master_seed = 5;
  cfg.parallelism = 4;
  cfg.train_path = testsupport::data_file("quality_sample/train.jsonl").string();
  cfg.test_path = testsupport::data_file("quality_sample/dev.jsonl").string();
  cfg.train_size = 2;
  cfg.test_size = 2;
  cfg.debate.rounds = 1;
  cfg.backend.synthetic.correct_side_bonus = 0.5;
  return cfg;
}

std::map<std::string, std::filesystem::file_time_type> snapshot_tree(const fs::path& dir) {
  std::map<std::string, std::filesystem::file_time_type> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = e.last_write_time();
  return out;
}

}  // namespace

TEST_CASE("config parsing fills defaults and rejects unknown keys") {
  const auto cfg = config_from_json(json{{"objective", "truth"}, {"dataset", {{"train_size", 5}}}});
  CHECK(cfg.objective == evolution::Objective::truth);
  CHECK(cfg.generations == 20);
  CHECK(cfg.train_size == 5);
  CHECK(cfg.fit.learning_rate == 10.0);
  CHECK(cfg.debate.word_limit_per_argument == 150);
  CHECK_THROWS_AS(config_from_json(json{{"generation", 3}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(json{{"backend", {{"synthetic", {{"temperature", 1}}}}}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(json{{"objective", "victory"}}), ConfigError);
  CHECK_THROWS_AS(load_config(testsupport::fixture("bad_config.json")), ConfigError);
  const auto round = config_from_json(to_json(cfg));
  CHECK(to_json(round) == to_json(cfg));
}

TEST_CASE("config hash ignores placement and parallelism only") {
  auto a = small_config(evolution::Objective::persuasion, 2);
  auto b = a;
  b.experiment_dir = "/elsewhere";
  b.parallelism = 64;
  CHECK(config_hash(a) == config_hash(b));
  b.master_seed = 6;
  CHECK(config_hash(a) != config_hash(b));
  b = a;
  b.backend.synthetic.correct_side_bonus = 0.0;
  CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("api keys come from the environment and are never serialised") {
  ::setenv("DEBATEQD_API_KEY", "sk-test-123", 1);
  ::setenv("DEBATEQD_ENDPOINT", "http://localhost:9", 1);
  auto cfg = small_config(evolution::Objective::persuasion, 1);
  apply_env_overrides(cfg);
  ::unsetenv("DEBATEQD_API_KEY");
  ::unsetenv("DEBATEQD_ENDPOINT");
  CHECK(cfg.backend.http.api_key == "sk-test-123");
  CHECK(cfg.backend.http.base_url == "http://localhost:9");
  CHECK(to_json(cfg).dump().find("sk-test-123") == std::string::npos);
}

TEST_CASE("validation lists every problem") {
  ExperimentConfig cfg;
  cfg.kill_fraction = 1.5;
  cfg.backend.kind = "http";
  cfg.test_path = "/no/such/file.jsonl";
  const auto problems = validate(cfg);
  auto mentions = [&](const std::string& s) {
    return std::any_of(problems.begin(), problems.end(), [&](const std::string& p) { return p.find(s) != std::string::npos; });
  };
  CHECK(mentions("kill_fraction"));
  CHECK(mentions("train_path is required"));
  CHECK(mentions("test_path does not exist"));
  CHECK(mentions("base_url"));
  CHECK(validate(small_config(evolution::Objective::truth, 1)).empty());
}

TEST_CASE("lifetime total matches the alternating elimination rule") {
  const auto bank = evolution::SeedBank::builtin();
  CHECK(lifetime_total(bank, evolution::Objective::persuasion, 20, 0.5) == 385);
  CHECK(lifetime_total(bank, evolution::Objective::truth, 20, 0.5) == 385);
  CHECK(lifetime_total(bank, evolution::Objective::persuasion, 1, 0.5) == 35 + 21);
  CHECK(lifetime_total(bank, evolution::Objective::persuasion, 0, 0.5) == 35);
}

TEST_CASE("generation names are zero padded") {
  CHECK(generation_name(0) == "gen_000");
  CHECK(generation_name(12) == "gen_012");
  CHECK(Paths{"/x"}.matches(3) == fs::path("/x/matches/gen_003.jsonl"));
}

TEST_CASE("a second lock on the same directory is refused") {
  testsupport::TempDir dir("lock");
  DirectoryLock first(dir.path());
  CHECK_THROWS_AS(DirectoryLock(dir.path()), ResumeError);
}

TEST_CASE("evolve persists every stage and resumes idempotently") {
  testsupport::TempDir dir("evolve");
  const auto cfg = small_config(evolution::Objective::persuasion, 2);
  std::ostringstream log;
  CHECK(cmd_evolve(cfg, dir.path(), log) == 0);
  const Paths p{dir.path()};
  CHECK(completed_generations(dir.path()) == std::vector<int>{1, 2});
  CHECK(fs::exists(p.config()));
  CHECK(fs::exists(p.train_questions()));
  CHECK(fs::exists(p.seed_population()));
  CHECK(fs::exists(p.cache()));
  for (int g : {1, 2}) {
    CHECK(fs::exists(p.ratings(g)));
    // 35 participants: ceil(log2 35) = 6 rounds.
    for (int r = 1; r <= 6; ++r) CHECK(fs::exists(p.transcripts(g) / ("round_0" + std::to_string(r) + ".jsonl")));
    const auto rows = read_jsonl(p.matches(g));
    CHECK(rows.front().at("config_hash") == config_hash(cfg));
    std::size_t matches = 0, byes = 0;
    for (const auto& row : rows) {
      matches += row.at("kind") == "match";
      byes += row.at("kind") == "bye";
    }
    CHECK(matches == 6 * 17);
    CHECK(byes == 6);
  }
  const auto state = read_json_file(p.generation(2));
  CHECK(state.at("next").at("lifetime_count") == 35 + 21 + 14);
  CHECK(state.at("code_version") == kCodeVersion);

  const auto before = snapshot_tree(dir.path());
  std::ostringstream again;
  CHECK(cmd_evolve(cfg, dir.path(), again) == 0);
  CHECK(again.str().find("already complete") != std::string::npos);
  auto after = snapshot_tree(dir.path());
  CHECK(after == before);

  auto changed = cfg;
  changed.master_seed = 99;
  std::ostringstream refused;
  CHECK_THROWS_AS(cmd_evolve(changed, dir.path(), refused), ResumeError);
  CHECK(snapshot_tree(dir.path()) == before);

  // Extending the run is a different config and is refused as well.
  auto longer = cfg;
  longer.generations = 3;
  CHECK_THROWS_AS(cmd_evolve(longer, dir.path(), refused), ResumeError);
}

TEST_CASE("report fails on an empty directory and is repeatable") {
  testsupport::TempDir empty("empty");
  std::ostringstream log;
  try {
    cmd_report(empty.path(), log);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    const std::string what = e.what();
    CHECK(what.find("config.json") != std::string::npos);
    CHECK(what.find("generations/gen_001.json") != std::string::npos);
  }

  testsupport::TempDir dir("report");
  const auto cfg = small_config(evolution::Objective::truth, 2);
  cmd_evolve(cfg, dir.path(), log);
  CHECK(cmd_report(dir.path(), log) == 0);
  const Paths p{dir.path()};
  const auto report = read_json_file(p.reports() / "report.json");
  CHECK(report.at("tables").at("category_elo").at("rows") == 2 * 7);
  CHECK(report.at("tables").at("word_counts").at("rows") == 2 * 35 * 2);
  CHECK_FALSE(report.at("warnings").empty());
  const std::string first = read_file(p.reports() / "category_elo.csv");
  const std::string summary = read_file(p.reports() / "summary.txt");
  cmd_report(dir.path(), log);
  CHECK(read_file(p.reports() / "category_elo.csv") == first);
  CHECK(read_file(p.reports() / "summary.txt") == summary);
  CHECK(first.starts_with("generation,category,mean_elo,members\n1,Rationality,"));
}

TEST_CASE("validate-config accepts the shipped config and rejects the bad fixture") {
  std::ostringstream log;
  auto cfg = load_config(testsupport::fixture("bad_config.json").parent_path().parent_path().parent_path() /
                         "configs" / "synthetic_persuasion.json");
  CHECK(cfg.master_seed == 1);
  CHECK_THROWS_AS(cmd_validate_config(testsupport::fixture("bad_config.json"), log), ConfigError);
  CHECK_THROWS_AS(cmd_validate_config("/no/such/config.json", log), ConfigError);
}

TEST_CASE("staticgen, evaluate, diversity and report chain together") {
  std::ostringstream log;
  testsupport::TempDir pers("chain-p"), truth("chain-t"), sg("chain-sg");
  REQUIRE(cmd_evolve(small_config(evolution::Objective::persuasion, 1), pers.path(), log) == 0);
  REQUIRE(cmd_evolve(small_config(evolution::Objective::truth, 1), truth.path(), log) == 0);

  auto sg_cfg = small_config(evolution::Objective::persuasion, 1);
  sg_cfg.staticgen_target = 14;
  REQUIRE(cmd_staticgen(sg_cfg, sg.path(), log) == 0);
  const Paths sp{sg.path()};
  const auto pool = read_json_file(sp.staticgen() / "pool.json");
  REQUIRE(pool.at("pool").size() == 14);
  CHECK(pool.at("pool")[0].at("id") == "rationality-sg-0");
  CHECK(pool.at("pool")[0].at("generation_born") == 1);
  const std::string ratings = read_file(sp.staticgen() / "ratings.json");
  std::ostringstream again;
  CHECK(cmd_staticgen(sg_cfg, sg.path(), again) == 0);
  CHECK(again.str().find("already complete") != std::string::npos);
  // Losing the ratings reruns the tournament from the saved pool.
  fs::remove(sp.staticgen() / "ratings.json");
  CHECK(cmd_staticgen(sg_cfg, sg.path(), log) == 0);
  CHECK(read_file(sp.staticgen() / "ratings.json") == ratings);

  const Paths pp{pers.path()};
  EvaluateOptions opts;
  opts.iterations = 2000;
  CHECK(cmd_evaluate(pers.path(), truth.path(), pp.evaluation(), opts, log) == 0);
  const auto gaps = read_json_file(pp.evaluation() / "gap_comparison.json");
  CHECK(gaps.at("persuasion_panel_size") == 15);
  CHECK(gaps.at("truth_panel_size") == 15);
  CHECK(gaps.at("bootstrap").at("iterations") == 2000);
  CHECK(fs::exists(Paths{truth.path()}.evaluation() / "panel.json"));
  CHECK_THROWS_AS(cmd_evaluate(pers.path(), sg.path() / "nowhere", pp.evaluation(), opts, log), DataError);

  CHECK(cmd_diversity({pers.path(), sg.path()}, pp.evaluation(), log) == 0);
  const auto div = read_json_file(pp.evaluation() / "diversity.json");
  REQUIRE(div.at("entries").size() == 2);
  CHECK(div.at("entries")[0].at("source") == "evolved");
  CHECK(div.at("entries")[0].at("count") == 35 + 21);
  CHECK(div.at("entries")[1].at("source") == "staticgen");
  CHECK(div.at("entries")[1].at("count") == 14);
  CHECK(div.contains("ratio_first_to_second"));

  CHECK(cmd_report(pers.path(), log) == 0);
  const auto report = read_json_file(pp.reports() / "report.json");
  CHECK(report.at("tables").at("elo_vs_accuracy").at("rows") == 15);
  CHECK(report.at("tables").at("gap_difference").at("rows") == 1);
  CHECK(report.at("tables").at("diversity").at("rows") == 2);
  // Synthetic self-play accuracy is the same for every strategy, so the
  // correlation is undefined and reported as a warning.
  CHECK_FALSE(report.at("statistics").contains("elo_test_accuracy_pearson"));
  CHECK(report.at("warnings").dump().find("correlation undefined") != std::string::npos);
}
