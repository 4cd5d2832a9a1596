#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "debateqd/rating.hpp"
#include "debateqd/tournament.hpp"

namespace debateqd::evolution {

using Objective = rating::Mode;

struct Category {
  std::string name;
  std::string slug;
  std::string label;
  std::string description;
  /// Eliminate the best instead of the worst (the Inept Persuasion control).
  bool reverse_selection = false;
  std::vector<std::string> seeds;
};

/// The seed strategies and category descriptions, read from the versioned
/// seed file.
struct SeedBank {
  int version = 0;
  std::vector<Category> categories;

  static SeedBank builtin();
  static SeedBank load(const std::filesystem::path& path);
  static SeedBank parse(const json& j);

  std::size_t index_of(std::string_view name) const;
  const Category& category(std::string_view name) const { return categories[index_of(name)]; }
};

struct StrategyPrompt {
  std::string id;
  std::string category;
  std::string text;
  int generation_born = 0;
  std::vector<std::string> parent_ids;
  std::optional<double> rating;
  /// Text was cut to the 200-word limit.
  bool truncated = false;

  debate::Debater debater() const { return {id, text}; }
};

/// A pair of strategies evaluated together in truth mode. The team's
/// category for selection is member1's.
struct DebateTeam {
  std::string id;
  StrategyPrompt member1;
  StrategyPrompt member2;
  int generation_born = 0;
  std::vector<std::string> parent_ids;
  std::optional<double> rating;

  const std::string& category() const { return member1.category; }
  tournament::Team team() const { return {id, member1.debater(), member2.debater()}; }
};

/// Alive population at the start of `generation` (0 = seeds).
struct PopulationState {
  int generation = 0;
  Objective objective = Objective::persuasion;
  std::vector<StrategyPrompt> strategies;
  std::vector<DebateTeam> teams;
  /// Entities ever created, seeds included.
  std::size_t lifetime_count = 0;

  std::map<std::string, std::size_t> census() const;
  std::size_t size() const { return objective == Objective::persuasion ? strategies.size() : teams.size(); }
};

std::string strategy_id(const Category& c, int generation, std::size_t k);
std::string team_id(const Category& c, int generation, std::size_t k);

/// Persuasion: every seed as a strategy. Truth: seed j of category c is
/// paired with seed j of category c+1 (mod K) into team c/j.
PopulationState seed_population(const SeedBank& bank, Objective objective);

/// floor(f * m) on even generations, ceil(f * m) on odd ones.
std::size_t elimination_count(std::size_t members, double kill_fraction, int generation);

struct Selection {
  std::vector<std::string> survivors;
  std::vector<std::string> eliminated;
};

/// Per category truncation by rating: the lowest k go (highest k for
/// reverse-selection categories). Among members tied at the cut, the larger
/// id goes. Returns ids in population order.
Selection select(const PopulationState& pop, const SeedBank& bank, double kill_fraction, int generation);

struct MutationContext {
  llm::Gateway& gateway;
  const Templates& templates;
  const SeedBank& bank;
  int max_retries = 3;
  int word_limit = 200;
};

/// Extracts `keys` from the JSON object in a mutator reply. Tolerates
/// surrounding prose and a trailing comma before the closing brace. Returns
/// nullopt when the object or any key is missing or empty.
std::optional<std::vector<std::string>> parse_mutator_reply(std::string_view text,
                                                            const std::vector<std::string>& keys);

/// One child per call with every survivor as inspiration. Children take ids
/// strategy_id(category, generation, k).
std::vector<StrategyPrompt> mutate(std::span<const StrategyPrompt> survivors, const Category& category,
                                   std::size_t count, int generation, MutationContext& ctx);

std::vector<DebateTeam> mutate_teams(std::span<const DebateTeam> survivors, const Category& category,
                                     std::size_t count, int generation, MutationContext& ctx);

struct EvolutionConfig {
  Objective objective = Objective::persuasion;
  int generations = 20;
  double kill_fraction = 0.5;
  debate::DebateConfig debate;
  rating::FitConfig fit;
};

/// Everything produced while playing one generation.
struct GenerationOutcome {
  int generation = 0;
  /// Population that was evaluated, with ratings filled in.
  PopulationState evaluated;
  rating::EloModel model;
  std::vector<tournament::RoundResult> rounds;
  tournament::TruthEvaluation truth;
  Selection selection;
  std::vector<StrategyPrompt> children;
  std::vector<DebateTeam> child_teams;
  /// Survivors plus children, ready for the next generation.
  PopulationState next;
};

struct EvolutionHooks {
  /// Persuasion rounds of `generation` already played in an earlier session.
  std::function<std::vector<tournament::RoundResult>(int generation)> completed_rounds;
  std::function<void(int generation, const tournament::RoundResult&)> on_round;
  std::function<void(const GenerationOutcome&)> on_generation;
};

/// Evaluates, rates, selects and mutates `pop` once. The evaluated
/// generation is pop.generation + 1.
GenerationOutcome run_generation(const PopulationState& pop, const EvolutionConfig& cfg,
                                 std::span<const dataset::DebateQuestion> train, MutationContext& ctx,
                                 const EvolutionHooks& hooks = {});

struct EvolutionResult {
  /// populations[i] is the population after i generations, starting from
  /// the population passed in.
  std::vector<PopulationState> populations;
  /// Ratings from the last evaluated generation.
  std::optional<rating::EloModel> last_model;
  std::optional<PopulationState> last_evaluated;
};

/// Runs generations start.generation + 1 .. cfg.generations.
EvolutionResult evolve(PopulationState start, const EvolutionConfig& cfg,
                       std::span<const dataset::DebateQuestion> train, MutationContext& ctx,
                       const EvolutionHooks& hooks = {});

/// Per-category share of `target`: equal split, remainder to the first
/// categories in order.
std::vector<std::size_t> staticgen_quota(std::size_t target, std::size_t categories);

struct StaticGenResult {
  std::vector<StrategyPrompt> pool;
  /// Category name to the seed texts used as few-shots.
  std::map<std::string, std::vector<std::string>> fewshots;
};

/// Samples `fewshots_per_category` seeds per category once, then generates
/// the pool from them. Generated strategies are never used as few-shots.
StaticGenResult staticgen(std::size_t target, std::uint64_t seed, MutationContext& ctx,
                          std::size_t fewshots_per_category = 3);

json to_json(const StrategyPrompt& s);
StrategyPrompt strategy_from_json(const json& j);
json to_json(const DebateTeam& t);
DebateTeam team_from_json(const json& j);
json to_json(const PopulationState& p);
PopulationState population_from_json(const json& j);
json to_json(const Selection& s);
Selection selection_from_json(const json& j);

}  // namespace debateqd::evolution
