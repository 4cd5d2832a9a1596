#include "debateqd/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <regex>
#include <set>

#include "debateqd/embedded_data.hpp"
#include "debateqd/error.hpp"
#include "debateqd/synthetic_backend.hpp"
#include "debateqd/util.hpp"

namespace debateqd::evolution {

SeedBank SeedBank::parse(const json& j) {
  SeedBank bank;
  try {
    bank.version = j.at("version").get<int>();
    std::set<std::string> names;
    for (const auto& c : j.at("categories")) {
      Category cat;
      cat.name = c.at("name").get<std::string>();
      cat.slug = c.at("slug").get<std::string>();
      cat.label = c.value("label", cat.name);
      cat.description = c.at("description").get<std::string>();
      cat.reverse_selection = c.value("reverse_selection", false);
      cat.seeds = c.at("seeds").get<std::vector<std::string>>();
      if (cat.seeds.empty()) throw DataError("category " + cat.name + " has no seeds");
      if (!names.insert(cat.name).second) throw DataError("duplicate category " + cat.name);
      bank.categories.push_back(std::move(cat));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed seed file: ") + e.what());
  }
  if (bank.categories.empty()) throw DataError("seed file lists no categories");
  return bank;
}

SeedBank SeedBank::builtin() { return parse(json::parse(embedded::seed_prompts_json)); }

SeedBank SeedBank::load(const std::filesystem::path& path) {
  try {
    return parse(read_json_file(path));
  } catch (const json::exception& e) {
    throw DataError("malformed seed file " + path.string() + ": " + e.what());
  }
}

std::size_t SeedBank::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < categories.size(); ++i)
    if (categories[i].name == name) return i;
  throw DataError("unknown category: " + std::string(name));
}

std::map<std::string, std::size_t> PopulationState::census() const {
  std::map<std::string, std::size_t> out;
  if (objective == Objective::persuasion) {
    for (const auto& s : strategies) ++out[s.category];
  } else {
    for (const auto& t : teams) ++out[t.category()];
  }
  return out;
}

namespace {

std::string two_digits(int generation) {
  std::string s = std::to_string(generation);
  return s.size() < 2 ? "0" + s : s;
}

std::string join_bullets(const std::vector<std::string>& texts) {
  std::string out;
  for (const auto& t : texts) {
    if (!out.empty()) out += '\n';
    out += "- " + t;
  }
  return out;
}

StrategyPrompt make_strategy(std::string id, const Category& c, std::string text, int generation,
                             std::vector<std::string> parents, int word_limit) {
  StrategyPrompt s;
  s.id = std::move(id);
  s.category = c.name;
  auto cut = debate::truncate_words(text, word_limit);
  s.text = std::move(cut.text);
  s.truncated = cut.truncated;
  s.generation_born = generation;
  s.parent_ids = std::move(parents);
  return s;
}

/// One mutator call with retries on unparseable replies. Each attempt uses a
/// distinct sample index so a cached failure is not replayed.
std::vector<std::string> request_fields(MutationContext& ctx, const std::string& prompt,
                                        std::map<std::string, std::string> hints, std::uint64_t sample_base,
                                        const std::vector<std::string>& keys, const std::string& what) {
  std::string last_raw;
  for (int attempt = 0; attempt <= ctx.max_retries; ++attempt) {
    auto req = llm::make_mutator_request(prompt);
    req.hints = hints;
    req.sample_index = sample_base | static_cast<std::uint64_t>(attempt);
    const auto resp = ctx.gateway.complete(req);
    if (auto fields = parse_mutator_reply(resp.text, keys)) return *fields;
    last_raw = resp.text;
  }
  throw MutationError("unparseable mutator reply for " + what + " after " + std::to_string(ctx.max_retries + 1) +
                          " attempts",
                      last_raw);
}

std::uint64_t sample_base(int generation, std::size_t category, std::size_t child) {
  return (static_cast<std::uint64_t>(generation) << 32) | (static_cast<std::uint64_t>(category) << 20) |
         (static_cast<std::uint64_t>(child) << 8);
}

}  // namespace

std::string strategy_id(const Category& c, int generation, std::size_t k) {
  return c.slug + "-g" + two_digits(generation) + "-" + std::to_string(k);
}

std::string team_id(const Category& c, int generation, std::size_t k) {
  return "team-" + strategy_id(c, generation, k);
}

PopulationState seed_population(const SeedBank& bank, Objective objective) {
  PopulationState pop;
  pop.objective = objective;
  const std::size_t K = bank.categories.size();
  for (std::size_t c = 0; c < K; ++c) {
    const auto& cat = bank.categories[c];
    if (objective == Objective::persuasion) {
      for (std::size_t j = 0; j < cat.seeds.size(); ++j)
        pop.strategies.push_back(make_strategy(strategy_id(cat, 0, j), cat, cat.seeds[j], 0, {}, 200));
    } else {
      const auto& partner = bank.categories[(c + 1) % K];
      const std::size_t n = std::min(cat.seeds.size(), partner.seeds.size());
      for (std::size_t j = 0; j < n; ++j) {
        DebateTeam t;
        t.id = team_id(cat, 0, j);
        t.member1 = make_strategy(t.id + ".1", cat, cat.seeds[j], 0, {}, 200);
        t.member2 = make_strategy(t.id + ".2", partner, partner.seeds[j], 0, {}, 200);
        pop.teams.push_back(std::move(t));
      }
    }
  }
  pop.lifetime_count = pop.size();
  return pop;
}

std::size_t elimination_count(std::size_t members, double kill_fraction, int generation) {
  const double raw = kill_fraction * static_cast<double>(members);
  const double k = generation % 2 == 0 ? std::floor(raw) : std::ceil(raw);
  return static_cast<std::size_t>(std::clamp(k, 0.0, static_cast<double>(members)));
}

Selection select(const PopulationState& pop, const SeedBank& bank, double kill_fraction, int generation) {
  struct Member {
    std::string id;
    std::string category;
    double rating;
  };
  std::vector<Member> members;
  auto add = [&](const std::string& id, const std::string& category, const std::optional<double>& r) {
    if (!r) throw std::invalid_argument("unrated member: " + id);
    members.push_back({id, category, *r});
  };
  if (pop.objective == Objective::persuasion) {
    for (const auto& s : pop.strategies) add(s.id, s.category, s.rating);
  } else {
    for (const auto& t : pop.teams) add(t.id, t.category(), t.rating);
  }

  std::set<std::string> eliminated;
  for (const auto& cat : bank.categories) {
    std::vector<const Member*> group;
    for (const auto& m : members)
      if (m.category == cat.name) group.push_back(&m);
    if (group.empty()) continue;
    // Elimination order: worst first (best first when reversed), larger id first among ties.
    std::sort(group.begin(), group.end(), [&](const Member* a, const Member* b) {
      if (a->rating != b->rating) return cat.reverse_selection ? a->rating > b->rating : a->rating < b->rating;
      return a->id > b->id;
    });
    const std::size_t k = std::min(elimination_count(group.size(), kill_fraction, generation), group.size() - 1);
    for (std::size_t i = 0; i < k; ++i) eliminated.insert(group[i]->id);
  }

  Selection sel;
  for (const auto& m : members) (eliminated.count(m.id) ? sel.eliminated : sel.survivors).push_back(m.id);
  return sel;
}

std::optional<std::vector<std::string>> parse_mutator_reply(std::string_view text,
                                                            const std::vector<std::string>& keys) {
  const auto open = text.find('{');
  const auto close = text.rfind('}');
  if (open == std::string_view::npos || close == std::string_view::npos || close < open) return std::nullopt;
  static const std::regex trailing_comma(R"(,(\s*[}\]]))");
  const std::string body = std::regex_replace(std::string(text.substr(open, close - open + 1)), trailing_comma, "$1");
  const json j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  std::vector<std::string> out;
  for (const auto& key : keys) {
    const auto it = j.find(key);
    if (it == j.end() || !it->is_string()) return std::nullopt;
    std::string value = trim(it->get<std::string>());
    if (value.empty()) return std::nullopt;
    out.push_back(std::move(value));
  }
  return out;
}

std::vector<StrategyPrompt> mutate(std::span<const StrategyPrompt> survivors, const Category& category,
                                   std::size_t count, int generation, MutationContext& ctx) {
  if (survivors.empty()) throw std::invalid_argument("mutation of " + category.name + " needs a survivor");
  std::vector<std::string> texts, ids;
  for (const auto& s : survivors) {
    texts.push_back(s.text);
    ids.push_back(s.id);
  }
  const std::string prompt = render_template(ctx.templates.persuasion_mutator,
                                             {{"cat", category.name},
                                              {"category_description", category.description},
                                              {"inspiration_prompts", join_bullets(texts)}});
  const std::map<std::string, std::string> hints{{llm::hints::kMutationMode, "persuasion"},
                                                 {llm::hints::kCategory, category.name},
                                                 {llm::hints::kParents, json(texts).dump()}};
  const std::size_t cat_index = ctx.bank.index_of(category.name);

  std::vector<StrategyPrompt> children(count);
  parallel_for(count, ctx.gateway.parallelism(), [&](std::size_t k) {
    const auto fields = request_fields(ctx, prompt, hints, sample_base(generation, cat_index, k),
                                       {"new_debater_prompt"}, category.name + " child " + std::to_string(k));
    children[k] = make_strategy(strategy_id(category, generation, k), category, fields[0], generation, ids,
                                ctx.word_limit);
  });
  return children;
}

std::vector<DebateTeam> mutate_teams(std::span<const DebateTeam> survivors, const Category& category,
                                     std::size_t count, int generation, MutationContext& ctx) {
  if (survivors.empty()) throw std::invalid_argument("mutation of " + category.name + " needs a surviving team");
  const Category& cat1 = ctx.bank.category(survivors.front().member1.category);
  const Category& cat2 = ctx.bank.category(survivors.front().member2.category);
  std::vector<std::string> texts1, texts2, ids;
  for (const auto& t : survivors) {
    texts1.push_back(t.member1.text);
    texts2.push_back(t.member2.text);
    ids.push_back(t.id);
  }
  const std::string prompt = render_template(ctx.templates.truth_mutator, {{"cat1", cat1.name},
                                                                           {"cat2", cat2.name},
                                                                           {"inspiration_prompt1", join_bullets(texts1)},
                                                                           {"inspiration_prompt2", join_bullets(texts2)}});
  const std::map<std::string, std::string> hints{{llm::hints::kMutationMode, "truth"},
                                                 {llm::hints::kCategory, cat1.name},
                                                 {llm::hints::kCategory2, cat2.name},
                                                 {llm::hints::kParents, json(texts1).dump()},
                                                 {llm::hints::kParents2, json(texts2).dump()}};
  const std::size_t cat_index = ctx.bank.index_of(category.name);

  std::vector<DebateTeam> children(count);
  parallel_for(count, ctx.gateway.parallelism(), [&](std::size_t k) {
    const auto fields =
        request_fields(ctx, prompt, hints, sample_base(generation, cat_index, k),
                       {"new_debater_1_prompt", "new_debater_2_prompt"}, category.name + " team " + std::to_string(k));
    DebateTeam t;
    t.id = team_id(category, generation, k);
    t.member1 = make_strategy(t.id + ".1", cat1, fields[0], generation, ids, ctx.word_limit);
    t.member2 = make_strategy(t.id + ".2", cat2, fields[1], generation, ids, ctx.word_limit);
    t.generation_born = generation;
    t.parent_ids = ids;
    children[k] = std::move(t);
  });
  return children;
}

GenerationOutcome run_generation(const PopulationState& pop, const EvolutionConfig& cfg,
                                 std::span<const dataset::DebateQuestion> train, MutationContext& ctx,
                                 const EvolutionHooks& hooks) {
  GenerationOutcome out;
  out.generation = pop.generation + 1;
  out.evaluated = pop;
  const int gen = out.generation;

  std::vector<rating::Observation> observations;
  if (pop.objective == Objective::persuasion) {
    std::vector<debate::Debater> debaters;
    for (const auto& s : pop.strategies) debaters.push_back(s.debater());
    tournament::TournamentHooks th;
    if (hooks.completed_rounds) th.completed = hooks.completed_rounds(gen);
    if (hooks.on_round) th.on_round = [&](const tournament::RoundResult& r) { hooks.on_round(gen, r); };
    auto result = tournament::run_swiss_tournament(debaters, train, cfg.debate, ctx.gateway, ctx.templates, th);
    for (const auto& r : result.records()) observations.push_back({r.participant_a, r.participant_b, r.aggregate_score_a});
    out.rounds = std::move(result.rounds);
  } else {
    std::vector<tournament::Team> teams;
    for (const auto& t : pop.teams) teams.push_back(t.team());
    out.truth = tournament::run_truth_evaluation(teams, train, cfg.debate, ctx.gateway, ctx.templates);
    for (const auto& r : out.truth.records) observations.push_back({r.participant_a, r.participant_b, r.aggregate_score_a});
  }

  out.model = rating::fit(observations, pop.objective, cfg.fit);
  auto rating_of = [&](const std::string& id) {
    const auto it = out.model.ratings.find(id);
    if (it == out.model.ratings.end()) throw std::logic_error("no rating fitted for " + id);
    return it->second;
  };
  for (auto& s : out.evaluated.strategies) s.rating = rating_of(s.id);
  for (auto& t : out.evaluated.teams) t.rating = rating_of(t.id);

  out.selection = select(out.evaluated, ctx.bank, cfg.kill_fraction, gen);
  const std::set<std::string> alive(out.selection.survivors.begin(), out.selection.survivors.end());

  out.next.generation = gen;
  out.next.objective = pop.objective;
  out.next.lifetime_count = pop.lifetime_count;
  for (const auto& cat : ctx.bank.categories) {
    if (pop.objective == Objective::persuasion) {
      std::vector<StrategyPrompt> survivors;
      std::size_t members = 0;
      for (const auto& s : out.evaluated.strategies) {
        if (s.category != cat.name) continue;
        ++members;
        if (alive.count(s.id)) survivors.push_back(s);
      }
      if (members == 0) continue;
      auto children = mutate(survivors, cat, members - survivors.size(), gen, ctx);
      out.next.strategies.insert(out.next.strategies.end(), survivors.begin(), survivors.end());
      out.next.strategies.insert(out.next.strategies.end(), children.begin(), children.end());
      out.children.insert(out.children.end(), children.begin(), children.end());
      out.next.lifetime_count += children.size();
    } else {
      std::vector<DebateTeam> survivors;
      std::size_t members = 0;
      for (const auto& t : out.evaluated.teams) {
        if (t.category() != cat.name) continue;
        ++members;
        if (alive.count(t.id)) survivors.push_back(t);
      }
      if (members == 0) continue;
      auto children = mutate_teams(survivors, cat, members - survivors.size(), gen, ctx);
      out.next.teams.insert(out.next.teams.end(), survivors.begin(), survivors.end());
      out.next.teams.insert(out.next.teams.end(), children.begin(), children.end());
      out.child_teams.insert(out.child_teams.end(), children.begin(), children.end());
      out.next.lifetime_count += children.size();
    }
  }
  // Ratings belong to the evaluated generation; the next one is refit from scratch.
  for (auto& s : out.next.strategies) s.rating.reset();
  for (auto& t : out.next.teams) t.rating.reset();
  return out;
}

EvolutionResult evolve(PopulationState start, const EvolutionConfig& cfg,
                       std::span<const dataset::DebateQuestion> train, MutationContext& ctx,
                       const EvolutionHooks& hooks) {
  if (cfg.generations < 0) throw ConfigError("generation count must be non-negative");
  EvolutionResult result;
  result.populations.push_back(std::move(start));
  while (result.populations.back().generation < cfg.generations) {
    auto outcome = run_generation(result.populations.back(), cfg, train, ctx, hooks);
    if (hooks.on_generation) hooks.on_generation(outcome);
    result.last_model = std::move(outcome.model);
    result.last_evaluated = std::move(outcome.evaluated);
    result.populations.push_back(std::move(outcome.next));
  }
  return result;
}

std::vector<std::size_t> staticgen_quota(std::size_t target, std::size_t categories) {
  if (categories == 0) throw std::invalid_argument("staticgen needs at least one category");
  std::vector<std::size_t> quota(categories, target / categories);
  for (std::size_t i = 0; i < target % categories; ++i) ++quota[i];
  return quota;
}

StaticGenResult staticgen(std::size_t target, std::uint64_t seed, MutationContext& ctx,
                          std::size_t fewshots_per_category) {
  const auto& cats = ctx.bank.categories;
  const auto quota = staticgen_quota(target, cats.size());
  StaticGenResult out;

  struct Task {
    std::size_t category;
    std::size_t k;
  };
  std::vector<Task> tasks;
  std::vector<std::string> prompts(cats.size());
  std::vector<std::map<std::string, std::string>> hints(cats.size());
  std::vector<std::vector<std::string>> parent_ids(cats.size());
  for (std::size_t c = 0; c < cats.size(); ++c) {
    const auto& cat = cats[c];
    if (cat.seeds.size() < fewshots_per_category)
      throw DataError("category " + cat.name + " has fewer seeds than the few-shot count");
    // Partial Fisher-Yates on a splitmix stream; portable across standard libraries.
    std::vector<std::size_t> order(cat.seeds.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::uint64_t state = derive_seed(seed, "staticgen-fewshots:" + cat.slug);
    for (std::size_t i = 0; i < fewshots_per_category; ++i) {
      state = splitmix64(state);
      const std::size_t j = i + static_cast<std::size_t>(state % (order.size() - i));
      std::swap(order[i], order[j]);
    }
    std::vector<std::string> shots;
    for (std::size_t i = 0; i < fewshots_per_category; ++i) {
      shots.push_back(cat.seeds[order[i]]);
      parent_ids[c].push_back(strategy_id(cat, 0, order[i]));
    }
    prompts[c] = render_template(ctx.templates.staticgen, {{"cat", cat.name},
                                                           {"category_description", cat.description},
                                                           {"fewshot_prompts", join_bullets(shots)}});
    hints[c] = {{llm::hints::kMutationMode, "staticgen"},
                {llm::hints::kCategory, cat.name},
                {llm::hints::kParents, json(shots).dump()}};
    out.fewshots[cat.name] = std::move(shots);
    for (std::size_t k = 0; k < quota[c]; ++k) tasks.push_back({c, k});
  }

  out.pool.resize(tasks.size());
  parallel_for(tasks.size(), ctx.gateway.parallelism(), [&](std::size_t i) {
    const auto [c, k] = tasks[i];
    const auto& cat = cats[c];
    const auto fields = request_fields(ctx, prompts[c], hints[c], sample_base(0, c, k), {"new_debater_prompt"},
                                       "staticgen " + cat.name + " " + std::to_string(k));
    std::string id = cat.slug + "-sg-" + std::to_string(k);
    out.pool[i] = make_strategy(std::move(id), cat, fields[0], 1, parent_ids[c], ctx.word_limit);
  });
  return out;
}

json to_json(const StrategyPrompt& s) {
  json j{{"id", s.id},
         {"category", s.category},
         {"text", s.text},
         {"generation_born", s.generation_born},
         {"parent_ids", s.parent_ids},
         {"truncated", s.truncated}};
  j["rating"] = s.rating ? json(*s.rating) : json(nullptr);
  return j;
}

StrategyPrompt strategy_from_json(const json& j) {
  StrategyPrompt s;
  s.id = j.at("id").get<std::string>();
  s.category = j.at("category").get<std::string>();
  s.text = j.at("text").get<std::string>();
  s.generation_born = j.at("generation_born").get<int>();
  s.parent_ids = j.at("parent_ids").get<std::vector<std::string>>();
  s.truncated = j.value("truncated", false);
  if (j.contains("rating") && !j.at("rating").is_null()) s.rating = j.at("rating").get<double>();
  return s;
}

json to_json(const DebateTeam& t) {
  json j{{"id", t.id},
         {"member1", to_json(t.member1)},
         {"member2", to_json(t.member2)},
         {"generation_born", t.generation_born},
         {"parent_ids", t.parent_ids}};
  j["rating"] = t.rating ? json(*t.rating) : json(nullptr);
  return j;
}

DebateTeam team_from_json(const json& j) {
  DebateTeam t;
  t.id = j.at("id").get<std::string>();
  t.member1 = strategy_from_json(j.at("member1"));
  t.member2 = strategy_from_json(j.at("member2"));
  t.generation_born = j.at("generation_born").get<int>();
  t.parent_ids = j.at("parent_ids").get<std::vector<std::string>>();
  if (j.contains("rating") && !j.at("rating").is_null()) t.rating = j.at("rating").get<double>();
  return t;
}

json to_json(const PopulationState& p) {
  json strategies = json::array(), teams = json::array();
  for (const auto& s : p.strategies) strategies.push_back(to_json(s));
  for (const auto& t : p.teams) teams.push_back(to_json(t));
  return json{{"generation", p.generation},
              {"objective", rating::to_string(p.objective)},
              {"strategies", strategies},
              {"teams", teams},
              {"lifetime_count", p.lifetime_count},
              {"census", p.census()}};
}

PopulationState population_from_json(const json& j) {
  PopulationState p;
  p.generation = j.at("generation").get<int>();
  p.objective = rating::mode_from_string(j.at("objective").get<std::string>());
  for (const auto& s : j.at("strategies")) p.strategies.push_back(strategy_from_json(s));
  for (const auto& t : j.at("teams")) p.teams.push_back(team_from_json(t));
  p.lifetime_count = j.at("lifetime_count").get<std::size_t>();
  return p;
}

json to_json(const Selection& s) { return json{{"survivors", s.survivors}, {"eliminated", s.eliminated}}; }

Selection selection_from_json(const json& j) {
  return {j.at("survivors").get<std::vector<std::string>>(), j.at("eliminated").get<std::vector<std::string>>()};
}

}  // namespace debateqd::evolution
