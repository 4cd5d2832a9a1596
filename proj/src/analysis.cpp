#include "debateqd/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "debateqd/error.hpp"

namespace debateqd::analysis {

std::vector<double> ElitePanel::gaps() const {
  std::vector<double> out;
  for (const auto& e : entries) out.push_back(e.gap);
  return out;
}

namespace {

double team_accuracy(const tournament::Team& team, std::span<const dataset::DebateQuestion> questions,
                     const debate::DebateConfig& cfg, llm::Gateway& gateway, const Templates& templates) {
  const std::array<tournament::Team, 1> one{team};
  const auto eval = tournament::run_truth_evaluation(one, questions, cfg, gateway, templates);
  double sum = 0.0;
  for (const auto& r : eval.records) sum += r.aggregate_score_a;
  return sum / static_cast<double>(eval.records.size());
}

}  // namespace

ElitePanel build_elite_panel(const evolution::PopulationState& rated, std::span<const dataset::DebateQuestion> train,
                             std::span<const dataset::DebateQuestion> test, const debate::DebateConfig& cfg,
                             llm::Gateway& gateway, const Templates& templates, std::size_t size) {
  if (train.empty() || test.empty()) throw std::invalid_argument("elite panel needs train and test questions");
  ElitePanel panel;
  panel.objective = rated.objective;
  panel.requested = size;

  struct Candidate {
    std::size_t index;
    std::string id;
    double rating;
  };
  std::vector<Candidate> candidates;
  auto add = [&](std::size_t i, const std::string& id, const std::optional<double>& r) {
    if (!r) throw std::invalid_argument("elite panel candidate is unrated: " + id);
    candidates.push_back({i, id, *r});
  };
  if (rated.objective == evolution::Objective::persuasion) {
    for (std::size_t i = 0; i < rated.strategies.size(); ++i) add(i, rated.strategies[i].id, rated.strategies[i].rating);
  } else {
    for (std::size_t i = 0; i < rated.teams.size(); ++i) add(i, rated.teams[i].id, rated.teams[i].rating);
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    return a.rating != b.rating ? a.rating > b.rating : a.id < b.id;
  });
  panel.shortfall = candidates.size() < size;
  candidates.resize(std::min(size, candidates.size()));

  for (const auto& c : candidates) {
    EliteEntry e;
    e.id = c.id;
    e.rating = c.rating;
    if (rated.objective == evolution::Objective::persuasion) {
      const auto& s = rated.strategies[c.index];
      e.category = s.category;
      e.train_accuracy = debate::judge_accuracy_selfplay(s.debater(), train, cfg, gateway, templates);
      e.test_accuracy = debate::judge_accuracy_selfplay(s.debater(), test, cfg, gateway, templates);
    } else {
      const auto& t = rated.teams[c.index];
      e.category = t.category();
      e.train_accuracy = team_accuracy(t.team(), train, cfg, gateway, templates);
      e.test_accuracy = team_accuracy(t.team(), test, cfg, gateway, templates);
    }
    e.gap = e.train_accuracy - e.test_accuracy;
    panel.entries.push_back(std::move(e));
  }
  return panel;
}

std::string to_string(BootstrapMode mode) { return mode == BootstrapMode::independent ? "independent" : "paired"; }

BootstrapMode bootstrap_mode_from_string(std::string_view name) {
  if (name == "independent") return BootstrapMode::independent;
  if (name == "paired") return BootstrapMode::paired;
  throw ConfigError("unknown bootstrap mode: " + std::string(name));
}

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

BootstrapResult bootstrap_gap_difference(std::span<const double> a, std::span<const double> b,
                                         std::size_t iterations, std::uint64_t seed, BootstrapMode mode) {
  if (a.empty() || b.empty()) throw std::invalid_argument("bootstrap needs two nonempty samples");
  if (iterations == 0) throw std::invalid_argument("bootstrap needs at least one iteration");
  if (mode == BootstrapMode::paired && a.size() != b.size())
    throw std::invalid_argument("paired bootstrap needs samples of equal length");

  auto mean = [](std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); };
  BootstrapResult r;
  r.mode = mode;
  r.iterations = iterations;
  r.seed = seed;
  r.mean_difference = mean(a) - mean(b);

  std::mt19937_64 rng(seed);
  auto draw = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };
  std::vector<double> stats(iterations);
  for (std::size_t it = 0; it < iterations; ++it) {
    double sa = 0.0, sb = 0.0;
    if (mode == BootstrapMode::independent) {
      for (std::size_t i = 0; i < a.size(); ++i) sa += a[draw(a.size())];
      for (std::size_t i = 0; i < b.size(); ++i) sb += b[draw(b.size())];
      stats[it] = sa / static_cast<double>(a.size()) - sb / static_cast<double>(b.size());
    } else {
      for (std::size_t i = 0; i < a.size(); ++i) {
        const std::size_t k = draw(a.size());
        sa += a[k] - b[k];
      }
      stats[it] = sa / static_cast<double>(a.size());
    }
  }
  std::sort(stats.begin(), stats.end());
  r.ci_low = quantile_sorted(stats, 0.025);
  r.ci_high = quantile_sorted(stats, 0.975);
  return r;
}

double mean_pairwise_cosine_distance(std::span<const llm::Embedding> vectors) {
  if (vectors.size() < 2) throw std::invalid_argument("diversity needs at least two vectors");
  std::vector<llm::Embedding> unit;
  for (const auto& v : vectors) unit.push_back(llm::normalize(v));
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < unit.size(); ++i) {
    for (std::size_t j = i + 1; j < unit.size(); ++j) {
      if (unit[i].size() != unit[j].size()) throw std::invalid_argument("embedding dimensions differ");
      const double dot = std::inner_product(unit[i].begin(), unit[i].end(), unit[j].begin(), 0.0);
      sum += 1.0 - std::clamp(dot, -1.0, 1.0);
      ++pairs;
    }
  }
  return sum / static_cast<double>(pairs);
}

double embedding_diversity(const std::vector<std::string>& texts, llm::Gateway& gateway) {
  if (texts.size() < 2) throw std::invalid_argument("diversity needs at least two texts");
  return mean_pairwise_cosine_distance(gateway.embed(texts));
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson: lengths differ");
  if (x.size() < 3) throw std::invalid_argument("pearson: needs at least three points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw std::invalid_argument("pearson: zero variance");
  return sxy / std::sqrt(sxx * syy);
}

json to_json(const ElitePanel& panel) {
  json entries = json::array();
  for (const auto& e : panel.entries) {
    entries.push_back({{"id", e.id},
                       {"category", e.category},
                       {"rating", e.rating},
                       {"train_accuracy", e.train_accuracy},
                       {"test_accuracy", e.test_accuracy},
                       {"gap", e.gap}});
  }
  return json{{"objective", rating::to_string(panel.objective)},
              {"requested", panel.requested},
              {"shortfall", panel.shortfall},
              {"entries", entries}};
}

ElitePanel elite_panel_from_json(const json& j) {
  ElitePanel panel;
  panel.objective = rating::mode_from_string(j.at("objective").get<std::string>());
  panel.requested = j.at("requested").get<std::size_t>();
  panel.shortfall = j.at("shortfall").get<bool>();
  for (const auto& e : j.at("entries")) {
    panel.entries.push_back({e.at("id").get<std::string>(), e.at("category").get<std::string>(),
                             e.at("rating").get<double>(), e.at("train_accuracy").get<double>(),
                             e.at("test_accuracy").get<double>(), e.at("gap").get<double>()});
  }
  return panel;
}

json to_json(const BootstrapResult& r) {
  return json{{"mode", to_string(r.mode)},       {"iterations", r.iterations}, {"seed", r.seed},
              {"mean_difference", r.mean_difference}, {"ci_low", r.ci_low},      {"ci_high", r.ci_high}};
}

BootstrapResult bootstrap_result_from_json(const json& j) {
  BootstrapResult r;
  r.mode = bootstrap_mode_from_string(j.at("mode").get<std::string>());
  r.iterations = j.at("iterations").get<std::size_t>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.mean_difference = j.at("mean_difference").get<double>();
  r.ci_low = j.at("ci_low").get<double>();
  r.ci_high = j.at("ci_high").get<double>();
  return r;
}

}  // namespace debateqd::analysis
