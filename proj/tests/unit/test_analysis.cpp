#include <cmath>

#include "debateqd/analysis.hpp"
#include "debateqd/error.hpp"
#include "doctest.h"
#include "support/support.hpp"

using namespace debateqd;
using namespace debateqd::analysis;

namespace {

evolution::PopulationState rated_population(std::size_t n) {
  evolution::PopulationState p;
  for (std::size_t i = 0; i < n; ++i) {
    evolution::StrategyPrompt s;
    s.id = "s" + std::to_string(i);
    s.category = i % 2 ? "Odd" : "Even";
    s.text = "plan " + llm::skill_marker(0.1 * static_cast<double>(i));
    s.rating = 400.0 + static_cast<double>(i % 7) * 10.0;
    p.strategies.push_back(s);
  }
  return p;
}

}  // namespace

TEST_CASE("type 7 quantiles interpolate between order statistics") {
  const std::vector<double> v{1, 2, 3, 4};
  CHECK(quantile_sorted(v, 0.0) == 1);
  CHECK(quantile_sorted(v, 1.0) == 4);
  CHECK(quantile_sorted(v, 0.5) == 2.5);
  // h = 3 * 0.025 = 0.075
  CHECK(quantile_sorted(v, 0.025) == doctest::Approx(1.075));
  const std::vector<double> one{7};
  CHECK(quantile_sorted(one, 0.3) == 7);
}

TEST_CASE("bootstrap of constant lists has a zero-width interval") {
  const std::vector<double> a(15, 0.1), b(15, 0.1);
  const auto r = bootstrap_gap_difference(a, b, 1000, 3);
  CHECK(r.mean_difference == 0.0);
  CHECK(r.ci_low == 0.0);
  CHECK(r.ci_high == 0.0);
  const std::vector<double> ones{1, 1, 1}, zeros{0, 0, 0};
  const auto s = bootstrap_gap_difference(ones, zeros, 1000, 3);
  CHECK(s.mean_difference == 1.0);
  CHECK(s.ci_low == 1.0);
  CHECK(s.ci_high == 1.0);
}

TEST_CASE("paired bootstrap cancels a constant offset") {
  const std::vector<double> a{0.3, 0.1, 0.5, 0.2}, b{0.2, 0.0, 0.4, 0.1};
  const auto paired = bootstrap_gap_difference(a, b, 2000, 5, BootstrapMode::paired);
  CHECK(paired.mean_difference == doctest::Approx(0.1));
  CHECK(paired.ci_low == doctest::Approx(0.1));
  CHECK(paired.ci_high == doctest::Approx(0.1));
  const auto independent = bootstrap_gap_difference(a, b, 2000, 5, BootstrapMode::independent);
  CHECK(independent.ci_high - independent.ci_low > 0.05);
  const std::vector<double> shorter{0.1};
  CHECK_THROWS(bootstrap_gap_difference(a, shorter, 10, 0, BootstrapMode::paired));
}

TEST_CASE("bootstrap is deterministic per seed and its width converges") {
  const std::vector<double> a{0.05, 0.12, -0.03, 0.08, 0.10, 0.02, 0.07, 0.15, -0.01, 0.04, 0.09, 0.11, 0.00, 0.06, 0.03};
  const std::vector<double> b{0.01, 0.04, -0.05, 0.02, 0.03, 0.00, -0.02, 0.05, 0.01, -0.01, 0.02, 0.06, -0.03, 0.00, 0.01};
  const auto r1 = bootstrap_gap_difference(a, b, 100000, 17);
  const auto r2 = bootstrap_gap_difference(a, b, 100000, 17);
  CHECK(to_json(r1) == to_json(r2));
  CHECK(r1.ci_low <= r1.mean_difference);
  CHECK(r1.mean_difference <= r1.ci_high);
  const auto small = bootstrap_gap_difference(a, b, 10000, 17);
  const double w_big = r1.ci_high - r1.ci_low;
  const double w_small = small.ci_high - small.ci_low;
  CHECK(std::abs(w_big - w_small) / w_big < 0.1);
  CHECK(to_json(bootstrap_result_from_json(to_json(r1))) == to_json(r1));
}

TEST_CASE("mean pairwise cosine distance on hand-computed fixtures") {
  const double s = 1.0 / std::sqrt(2.0);
  const std::vector<llm::Embedding> three{{1, 0}, {0, 1}, {s, s}};
  CHECK(mean_pairwise_cosine_distance(three) == doctest::Approx((1.0 + 2 * (1 - s)) / 3).epsilon(1e-12));
  CHECK(mean_pairwise_cosine_distance(three) == doctest::Approx(0.5286).epsilon(1e-4));
  const std::vector<llm::Embedding> orth{{2, 0, 0}, {0, 0, 5}};
  CHECK(mean_pairwise_cosine_distance(orth) == doctest::Approx(1.0));
  const std::vector<llm::Embedding> opposite{{1, 1}, {-2, -2}};
  CHECK(mean_pairwise_cosine_distance(opposite) == doctest::Approx(2.0));
  const std::vector<llm::Embedding> permuted{{s, s}, {1, 0}, {0, 1}};
  CHECK(mean_pairwise_cosine_distance(permuted) == doctest::Approx(mean_pairwise_cosine_distance(three)));
  CHECK_THROWS(mean_pairwise_cosine_distance(std::vector<llm::Embedding>{{1, 0}}));
}

TEST_CASE("identical texts have zero diversity") {
  auto gw = testsupport::synthetic_gateway();
  CHECK(embedding_diversity({"use evidence", "use evidence"}, *gw) == doctest::Approx(0.0));
  CHECK(embedding_diversity({"alpha", "omega"}, *gw) > 0.0);
  CHECK_THROWS(embedding_diversity({"only"}, *gw));
}

TEST_CASE("pearson correlation on hand-computed fixtures") {
  const std::vector<double> x{1, 2, 3, 4, 5};
  const std::vector<double> y{2, 4, 5, 4, 5};
  // sxy = 6, sxx = 10, syy = 6
  CHECK(std::abs(pearson(x, y) - 6.0 / std::sqrt(60.0)) < 1e-12);
  const std::vector<double> lin{3, 5, 7, 9, 11};
  CHECK(pearson(x, lin) == doctest::Approx(1.0));
  const std::vector<double> anti{5, 4, 3, 2, 1};
  CHECK(pearson(x, anti) == doctest::Approx(-1.0));
  std::vector<double> scaled;
  for (double v : y) scaled.push_back(-0.5 + 3.0 * v);
  CHECK(pearson(x, scaled) == doctest::Approx(pearson(x, y)));
  const std::vector<double> flat{1, 1, 1, 1, 1};
  CHECK_THROWS(pearson(x, flat));
  CHECK_THROWS(pearson(std::vector<double>{1, 2}, std::vector<double>{1, 2}));
}

TEST_CASE("elite panel under a symmetric judge has zero gaps") {
  llm::SyntheticAgentModel model;
  model.correct_side_bonus = 0.0;
  auto gw = testsupport::synthetic_gateway(model);
  const auto pop = rated_population(20);
  const auto panel = build_elite_panel(pop, testsupport::questions(2), testsupport::questions(3), {}, *gw,
                                       Templates::builtin(), 15);
  REQUIRE(panel.entries.size() == 15);
  CHECK_FALSE(panel.shortfall);
  for (const auto& e : panel.entries) {
    CHECK(e.train_accuracy == doctest::Approx(0.5));
    CHECK(e.gap == e.train_accuracy - e.test_accuracy);
  }
  // Highest rating first, ids break ties.
  CHECK(panel.entries[0].id == "s13");
  CHECK(panel.entries[1].id == "s6");
  CHECK(to_json(elite_panel_from_json(to_json(panel))) == to_json(panel));
}

TEST_CASE("a small population yields a flagged short panel") {
  auto gw = testsupport::synthetic_gateway();
  const auto panel = build_elite_panel(rated_population(10), testsupport::questions(1), testsupport::questions(1), {},
                                       *gw, Templates::builtin(), 15);
  CHECK(panel.entries.size() == 10);
  CHECK(panel.shortfall);
}

TEST_CASE("truth panels score teams by mean correctness") {
  llm::SyntheticAgentModel model;
  model.correct_side_bonus = 0.7;
  auto gw = testsupport::synthetic_gateway(model);
  evolution::PopulationState pop;
  pop.objective = evolution::Objective::truth;
  evolution::DebateTeam t;
  t.id = "team-x";
  t.member1 = {"team-x.1", "A", "a " + llm::skill_marker(0.0), 0, {}, std::nullopt, false};
  t.member2 = {"team-x.2", "B", "b " + llm::skill_marker(0.0), 0, {}, std::nullopt, false};
  t.rating = 500;
  pop.teams.push_back(t);
  const auto panel = build_elite_panel(pop, testsupport::questions(2), testsupport::questions(1), {}, *gw,
                                       Templates::builtin(), 15);
  REQUIRE(panel.entries.size() == 1);
  CHECK(panel.entries[0].category == "A");
  CHECK(panel.entries[0].train_accuracy == doctest::Approx(testsupport::sigmoid(0.7)));
  CHECK(panel.entries[0].gap == doctest::Approx(0.0));
}
