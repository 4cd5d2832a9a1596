#include <cmath>

#include "debateqd/error.hpp"
#include "debateqd/rating.hpp"
#include "doctest.h"

using namespace debateqd;
using namespace debateqd::rating;

namespace {

double logistic10(double diff) { return 1.0 / (1.0 + std::pow(10.0, diff / 400.0)); }

/// Reference Adam on the mean squared error, using central finite
/// differences of the public cost function as the gradient.
std::map<std::string, double> reference_adam(const std::vector<Observation>& obs, Mode mode, int epochs,
                                             std::vector<double>* costs) {
  EloModel m;
  m.mode = mode;
  std::vector<std::pair<bool, std::string>> params;  // (is_question, id)
  for (const auto& o : obs) {
    m.ratings[o.subject] = 400.0;
    if (mode == Mode::persuasion) {
      m.ratings[o.opponent] = 400.0;
    } else {
      m.question_ratings[o.opponent] = 400.0;
    }
  }
  for (const auto& [id, r] : m.ratings) params.push_back({false, id});
  for (const auto& [id, r] : m.question_ratings) params.push_back({true, id});
  auto ref = [&](std::size_t i) -> double& {
    return params[i].first ? m.question_ratings[params[i].second] : m.ratings[params[i].second];
  };
  std::vector<double> mom(params.size(), 0.0), vel(params.size(), 0.0), g(params.size());
  costs->push_back(cost(m, obs));
  for (int t = 1; t <= epochs; ++t) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double h = 1e-4;
      ref(i) += h;
      const double up = cost(m, obs);
      ref(i) -= 2 * h;
      const double down = cost(m, obs);
      ref(i) += h;
      g[i] = (up - down) / (2 * h);
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      mom[i] = 0.9 * mom[i] + 0.1 * g[i];
      vel[i] = 0.999 * vel[i] + 0.001 * g[i] * g[i];
      const double mh = mom[i] / (1 - std::pow(0.9, t));
      const double vh = vel[i] / (1 - std::pow(0.999, t));
      ref(i) -= 10.0 * mh / (std::sqrt(vh) + 1e-8);
    }
    costs->push_back(cost(m, obs));
  }
  std::map<std::string, double> out = m.ratings;
  for (const auto& [id, r] : m.question_ratings) out["Q:" + id] = r;
  return out;
}

}  // namespace

TEST_CASE("expected scores follow the base-10 logistic on a 400 scale") {
  CHECK(expected_persuasion(400, 400) == 0.5);
  CHECK(expected_persuasion(800, 400) == doctest::Approx(10.0 / 11.0));
  CHECK(expected_persuasion(400, 800) == doctest::Approx(1.0 / 11.0));
  CHECK(expected_truth(600, 200) == doctest::Approx(10.0 / 11.0));
  CHECK(expected_truth(1000, 0) == doctest::Approx(1.0 - 1.0 / 331.0).epsilon(1e-3));
  CHECK(expected_persuasion(350, 500) == doctest::Approx(logistic10(150)));
}

TEST_CASE("cost is the mean squared residual") {
  EloModel m;
  m.ratings = {{"a", 500}, {"b", 400}};
  const std::vector<Observation> obs{{"a", "b", 1.0}, {"b", "a", 0.25}};
  const double ea = logistic10(-100);
  const double eb = 1.0 - ea;
  CHECK(cost(m, obs) == doctest::Approx(((ea - 1.0) * (ea - 1.0) + (eb - 0.25) * (eb - 0.25)) / 2));
}

TEST_CASE("first Adam step moves each rating by about the learning rate") {
  const std::vector<Observation> obs{{"a", "b", 1.0}};
  FitConfig cfg;
  cfg.max_epochs = 1;
  const auto m = fit(obs, Mode::persuasion, cfg);
  // |g| = 2 * 0.5 * (ln 10 / 400) * 0.25; bias-corrected moments give a step of lr * |g| / (|g| + eps).
  const double g = 0.25 * std::log(10.0) / 400.0;
  const double step = 10.0 * g / (g + 1e-8);
  CHECK(m.ratings.at("a") == doctest::Approx(400.0 + step).epsilon(1e-12));
  CHECK(m.ratings.at("b") == doctest::Approx(400.0 - step).epsilon(1e-12));
  REQUIRE(m.fit_trace.size() == 2);
  CHECK(m.fit_trace[0].cost == doctest::Approx(0.25));
  CHECK(m.fit_trace[1].cost == doctest::Approx(std::pow(logistic10(-2 * step) - 1.0, 2)));
}

TEST_CASE("persuasion fit tracks a finite-difference Adam reference") {
  const std::vector<Observation> obs{{"a", "b", 0.8}, {"b", "c", 0.6}, {"c", "a", 0.3}, {"a", "c", 0.75},
                                     {"b", "a", 0.35}};
  FitConfig cfg;
  cfg.max_epochs = 8;
  cfg.convergence_epsilon = 1e-12;
  std::vector<double> ref_costs;
  const auto ref = reference_adam(obs, Mode::persuasion, 8, &ref_costs);
  const auto m = fit(obs, Mode::persuasion, cfg);
  REQUIRE(m.fit_trace.size() == ref_costs.size());
  for (std::size_t t = 0; t < ref_costs.size(); ++t) CHECK(m.fit_trace[t].cost == doctest::Approx(ref_costs[t]).epsilon(1e-6));
  for (const auto& [id, r] : m.ratings) CHECK(r == doctest::Approx(ref.at(id)).epsilon(1e-6));
}

TEST_CASE("truth fit tracks a finite-difference Adam reference") {
  const std::vector<Observation> obs{{"t1", "q1", 0.9}, {"t1", "q2", 0.6}, {"t2", "q1", 0.55}, {"t2", "q2", 0.2}};
  FitConfig cfg;
  cfg.max_epochs = 6;
  cfg.convergence_epsilon = 1e-12;
  std::vector<double> ref_costs;
  const auto ref = reference_adam(obs, Mode::truth, 6, &ref_costs);
  const auto m = fit(obs, Mode::truth, cfg);
  for (const auto& [id, r] : m.ratings) CHECK(r == doctest::Approx(ref.at(id)).epsilon(1e-6));
  for (const auto& [id, r] : m.question_ratings) CHECK(r == doctest::Approx(ref.at("Q:" + id)).epsilon(1e-6));
  CHECK(m.ratings.size() == 2);
  CHECK(m.question_ratings.size() == 2);
}

TEST_CASE("the fit stops once the cost change falls below epsilon") {
  const std::vector<Observation> obs{{"a", "b", 0.5}, {"b", "a", 0.5}};
  const auto m = fit(obs, Mode::persuasion);
  CHECK(m.converged);
  CHECK(m.fit_trace.size() == 2);
  CHECK(m.ratings.at("a") == 400.0);
}

TEST_CASE("a slowly rising cost does not count as converged") {
  // Planted 300/400/500/600 overshoots at lr 10: around epoch 30 the cost
  // climbs by less than 1e-5 per epoch.
  const double planted[] = {300, 400, 500, 600};
  std::vector<Observation> obs;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      if (i != j) obs.push_back({"s" + std::to_string(i), "s" + std::to_string(j), logistic10(planted[j] - planted[i])});
  const auto m = fit(obs, Mode::persuasion);
  const auto& tr = m.fit_trace;
  bool slow_rise = false;
  for (std::size_t t = 1; t + 1 < tr.size(); ++t)
    slow_rise = slow_rise || (tr[t].cost > tr[t - 1].cost && tr[t].cost - tr[t - 1].cost < 1e-5);
  CHECK(slow_rise);
  if (m.converged) {
    CHECK(tr.back().cost <= tr[tr.size() - 2].cost);
    CHECK(tr[tr.size() - 2].cost - tr.back().cost < 1e-5);
  }
}

TEST_CASE("the returned ratings are the lowest-cost iterate") {
  const std::vector<Observation> obs{{"a", "b", 0.7}, {"b", "c", 0.7}};
  FitConfig cfg;
  cfg.learning_rate = 400;
  cfg.max_epochs = 30;
  const auto m = fit(obs, Mode::persuasion, cfg);
  double lowest = m.fit_trace[0].cost;
  for (const auto& s : m.fit_trace) lowest = std::min(lowest, s.cost);
  CHECK(m.cost == lowest);
  std::vector<Observation> v(obs.begin(), obs.end());
  EloModel check = m;
  CHECK(cost(check, v) == doctest::Approx(lowest));
}

TEST_CASE("observation order does not change the fit") {
  std::vector<Observation> obs{{"a", "b", 0.9}, {"c", "b", 0.4}, {"a", "c", 0.65}, {"d", "a", 0.2}};
  const auto m1 = fit(obs, Mode::persuasion);
  std::reverse(obs.begin(), obs.end());
  const auto m2 = fit(obs, Mode::persuasion);
  CHECK(to_json(m1) == to_json(m2));
}

TEST_CASE("fit rejects empty input and outcomes outside the unit interval") {
  CHECK_THROWS_AS(fit({}, Mode::persuasion), std::invalid_argument);
  const std::vector<Observation> bad{{"a", "b", 1.5}};
  CHECK_THROWS_AS(fit(bad, Mode::persuasion), std::invalid_argument);
}

TEST_CASE("centring shifts ratings and question ratings together") {
  EloModel m;
  m.mode = Mode::truth;
  m.ratings = {{"a", 100}, {"b", 300}};
  m.question_ratings = {{"q", 250}};
  const auto c = centered(m);
  CHECK(c.ratings.at("a") == 300);
  CHECK(c.ratings.at("b") == 500);
  CHECK(c.question_ratings.at("q") == 450);
  CHECK(expected_truth(c.ratings.at("a"), c.question_ratings.at("q")) ==
        doctest::Approx(expected_truth(100, 250)));
}

TEST_CASE("group means average member ratings") {
  EloModel m;
  m.ratings = {{"a", 100}, {"b", 300}, {"c", 50}};
  const auto g = group_mean(m, {{"a", "X"}, {"b", "X"}, {"c", "Y"}});
  CHECK(g.at("X") == 200);
  CHECK(g.at("Y") == 50);
  CHECK_THROWS(group_mean(m, {{"zz", "X"}}));
}

TEST_CASE("models and modes round-trip through JSON") {
  const std::vector<Observation> obs{{"a", "q", 0.7}};
  const auto m = fit(obs, Mode::truth);
  CHECK(to_json(elo_model_from_json(to_json(m))) == to_json(m));
  CHECK(mode_from_string("truth") == Mode::truth);
  CHECK_THROWS_AS(mode_from_string("elo"), ConfigError);
  FitConfig cfg;
  cfg.learning_rate = 3;
  CHECK(fit_config_from_json(to_json(cfg)).learning_rate == 3);
}
