#include "debateqd/rating.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <tuple>

#include "debateqd/error.hpp"

namespace debateqd::rating {

std::string to_string(Mode mode) { return mode == Mode::persuasion ? "persuasion" : "truth"; }

Mode mode_from_string(std::string_view name) {
  if (name == "persuasion") return Mode::persuasion;
  if (name == "truth") return Mode::truth;
  throw ConfigError("unknown objective: " + std::string(name));
}

double expected_persuasion(double r_i, double r_j) { return 1.0 / (1.0 + std::pow(10.0, (r_j - r_i) / 400.0)); }

double expected_truth(double r_team, double r_question) {
  return 1.0 / (1.0 + std::pow(10.0, (r_question - r_team) / 400.0));
}

namespace {

constexpr double kSlope = std::numbers::ln10 / 400.0;

/// Observations resolved to parameter indices. Subjects and opponents share
/// one index space in persuasion mode; in truth mode questions follow teams.
struct Problem {
  std::vector<std::string> subjects;
  std::vector<std::string> questions;
  std::vector<std::size_t> lhs, rhs;
  std::vector<double> outcome;

  std::size_t size() const { return subjects.size() + questions.size(); }
};

Problem build_problem(std::span<const Observation> observations, Mode mode) {
  std::vector<Observation> sorted(observations.begin(), observations.end());
  std::sort(sorted.begin(), sorted.end(), [](const Observation& a, const Observation& b) {
    return std::tie(a.subject, a.opponent, a.outcome) < std::tie(b.subject, b.opponent, b.outcome);
  });

  std::map<std::string, std::size_t> subject_index, question_index;
  for (const auto& o : sorted) {
    if (!std::isfinite(o.outcome) || o.outcome < 0.0 || o.outcome > 1.0)
      throw std::invalid_argument("observation outcome outside [0, 1] for " + o.subject);
    subject_index.emplace(o.subject, 0);
    (mode == Mode::persuasion ? subject_index : question_index).emplace(o.opponent, 0);
  }
  Problem p;
  for (auto& [id, idx] : subject_index) {
    idx = p.subjects.size();
    p.subjects.push_back(id);
  }
  for (auto& [id, idx] : question_index) {
    idx = p.subjects.size() + p.questions.size();
    p.questions.push_back(id);
  }
  for (const auto& o : sorted) {
    p.lhs.push_back(subject_index.at(o.subject));
    p.rhs.push_back(mode == Mode::persuasion ? subject_index.at(o.opponent) : question_index.at(o.opponent));
    p.outcome.push_back(o.outcome);
  }
  return p;
}

/// Both modes share E = 1 / (1 + 10^((r_rhs - r_lhs) / 400)).
double evaluate(const Problem& p, const std::vector<double>& r, std::vector<double>* grad) {
  const double n = static_cast<double>(p.outcome.size());
  if (grad) std::fill(grad->begin(), grad->end(), 0.0);
  double sum = 0.0;
  for (std::size_t k = 0; k < p.outcome.size(); ++k) {
    const double e = expected_persuasion(r[p.lhs[k]], r[p.rhs[k]]);
    const double diff = e - p.outcome[k];
    sum += diff * diff;
    if (grad) {
      const double g = 2.0 * diff * kSlope * e * (1.0 - e) / n;
      (*grad)[p.lhs[k]] += g;
      (*grad)[p.rhs[k]] -= g;
    }
  }
  return sum / n;
}

}  // namespace

double cost(const EloModel& model, std::span<const Observation> observations) {
  if (observations.empty()) throw std::invalid_argument("cost of an empty observation set");
  double sum = 0.0;
  for (const auto& o : observations) {
    const double e = model.mode == Mode::persuasion
                         ? expected_persuasion(model.ratings.at(o.subject), model.ratings.at(o.opponent))
                         : expected_truth(model.ratings.at(o.subject), model.question_ratings.at(o.opponent));
    sum += (e - o.outcome) * (e - o.outcome);
  }
  return sum / static_cast<double>(observations.size());
}

EloModel fit(std::span<const Observation> observations, Mode mode, const FitConfig& cfg) {
  if (observations.empty()) throw std::invalid_argument("cannot fit ratings without observations");
  if (!(cfg.learning_rate > 0.0) || !(cfg.convergence_epsilon > 0.0) || cfg.max_epochs < 0)
    throw ConfigError("fit config needs a positive learning rate, epsilon and epoch count");

  const Problem p = build_problem(observations, mode);
  std::vector<double> r(p.size(), cfg.initial_rating);
  std::vector<double> grad(p.size()), m(p.size(), 0.0), v(p.size(), 0.0);

  EloModel model;
  model.mode = mode;
  double previous = evaluate(p, r, nullptr);
  model.fit_trace.push_back({0, previous});
  std::vector<double> best = r;
  double best_cost = previous;

  double b1t = 1.0, b2t = 1.0;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    evaluate(p, r, &grad);
    b1t *= cfg.beta1;
    b2t *= cfg.beta2;
    for (std::size_t i = 0; i < r.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
      const double m_hat = m[i] / (1.0 - b1t);
      const double v_hat = v[i] / (1.0 - b2t);
      r[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.adam_epsilon);
    }
    const double current = evaluate(p, r, nullptr);
    if (!std::isfinite(current)) throw Error("rating fit diverged: cost is not finite at epoch " + std::to_string(epoch));
    model.fit_trace.push_back({epoch, current});
    if (current < best_cost) {
      best_cost = current;
      best = r;
    }
    const double drop = previous - current;
    if (drop >= 0.0 && drop < cfg.convergence_epsilon) {
      model.converged = true;
      break;
    }
    previous = current;
  }

  for (std::size_t i = 0; i < p.subjects.size(); ++i) model.ratings[p.subjects[i]] = best[i];
  for (std::size_t i = 0; i < p.questions.size(); ++i)
    model.question_ratings[p.questions[i]] = best[p.subjects.size() + i];
  model.cost = best_cost;
  return model;
}

EloModel centered(EloModel model, double anchor) {
  if (model.ratings.empty()) return model;
  double mean = 0.0;
  for (const auto& [id, r] : model.ratings) mean += r;
  mean /= static_cast<double>(model.ratings.size());
  const double shift = anchor - mean;
  for (auto& [id, r] : model.ratings) r += shift;
  for (auto& [id, r] : model.question_ratings) r += shift;
  return model;
}

std::map<std::string, double> group_mean(const EloModel& model, const std::map<std::string, std::string>& groups) {
  std::map<std::string, std::pair<double, int>> acc;
  for (const auto& [member, group] : groups) {
    const auto it = model.ratings.find(member);
    if (it == model.ratings.end()) throw std::invalid_argument("unrated member: " + member);
    auto& [sum, count] = acc[group];
    sum += it->second;
    ++count;
  }
  std::map<std::string, double> out;
  for (const auto& [group, sc] : acc) out[group] = sc.first / sc.second;
  return out;
}

json to_json(const FitConfig& cfg) {
  return json{{"learning_rate", cfg.learning_rate}, {"max_epochs", cfg.max_epochs},
              {"convergence_epsilon", cfg.convergence_epsilon}, {"beta1", cfg.beta1},
              {"beta2", cfg.beta2}, {"adam_epsilon", cfg.adam_epsilon},
              {"initial_rating", cfg.initial_rating}};
}

FitConfig fit_config_from_json(const json& j) {
  FitConfig cfg;
  cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
  cfg.max_epochs = j.value("max_epochs", cfg.max_epochs);
  cfg.convergence_epsilon = j.value("convergence_epsilon", cfg.convergence_epsilon);
  cfg.beta1 = j.value("beta1", cfg.beta1);
  cfg.beta2 = j.value("beta2", cfg.beta2);
  cfg.adam_epsilon = j.value("adam_epsilon", cfg.adam_epsilon);
  cfg.initial_rating = j.value("initial_rating", cfg.initial_rating);
  return cfg;
}

json to_json(const EloModel& model) {
  json trace = json::array();
  for (const auto& s : model.fit_trace) trace.push_back({{"epoch", s.epoch}, {"cost", s.cost}});
  return json{{"mode", to_string(model.mode)}, {"ratings", model.ratings},
              {"question_ratings", model.question_ratings}, {"fit_trace", trace},
              {"converged", model.converged}, {"cost", model.cost}};
}

EloModel elo_model_from_json(const json& j) {
  EloModel model;
  model.mode = mode_from_string(j.at("mode").get<std::string>());
  model.ratings = j.at("ratings").get<std::map<std::string, double>>();
  model.question_ratings = j.at("question_ratings").get<std::map<std::string, double>>();
  for (const auto& s : j.at("fit_trace")) model.fit_trace.push_back({s.at("epoch").get<int>(), s.at("cost").get<double>()});
  model.converged = j.at("converged").get<bool>();
  model.cost = j.at("cost").get<double>();
  return model;
}

}  // namespace debateqd::rating
