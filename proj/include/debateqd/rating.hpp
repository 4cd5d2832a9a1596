#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "debateqd/util.hpp"

namespace debateqd::rating {

enum class Mode { persuasion, truth };

std::string to_string(Mode mode);
Mode mode_from_string(std::string_view name);

/// Persuasion: subject beat opponent with soft outcome in [0, 1].
/// Truth: subject is a team, opponent a question, outcome the accuracy.
struct Observation {
  std::string subject;
  std::string opponent;
  double outcome = 0.5;
};

struct FitConfig {
  double learning_rate = 10.0;
  int max_epochs = 100;
  double convergence_epsilon = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double initial_rating = 400.0;
};

struct FitStep {
  int epoch = 0;
  double cost = 0.0;
};

struct EloModel {
  Mode mode = Mode::persuasion;
  std::map<std::string, double> ratings;
  /// Truth mode only.
  std::map<std::string, double> question_ratings;
  /// Epoch 0 is the cost at initialisation.
  std::vector<FitStep> fit_trace;
  bool converged = false;
  /// Cost of the returned ratings.
  double cost = 0.0;
};

/// 1 / (1 + 10^((r_j - r_i) / 400)).
double expected_persuasion(double r_i, double r_j);
/// 1 / (1 + 10^((r_question - r_team) / 400)).
double expected_truth(double r_team, double r_question);

/// Mean squared error of the model's expectations against the outcomes.
double cost(const EloModel& model, std::span<const Observation> observations);

/// Full-batch Adam on the mean squared error, starting every rating at
/// cfg.initial_rating. Stops after max_epochs or once an epoch lowers the
/// cost by less than convergence_epsilon (a rising step never counts as
/// converged), and returns the lowest-cost
/// iterate seen. Observations are summed in sorted order, so the result does
/// not depend on their input order.
EloModel fit(std::span<const Observation> observations, Mode mode, const FitConfig& cfg = {});

/// Shifts every rating (and question rating) so the mean of `ratings` equals
/// `anchor`.
EloModel centered(EloModel model, double anchor = 400.0);

/// Mean rating per group. `groups` maps member id to group name; every member
/// must be rated.
std::map<std::string, double> group_mean(const EloModel& model, const std::map<std::string, std::string>& groups);

json to_json(const FitConfig& cfg);
FitConfig fit_config_from_json(const json& j);
json to_json(const EloModel& model);
EloModel elo_model_from_json(const json& j);

}  // namespace debateqd::rating
