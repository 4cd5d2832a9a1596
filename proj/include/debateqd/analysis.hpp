#pragma once

#include <span>
#include <string>
#include <vector>

#include "debateqd/evolution.hpp"

namespace debateqd::analysis {

struct EliteEntry {
  std::string id;
  std::string category;
  double rating = 0.0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  double gap = 0.0;
};

struct ElitePanel {
  evolution::Objective objective = evolution::Objective::persuasion;
  std::size_t requested = 15;
  /// Fewer entities than requested were available.
  bool shortfall = false;
  std::vector<EliteEntry> entries;

  std::vector<double> gaps() const;
};

/// Top entities by rating (ties by id). Persuasion entities are scored by
/// self-play judge accuracy, truth teams by mean accuracy over the set.
ElitePanel build_elite_panel(const evolution::PopulationState& rated, std::span<const dataset::DebateQuestion> train,
                             std::span<const dataset::DebateQuestion> test, const debate::DebateConfig& cfg,
                             llm::Gateway& gateway, const Templates& templates, std::size_t size = 15);

enum class BootstrapMode { independent, paired };

std::string to_string(BootstrapMode mode);
BootstrapMode bootstrap_mode_from_string(std::string_view name);

struct BootstrapResult {
  BootstrapMode mode = BootstrapMode::independent;
  std::size_t iterations = 100000;
  std::uint64_t seed = 0;
  double mean_difference = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

/// Linear interpolation between order statistics (R type 7). `sorted` must
/// be ascending and nonempty.
double quantile_sorted(std::span<const double> sorted, double q);

/// Percentile bootstrap of mean(a) - mean(b) at 95%. Independent mode
/// resamples each list to its own size; paired mode resamples aligned
/// indices of equal-length lists.
BootstrapResult bootstrap_gap_difference(std::span<const double> a, std::span<const double> b,
                                         std::size_t iterations = 100000, std::uint64_t seed = 0,
                                         BootstrapMode mode = BootstrapMode::independent);

/// Mean over unordered pairs of 1 - cos(u, v).
double mean_pairwise_cosine_distance(std::span<const llm::Embedding> vectors);
double embedding_diversity(const std::vector<std::string>& texts, llm::Gateway& gateway);

/// Pearson correlation. Throws std::invalid_argument on fewer than 3 points
/// or zero variance.
double pearson(std::span<const double> x, std::span<const double> y);

json to_json(const ElitePanel& panel);
ElitePanel elite_panel_from_json(const json& j);
json to_json(const BootstrapResult& r);
BootstrapResult bootstrap_result_from_json(const json& j);

}  // namespace debateqd::analysis
