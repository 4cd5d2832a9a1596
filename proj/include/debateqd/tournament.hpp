#pragma once

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "debateqd/debate.hpp"

namespace debateqd::tournament {

/// Outcome of one pairing. In persuasion mode participant_b is the opposing
/// strategy and scores are judge mass on participant_a's answer; in truth
/// mode participant_b is a question id and scores are mass on the correct
/// answer.
struct MatchRecord {
  std::string participant_a;
  std::string participant_b;
  std::array<double, 4> per_config_scores{0.5, 0.5, 0.5, 0.5};
  double aggregate_score_a = 0.5;
  int points_a = 0;
  int points_b = 0;
  int round_index = 0;
  /// One transcript id per (question, configuration), question-major.
  std::vector<std::string> transcript_refs;
  bool tie = false;
  bool repeat_pairing = false;
};

using Pair = std::pair<std::string, std::string>;

/// Unordered pair key: smaller id first.
Pair unordered(const std::string& a, const std::string& b);

struct SwissState {
  std::map<std::string, int> points;
  std::map<std::string, double> soft_totals;
  std::set<Pair> played_pairs;
  std::set<std::string> had_bye;
  int round = 0;
  int total_rounds = 0;
};

struct Pairing {
  std::string a;
  std::string b;
  bool repeat = false;
};

struct RoundPlan {
  std::vector<Pairing> pairs;
  std::optional<std::string> bye;
};

/// ceil(log2 n); 0 for n < 2.
int swiss_round_count(std::size_t n);

SwissState initial_state(std::span<const std::string> participants);

/// Points desc, soft total desc, id asc.
std::vector<std::string> standings_ranking(const SwissState& state);

/// With an odd count, the bye goes to the lowest-ranked participant who has
/// not had one yet. The rest are paired greedily from the top: each takes
/// the nearest-ranked unpaired participant it has not met, falling back to a
/// flagged repeat when every remaining opponent has been met.
RoundPlan swiss_pairings(const SwissState& state, std::span<const std::string> ranking);

/// Applies one round's records and bye to the standings.
void apply_round(SwissState& state, std::span<const MatchRecord> records, const std::optional<std::string>& bye);

/// Awards the point for an aggregate score. Exact ties go to the
/// lexicographically smaller id and set `tie`.
void award_points(MatchRecord& record);

struct MatchResult {
  MatchRecord record;
  std::vector<debate::DebateTranscript> transcripts;
};

/// Debates a (seat 1) against b (seat 2) on every question under all four
/// configurations.
MatchResult run_persuasion_match(const debate::Debater& a, const debate::Debater& b,
                                 std::span<const dataset::DebateQuestion> questions, const debate::DebateConfig& cfg,
                                 llm::Gateway& gateway, const Templates& templates);

struct RoundResult {
  int round_index = 0;
  std::vector<MatchRecord> records;
  std::vector<debate::DebateTranscript> transcripts;
  std::optional<std::string> bye;
};

struct TournamentHooks {
  /// Rounds already played, replayed instead of rerun.
  std::vector<RoundResult> completed;
  /// Called after each newly played round, before the next is paired.
  std::function<void(const RoundResult&)> on_round;
};

struct TournamentResult {
  std::vector<RoundResult> rounds;
  SwissState final_state;

  std::vector<MatchRecord> records() const;
};

/// Runs all matches of a round concurrently; rounds are sequential.
TournamentResult run_swiss_tournament(std::span<const debate::Debater> participants,
                                      std::span<const dataset::DebateQuestion> questions,
                                      const debate::DebateConfig& cfg, llm::Gateway& gateway,
                                      const Templates& templates, const TournamentHooks& hooks = {});

/// Recomputes standings from persisted rounds.
SwissState replay_standings(std::span<const std::string> participants, std::span<const RoundResult> rounds);

struct Team {
  std::string id;
  debate::Debater member1;
  debate::Debater member2;
};

struct TruthEvaluation {
  std::vector<MatchRecord> records;
  std::vector<debate::DebateTranscript> transcripts;
};

/// Every team debates every question: member1 in seat 1, member2 in seat 2,
/// under the four configurations. One record per (team, question), teams
/// outer, questions inner.
TruthEvaluation run_truth_evaluation(std::span<const Team> teams, std::span<const dataset::DebateQuestion> questions,
                                     const debate::DebateConfig& cfg, llm::Gateway& gateway,
                                     const Templates& templates);

json to_json(const MatchRecord& r);
MatchRecord match_record_from_json(const json& j);

}  // namespace debateqd::tournament
