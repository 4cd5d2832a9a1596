#include "debateqd/tournament.hpp"

#include <algorithm>
#include <bit>
#include <stdexcept>

#include "debateqd/error.hpp"
#include "debateqd/util.hpp"

namespace debateqd::tournament {

Pair unordered(const std::string& a, const std::string& b) { return a < b ? Pair{a, b} : Pair{b, a}; }

int swiss_round_count(std::size_t n) {
  if (n < 2) return 0;
  return static_cast<int>(std::bit_width(n - 1));
}

SwissState initial_state(std::span<const std::string> participants) {
  SwissState state;
  for (const auto& id : participants) {
    if (!state.points.emplace(id, 0).second) throw std::invalid_argument("duplicate participant id: " + id);
    state.soft_totals.emplace(id, 0.0);
  }
  state.total_rounds = swiss_round_count(participants.size());
  return state;
}

std::vector<std::string> standings_ranking(const SwissState& state) {
  std::vector<std::string> ids;
  ids.reserve(state.points.size());
  for (const auto& [id, pts] : state.points) ids.push_back(id);
  std::sort(ids.begin(), ids.end(), [&](const std::string& x, const std::string& y) {
    const int px = state.points.at(x), py = state.points.at(y);
    if (px != py) return px > py;
    const double sx = state.soft_totals.at(x), sy = state.soft_totals.at(y);
    if (sx != sy) return sx > sy;
    return x < y;
  });
  return ids;
}

RoundPlan swiss_pairings(const SwissState& state, std::span<const std::string> ranking) {
  RoundPlan plan;
  std::vector<std::string> pool(ranking.begin(), ranking.end());
  if (pool.size() % 2 == 1) {
    auto it = std::find_if(pool.rbegin(), pool.rend(), [&](const std::string& id) { return !state.had_bye.count(id); });
    const auto pos = it == pool.rend() ? std::prev(pool.end()) : std::prev(it.base());
    plan.bye = *pos;
    pool.erase(pos);
  }

  std::vector<bool> taken(pool.size(), false);
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (taken[i]) continue;
    taken[i] = true;
    std::optional<std::size_t> fresh, any;
    for (std::size_t j = i + 1; j < pool.size(); ++j) {
      if (taken[j]) continue;
      if (!any) any = j;
      if (!state.played_pairs.count(unordered(pool[i], pool[j]))) {
        fresh = j;
        break;
      }
    }
    const std::size_t j = fresh ? *fresh : *any;
    taken[j] = true;
    plan.pairs.push_back({pool[i], pool[j], !fresh.has_value()});
  }
  return plan;
}

void award_points(MatchRecord& r) {
  if (r.aggregate_score_a > 0.5) {
    r.points_a = 1;
  } else if (r.aggregate_score_a < 0.5) {
    r.points_a = 0;
  } else {
    r.tie = true;
    r.points_a = r.participant_a < r.participant_b ? 1 : 0;
  }
  r.points_b = 1 - r.points_a;
}

void apply_round(SwissState& state, std::span<const MatchRecord> records, const std::optional<std::string>& bye) {
  for (const auto& r : records) {
    state.points.at(r.participant_a) += r.points_a;
    state.points.at(r.participant_b) += r.points_b;
    state.soft_totals.at(r.participant_a) += r.aggregate_score_a;
    state.soft_totals.at(r.participant_b) += 1.0 - r.aggregate_score_a;
    state.played_pairs.insert(unordered(r.participant_a, r.participant_b));
  }
  if (bye) {
    state.points.at(*bye) += 1;
    state.had_bye.insert(*bye);
  }
  ++state.round;
}

namespace {

struct DebateTask {
  std::size_t match;
  std::size_t question;
  std::size_t config;
};

/// Runs every (pairing, question, configuration) debate with the first
/// debater of each pairing in seat 1. Transcripts come back in task order.
std::vector<debate::DebateTranscript> run_debates(std::span<const std::pair<const debate::Debater*, const debate::Debater*>> pairings,
                                                  std::span<const dataset::DebateQuestion> questions,
                                                  const debate::DebateConfig& cfg, llm::Gateway& gateway,
                                                  const Templates& templates) {
  const auto configs = debate::four_configurations(cfg);
  const std::size_t per_match = questions.size() * configs.size();
  std::vector<debate::DebateTranscript> out(pairings.size() * per_match);
  parallel_for(out.size(), gateway.parallelism(), [&](std::size_t i) {
    const auto& [d1, d2] = pairings[i / per_match];
    const std::size_t within = i % per_match;
    out[i] = debate::run_debate(questions[within / configs.size()], *d1, *d2, configs[within % configs.size()],
                                gateway, templates);
  });
  return out;
}

MatchRecord summarise(const std::string& a, const std::string& b, std::span<const debate::DebateTranscript> ts,
                      std::size_t n_questions, bool truth) {
  MatchRecord r;
  r.participant_a = a;
  r.participant_b = b;
  std::array<double, 4> sums{};
  for (std::size_t i = 0; i < ts.size(); ++i) {
    sums[i % 4] += truth ? ts[i].judge_p_correct : ts[i].judge_p_debater1;
    r.transcript_refs.push_back(ts[i].id);
  }
  double total = 0.0;
  for (std::size_t k = 0; k < 4; ++k) {
    r.per_config_scores[k] = sums[k] / static_cast<double>(n_questions);
    total += r.per_config_scores[k];
  }
  r.aggregate_score_a = total / 4.0;
  award_points(r);
  return r;
}

}  // namespace

MatchResult run_persuasion_match(const debate::Debater& a, const debate::Debater& b,
                                 std::span<const dataset::DebateQuestion> questions, const debate::DebateConfig& cfg,
                                 llm::Gateway& gateway, const Templates& templates) {
  if (a.id == b.id) throw std::invalid_argument("a match needs two distinct strategies");
  if (questions.empty()) throw std::invalid_argument("a match needs at least one question");
  const std::array<std::pair<const debate::Debater*, const debate::Debater*>, 1> pairing{{{&a, &b}}};
  MatchResult result;
  result.transcripts = run_debates(pairing, questions, cfg, gateway, templates);
  result.record = summarise(a.id, b.id, result.transcripts, questions.size(), false);
  return result;
}

std::vector<MatchRecord> TournamentResult::records() const {
  std::vector<MatchRecord> out;
  for (const auto& round : rounds) out.insert(out.end(), round.records.begin(), round.records.end());
  return out;
}

SwissState replay_standings(std::span<const std::string> participants, std::span<const RoundResult> rounds) {
  SwissState state = initial_state(participants);
  for (const auto& round : rounds) apply_round(state, round.records, round.bye);
  return state;
}

TournamentResult run_swiss_tournament(std::span<const debate::Debater> participants,
                                      std::span<const dataset::DebateQuestion> questions,
                                      const debate::DebateConfig& cfg, llm::Gateway& gateway,
                                      const Templates& templates, const TournamentHooks& hooks) {
  if (participants.size() < 2) throw std::invalid_argument("a Swiss tournament needs at least two participants");
  if (questions.empty()) throw std::invalid_argument("a Swiss tournament needs at least one question");
  std::map<std::string, const debate::Debater*> by_id;
  std::vector<std::string> ids;
  for (const auto& d : participants) {
    by_id[d.id] = &d;
    ids.push_back(d.id);
  }

  TournamentResult result;
  result.final_state = initial_state(ids);
  SwissState& state = result.final_state;

  for (const auto& done : hooks.completed) {
    if (done.round_index != state.round + 1) throw ResumeError("persisted tournament rounds are not contiguous");
    apply_round(state, done.records, done.bye);
    result.rounds.push_back(done);
  }

  while (state.round < state.total_rounds) {
    const auto plan = swiss_pairings(state, standings_ranking(state));
    std::vector<std::pair<const debate::Debater*, const debate::Debater*>> pairings;
    for (const auto& p : plan.pairs) pairings.emplace_back(by_id.at(p.a), by_id.at(p.b));

    RoundResult round;
    round.round_index = state.round + 1;
    round.bye = plan.bye;
    round.transcripts = run_debates(pairings, questions, cfg, gateway, templates);
    const std::size_t per_match = questions.size() * 4;
    for (std::size_t m = 0; m < plan.pairs.size(); ++m) {
      auto record = summarise(plan.pairs[m].a, plan.pairs[m].b,
                              std::span(round.transcripts).subspan(m * per_match, per_match), questions.size(), false);
      record.round_index = round.round_index;
      record.repeat_pairing = plan.pairs[m].repeat;
      round.records.push_back(std::move(record));
    }
    apply_round(state, round.records, round.bye);
    if (hooks.on_round) hooks.on_round(round);
    result.rounds.push_back(std::move(round));
  }
  return result;
}

TruthEvaluation run_truth_evaluation(std::span<const Team> teams, std::span<const dataset::DebateQuestion> questions,
                                     const debate::DebateConfig& cfg, llm::Gateway& gateway,
                                     const Templates& templates) {
  if (teams.empty() || questions.empty()) throw std::invalid_argument("truth evaluation needs teams and questions");
  std::vector<std::pair<const debate::Debater*, const debate::Debater*>> pairings;
  for (const auto& t : teams) pairings.emplace_back(&t.member1, &t.member2);

  TruthEvaluation out;
  out.transcripts = run_debates(pairings, questions, cfg, gateway, templates);
  for (std::size_t t = 0; t < teams.size(); ++t) {
    for (std::size_t qi = 0; qi < questions.size(); ++qi) {
      const auto slice = std::span(out.transcripts).subspan((t * questions.size() + qi) * 4, 4);
      out.records.push_back(summarise(teams[t].id, questions[qi].id, slice, 1, true));
    }
  }
  return out;
}

json to_json(const MatchRecord& r) {
  return json{{"participant_a", r.participant_a},
              {"participant_b", r.participant_b},
              {"per_config_scores", r.per_config_scores},
              {"aggregate_score_a", r.aggregate_score_a},
              {"points_a", r.points_a},
              {"points_b", r.points_b},
              {"round_index", r.round_index},
              {"transcript_refs", r.transcript_refs},
              {"tie", r.tie},
              {"repeat_pairing", r.repeat_pairing}};
}

MatchRecord match_record_from_json(const json& j) {
  MatchRecord r;
  r.participant_a = j.at("participant_a").get<std::string>();
  r.participant_b = j.at("participant_b").get<std::string>();
  r.per_config_scores = j.at("per_config_scores").get<std::array<double, 4>>();
  r.aggregate_score_a = j.at("aggregate_score_a").get<double>();
  r.points_a = j.at("points_a").get<int>();
  r.points_b = j.at("points_b").get<int>();
  r.round_index = j.at("round_index").get<int>();
  r.transcript_refs = j.at("transcript_refs").get<std::vector<std::string>>();
  r.tie = j.at("tie").get<bool>();
  r.repeat_pairing = j.at("repeat_pairing").get<bool>();
  return r;
}

}  // namespace debateqd::tournament
