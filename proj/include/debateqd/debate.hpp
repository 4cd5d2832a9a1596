#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "debateqd/dataset.hpp"
#include "debateqd/llm_gateway.hpp"
#include "debateqd/templates.hpp"

namespace debateqd::debate {

enum class Seat { debater1 = 1, debater2 = 2 };

inline Seat other(Seat s) { return s == Seat::debater1 ? Seat::debater2 : Seat::debater1; }
inline int seat_number(Seat s) { return static_cast<int>(s); }

/// A strategy as seen by the debate engine.
struct Debater {
  std::string id;
  std::string strategy;
};

struct DebateConfig {
  int rounds = 2;
  int word_limit_per_argument = 150;
  int transcript_word_limit = 600;
  Seat first_speaker = Seat::debater1;
  /// Which seat argues the correct answer.
  Seat correct_seat = Seat::debater1;
};

struct Turn {
  int round = 0;
  Seat speaker = Seat::debater1;
  std::string argument;
  bool truncated = false;
  bool empty = false;
};

struct DebateTranscript {
  std::string id;
  std::string question_id;
  std::string debater1_id;
  std::string debater2_id;
  DebateConfig config;
  std::vector<Turn> turns;
  std::string judge_prompt;
  double judge_p_debater1 = 0.5;
  double judge_p_correct = 0.5;
  Seat winner = Seat::debater1;
};

struct Truncation {
  std::string text;
  bool truncated = false;
};

/// Keeps the first `limit` whitespace-delimited words. Text within the kept
/// span is returned unchanged.
Truncation truncate_words(std::string_view text, int limit);

/// Transcript as seen by `viewer`: per round, the viewer's argument first
/// ("You: ...") then the opponent's ("Opponent: ..."), rounds in order.
/// Empty when nothing has been said yet.
std::string egocentric_view(std::span<const Turn> turns, Seat viewer);

/// Transcript as shown to the judge: "Debater N: ..." lines in speaking order.
std::string judge_view(std::span<const Turn> turns);

/// The four role/order configurations of a match, from the perspective of
/// the debater in seat 1: correct & first, correct & second, incorrect &
/// first, incorrect & second.
std::array<DebateConfig, 4> four_configurations(const DebateConfig& base);

std::string answer_for(const dataset::DebateQuestion& q, const DebateConfig& cfg, Seat seat);

/// Runs one information-asymmetric debate. Debaters see the article; the
/// judge sees only the question, both answers and the transcript.
DebateTranscript run_debate(const dataset::DebateQuestion& q, const Debater& d1, const Debater& d2,
                            const DebateConfig& cfg, llm::Gateway& gateway, const Templates& templates);

/// Mean judge probability on the correct answer when `d` debates a copy of
/// itself over every question under all four configurations.
double judge_accuracy_selfplay(const Debater& d, std::span<const dataset::DebateQuestion> questions,
                               const DebateConfig& base, llm::Gateway& gateway, const Templates& templates);

json to_json(const DebateConfig& cfg);
DebateConfig debate_config_from_json(const json& j);
json to_json(const DebateTranscript& t);
DebateTranscript transcript_from_json(const json& j);

}  // namespace debateqd::debate
