#include "debateqd/debate.hpp"

#include <algorithm>

#include "debateqd/error.hpp"
#include "debateqd/synthetic_backend.hpp"
#include "debateqd/util.hpp"

namespace debateqd::debate {

Truncation truncate_words(std::string_view text, int limit) {
  if (limit < 1) throw std::invalid_argument("truncate_words: limit must be at least 1");
  const auto words = split_words(text);
  if (words.size() <= static_cast<std::size_t>(limit)) return {std::string(text), false};
  const auto& last = words[static_cast<std::size_t>(limit) - 1];
  const std::size_t end = static_cast<std::size_t>(last.data() - text.data()) + last.size();
  return {std::string(text.substr(0, end)), true};
}

namespace {

std::string render_argument(const Turn& t) { return t.empty ? std::string("[no argument]") : t.argument; }

}  // namespace

std::string egocentric_view(std::span<const Turn> turns, Seat viewer) {
  std::string out;
  int max_round = 0;
  for (const auto& t : turns) max_round = std::max(max_round, t.round);
  for (int r = 1; r <= max_round; ++r) {
    const Turn* mine = nullptr;
    const Turn* theirs = nullptr;
    for (const auto& t : turns) {
      if (t.round != r) continue;
      (t.speaker == viewer ? mine : theirs) = &t;
    }
    if (!mine && !theirs) continue;
    if (!out.empty()) out += "\n\n";
    out += "Round " + std::to_string(r);
    if (mine) out += "\nYou: " + render_argument(*mine);
    if (theirs) out += "\nOpponent: " + render_argument(*theirs);
  }
  return out;
}

std::string judge_view(std::span<const Turn> turns) {
  std::string out;
  for (const auto& t : turns) {
    if (!out.empty()) out += '\n';
    out += "Debater " + std::to_string(seat_number(t.speaker)) + ": " + render_argument(t);
  }
  return out;
}

std::array<DebateConfig, 4> four_configurations(const DebateConfig& base) {
  std::array<DebateConfig, 4> out{base, base, base, base};
  out[0].correct_seat = Seat::debater1;
  out[0].first_speaker = Seat::debater1;
  out[1].correct_seat = Seat::debater1;
  out[1].first_speaker = Seat::debater2;
  out[2].correct_seat = Seat::debater2;
  out[2].first_speaker = Seat::debater1;
  out[3].correct_seat = Seat::debater2;
  out[3].first_speaker = Seat::debater2;
  return out;
}

std::string answer_for(const dataset::DebateQuestion& q, const DebateConfig& cfg, Seat seat) {
  return seat == cfg.correct_seat ? q.correct_answer : q.incorrect_answer;
}

DebateTranscript run_debate(const dataset::DebateQuestion& q, const Debater& d1, const Debater& d2,
                            const DebateConfig& cfg, llm::Gateway& gateway, const Templates& templates) {
  if (cfg.rounds < 1) throw std::invalid_argument("debate requires at least one round");
  DebateTranscript tr;
  tr.question_id = q.id;
  tr.debater1_id = d1.id;
  tr.debater2_id = d2.id;
  tr.config = cfg;
  tr.id = "q=" + q.id + "|d1=" + d1.id + "|d2=" + d2.id + "|correct=" +
          std::to_string(seat_number(cfg.correct_seat)) + "|first=" + std::to_string(seat_number(cfg.first_speaker));

  auto context = [&] { return " [debate " + tr.id + "]"; };
  int words_used = 0;
  try {
    for (int round = 1; round <= cfg.rounds; ++round) {
      for (Seat speaker : {cfg.first_speaker, other(cfg.first_speaker)}) {
        const Debater& self = speaker == Seat::debater1 ? d1 : d2;
        const std::string view = egocentric_view(tr.turns, speaker);
        const std::string prompt =
            render_template(templates.debater, {{"debater_id", std::to_string(seat_number(speaker))},
                                                {"question", q.question_text},
                                                {"pov", answer_for(q, cfg, speaker)},
                                                {"interlocutor_pov", answer_for(q, cfg, other(speaker))},
                                                {"article", q.article_text},
                                                {"strategy", self.strategy},
                                                {"debate_text", view.empty() ? std::string("None") : view}});
        auto req = llm::make_debater_request(prompt);
        req.hints[llm::hints::kStrategy] = self.strategy;
        req.hints[llm::hints::kDebaterId] = std::to_string(seat_number(speaker));
        req.hints[llm::hints::kStanceCorrect] = speaker == cfg.correct_seat ? "1" : "0";
        const auto resp = gateway.complete(req);

        Turn turn;
        turn.round = round;
        turn.speaker = speaker;
        const std::string text = trim(resp.text);
        const int budget = std::min(cfg.word_limit_per_argument, cfg.transcript_word_limit - words_used);
        if (text.empty() || budget < 1) {
          turn.empty = true;
          turn.truncated = !text.empty();
        } else {
          auto cut = truncate_words(text, budget);
          turn.argument = std::move(cut.text);
          turn.truncated = cut.truncated;
          words_used += static_cast<int>(word_count(turn.argument));
        }
        tr.turns.push_back(std::move(turn));
      }
    }

    tr.judge_prompt = render_template(templates.judge, {{"question", q.question_text},
                                                        {"answer_1", answer_for(q, cfg, Seat::debater1)},
                                                        {"answer_2", answer_for(q, cfg, Seat::debater2)},
                                                        {"debate_text", judge_view(tr.turns)}});
    const auto decision = gateway.judge_decision(llm::make_judge_request(tr.judge_prompt));
    tr.judge_p_debater1 = decision.p1;
    tr.judge_p_correct = cfg.correct_seat == Seat::debater1 ? decision.p1 : decision.p2;
    tr.winner = decision.winner == 1 ? Seat::debater1 : Seat::debater2;
  } catch (const ProtocolError& e) {
    throw ProtocolError(e.what() + context());
  } catch (const GatewayError& e) {
    throw GatewayError(e.what() + context());
  }
  return tr;
}

double judge_accuracy_selfplay(const Debater& d, std::span<const dataset::DebateQuestion> questions,
                               const DebateConfig& base, llm::Gateway& gateway, const Templates& templates) {
  if (questions.empty()) throw std::invalid_argument("judge_accuracy_selfplay requires questions");
  const auto configs = four_configurations(base);
  std::vector<double> scores(questions.size() * configs.size());
  parallel_for(scores.size(), gateway.parallelism(), [&](std::size_t i) {
    const auto& q = questions[i / configs.size()];
    scores[i] = run_debate(q, d, d, configs[i % configs.size()], gateway, templates).judge_p_correct;
  });
  double sum = 0.0;
  for (double s : scores) sum += s;
  return sum / static_cast<double>(scores.size());
}

json to_json(const DebateConfig& cfg) {
  return json{{"rounds", cfg.rounds},
              {"word_limit_per_argument", cfg.word_limit_per_argument},
              {"transcript_word_limit", cfg.transcript_word_limit},
              {"first_speaker", seat_number(cfg.first_speaker)},
              {"correct_seat", seat_number(cfg.correct_seat)}};
}

namespace {
Seat seat_from_int(int v) {
  if (v == 1) return Seat::debater1;
  if (v == 2) return Seat::debater2;
  throw DataError("seat must be 1 or 2");
}
}  // namespace

DebateConfig debate_config_from_json(const json& j) {
  DebateConfig cfg;
  cfg.rounds = j.value("rounds", cfg.rounds);
  cfg.word_limit_per_argument = j.value("word_limit_per_argument", cfg.word_limit_per_argument);
  cfg.transcript_word_limit = j.value("transcript_word_limit", cfg.transcript_word_limit);
  cfg.first_speaker = seat_from_int(j.value("first_speaker", 1));
  cfg.correct_seat = seat_from_int(j.value("correct_seat", 1));
  return cfg;
}

json to_json(const DebateTranscript& t) {
  json turns = json::array();
  for (const auto& turn : t.turns) {
    turns.push_back({{"round", turn.round},
                     {"speaker", seat_number(turn.speaker)},
                     {"argument", turn.argument},
                     {"truncated", turn.truncated},
                     {"empty", turn.empty}});
  }
  return json{{"id", t.id},
              {"question_id", t.question_id},
              {"debater1_id", t.debater1_id},
              {"debater2_id", t.debater2_id},
              {"config", to_json(t.config)},
              {"turns", turns},
              {"judge_prompt", t.judge_prompt},
              {"judge_p_debater1", t.judge_p_debater1},
              {"judge_p_correct", t.judge_p_correct},
              {"winner", seat_number(t.winner)}};
}

DebateTranscript transcript_from_json(const json& j) {
  DebateTranscript t;
  t.id = j.at("id").get<std::string>();
  t.question_id = j.at("question_id").get<std::string>();
  t.debater1_id = j.at("debater1_id").get<std::string>();
  t.debater2_id = j.at("debater2_id").get<std::string>();
  t.config = debate_config_from_json(j.at("config"));
  for (const auto& turn : j.at("turns")) {
    t.turns.push_back(Turn{turn.at("round").get<int>(), seat_from_int(turn.at("speaker").get<int>()),
                           turn.at("argument").get<std::string>(), turn.at("truncated").get<bool>(),
                           turn.at("empty").get<bool>()});
  }
  t.judge_prompt = j.at("judge_prompt").get<std::string>();
  t.judge_p_debater1 = j.at("judge_p_debater1").get<double>();
  t.judge_p_correct = j.at("judge_p_correct").get<double>();
  t.winner = seat_from_int(j.at("winner").get<int>());
  return t;
}

}  // namespace debateqd::debate
