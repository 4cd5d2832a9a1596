#include "debateqd/debate.hpp"
#include "debateqd/error.hpp"
#include "debateqd/templates.hpp"
#include "doctest.h"
#include "support/support.hpp"

using namespace debateqd;
using namespace debateqd::debate;

namespace {

std::string words(int n, const std::string& stem) {
  std::string out;
  for (int i = 0; i < n; ++i) out += (i ? " " : "") + stem + std::to_string(i);
  return out;
}

}  // namespace

TEST_CASE("truncation keeps the original spacing of the kept words") {
  const auto kept = truncate_words("alpha  beta\tgamma delta", 2);
  CHECK(kept.text == "alpha  beta");
  CHECK(kept.truncated);
  const auto whole = truncate_words("  one two ", 2);
  CHECK(whole.text == "  one two ");
  CHECK_FALSE(whole.truncated);
  CHECK_THROWS(truncate_words("x", 0));
}

TEST_CASE("egocentric view puts the viewer first within each round") {
  std::vector<Turn> turns{{1, Seat::debater2, "B1", false, false},
                          {1, Seat::debater1, "A1", false, false},
                          {2, Seat::debater2, "", false, true}};
  CHECK(egocentric_view(turns, Seat::debater1) == "Round 1\nYou: A1\nOpponent: B1\n\nRound 2\nOpponent: [no argument]");
  CHECK(egocentric_view(turns, Seat::debater2) == "Round 1\nYou: B1\nOpponent: A1\n\nRound 2\nYou: [no argument]");
  CHECK(egocentric_view({}, Seat::debater1).empty());
  CHECK(judge_view(turns) == "Debater 2: B1\nDebater 1: A1\nDebater 2: [no argument]");
}

TEST_CASE("the four configurations cover role and order from seat 1") {
  const auto c = four_configurations({});
  CHECK(c[0].correct_seat == Seat::debater1);
  CHECK(c[0].first_speaker == Seat::debater1);
  CHECK(c[1].correct_seat == Seat::debater1);
  CHECK(c[1].first_speaker == Seat::debater2);
  CHECK(c[2].correct_seat == Seat::debater2);
  CHECK(c[2].first_speaker == Seat::debater1);
  CHECK(c[3].correct_seat == Seat::debater2);
  CHECK(c[3].first_speaker == Seat::debater2);
}

TEST_CASE("debaters see the article and the judge does not") {
  auto backend = std::make_shared<testsupport::ScriptedBackend>(
      std::vector<std::string>{"first words", "second words", "third words", "fourth words"});
  llm::Gateway gw(backend, nullptr, {1});
  const auto templates = Templates::builtin();
  const auto q = testsupport::question("q1", "SECRET-ARTICLE-TEXT");
  DebateConfig cfg;
  cfg.first_speaker = Seat::debater2;
  cfg.correct_seat = Seat::debater2;
  const auto t = run_debate(q, {"d1", "bold"}, {"d2", "meek"}, cfg, gw, templates);

  REQUIRE(backend->requests.size() == 5);
  for (int i = 0; i < 4; ++i) {
    const auto prompt = backend->requests[i].prompt_text();
    CHECK(prompt.find("SECRET-ARTICLE-TEXT") != std::string::npos);
  }
  // Speaking order 2, 1, 2, 1; seat 2 argues the correct answer.
  CHECK(backend->requests[0].hints.at("debater_id") == "2");
  CHECK(backend->requests[0].hints.at("stance_correct") == "1");
  CHECK(backend->requests[0].hints.at("strategy") == "meek");
  CHECK(backend->requests[1].hints.at("debater_id") == "1");
  CHECK(backend->requests[1].prompt_text().find("Your stance in the debate is: '" + q.incorrect_answer + "'") !=
        std::string::npos);
  CHECK(backend->requests[0].prompt_text().find("history: 'None'") != std::string::npos);
  CHECK(backend->requests[2].prompt_text().find("Round 1\nYou: first words\nOpponent: second words") !=
        std::string::npos);

  const auto& judge = backend->requests[4];
  CHECK(judge.kind == llm::RequestKind::judge);
  CHECK(judge.prompt_text().find("SECRET-ARTICLE-TEXT") == std::string::npos);
  CHECK(t.judge_prompt == judge.prompt_text());
  CHECK(t.judge_prompt.find("Debater 2: first words\nDebater 1: second words") != std::string::npos);
  CHECK(t.id == "q=q1|d1=d1|d2=d2|correct=2|first=2");
}

TEST_CASE("per-argument and transcript word limits both apply") {
  auto backend = std::make_shared<testsupport::ScriptedBackend>(
      std::vector<std::string>{words(10, "a"), words(10, "b"), words(10, "c"), words(10, "d")});
  llm::Gateway gw(backend, nullptr, {1});
  DebateConfig cfg;
  cfg.word_limit_per_argument = 5;
  cfg.transcript_word_limit = 12;
  const auto t = run_debate(testsupport::question("q"), {"x", "s"}, {"y", "s"}, cfg, gw, Templates::builtin());
  REQUIRE(t.turns.size() == 4);
  CHECK(t.turns[0].argument == words(5, "a"));
  CHECK(t.turns[1].argument == words(5, "b"));
  CHECK(t.turns[2].argument == "c0 c1");
  CHECK(t.turns[2].truncated);
  CHECK(t.turns[3].empty);
  CHECK(t.turns[3].truncated);
}

TEST_CASE("an empty reply is recorded as a missing argument") {
  auto backend = std::make_shared<testsupport::ScriptedBackend>(std::vector<std::string>{"   ", "x", "y", "z"});
  llm::Gateway gw(backend, nullptr, {1});
  const auto t = run_debate(testsupport::question("q"), {"x", "s"}, {"y", "s"}, {}, gw, Templates::builtin());
  CHECK(t.turns[0].empty);
  CHECK_FALSE(t.turns[0].truncated);
  CHECK(t.judge_prompt.find("Debater 1: [no argument]") != std::string::npos);
}

TEST_CASE("judge probability maps onto the correct answer") {
  llm::SyntheticAgentModel model;
  model.correct_side_bonus = 0.0;
  auto gw = testsupport::synthetic_gateway(model);
  const Debater strong{"s", "strong " + llm::skill_marker(1.0)};
  const Debater weak{"w", "weak " + llm::skill_marker(0.0)};
  const auto q = testsupport::question("q");
  const double p_strong = testsupport::sigmoid(1.0);
  for (const auto& cfg : four_configurations({})) {
    const auto t = run_debate(q, strong, weak, cfg, *gw, Templates::builtin());
    CHECK(t.judge_p_debater1 == doctest::Approx(p_strong));
    const double expected_correct = cfg.correct_seat == Seat::debater1 ? p_strong : 1.0 - p_strong;
    CHECK(t.judge_p_correct == doctest::Approx(expected_correct));
    CHECK(t.winner == Seat::debater1);
  }
}

TEST_CASE("self-play accuracy equals the correct-side advantage") {
  llm::SyntheticAgentModel model;
  model.correct_side_bonus = 0.8;
  auto gw = testsupport::synthetic_gateway(model);
  const auto qs = testsupport::questions(3);
  const double acc =
      judge_accuracy_selfplay({"d", "plan " + llm::skill_marker(0.3)}, qs, {}, *gw, Templates::builtin());
  CHECK(acc == doctest::Approx(testsupport::sigmoid(0.8)));
}

TEST_CASE("gateway failures name the debate") {
  auto backend = std::make_shared<testsupport::ScriptedBackend>(std::vector<std::string>{"only one"});
  llm::Gateway gw(backend, nullptr, {1});
  try {
    run_debate(testsupport::question("qq"), {"x", "s"}, {"y", "s"}, {}, gw, Templates::builtin());
    FAIL("expected failure");
  } catch (const GatewayError& e) {
    CHECK(std::string(e.what()).find("q=qq|d1=x|d2=y") != std::string::npos);
  }
}

TEST_CASE("transcripts round-trip through JSON") {
  auto gw = testsupport::synthetic_gateway();
  const auto t = run_debate(testsupport::question("q"), {"a", "s1"}, {"b", "s2"}, four_configurations({})[3], *gw,
                            Templates::builtin());
  const auto back = transcript_from_json(to_json(t));
  CHECK(to_json(back) == to_json(t));
  CHECK(back.config.correct_seat == Seat::debater2);
}
