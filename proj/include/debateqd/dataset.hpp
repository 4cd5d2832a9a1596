#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "debateqd/util.hpp"

namespace debateqd::dataset {

enum class Split { train, test };

std::string to_string(Split split);
Split split_from_string(std::string_view name);

/// One QuALITY question exactly as read from disk. `gold_index` is zero-based.
struct RawQuestion {
  std::string question_id;
  std::string question;
  std::vector<std::string> options;
  int gold_index = 0;
  bool hard = false;
};

/// One QuALITY line: an article and the questions asked about it.
struct RawRecord {
  std::string article_id;
  std::string title;
  std::string article;
  std::vector<RawQuestion> questions;
  std::size_t line_number = 0;
};

/// Binary-choice item used in debates. `correct_answer` plays the role of
/// answer 1 in the ground truth.
struct DebateQuestion {
  std::string id;
  std::string article_id;
  std::string article_text;
  std::string question_text;
  std::string correct_answer;
  std::string incorrect_answer;
  Split split = Split::train;
  double difficulty_rating = 400.0;
};

/// Counts of candidates removed by each selection rule, kept for provenance.
struct FilterProvenance {
  std::size_t questions_seen = 0;
  std::size_t dropped_not_hard = 0;
  std::size_t dropped_duplicate_article = 0;
  std::size_t dropped_excluded_phrase = 0;
  std::size_t dropped_degenerate_options = 0;
  std::size_t eligible = 0;
};

struct QuestionSet {
  Split split = Split::train;
  std::size_t requested_size = 0;
  std::uint64_t seed = 0;
  std::vector<DebateQuestion> questions;
  FilterProvenance provenance;
};

inline const std::vector<std::string>& excluded_phrases() {
  static const std::vector<std::string> phrases{"all of the", "both are", "none of the"};
  return phrases;
}

/// Case-insensitive substring match against the excluded phrase list.
bool contains_excluded_phrase(std::string_view option);

/// Parses QuALITY line-delimited JSON. Blank lines are skipped; any other
/// unparseable line raises DataError naming the line number.
std::vector<RawRecord> load_quality(const std::filesystem::path& path);
std::vector<RawRecord> parse_quality(std::string_view contents, const std::string& source = "<memory>");

/// Applies the five selection rules in order: hard flag, one question per
/// article (first in record order), excluded phrases, shortest articles
/// first, then reduction to the gold option plus the option after it
/// (wrapping). Ties in article length are ordered by a seeded hash.
/// Throws ShortfallError when fewer than n questions survive.
QuestionSet select_questions(const std::vector<RawRecord>& records, std::size_t n, std::uint64_t seed,
                             Split split);

json to_json(const DebateQuestion& q);
DebateQuestion question_from_json(const json& j);
json to_json(const QuestionSet& set);
QuestionSet question_set_from_json(const json& j);

void save_question_set(const std::filesystem::path& path, const QuestionSet& set);
QuestionSet load_question_set(const std::filesystem::path& path);

}  // namespace debateqd::dataset
