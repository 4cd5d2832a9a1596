#include "debateqd/dataset.hpp"

#include <algorithm>
#include <set>
#include <tuple>

#include "debateqd/error.hpp"

namespace debateqd::dataset {

std::string to_string(Split split) { return split == Split::train ? "train" : "test"; }

Split split_from_string(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "test") return Split::test;
  throw DataError("unknown split: " + std::string(name));
}

bool contains_excluded_phrase(std::string_view option) {
  const std::string lowered = to_lower(option);
  return std::any_of(excluded_phrases().begin(), excluded_phrases().end(),
                     [&](const std::string& p) { return lowered.find(p) != std::string::npos; });
}

namespace {

std::string string_field(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return {};
  const auto& v = j.at(key);
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

bool hard_flag(const json& q) {
  for (const char* key : {"hard", "difficult", "is_hard"}) {
    if (!q.contains(key)) continue;
    const auto& v = q.at(key);
    if (v.is_boolean()) return v.get<bool>();
    if (v.is_number()) return v.get<double>() != 0.0;
    if (v.is_string()) {
      const std::string s = to_lower(v.get<std::string>());
      return s == "true" || s == "1";
    }
  }
  return false;
}

RawRecord parse_record(const json& j, std::size_t line_no, const std::string& source) {
  auto fail = [&](const std::string& why) {
    return DataError(source + ":" + std::to_string(line_no) + ": " + why);
  };
  if (!j.is_object()) throw fail("record is not a JSON object");
  RawRecord rec;
  rec.line_number = line_no;
  rec.article_id = string_field(j, "article_id");
  rec.title = string_field(j, "title");
  rec.article = string_field(j, "article");
  if (rec.article_id.empty()) throw fail("record missing article_id");
  if (!j.contains("questions") || !j.at("questions").is_array()) throw fail("record missing questions array");
  std::size_t index = 0;
  for (const auto& q : j.at("questions")) {
    RawQuestion raw;
    raw.question = string_field(q, "question");
    raw.question_id = string_field(q, "question_unique_id");
    if (raw.question_id.empty()) raw.question_id = rec.article_id + "-q" + std::to_string(index);
    if (!q.contains("options") || !q.at("options").is_array()) throw fail("question " + raw.question_id + " missing options");
    for (const auto& o : q.at("options")) raw.options.push_back(o.is_string() ? o.get<std::string>() : o.dump());
    if (!q.contains("gold_label") || !q.at("gold_label").is_number_integer()) {
      throw fail("question " + raw.question_id + " missing gold label");
    }
    // QuALITY gold labels are one-based.
    const int gold = q.at("gold_label").get<int>();
    if (gold < 1 || gold > static_cast<int>(raw.options.size())) {
      throw fail("question " + raw.question_id + " gold label out of range");
    }
    raw.gold_index = gold - 1;
    raw.hard = hard_flag(q);
    rec.questions.push_back(std::move(raw));
    ++index;
  }
  return rec;
}

}  // namespace

std::vector<RawRecord> parse_quality(std::string_view contents, const std::string& source) {
  std::vector<RawRecord> records;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= contents.size()) {
    const std::size_t end = std::min(contents.find('\n', pos), contents.size());
    const std::string_view line = contents.substr(pos, end - pos);
    ++line_no;
    pos = end + 1;
    if (trim(line).empty()) {
      if (end == contents.size()) break;
      continue;
    }
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError(source + ":" + std::to_string(line_no) + ": malformed JSON: " + e.what());
    }
    records.push_back(parse_record(j, line_no, source));
    if (end == contents.size()) break;
  }
  return records;
}

std::vector<RawRecord> load_quality(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DataError("QuALITY file not found: " + path.string());
  return parse_quality(read_file(path), path.string());
}

QuestionSet select_questions(const std::vector<RawRecord>& records, std::size_t n, std::uint64_t seed,
                             Split split) {
  if (n == 0) throw DataError("select_questions: n must be positive");

  struct Candidate {
    const RawRecord* record;
    const RawQuestion* question;
  };

  QuestionSet set;
  set.split = split;
  set.requested_size = n;
  set.seed = seed;
  auto& prov = set.provenance;

  // Rule 1: hard flag.
  std::vector<Candidate> hard;
  for (const auto& rec : records) {
    for (const auto& q : rec.questions) {
      ++prov.questions_seen;
      if (!q.hard) {
        ++prov.dropped_not_hard;
        continue;
      }
      hard.push_back({&rec, &q});
    }
  }

  // Rule 2: at most one question per article, first in record order.
  std::vector<Candidate> unique;
  std::set<std::string> seen_articles;
  for (const auto& c : hard) {
    if (!seen_articles.insert(c.record->article_id).second) {
      ++prov.dropped_duplicate_article;
      continue;
    }
    unique.push_back(c);
  }

  // Rule 3: excluded phrases in any option. Options whose gold and distractor
  // coincide are dropped too, since they cannot be debated.
  std::vector<Candidate> clean;
  for (const auto& c : unique) {
    const auto& opts = c.question->options;
    if (std::any_of(opts.begin(), opts.end(), [](const std::string& o) { return contains_excluded_phrase(o); })) {
      ++prov.dropped_excluded_phrase;
      continue;
    }
    const std::size_t gold = static_cast<std::size_t>(c.question->gold_index);
    if (opts.size() < 2 || opts[gold] == opts[(gold + 1) % opts.size()]) {
      ++prov.dropped_degenerate_options;
      continue;
    }
    clean.push_back(c);
  }
  prov.eligible = clean.size();

  // Rule 4: shortest articles first; seeded hash breaks length ties.
  auto key = [seed](const Candidate& c) {
    return std::make_tuple(c.record->article.size(), derive_seed(seed, c.record->article_id),
                           c.record->article_id);
  };
  std::stable_sort(clean.begin(), clean.end(), [&](const Candidate& a, const Candidate& b) { return key(a) < key(b); });

  if (clean.size() < n) throw ShortfallError(clean.size(), n);

  // Rule 5: gold option plus the option immediately after it.
  for (std::size_t i = 0; i < n; ++i) {
    const auto& c = clean[i];
    const auto& opts = c.question->options;
    const std::size_t gold = static_cast<std::size_t>(c.question->gold_index);
    DebateQuestion q;
    q.id = c.question->question_id;
    q.article_id = c.record->article_id;
    q.article_text = c.record->article;
    q.question_text = c.question->question;
    q.correct_answer = opts[gold];
    q.incorrect_answer = opts[(gold + 1) % opts.size()];
    q.split = split;
    set.questions.push_back(std::move(q));
  }
  return set;
}

json to_json(const DebateQuestion& q) {
  return json{{"id", q.id},
              {"article_id", q.article_id},
              {"article_text", q.article_text},
              {"question_text", q.question_text},
              {"correct_answer", q.correct_answer},
              {"incorrect_answer", q.incorrect_answer},
              {"split", to_string(q.split)},
              {"difficulty_rating", q.difficulty_rating}};
}

DebateQuestion question_from_json(const json& j) {
  DebateQuestion q;
  q.id = j.at("id").get<std::string>();
  q.article_id = j.at("article_id").get<std::string>();
  q.article_text = j.at("article_text").get<std::string>();
  q.question_text = j.at("question_text").get<std::string>();
  q.correct_answer = j.at("correct_answer").get<std::string>();
  q.incorrect_answer = j.at("incorrect_answer").get<std::string>();
  q.split = split_from_string(j.at("split").get<std::string>());
  q.difficulty_rating = j.value("difficulty_rating", 400.0);
  return q;
}

json to_json(const QuestionSet& set) {
  json questions = json::array();
  for (const auto& q : set.questions) questions.push_back(to_json(q));
  const auto& p = set.provenance;
  return json{{"split", to_string(set.split)},
              {"requested_size", set.requested_size},
              {"seed", set.seed},
              {"filter_provenance",
               {{"rules",
                 {"hard_flag", "one_question_per_article", "excluded_phrases", "shortest_articles_first",
                  "gold_plus_next_option"}},
                {"excluded_phrases", excluded_phrases()},
                {"questions_seen", p.questions_seen},
                {"dropped_not_hard", p.dropped_not_hard},
                {"dropped_duplicate_article", p.dropped_duplicate_article},
                {"dropped_excluded_phrase", p.dropped_excluded_phrase},
                {"dropped_degenerate_options", p.dropped_degenerate_options},
                {"eligible", p.eligible}}},
              {"questions", questions}};
}

QuestionSet question_set_from_json(const json& j) {
  QuestionSet set;
  set.split = split_from_string(j.at("split").get<std::string>());
  set.requested_size = j.at("requested_size").get<std::size_t>();
  set.seed = j.at("seed").get<std::uint64_t>();
  const auto& p = j.at("filter_provenance");
  set.provenance.questions_seen = p.value("questions_seen", std::size_t{0});
  set.provenance.dropped_not_hard = p.value("dropped_not_hard", std::size_t{0});
  set.provenance.dropped_duplicate_article = p.value("dropped_duplicate_article", std::size_t{0});
  set.provenance.dropped_excluded_phrase = p.value("dropped_excluded_phrase", std::size_t{0});
  set.provenance.dropped_degenerate_options = p.value("dropped_degenerate_options", std::size_t{0});
  set.provenance.eligible = p.value("eligible", std::size_t{0});
  for (const auto& q : j.at("questions")) set.questions.push_back(question_from_json(q));
  return set;
}

void save_question_set(const std::filesystem::path& path, const QuestionSet& set) {
  write_json_file(path, to_json(set));
}

QuestionSet load_question_set(const std::filesystem::path& path) {
  try {
    return question_set_from_json(read_json_file(path));
  } catch (const json::exception& e) {
    throw DataError("malformed question set " + path.string() + ": " + e.what());
  }
}

}  // namespace debateqd::dataset
