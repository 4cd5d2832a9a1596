#include "debateqd/synthetic_backend.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <numbers>
#include <vector>

#include "debateqd/error.hpp"

namespace debateqd::llm {

namespace {

constexpr std::array<std::string_view, 24> kVocabulary{
    "evidence", "clearly",  "passage",  "shows",     "therefore", "because",  "consider", "moreover",
    "indeed",   "reading",  "detail",   "supports",  "claim",     "context",  "careful",  "argument",
    "plainly",  "suggests", "narrative", "character", "motive",   "outcome",  "implies",  "stance"};

class Stream {
 public:
  explicit Stream(std::uint64_t state) : state_(state) {}
  std::uint64_t next() { return state_ = splitmix64(state_); }
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double normal() {
    // Box-Muller; u1 is kept away from zero.
    const double u1 = (static_cast<double>(next() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)); }

 private:
  std::uint64_t state_;
};

std::string filler(Stream& rng, std::size_t min_words, std::size_t max_words) {
  const std::size_t n = min_words + rng.below(max_words - min_words + 1);
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) out += ' ';
    out += kVocabulary[rng.below(kVocabulary.size())];
  }
  return out;
}

double log_sigmoid(double x) {
  // log(1 / (1 + e^-x)) = -softplus(-x)
  const double z = -x;
  const double softplus = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
  return -softplus;
}

std::optional<double> parse_number(std::string_view s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr == s.data()) return std::nullopt;
  return v;
}

std::vector<std::string> parents_from_hint(const CompletionRequest& req, const char* key) {
  const auto it = req.hints.find(key);
  if (it == req.hints.end()) return {};
  try {
    return json::parse(it->second).get<std::vector<std::string>>();
  } catch (const json::exception&) {
    throw ProtocolError(std::string("synthetic backend: malformed hint ") + key);
  }
}

struct ArgumentMarker {
  int debater = 0;
  double skill = 0.0;
  bool correct = false;
};

// Markers look like "[arg d=1 skill=0.25 correct=1]".
std::vector<ArgumentMarker> find_markers(std::string_view text) {
  std::vector<ArgumentMarker> out;
  constexpr std::string_view kOpen = "[arg d=";
  std::size_t pos = 0;
  while ((pos = text.find(kOpen, pos)) != std::string_view::npos) {
    const std::size_t close = text.find(']', pos);
    if (close == std::string_view::npos) break;
    const std::string_view body = text.substr(pos + kOpen.size(), close - pos - kOpen.size());
    pos = close;
    const auto words = split_words(body);
    if (words.size() != 3 || !words[1].starts_with("skill=") || !words[2].starts_with("correct=")) continue;
    ArgumentMarker m;
    const auto d = parse_number(words[0]);
    const auto s = parse_number(words[1].substr(6));
    if (!d || !s) continue;
    m.debater = static_cast<int>(*d);
    m.skill = *s;
    m.correct = words[2].substr(8) == "1";
    out.push_back(m);
  }
  return out;
}

double mean_skill(const std::vector<std::string>& texts, const SyntheticAgentModel& model) {
  if (texts.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& t : texts) sum += extract_skill(t, model);
  return sum / static_cast<double>(texts.size());
}

}  // namespace

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::optional<double> parse_skill_marker(std::string_view text) {
  constexpr std::string_view kOpen = "[skill=";
  const std::size_t pos = text.rfind(kOpen);
  if (pos == std::string_view::npos) return std::nullopt;
  const std::size_t close = text.find(']', pos);
  if (close == std::string_view::npos) return std::nullopt;
  return parse_number(text.substr(pos + kOpen.size(), close - pos - kOpen.size()));
}

std::string skill_marker(double skill) { return "[skill=" + format_double(skill) + "]"; }

double extract_skill(std::string_view strategy_text, const SyntheticAgentModel& model) {
  if (auto s = parse_skill_marker(strategy_text)) return *s;
  const std::uint64_t h = derive_seed(model.seed, strategy_text);
  const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
  return model.skill_spread * (2.0 * u - 1.0);
}

SyntheticBackend::SyntheticBackend(SyntheticAgentModel model, std::optional<std::uint64_t> fail_after_calls)
    : model_(model), fail_after_(fail_after_calls) {
  if (!(model_.judge_temperature > 0.0)) throw std::invalid_argument("judge_temperature must be positive");
}

std::string SyntheticBackend::id() const {
  return "synthetic:v1:seed=" + std::to_string(model_.seed) + ":tau=" + format_double(model_.judge_temperature) +
         ":b=" + format_double(model_.correct_side_bonus) + ":noise=" + format_double(model_.mutation_noise) +
         ":spread=" + format_double(model_.skill_spread);
}

CompletionResponse SyntheticBackend::complete(const CompletionRequest& req) {
  const std::uint64_t n = calls_.fetch_add(1);
  if (fail_after_ && n >= *fail_after_) {
    throw GatewayError("synthetic backend: injected failure after " + std::to_string(*fail_after_) + " calls");
  }
  const std::uint64_t stream = model_.seed ^ sha256_u64(request_fingerprint(req));
  CompletionResponse resp;
  switch (req.kind) {
    case RequestKind::judge: resp = judge(req); break;
    case RequestKind::mutator: resp = mutator(req, stream); break;
    case RequestKind::debater:
    case RequestKind::embedder: resp = debater(req, stream); break;
  }
  resp.backend_id = id();
  resp.usage.prompt_tokens = static_cast<int>(word_count(req.prompt_text()));
  resp.usage.completion_tokens = static_cast<int>(word_count(resp.text));
  return resp;
}

CompletionResponse SyntheticBackend::debater(const CompletionRequest& req, std::uint64_t stream) const {
  Stream rng(stream);
  const auto strategy = req.hints.find(hints::kStrategy);
  const auto id = req.hints.find(hints::kDebaterId);
  const auto correct = req.hints.find(hints::kStanceCorrect);
  const double skill = strategy == req.hints.end() ? 0.0 : extract_skill(strategy->second, model_);
  const std::string d = id == req.hints.end() ? "1" : id->second;
  const bool is_correct = correct != req.hints.end() && correct->second == "1";
  CompletionResponse resp;
  resp.text = "[arg d=" + d + " skill=" + format_double(skill) + " correct=" + (is_correct ? "1" : "0") + "] " +
              filler(rng, 20, 60);
  return resp;
}

CompletionResponse SyntheticBackend::judge(const CompletionRequest& req) const {
  double skill[3] = {0.0, 0.0, 0.0};
  double correct[3] = {0.0, 0.0, 0.0};
  int seen[3] = {0, 0, 0};
  for (const auto& m : find_markers(req.prompt_text())) {
    if (m.debater != 1 && m.debater != 2) continue;
    skill[m.debater] += m.skill;
    correct[m.debater] = std::max(correct[m.debater], m.correct ? 1.0 : 0.0);
    ++seen[m.debater];
  }
  for (int d : {1, 2}) {
    if (seen[d]) skill[d] /= seen[d];
  }
  const double logit = (skill[1] - skill[2]) / model_.judge_temperature +
                       model_.correct_side_bonus * (correct[1] - correct[2]);
  CompletionResponse resp;
  const double lp1 = log_sigmoid(logit);
  const double lp2 = log_sigmoid(-logit);
  resp.choice_logprobs = std::map<std::string, double>{{"1", lp1}, {"2", lp2}};
  resp.text = lp1 >= lp2 ? "1" : "2";
  return resp;
}

CompletionResponse SyntheticBackend::mutator(const CompletionRequest& req, std::uint64_t stream) const {
  Stream rng(stream);
  const auto mode_it = req.hints.find(hints::kMutationMode);
  const std::string mode = mode_it == req.hints.end() ? "persuasion" : mode_it->second;
  const auto category_it = req.hints.find(hints::kCategory);
  const std::string category = category_it == req.hints.end() ? "General" : category_it->second;

  auto child = [&](const std::vector<std::string>& parents, const std::string& cat) {
    const double base = parents.empty() ? extract_skill(req.prompt_text(), model_) : mean_skill(parents, model_);
    const double skill = base + model_.mutation_noise * rng.normal();
    return cat + " tactic: " + filler(rng, 8, 30) + " " + skill_marker(skill);
  };

  json answer;
  answer["reasoning"] = "synthetic mutation";
  if (mode == "truth") {
    const auto cat2_it = req.hints.find(hints::kCategory2);
    const std::string category2 = cat2_it == req.hints.end() ? category : cat2_it->second;
    answer["new_debater_1_prompt"] = child(parents_from_hint(req, hints::kParents), category);
    answer["new_debater_2_prompt"] = child(parents_from_hint(req, hints::kParents2), category2);
  } else {
    answer["new_debater_prompt"] = child(parents_from_hint(req, hints::kParents), category);
  }
  CompletionResponse resp;
  resp.text = answer.dump();
  return resp;
}

std::string HashEmbedder::id() const { return "hash-embedder:v1:dim=" + std::to_string(dim_); }

std::vector<Embedding> HashEmbedder::embed_raw(const std::vector<std::string>& texts) {
  std::vector<Embedding> out;
  out.reserve(texts.size());
  auto alnum = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; };
  for (const auto& text : texts) {
    Embedding v(dim_, 0.0);
    const std::string lowered = to_lower(text);
    for (auto token : split_words(lowered)) {
      while (!token.empty() && !alnum(token.front())) token.remove_prefix(1);
      while (!token.empty() && !alnum(token.back())) token.remove_suffix(1);
      if (token.empty()) continue;
      const std::uint64_t h = fnv1a64(token);
      v[h % dim_] += ((h >> 32) & 1U) ? -1.0 : 1.0;
    }
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace debateqd::llm
