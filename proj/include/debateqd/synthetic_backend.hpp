#pragma once

#include <atomic>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "debateqd/llm_gateway.hpp"

namespace debateqd::llm {

/// Hint keys understood by the synthetic backend. The debate and evolution
/// modules attach these to requests; the HTTP backend ignores them.
namespace hints {
inline constexpr const char* kStrategy = "strategy";
inline constexpr const char* kDebaterId = "debater_id";
inline constexpr const char* kStanceCorrect = "stance_correct";
inline constexpr const char* kMutationMode = "mutation_mode";  // persuasion | truth | staticgen
inline constexpr const char* kCategory = "category";
inline constexpr const char* kCategory2 = "category_2";
inline constexpr const char* kParents = "parents";              // JSON array of texts
inline constexpr const char* kParents2 = "parents_2";
}  // namespace hints

/// Parameters of the synthetic world.
///
/// Every strategy text has a latent skill: the value of an embedded
/// `[skill=x]` token when present, otherwise a seeded hash of the text mapped
/// uniformly onto [-skill_spread, skill_spread]. The judge prefers debater 1
/// with probability
///
///   sigmoid((s1 - s2) / judge_temperature + b * c1 - b * c2)
///
/// where c_i is 1 when debater i argues the correct answer and
/// b = correct_side_bonus. A mutated child has skill mean(parent skills) plus
/// Gaussian noise with standard deviation mutation_noise.
struct SyntheticAgentModel {
  double judge_temperature = 1.0;
  double correct_side_bonus = 0.0;
  std::uint64_t seed = 0;
  double mutation_noise = 0.2;
  double skill_spread = 1.0;
};

std::optional<double> parse_skill_marker(std::string_view text);
std::string skill_marker(double skill);
double extract_skill(std::string_view strategy_text, const SyntheticAgentModel& model);
double sigmoid(double x);

/// Deterministic stand-in for a chat model. Randomness for each request is
/// drawn from (model seed, request fingerprint), so results do not depend on
/// call order or concurrency.
class SyntheticBackend : public Backend {
 public:
  explicit SyntheticBackend(SyntheticAgentModel model, std::optional<std::uint64_t> fail_after_calls = std::nullopt);

  std::string id() const override;
  CompletionResponse complete(const CompletionRequest& req) override;

  const SyntheticAgentModel& model() const noexcept { return model_; }
  std::uint64_t calls() const noexcept { return calls_.load(); }

 private:
  CompletionResponse debater(const CompletionRequest& req, std::uint64_t stream) const;
  CompletionResponse judge(const CompletionRequest& req) const;
  CompletionResponse mutator(const CompletionRequest& req, std::uint64_t stream) const;

  SyntheticAgentModel model_;
  std::optional<std::uint64_t> fail_after_;
  std::atomic<std::uint64_t> calls_{0};
};

/// Feature-hashing embedder. Each text is lowercased and split on
/// whitespace; leading and trailing non-alphanumeric characters are stripped
/// from every token, and empty tokens skipped. For token t with
/// h = FNV-1a-64(t), component (h mod dim) receives +1 when bit 32 of h is
/// clear and -1 otherwise.
class HashEmbedder : public Embedder {
 public:
  explicit HashEmbedder(std::size_t dim = 256) : dim_(dim) {}
  std::string id() const override;
  std::vector<Embedding> embed_raw(const std::vector<std::string>& texts) override;
  std::size_t dimension() const noexcept { return dim_; }

 private:
  std::size_t dim_;
};

}  // namespace debateqd::llm
