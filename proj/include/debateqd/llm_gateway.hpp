#pragma once

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "debateqd/util.hpp"

namespace debateqd::llm {

enum class RequestKind { debater, judge, mutator, embedder };

std::string to_string(RequestKind kind);
RequestKind request_kind_from_string(std::string_view name);

struct Message {
  std::string role;
  std::string content;
};

/// One chat-completion call. Decoding fields map one-to-one onto the wire
/// body; `hints` and `sample_index` never leave the process. Hints carry
/// structured context for the synthetic backend; `sample_index` separates
/// repeated samples of an identical prompt in the cache.
struct CompletionRequest {
  std::vector<Message> messages;
  int max_tokens = 1;
  std::optional<double> temperature;
  std::optional<std::vector<std::string>> guided_choice;
  std::optional<int> logprob_count;
  std::optional<int> top_logprobs;
  bool trace_logprobs = false;
  RequestKind kind = RequestKind::debater;
  std::map<std::string, std::string> hints;
  std::uint64_t sample_index = 0;

  /// Concatenated message contents.
  std::string prompt_text() const;
};

/// Judge decoding: max_tokens=1, guided choice over "1"/"2", logprobs=5,
/// top_logprobs=10.
CompletionRequest make_judge_request(std::string prompt);
/// Debater decoding: temperature 1, logprob tracing, max_tokens 32000.
CompletionRequest make_debater_request(std::string prompt);
/// Mutators reuse the debater decoding settings.
CompletionRequest make_mutator_request(std::string prompt);

struct Usage {
  int prompt_tokens = 0;
  int completion_tokens = 0;
};

struct CompletionResponse {
  std::string text;
  std::optional<std::map<std::string, double>> choice_logprobs;
  Usage usage;
  std::string backend_id;
  bool cache_hit = false;
};

json to_json(const CompletionRequest& req);
CompletionRequest request_from_json(const json& j);
json to_json(const CompletionResponse& resp);
CompletionResponse response_from_json(const json& j);

/// SHA-256 over the canonical JSON of the request (all fields, including
/// hints and sample index).
std::string request_fingerprint(const CompletionRequest& req);

class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string id() const = 0;
  virtual CompletionResponse complete(const CompletionRequest& req) = 0;
};

using Embedding = std::vector<double>;

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::string id() const = 0;
  /// Raw (not necessarily normalised) vectors, one per text.
  virtual std::vector<Embedding> embed_raw(const std::vector<std::string>& texts) = 0;
};

struct JudgeDecision {
  int winner = 1;
  double p1 = 0.5;
  double p2 = 0.5;
};

/// Renormalises exp(logprob) over "1" and "2"; ties go to "1".
/// Throws ProtocolError when either logprob is missing.
JudgeDecision decide_from_logprobs(const std::map<std::string, double>& logprobs);

/// Counting limiter on in-flight requests.
class ConcurrencyLimiter {
 public:
  explicit ConcurrencyLimiter(std::size_t limit) : limit_(limit == 0 ? 1 : limit) {}
  void acquire();
  void release();
  std::size_t limit() const noexcept { return limit_; }

 private:
  std::mutex mutex_;
  std::condition_variable cv_;
  std::size_t limit_;
  std::size_t in_flight_ = 0;
};

struct GatewayOptions {
  std::size_t parallelism = 8;
};

/// Shared entry point for all model traffic. Validates requests and
/// responses against the guided-choice contract and bounds concurrency.
class Gateway {
 public:
  using Observer = std::function<void(const CompletionRequest&, const CompletionResponse&)>;

  Gateway(std::shared_ptr<Backend> backend, std::shared_ptr<Embedder> embedder, GatewayOptions options = {});

  CompletionResponse complete(const CompletionRequest& req);
  JudgeDecision judge_decision(const CompletionRequest& req);
  /// One L2-normalised vector per text.
  std::vector<Embedding> embed(const std::vector<std::string>& texts);

  std::size_t parallelism() const noexcept { return limiter_.limit(); }
  std::uint64_t request_count() const noexcept { return requests_.load(); }
  std::uint64_t cache_hits() const noexcept { return cache_hits_.load(); }
  const std::string& backend_id() const noexcept { return backend_id_; }

  /// Called after every successful completion; must be thread-safe.
  void set_observer(Observer observer) { observer_ = std::move(observer); }

 private:
  std::shared_ptr<Backend> backend_;
  std::shared_ptr<Embedder> embedder_;
  std::string backend_id_;
  ConcurrencyLimiter limiter_;
  std::atomic<std::uint64_t> requests_{0};
  std::atomic<std::uint64_t> cache_hits_{0};
  Observer observer_;
};

/// Validates a request: non-empty guided choice, judge contract.
void validate_request(const CompletionRequest& req);
/// Validates a response against the request's guided choice.
void validate_response(const CompletionRequest& req, const CompletionResponse& resp);

/// Normalises to unit L2 length. A zero vector becomes the first basis vector.
Embedding normalize(Embedding v);

}  // namespace debateqd::llm
