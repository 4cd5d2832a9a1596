#pragma once

#include <chrono>
#include <functional>
#include <random>
#include <string>

#include "debateqd/llm_gateway.hpp"

namespace debateqd::llm {

struct HttpEndpoint {
  /// Scheme, host and optional port, e.g. "http://localhost:8000".
  std::string base_url;
  std::string model;
  std::string api_key;
  std::string chat_path = "/v1/chat/completions";
  std::string embeddings_path = "/v1/embeddings";
  int timeout_seconds = 600;
};

struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds base_delay{1000};
  /// Test hook; defaults to std::this_thread::sleep_for.
  std::function<void(std::chrono::milliseconds)> sleep;
};

/// Wire body for an OpenAI-style chat completion with the vLLM
/// `guided_choice` extension. Hints and sample index are not sent.
json chat_request_body(const CompletionRequest& req, const std::string& model);

/// Extracts text, usage and per-choice logprobs from a chat completion
/// response body. Guided-choice logprobs come from the first generated
/// token's top_logprobs (falling back to the sampled token itself).
CompletionResponse parse_chat_response(const json& body, const CompletionRequest& req);

/// Status codes that are retried: 408, 409, 429 and all 5xx.
bool is_transient_status(int status);

class HttpBackend : public Backend {
 public:
  HttpBackend(HttpEndpoint endpoint, RetryPolicy retry = {});
  std::string id() const override;
  CompletionResponse complete(const CompletionRequest& req) override;

  /// POSTs JSON with bounded exponential backoff (base * 2^k plus jitter).
  json post_json(const std::string& path, const json& body);

 private:
  HttpEndpoint endpoint_;
  RetryPolicy retry_;
};

class HttpEmbedder : public Embedder {
 public:
  HttpEmbedder(HttpEndpoint endpoint, RetryPolicy retry = {});
  std::string id() const override;
  std::vector<Embedding> embed_raw(const std::vector<std::string>& texts) override;

 private:
  HttpBackend transport_;
  HttpEndpoint endpoint_;
};

}  // namespace debateqd::llm
