#include "debateqd/llm_gateway.hpp"

#include <algorithm>
#include <cmath>

#include "debateqd/error.hpp"

namespace debateqd::llm {

std::string to_string(RequestKind kind) {
  switch (kind) {
    case RequestKind::debater: return "debater";
    case RequestKind::judge: return "judge";
    case RequestKind::mutator: return "mutator";
    case RequestKind::embedder: return "embedder";
  }
  return "debater";
}

RequestKind request_kind_from_string(std::string_view name) {
  if (name == "debater") return RequestKind::debater;
  if (name == "judge") return RequestKind::judge;
  if (name == "mutator") return RequestKind::mutator;
  if (name == "embedder") return RequestKind::embedder;
  throw DataError("unknown request kind: " + std::string(name));
}

std::string CompletionRequest::prompt_text() const {
  std::string out;
  for (const auto& m : messages) {
    if (!out.empty()) out += '\n';
    out += m.content;
  }
  return out;
}

CompletionRequest make_judge_request(std::string prompt) {
  CompletionRequest req;
  req.messages.push_back({"user", std::move(prompt)});
  req.kind = RequestKind::judge;
  req.max_tokens = 1;
  req.guided_choice = std::vector<std::string>{"1", "2"};
  req.logprob_count = 5;
  req.top_logprobs = 10;
  return req;
}

CompletionRequest make_debater_request(std::string prompt) {
  CompletionRequest req;
  req.messages.push_back({"user", std::move(prompt)});
  req.kind = RequestKind::debater;
  req.max_tokens = 32000;
  req.temperature = 1.0;
  req.trace_logprobs = true;
  return req;
}

CompletionRequest make_mutator_request(std::string prompt) {
  CompletionRequest req = make_debater_request(std::move(prompt));
  req.kind = RequestKind::mutator;
  return req;
}

json to_json(const CompletionRequest& req) {
  json messages = json::array();
  for (const auto& m : req.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
  json j{{"messages", messages},
         {"max_tokens", req.max_tokens},
         {"kind", to_string(req.kind)},
         {"trace_logprobs", req.trace_logprobs},
         {"hints", req.hints},
         {"sample_index", req.sample_index}};
  j["temperature"] = req.temperature ? json(*req.temperature) : json(nullptr);
  j["guided_choice"] = req.guided_choice ? json(*req.guided_choice) : json(nullptr);
  j["logprob_count"] = req.logprob_count ? json(*req.logprob_count) : json(nullptr);
  j["top_logprobs"] = req.top_logprobs ? json(*req.top_logprobs) : json(nullptr);
  return j;
}

CompletionRequest request_from_json(const json& j) {
  CompletionRequest req;
  for (const auto& m : j.at("messages")) {
    req.messages.push_back({m.at("role").get<std::string>(), m.at("content").get<std::string>()});
  }
  req.max_tokens = j.at("max_tokens").get<int>();
  req.kind = request_kind_from_string(j.at("kind").get<std::string>());
  req.trace_logprobs = j.value("trace_logprobs", false);
  req.hints = j.value("hints", std::map<std::string, std::string>{});
  req.sample_index = j.value("sample_index", std::uint64_t{0});
  if (!j.at("temperature").is_null()) req.temperature = j.at("temperature").get<double>();
  if (!j.at("guided_choice").is_null()) req.guided_choice = j.at("guided_choice").get<std::vector<std::string>>();
  if (!j.at("logprob_count").is_null()) req.logprob_count = j.at("logprob_count").get<int>();
  if (!j.at("top_logprobs").is_null()) req.top_logprobs = j.at("top_logprobs").get<int>();
  return req;
}

json to_json(const CompletionResponse& resp) {
  json j{{"text", resp.text},
         {"usage", {{"prompt_tokens", resp.usage.prompt_tokens}, {"completion_tokens", resp.usage.completion_tokens}}},
         {"backend_id", resp.backend_id}};
  j["choice_logprobs"] = resp.choice_logprobs ? json(*resp.choice_logprobs) : json(nullptr);
  return j;
}

CompletionResponse response_from_json(const json& j) {
  CompletionResponse resp;
  resp.text = j.at("text").get<std::string>();
  resp.backend_id = j.value("backend_id", std::string{});
  if (j.contains("usage")) {
    resp.usage.prompt_tokens = j.at("usage").value("prompt_tokens", 0);
    resp.usage.completion_tokens = j.at("usage").value("completion_tokens", 0);
  }
  if (j.contains("choice_logprobs") && !j.at("choice_logprobs").is_null()) {
    resp.choice_logprobs = j.at("choice_logprobs").get<std::map<std::string, double>>();
  }
  return resp;
}

std::string request_fingerprint(const CompletionRequest& req) { return sha256_hex(to_json(req).dump()); }

JudgeDecision decide_from_logprobs(const std::map<std::string, double>& logprobs) {
  const auto l1 = logprobs.find("1");
  const auto l2 = logprobs.find("2");
  if (l1 == logprobs.end() || l2 == logprobs.end()) {
    throw ProtocolError("judge response missing logprob for choice " + std::string(l1 == logprobs.end() ? "1" : "2"));
  }
  JudgeDecision d;
  // p1 = e^l1 / (e^l1 + e^l2), written to avoid overflow.
  d.p1 = 1.0 / (1.0 + std::exp(l2->second - l1->second));
  d.p2 = 1.0 - d.p1;
  d.winner = d.p1 >= d.p2 ? 1 : 2;
  return d;
}

void ConcurrencyLimiter::acquire() {
  std::unique_lock lock(mutex_);
  cv_.wait(lock, [&] { return in_flight_ < limit_; });
  ++in_flight_;
}

void ConcurrencyLimiter::release() {
  {
    std::lock_guard lock(mutex_);
    --in_flight_;
  }
  cv_.notify_one();
}

void validate_request(const CompletionRequest& req) {
  if (req.messages.empty()) throw std::invalid_argument("completion request has no messages");
  if (req.max_tokens < 1) throw std::invalid_argument("max_tokens must be positive");
  if (req.temperature && *req.temperature < 0.0) throw std::invalid_argument("temperature must be non-negative");
  if (req.guided_choice && req.guided_choice->empty()) throw std::invalid_argument("guided_choice must be non-empty");
  if (req.logprob_count && *req.logprob_count < 1) throw std::invalid_argument("logprob_count must be positive");
  if (req.kind == RequestKind::judge) {
    if (!req.guided_choice || *req.guided_choice != std::vector<std::string>{"1", "2"} || req.max_tokens != 1) {
      throw std::invalid_argument("judge requests require guided_choice [\"1\",\"2\"] and max_tokens 1");
    }
  }
}

void validate_response(const CompletionRequest& req, const CompletionResponse& resp) {
  if (!req.guided_choice) return;
  const auto& choices = *req.guided_choice;
  if (std::find(choices.begin(), choices.end(), resp.text) == choices.end()) {
    throw ProtocolError("response '" + resp.text + "' is not one of the guided choices");
  }
  if (!resp.choice_logprobs) throw ProtocolError("guided-choice response carries no logprobs");
  for (const auto& c : choices) {
    if (!resp.choice_logprobs->count(c)) throw ProtocolError("guided-choice response missing logprob for '" + c + "'");
  }
}

Gateway::Gateway(std::shared_ptr<Backend> backend, std::shared_ptr<Embedder> embedder, GatewayOptions options)
    : backend_(std::move(backend)), embedder_(std::move(embedder)), limiter_(options.parallelism) {
  if (!backend_) throw std::invalid_argument("gateway requires a backend");
  backend_id_ = backend_->id();
}

CompletionResponse Gateway::complete(const CompletionRequest& req) {
  validate_request(req);
  limiter_.acquire();
  CompletionResponse resp;
  try {
    resp = backend_->complete(req);
  } catch (...) {
    limiter_.release();
    throw;
  }
  limiter_.release();
  validate_response(req, resp);
  ++requests_;
  if (resp.cache_hit) ++cache_hits_;
  if (observer_) observer_(req, resp);
  return resp;
}

JudgeDecision Gateway::judge_decision(const CompletionRequest& req) {
  if (req.kind != RequestKind::judge) throw std::invalid_argument("judge_decision requires a judge request");
  const auto resp = complete(req);
  return decide_from_logprobs(*resp.choice_logprobs);
}

Embedding normalize(Embedding v) {
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  if (norm == 0.0) {
    if (v.empty()) v.resize(1);
    std::fill(v.begin(), v.end(), 0.0);
    v[0] = 1.0;
    return v;
  }
  for (double& x : v) x /= norm;
  return v;
}

std::vector<Embedding> Gateway::embed(const std::vector<std::string>& texts) {
  if (texts.empty()) throw std::invalid_argument("embed requires at least one text");
  if (!embedder_) throw GatewayError("no embedder configured");
  limiter_.acquire();
  std::vector<Embedding> raw;
  try {
    raw = embedder_->embed_raw(texts);
  } catch (...) {
    limiter_.release();
    throw;
  }
  limiter_.release();
  if (raw.size() != texts.size()) throw ProtocolError("embedder returned wrong number of vectors");
  for (const auto& v : raw) {
    if (v.size() != raw.front().size()) throw ProtocolError("embedding dimension mismatch within batch");
  }
  for (auto& v : raw) v = normalize(std::move(v));
  return raw;
}

}  // namespace debateqd::llm
