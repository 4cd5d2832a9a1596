#include "debateqd/http_backend.hpp"

#include <thread>

#ifdef DEBATEQD_HTTPS
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include "httplib.h"

#include "debateqd/error.hpp"

namespace debateqd::llm {

json chat_request_body(const CompletionRequest& req, const std::string& model) {
  json messages = json::array();
  for (const auto& m : req.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
  json body{{"model", model}, {"messages", messages}, {"max_tokens", req.max_tokens}};
  if (req.temperature) body["temperature"] = *req.temperature;
  if (req.guided_choice) body["guided_choice"] = *req.guided_choice;
  if (req.logprob_count) {
    body["logprobs"] = *req.logprob_count;
  } else if (req.trace_logprobs) {
    body["logprobs"] = true;
  }
  if (req.top_logprobs) body["top_logprobs"] = *req.top_logprobs;
  return body;
}

CompletionResponse parse_chat_response(const json& body, const CompletionRequest& req) {
  CompletionResponse resp;
  try {
    const auto& choice = body.at("choices").at(0);
    const auto& content = choice.at("message").at("content");
    resp.text = content.is_null() ? std::string{} : content.get<std::string>();
    if (body.contains("usage") && body.at("usage").is_object()) {
      resp.usage.prompt_tokens = body.at("usage").value("prompt_tokens", 0);
      resp.usage.completion_tokens = body.at("usage").value("completion_tokens", 0);
    }
    if (req.guided_choice) {
      std::map<std::string, double> lp;
      const auto& tokens = choice.at("logprobs").at("content");
      if (!tokens.empty()) {
        const auto& first = tokens.at(0);
        if (first.contains("top_logprobs")) {
          for (const auto& t : first.at("top_logprobs")) {
            const auto tok = t.at("token").get<std::string>();
            const auto it = std::find(req.guided_choice->begin(), req.guided_choice->end(), tok);
            if (it != req.guided_choice->end() && !lp.count(tok)) lp[tok] = t.at("logprob").get<double>();
          }
        }
        const auto tok = first.at("token").get<std::string>();
        if (!lp.count(tok) &&
            std::find(req.guided_choice->begin(), req.guided_choice->end(), tok) != req.guided_choice->end()) {
          lp[tok] = first.at("logprob").get<double>();
        }
      }
      resp.choice_logprobs = std::move(lp);
    }
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("malformed chat completion response: ") + e.what());
  }
  return resp;
}

bool is_transient_status(int status) { return status == 408 || status == 409 || status == 429 || status >= 500; }

HttpBackend::HttpBackend(HttpEndpoint endpoint, RetryPolicy retry)
    : endpoint_(std::move(endpoint)), retry_(std::move(retry)) {
  if (endpoint_.base_url.empty()) throw ConfigError("HTTP backend requires an endpoint URL");
  if (retry_.max_attempts < 1) retry_.max_attempts = 1;
  if (!retry_.sleep) retry_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

std::string HttpBackend::id() const { return "http:" + endpoint_.base_url + ":" + endpoint_.model; }

json HttpBackend::post_json(const std::string& path, const json& body) {
  httplib::Client client(endpoint_.base_url);
  client.set_connection_timeout(std::chrono::seconds(30));
  client.set_read_timeout(std::chrono::seconds(endpoint_.timeout_seconds));
  client.set_write_timeout(std::chrono::seconds(60));
  httplib::Headers headers;
  if (!endpoint_.api_key.empty()) headers.emplace("Authorization", "Bearer " + endpoint_.api_key);
  const std::string payload = body.dump();

  std::mt19937_64 jitter_rng(std::random_device{}());
  std::string last_error;
  for (int attempt = 0; attempt < retry_.max_attempts; ++attempt) {
    if (attempt > 0) {
      const auto base = retry_.base_delay * (1LL << (attempt - 1));
      std::uniform_int_distribution<long long> jitter(0, std::max<long long>(1, base.count() / 4));
      retry_.sleep(std::chrono::milliseconds(base.count() + jitter(jitter_rng)));
    }
    auto res = client.Post(path, headers, payload, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 200 && res->status < 300) {
      try {
        return json::parse(res->body);
      } catch (const json::exception& e) {
        throw ProtocolError(std::string("endpoint returned non-JSON body: ") + e.what());
      }
    }
    last_error = "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200);
    if (!is_transient_status(res->status)) throw GatewayError(endpoint_.base_url + path + " failed: " + last_error);
  }
  throw GatewayError(endpoint_.base_url + path + " unreachable after " + std::to_string(retry_.max_attempts) +
                     " attempts: " + last_error);
}

CompletionResponse HttpBackend::complete(const CompletionRequest& req) {
  const json reply = post_json(endpoint_.chat_path, chat_request_body(req, endpoint_.model));
  CompletionResponse resp = parse_chat_response(reply, req);
  resp.backend_id = id();
  return resp;
}

HttpEmbedder::HttpEmbedder(HttpEndpoint endpoint, RetryPolicy retry)
    : transport_(endpoint, std::move(retry)), endpoint_(std::move(endpoint)) {}

std::string HttpEmbedder::id() const { return "http-embed:" + endpoint_.base_url + ":" + endpoint_.model; }

std::vector<Embedding> HttpEmbedder::embed_raw(const std::vector<std::string>& texts) {
  const json reply = transport_.post_json(endpoint_.embeddings_path, {{"model", endpoint_.model}, {"input", texts}});
  std::vector<Embedding> out(texts.size());
  try {
    const auto& data = reply.at("data");
    if (data.size() != texts.size()) throw ProtocolError("embedding endpoint returned wrong number of vectors");
    for (std::size_t i = 0; i < data.size(); ++i) {
      const std::size_t index = data.at(i).value("index", i);
      if (index >= out.size()) throw ProtocolError("embedding index out of range");
      out[index] = data.at(i).at("embedding").get<Embedding>();
    }
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("malformed embedding response: ") + e.what());
  }
  return out;
}

}  // namespace debateqd::llm
