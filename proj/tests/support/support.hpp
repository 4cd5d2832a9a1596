#pragma once

// Shared helpers for unit and acceptance tests.

#include <atomic>
#include <cmath>
#include <deque>
#include <filesystem>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include "debateqd/dataset.hpp"
#include "debateqd/error.hpp"
#include "debateqd/llm_gateway.hpp"
#include "debateqd/synthetic_backend.hpp"

namespace testsupport {

namespace fs = std::filesystem;
using debateqd::json;

inline fs::path fixture(const std::string& name) { return fs::path(DEBATEQD_FIXTURE_DIR) / name; }
inline fs::path data_file(const std::string& name) { return fs::path(DEBATEQD_DATA_DIR) / name; }

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("debateqd-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

inline debateqd::dataset::DebateQuestion question(const std::string& id, const std::string& article = "ARTICLE-BODY") {
  debateqd::dataset::DebateQuestion q;
  q.id = id;
  q.article_id = "art-" + id;
  q.article_text = article + " for " + id;
  q.question_text = "What happened in " + id + "?";
  q.correct_answer = "the right answer to " + id;
  q.incorrect_answer = "the wrong answer to " + id;
  return q;
}

inline std::vector<debateqd::dataset::DebateQuestion> questions(std::size_t n) {
  std::vector<debateqd::dataset::DebateQuestion> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(question("q" + std::to_string(i)));
  return out;
}

inline std::unique_ptr<debateqd::llm::Gateway> synthetic_gateway(debateqd::llm::SyntheticAgentModel model = {},
                                                                 std::size_t parallelism = 4) {
  return std::make_unique<debateqd::llm::Gateway>(std::make_shared<debateqd::llm::SyntheticBackend>(model),
                                                  std::make_shared<debateqd::llm::HashEmbedder>(),
                                                  debateqd::llm::GatewayOptions{parallelism});
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Backend that replays canned texts in order and records every request.
class ScriptedBackend : public debateqd::llm::Backend {
 public:
  explicit ScriptedBackend(std::vector<std::string> replies) : replies_(replies.begin(), replies.end()) {}
  std::string id() const override { return "scripted"; }
  debateqd::llm::CompletionResponse complete(const debateqd::llm::CompletionRequest& req) override {
    std::lock_guard lock(mutex_);
    requests.push_back(req);
    debateqd::llm::CompletionResponse resp;
    if (req.kind == debateqd::llm::RequestKind::judge) {
      resp.text = "1";
      resp.choice_logprobs = std::map<std::string, double>{{"1", std::log(0.5)}, {"2", std::log(0.5)}};
      return resp;
    }
    if (replies_.empty()) throw debateqd::GatewayError("script exhausted");
    resp.text = replies_.front();
    replies_.pop_front();
    return resp;
  }
  std::vector<debateqd::llm::CompletionRequest> requests;

 private:
  std::mutex mutex_;
  std::deque<std::string> replies_;
};

}  // namespace testsupport
