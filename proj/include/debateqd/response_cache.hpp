#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>

#include "debateqd/llm_gateway.hpp"

namespace debateqd::llm {

/// Persistent response cache wrapped around another backend.
///
/// The file is append-only JSON lines; each record holds the cache key, the
/// request, the response and a SHA-256 checksum over key and response. A
/// checksum mismatch on load raises CacheCorruption. A final line without a
/// trailing newline is a torn write from an interrupted process and is
/// discarded. Without a path the cache lives in memory only.
class CachingBackend : public Backend {
 public:
  CachingBackend(std::shared_ptr<Backend> inner, std::optional<std::filesystem::path> path);

  std::string id() const override { return inner_->id(); }
  CompletionResponse complete(const CompletionRequest& req) override;

  /// SHA-256 over the canonical request JSON combined with the backend id.
  std::string key_for(const CompletionRequest& req) const;
  std::size_t size() const;
  std::uint64_t hits() const noexcept { return hits_.load(); }

 private:
  void load();

  std::shared_ptr<Backend> inner_;
  std::optional<std::filesystem::path> path_;
  mutable std::shared_mutex map_mutex_;
  std::mutex file_mutex_;
  std::unordered_map<std::string, CompletionResponse> entries_;
  std::atomic<std::uint64_t> hits_{0};
};

std::string cache_checksum(const std::string& key, const json& response);

}  // namespace debateqd::llm
