#include "debateqd/response_cache.hpp"

#include <fstream>

#include "debateqd/error.hpp"

namespace debateqd::llm {

std::string cache_checksum(const std::string& key, const json& response) {
  return sha256_hex(key + "\n" + response.dump());
}

CachingBackend::CachingBackend(std::shared_ptr<Backend> inner, std::optional<std::filesystem::path> path)
    : inner_(std::move(inner)), path_(std::move(path)) {
  if (!inner_) throw std::invalid_argument("cache requires an inner backend");
  if (path_) load();
}

std::string CachingBackend::key_for(const CompletionRequest& req) const {
  json j{{"backend_id", inner_->id()}, {"request", to_json(req)}};
  return sha256_hex(j.dump());
}

std::size_t CachingBackend::size() const {
  std::shared_lock lock(map_mutex_);
  return entries_.size();
}

void CachingBackend::load() {
  if (!std::filesystem::exists(*path_)) return;
  const std::string contents = read_file(*path_);
  std::size_t pos = 0;
  std::size_t line_no = 0;
  std::size_t valid_bytes = 0;
  while (pos < contents.size()) {
    const std::size_t nl = contents.find('\n', pos);
    if (nl == std::string::npos) break;  // torn final write
    ++line_no;
    const std::string_view line(contents.data() + pos, nl - pos);
    pos = nl + 1;
    if (trim(line).empty()) {
      valid_bytes = pos;
      continue;
    }
    json record;
    try {
      record = json::parse(line);
    } catch (const json::exception&) {
      throw CacheCorruption("cache " + path_->string() + ":" + std::to_string(line_no) + ": unparseable record");
    }
    const auto key = record.value("key", std::string{});
    const auto& response = record.at("response");
    if (record.value("checksum", std::string{}) != cache_checksum(key, response)) {
      throw CacheCorruption("cache " + path_->string() + ":" + std::to_string(line_no) + ": checksum mismatch");
    }
    entries_.emplace(key, response_from_json(response));
    valid_bytes = pos;
  }
  if (valid_bytes < contents.size()) std::filesystem::resize_file(*path_, valid_bytes);
}

CompletionResponse CachingBackend::complete(const CompletionRequest& req) {
  const std::string key = key_for(req);
  {
    std::shared_lock lock(map_mutex_);
    if (auto it = entries_.find(key); it != entries_.end()) {
      ++hits_;
      CompletionResponse hit = it->second;
      hit.cache_hit = true;
      return hit;
    }
  }
  CompletionResponse fresh = inner_->complete(req);
  fresh.cache_hit = false;
  const json response = to_json(fresh);
  {
    std::unique_lock lock(map_mutex_);
    if (!entries_.emplace(key, fresh).second) return fresh;
  }
  if (path_) {
    json record{{"key", key}, {"request", to_json(req)}, {"response", response},
                {"checksum", cache_checksum(key, response)}};
    const std::string line = record.dump() + "\n";
    std::lock_guard lock(file_mutex_);
    if (path_->has_parent_path()) std::filesystem::create_directories(path_->parent_path());
    std::ofstream out(*path_, std::ios::binary | std::ios::app);
    out.write(line.data(), static_cast<std::streamsize>(line.size()));
    out.flush();
    if (!out) throw GatewayError("cannot append to cache file " + path_->string());
  }
  return fresh;
}

}  // namespace debateqd::llm
