#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "json.hpp"

namespace debateqd {

using json = nlohmann::json;

inline constexpr std::string_view kCodeVersion = "0.1.0";

// Hashing ------------------------------------------------------------------

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

/// First 8 bytes of the SHA-256 digest as an integer.
std::uint64_t sha256_u64(std::string_view data);

constexpr std::uint64_t fnv1a64(std::string_view data) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Child seed for a named stream: master -> per-generation -> per-match.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::string_view label) noexcept {
  return splitmix64(parent ^ fnv1a64(label));
}

// Text -----------------------------------------------------------------------

/// Maximal runs of non-whitespace.
std::vector<std::string_view> split_words(std::string_view text);
std::size_t word_count(std::string_view text);
std::string to_lower(std::string_view text);
std::string trim(std::string_view text);
/// Shortest decimal representation that round-trips.
std::string format_double(double value);
/// Fixed-point with `digits` decimals, for CSV output.
std::string format_fixed(double value, int digits = 6);

// Files ----------------------------------------------------------------------

std::string read_file(const std::filesystem::path& path);
/// Writes via a temporary file and rename, so readers never see a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
void write_json_file(const std::filesystem::path& path, const json& value);
json read_json_file(const std::filesystem::path& path);
void append_jsonl(const std::filesystem::path& path, const std::vector<json>& rows);
std::vector<json> read_jsonl(const std::filesystem::path& path);

// Concurrency ----------------------------------------------------------------

/// Runs fn(i) for i in [0, n) on up to `workers` threads. The first exception
/// thrown by any task is rethrown after all threads have joined.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      if (failed.load()) return;
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        failed.store(true);
      }
    }
  };
  {
    std::vector<std::jthread> threads;
    threads.reserve(workers);
    for (std::size_t t = 0; t < workers; ++t) threads.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace debateqd
