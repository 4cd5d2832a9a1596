#include <atomic>
#include <fstream>

#include "debateqd/error.hpp"
#include "debateqd/util.hpp"
#include "doctest.h"
#include "support/support.hpp"

using namespace debateqd;

TEST_CASE("sha256 matches the published test vectors") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_u64("abc") == 0xba7816bf8f01cfeaULL);
}

TEST_CASE("fnv1a64 and derive_seed are stable") {
  // Reference values for FNV-1a 64.
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(derive_seed(1, "x") == derive_seed(1, "x"));
  CHECK(derive_seed(1, "x") != derive_seed(2, "x"));
  CHECK(derive_seed(1, "x") != derive_seed(1, "y"));
}

TEST_CASE("split_words uses maximal whitespace runs") {
  const std::string text = "  one\ttwo \n\n three  four\r\nfive ";
  const auto words = split_words(text);
  REQUIRE(words.size() == 5);
  CHECK(words[0] == "one");
  CHECK(words[4] == "five");
  CHECK(word_count("") == 0);
  CHECK(word_count(" \t\n ") == 0);
}

TEST_CASE("format_double round-trips and normalises negative zero") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
  CHECK(format_fixed(-0.0000001, 3) == "0.000");
  CHECK(format_fixed(2.5, 2) == "2.50");
}

TEST_CASE("atomic writes and JSON lines") {
  testsupport::TempDir tmp("util");
  const auto file = tmp.path() / "nested" / "a.json";
  write_json_file(file, json{{"k", 1}});
  CHECK(read_json_file(file).at("k") == 1);
  const auto lines = tmp.path() / "rows.jsonl";
  append_jsonl(lines, {json{{"i", 1}}, json{{"i", 2}}});
  append_jsonl(lines, {json{{"i", 3}}});
  const auto rows = read_jsonl(lines);
  REQUIRE(rows.size() == 3);
  CHECK(rows[2].at("i") == 3);

  std::ofstream(lines, std::ios::app) << "{broken\n";
  CHECK_THROWS_AS(read_jsonl(lines), DataError);
  CHECK_THROWS_AS(read_file(tmp.path() / "absent"), DataError);
}

TEST_CASE("parallel_for visits every index once and rethrows") {
  std::vector<std::atomic<int>> hits(200);
  parallel_for(hits.size(), 8, [&](std::size_t i) { hits[i]++; });
  for (auto& h : hits) CHECK(h.load() == 1);
  CHECK_THROWS_AS(parallel_for(50, 4,
                               [](std::size_t i) {
                                 if (i == 17) throw std::runtime_error("boom");
                               }),
                  std::runtime_error);
}
