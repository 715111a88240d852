#include <fstream>
#include <random>

#include "affinity/digest.hpp"
#include "affinity/ingest.hpp"
#include "doctest.h"
#include "json.hpp"
#include "test_support.hpp"

using namespace affinity;
using affinity::testing::TempDir;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::span<const std::byte> bytes_of(const std::string& s) { return std::as_bytes(std::span(s.data(), s.size())); }

void write_file(const fs::path& p, const std::string& content) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << content;
}

std::string binary_of(const IdSet& s) {
  auto b = encode_ids1(s);
  return std::string(reinterpret_cast<const char*>(b.data()), b.size());
}

IngestError::Code code_of(auto&& fn) {
  try {
    fn();
  } catch (const IngestError& e) {
    return e.code();
  }
  FAIL("expected IngestError");
  return IngestError::Code::kUnreadable;
}

// Small dataset: two candidates, two senators, one team; the trump file is binary.
json small_manifest() {
  return json::parse(R"({
    "format": "affinity-manifest/1",
    "collected_at": "2020-04-15",
    "states": ["NY"],
    "entities": [
      {"handle": "trump", "kind": "candidate", "party": "Republican", "follower_file": "c/trump.ids", "format": "binary"},
      {"handle": "biden", "kind": "candidate", "party": "Democrat", "follower_file": "c/biden.txt"},
      {"handle": "sen_r", "kind": "senator", "party": "Republican", "follower_file": "s/sen_r.txt"},
      {"handle": "sen_d", "kind": "senator", "party": "Democrat", "follower_file": "s/sen_d.txt"},
      {"handle": "Knicks", "kind": "team", "league": "NBA", "state": "NY", "follower_file": "t/Knicks.txt"}
    ]
  })");
}

void write_small_dataset(const fs::path& root) {
  write_file(root / "c/trump.ids", binary_of(IdSet::build(std::vector<UserId>{1, 2, 3, 10})));
  write_file(root / "c/biden.txt", "4\n5\r\n\n  6  \n4\n");
  write_file(root / "s/sen_r.txt", "1\n2\n");
  write_file(root / "s/sen_d.txt", "2\n4\n");
  write_file(root / "t/Knicks.txt", "1\n2\n3\n4\n5\n6\n");
}

}  // namespace

TEST_CASE("text follower files") {
  auto f = parse_follower_bytes(bytes_of("3\n1\n3\n"), FileFormat::kText);
  CHECK(f.ids.to_vector() == std::vector<UserId>{1, 3});
  CHECK(f.entry.raw_count == 3);
  CHECK(f.entry.distinct_count == 2);
  CHECK(f.entry.duplicate_count == 1);
  CHECK(f.entry.malformed_line_count == 0);

  IngestOptions lenient;
  lenient.malformed_threshold = 0.5;
  auto g = parse_follower_bytes(bytes_of("abc\n5\n"), FileFormat::kText, lenient);
  CHECK(g.ids.to_vector() == std::vector<UserId>{5});
  CHECK(g.entry.malformed_line_count == 1);

  CHECK(code_of([] { parse_follower_bytes(bytes_of("abc\n5\n"), FileFormat::kText); }) ==
        IngestError::Code::kMalformedThreshold);

  SUBCASE("CRLF, blank lines, surrounding whitespace") {
    auto h = parse_follower_bytes(bytes_of("\r\n 7 \r\n\t8\n\n18446744073709551615"), FileFormat::kText);
    CHECK(h.ids.to_vector() == std::vector<UserId>{7, 8, 18446744073709551615ull});
    CHECK(h.entry.raw_count == 3);
  }
  SUBCASE("overflow, sign and embedded junk are malformed") {
    IngestOptions any;
    any.malformed_threshold = 1.0;
    auto h = parse_follower_bytes(bytes_of("18446744073709551616\n-1\n+1\n1 2\n0x10\n9\n"), FileFormat::kText, any);
    CHECK(h.entry.malformed_line_count == 5);
    CHECK(h.ids.to_vector() == std::vector<UserId>{9});
  }
  SUBCASE("malformed fraction exactly at the threshold is accepted") {
    std::string text = "x\n";
    for (int i = 0; i < 99; ++i) text += std::to_string(i) + "\n";
    auto h = parse_follower_bytes(bytes_of(text), FileFormat::kText);
    CHECK(h.entry.malformed_line_count == 1);
    CHECK(h.ids.size() == 99);
  }
}

TEST_CASE("binary follower files") {
  auto set = IdSet::build(std::vector<UserId>{9, 1, 5});
  auto f = parse_follower_bytes(bytes_of(binary_of(set)), FileFormat::kBinary);
  CHECK(f.ids == set);
  CHECK(f.entry.raw_count == 3);
  CHECK(f.entry.distinct_count == 3);

  auto bad = binary_of(set);
  bad.replace(0, 4, "XXXX");
  CHECK(code_of([&] { parse_follower_bytes(bytes_of(bad), FileFormat::kBinary); }) == IngestError::Code::kBadMagic);

  auto unordered = binary_of(set);
  std::swap_ranges(unordered.begin() + 12, unordered.begin() + 20, unordered.begin() + 20);
  CHECK(code_of([&] { parse_follower_bytes(bytes_of(unordered), FileFormat::kBinary); }) ==
        IngestError::Code::kOrdering);
}

TEST_CASE("text and binary encodings of one multiset agree") {
  std::mt19937_64 rng(8);
  for (int shape = 0; shape < 4; ++shape) {
    auto ids = testing::random_ids(rng, 4000, shape);
    std::string text;
    for (UserId v : ids) text += std::to_string(v) + (shape % 2 ? "\r\n" : "\n");
    auto t = parse_follower_bytes(bytes_of(text), FileFormat::kText);
    auto b = parse_follower_bytes(bytes_of(binary_of(IdSet::build(ids))), FileFormat::kBinary);
    CHECK(t.ids == b.ids);
    CHECK(t.entry.distinct_count == t.ids.size());
    CHECK(t.entry.distinct_count + t.entry.duplicate_count <= t.entry.raw_count);
  }
}

TEST_CASE("read_follower_file") {
  TempDir dir("ingest_read");
  CHECK(code_of([&] { read_follower_file(dir.path() / "nope.txt", FileFormat::kText); }) ==
        IngestError::Code::kMissingFile);
  write_file(dir.path() / "a.txt", "1\n2\n");
  auto f = read_follower_file(dir.path() / "a.txt", FileFormat::kText);
  CHECK(f.ids.size() == 2);
  CHECK(f.entry.digest == content_digest(std::string_view("1\n2\n")));
}

TEST_CASE("load_snapshot") {
  TempDir dir("ingest_snapshot");
  write_small_dataset(dir.path());
  auto reg = std::make_shared<const Registry>(load_registry(small_manifest().dump()));

  auto loaded = load_snapshot(reg, dir.path());
  const auto& snap = loaded.snapshot;
  CHECK(snap.sets().size() == 5);
  CHECK(snap.collected_at() == "2020-04-15");
  CHECK(snap.at("biden").to_vector() == std::vector<UserId>{4, 5, 6});
  CHECK(snap.at("trump").to_vector() == std::vector<UserId>{1, 2, 3, 10});
  for (const auto& e : loaded.report.entries) CHECK(e.distinct_count == snap.at(e.handle).size());
  CHECK(loaded.report.find("biden")->duplicate_count == 1);

  SUBCASE("idempotent and independent of thread count") {
    IngestOptions four;
    four.threads = 4;
    auto again = load_snapshot(reg, dir.path(), four);
    CHECK(again.snapshot == snap);
    CHECK(again.report.entries == loaded.report.entries);
  }

  SUBCASE("missing file names the handle") {
    fs::remove(dir.path() / "s/sen_d.txt");
    try {
      load_snapshot(reg, dir.path());
      FAIL("expected throw");
    } catch (const IngestError& e) {
      CHECK(e.code() == IngestError::Code::kMissingFile);
      CHECK(e.handle() == "sen_d");
    }
  }

  SUBCASE("digest mismatch is fatal") {
    auto doc = small_manifest();
    doc["entities"][2]["digest"] = content_digest(std::string_view("1\n2\n"));
    auto pinned = std::make_shared<const Registry>(load_registry(doc.dump()));
    CHECK_NOTHROW(load_snapshot(pinned, dir.path()));

    write_file(dir.path() / "s/sen_r.txt", "1\n2\n3\n");
    try {
      load_snapshot(pinned, dir.path());
      FAIL("expected throw");
    } catch (const IngestError& e) {
      CHECK(e.code() == IngestError::Code::kDigestMismatch);
      CHECK(e.handle() == "sen_r");
      CHECK(e.expected_digest() != e.actual_digest());
    }
  }

  SUBCASE("paths may not leave the root") {
    auto doc = small_manifest();
    doc["entities"][1]["follower_file"] = "../outside.txt";
    auto escaping = std::make_shared<const Registry>(load_registry(doc.dump()));
    CHECK(code_of([&] { load_snapshot(escaping, dir.path()); }) == IngestError::Code::kPathEscape);
  }

  SUBCASE("validate_snapshot collects every violation") {
    fs::remove(dir.path() / "s/sen_d.txt");
    write_file(dir.path() / "c/trump.ids", "XXXXjunk");
    auto errors = validate_snapshot(*reg, dir.path());
    REQUIRE(errors.size() == 2);
    CHECK(errors[0].code() == IngestError::Code::kBadMagic);
    CHECK(errors[1].code() == IngestError::Code::kMissingFile);
  }
}
