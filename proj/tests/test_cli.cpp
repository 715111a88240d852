#include <cmath>
#include <fstream>
#include <sstream>

#include "affinity/cli.hpp"
#include "affinity/report.hpp"
#include "doctest.h"
#include "json.hpp"
#include "test_support.hpp"

using namespace affinity;
using affinity::testing::TempDir;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    REQUIRE(line.find('\r') == std::string::npos);
    std::vector<std::string> cells;
    std::istringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(std::move(cells));
  }
  return rows;
}

const fs::path kExample = fs::path(AFFINITY_DATA_DIR) / "synth_example.json";

}  // namespace

TEST_CASE("synth then validate") {
  TempDir dir("cli_validate");
  const auto ds = dir.path() / "ds";
  auto s = cli({"synth", "--config", kExample.string(), "--out", ds.string()});
  REQUIRE(s.code == kExitOk);
  CHECK(s.out.find("NY") != std::string::npos);

  auto v = cli({"validate", "--manifest", (ds / "manifest.json").string()});
  CHECK(v.code == kExitOk);
  auto doc = json::parse(v.out);
  CHECK(doc["ok"] == true);
  CHECK(doc["violations"].empty());

  SUBCASE("missing follower file names the handle") {
    fs::remove(ds / "followers" / "Knicks.txt");
    auto bad = cli({"validate", "--manifest", (ds / "manifest.json").string()});
    CHECK(bad.code == kExitValidation);
    auto d = json::parse(bad.out);
    REQUIRE(d["violations"].size() == 1);
    CHECK(d["violations"][0]["code"] == "missing_file");
    CHECK(d["violations"][0]["handle"] == "Knicks");
  }
  SUBCASE("digest mismatch names file and digests") {
    std::ofstream(ds / "followers" / "Heat.txt", std::ios::app) << "12345\n";
    auto bad = cli({"validate", "--manifest", (ds / "manifest.json").string()});
    CHECK(bad.code == kExitValidation);
    auto d = json::parse(bad.out);
    REQUIRE(d["violations"].size() == 1);
    const auto& x = d["violations"][0];
    CHECK(x["code"] == "digest_mismatch");
    CHECK(x["path"].get<std::string>().find("Heat.txt") != std::string::npos);
    CHECK(x["expected_digest"] != x["actual_digest"]);
  }
  SUBCASE("report refuses an invalid dataset") {
    fs::remove(ds / "followers" / "Knicks.txt");
    auto r = cli({"report", "--manifest", (ds / "manifest.json").string(), "--out", (dir.path() / "r").string()});
    CHECK(r.code == kExitValidation);
  }
}

TEST_CASE("report tables") {
  TempDir dir("cli_report");
  const auto ds = dir.path() / "ds";
  REQUIRE(cli({"synth", "--config", kExample.string(), "--out", ds.string()}).code == kExitOk);
  const auto manifest = (ds / "manifest.json").string();
  auto r = cli({"report", "--manifest", manifest, "--out", (dir.path() / "csv").string(), "--threads", "2"});
  REQUIRE(r.code == kExitOk);

  auto cdr = parse_csv(slurp(dir.path() / "csv" / "cdr_state.csv"));
  REQUIRE(cdr.size() == 1 + 6 * 2);
  const auto& header = cdr[0];
  CHECK(header[0] == "league");
  CHECK(header.back() == "cdr_realDonaldTrump");
  for (std::size_t i = 1; i < cdr.size(); ++i) {
    REQUIRE(cdr[i].size() == header.size());
    double sum = 0;
    for (std::size_t c = header.size() - 3; c < header.size(); ++c) sum += std::stod(cdr[i][c]);
    CHECK(std::abs(sum - 1.0) <= 1e-9);
  }
  for (const char* f : {"ratios.csv", "senator_breakdown.csv", "engagement.csv", "warnings.csv"}) {
    auto rows = parse_csv(slurp(dir.path() / "csv" / f));
    REQUIRE_FALSE(rows.empty());
    for (const auto& row : rows) CHECK(row.size() == rows[0].size());
  }
  CHECK(parse_csv(slurp(dir.path() / "csv" / "warnings.csv")).size() == 1);

  auto team = cli({"report", "--manifest", manifest, "--out", (dir.path() / "team").string(), "--level", "team",
                   "--format", "text"});
  REQUIRE(team.code == kExitOk);
  const auto text = slurp(dir.path() / "team" / "cdr_team.txt");
  CHECK(text.find("Falcons") != std::string::npos);
  CHECK(text.find("0.") != std::string::npos);
}

TEST_CASE("identical invocations give identical bytes; seed changes them") {
  TempDir dir("cli_synth");
  auto run = [&](const std::string& name, const std::string& seed) {
    std::vector<std::string> args{"synth", "--config", kExample.string(), "--out", (dir.path() / name).string()};
    if (!seed.empty()) args.insert(args.end(), {"--seed", seed});
    REQUIRE(cli(args).code == kExitOk);
    return slurp(dir.path() / name / "followers" / "JoeBiden.txt") + slurp(dir.path() / name / "manifest.json");
  };
  CHECK(run("a", "") == run("b", ""));
  CHECK(run("a", "") != run("c", "77"));
}

TEST_CASE("empty cohorts are marked NA with a warning") {
  TempDir dir("cli_na");
  std::ofstream(dir.path() / "manifest.json") << R"({
    "format": "affinity-manifest/1",
    "states": ["NY"],
    "entities": [
      {"handle": "biden", "kind": "candidate", "party": "Democrat", "follower_file": "biden.txt"},
      {"handle": "sen", "kind": "senator", "party": "Democrat", "follower_file": "sen.txt"},
      {"handle": "Knicks", "kind": "team", "league": "NBA", "state": "NY", "follower_file": "knicks.txt"},
      {"handle": "Nets", "kind": "team", "league": "NBA", "state": "NY", "follower_file": "nets.txt"}
    ]
  })";
  std::ofstream(dir.path() / "biden.txt") << "1\n";
  std::ofstream(dir.path() / "sen.txt") << "1\n";
  std::ofstream(dir.path() / "knicks.txt") << "1\n";
  std::ofstream(dir.path() / "nets.txt") << "2\n";
  auto r = cli({"report", "--manifest", (dir.path() / "manifest.json").string(), "--out",
                (dir.path() / "out").string(), "--level", "team"});
  REQUIRE(r.code == kExitOk);
  auto rows = parse_csv(slurp(dir.path() / "out" / "cdr_team.csv"));
  REQUIRE(rows.size() == 3);
  CHECK(rows[1][2] == "Knicks");
  CHECK(rows[1].back() == "1");
  CHECK(rows[2][2] == "Nets");
  CHECK(rows[2][3] == "0");
  CHECK(rows[2].back() == "NA");
  auto warnings = parse_csv(slurp(dir.path() / "out" / "warnings.csv"));
  REQUIRE(warnings.size() == 2);
  CHECK(warnings[1][0] == "cdr_team");
  CHECK(warnings[1][3] == "Nets");

  auto text = cli({"report", "--manifest", (dir.path() / "manifest.json").string(), "--out",
                   (dir.path() / "txt").string(), "--level", "team", "--format", "text"});
  REQUIRE(text.code == kExitOk);
  const auto t = slurp(dir.path() / "txt" / "cdr_team.txt");
  CHECK(t.find("NA") != std::string::npos);
  CHECK(t.find("Warnings") != std::string::npos);
}

TEST_CASE("text formatting") {
  CHECK(format_text_real(1.0 / 3.0) == "0.333");
  CHECK(format_text_real(0.6665) == "0.666");  // binary value sits just below the tie
  CHECK(format_text_real(1.0) == "1.000");
  Table t{"x", "T", {"name", "v"}, {{std::string("a"), 0.5}, {std::string("bb"), Missing{}}}, {}};
  CHECK(to_csv(t) == "name,v\na,0.5\nbb,NA\n");
  CHECK(to_text(t) == "T\n\nname      v\n----  -----\na     0.500\nbb       NA\n");
}

TEST_CASE("exit codes for usage, config and runtime problems") {
  TempDir dir("cli_exit");
  CHECK(cli({}).code == kExitRuntime);
  CHECK(cli({"frobnicate"}).code == kExitRuntime);
  CHECK(cli({"report", "--manifest", "x.json"}).code == kExitRuntime);  // --out missing
  CHECK(cli({"--help"}).code == kExitOk);

  auto missing = cli({"validate", "--manifest", (dir.path() / "nope.json").string()});
  CHECK(missing.code == kExitValidation);

  std::ofstream(dir.path() / "bad.json") << R"({"states": [{"code": "NY", "users": 0}], "noise_rate": 3})";
  auto bad = cli({"synth", "--config", (dir.path() / "bad.json").string(), "--out", (dir.path() / "o").string()});
  CHECK(bad.code == kExitValidation);
  CHECK(bad.out.find("noise_rate") != std::string::npos);
  CHECK(bad.out.find("users") != std::string::npos);

  fs::create_directories(dir.path() / "blocked");
  std::ofstream(dir.path() / "blocked" / "followers") << "a file where a directory is needed";
  auto run = cli({"synth", "--config", kExample.string(), "--out", (dir.path() / "blocked").string()});
  CHECK(run.code == kExitRuntime);
}

TEST_CASE("collect demo reproduces the served dataset") {
  TempDir dir("cli_collect");
  REQUIRE(cli({"synth", "--config", kExample.string(), "--out", (dir.path() / "ds").string()}).code == kExitOk);
  auto c = cli({"collect", "--manifest", (dir.path() / "ds" / "manifest.json").string(), "--out",
                (dir.path() / "col").string(), "--page-size", "700", "--threads", "3"});
  REQUIRE(c.code == kExitOk);
  CHECK(c.out.find("rate") == std::string::npos);
  auto v = cli({"validate", "--manifest", (dir.path() / "col" / "manifest.json").string()});
  CHECK(v.code == kExitOk);

  auto a = cli({"report", "--manifest", (dir.path() / "ds" / "manifest.json").string(), "--out",
                (dir.path() / "ra").string()});
  auto b = cli({"report", "--manifest", (dir.path() / "col" / "manifest.json").string(), "--out",
                (dir.path() / "rb").string()});
  REQUIRE(a.code == kExitOk);
  REQUIRE(b.code == kExitOk);
  CHECK(slurp(dir.path() / "ra" / "cdr_state.csv") == slurp(dir.path() / "rb" / "cdr_state.csv"));
}
