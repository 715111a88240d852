#include <cmath>

#include "affinity/pipeline.hpp"
#include "doctest.h"
#include "world.hpp"

using namespace affinity;
using affinity::testing::World;
namespace mp = boost::multiprecision;

namespace {

std::string key_of(const GroupKey& k, Level level) {
  std::string s(to_string(k.league));
  if (level != Level::kSport) s += "|" + k.state;
  if (level == Level::kTeam) s += "|" + k.team;
  return s;
}

PipelineError::Code code_of(auto&& fn) {
  try {
    fn();
  } catch (const PipelineError& e) {
    return e.code();
  }
  FAIL("expected PipelineError");
  return PipelineError::Code::kUndefinedRow;
}

// Three candidates, one senator per party, teams A and B in NY.
World tiny(std::map<std::string, std::vector<UserId>> followers) {
  World w;
  w.manifest = nlohmann::json::parse(R"({
    "format": "affinity-manifest/1",
    "states": ["NY"],
    "entities": [
      {"handle": "BernieSanders", "kind": "candidate", "party": "Democrat"},
      {"handle": "JoeBiden", "kind": "candidate", "party": "Democrat"},
      {"handle": "realDonaldTrump", "kind": "candidate", "party": "Republican"},
      {"handle": "d1", "kind": "senator", "party": "Democrat"},
      {"handle": "d2", "kind": "senator", "party": "Democrat"},
      {"handle": "r1", "kind": "senator", "party": "Republican"},
      {"handle": "A", "kind": "team", "league": "NBA", "state": "NY"},
      {"handle": "B", "kind": "team", "league": "NBA", "state": "NY"}
    ]
  })");
  for (const auto& e : w.manifest["entities"]) w.followers[e["handle"]] = {};
  for (auto& [h, ids] : followers) w.followers[h] = ids;
  return w;
}

}  // namespace

TEST_CASE("exclusive_fans") {
  auto snap = tiny({{"A", {1, 2}}, {"B", {2, 3}}}).snapshot();
  auto ex = exclusive_fans(snap, League::kNBA);
  CHECK(ex.at("A").to_vector() == std::vector<UserId>{1});
  CHECK(ex.at("B").to_vector() == std::vector<UserId>{3});
  CHECK(code_of([&] { exclusive_fans(snap, League::kNFL); }) == PipelineError::Code::kNoTeams);
}

TEST_CASE("engagement_rate and politically_interested") {
  auto fans = IdSet::build(std::vector<UserId>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10});
  auto c1 = IdSet::build(std::vector<UserId>{1, 50}), c2 = IdSet::build(std::vector<UserId>{2, 1});
  const IdSet* cands[] = {&c1, &c2};
  CHECK(engagement_rate(fans, cands) == 0.2);
  CHECK(code_of([&] { engagement_rate(IdSet{}, cands); }) == PipelineError::Code::kEmptyFans);

  auto snap = tiny({{"d1", {3, 4, 11}}, {"r1", {4, 12}}}).snapshot();
  CHECK(politically_interested(fans, snap).to_vector() == std::vector<UserId>{3, 4});
}

TEST_CASE("following ratios") {
  const std::uint64_t counts[] = {647, 222, 132};
  auto r = ratios_from_counts(counts);
  CHECK(r[0] == doctest::Approx(0.646).epsilon(1e-3));
  CHECK(r[1] == doctest::Approx(0.222).epsilon(1e-3));
  CHECK(r[2] == doctest::Approx(0.132).epsilon(1e-3));
  CHECK(std::abs(r[0] + r[1] + r[2] - 1.0) <= 1e-9);
  const std::uint64_t zero[] = {0, 0, 0};
  CHECK(code_of([&] { ratios_from_counts(zero); }) == PipelineError::Code::kUndefinedRow);

  auto fans = IdSet::build(std::vector<UserId>{1, 2, 3});
  auto c1 = IdSet::build(std::vector<UserId>{1, 2}), c2 = IdSet::build(std::vector<UserId>{2, 9});
  const IdSet* cands[] = {&c1, &c2};
  auto row = following_ratios(fans, cands);
  CHECK(row.overlaps == std::vector<std::uint64_t>{2, 1});  // user 2 counts for both
  CHECK(row.ratios[0] == doctest::Approx(2.0 / 3.0));
  auto none = following_ratios(IdSet::build(std::vector<UserId>{7}), cands);
  CHECK_FALSE(none.defined());
}

TEST_CASE("senator breakdown") {
  auto snap = tiny({{"d1", {1, 2}}, {"d2", {2, 5}}, {"r1", {2, 3}}}).snapshot();
  auto fans = IdSet::build(std::vector<UserId>{1, 2, 3, 4});
  auto b = senator_breakdown(fans, snap);
  CHECK(b.senator_followers == 3);
  CHECK(b.only_democrat_count == 1);
  CHECK(b.only_republican_count == 1);
  CHECK(b.both_count == 1);
  CHECK(b.only_democrat + b.only_republican + b.both == doctest::Approx(1.0));
  CHECK(code_of([&] { senator_breakdown(IdSet::build(std::vector<UserId>{4}), snap); }) ==
        PipelineError::Code::kUndefinedRow);
}

TEST_CASE("CDR on hand-checked cohorts") {
  SUBCASE("two users") {
    // user 1: two Democrat senators, Biden; user 2: one senator each side, Biden and Trump
    auto snap = tiny({{"A", {1, 2}},
                      {"d1", {1, 2}},
                      {"d2", {1}},
                      {"r1", {2}},
                      {"JoeBiden", {1, 2}},
                      {"realDonaldTrump", {2}}})
                    .snapshot();
    auto t = run_cdr(snap, Level::kSport);
    REQUIRE(t.rows.size() == 1);
    const auto& row = t.rows[0];
    CHECK(row.cohort_size == 2);
    CHECK(row.cds == std::vector<double>{0.0, 1.25, 0.25});
    CHECK(row.cdr[0] == 0.0);
    CHECK(row.cdr[1] == 5.0 / 6.0);
    CHECK(row.cdr[2] == 1.0 / 6.0);
  }
  SUBCASE("single Sanders follower") {
    auto snap = tiny({{"B", {9}}, {"d1", {9}}, {"r1", {9}}, {"BernieSanders", {9}}}).snapshot();
    auto t = run_cdr(snap, Level::kTeam);
    REQUIRE(t.rows.size() == 2);
    CHECK_FALSE(t.rows[0].defined());  // team A: empty cohort
    CHECK(t.rows[0].cohort_size == 0);
    CHECK(t.rows[1].cdr == std::vector<double>{1.0, 0.0, 0.0});
  }
  SUBCASE("fans of both teams are dropped") {
    auto snap = tiny({{"A", {1}}, {"B", {1}}, {"d1", {1}}, {"JoeBiden", {1}}}).snapshot();
    auto t = run_cdr(snap, Level::kSport);
    CHECK(t.rows[0].cohort_size == 0);
    CHECK_FALSE(t.rows[0].defined());
  }
  SUBCASE("missing follower set") {
    auto w = tiny({});
    w.followers.erase("r1");
    auto snap = w.snapshot();
    CHECK(code_of([&] { run_cdr(snap, Level::kSport); }) == PipelineError::Code::kMissingFollowerSet);
  }
}

TEST_CASE("pipeline tables match a per-user brute force") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 25; ++trial) {
    testing::WorldShape shape;
    shape.users = 100 + rng() % 600;
    shape.states = 1 + static_cast<int>(rng() % 4);
    shape.max_teams_per_state = 1 + static_cast<int>(rng() % 3);
    const World w = testing::random_world(rng, shape);
    const Snapshot snap = w.snapshot();

    for (Level level : {Level::kSport, Level::kState, Level::kTeam}) {
      const auto oracle = testing::brute_force(w, std::string(to_string(level)));
      PipelineOptions opts;
      opts.threads = 1 + trial % 3;
      const auto cdr = run_cdr(snap, level, opts);
      const auto ratios = ratio_table(snap, level, opts);
      const auto breakdown = senator_breakdown_table(snap, level, opts);
      const auto engagement = engagement_table(snap, level, opts);
      REQUIRE(cdr.rows.size() == oracle.size());
      REQUIRE(ratios.size() == oracle.size());

      for (std::size_t g = 0; g < cdr.rows.size(); ++g) {
        const auto& o = oracle.at(key_of(cdr.rows[g].key, level));
        const auto& row = cdr.rows[g];
        CHECK(row.cohort_size == o.eligible);
        mp::cpp_rational total = 0;
        for (std::size_t j = 0; j < 3; ++j) {
          auto [num, den] = row.exact[j].as_fraction();
          CHECK(num == mp::numerator(o.cds[j]).str());
          CHECK(den == mp::denominator(o.cds[j]).str());
          total += o.cds[j];
        }
        CHECK(row.defined() == (total != 0));
        if (row.defined()) {
          double sum = 0;
          for (std::size_t j = 0; j < 3; ++j) {
            CHECK(row.cdr[j] == doctest::Approx(static_cast<double>(o.cds[j] / total)).epsilon(1e-15));
            sum += row.cdr[j];
          }
          CHECK(std::abs(sum - 1.0) <= 1e-9);
        }

        CHECK(key_of(ratios[g].key, level) == key_of(row.key, level));
        CHECK(ratios[g].fans == o.fans);
        CHECK(ratios[g].overlaps == o.overlaps);
        CHECK(breakdown[g].only_democrat_count == o.only_dem);
        CHECK(breakdown[g].only_republican_count == o.only_rep);
        CHECK(breakdown[g].both_count == o.both);
        CHECK(engagement[g].fans == o.fans);
        CHECK(engagement[g].candidate_followers == o.engaged);
        CHECK(engagement[g].senator_followers == o.senator_followers);
        CHECK(engagement[g].eligible == o.eligible);
      }
    }
  }
}

TEST_CASE("count orientations agree") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    const World w = testing::random_world(rng);
    const Snapshot snap = w.snapshot();
    const PartySets senators = senator_sets(snap);
    const IdSet members = unite_all(senators.sets);
    const auto ids = members.to_vector();
    auto a = count_party_follows(ids, members, senators, CountOrientation::kPerUser);
    auto b = count_party_follows(ids, members, senators, CountOrientation::kPerSenator);
    CHECK(a == b);

    PipelineOptions inverted;
    inverted.orientation = CountOrientation::kPerSenator;
    PipelineOptions tiny_threshold;
    tiny_threshold.inverted_threshold = 0;
    auto x = run_cdr(snap, Level::kState);
    auto y = run_cdr(snap, Level::kState, inverted);
    auto z = run_cdr(snap, Level::kState, tiny_threshold);
    for (std::size_t g = 0; g < x.rows.size(); ++g) {
      CHECK(x.rows[g].cds == y.rows[g].cds);
      CHECK(x.rows[g].cdr == z.rows[g].cdr);
    }
  }
}

TEST_CASE("exclusivity and senator filtering commute") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    const World w = testing::random_world(rng);
    const Snapshot snap = w.snapshot();
    const IdSet senators = senator_union(snap);

    // senator filter first: restrict every team set, then apply exclusivity
    std::map<std::string, IdSet> restricted;
    for (const auto& [h, s] : snap.sets()) {
      const Entity& e = snap.registry().at(h);
      restricted.emplace(h, e.is_team() ? intersect(s, senators) : s);
    }
    const Snapshot filtered_first(snap.registry_ptr(), std::move(restricted));

    for (League league : {League::kNBA, League::kNFL}) {
      auto a = exclusive_fans(snap, league);
      auto b = exclusive_fans(filtered_first, league);
      for (const auto& [team, fans] : a) CHECK(politically_interested(fans, senators) == b.at(team));
    }
  }
}

TEST_CASE("state rows pool into the sport row") {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 10; ++trial) {
    const World w = testing::random_world(rng);
    const Snapshot snap = w.snapshot();
    auto sport = run_cdr(snap, Level::kSport);
    auto state = run_cdr(snap, Level::kState);
    for (const auto& srow : sport.rows) {
      std::uint64_t size = 0;
      std::vector<ExactScore> sum(3);
      for (const auto& r : state.rows) {
        if (r.key.league != srow.key.league) continue;
        size += r.cohort_size;
        for (int j = 0; j < 3; ++j) sum[j] += r.exact[j];
      }
      CHECK(size == srow.cohort_size);
      for (int j = 0; j < 3; ++j) CHECK(sum[j] == srow.exact[j]);
    }
  }
}
