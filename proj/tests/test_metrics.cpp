#include <cmath>
#include <random>

#include <boost/multiprecision/cpp_int.hpp>

#include "affinity/metrics.hpp"
#include "doctest.h"

using namespace affinity;
namespace mp = boost::multiprecision;

namespace {

// Roster used throughout: [Sanders, Biden, Trump].
const std::vector<Party> kParties{Party::kDemocrat, Party::kDemocrat, Party::kRepublican};
const CandidateRoster kRoster({"BernieSanders", "JoeBiden", "realDonaldTrump"}, kParties);

CandidateFollowVector follows(std::initializer_list<std::string> handles) {
  std::vector<std::string> v(handles);
  return CandidateFollowVector::of(kRoster, v);
}

MetricError::Code code_of(auto&& fn) {
  try {
    fn();
  } catch (const MetricError& e) {
    return e.code();
  }
  FAIL("expected MetricError");
  return MetricError::Code::kDuplicateUser;
}

}  // namespace

TEST_CASE("congressional_weight") {
  auto w = congressional_weight({2, 0});
  CHECK(w.dem == 1.0);
  CHECK(w.rep == 0.0);
  w = congressional_weight({1, 1});
  CHECK(w.dem == 0.5);
  CHECK(w.rep == 0.5);
  w = congressional_weight({3, 1});
  CHECK(w.dem == 0.75);
  CHECK(w.rep == 0.25);
  CHECK(code_of([] { congressional_weight({0, 0}); }) == MetricError::Code::kUndefinedWeight);
}

TEST_CASE("congressional_weight properties") {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::uint32_t> d(0, 100);
  std::uniform_int_distribution<std::uint32_t> kd(1, 40);
  for (int i = 0; i < 5000; ++i) {
    PartyFollowCounts c{d(rng), d(rng)};
    if (c.total() == 0) continue;
    auto w = congressional_weight(c);
    CHECK(std::abs(w.dem + w.rep - 1.0) <= std::nextafter(1.0, 2.0) - 1.0);
    CHECK(w.dem >= 0.0);
    CHECK(w.rep <= 1.0);
    const std::uint32_t k = kd(rng);
    auto scaled = congressional_weight({c.alpha * k, c.beta * k});
    CHECK(scaled.dem == w.dem);
    CHECK(scaled.rep == w.rep);
  }
}

TEST_CASE("devotedness") {
  auto d = devotedness(follows({"realDonaldTrump", "JoeBiden"}));
  CHECK(d == std::vector<double>{0.0, 0.5, 0.5});
  d = devotedness(follows({"BernieSanders"}));
  CHECK(d == std::vector<double>{1.0, 0.0, 0.0});
  d = devotedness(follows({"BernieSanders", "JoeBiden", "realDonaldTrump"}));
  CHECK(d == std::vector<double>(3, 1.0 / 3.0));
  CHECK(d[0] + d[1] + d[2] == 1.0);
  CHECK(code_of([] { devotedness(follows({})); }) == MetricError::Code::kNoCandidateFollowed);
  CHECK(code_of([] { follows({"MikeBloomberg"}); }) == MetricError::Code::kUnknownCandidate);
}

TEST_CASE("cds_contribution") {
  auto c = cds_contribution({2, 0}, follows({"JoeBiden"}), kParties);
  CHECK(c.values == std::vector<double>{0.0, 1.0, 0.0});

  c = cds_contribution({1, 1}, follows({"realDonaldTrump", "JoeBiden"}), kParties);
  CHECK(c.values == std::vector<double>{0.0, 0.25, 0.25});

  c = cds_contribution({3, 1}, follows({"realDonaldTrump"}), kParties);
  CHECK(c.values == std::vector<double>{0.0, 0.0, 0.25});
  CHECK(c.numerators == std::vector<std::uint32_t>{0, 0, 1});
  CHECK(c.denominator == 4);

  std::vector<Party> two{Party::kDemocrat, Party::kRepublican};
  CHECK(code_of([&] { cds_contribution({1, 0}, follows({"JoeBiden"}), two); }) == MetricError::Code::kUnknownCandidate);
  CHECK(code_of([&] { cds_contribution({0, 0}, follows({"JoeBiden"}), kParties); }) ==
        MetricError::Code::kUndefinedWeight);
}

TEST_CASE("cds_contribution per-user total is bounded by the larger weight") {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<std::uint32_t> d(0, 60);
  std::bernoulli_distribution coin(0.5);
  for (int i = 0; i < 3000; ++i) {
    PartyFollowCounts c{d(rng), d(rng)};
    CandidateFollowVector v{{std::uint8_t(coin(rng)), std::uint8_t(coin(rng)), std::uint8_t(coin(rng))}};
    if (c.total() == 0 || v.n_followed() == 0) continue;
    auto contrib = cds_contribution(c, v, kParties);
    auto w = congressional_weight(c);
    double total = 0;
    for (double x : contrib.values) total += x;
    CHECK(total <= std::max(w.dem, w.rep) * (1 + 1e-15));
  }
}

TEST_CASE("accumulate_cds") {
  std::vector<UserCds> users{
      {10, cds_contribution({2, 0}, follows({"JoeBiden"}), kParties)},
      {20, cds_contribution({1, 1}, follows({"realDonaldTrump", "JoeBiden"}), kParties)},
  };
  auto s = accumulate_cds(users, 3);
  CHECK(s.cds == std::vector<double>{0.0, 1.25, 0.25});
  CHECK(s.users == 2);

  auto empty = accumulate_cds({}, 3);
  CHECK(empty.cds == std::vector<double>{0.0, 0.0, 0.0});
  CHECK(empty.users == 0);
  CHECK(cdr_from(empty).empty());

  users.push_back(users[0]);
  CHECK(code_of([&] { accumulate_cds(users, 3); }) == MetricError::Code::kDuplicateUser);

  CdsAccumulator acc(3);
  acc.add(5, users[0].contribution);
  CHECK(code_of([&] { acc.add(4, users[1].contribution); }) == MetricError::Code::kDuplicateUser);
}

TEST_CASE("ExactScore conversion is correctly rounded") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::uint64_t> num(0, 1'000'000'000), den(1, 1'000'000'007);
  for (int i = 0; i < 4000; ++i) {
    const auto p = num(rng), q = den(rng);
    // IEEE division of exactly representable integers is correctly rounded.
    CHECK(rational_to_double(std::to_string(p), std::to_string(q)) == static_cast<double>(p) / static_cast<double>(q));
  }
  ExactScore third;
  third.add_term(1, 3);
  CHECK(third.to_double() == 1.0 / 3.0);
  third.add_term(2, 6);
  CHECK(third.as_fraction() == std::pair<std::string, std::string>{"2", "3"});
  CHECK(third.to_double() == 2.0 / 3.0);
}

TEST_CASE("accumulate_cds equals a brute-force per-user evaluation") {
  std::mt19937_64 rng(4);
  for (int cohort = 0; cohort < 20; ++cohort) {
    std::uniform_int_distribution<int> size(0, 2000);
    std::uniform_int_distribution<std::uint32_t> senators(0, 12);
    std::bernoulli_distribution coin(0.4);
    std::vector<UserCds> users;
    std::vector<mp::cpp_rational> oracle(3);
    std::vector<double> naive(3, 0.0);
    const int n = size(rng);
    for (int u = 0; u < n; ++u) {
      PartyFollowCounts c{senators(rng), senators(rng)};
      CandidateFollowVector v{{std::uint8_t(coin(rng)), std::uint8_t(coin(rng)), std::uint8_t(coin(rng))}};
      if (c.total() == 0 || v.n_followed() == 0) continue;
      const UserId id = static_cast<UserId>(u) * 7919 + 3;
      users.push_back({id, cds_contribution(c, v, kParties)});
      // Devotedness score, term by term, in exact arithmetic.
      for (int j = 0; j < 3; ++j) {
        if (!v.follows[j]) continue;
        const auto party_count = kParties[j] == Party::kDemocrat ? c.alpha : c.beta;
        mp::cpp_rational weight(mp::cpp_int(party_count), mp::cpp_int(c.total()));
        oracle[j] += weight * mp::cpp_rational(1, v.n_followed());
        naive[j] += users.back().contribution.values[j];
      }
    }
    std::shuffle(users.begin(), users.end(), rng);
    auto s = accumulate_cds(users, 3);
    for (int j = 0; j < 3; ++j) {
      auto [num, den] = s.exact[j].as_fraction();
      CHECK(num == mp::numerator(oracle[j]).str());
      CHECK(den == mp::denominator(oracle[j]).str());
      CHECK(s.cds[j] == doctest::Approx(naive[j]).epsilon(1e-12));
    }
  }
}

TEST_CASE("adding a single-candidate user only moves that candidate") {
  std::vector<UserCds> base{
      {1, cds_contribution({2, 1}, follows({"JoeBiden", "realDonaldTrump"}), kParties)},
      {2, cds_contribution({0, 3}, follows({"BernieSanders", "realDonaldTrump"}), kParties)},
  };
  auto before = accumulate_cds(base, 3);
  base.push_back({3, cds_contribution({1, 2}, follows({"BernieSanders"}), kParties)});
  auto after = accumulate_cds(base, 3);
  CHECK(after.cds[0] > before.cds[0]);
  CHECK(after.exact[1] == before.exact[1]);
  CHECK(after.exact[2] == before.exact[2]);

  // zero relevant weight: a pure-Republican user following only Sanders adds nothing
  base.push_back({4, cds_contribution({0, 2}, follows({"BernieSanders"}), kParties)});
  CHECK(accumulate_cds(base, 3).exact[0] == after.exact[0]);
}

TEST_CASE("CdsAccumulator merge is exact") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::uint32_t> senators(0, 9);
  CdsAccumulator whole(3), left(3), right(3);
  for (UserId u = 0; u < 500; ++u) {
    PartyFollowCounts c{senators(rng), senators(rng) + 1};
    std::uint8_t f[3] = {std::uint8_t(u % 2), std::uint8_t(u % 3 == 0), 1};
    whole.add(u, c, f, kParties);
    (u % 5 < 2 ? left : right).add(u, c, f, kParties);
  }
  left.merge(right);
  auto a = whole.finish(), b = left.finish();
  for (int j = 0; j < 3; ++j) {
    CHECK(a.exact[j] == b.exact[j]);
    CHECK(a.cds[j] == b.cds[j]);
  }
  auto cdr = cdr_from(a);
  CHECK(std::abs(cdr[0] + cdr[1] + cdr[2] - 1.0) < 1e-12);
}
