#include "affinity/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/multiprecision/cpp_int.hpp>

namespace affinity {

namespace mp = boost::multiprecision;
using Code = MetricError::Code;

CongressionalWeight congressional_weight(PartyFollowCounts counts) {
  const std::uint32_t total = counts.total();
  if (total == 0) throw MetricError(Code::kUndefinedWeight, "congressional weight undefined: user follows no senator");
  const double t = static_cast<double>(total);
  return {static_cast<double>(counts.alpha) / t, static_cast<double>(counts.beta) / t};
}

CandidateRoster::CandidateRoster(std::vector<std::string> handles, std::vector<Party> parties)
    : handles_(std::move(handles)), parties_(std::move(parties)) {
  if (handles_.size() != parties_.size())
    throw std::invalid_argument("CandidateRoster: handles and parties differ in length");
}

CandidateRoster CandidateRoster::from_registry(const Registry& registry) {
  std::vector<std::string> handles;
  std::vector<Party> parties;
  for (const Entity* e : registry.candidates()) {
    handles.push_back(e->handle);
    parties.push_back(std::get<CandidateRole>(e->role).party);
  }
  return {std::move(handles), std::move(parties)};
}

std::size_t CandidateRoster::index_of(std::string_view handle) const {
  auto it = std::find(handles_.begin(), handles_.end(), handle);
  if (it == handles_.end())
    throw MetricError(Code::kUnknownCandidate, "candidate '" + std::string(handle) + "' has no party assignment");
  return static_cast<std::size_t>(it - handles_.begin());
}

CandidateFollowVector CandidateFollowVector::of(const CandidateRoster& roster, std::span<const std::string> followed) {
  CandidateFollowVector v;
  v.follows.assign(roster.size(), 0);
  for (const auto& h : followed) v.follows[roster.index_of(h)] = 1;
  return v;
}

std::uint32_t CandidateFollowVector::n_followed() const noexcept {
  std::uint32_t n = 0;
  for (auto f : follows) n += f != 0;
  return n;
}

std::vector<double> devotedness(const CandidateFollowVector& vec) {
  const std::uint32_t n = vec.n_followed();
  if (n == 0) throw MetricError(Code::kNoCandidateFollowed, "devotedness undefined: user follows no candidate");
  const double share = 1.0 / static_cast<double>(n);
  std::vector<double> out(vec.follows.size(), 0.0);
  for (std::size_t j = 0; j < out.size(); ++j)
    if (vec.follows[j]) out[j] = share;
  return out;
}

CdsContribution cds_contribution(PartyFollowCounts counts, const CandidateFollowVector& vec,
                                 std::span<const Party> candidate_parties) {
  if (vec.follows.size() != candidate_parties.size())
    throw MetricError(Code::kUnknownCandidate, "follow vector does not match the candidate party list");
  const CongressionalWeight w = congressional_weight(counts);
  const auto dev = devotedness(vec);

  CdsContribution c;
  c.values.assign(dev.size(), 0.0);
  c.numerators.assign(dev.size(), 0);
  c.denominator = std::uint64_t{counts.total()} * vec.n_followed();
  for (std::size_t j = 0; j < dev.size(); ++j) {
    if (!vec.follows[j]) continue;
    const Party p = candidate_parties[j];
    c.values[j] = w.of(p) * dev[j];
    c.numerators[j] = p == Party::kDemocrat ? counts.alpha : counts.beta;
  }
  return c;
}

// --- ExactScore ---

namespace {

mp::cpp_rational exact_value(const std::vector<std::uint64_t>& numerators) {
  mp::cpp_int lcm = 1;
  for (std::size_t d = 1; d < numerators.size(); ++d)
    if (numerators[d] != 0) lcm = mp::lcm(lcm, mp::cpp_int(d));
  mp::cpp_int num = 0;
  for (std::size_t d = 1; d < numerators.size(); ++d)
    if (numerators[d] != 0) num += mp::cpp_int(numerators[d]) * (lcm / d);
  return mp::cpp_rational(num, lcm);
}

double to_double_rounded(const mp::cpp_int& num, const mp::cpp_int& den) {
  if (num == 0) return 0.0;
  // Scale so that q = floor(num * 2^k / den) has exactly 54 bits, then round
  // the 53-bit mantissa to nearest-even using the 54th bit and the remainder.
  long k = 53 - (static_cast<long>(mp::msb(num)) - static_cast<long>(mp::msb(den)));
  mp::cpp_int q, r;
  for (;;) {
    mp::cpp_int n = num, d = den;
    if (k >= 0) n <<= k;
    else d <<= -k;
    mp::divide_qr(n, d, q, r);
    const auto bits = mp::msb(q);
    if (bits > 53) {
      --k;
    } else if (bits < 53) {
      ++k;
    } else {
      break;
    }
  }
  const bool sticky = r != 0;
  const bool half = mp::bit_test(q, 0);
  mp::cpp_int mant = q >> 1;
  if (half && (sticky || mp::bit_test(mant, 0))) ++mant;
  return std::ldexp(static_cast<double>(mant), static_cast<int>(1 - k));
}

}  // namespace

void ExactScore::add_term(std::uint64_t numerator, std::uint64_t denominator) {
  if (denominator == 0) throw std::invalid_argument("ExactScore: zero denominator");
  if (numerator == 0) return;
  if (denominator >= numerators_.size()) numerators_.resize(denominator + 1, 0);
  numerators_[denominator] += numerator;
}

ExactScore& ExactScore::operator+=(const ExactScore& other) {
  if (other.numerators_.size() > numerators_.size()) numerators_.resize(other.numerators_.size(), 0);
  for (std::size_t d = 0; d < other.numerators_.size(); ++d) numerators_[d] += other.numerators_[d];
  return *this;
}

bool ExactScore::is_zero() const noexcept {
  return std::all_of(numerators_.begin(), numerators_.end(), [](std::uint64_t n) { return n == 0; });
}

double ExactScore::to_double() const {
  auto v = exact_value(numerators_);
  return to_double_rounded(mp::numerator(v), mp::denominator(v));
}

std::pair<std::string, std::string> ExactScore::as_fraction() const {
  auto v = exact_value(numerators_);
  return {mp::numerator(v).str(), mp::denominator(v).str()};
}

double rational_to_double(const std::string& numerator, const std::string& denominator) {
  mp::cpp_rational v{mp::cpp_int(numerator), mp::cpp_int(denominator)};
  return to_double_rounded(mp::numerator(v), mp::denominator(v));
}

// --- accumulation ---

CdsAccumulator::CdsAccumulator(std::size_t candidates) : exact_(candidates) {}

void CdsAccumulator::check_order(UserId user) {
  if (any_ && user <= last_)
    throw MetricError(Code::kDuplicateUser, "user " + std::to_string(user) +
                                                " submitted out of order or twice; each user contributes once");
  any_ = true;
  last_ = user;
}

void CdsAccumulator::add(UserId user, PartyFollowCounts counts, std::span<const std::uint8_t> follows,
                         std::span<const Party> candidate_parties) {
  if (follows.size() != exact_.size() || candidate_parties.size() != exact_.size())
    throw MetricError(Code::kUnknownCandidate, "follow vector does not match the candidate party list");
  const std::uint32_t total = counts.total();
  if (total == 0) throw MetricError(Code::kUndefinedWeight, "congressional weight undefined: user follows no senator");
  std::uint32_t n = 0;
  for (auto f : follows) n += f != 0;
  if (n == 0) throw MetricError(Code::kNoCandidateFollowed, "devotedness undefined: user follows no candidate");
  check_order(user);
  const std::uint64_t den = std::uint64_t{total} * n;
  for (std::size_t j = 0; j < follows.size(); ++j) {
    if (!follows[j]) continue;
    exact_[j].add_term(candidate_parties[j] == Party::kDemocrat ? counts.alpha : counts.beta, den);
  }
  ++users_;
}

void CdsAccumulator::add(UserId user, const CdsContribution& c) {
  if (c.numerators.size() != exact_.size())
    throw MetricError(Code::kUnknownCandidate, "contribution does not match the candidate count");
  check_order(user);
  for (std::size_t j = 0; j < c.numerators.size(); ++j) exact_[j].add_term(c.numerators[j], c.denominator);
  ++users_;
}

void CdsAccumulator::merge(const CdsAccumulator& other) {
  for (std::size_t j = 0; j < exact_.size(); ++j) exact_[j] += other.exact_[j];
  users_ += other.users_;
}

DevotednessScores CdsAccumulator::finish() const {
  DevotednessScores s;
  s.exact = exact_;
  s.users = users_;
  for (const auto& e : exact_) s.cds.push_back(e.to_double());
  return s;
}

DevotednessScores accumulate_cds(std::span<const UserCds> contributions, std::size_t candidates) {
  std::vector<std::size_t> order(contributions.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return contributions[a].user < contributions[b].user; });
  CdsAccumulator acc(candidates);
  for (std::size_t i : order) acc.add(contributions[i].user, contributions[i].contribution);
  return acc.finish();
}

std::vector<double> cdr_from(const DevotednessScores& scores) {
  ExactScore total;
  for (const auto& e : scores.exact) total += e;
  if (total.is_zero()) return {};
  auto [tn, td] = total.as_fraction();
  const mp::cpp_rational t{mp::cpp_int(tn), mp::cpp_int(td)};
  std::vector<double> out;
  for (const auto& e : scores.exact) {
    auto [n, d] = e.as_fraction();
    const mp::cpp_rational share = mp::cpp_rational{mp::cpp_int(n), mp::cpp_int(d)} / t;
    out.push_back(to_double_rounded(mp::numerator(share), mp::denominator(share)));
  }
  return out;
}

}  // namespace affinity
