#ifndef AFFINITY_METRICS_HPP_
#define AFFINITY_METRICS_HPP_

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "affinity/idset.hpp"
#include "affinity/registry.hpp"

namespace affinity {

class MetricError : public std::runtime_error {
 public:
  enum class Code { kUndefinedWeight, kNoCandidateFollowed, kUnknownCandidate, kDuplicateUser };
  MetricError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Code code() const noexcept { return code_; }

 private:
  Code code_;
};

/// Senators followed by one user: alpha counts Democrat-caucus senators,
/// beta counts Republican senators.
struct PartyFollowCounts {
  std::uint32_t alpha = 0;
  std::uint32_t beta = 0;
  std::uint32_t total() const noexcept { return alpha + beta; }
  friend bool operator==(const PartyFollowCounts&, const PartyFollowCounts&) = default;
};

struct CongressionalWeight {
  double dem = 0;
  double rep = 0;
  double of(Party p) const noexcept { return p == Party::kDemocrat ? dem : rep; }
};

/// (alpha/(alpha+beta), beta/(alpha+beta)). Throws kUndefinedWeight when the
/// user follows no senator.
CongressionalWeight congressional_weight(PartyFollowCounts counts);

/// Candidates in a fixed order, with the party each one runs for.
class CandidateRoster {
 public:
  CandidateRoster() = default;
  CandidateRoster(std::vector<std::string> handles, std::vector<Party> parties);
  static CandidateRoster from_registry(const Registry& registry);

  std::size_t size() const noexcept { return handles_.size(); }
  const std::vector<std::string>& handles() const noexcept { return handles_; }
  const std::vector<Party>& parties() const noexcept { return parties_; }
  /// Throws MetricError(kUnknownCandidate).
  std::size_t index_of(std::string_view handle) const;

 private:
  std::vector<std::string> handles_;
  std::vector<Party> parties_;
};

/// Per-user 0/1 indicator per roster candidate.
struct CandidateFollowVector {
  std::vector<std::uint8_t> follows;

  static CandidateFollowVector of(const CandidateRoster& roster, std::span<const std::string> followed);
  std::uint32_t n_followed() const noexcept;
};

/// 1/n for each of the n followed candidates, 0 elsewhere.
std::vector<double> devotedness(const CandidateFollowVector& vec);

/// One user's CDS terms. `values[j]` is the double-precision term for
/// candidate j; the exact term is numerators[j] / denominator, where the
/// denominator is (alpha+beta) * n_followed.
struct CdsContribution {
  std::vector<double> values;
  std::vector<std::uint32_t> numerators;
  std::uint64_t denominator = 0;
};

/// Each followed candidate receives the weight of its own party times the
/// user's devotedness. Throws kUnknownCandidate if `vec` does not cover the
/// roster exactly, kUndefinedWeight / kNoCandidateFollowed on empty inputs.
CdsContribution cds_contribution(PartyFollowCounts counts, const CandidateFollowVector& vec,
                                 std::span<const Party> candidate_parties);

/// Exact non-negative rational, kept as numerator totals per denominator so
/// that adding terms and merging partial sums never rounds.
class ExactScore {
 public:
  void add_term(std::uint64_t numerator, std::uint64_t denominator);
  ExactScore& operator+=(const ExactScore& other);

  bool is_zero() const noexcept;
  /// Correctly rounded (nearest, ties to even).
  double to_double() const;
  /// Reduced numerator and denominator in decimal.
  std::pair<std::string, std::string> as_fraction() const;

  /// Value equality.
  friend bool operator==(const ExactScore& a, const ExactScore& b) { return a.as_fraction() == b.as_fraction(); }

 private:
  std::vector<std::uint64_t> numerators_;  // index = denominator
};

/// Correctly rounded num/den for decimal big-integer strings; den > 0.
double rational_to_double(const std::string& numerator, const std::string& denominator);

struct DevotednessScores {
  std::vector<ExactScore> exact;  // per candidate
  std::vector<double> cds;        // exact values rounded once
  std::uint64_t users = 0;
};

struct UserCds {
  UserId user;
  CdsContribution contribution;
};

/// Streaming CDS sum over users given in strictly ascending UserId order.
class CdsAccumulator {
 public:
  explicit CdsAccumulator(std::size_t candidates);

  /// Throws kDuplicateUser / kUndefinedWeight / kNoCandidateFollowed.
  void add(UserId user, PartyFollowCounts counts, std::span<const std::uint8_t> follows,
           std::span<const Party> candidate_parties);
  void add(UserId user, const CdsContribution& c);
  void merge(const CdsAccumulator& other);

  std::uint64_t users() const noexcept { return users_; }
  DevotednessScores finish() const;

 private:
  void check_order(UserId user);
  std::vector<ExactScore> exact_;
  std::uint64_t users_ = 0;
  bool any_ = false;
  UserId last_ = 0;
};

/// Sums contributions over distinct users; input order does not matter.
/// Throws kDuplicateUser if a user appears twice.
DevotednessScores accumulate_cds(std::span<const UserCds> contributions, std::size_t candidates);

/// CDS_j / sum_k CDS_k, or empty when every CDS is zero.
std::vector<double> cdr_from(const DevotednessScores& scores);

}  // namespace affinity

#endif  // AFFINITY_METRICS_HPP_
