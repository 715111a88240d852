#ifndef AFFINITY_PIPELINE_HPP_
#define AFFINITY_PIPELINE_HPP_

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "affinity/idset.hpp"
#include "affinity/ingest.hpp"
#include "affinity/metrics.hpp"
#include "affinity/registry.hpp"

namespace affinity {

class PipelineError : public std::runtime_error {
 public:
  enum class Code { kIncompleteRegistry, kMissingFollowerSet, kNoTeams, kEmptyFans, kUndefinedRow };
  PipelineError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Code code() const noexcept { return code_; }

 private:
  Code code_;
};

enum class Level { kSport, kState, kTeam };
std::string_view to_string(Level level);
std::optional<Level> parse_level(std::string_view s);

/// Grouping key. `state` is empty at sport level; `team` is empty unless at
/// team level.
struct GroupKey {
  League league;
  std::string state;
  std::string team;
  friend auto operator<=>(const GroupKey&, const GroupKey&) = default;
};

// --- filters ---

/// Users following exactly one team of `league`, keyed by team handle.
/// Throws kNoTeams when the league has no teams.
std::map<std::string, IdSet> exclusive_fans(const Snapshot& snapshot, League league);

IdSet senator_union(const Snapshot& snapshot);
IdSet candidate_union(const Snapshot& snapshot);

/// fans ∩ (users following at least one senator)
IdSet politically_interested(const IdSet& fans, const Snapshot& snapshot);
IdSet politically_interested(const IdSet& fans, const IdSet& senator_followers);

/// |fans ∩ ∪candidates| / |fans|. Throws kEmptyFans.
double engagement_rate(const IdSet& fans, std::span<const IdSet* const> candidates);

// --- following ratios ---

struct RatioRow {
  GroupKey key;
  std::uint64_t fans = 0;
  std::vector<std::uint64_t> overlaps;  // |fans ∩ F_j|, roster order
  std::vector<double> ratios;           // empty when every overlap is empty
  bool defined() const noexcept { return !ratios.empty(); }
};

/// overlap_j / Σ_k overlap_k. Users following several candidates count once
/// per candidate. Throws kUndefinedRow when all counts are zero.
std::vector<double> ratios_from_counts(std::span<const std::uint64_t> overlaps);
RatioRow following_ratios(const IdSet& fans, std::span<const IdSet* const> candidate_sets);

// --- senator breakdown ---

struct SenatorBreakdown {
  GroupKey key;
  std::uint64_t senator_followers = 0;
  std::uint64_t only_democrat_count = 0;
  std::uint64_t only_republican_count = 0;
  std::uint64_t both_count = 0;
  double only_democrat = 0;
  double only_republican = 0;
  double both = 0;
  bool defined() const noexcept { return senator_followers > 0; }
};

/// Partition of fans following any senator by caucus-resolved party.
/// Throws kUndefinedRow if no fan follows a senator.
SenatorBreakdown senator_breakdown(const IdSet& fans, const Snapshot& snapshot);

// --- per-user senator counts ---

enum class CountOrientation {
  kAuto,        // kPerUser below the inverted threshold, else kPerSenator
  kPerUser,     // membership probes per user against every senator set
  kPerSenator,  // walk each senator set once, incrementing per-user counters
};

struct PartySets {
  std::vector<const IdSet*> sets;
  std::vector<Party> parties;
};

PartySets senator_sets(const Snapshot& snapshot);

/// (alpha, beta) for every member, in ascending member order.
std::vector<PartyFollowCounts> count_party_follows(std::span<const UserId> members, const IdSet& member_set,
                                                   const PartySets& senators, CountOrientation orientation,
                                                   std::uint64_t inverted_threshold = 1'000'000);

// --- CDS / CDR ---

struct CdrRow {
  GroupKey key;
  std::uint64_t cohort_size = 0;
  std::vector<ExactScore> exact;
  std::vector<double> cds;
  std::vector<double> cdr;  // empty when undefined (empty cohort or zero total)
  bool defined() const noexcept { return !cdr.empty(); }
};

struct CdrTable {
  Level level;
  std::vector<std::string> candidates;  // registry order
  std::vector<CdrRow> rows;             // sorted by key
};

struct PipelineOptions {
  unsigned threads = 1;
  CountOrientation orientation = CountOrientation::kAuto;
  std::uint64_t inverted_threshold = 1'000'000;
};

/// Per grouping: exclusive fans of the grouping's teams who follow at least
/// one senator and one candidate, scored with CDS and normalized to CDR.
CdrTable run_cdr(const Snapshot& snapshot, Level level, const PipelineOptions& options = {});

/// Following ratios per grouping over exclusive fans (no senator filter).
std::vector<RatioRow> ratio_table(const Snapshot& snapshot, Level level, const PipelineOptions& options = {});

/// Senator breakdown per grouping over exclusive fans.
std::vector<SenatorBreakdown> senator_breakdown_table(const Snapshot& snapshot, Level level,
                                                      const PipelineOptions& options = {});

struct EngagementRow {
  GroupKey key;
  std::uint64_t fans = 0;                   // exclusive fans
  std::uint64_t candidate_followers = 0;    // of those, following any candidate
  std::uint64_t senator_followers = 0;      // of those, following any senator
  std::uint64_t eligible = 0;               // following a senator and a candidate
  double engagement_rate = 0;               // candidate_followers / fans (0 when no fans)
};

std::vector<EngagementRow> engagement_table(const Snapshot& snapshot, Level level,
                                            const PipelineOptions& options = {});

}  // namespace affinity

#endif  // AFFINITY_PIPELINE_HPP_
