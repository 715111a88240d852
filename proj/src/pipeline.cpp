#include "affinity/pipeline.hpp"

#include <algorithm>

#include "affinity/parallel.hpp"

namespace affinity {

using Code = PipelineError::Code;

std::string_view to_string(Level level) {
  switch (level) {
    case Level::kSport: return "sport";
    case Level::kState: return "state";
    case Level::kTeam: return "team";
  }
  return "?";
}

std::optional<Level> parse_level(std::string_view s) {
  if (s == "sport") return Level::kSport;
  if (s == "state") return Level::kState;
  if (s == "team") return Level::kTeam;
  return std::nullopt;
}

namespace {

const IdSet& require_set(const Snapshot& snapshot, const std::string& handle) {
  const IdSet* s = snapshot.find(handle);
  if (!s) throw PipelineError(Code::kMissingFollowerSet, "no follower set loaded for '" + handle + "'");
  return *s;
}

std::vector<const IdSet*> sets_of(const Snapshot& snapshot, const std::vector<const Entity*>& entities) {
  std::vector<const IdSet*> out;
  out.reserve(entities.size());
  for (const Entity* e : entities) out.push_back(&require_set(snapshot, e->handle));
  return out;
}

// Calls f(index in members) for every element of `subset`, which must be a
// subset of the ascending `members`.
template <class F>
void walk_members(std::span<const UserId> members, const IdSet& subset, F&& f) {
  auto pos = members.begin();
  subset.for_each([&](UserId u) {
    pos = std::lower_bound(pos, members.end(), u);
    f(static_cast<std::size_t>(pos - members.begin()));
    ++pos;
  });
}

struct Group {
  GroupKey key;
  std::vector<std::string> teams;
};

std::vector<Group> groups_for(const Registry& registry, Level level) {
  std::vector<Group> groups;
  for (League league : registry.leagues()) {
    auto handles = [](const std::vector<const Entity*>& teams) {
      std::vector<std::string> h;
      for (const Entity* t : teams) h.push_back(t->handle);
      return h;
    };
    switch (level) {
      case Level::kSport:
        groups.push_back({{league, "", ""}, handles(registry.teams_by(league))});
        break;
      case Level::kState:
        for (const auto& state : registry.states_with_teams(league))
          groups.push_back({{league, state, ""}, handles(registry.teams_by(league, state))});
        break;
      case Level::kTeam:
        for (const Entity* t : registry.teams_by(league))
          groups.push_back({{league, t->team().state, t->handle}, {t->handle}});
        break;
    }
  }
  std::sort(groups.begin(), groups.end(), [](const Group& a, const Group& b) { return a.key < b.key; });
  return groups;
}

// Shared inputs for the per-group tables.
struct Prepared {
  std::vector<Group> groups;
  std::vector<IdSet> fans;  // exclusive fans per group
};

Prepared prepare(const Snapshot& snapshot, Level level, unsigned threads) {
  const Registry& registry = snapshot.registry();
  if (registry.candidates().empty() || registry.senators().empty())
    throw PipelineError(Code::kIncompleteRegistry, "registry needs at least one candidate and one senator");
  const auto leagues = registry.leagues();
  if (leagues.empty()) throw PipelineError(Code::kIncompleteRegistry, "registry has no teams");
  sets_of(snapshot, registry.candidates());
  sets_of(snapshot, registry.senators());

  std::map<std::string, IdSet> exclusive;
  for (League league : leagues) exclusive.merge(exclusive_fans(snapshot, league));

  Prepared p;
  p.groups = groups_for(registry, level);
  p.fans.resize(p.groups.size());
  parallel_for(p.groups.size(), threads, [&](std::size_t g) {
    std::vector<const IdSet*> parts;
    for (const auto& t : p.groups[g].teams) parts.push_back(&exclusive.at(t));
    p.fans[g] = unite_all(parts);
  });
  return p;
}

SenatorBreakdown breakdown_with(const IdSet& fans, const IdSet& dem, const IdSet& rep) {
  const IdSet fd = intersect(fans, dem);
  const IdSet fr = intersect(fans, rep);
  SenatorBreakdown b;
  b.both_count = intersection_size(fd, fr);
  b.only_democrat_count = fd.size() - b.both_count;
  b.only_republican_count = fr.size() - b.both_count;
  b.senator_followers = b.only_democrat_count + b.only_republican_count + b.both_count;
  if (b.senator_followers > 0) {
    const double t = static_cast<double>(b.senator_followers);
    b.only_democrat = static_cast<double>(b.only_democrat_count) / t;
    b.only_republican = static_cast<double>(b.only_republican_count) / t;
    b.both = static_cast<double>(b.both_count) / t;
  }
  return b;
}

std::pair<IdSet, IdSet> party_unions(const Snapshot& snapshot) {
  std::vector<const IdSet*> dem, rep;
  const PartySets s = senator_sets(snapshot);
  for (std::size_t i = 0; i < s.sets.size(); ++i) (s.parties[i] == Party::kDemocrat ? dem : rep).push_back(s.sets[i]);
  return {unite_all(dem), unite_all(rep)};
}

}  // namespace

// --- filters ---

std::map<std::string, IdSet> exclusive_fans(const Snapshot& snapshot, League league) {
  const auto teams = snapshot.registry().teams_by(league);
  if (teams.empty())
    throw PipelineError(Code::kNoTeams, "league " + std::string(to_string(league)) + " has no teams configured");
  const auto sets = sets_of(snapshot, teams);

  IdSet seen, multi;
  for (const IdSet* s : sets) {
    multi = unite(multi, intersect(seen, *s));
    seen = unite(seen, *s);
  }
  std::map<std::string, IdSet> out;
  for (std::size_t i = 0; i < teams.size(); ++i) out.emplace(teams[i]->handle, difference(*sets[i], multi));
  return out;
}

IdSet senator_union(const Snapshot& snapshot) { return unite_all(sets_of(snapshot, snapshot.registry().senators())); }

IdSet candidate_union(const Snapshot& snapshot) {
  return unite_all(sets_of(snapshot, snapshot.registry().candidates()));
}

IdSet politically_interested(const IdSet& fans, const Snapshot& snapshot) {
  return intersect(fans, senator_union(snapshot));
}

IdSet politically_interested(const IdSet& fans, const IdSet& senator_followers) {
  return intersect(fans, senator_followers);
}

double engagement_rate(const IdSet& fans, std::span<const IdSet* const> candidates) {
  if (fans.empty()) throw PipelineError(Code::kEmptyFans, "engagement rate undefined for an empty fan set");
  return static_cast<double>(intersection_size(fans, unite_all(candidates))) / static_cast<double>(fans.size());
}

// --- ratios ---

std::vector<double> ratios_from_counts(std::span<const std::uint64_t> overlaps) {
  std::uint64_t total = 0;
  for (auto o : overlaps) total += o;
  if (total == 0) throw PipelineError(Code::kUndefinedRow, "following ratios undefined: no fan follows any candidate");
  std::vector<double> out;
  for (auto o : overlaps) out.push_back(static_cast<double>(o) / static_cast<double>(total));
  return out;
}

RatioRow following_ratios(const IdSet& fans, std::span<const IdSet* const> candidate_sets) {
  RatioRow row;
  row.fans = fans.size();
  for (const IdSet* c : candidate_sets) row.overlaps.push_back(intersection_size(fans, *c));
  if (std::any_of(row.overlaps.begin(), row.overlaps.end(), [](auto o) { return o != 0; }))
    row.ratios = ratios_from_counts(row.overlaps);
  return row;
}

SenatorBreakdown senator_breakdown(const IdSet& fans, const Snapshot& snapshot) {
  auto [dem, rep] = party_unions(snapshot);
  auto b = breakdown_with(fans, dem, rep);
  if (!b.defined()) throw PipelineError(Code::kUndefinedRow, "senator breakdown undefined: no fan follows a senator");
  return b;
}

// --- counts ---

PartySets senator_sets(const Snapshot& snapshot) {
  PartySets out;
  for (const Entity* e : snapshot.registry().senators()) {
    out.sets.push_back(&require_set(snapshot, e->handle));
    out.parties.push_back(std::get<SenatorRole>(e->role).party);
  }
  return out;
}

std::vector<PartyFollowCounts> count_party_follows(std::span<const UserId> members, const IdSet& member_set,
                                                   const PartySets& senators, CountOrientation orientation,
                                                   std::uint64_t inverted_threshold) {
  if (orientation == CountOrientation::kAuto)
    orientation = members.size() > inverted_threshold ? CountOrientation::kPerSenator : CountOrientation::kPerUser;

  std::vector<PartyFollowCounts> counts(members.size());
  if (orientation == CountOrientation::kPerUser) {
    for (std::size_t i = 0; i < members.size(); ++i) {
      for (std::size_t s = 0; s < senators.sets.size(); ++s) {
        if (!senators.sets[s]->contains(members[i])) continue;
        (senators.parties[s] == Party::kDemocrat ? counts[i].alpha : counts[i].beta) += 1;
      }
    }
  } else {
    for (std::size_t s = 0; s < senators.sets.size(); ++s) {
      const bool dem = senators.parties[s] == Party::kDemocrat;
      walk_members(members, intersect(member_set, *senators.sets[s]),
                   [&](std::size_t i) { (dem ? counts[i].alpha : counts[i].beta) += 1; });
    }
  }
  return counts;
}

// --- tables ---

CdrTable run_cdr(const Snapshot& snapshot, Level level, const PipelineOptions& options) {
  const Registry& registry = snapshot.registry();
  Prepared p = prepare(snapshot, level, options.threads);
  const auto roster = CandidateRoster::from_registry(registry);
  const auto candidates = sets_of(snapshot, registry.candidates());
  const PartySets senators = senator_sets(snapshot);
  const IdSet eligible = intersect(unite_all(senators.sets), unite_all(candidates));
  const std::size_t nc = roster.size();

  CdrTable table{level, roster.handles(), {}};
  table.rows.resize(p.groups.size());
  parallel_for(p.groups.size(), options.threads, [&](std::size_t g) {
    CdrRow& row = table.rows[g];
    row.key = p.groups[g].key;
    const IdSet members = intersect(p.fans[g], eligible);
    const auto ids = members.to_vector();
    row.cohort_size = ids.size();

    const auto counts = count_party_follows(ids, members, senators, options.orientation, options.inverted_threshold);
    std::vector<std::uint8_t> follows(ids.size() * nc, 0);
    for (std::size_t j = 0; j < nc; ++j)
      walk_members(ids, intersect(members, *candidates[j]), [&](std::size_t i) { follows[i * nc + j] = 1; });

    CdsAccumulator acc(nc);
    for (std::size_t i = 0; i < ids.size(); ++i)
      acc.add(ids[i], counts[i], std::span(follows).subspan(i * nc, nc), roster.parties());
    auto scores = acc.finish();
    row.cdr = cdr_from(scores);
    row.exact = std::move(scores.exact);
    row.cds = std::move(scores.cds);
  });
  return table;
}

std::vector<RatioRow> ratio_table(const Snapshot& snapshot, Level level, const PipelineOptions& options) {
  Prepared p = prepare(snapshot, level, options.threads);
  const auto candidates = sets_of(snapshot, snapshot.registry().candidates());
  std::vector<RatioRow> rows(p.groups.size());
  parallel_for(p.groups.size(), options.threads, [&](std::size_t g) {
    rows[g] = following_ratios(p.fans[g], candidates);
    rows[g].key = p.groups[g].key;
  });
  return rows;
}

std::vector<SenatorBreakdown> senator_breakdown_table(const Snapshot& snapshot, Level level,
                                                      const PipelineOptions& options) {
  Prepared p = prepare(snapshot, level, options.threads);
  auto [dem, rep] = party_unions(snapshot);
  std::vector<SenatorBreakdown> rows(p.groups.size());
  parallel_for(p.groups.size(), options.threads, [&](std::size_t g) {
    rows[g] = breakdown_with(p.fans[g], dem, rep);
    rows[g].key = p.groups[g].key;
  });
  return rows;
}

std::vector<EngagementRow> engagement_table(const Snapshot& snapshot, Level level, const PipelineOptions& options) {
  Prepared p = prepare(snapshot, level, options.threads);
  const IdSet candidates = candidate_union(snapshot);
  const IdSet senators = senator_union(snapshot);
  std::vector<EngagementRow> rows(p.groups.size());
  parallel_for(p.groups.size(), options.threads, [&](std::size_t g) {
    EngagementRow& row = rows[g];
    const IdSet& fans = p.fans[g];
    row.key = p.groups[g].key;
    row.fans = fans.size();
    const IdSet engaged = intersect(fans, candidates);
    row.candidate_followers = engaged.size();
    row.senator_followers = intersection_size(fans, senators);
    row.eligible = intersection_size(engaged, senators);
    row.engagement_rate = row.fans ? static_cast<double>(row.candidate_followers) / static_cast<double>(row.fans) : 0.0;
  });
  return rows;
}

}  // namespace affinity
