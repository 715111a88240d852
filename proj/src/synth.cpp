#include "affinity/synth.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include <fmt/format.h>

#include "affinity/digest.hpp"
#include "affinity/parallel.hpp"
#include "json.hpp"

namespace affinity {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string join(const std::vector<std::string>& issues) {
  std::string s = "invalid synth config:";
  for (const auto& i : issues) s += "\n  " + i;
  return s;
}

}  // namespace

SynthConfigError::SynthConfigError(std::vector<std::string> issues)
    : std::runtime_error(join(issues)), issues_(std::move(issues)) {}

std::vector<SynthTeam> builtin_roster() {
  using L = League;
  return {
      {"Nets", L::kNBA, "NY"},        {"Knicks", L::kNBA, "NY"},     {"Bills", L::kNFL, "NY"},
      {"Jets", L::kNFL, "NY"},        {"Giants", L::kNFL, "NY"},     {"Warriors", L::kNBA, "CA"},
      {"Clippers", L::kNBA, "CA"},    {"Lakers", L::kNBA, "CA"},     {"Kings", L::kNBA, "CA"},
      {"Rams", L::kNFL, "CA"},        {"Chargers", L::kNFL, "CA"},   {"Raiders", L::kNFL, "CA"},
      {"49ers", L::kNFL, "CA"},       {"Cavaliers", L::kNBA, "OH"},  {"Browns", L::kNFL, "OH"},
      {"Bengals", L::kNFL, "OH"},     {"Heat", L::kNBA, "FL"},       {"Magic", L::kNBA, "FL"},
      {"Jaguars", L::kNFL, "FL"},     {"Dolphins", L::kNFL, "FL"},   {"Buccaneers", L::kNFL, "FL"},
      {"Mavericks", L::kNBA, "TX"},   {"Rockets", L::kNBA, "TX"},    {"Spurs", L::kNBA, "TX"},
      {"Cowboys", L::kNFL, "TX"},     {"Texans", L::kNFL, "TX"},     {"Hawks", L::kNBA, "GA"},
      {"Falcons", L::kNFL, "GA"},
  };
}

std::vector<SynthCandidate> default_candidates() {
  return {
      {"BernieSanders", Party::kDemocrat, 0.6, 1.0},
      {"JoeBiden", Party::kDemocrat, 0.6, 1.0},
      {"realDonaldTrump", Party::kRepublican, 0.7, 1.0},
  };
}

std::string_view to_string(LatentParty p) {
  switch (p) {
    case LatentParty::kDemocrat: return "D";
    case LatentParty::kRepublican: return "R";
    case LatentParty::kNoise: return "noise";
  }
  return "?";
}

// --- config ---

namespace {

template <class T>
void read_field(const json& obj, const char* key, T& out, std::vector<std::string>& issues,
                const std::string& where = "") {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    issues.push_back(where + key + ": wrong type");
  }
}

bool in_unit(double p) { return p >= 0.0 && p <= 1.0; }

}  // namespace

SynthConfig parse_synth_config(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SynthConfigError({std::string("not valid JSON: ") + e.what()});
  }
  if (!doc.is_object()) throw SynthConfigError({"config must be a JSON object"});

  static const std::set<std::string> known{
      "seed",           "states",         "candidates",          "teams",
      "noise_rate",     "politics_rate",  "senator_intensity",   "cross_senator_intensity",
      "secondary_factor", "cross_candidate_rate", "noise_follow_rate", "home_team_rate",
      "senators",       "id_base",        "threads"};
  std::vector<std::string> issues;
  for (auto& [k, v] : doc.items())
    if (!known.count(k)) issues.push_back(k + ": unknown field");

  SynthConfig c;
  read_field(doc, "seed", c.seed, issues);
  read_field(doc, "noise_rate", c.noise_rate, issues);
  read_field(doc, "politics_rate", c.politics_rate, issues);
  read_field(doc, "senator_intensity", c.senator_intensity, issues);
  read_field(doc, "cross_senator_intensity", c.cross_senator_intensity, issues);
  read_field(doc, "secondary_factor", c.secondary_factor, issues);
  read_field(doc, "cross_candidate_rate", c.cross_candidate_rate, issues);
  read_field(doc, "noise_follow_rate", c.noise_follow_rate, issues);
  read_field(doc, "home_team_rate", c.home_team_rate, issues);
  read_field(doc, "id_base", c.id_base, issues);
  read_field(doc, "threads", c.threads, issues);

  if (auto it = doc.find("senators"); it != doc.end()) {
    if (!it->is_object()) {
      issues.push_back("senators: must be an object");
    } else {
      read_field(*it, "democrat", c.democrat_senators, issues, "senators.");
      read_field(*it, "republican", c.republican_senators, issues, "senators.");
      read_field(*it, "independent", c.independent_senators, issues, "senators.");
    }
  }

  if (auto it = doc.find("states"); it == doc.end() || !it->is_array()) {
    issues.push_back("states: required array");
  } else {
    for (std::size_t i = 0; i < it->size(); ++i) {
      const json& s = (*it)[i];
      const std::string where = "states[" + std::to_string(i) + "].";
      if (!s.is_object()) {
        issues.push_back(where + ": must be an object");
        continue;
      }
      SynthState st;
      read_field(s, "code", st.code, issues, where);
      read_field(s, "users", st.users, issues, where);
      read_field(s, "lean", st.lean, issues, where);
      c.states.push_back(std::move(st));
    }
  }

  if (auto it = doc.find("candidates"); it == doc.end()) {
    // keep the defaults
  } else if (!it->is_array()) {
    issues.push_back("candidates: must be an array");
  } else {
    c.candidates.clear();
    for (std::size_t i = 0; i < it->size(); ++i) {
      const json& s = (*it)[i];
      const std::string where = "candidates[" + std::to_string(i) + "].";
      SynthCandidate cand;
      std::string party;
      read_field(s, "handle", cand.handle, issues, where);
      read_field(s, "party", party, issues, where);
      read_field(s, "follow_probability", cand.follow_probability, issues, where);
      read_field(s, "favorite_weight", cand.favorite_weight, issues, where);
      if (auto p = parse_party(party)) cand.party = *p;
      else issues.push_back(where + "party: must be Democrat or Republican");
      c.candidates.push_back(std::move(cand));
    }
  }

  if (auto it = doc.find("teams"); it == doc.end() || (it->is_string() && *it == "builtin")) {
    // resolved against the configured states in validate()/generate()
  } else if (!it->is_array()) {
    issues.push_back("teams: must be \"builtin\" or an array");
  } else {
    for (std::size_t i = 0; i < it->size(); ++i) {
      const json& s = (*it)[i];
      const std::string where = "teams[" + std::to_string(i) + "].";
      SynthTeam t;
      std::string league;
      read_field(s, "handle", t.handle, issues, where);
      read_field(s, "league", league, issues, where);
      read_field(s, "state", t.state, issues, where);
      if (auto l = parse_league(league)) t.league = *l;
      else issues.push_back(where + "league: unknown league '" + league + "'");
      c.teams.push_back(std::move(t));
    }
  }

  try {
    validate(c);
  } catch (const SynthConfigError& e) {
    issues.insert(issues.end(), e.issues().begin(), e.issues().end());
  }
  if (!issues.empty()) throw SynthConfigError(std::move(issues));
  return c;
}

SynthConfig load_synth_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SynthConfigError({"cannot read config file " + path.string()});
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_synth_config(text);
}

namespace {

std::vector<SynthTeam> resolved_teams(const SynthConfig& c) {
  if (!c.teams.empty()) return c.teams;
  std::vector<SynthTeam> out;
  for (auto& t : builtin_roster())
    if (std::any_of(c.states.begin(), c.states.end(), [&](const SynthState& s) { return s.code == t.state; }))
      out.push_back(t);
  return out;
}

}  // namespace

void validate(const SynthConfig& c) {
  std::vector<std::string> issues;
  auto prob = [&](const char* name, double p) {
    if (!in_unit(p)) issues.push_back(std::string(name) + ": must be in [0,1]");
  };
  prob("noise_rate", c.noise_rate);
  prob("politics_rate", c.politics_rate);
  prob("secondary_factor", c.secondary_factor);
  prob("cross_candidate_rate", c.cross_candidate_rate);
  prob("noise_follow_rate", c.noise_follow_rate);
  prob("home_team_rate", c.home_team_rate);
  if (!(c.senator_intensity >= 0)) issues.push_back("senator_intensity: must be >= 0");
  if (!(c.cross_senator_intensity >= 0)) issues.push_back("cross_senator_intensity: must be >= 0");
  if (c.democrat_senators < 0 || c.republican_senators < 0 || c.independent_senators < 0)
    issues.push_back("senators: counts must be >= 0");
  else if (c.democrat_senators + c.republican_senators + c.independent_senators == 0)
    issues.push_back("senators: at least one senator required");

  if (c.states.empty()) issues.push_back("states: at least one state required");
  std::set<std::string> codes;
  std::uint64_t total_users = 0;
  for (std::size_t i = 0; i < c.states.size(); ++i) {
    const auto& s = c.states[i];
    const std::string where = "states[" + std::to_string(i) + "].";
    if (s.code.empty()) issues.push_back(where + "code: required");
    else if (!codes.insert(s.code).second) issues.push_back(where + "code: duplicate state '" + s.code + "'");
    if (s.users < 1) issues.push_back(where + "users: must be >= 1");
    if (!(s.lean >= -1.0 && s.lean <= 1.0)) issues.push_back(where + "lean: must be in [-1,1]");
    total_users += s.users;
  }
  if (total_users > (~UserId{0} - c.id_base) / 4) issues.push_back("id_base: user ids would overflow");

  if (c.candidates.empty()) issues.push_back("candidates: at least one candidate required");
  std::set<std::string> handles;
  for (std::size_t i = 0; i < c.candidates.size(); ++i) {
    const auto& cand = c.candidates[i];
    const std::string where = "candidates[" + std::to_string(i) + "].";
    if (cand.handle.empty()) issues.push_back(where + "handle: required");
    else if (!handles.insert(cand.handle).second) issues.push_back(where + "handle: duplicate '" + cand.handle + "'");
    if (!in_unit(cand.follow_probability)) issues.push_back(where + "follow_probability: must be in [0,1]");
    if (!(cand.favorite_weight >= 0)) issues.push_back(where + "favorite_weight: must be >= 0");
  }

  const auto teams = resolved_teams(c);
  std::set<League> leagues;
  for (std::size_t i = 0; i < teams.size(); ++i) {
    const auto& t = teams[i];
    const std::string where = "teams[" + std::to_string(i) + "].";
    leagues.insert(t.league);
    if (t.handle.empty()) issues.push_back(where + "handle: required");
    else if (!handles.insert(t.handle).second) issues.push_back(where + "handle: duplicate '" + t.handle + "'");
    if (!codes.count(t.state)) issues.push_back(where + "state: '" + t.state + "' is not a configured state");
  }
  if (teams.empty()) issues.push_back("teams: roster is empty for the configured states");
  for (const auto& s : c.states)
    for (League l : leagues)
      if (std::none_of(teams.begin(), teams.end(),
                       [&](const SynthTeam& t) { return t.state == s.code && t.league == l; }))
        issues.push_back("teams: roster has no " + std::string(to_string(l)) + " team for state '" + s.code + "'");

  if (!issues.empty()) throw SynthConfigError(std::move(issues));
}

// --- generation ---

namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Counter-based draws: every (user, stream) pair gets its own value, so the
// outcome does not depend on generation order or thread layout.
class Draws {
 public:
  Draws(std::uint64_t seed, std::uint64_t user) : key_(mix(seed ^ mix(user))) {}
  std::uint64_t bits(std::uint64_t stream) const { return mix(key_ + stream * 0xd1b54a32d192ed03ull); }
  double unit(std::uint64_t stream) const { return static_cast<double>(bits(stream) >> 11) * 0x1.0p-53; }
  bool coin(std::uint64_t stream, double p) const { return unit(stream) < p; }
  std::size_t pick(std::uint64_t stream, std::size_t n) const { return static_cast<std::size_t>(unit(stream) * n); }

 private:
  std::uint64_t key_;
};

enum Stream : std::uint64_t {
  kIdJitter = 0,
  kNoise = 1,
  kParty = 2,
  kActive = 3,
  kFavorite = 4,
  kTeamHome = 10,  // + 2 * league
  kTeamPick = 11,  // + 2 * league
  kCandidate = 100,
  kSenator = 1000,
};

struct Plan {
  json manifest;
  std::vector<std::string> handles;  // entity order: candidates, senators, teams
  std::size_t first_senator = 0, first_team = 0;
  std::vector<Party> senator_party;
  std::vector<SynthTeam> teams;
  std::vector<League> leagues;
  // per league: all team indices, and per state the home-state team indices
  std::map<League, std::vector<std::size_t>> league_teams;
  std::map<std::pair<League, std::string>, std::vector<std::size_t>> home_teams;
};

Plan make_plan(const SynthConfig& c) {
  Plan p;
  p.teams = resolved_teams(c);
  json& m = p.manifest;
  m["format"] = std::string(kManifestFormat);
  m["collected_at"] = fmt::format("synthetic seed {}", c.seed);
  m["digest_algorithm"] = "sha256";
  json states = json::array();
  for (const auto& s : c.states) states.push_back(s.code);
  m["states"] = states;
  m["caucus_rule"]["independents"] = json::object();
  json ents = json::array();

  auto file_of = [](const std::string& h) { return "followers/" + h + ".txt"; };
  for (const auto& cand : c.candidates) {
    ents.push_back({{"handle", cand.handle}, {"kind", "candidate"}, {"party", std::string(to_string(cand.party))},
                    {"follower_file", file_of(cand.handle)}});
    p.handles.push_back(cand.handle);
  }
  p.first_senator = p.handles.size();
  auto add_senators = [&](const char* tag, int n, const char* party, Party caucus) {
    for (int i = 1; i <= n; ++i) {
      const std::string h = fmt::format("sen_{}{:02}", tag, i);
      ents.push_back({{"handle", h}, {"kind", "senator"}, {"party", party}, {"follower_file", file_of(h)}});
      if (std::string_view(party) == "Independent")
        m["caucus_rule"]["independents"][h] = std::string(to_string(caucus));
      p.handles.push_back(h);
      p.senator_party.push_back(caucus);
    }
  };
  add_senators("R", c.republican_senators, "Republican", Party::kRepublican);
  add_senators("D", c.democrat_senators, "Democrat", Party::kDemocrat);
  add_senators("I", c.independent_senators, "Independent", Party::kDemocrat);
  p.first_team = p.handles.size();
  for (std::size_t i = 0; i < p.teams.size(); ++i) {
    const auto& t = p.teams[i];
    ents.push_back({{"handle", t.handle},
                    {"kind", "team"},
                    {"league", std::string(to_string(t.league))},
                    {"state", t.state},
                    {"name", t.handle},
                    {"follower_file", file_of(t.handle)}});
    p.handles.push_back(t.handle);
    p.league_teams[t.league].push_back(i);
    p.home_teams[{t.league, t.state}].push_back(i);
  }
  for (const auto& [l, _] : p.league_teams) p.leagues.push_back(l);
  m["entities"] = std::move(ents);
  return p;
}

struct Generated {
  Plan plan;
  std::vector<std::vector<UserId>> followers;  // per entity, ascending
  GroundTruth truth;
};

Generated run(const SynthConfig& c) {
  validate(c);
  Generated g{make_plan(c), {}, {}};
  const Plan& p = g.plan;
  const std::size_t entities = p.handles.size();

  std::vector<std::uint32_t> state_of;
  for (std::uint32_t s = 0; s < c.states.size(); ++s) state_of.insert(state_of.end(), c.states[s].users, s);
  const std::size_t users = state_of.size();

  std::size_t n_dem = 0, n_rep = 0;
  for (Party q : p.senator_party) (q == Party::kDemocrat ? n_dem : n_rep) += 1;
  auto rate = [](double intensity, std::size_t n) { return n == 0 ? 0.0 : std::min(1.0, intensity / n); };
  const double own_dem = rate(c.senator_intensity, n_dem), own_rep = rate(c.senator_intensity, n_rep);
  const double cross_dem = rate(c.cross_senator_intensity, n_dem), cross_rep = rate(c.cross_senator_intensity, n_rep);

  constexpr std::size_t kBlock = 1 << 14;
  const std::size_t blocks = (users + kBlock - 1) / kBlock;
  std::vector<std::vector<std::vector<UserId>>> parts(blocks, std::vector<std::vector<UserId>>(entities));
  g.truth.users.resize(users);

  parallel_for(blocks, c.threads, [&](std::size_t b) {
    auto& out = parts[b];
    const std::size_t end = std::min(users, (b + 1) * kBlock);
    for (std::size_t u = b * kBlock; u < end; ++u) {
      const Draws d(c.seed, u);
      const SynthState& st = c.states[state_of[u]];
      const UserId id = c.id_base + 4 * static_cast<UserId>(u) + (d.bits(kIdJitter) & 3);

      LatentParty party = LatentParty::kNoise;
      if (!d.coin(kNoise, c.noise_rate))
        party = d.coin(kParty, (1.0 + st.lean) / 2.0) ? LatentParty::kRepublican : LatentParty::kDemocrat;
      g.truth.users[u] = {id, state_of[u], party};
      const bool noise = party == LatentParty::kNoise;

      for (std::size_t li = 0; li < p.leagues.size(); ++li) {
        const League l = p.leagues[li];
        const bool home = !noise && d.coin(kTeamHome + 2 * static_cast<std::uint64_t>(l), c.home_team_rate);
        const auto& pool = home ? p.home_teams.at({l, st.code}) : p.league_teams.at(l);
        const std::size_t team = pool[d.pick(kTeamPick + 2 * static_cast<std::uint64_t>(l), pool.size())];
        out[p.first_team + team].push_back(id);
      }

      if (noise) {
        for (std::size_t j = 0; j < c.candidates.size(); ++j)
          if (d.coin(kCandidate + j, c.noise_follow_rate)) out[j].push_back(id);
        for (std::size_t s = 0; s < p.senator_party.size(); ++s)
          if (d.coin(kSenator + s, c.noise_follow_rate)) out[p.first_senator + s].push_back(id);
        continue;
      }
      if (!d.coin(kActive, c.politics_rate)) continue;

      const Party own = party == LatentParty::kDemocrat ? Party::kDemocrat : Party::kRepublican;
      for (std::size_t s = 0; s < p.senator_party.size(); ++s) {
        const bool dem_senator = p.senator_party[s] == Party::kDemocrat;
        const double q = p.senator_party[s] == own ? (dem_senator ? own_dem : own_rep) : (dem_senator ? cross_dem : cross_rep);
        if (d.coin(kSenator + s, q)) out[p.first_senator + s].push_back(id);
      }

      // favorite among the candidates of the user's own party, by weight
      double weight_total = 0;
      for (const auto& cand : c.candidates)
        if (cand.party == own) weight_total += cand.favorite_weight;
      std::size_t favorite = c.candidates.size();
      double x = d.unit(kFavorite) * weight_total;
      for (std::size_t j = 0; j < c.candidates.size() && weight_total > 0; ++j) {
        if (c.candidates[j].party != own) continue;
        favorite = j;
        if (x < c.candidates[j].favorite_weight) break;
        x -= c.candidates[j].favorite_weight;
      }
      for (std::size_t j = 0; j < c.candidates.size(); ++j) {
        const auto& cand = c.candidates[j];
        double q = cand.party != own ? c.cross_candidate_rate
                   : j == favorite   ? cand.follow_probability
                                     : cand.follow_probability * c.secondary_factor;
        if (d.coin(kCandidate + j, q)) out[j].push_back(id);
      }
    }
  });

  g.followers.resize(entities);
  for (std::size_t e = 0; e < entities; ++e)
    for (auto& part : parts) g.followers[e].insert(g.followers[e].end(), part[e].begin(), part[e].end());
  g.truth.seed = c.seed;
  g.truth.states = c.states;
  return g;
}

std::string render_text(const std::vector<UserId>& ids) {
  std::string s;
  s.reserve(ids.size() * 14);
  for (UserId v : ids) fmt::format_to(std::back_inserter(s), "{}\n", v);
  return s;
}

json truth_json(const GroundTruth& t) {
  json doc;
  doc["note"] = "synthetic ground truth; not an input to any analysis";
  doc["seed"] = t.seed;
  json states = json::array();
  for (const auto& s : describe(t))
    states.push_back({{"code", s.code},
                      {"lean", s.lean},
                      {"users", s.users},
                      {"democrats", s.democrats},
                      {"republicans", s.republicans},
                      {"noise", s.noise}});
  doc["states"] = std::move(states);
  json users = json::array();
  for (const auto& u : t.users) users.push_back({u.id, t.states[u.state].code, std::string(to_string(u.party))});
  doc["users"] = std::move(users);
  return doc;
}

struct Rendered {
  Generated gen;
  std::vector<std::string> texts;
};

Rendered render(const SynthConfig& c) {
  Rendered r{run(c), {}};
  auto& ents = r.gen.plan.manifest["entities"];
  r.texts.resize(ents.size());
  parallel_for(ents.size(), c.threads, [&](std::size_t e) { r.texts[e] = render_text(r.gen.followers[e]); });
  for (std::size_t e = 0; e < ents.size(); ++e) ents[e]["digest"] = content_digest(r.texts[e]);
  return r;
}

}  // namespace

std::vector<StateSummary> describe(const GroundTruth& truth) {
  std::vector<StateSummary> out;
  for (const auto& s : truth.states) out.push_back({s.code, s.lean, 0, 0, 0, 0});
  for (const auto& u : truth.users) {
    auto& s = out[u.state];
    ++s.users;
    switch (u.party) {
      case LatentParty::kDemocrat: ++s.democrats; break;
      case LatentParty::kRepublican: ++s.republicans; break;
      case LatentParty::kNoise: ++s.noise; break;
    }
  }
  return out;
}

SynthDataset generate(const SynthConfig& config) {
  Rendered r = render(config);
  auto registry = std::make_shared<const Registry>(load_registry(r.gen.plan.manifest.dump()));
  std::map<std::string, IdSet> sets;
  for (std::size_t e = 0; e < r.gen.plan.handles.size(); ++e)
    sets.emplace(r.gen.plan.handles[e], IdSet::from_sorted(r.gen.followers[e]));
  return {registry, Snapshot(registry, std::move(sets)), std::move(r.gen.truth)};
}

fs::path write_dataset(const SynthConfig& config, const fs::path& dir) {
  Rendered r = render(config);
  fs::create_directories(dir / "followers");
  auto write = [](const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
    if (!out) throw std::runtime_error("cannot write " + path.string());
  };
  const auto& ents = r.gen.plan.manifest["entities"];
  for (std::size_t e = 0; e < ents.size(); ++e)
    write(dir / ents[e]["follower_file"].get<std::string>(), r.texts[e]);
  write(dir / "ground_truth.json", truth_json(r.gen.truth).dump() + "\n");
  const fs::path manifest = dir / "manifest.json";
  write(manifest, r.gen.plan.manifest.dump(2) + "\n");
  return manifest;
}

}  // namespace affinity
