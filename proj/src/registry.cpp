#include "affinity/registry.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace affinity {

using json = nlohmann::json;
using Code = RegistryIssue::Code;

std::string_view to_string(Party p) {
  return p == Party::kDemocrat ? "Democrat" : "Republican";
}

std::string_view to_string(League l) { return l == League::kNBA ? "NBA" : "NFL"; }

std::string_view to_string(FileFormat f) { return f == FileFormat::kText ? "text" : "binary"; }

std::optional<Party> parse_party(std::string_view s) {
  if (s == "Democrat") return Party::kDemocrat;
  if (s == "Republican") return Party::kRepublican;
  return std::nullopt;
}

std::optional<League> parse_league(std::string_view s) {
  if (s == "NBA") return League::kNBA;
  if (s == "NFL") return League::kNFL;
  return std::nullopt;
}

std::string_view to_string(RegistryIssue::Code c) {
  switch (c) {
    case Code::kParse: return "parse_error";
    case Code::kSchema: return "schema_error";
    case Code::kDuplicateHandle: return "duplicate_handle";
    case Code::kUnknownKind: return "unknown_kind";
    case Code::kUnknownLeague: return "unknown_league";
    case Code::kUnknownParty: return "unknown_party";
    case Code::kUnknownState: return "unknown_state";
    case Code::kSenatorIsCandidate: return "senator_is_candidate";
    case Code::kMissingCaucusMapping: return "missing_caucus_mapping";
    case Code::kNotASenator: return "not_a_senator";
  }
  return "unknown";
}

namespace {

std::string summarize(const std::vector<RegistryIssue>& issues) {
  std::ostringstream os;
  os << "registry invalid (" << issues.size() << " issue" << (issues.size() == 1 ? "" : "s") << ")";
  for (const auto& i : issues) {
    os << "; " << to_string(i.code);
    if (!i.handle.empty()) os << " [" << i.handle << "]";
    os << ": " << i.message;
  }
  return os.str();
}

bool is_state_code(const std::string& s) {
  return s.size() == 2 && std::isupper(static_cast<unsigned char>(s[0])) &&
         std::isupper(static_cast<unsigned char>(s[1]));
}

class Loader {
 public:
  void fail(Code code, std::string handle, std::string message) {
    issues_.push_back({code, std::move(handle), std::move(message)});
  }

  std::optional<std::string> string_field(const json& obj, const char* key, const std::string& handle,
                                          bool required) {
    auto it = obj.find(key);
    if (it == obj.end()) {
      if (required) fail(Code::kSchema, handle, std::string("missing field '") + key + "'");
      return std::nullopt;
    }
    if (!it->is_string()) {
      fail(Code::kSchema, handle, std::string("field '") + key + "' must be a string");
      return std::nullopt;
    }
    return it->get<std::string>();
  }

  std::vector<RegistryIssue> issues_;
};

}  // namespace

RegistryError::RegistryError(std::vector<RegistryIssue> issues)
    : std::runtime_error(summarize(issues)), issues_(std::move(issues)) {}

Registry load_registry(std::string_view manifest_text) {
  json doc;
  try {
    doc = json::parse(manifest_text);
  } catch (const json::parse_error& e) {
    throw RegistryError({{Code::kParse, "", e.what()}});
  }
  if (!doc.is_object()) throw RegistryError({{Code::kSchema, "", "manifest must be a JSON object"}});

  Loader ld;
  Registry reg;

  if (auto f = ld.string_field(doc, "format", "", false); f && *f != kManifestFormat)
    ld.fail(Code::kSchema, "", "unsupported manifest format '" + *f + "'");
  reg.collected_at_ = ld.string_field(doc, "collected_at", "", false).value_or("");

  std::set<std::string> state_set;
  if (auto it = doc.find("states"); it == doc.end() || !it->is_array()) {
    ld.fail(Code::kSchema, "", "'states' must be an array of 2-letter codes");
  } else {
    for (const auto& s : *it) {
      if (!s.is_string() || !is_state_code(s.get<std::string>())) {
        ld.fail(Code::kSchema, "", "invalid state code " + s.dump());
        continue;
      }
      if (!state_set.insert(s.get<std::string>()).second) {
        ld.fail(Code::kSchema, "", "state listed twice: " + s.get<std::string>());
        continue;
      }
      reg.states_.push_back(s.get<std::string>());
    }
  }

  if (auto it = doc.find("caucus_rule"); it != doc.end()) {
    const json* mapping = nullptr;
    if (it->is_object()) {
      auto m = it->find("independents");
      if (m != it->end() && m->is_object()) mapping = &*m;
    }
    if (mapping == nullptr) {
      ld.fail(Code::kSchema, "", "'caucus_rule.independents' must be an object");
    } else {
      for (const auto& [handle, party] : mapping->items()) {
        auto p = party.is_string() ? parse_party(party.get<std::string>()) : std::nullopt;
        if (!p) {
          ld.fail(Code::kUnknownParty, handle, "caucus party must be Democrat or Republican");
          continue;
        }
        reg.caucus_.independent_mapping[handle] = *p;
      }
    }
  }

  auto ents = doc.find("entities");
  if (ents == doc.end() || !ents->is_array()) {
    ld.fail(Code::kSchema, "", "'entities' must be an array");
    throw RegistryError(std::move(ld.issues_));
  }

  std::map<std::string, std::string> kind_of;  // handle -> kind, for duplicate diagnosis
  for (const auto& rec : *ents) {
    if (!rec.is_object()) {
      ld.fail(Code::kSchema, "", "entity record must be an object");
      continue;
    }
    auto handle = ld.string_field(rec, "handle", "", true);
    if (!handle) continue;
    if (handle->empty()) {
      ld.fail(Code::kSchema, "", "empty handle");
      continue;
    }
    auto kind = ld.string_field(rec, "kind", *handle, true);
    if (!kind) continue;

    Entity e;
    e.handle = *handle;
    e.person = ld.string_field(rec, "person", *handle, false).value_or("");
    e.follower_file = ld.string_field(rec, "follower_file", *handle, false);
    e.digest = ld.string_field(rec, "digest", *handle, false);
    if (auto fmt = ld.string_field(rec, "format", *handle, false)) {
      if (*fmt == "text") e.format = FileFormat::kText;
      else if (*fmt == "binary") e.format = FileFormat::kBinary;
      else ld.fail(Code::kSchema, *handle, "format must be 'text' or 'binary'");
    }

    bool ok = true;
    if (*kind == "candidate" || *kind == "senator") {
      auto party_s = ld.string_field(rec, "party", *handle, true);
      if (!party_s) continue;
      auto party = parse_party(*party_s);
      if (*kind == "candidate") {
        if (!party) {
          ld.fail(Code::kUnknownParty, *handle, "candidate party must be Democrat or Republican");
          ok = false;
        } else {
          e.role = CandidateRole{*party};
        }
      } else if (party) {
        e.role = SenatorRole{*party, false};
      } else if (*party_s == "Independent") {
        auto m = reg.caucus_.independent_mapping.find(*handle);
        if (m == reg.caucus_.independent_mapping.end()) {
          ld.fail(Code::kMissingCaucusMapping, *handle,
                  "independent senator has no caucus_rule mapping");
          ok = false;
        } else {
          e.role = SenatorRole{m->second, true};
        }
      } else {
        ld.fail(Code::kUnknownParty, *handle, "unknown senator party '" + *party_s + "'");
        ok = false;
      }
    } else if (*kind == "team") {
      auto league_s = ld.string_field(rec, "league", *handle, true);
      auto state = ld.string_field(rec, "state", *handle, true);
      auto name = ld.string_field(rec, "name", *handle, false);
      if (!league_s || !state) continue;
      auto league = parse_league(*league_s);
      if (!league) {
        ld.fail(Code::kUnknownLeague, *handle, "unknown league '" + *league_s + "'");
        ok = false;
      }
      if (!state_set.count(*state)) {
        ld.fail(Code::kUnknownState, *handle, "team state '" + *state + "' is not a configured state");
        ok = false;
      }
      if (ok) e.role = TeamRole{*league, *state, name.value_or(*handle)};
    } else {
      ld.fail(Code::kUnknownKind, *handle, "unknown entity kind '" + *kind + "'");
      ok = false;
    }

    auto [prev, inserted] = kind_of.emplace(*handle, *kind);
    if (!inserted) {
      const bool cross = (prev->second == "senator" && *kind == "candidate") ||
                         (prev->second == "candidate" && *kind == "senator");
      if (cross)
        ld.fail(Code::kSenatorIsCandidate, *handle, "handle listed as both senator and candidate");
      else
        ld.fail(Code::kDuplicateHandle, *handle, "handle appears more than once");
      continue;
    }
    if (ok) reg.entities_.push_back(std::move(e));
  }

  // A person running for president is excluded from the senator roster.
  std::map<std::string, std::string> candidate_people;
  for (const auto& e : reg.entities_)
    if (e.is_candidate() && !e.person.empty()) candidate_people[e.person] = e.handle;
  for (const auto& e : reg.entities_) {
    if (!e.is_senator() || e.person.empty()) continue;
    if (auto it = candidate_people.find(e.person); it != candidate_people.end())
      ld.fail(Code::kSenatorIsCandidate, e.handle,
              "senator '" + e.person + "' is also candidate " + it->second);
  }

  for (const auto& [handle, party] : reg.caucus_.independent_mapping) {
    auto it = kind_of.find(handle);
    if (it == kind_of.end() || it->second != "senator")
      ld.fail(Code::kSchema, handle, "caucus_rule maps a handle that is not a senator");
  }

  if (!ld.issues_.empty()) throw RegistryError(std::move(ld.issues_));

  for (std::size_t i = 0; i < reg.entities_.size(); ++i) reg.index_.emplace(reg.entities_[i].handle, i);
  return reg;
}

Registry load_registry_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RegistryError({{Code::kParse, "", "cannot open manifest " + path.string()}});
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_registry(ss.str());
}

const Entity* Registry::find(std::string_view handle) const {
  auto it = index_.find(handle);
  return it == index_.end() ? nullptr : &entities_[it->second];
}

const Entity& Registry::at(std::string_view handle) const {
  if (const Entity* e = find(handle)) return *e;
  throw std::out_of_range("no entity with handle '" + std::string(handle) + "'");
}

std::vector<const Entity*> Registry::candidates() const {
  std::vector<const Entity*> out;
  for (const auto& e : entities_)
    if (e.is_candidate()) out.push_back(&e);
  return out;
}

std::vector<const Entity*> Registry::senators() const {
  std::vector<const Entity*> out;
  for (const auto& e : entities_)
    if (e.is_senator()) out.push_back(&e);
  return out;
}

std::vector<League> Registry::leagues() const {
  std::vector<League> out;
  for (League l : {League::kNBA, League::kNFL}) {
    if (std::any_of(entities_.begin(), entities_.end(),
                    [&](const Entity& e) { return e.is_team() && e.team().league == l; }))
      out.push_back(l);
  }
  return out;
}

std::vector<const Entity*> Registry::teams_by(League league, std::optional<std::string_view> state) const {
  if (state && std::find(states_.begin(), states_.end(), *state) == states_.end())
    throw RegistryError({{Code::kUnknownState, "", "unknown state '" + std::string(*state) + "'"}});
  std::vector<const Entity*> out;
  for (const auto& e : entities_) {
    if (!e.is_team()) continue;
    const auto& t = e.team();
    if (t.league == league && (!state || t.state == *state)) out.push_back(&e);
  }
  std::sort(out.begin(), out.end(), [](const Entity* a, const Entity* b) { return a->handle < b->handle; });
  return out;
}

std::vector<std::string> Registry::states_with_teams(League league) const {
  std::vector<std::string> out;
  for (const auto& s : states_)
    if (!teams_by(league, s).empty()) out.push_back(s);
  return out;
}

Party Registry::senator_party(std::string_view handle) const {
  const Entity* e = find(handle);
  if (e == nullptr || !e->is_senator())
    throw RegistryError({{Code::kNotASenator, std::string(handle), "handle is not a senator"}});
  return std::get<SenatorRole>(e->role).party;
}

std::string Registry::to_manifest() const {
  json doc;
  doc["format"] = kManifestFormat;
  if (!collected_at_.empty()) doc["collected_at"] = collected_at_;
  doc["digest_algorithm"] = "sha256";
  doc["states"] = states_;
  json mapping = json::object();
  for (const auto& [h, p] : caucus_.independent_mapping) mapping[h] = to_string(p);
  doc["caucus_rule"] = {{"independents", mapping}};
  json ents = json::array();
  for (const auto& e : entities_) {
    json r;
    r["handle"] = e.handle;
    std::visit(
        [&](const auto& role) {
          using T = std::decay_t<decltype(role)>;
          if constexpr (std::is_same_v<T, CandidateRole>) {
            r["kind"] = "candidate";
            r["party"] = to_string(role.party);
          } else if constexpr (std::is_same_v<T, SenatorRole>) {
            r["kind"] = "senator";
            r["party"] = role.independent ? std::string("Independent") : std::string(to_string(role.party));
          } else {
            r["kind"] = "team";
            r["league"] = to_string(role.league);
            r["state"] = role.state;
            r["name"] = role.name;
          }
        },
        e.role);
    if (!e.person.empty()) r["person"] = e.person;
    if (e.follower_file) {
      r["follower_file"] = *e.follower_file;
      r["format"] = to_string(e.format);
    }
    if (e.digest) r["digest"] = *e.digest;
    ents.push_back(std::move(r));
  }
  doc["entities"] = std::move(ents);
  return doc.dump(2) + "\n";
}

Registry Registry::with_files(const std::map<std::string, Entity>& updated) const {
  Registry out = *this;
  for (auto& e : out.entities_) {
    auto it = updated.find(e.handle);
    if (it == updated.end()) continue;
    e.follower_file = it->second.follower_file;
    e.format = it->second.format;
    e.digest = it->second.digest;
  }
  return out;
}

}  // namespace affinity
