#ifndef AFFINITY_REGISTRY_HPP_
#define AFFINITY_REGISTRY_HPP_

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace affinity {

enum class Party { kDemocrat, kRepublican };
enum class League { kNBA, kNFL };
enum class FileFormat { kText, kBinary };

std::string_view to_string(Party p);
std::string_view to_string(League l);
std::string_view to_string(FileFormat f);
std::optional<Party> parse_party(std::string_view s);
std::optional<League> parse_league(std::string_view s);

struct CandidateRole {
  Party party;
  friend bool operator==(const CandidateRole&, const CandidateRole&) = default;
};

struct SenatorRole {
  Party party;               // after caucus resolution
  bool independent = false;  // declared Independent in the manifest
  friend bool operator==(const SenatorRole&, const SenatorRole&) = default;
};

struct TeamRole {
  League league;
  std::string state;
  std::string name;
  friend bool operator==(const TeamRole&, const TeamRole&) = default;
};

using Role = std::variant<CandidateRole, SenatorRole, TeamRole>;

struct Entity {
  std::string handle;
  Role role;
  std::string person;  // optional: the human behind the account
  std::optional<std::string> follower_file;
  FileFormat format = FileFormat::kText;
  std::optional<std::string> digest;  // "<algorithm>:<hex>"

  bool is_candidate() const { return std::holds_alternative<CandidateRole>(role); }
  bool is_senator() const { return std::holds_alternative<SenatorRole>(role); }
  bool is_team() const { return std::holds_alternative<TeamRole>(role); }
  const TeamRole& team() const { return std::get<TeamRole>(role); }

  friend bool operator==(const Entity&, const Entity&) = default;
};

/// Maps each independent senator to the party it caucuses with.
struct CaucusRule {
  std::map<std::string, Party> independent_mapping;
  friend bool operator==(const CaucusRule&, const CaucusRule&) = default;
};

struct RegistryIssue {
  enum class Code {
    kParse,
    kSchema,
    kDuplicateHandle,
    kUnknownKind,
    kUnknownLeague,
    kUnknownParty,
    kUnknownState,
    kSenatorIsCandidate,
    kMissingCaucusMapping,
    kNotASenator,
  };
  Code code;
  std::string handle;  // empty when not tied to an entity
  std::string message;
};

std::string_view to_string(RegistryIssue::Code c);

class RegistryError : public std::runtime_error {
 public:
  explicit RegistryError(std::vector<RegistryIssue> issues);
  const std::vector<RegistryIssue>& issues() const noexcept { return issues_; }
  RegistryIssue::Code code() const noexcept { return issues_.front().code; }

 private:
  std::vector<RegistryIssue> issues_;
};

/// Validated, immutable entity universe.
class Registry {
 public:
  const std::vector<Entity>& entities() const noexcept { return entities_; }
  const std::vector<std::string>& states() const noexcept { return states_; }
  const CaucusRule& caucus_rule() const noexcept { return caucus_; }
  const std::string& collected_at() const noexcept { return collected_at_; }

  const Entity* find(std::string_view handle) const;
  const Entity& at(std::string_view handle) const;

  /// In manifest order.
  std::vector<const Entity*> candidates() const;
  std::vector<const Entity*> senators() const;
  /// Leagues with at least one team, in enum order.
  std::vector<League> leagues() const;

  /// Teams of `league`, optionally restricted to `state`, sorted by handle.
  /// Throws RegistryError(kUnknownState) if `state` is not a configured state.
  std::vector<const Entity*> teams_by(League league, std::optional<std::string_view> state = {}) const;
  /// States that have at least one team in `league`, in configured order.
  std::vector<std::string> states_with_teams(League league) const;

  /// Caucus-resolved party. Throws RegistryError(kNotASenator).
  Party senator_party(std::string_view handle) const;

  /// Manifest JSON that load_registry() turns back into an equal registry.
  std::string to_manifest() const;

  /// Copy with follower files, formats and digests replaced per handle.
  Registry with_files(const std::map<std::string, Entity>& updated) const;

  friend bool operator==(const Registry&, const Registry&) = default;

 private:
  friend Registry load_registry(std::string_view);
  std::vector<Entity> entities_;
  std::vector<std::string> states_;
  CaucusRule caucus_;
  std::string collected_at_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

/// Parses and validates a manifest document. Collects every violation into a
/// single RegistryError.
Registry load_registry(std::string_view manifest_text);
Registry load_registry_file(const std::filesystem::path& path);

inline constexpr std::string_view kManifestFormat = "affinity-manifest/1";

}  // namespace affinity

#endif  // AFFINITY_REGISTRY_HPP_
