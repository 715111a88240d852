#ifndef AFFINITY_SYNTH_HPP_
#define AFFINITY_SYNTH_HPP_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "affinity/ingest.hpp"
#include "affinity/registry.hpp"

namespace affinity {

struct SynthState {
  std::string code;
  std::uint64_t users = 0;
  double lean = 0;  // -1 all Democrat ... +1 all Republican
};

struct SynthCandidate {
  std::string handle;
  Party party = Party::kDemocrat;
  double follow_probability = 0.5;  // for a user whose favorite this is
  double favorite_weight = 1.0;     // relative chance of being the favorite within its party
};

struct SynthTeam {
  std::string handle;
  League league = League::kNBA;
  std::string state;
};

/// Sanders, Biden, Trump.
std::vector<SynthCandidate> default_candidates();

struct SynthConfig {
  std::uint64_t seed = 1;
  std::vector<SynthState> states;
  std::vector<SynthCandidate> candidates = default_candidates();
  std::vector<SynthTeam> teams;            // defaults to the built-in roster, restricted to `states`

  double noise_rate = 0.0;               // fraction of users following at random
  double politics_rate = 1.0;            // fraction of partisan users who follow politicians at all
  double senator_intensity = 3.0;        // expected own-party senators followed
  double cross_senator_intensity = 0.0;  // expected other-party senators followed
  double secondary_factor = 0.3;         // scales the follow chance of same-party non-favorites
  double cross_candidate_rate = 0.0;     // chance of following each other-party candidate
  double noise_follow_rate = 0.05;       // per-politician follow chance for noise users
  double home_team_rate = 0.9;           // chance the team pick is from the home state

  int democrat_senators = 45;
  int republican_senators = 53;
  int independent_senators = 2;  // caucus with Democrats

  UserId id_base = 1'000'000'000'000ull;
  unsigned threads = 1;
};

class SynthConfigError : public std::runtime_error {
 public:
  explicit SynthConfigError(std::vector<std::string> issues);
  const std::vector<std::string>& issues() const noexcept { return issues_; }

 private:
  std::vector<std::string> issues_;
};

/// Teams from the 2020 study roster (13 NBA, 15 NFL).
std::vector<SynthTeam> builtin_roster();

/// Parses a JSON config, filling defaults. Every invalid field is reported.
SynthConfig parse_synth_config(std::string_view json);
SynthConfig load_synth_config(const std::filesystem::path& path);
/// Throws SynthConfigError listing every problem.
void validate(const SynthConfig& config);

enum class LatentParty : std::uint8_t { kDemocrat, kRepublican, kNoise };
std::string_view to_string(LatentParty p);

struct GroundTruth {
  struct User {
    UserId id;
    std::uint32_t state;  // index into states
    LatentParty party;
  };
  std::uint64_t seed = 0;
  std::vector<SynthState> states;
  std::vector<User> users;  // ascending id
};

struct StateSummary {
  std::string code;
  double lean = 0;
  std::uint64_t users = 0;
  std::uint64_t democrats = 0;
  std::uint64_t republicans = 0;
  std::uint64_t noise = 0;
};

std::vector<StateSummary> describe(const GroundTruth& truth);

struct SynthDataset {
  std::shared_ptr<const Registry> registry;
  Snapshot snapshot;
  GroundTruth truth;
};

/// Deterministic in `config` (thread count excluded).
SynthDataset generate(const SynthConfig& config);

/// Writes manifest.json, followers/<handle>.txt and ground_truth.json under
/// `dir`; returns the manifest path.
std::filesystem::path write_dataset(const SynthConfig& config, const std::filesystem::path& dir);

}  // namespace affinity

#endif  // AFFINITY_SYNTH_HPP_
