#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "goalcast/belief_network.hpp"

namespace goalcast {

inline constexpr int kProfileSchemaVersion = 1;

struct CompetencyRecord {
  std::uint64_t count = 0;
  std::int64_t last_seen = 0;  ///< ms since the Unix epoch
  std::string derived_state;   ///< empty while below the first schedule step

  bool operator==(const CompetencyRecord&) const = default;
};

struct Profile {
  std::string user_id;
  std::string declared_level;  ///< empty means "use the rule set's default"
  std::map<std::string, CompetencyRecord> competencies;
  int schema_version = kProfileSchemaVersion;

  bool operator==(const Profile&) const = default;
};

/// A competency and the network variable it feeds. The schedule maps count
/// thresholds to states: the state of the largest threshold <= count applies.
struct CompetencySpec {
  std::string name;
  std::string variable;  ///< empty when the competency is tracked but not used as evidence
  std::vector<std::pair<std::uint64_t, std::string>> schedule;

  bool operator==(const CompetencySpec&) const = default;
};

/// Each occurrence of `trigger` (a modeled-event name) counts once toward
/// `competency`. A rule with a `topic` also marks that help topic as reviewed.
struct IndicatorRule {
  std::string trigger;
  std::string competency;
  std::optional<std::string> topic;

  bool operator==(const IndicatorRule&) const = default;
};

struct ProfileRules {
  std::string expertise_variable;
  std::string default_level;
  std::vector<CompetencySpec> competencies;
  std::vector<IndicatorRule> rules;

  const CompetencySpec* find(const std::string& competency) const;
  bool operator==(const ProfileRules&) const = default;
};

/// Throws UnknownCompetency when a rule names an undeclared competency, and
/// std::invalid_argument for an unsorted or empty schedule.
void check(const ProfileRules& rules);

/// Reads rules.json (see docs/profile-format.md). Throws IoError or
/// CorruptProfile on malformed content, UnknownCompetency on bad references.
ProfileRules read_rules(const std::filesystem::path& path);
ProfileRules parse_rules(const std::string& json_text);

std::string derive_state(std::uint64_t count, const CompetencySpec& spec);

struct TriggerEvent {
  std::string name;
  std::int64_t timestamp = 0;  ///< ms since the Unix epoch
};

/// Counts every triggering event and refreshes last_seen and derived_state.
/// Events that match no rule are ignored. Throws UnknownCompetency.
Profile update(const Profile& profile, const std::vector<TriggerEvent>& events, const ProfileRules& rules);

/// Recomputes every derived_state from its count.
void rederive(Profile& profile, const ProfileRules& rules);

struct ProfileEvidence {
  bn::Evidence evidence;
  std::vector<std::string> warnings;  ///< skipped entries
};

/// Evidence for the expertise variable and for every mapped competency whose
/// state is a valid state of its variable. Anything else is skipped with a warning.
ProfileEvidence as_evidence(const Profile& profile, const ProfileRules& rules, const bn::Network& network);

/// Writes to a temporary file beside `path` and renames it into place.
/// Throws IoError.
void store(const Profile& profile, const std::filesystem::path& path);

/// Throws IoError, SchemaVersionError or CorruptProfile. With `rules`, derived
/// states are recomputed from the stored counts.
Profile load(const std::filesystem::path& path, const ProfileRules* rules = nullptr);

std::string to_json(const Profile& profile);
/// Throws SchemaVersionError or CorruptProfile.
Profile profile_from_json(const std::string& text);

}  // namespace goalcast
