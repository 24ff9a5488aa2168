#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "goalcast/assistance_controller.hpp"
#include "goalcast/competency_profile.hpp"
#include "goalcast/event_stream.hpp"
#include "goalcast/model_io.hpp"
#include "goalcast/pattern_program.hpp"
#include "goalcast/query_analysis.hpp"

namespace goalcast {

struct EngineConfig {
  std::set<std::string> event_symbols;
  std::string need_variable;
  std::string assistance_variable;
  std::set<std::string> internal_filters;  ///< filters that feed other filters only
  ControlPolicy policy = Pulsed{1000};
  AssistanceConfig assistance;
  FusionWeights fusion;
  bool words_only = false;  ///< use the query distribution alone when a query is present
  std::size_t queue_capacity = EventQueue::kDefaultCapacity;
  ClockModel clock;
  std::int64_t epoch_ms = 0;  ///< wall-clock time of session start, for profile timestamps

  bool operator==(const EngineConfig&) const = default;
};

/// Parses config.json. Throws std::invalid_argument with every problem found.
EngineConfig parse_config(const std::string& json_text);

/// Everything one engine instance needs; immutable once loaded and shared
/// between sessions.
struct ModelBundle {
  std::filesystem::path directory;
  ModelDocument model;
  std::vector<pattern::Definition> definitions;
  pattern::FilterProgram program;
  TermModel terms;  ///< goals reordered to match the need variable's states
  ProfileRules rules;
  EngineConfig config;
};

inline constexpr const char* kNetworkFile = "network.bn";
inline constexpr const char* kPatternFile = "patterns.lel";
inline constexpr const char* kTermsFile = "terms.txt";
inline constexpr const char* kRulesFile = "rules.json";
inline constexpr const char* kConfigFile = "config.json";

/// Loads and cross-checks a bundle directory. Every problem found is reported
/// together in a BundleError.
ModelBundle load_bundle(const std::filesystem::path& directory);

/// Cross-reference checks over already parsed parts; returns problems found.
std::vector<std::string> cross_check(const ModelBundle& bundle);

}  // namespace goalcast
