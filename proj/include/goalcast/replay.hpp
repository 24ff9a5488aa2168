#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "goalcast/session.hpp"

namespace goalcast {

struct ReplayOptions {
  std::optional<ControlPolicy> policy;
  std::optional<double> threshold;
  std::vector<std::pair<Millis, std::string>> queries;  ///< asked after all events at that time
  std::optional<Millis> until;                          ///< defaults to the last event or query
  Profile profile;
};

/// Parses `T:TEXT` with T in milliseconds. Throws std::invalid_argument.
std::pair<Millis, std::string> parse_query_at(std::string_view spec);

/// Feeds the log through a fresh session in virtual time.
std::vector<CycleResult> replay(std::shared_ptr<const ModelBundle> bundle, const std::vector<AtomicEvent>& events,
                                const ReplayOptions& options);

/// One JSON line per cycle, each terminated by a newline.
std::string render_trace(const std::vector<CycleResult>& results);

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);

}  // namespace goalcast
