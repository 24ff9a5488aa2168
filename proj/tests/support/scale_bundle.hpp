#pragma once

// A generated bundle at deployment size: 40 goals, 600 query terms and a
// couple of dozen event symbols feeding 16 observation filters.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "goalcast/event_stream.hpp"

namespace oracle {

inline constexpr int kScaleGoals = 40;
inline constexpr int kScaleTerms = 600;

/// Writes the bundle files into `dir`, which must exist.
void write_scale_bundle(const std::filesystem::path& dir, std::uint64_t seed);

/// A plausible event stream over the scale bundle's symbols.
std::vector<goalcast::AtomicEvent> scale_events(std::uint64_t seed, int count);

}  // namespace oracle
