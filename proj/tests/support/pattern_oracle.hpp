#pragma once

// Brute-force evaluation of pattern definitions straight from the syntax tree.
// Every sequence match is found by enumerating all occurrence tuples; nothing
// is shared with the compiled evaluator.

#include <random>
#include <span>
#include <vector>

#include "goalcast/event_stream.hpp"
#include "goalcast/pattern_ast.hpp"
#include "goalcast/pattern_program.hpp"

namespace oracle {

/// Matching modeled events at `now`, in definition order.
std::vector<goalcast::pattern::ModeledEvent> scan(const std::vector<goalcast::pattern::Definition>& program,
                                                  std::span<const goalcast::AtomicEvent> events, goalcast::Millis now,
                                                  const goalcast::ClockModel& clock);

/// One element of a sequence match: the occupied interval in time.
struct ElementSpan {
  goalcast::Millis start;
  goalcast::Millis end;
  std::int64_t slot;
  bool operator==(const ElementSpan&) const = default;
  auto operator<=>(const ElementSpan&) const = default;
};

/// Every tuple satisfying a top-level seq/tightseq filter at `now`.
std::vector<std::vector<ElementSpan>> sequence_matches(const std::vector<goalcast::pattern::Definition>& program,
                                                       const std::string& filter,
                                                       std::span<const goalcast::AtomicEvent> events,
                                                       goalcast::Millis now, const goalcast::ClockModel& clock);

struct RandomProgramOptions {
  std::vector<std::string> symbols{"a", "b", "c", "d"};
  int filters = 4;
  int max_depth = 3;
  int max_seq = 3;
};

/// Classes `k` := {a, b}; filters f0..fN where fi may refer to fj for j < i.
std::vector<goalcast::pattern::Definition> random_program(std::mt19937_64& rng, const RandomProgramOptions& options = {});

/// Up to `max_events` events with non-decreasing timestamps, ties included.
std::vector<goalcast::AtomicEvent> random_trace(std::mt19937_64& rng, const std::vector<std::string>& symbols,
                                                int max_events);

}  // namespace oracle
