#pragma once

#include <cstddef>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "goalcast/event_stream.hpp"
#include "goalcast/pattern_ast.hpp"

namespace goalcast::pattern {

/// A higher-level observation produced by a filter.
struct ModeledEvent {
  std::string name;
  Millis satisfied_at = 0;     ///< time of the most recent match
  Millis age = 0;              ///< now - satisfied_at
  std::size_t events_since = 0;  ///< snapshot events stamped after satisfied_at

  bool operator==(const ModeledEvent&) const = default;
};

namespace detail {
struct Node;
class Evaluator;
}  // namespace detail

/// Compiled, immutable set of run-time filters.
///
/// Evaluation semantics, for a snapshot of n events and a time `now`:
///  - Occurrences of a symbol or class target are the matching events. An event
///    at queue position k has slot 2k+1; the quiet gap that follows it has slot
///    2k+2. Sequence elements must take strictly increasing slots, so equal
///    timestamps are ordered by queue position.
///  - A defined filter used as a target "occurs" at position k when evaluating it
///    over the first k+1 events with now = t_k yields a match stamped t_k, and
///    at `now` itself when the current evaluation is stamped `now` and `now` is
///    later than the newest event.
///  - rate/oneof/all look at the window (now - span, now] (or the last `span`
///    events). rate and dwell are stamped `now`; oneof/all with the newest
///    contributing occurrence.
///  - seq matches anywhere in the snapshot as long as first start to last end is
///    shorter than the span; tightseq additionally forbids any unmatched event
///    between consecutive elements. A match is stamped with its last element;
///    a dwell element is a gap of at least its duration, ending at the next
///    event or at `now` for the trailing gap.
///  - and/or take the latest stamp of their satisfied operands; not is stamped `now`.
///  - In a `scaled` definition every time span passes through scale_duration.
class FilterProgram {
 public:
  FilterProgram();
  ~FilterProgram();
  FilterProgram(const FilterProgram&);
  FilterProgram& operator=(const FilterProgram&);
  FilterProgram(FilterProgram&&) noexcept;
  FilterProgram& operator=(FilterProgram&&) noexcept;

  /// Satisfied filters at `now`, in evaluation order. Events stamped after
  /// `now` are ignored.
  std::vector<ModeledEvent> evaluate(std::span<const AtomicEvent> snapshot, Millis now,
                                     const ClockModel& clock) const;

  /// Definitions in evaluation (topological) order.
  const std::vector<FilterDefinition>& filters() const noexcept { return filters_; }
  std::vector<std::string> evaluation_order() const;
  const std::vector<EventClass>& classes() const noexcept { return classes_; }
  const std::set<std::string>& symbols() const noexcept { return symbols_; }
  bool has_filter(const std::string& name) const { return filter_index_.contains(name); }

 private:
  friend FilterProgram compile(const std::vector<Definition>&, const std::set<std::string>&);
  friend class detail::Evaluator;

  struct Matcher {
    std::string name;
    std::vector<char> member;  // indexed by symbol id
  };

  std::set<std::string> symbols_;
  std::unordered_map<std::string, int> symbol_ids_;
  std::vector<EventClass> classes_;
  std::vector<FilterDefinition> filters_;
  std::unordered_map<std::string, std::size_t> filter_index_;
  std::vector<Matcher> matchers_;
  std::vector<std::shared_ptr<const detail::Node>> nodes_;  // per filter
  std::vector<char> needs_history_;                         // used as an occurrence target
  std::vector<char> needs_prefix_;                          // evaluated at every event time
};

/// Resolves names and orders definitions so each follows everything it uses.
/// Throws UnknownSymbol, DuplicateName (a class or definition shadows a symbol)
/// or CyclicDefinition.
FilterProgram compile(const std::vector<Definition>& definitions, const std::set<std::string>& symbols);

}  // namespace goalcast::pattern
