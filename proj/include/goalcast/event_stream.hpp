#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace goalcast {

/// Milliseconds since session start.
using Millis = std::int64_t;

/// A raw interface event as reported by the host application.
struct AtomicEvent {
  std::string symbol;
  Millis timestamp = 0;
  std::map<std::string, std::string> attributes;

  bool operator==(const AtomicEvent&) const = default;
};

/// Named disjunction of atomic symbols, e.g. file_saved = {toolbar_save, key_ctrl_s}.
struct EventClass {
  std::string name;
  std::set<std::string> members;

  bool operator==(const EventClass&) const = default;
};

enum class SpanUnit { Millis, Commands };

/// A window length: either a duration or a count of most recent events.
struct Span {
  std::int64_t amount = 0;
  SpanUnit unit = SpanUnit::Millis;

  static constexpr Span millis(std::int64_t ms) { return {ms, SpanUnit::Millis}; }
  static constexpr Span seconds(std::int64_t s) { return {s * 1000, SpanUnit::Millis}; }
  static constexpr Span commands(std::int64_t n) { return {n, SpanUnit::Commands}; }

  bool operator==(const Span&) const = default;
};

/// Tracks the user's working pace so durations can be expressed in scaled time.
///
/// The observed rate is derived from an exponentially weighted mean of the
/// gaps between consecutive events: rate = 1000 / mean_gap_ms. Averaging gaps
/// rather than instantaneous rates keeps bursts of simultaneous events from
/// producing unbounded rates.
struct ClockModel {
  double reference_rate = 1.0;  ///< commands per second considered "nominal"
  double observed_rate = 0.0;   ///< 0 until two events have been seen
  double smoothing = 0.1;       ///< EWMA weight in (0, 1]
  double clamp = 4.0;           ///< maximum stretch/shrink factor, >= 1

  std::optional<Millis> last_timestamp;
  double mean_gap_ms = 0.0;

  /// Folds one event time into the rate estimate.
  void observe(Millis timestamp);

  bool operator==(const ClockModel&) const = default;
};

/// Bounded, timestamp-ordered history of atomic events.
class EventQueue {
 public:
  static constexpr std::size_t kDefaultCapacity = 512;

  explicit EventQueue(std::size_t capacity = kDefaultCapacity);

  /// Appends `event`, evicting the oldest entry when full, and updates `clock`.
  /// Throws OutOfOrderTimestamp if the event predates the newest queued event
  /// (or the last event the clock saw, if the queue is empty after eviction).
  void ingest(AtomicEvent event, ClockModel& clock);

  /// Immutable copy for one analysis cycle.
  std::vector<AtomicEvent> snapshot() const { return {events_.begin(), events_.end()}; }

  const std::deque<AtomicEvent>& events() const noexcept { return events_; }
  std::size_t size() const noexcept { return events_.size(); }
  bool empty() const noexcept { return events_.empty(); }
  std::size_t capacity() const noexcept { return capacity_; }
  std::uint64_t total_ingested() const noexcept { return total_ingested_; }
  std::optional<Millis> last_timestamp() const noexcept { return last_timestamp_; }

 private:
  std::deque<AtomicEvent> events_;
  std::size_t capacity_;
  std::uint64_t total_ingested_ = 0;
  std::optional<Millis> last_timestamp_;
};

/// Events in (now - span, now] for duration spans, or the last `span` events
/// for command spans. `events` must be timestamp-ordered.
std::span<const AtomicEvent> window(std::span<const AtomicEvent> events, Millis now, Span span);

/// Stretches or shrinks a nominal duration to the user's pace:
/// nominal * reference_rate / observed_rate, clamped to [nominal/clamp, nominal*clamp]
/// and rounded to whole milliseconds. Returns `nominal` until a rate is known.
Millis scale_duration(Millis nominal, const ClockModel& clock);

/// Names of every class whose member set contains `event.symbol`.
std::set<std::string> classify(const AtomicEvent& event, std::span<const EventClass> classes);

// Event log files: "<timestamp_ms> <symbol> [key=value]*" per line, '#' comments.

/// Parses a whole log. Throws LogParseError naming the offending line,
/// including lines whose timestamp precedes the previous event.
std::vector<AtomicEvent> parse_event_log(std::istream& in);
std::vector<AtomicEvent> read_event_log(const std::string& path);

std::string format_event_line(const AtomicEvent& event);

}  // namespace goalcast
