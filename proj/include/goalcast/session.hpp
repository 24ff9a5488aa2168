#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "goalcast/assistance_controller.hpp"
#include "goalcast/bundle.hpp"
#include "goalcast/competency_profile.hpp"
#include "goalcast/event_stream.hpp"
#include "goalcast/pattern_program.hpp"

namespace goalcast {

enum class CycleTrigger { Pulse, Event, Idle, Query };

std::string_view to_string(CycleTrigger trigger);

struct CycleResult {
  std::uint64_t cycle = 0;
  Millis time = 0;
  CycleTrigger trigger = CycleTrigger::Pulse;
  std::size_t queued_events = 0;
  std::vector<pattern::ModeledEvent> active;
  double p_help = 0.0;
  Distribution needs;                     ///< fused when a query was given
  std::optional<Distribution> action_needs;  ///< the action-only distribution, present when fused
  bool fused = false;
  std::optional<std::string> query;
  std::vector<std::string> query_terms;
  AssistanceDecision decision;
  bool offer_expired = false;

  bool operator==(const CycleResult&) const = default;
};

/// One JSON object on a single line; field order and number formatting are
/// fixed so the output can be checksummed.
std::string to_json_line(const CycleResult& result);

struct SessionOptions {
  std::optional<ControlPolicy> policy;  ///< defaults to the bundle's policy
  std::optional<double> threshold;      ///< user threshold; replaces any utility table
  Profile profile;
};

/// State of one user session: event queue, pace model, controller state and
/// profile. All calls advance virtual time monotonically; none of them look at
/// the wall clock. Not thread-safe; callers serialize access.
class Session {
 public:
  Session(std::shared_ptr<const ModelBundle> bundle, SessionOptions options);

  /// Runs cycles that fall due strictly before the event, ingests it, then runs
  /// any event-triggered cycle. Throws UnknownSymbol or OutOfOrderTimestamp
  /// (the event predates the session's current time).
  std::vector<CycleResult> submit_event(AtomicEvent event);

  /// Moves time forward to `time`, running cycles due at or before it.
  /// Throws OutOfOrderTimestamp when `time` is in the past.
  std::vector<CycleResult> advance_to(Millis time);

  /// Runs an extra cycle now with the query fused in. Does not move the
  /// policy's schedule.
  CycleResult query(const std::string& text);

  void set_threshold(double threshold);
  double threshold() const;

  /// Reports the host's handling of the pending offer.
  bool resolve_offer(OfferOutcome outcome, const std::optional<std::string>& topic);

  std::vector<std::pair<std::string, std::uint64_t>> summary(std::size_t n) const;

  Millis now() const noexcept { return now_; }
  const Profile& profile() const noexcept { return profile_; }
  const SessionTracker& tracker() const noexcept { return tracker_; }
  const ControlPolicy& policy() const noexcept { return policy_; }
  const ModelBundle& bundle() const noexcept { return *bundle_; }

 private:
  std::optional<Millis> next_scheduled() const;
  void run_due(Millis limit, bool inclusive, std::vector<CycleResult>& out);
  CycleResult run_cycle(Millis now, CycleTrigger trigger, const std::optional<std::string>& query);

  std::shared_ptr<const ModelBundle> bundle_;
  ControlPolicy policy_;
  AssistanceConfig assistance_;
  Profile profile_;
  EventQueue queue_;
  ClockModel clock_;
  SessionTracker tracker_;
  Millis now_ = 0;
  Millis last_run_ = 0;
  std::uint64_t cycles_ = 0;
  std::map<std::string, Millis> trigger_marks_;  // newest satisfied_at seen per trigger filter
  std::map<std::string, Millis> profile_marks_;  // newest satisfied_at counted toward the profile
  bool watch_filters_ = false;                   // policy triggers include filters
  std::set<std::string> vocabulary_;
};

}  // namespace goalcast
