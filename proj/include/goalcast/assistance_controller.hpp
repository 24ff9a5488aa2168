#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "goalcast/distribution.hpp"
#include "goalcast/event_stream.hpp"

namespace goalcast {

struct Pulsed {
  Millis interval = 1000;
  bool operator==(const Pulsed&) const = default;
};
struct EventDriven {
  std::set<std::string> triggers;
  bool operator==(const EventDriven&) const = default;
};
struct AugmentedPulsed {
  Millis interval = 1000;
  std::set<std::string> triggers;
  bool operator==(const AugmentedPulsed&) const = default;
};
struct Deferred {
  Millis interval = 1000;
  Millis idle = 1000;
  bool operator==(const Deferred&) const = default;
};

using ControlPolicy = std::variant<Pulsed, EventDriven, AugmentedPulsed, Deferred>;

/// Accepts `pulsed:<span>`, `event:<name>[,<name>...]`,
/// `augmented:<span>:<name>[,...]` and `deferred:<span>:<idle span>`, where a
/// span is `<n>ms` or `<n>s`. Throws std::invalid_argument.
ControlPolicy parse_policy(std::string_view text);
std::string to_string(const ControlPolicy& policy);

/// Interval a policy runs on, if it has one.
std::optional<Millis> policy_interval(const ControlPolicy& policy);

/// `arrivals` are the names (atomic symbols or modeled events) that arrived
/// since `last_run`; `last_event` is the time of the newest atomic event.
bool should_run_cycle(const ControlPolicy& policy, Millis now, Millis last_run,
                      const std::vector<std::string>& arrivals, std::optional<Millis> last_event);

/// u(action, need): the value of offering or staying quiet when help is or is
/// not wanted.
struct UtilityTable {
  double offer_yes = 1.0;
  double offer_no = 0.0;
  double quiet_yes = 0.0;
  double quiet_no = 1.0;

  bool operator==(const UtilityTable&) const = default;
};

struct AssistanceConfig {
  double threshold = 0.5;
  Millis timeout = 8000;
  std::size_t top_k = 5;
  double offline_threshold = 0.3;
  std::optional<UtilityTable> utility;

  bool operator==(const AssistanceConfig&) const = default;
};

/// Throws std::invalid_argument for out-of-range knobs.
void check(const AssistanceConfig& config);

/// Indifference probability of the utility table when there is one, otherwise
/// the configured threshold. Throws DegenerateUtility.
double effective_threshold(const AssistanceConfig& config);

struct PendingOffer {
  Millis offered_at = 0;
  std::vector<std::string> topics;

  bool operator==(const PendingOffer&) const = default;
};

enum class OfferOutcome { Acknowledged, Dismissed, TimedOut };

struct SessionTracker {
  std::map<std::string, std::uint64_t> exceedance;
  std::set<std::string> reviewed;
  std::vector<std::string> last_offered;
  std::optional<std::string> last_offered_argmax;
  std::optional<PendingOffer> pending;

  bool operator==(const SessionTracker&) const = default;
};

enum class DecisionAction { Offer, Quiet };
enum class DecisionReason { ThresholdNotMet, Suppressed, Offered };

std::string_view to_string(DecisionAction action);
std::string_view to_string(DecisionReason reason);

struct AssistanceDecision {
  DecisionAction action = DecisionAction::Quiet;
  DecisionReason reason = DecisionReason::ThresholdNotMet;
  RankedStates topics;  ///< the offered top-k, empty when quiet
  double p_help = 0.0;
  double threshold = 0.0;

  bool operator==(const AssistanceDecision&) const = default;
};

/// `ranked` is the full ranking of need states, most probable first. Offers
/// the top-k when p_help reaches the effective threshold and the leading topic
/// differs from the last one offered.
AssistanceDecision decide(const RankedStates& ranked, double p_help, const AssistanceConfig& config,
                          SessionTracker& tracker, Millis now);

/// Closes the pending offer if it has been showing for at least `timeout`.
/// Suppression stays in force. Returns true when an offer expired.
bool expire_offer(SessionTracker& tracker, Millis now, Millis timeout);

/// Host feedback on the pending offer. Acknowledging a topic marks it
/// reviewed. Returns false when no offer is pending.
bool resolve_offer(SessionTracker& tracker, OfferOutcome outcome, const std::optional<std::string>& topic);

/// Counts every topic at or above `offline_threshold` and marks `reviewed`.
void record_cycle(SessionTracker& tracker, const Distribution& topics, double offline_threshold,
                  const std::set<std::string>& reviewed);

/// Up to n unreviewed topics by exceedance count, descending; ties by name.
std::vector<std::pair<std::string, std::uint64_t>> session_summary(const SessionTracker& tracker, std::size_t n);

}  // namespace goalcast
