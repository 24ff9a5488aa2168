#include "goalcast/assistance_controller.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <stdexcept>

#include "goalcast/error.hpp"

namespace goalcast {

namespace {

Millis parse_span(std::string_view text) {
  std::string_view digits = text;
  Millis scale = 1;
  if (text.ends_with("ms")) {
    digits.remove_suffix(2);
  } else if (text.ends_with("s")) {
    digits.remove_suffix(1);
    scale = 1000;
  } else {
    throw std::invalid_argument("span '" + std::string(text) + "' needs a ms or s suffix");
  }
  Millis v = 0;
  const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v);
  if (ec != std::errc{} || ptr != digits.data() + digits.size() || v <= 0) {
    throw std::invalid_argument("bad span '" + std::string(text) + "'");
  }
  return v * scale;
}

std::string format_span(Millis ms) { return ms % 1000 == 0 ? std::to_string(ms / 1000) + "s" : std::to_string(ms) + "ms"; }

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(sep, start);
    out.push_back(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) return out;
    start = pos + 1;
  }
}

std::set<std::string> parse_triggers(std::string_view text) {
  std::set<std::string> out;
  for (auto name : split(text, ',')) {
    if (name.empty()) throw std::invalid_argument("empty trigger name");
    out.emplace(name);
  }
  return out;
}

std::string join(const std::set<std::string>& names) {
  std::string out;
  for (const auto& n : names) {
    if (!out.empty()) out += ',';
    out += n;
  }
  return out;
}

}  // namespace

ControlPolicy parse_policy(std::string_view text) {
  const auto parts = split(text, ':');
  const auto kind = parts.front();
  if (kind == "pulsed" && parts.size() == 2) return Pulsed{parse_span(parts[1])};
  if (kind == "event" && parts.size() == 2) return EventDriven{parse_triggers(parts[1])};
  if (kind == "augmented" && parts.size() == 3) return AugmentedPulsed{parse_span(parts[1]), parse_triggers(parts[2])};
  if (kind == "deferred" && parts.size() == 3) return Deferred{parse_span(parts[1]), parse_span(parts[2])};
  throw std::invalid_argument("unrecognised policy '" + std::string(text) + "'");
}

std::string to_string(const ControlPolicy& policy) {
  return std::visit(
      [](const auto& p) -> std::string {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, Pulsed>) {
          return "pulsed:" + format_span(p.interval);
        } else if constexpr (std::is_same_v<T, EventDriven>) {
          return "event:" + join(p.triggers);
        } else if constexpr (std::is_same_v<T, AugmentedPulsed>) {
          return "augmented:" + format_span(p.interval) + ":" + join(p.triggers);
        } else {
          return "deferred:" + format_span(p.interval) + ":" + format_span(p.idle);
        }
      },
      policy);
}

std::optional<Millis> policy_interval(const ControlPolicy& policy) {
  if (const auto* p = std::get_if<Pulsed>(&policy)) return p->interval;
  if (const auto* p = std::get_if<AugmentedPulsed>(&policy)) return p->interval;
  if (const auto* p = std::get_if<Deferred>(&policy)) return p->interval;
  return std::nullopt;
}

bool should_run_cycle(const ControlPolicy& policy, Millis now, Millis last_run, const std::vector<std::string>& arrivals,
                      std::optional<Millis> last_event) {
  auto triggered = [&](const std::set<std::string>& triggers) {
    return std::any_of(arrivals.begin(), arrivals.end(), [&](const auto& a) { return triggers.contains(a); });
  };
  return std::visit(
      [&](const auto& p) -> bool {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, Pulsed>) {
          return now - last_run >= p.interval;
        } else if constexpr (std::is_same_v<T, EventDriven>) {
          return triggered(p.triggers);
        } else if constexpr (std::is_same_v<T, AugmentedPulsed>) {
          return now - last_run >= p.interval || triggered(p.triggers);
        } else {
          return now - last_run >= p.interval && (!last_event || now - *last_event >= p.idle);
        }
      },
      policy);
}

void check(const AssistanceConfig& c) {
  auto unit = [](double p) { return std::isfinite(p) && p >= 0.0 && p <= 1.0; };
  if (!unit(c.threshold)) throw std::invalid_argument("threshold must lie in [0,1]");
  if (!unit(c.offline_threshold)) throw std::invalid_argument("offline threshold must lie in [0,1]");
  if (c.top_k < 1) throw std::invalid_argument("top_k must be at least 1");
  if (c.timeout <= 0) throw std::invalid_argument("timeout must be positive");
}

double effective_threshold(const AssistanceConfig& config) {
  if (!config.utility) return config.threshold;
  const auto& u = *config.utility;
  const double miss_cost = u.offer_yes - u.quiet_yes;
  const double interrupt_cost = u.quiet_no - u.offer_no;
  const double denom = miss_cost + interrupt_cost;
  if (denom == 0.0 || !std::isfinite(denom)) throw DegenerateUtility("utility table has no indifference point");
  return std::clamp(interrupt_cost / denom, 0.0, 1.0);
}

std::string_view to_string(DecisionAction action) { return action == DecisionAction::Offer ? "offer" : "quiet"; }

std::string_view to_string(DecisionReason reason) {
  switch (reason) {
    case DecisionReason::ThresholdNotMet: return "threshold-not-met";
    case DecisionReason::Suppressed: return "suppressed";
    case DecisionReason::Offered: return "offered";
  }
  return "threshold-not-met";
}

AssistanceDecision decide(const RankedStates& ranked, double p_help, const AssistanceConfig& config,
                          SessionTracker& tracker, Millis now) {
  AssistanceDecision d;
  d.p_help = p_help;
  d.threshold = effective_threshold(config);
  if (ranked.empty() || p_help < d.threshold) {
    d.reason = DecisionReason::ThresholdNotMet;
    return d;
  }
  const std::string& argmax = ranked.front().first;
  if (tracker.last_offered_argmax == argmax) {
    d.reason = DecisionReason::Suppressed;
    return d;
  }
  d.action = DecisionAction::Offer;
  d.reason = DecisionReason::Offered;
  d.topics.assign(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(std::min(config.top_k, ranked.size())));
  tracker.last_offered_argmax = argmax;
  tracker.last_offered.clear();
  for (const auto& [topic, p] : d.topics) tracker.last_offered.push_back(topic);
  tracker.pending = PendingOffer{now, tracker.last_offered};
  return d;
}

bool expire_offer(SessionTracker& tracker, Millis now, Millis timeout) {
  if (!tracker.pending || now - tracker.pending->offered_at < timeout) return false;
  tracker.pending.reset();
  return true;
}

bool resolve_offer(SessionTracker& tracker, OfferOutcome outcome, const std::optional<std::string>& topic) {
  if (!tracker.pending) return false;
  if (outcome == OfferOutcome::Acknowledged && topic) tracker.reviewed.insert(*topic);
  tracker.pending.reset();
  return true;
}

void record_cycle(SessionTracker& tracker, const Distribution& topics, double offline_threshold,
                  const std::set<std::string>& reviewed) {
  for (std::size_t i = 0; i < topics.size(); ++i) {
    if (topics.probabilities[i] >= offline_threshold) ++tracker.exceedance[topics.states[i]];
  }
  tracker.reviewed.insert(reviewed.begin(), reviewed.end());
}

std::vector<std::pair<std::string, std::uint64_t>> session_summary(const SessionTracker& tracker, std::size_t n) {
  std::vector<std::pair<std::string, std::uint64_t>> out;
  for (const auto& [topic, count] : tracker.exceedance) {
    if (count > 0 && !tracker.reviewed.contains(topic)) out.emplace_back(topic, count);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (out.size() > n) out.resize(n);
  return out;
}

}  // namespace goalcast
