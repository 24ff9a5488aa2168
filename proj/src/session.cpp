#include "goalcast/session.hpp"

#include <algorithm>
#include <stdexcept>

#include <fmt/format.h>
#include <json.hpp>

#include "goalcast/error.hpp"
#include "goalcast/temporal_inference.hpp"

namespace goalcast {

std::string_view to_string(CycleTrigger trigger) {
  switch (trigger) {
    case CycleTrigger::Pulse: return "pulse";
    case CycleTrigger::Event: return "event";
    case CycleTrigger::Idle: return "idle";
    case CycleTrigger::Query: return "query";
  }
  return "pulse";
}

namespace {

std::string quote(std::string_view s) { return nlohmann::json(std::string(s)).dump(); }

std::string prob(double p) { return fmt::format("{:.12g}", p); }

void append_distribution(std::string& out, const Distribution& d) {
  out += '{';
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (i) out += ',';
    out += quote(d.states[i]);
    out += ':';
    out += prob(d.probabilities[i]);
  }
  out += '}';
}

const std::set<std::string>* policy_triggers(const ControlPolicy& policy) {
  if (const auto* p = std::get_if<EventDriven>(&policy)) return &p->triggers;
  if (const auto* p = std::get_if<AugmentedPulsed>(&policy)) return &p->triggers;
  return nullptr;
}

}  // namespace

std::string to_json_line(const CycleResult& r) {
  std::string out;
  out.reserve(512);
  out += fmt::format(R"({{"cycle":{},"t":{},"trigger":{},"queued":{},"active":[)", r.cycle, r.time,
                     quote(to_string(r.trigger)), r.queued_events);
  for (std::size_t i = 0; i < r.active.size(); ++i) {
    const auto& m = r.active[i];
    if (i) out += ',';
    out += fmt::format(R"({{"name":{},"satisfied_at":{},"age":{},"events_since":{}}})", quote(m.name), m.satisfied_at,
                       m.age, m.events_since);
  }
  out += R"(],"p_help":)" + prob(r.p_help) + R"(,"needs":)";
  append_distribution(out, r.needs);
  out += R"(,"fused":)";
  out += r.fused ? "true" : "false";
  out += R"(,"action_needs":)";
  if (r.action_needs) {
    append_distribution(out, *r.action_needs);
  } else {
    out += "null";
  }
  out += R"(,"query":)" + (r.query ? quote(*r.query) : std::string("null")) + R"(,"terms":[)";
  for (std::size_t i = 0; i < r.query_terms.size(); ++i) {
    if (i) out += ',';
    out += quote(r.query_terms[i]);
  }
  out += fmt::format(R"(],"decision":{{"action":{},"reason":{},"threshold":{},"topics":[)",
                     quote(to_string(r.decision.action)), quote(to_string(r.decision.reason)),
                     prob(r.decision.threshold));
  for (std::size_t i = 0; i < r.decision.topics.size(); ++i) {
    if (i) out += ',';
    out += fmt::format(R"({{"topic":{},"p":{}}})", quote(r.decision.topics[i].first), prob(r.decision.topics[i].second));
  }
  out += R"(]},"offer_expired":)";
  out += r.offer_expired ? "true" : "false";
  out += '}';
  return out;
}

Session::Session(std::shared_ptr<const ModelBundle> bundle, SessionOptions options)
    : bundle_(std::move(bundle)),
      policy_(options.policy.value_or(bundle_->config.policy)),
      assistance_(bundle_->config.assistance),
      profile_(std::move(options.profile)),
      queue_(bundle_->config.queue_capacity),
      clock_(bundle_->config.clock),
      vocabulary_(bundle_->terms.vocabulary()) {
  if (options.threshold) set_threshold(*options.threshold);
  rederive(profile_, bundle_->rules);
  if (const auto* triggers = policy_triggers(policy_)) {
    watch_filters_ = std::any_of(triggers->begin(), triggers->end(),
                                 [&](const std::string& t) { return bundle_->program.has_filter(t); });
  }
}

void Session::set_threshold(double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw std::invalid_argument("threshold must lie in [0,1]");
  assistance_.threshold = threshold;
  assistance_.utility.reset();
}

double Session::threshold() const { return effective_threshold(assistance_); }

bool Session::resolve_offer(OfferOutcome outcome, const std::optional<std::string>& topic) {
  return goalcast::resolve_offer(tracker_, outcome, topic);
}

std::vector<std::pair<std::string, std::uint64_t>> Session::summary(std::size_t n) const {
  return session_summary(tracker_, n);
}

std::optional<Millis> Session::next_scheduled() const {
  if (const auto* p = std::get_if<Pulsed>(&policy_)) return last_run_ + p->interval;
  if (const auto* p = std::get_if<AugmentedPulsed>(&policy_)) return last_run_ + p->interval;
  if (const auto* p = std::get_if<Deferred>(&policy_)) {
    const Millis due = last_run_ + p->interval;
    const auto last = queue_.last_timestamp();
    return last ? std::max(due, *last + p->idle) : due;
  }
  return std::nullopt;
}

void Session::run_due(Millis limit, bool inclusive, std::vector<CycleResult>& out) {
  const CycleTrigger kind = std::holds_alternative<Deferred>(policy_) ? CycleTrigger::Idle : CycleTrigger::Pulse;
  while (true) {
    const auto due = next_scheduled();
    if (!due || (inclusive ? *due > limit : *due >= limit)) return;
    const Millis t = std::max(*due, now_);
    if (!should_run_cycle(policy_, t, last_run_, {}, queue_.last_timestamp())) return;
    now_ = t;
    out.push_back(run_cycle(t, kind, std::nullopt));
  }
}

std::vector<CycleResult> Session::submit_event(AtomicEvent event) {
  const auto& cfg = bundle_->config;
  if (!cfg.event_symbols.contains(event.symbol)) throw UnknownSymbol("unknown event symbol '" + event.symbol + "'");
  if (event.timestamp < now_) {
    throw OutOfOrderTimestamp("event at " + std::to_string(event.timestamp) + " ms precedes session time " +
                              std::to_string(now_) + " ms");
  }
  std::vector<CycleResult> out;
  run_due(event.timestamp, false, out);

  std::vector<std::string> arrivals;
  const auto* triggers = policy_triggers(policy_);
  if (triggers) {
    arrivals.push_back(event.symbol);
    for (auto& c : classify(event, bundle_->program.classes())) arrivals.push_back(c);
  }
  queue_.ingest(std::move(event), clock_);
  now_ = *queue_.last_timestamp();
  if (!triggers) return out;

  if (watch_filters_) {
    const auto snap = queue_.snapshot();
    for (const auto& m : bundle_->program.evaluate(snap, now_, clock_)) {
      if (!triggers->contains(m.name)) continue;
      const auto it = trigger_marks_.find(m.name);
      if (it == trigger_marks_.end() || m.satisfied_at > it->second) {
        arrivals.push_back(m.name);
        trigger_marks_[m.name] = m.satisfied_at;
      }
    }
  }
  if (should_run_cycle(EventDriven{*triggers}, now_, last_run_, arrivals, now_)) {
    out.push_back(run_cycle(now_, CycleTrigger::Event, std::nullopt));
  }
  return out;
}

std::vector<CycleResult> Session::advance_to(Millis time) {
  if (time < now_) {
    throw OutOfOrderTimestamp("cannot move back from " + std::to_string(now_) + " ms to " + std::to_string(time) + " ms");
  }
  std::vector<CycleResult> out;
  run_due(time, true, out);
  now_ = time;
  return out;
}

CycleResult Session::query(const std::string& text) { return run_cycle(now_, CycleTrigger::Query, text); }

CycleResult Session::run_cycle(Millis now, CycleTrigger trigger, const std::optional<std::string>& query) {
  const ModelBundle& b = *bundle_;
  const auto& cfg = b.config;
  const auto& net = b.model.network;

  CycleResult r;
  r.cycle = cycles_++;
  r.time = now;
  r.trigger = trigger;
  r.offer_expired = expire_offer(tracker_, now, assistance_.timeout);

  const auto snap = queue_.snapshot();
  r.queued_events = snap.size();
  r.active = b.program.evaluate(snap, now, clock_);
  std::map<std::string, const pattern::ModeledEvent*> active;
  for (const auto& m : r.active) active.emplace(m.name, &m);

  // Profile: each new satisfaction of a trigger filter counts once.
  std::vector<TriggerEvent> fired;
  std::set<std::string> reviewed;
  std::set<std::string> fired_names;
  for (const auto& rule : b.rules.rules) {
    const auto it = active.find(rule.trigger);
    if (it == active.end()) continue;
    const Millis at = it->second->satisfied_at;
    const auto mark = profile_marks_.find(rule.trigger);
    const bool fresh = fired_names.contains(rule.trigger) || mark == profile_marks_.end() || at > mark->second;
    if (!fresh) continue;
    if (fired_names.insert(rule.trigger).second) {
      fired.push_back({rule.trigger, cfg.epoch_ms + at});
      profile_marks_[rule.trigger] = at;
    }
    if (rule.topic) reviewed.insert(*rule.topic);
  }
  if (!fired.empty()) profile_ = update(profile_, fired, b.rules);

  // Findings: aged evidence for annotated observations, plain evidence for the
  // rest. Before the first event nothing has been observed, absent or not.
  const bool started = !snap.empty();
  std::vector<TemporalFinding> findings;
  std::set<std::string> aged;
  for (const auto& spec : b.model.temporal) {
    aged.insert(spec.variable);
    TemporalFinding f{spec.variable, started ? FindingState::NotSeen : FindingState::Unobserved, 0.0, spec.units()};
    if (!started) {
      findings.push_back(f);
      continue;
    }
    if (const auto it = active.find(spec.variable); it != active.end()) {
      f.state = FindingState::Seen;
      f.age = spec.units() == AgeUnit::Millis ? static_cast<double>(it->second->age)
                                              : static_cast<double>(it->second->events_since);
    }
    findings.push_back(f);
  }
  InstantModel instant = build_instant_model(net, b.model.temporal, findings);
  for (const auto& f : b.program.filters()) {
    if (!started || aged.contains(f.name) || cfg.internal_filters.contains(f.name)) continue;
    if (const bn::Variable* v = net.find_variable(f.name)) {
      instant.evidence[f.name] = active.contains(f.name) ? v->states[1] : v->states[0];
    }
  }

  const ProfileEvidence profile_evidence = as_evidence(profile_, b.rules, net);
  const NeedsEstimate est = infer_needs(instant, profile_evidence.evidence, {cfg.need_variable}, cfg.assistance_variable);
  r.p_help = est.p_help;
  const Distribution& actions = est.posterior.at(cfg.need_variable);
  if (query) {
    r.query = *query;
    const auto terms = tokenize(*query, vocabulary_);
    r.query_terms.assign(terms.begin(), terms.end());
    const Distribution words = infer_from_terms(terms, b.terms);
    r.action_needs = actions;
    r.needs = cfg.words_only ? words : fuse(actions, words, cfg.fusion);
    r.fused = true;
  } else {
    r.needs = actions;
  }

  r.decision = decide(top_k(r.needs, r.needs.size()), r.p_help, assistance_, tracker_, now);
  record_cycle(tracker_, r.needs, assistance_.offline_threshold, reviewed);
  if (trigger != CycleTrigger::Query) last_run_ = now;
  return r;
}

}  // namespace goalcast
