#include "goalcast/event_stream.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "goalcast/error.hpp"

namespace goalcast {

namespace {

constexpr double kMinGapMs = 1.0;

}  // namespace

void ClockModel::observe(Millis timestamp) {
  if (last_timestamp) {
    const double gap = static_cast<double>(timestamp - *last_timestamp);
    if (observed_rate == 0.0 && mean_gap_ms == 0.0) {
      mean_gap_ms = gap;
    } else {
      mean_gap_ms = (1.0 - smoothing) * mean_gap_ms + smoothing * gap;
    }
    observed_rate = 1000.0 / std::max(mean_gap_ms, kMinGapMs);
  }
  last_timestamp = timestamp;
}

EventQueue::EventQueue(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) {
    throw Error("event queue capacity must be positive");
  }
}

void EventQueue::ingest(AtomicEvent event, ClockModel& clock) {
  if (event.symbol.empty()) {
    throw Error("atomic event with empty symbol");
  }
  if (event.timestamp < 0) {
    throw OutOfOrderTimestamp("negative timestamp " + std::to_string(event.timestamp));
  }
  if (last_timestamp_ && event.timestamp < *last_timestamp_) {
    throw OutOfOrderTimestamp("event '" + event.symbol + "' at " + std::to_string(event.timestamp) +
                              " ms precedes last event at " + std::to_string(*last_timestamp_) + " ms");
  }
  clock.observe(event.timestamp);
  last_timestamp_ = event.timestamp;
  events_.push_back(std::move(event));
  ++total_ingested_;
  while (events_.size() > capacity_) {
    events_.pop_front();
  }
}

std::span<const AtomicEvent> window(std::span<const AtomicEvent> events, Millis now, Span span) {
  if (span.amount <= 0) {
    return {};
  }
  // Never include anything stamped after `now`.
  const auto end = std::upper_bound(events.begin(), events.end(), now,
                                    [](Millis t, const AtomicEvent& e) { return t < e.timestamp; });
  if (span.unit == SpanUnit::Commands) {
    const auto available = static_cast<std::int64_t>(end - events.begin());
    const auto take = std::min(available, span.amount);
    return {end - take, end};
  }
  const Millis floor = now - span.amount;
  const auto begin = std::upper_bound(events.begin(), end, floor,
                                      [](Millis t, const AtomicEvent& e) { return t < e.timestamp; });
  return {begin, end};
}

Millis scale_duration(Millis nominal, const ClockModel& clock) {
  if (clock.observed_rate <= 0.0) {
    return nominal;
  }
  const double base = static_cast<double>(nominal);
  double scaled = base * (clock.reference_rate / clock.observed_rate);
  scaled = std::clamp(scaled, base / clock.clamp, base * clock.clamp);
  return std::max<Millis>(1, std::llround(scaled));
}

std::set<std::string> classify(const AtomicEvent& event, std::span<const EventClass> classes) {
  std::set<std::string> out;
  for (const auto& c : classes) {
    if (c.members.contains(event.symbol)) {
      out.insert(c.name);
    }
  }
  return out;
}

std::vector<AtomicEvent> parse_event_log(std::istream& in) {
  std::vector<AtomicEvent> events;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') {
      continue;
    }
    std::istringstream fields(line);
    std::string stamp;
    fields >> stamp;
    Millis ts = 0;
    const auto [ptr, ec] = std::from_chars(stamp.data(), stamp.data() + stamp.size(), ts);
    if (ec != std::errc() || ptr != stamp.data() + stamp.size()) {
      throw LogParseError(line_no, "invalid timestamp '" + stamp + "'");
    }
    if (ts < 0) {
      throw LogParseError(line_no, "negative timestamp");
    }
    AtomicEvent ev;
    ev.timestamp = ts;
    if (!(fields >> ev.symbol)) {
      throw LogParseError(line_no, "missing event symbol");
    }
    std::string kv;
    while (fields >> kv) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos || eq == 0) {
        throw LogParseError(line_no, "malformed attribute '" + kv + "'");
      }
      auto key = kv.substr(0, eq);
      if (!ev.attributes.emplace(key, kv.substr(eq + 1)).second) {
        throw LogParseError(line_no, "duplicate attribute '" + key + "'");
      }
    }
    if (!events.empty() && ts < events.back().timestamp) {
      throw LogParseError(line_no, "out-of-order timestamp " + std::to_string(ts) + " after " +
                                       std::to_string(events.back().timestamp));
    }
    events.push_back(std::move(ev));
  }
  return events;
}

std::vector<AtomicEvent> read_event_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open event log '" + path + "'");
  }
  return parse_event_log(in);
}

std::string format_event_line(const AtomicEvent& event) {
  std::string out = std::to_string(event.timestamp) + " " + event.symbol;
  for (const auto& [k, v] : event.attributes) {
    out += " " + k + "=" + v;
  }
  return out;
}

}  // namespace goalcast
