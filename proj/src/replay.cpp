#include "goalcast/replay.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <stdexcept>

#include <fmt/format.h>

namespace goalcast {

std::pair<Millis, std::string> parse_query_at(std::string_view spec) {
  const auto colon = spec.find(':');
  if (colon == std::string_view::npos) throw std::invalid_argument("query must look like T:TEXT");
  Millis t = 0;
  const auto digits = spec.substr(0, colon);
  const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), t);
  if (ec != std::errc{} || ptr != digits.data() + digits.size() || t < 0) {
    throw std::invalid_argument("bad query time '" + std::string(digits) + "'");
  }
  return {t, std::string(spec.substr(colon + 1))};
}

std::vector<CycleResult> replay(std::shared_ptr<const ModelBundle> bundle, const std::vector<AtomicEvent>& events,
                                const ReplayOptions& options) {
  Session session(std::move(bundle), {options.policy, options.threshold, options.profile});
  auto queries = options.queries;
  std::stable_sort(queries.begin(), queries.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

  Millis until = options.until.value_or(0);
  if (!options.until) {
    if (!events.empty()) until = events.back().timestamp;
    if (!queries.empty()) until = std::max(until, queries.back().first);
  }

  std::vector<CycleResult> out;
  auto take = [&](std::vector<CycleResult>&& more) {
    out.insert(out.end(), std::make_move_iterator(more.begin()), std::make_move_iterator(more.end()));
  };
  std::size_t q = 0;
  auto ask_before = [&](Millis limit) {
    for (; q < queries.size() && queries[q].first < limit && queries[q].first <= until; ++q) {
      take(session.advance_to(std::max(queries[q].first, session.now())));
      out.push_back(session.query(queries[q].second));
    }
  };
  for (const auto& e : events) {
    if (e.timestamp > until) break;
    ask_before(e.timestamp);
    take(session.submit_event(e));
  }
  ask_before(until + 1);
  take(session.advance_to(std::max(until, session.now())));
  return out;
}

std::string render_trace(const std::vector<CycleResult>& results) {
  std::string out;
  for (const auto& r : results) {
    out += to_json_line(r);
    out += '\n';
  }
  return out;
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

}  // namespace goalcast
