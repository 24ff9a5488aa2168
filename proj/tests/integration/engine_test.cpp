#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "bn_oracle.hpp"
#include "engine_oracle.hpp"
#include "goalcast/bundle.hpp"
#include "goalcast/error.hpp"
#include "goalcast/replay.hpp"

using namespace goalcast;
namespace fs = std::filesystem;

namespace {

const fs::path kExample = fs::path(GOALCAST_SOURCE_DIR) / "bundles" / "example";

std::shared_ptr<const ModelBundle> example() {
  static const auto bundle = std::make_shared<const ModelBundle>(load_bundle(kExample));
  return bundle;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

// A scratch copy of the example bundle, removed on scope exit.
struct ScratchBundle {
  fs::path dir;
  explicit ScratchBundle(const std::string& tag) {
    dir = fs::temp_directory_path() / ("goalcast_" + tag + "_" + std::to_string(std::random_device{}()));
    fs::create_directories(dir);
    for (const auto& e : fs::directory_iterator(kExample)) fs::copy_file(e.path(), dir / e.path().filename());
  }
  ~ScratchBundle() { fs::remove_all(dir); }
  // Replaces every occurrence.
  void replace(const std::string& file, const std::string& from, const std::string& to) {
    auto text = slurp(dir / file);
    REQUIRE(text.find(from) != std::string::npos);
    for (auto pos = text.find(from); pos != std::string::npos; pos = text.find(from, pos + to.size())) {
      text.replace(pos, from.size(), to);
    }
    spit(dir / file, text);
  }
};

std::vector<std::string> problems_of(const fs::path& dir) {
  try {
    load_bundle(dir);
  } catch (const BundleError& e) {
    return e.problems();
  }
  return {};
}

bool any_contains(const std::vector<std::string>& v, const std::string& needle) {
  return std::any_of(v.begin(), v.end(), [&](const std::string& s) { return s.find(needle) != std::string::npos; });
}

std::vector<AtomicEvent> example_log() { return read_event_log((kExample / "session.log").string()); }

ReplayOptions canonical_options() {
  ReplayOptions o;
  o.policy = parse_policy("pulsed:1s");
  o.queries.push_back(parse_query_at("24000:how do I change the chart axis"));
  o.until = 30000;
  return o;
}

std::vector<AtomicEvent> random_log(std::mt19937_64& rng, const ModelBundle& b, int max_events, Millis max_gap) {
  const std::vector<std::string> symbols(b.config.event_symbols.begin(), b.config.event_symbols.end());
  std::uniform_int_distribution<int> count(0, max_events);
  std::uniform_int_distribution<std::size_t> pick(0, symbols.size() - 1);
  std::uniform_int_distribution<Millis> gap(0, max_gap);
  std::vector<AtomicEvent> out;
  Millis t = 0;
  const int n = count(rng);
  for (int i = 0; i < n; ++i) {
    t += gap(rng);
    out.push_back({symbols[pick(rng)], t, {}});
  }
  return out;
}

void require_clean(const oracle::AuditReport& report) {
  for (const auto& m : report.mismatches) INFO(m);
  CHECK(report.mismatches.empty());
}

}  // namespace

TEST_CASE("example bundle loads and cross-checks cleanly") {
  const auto& b = *example();
  CHECK(cross_check(b).empty());
  CHECK(b.terms.goals == b.model.network.variable("need").states);
  CHECK(b.program.filters().size() == 9);
}

TEST_CASE("bundle errors are collected") {
  SUBCASE("undeclared event symbol") {
    ScratchBundle s("sym");
    s.replace("patterns.lel", "edit_select_all", "edit_select_everything");
    CHECK(any_contains(problems_of(s.dir), "UnknownSymbol"));
  }
  SUBCASE("term goal missing from the network") {
    ScratchBundle s("goal");
    s.replace("terms.txt", "printing", "juggling");
    CHECK(any_contains(problems_of(s.dir), "CrossReferenceError"));
  }
  SUBCASE("missing file") {
    ScratchBundle s("missing");
    fs::remove(s.dir / kTermsFile);
    CHECK(any_contains(problems_of(s.dir), kTermsFile));
  }
  SUBCASE("several problems at once") {
    ScratchBundle s("many");
    s.replace("patterns.lel", "edit_select_all", "edit_select_everything");
    s.replace("terms.txt", "prior 0.12", "prior lots");
    const auto problems = problems_of(s.dir);
    CHECK(any_contains(problems, kPatternFile));
    CHECK(any_contains(problems, kTermsFile));
  }
}

TEST_CASE("before any event the posterior is the prior given the profile") {
  const auto b = example();
  ReplayOptions o;
  o.policy = parse_policy("pulsed:1s");
  o.until = 3000;
  const auto results = replay(b, {}, o);
  REQUIRE(results.size() == 3);
  bn::Evidence ev{{"expertise", "intermediate"}};
  const auto need = oracle::enumerate(b->model.network, ev, "need");
  const auto help = oracle::enumerate(b->model.network, ev, "assistance");
  for (const auto& r : results) {
    CHECK(r.active.empty());
    CHECK(r.p_help == doctest::Approx((*help)[1]).epsilon(1e-12));
    for (std::size_t i = 0; i < need->size(); ++i) CHECK(r.needs.probabilities[i] == doctest::Approx((*need)[i]).epsilon(1e-12));
  }
}

TEST_CASE("a stored profile feeds the network") {
  const auto b = example();
  ReplayOptions o;
  o.policy = parse_policy("pulsed:1s");
  o.until = 1000;
  o.profile.declared_level = "expert";
  o.profile.competencies["charting"].count = 5;
  const auto r = replay(b, {}, o);
  REQUIRE(r.size() == 1);
  const bn::Evidence ev{{"expertise", "expert"}, {"chart_skill", "practiced"}};
  const auto need = oracle::enumerate(b->model.network, ev, "need");
  for (std::size_t i = 0; i < need->size(); ++i) CHECK(r[0].needs.probabilities[i] == doctest::Approx((*need)[i]).epsilon(1e-12));
}

TEST_CASE("replay is deterministic and matches the committed checksum") {
  const auto b = example();
  const auto events = example_log();
  const auto first = render_trace(replay(b, events, canonical_options()));
  const auto second = render_trace(replay(std::make_shared<const ModelBundle>(load_bundle(kExample)), events,
                                          canonical_options()));
  CHECK(first == second);
  const auto recorded = slurp(kExample / "session.sha256");
  CHECK(recorded.substr(0, 64) == sha256_hex(first));
}

TEST_CASE("every cycle of the example trace agrees with the reference computation") {
  const auto b = example();
  const auto events = example_log();
  const auto trace = render_trace(replay(b, events, canonical_options()));
  const auto report = oracle::audit_trace(*b, events, trace);
  CHECK(report.cycles == 31);
  CHECK(report.offers >= 1);
  require_clean(report);
}

TEST_CASE("random logs agree with the reference computation under every policy") {
  const auto b = example();
  std::mt19937_64 rng(11);
  const std::vector<std::string> policies = {"pulsed:700ms", "event:menu_surfing,dialog_thrash,chart_click",
                                             "augmented:1500ms:dialog_thrash,menu_any", "deferred:2s:800ms"};
  const std::vector<double> thresholds = {0.0, 0.3, 0.5, 0.9};
  for (int trial = 0; trial < 24; ++trial) {
    const auto events = random_log(rng, *b, 40, 900);
    ReplayOptions o;
    o.policy = parse_policy(policies[trial % policies.size()]);
    o.threshold = thresholds[(trial / 4) % thresholds.size()];
    o.until = (events.empty() ? 0 : events.back().timestamp) + 5000;
    if (trial % 3 == 0) o.queries.push_back({o.until.value() / 2, "chart axis format sort"});
    const auto trace = render_trace(replay(b, events, o));
    oracle::AuditOptions a;
    a.threshold = *o.threshold;
    CAPTURE(trial);
    require_clean(oracle::audit_trace(*b, events, trace, a));
  }
}

TEST_CASE("an uninformative term model leaves the action posterior unchanged") {
  auto copy = *example();
  const std::size_t n = copy.terms.goals.size();
  copy.terms.priors.assign(n, 1.0 / static_cast<double>(n));
  for (auto& [term, row] : copy.terms.likelihood) row.assign(n, 0.4);
  const auto b = std::make_shared<const ModelBundle>(copy);
  const auto events = example_log();
  ReplayOptions o;
  o.policy = parse_policy("pulsed:1s");
  o.until = 20000;
  o.queries.push_back({12000, "chart axis printing"});
  const auto results = replay(b, events, o);
  const auto q = std::find_if(results.begin(), results.end(), [](const CycleResult& r) { return r.fused; });
  REQUIRE(q != results.end());
  REQUIRE(q->action_needs);
  CHECK(!q->query_terms.empty());
  for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(q->needs.probabilities[i] - q->action_needs->probabilities[i]) < 1e-12);
}

TEST_CASE("pulsed replay fires floor(until / interval) pulses") {
  const auto b = example();
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const auto events = random_log(rng, *b, 30, 1500);
    const Millis interval = std::uniform_int_distribution<Millis>(100, 3000)(rng);
    const Millis until = std::uniform_int_distribution<Millis>(0, 40000)(rng);
    ReplayOptions o;
    o.policy = Pulsed{interval};
    o.until = until;
    const auto results = replay(b, events, o);
    const auto pulses = std::count_if(results.begin(), results.end(),
                                      [](const CycleResult& r) { return r.trigger == CycleTrigger::Pulse; });
    CHECK(pulses == until / interval);
    CHECK(results.size() == static_cast<std::size_t>(pulses));
  }
}

TEST_CASE("an empty log over zero time yields an empty trace") {
  ReplayOptions o;
  o.until = 0;
  CHECK(render_trace(replay(example(), {}, o)).empty());
}

TEST_CASE("log errors") {
  std::istringstream bad("100 typing\n50 typing\n");
  try {
    parse_event_log(bad);
    FAIL("expected an ordering error");
  } catch (const LogParseError& e) {
    CHECK(e.line() == 2);
  }
  ReplayOptions o;
  CHECK_THROWS_AS(replay(example(), std::vector<AtomicEvent>{{"teleport", 10, {}}}, o), UnknownSymbol);
}

TEST_CASE("event-driven and deferred policies") {
  const auto b = example();
  const auto events = example_log();
  SUBCASE("event-driven cycles only on trigger arrivals") {
    ReplayOptions o;
    o.policy = parse_policy("event:dialog_cancel");
    const auto results = replay(b, events, o);
    const auto cancels = std::count_if(events.begin(), events.end(), [](const AtomicEvent& e) { return e.symbol == "dialog_cancel"; });
    CHECK(results.size() == static_cast<std::size_t>(cancels));
    for (const auto& r : results) CHECK(r.trigger == CycleTrigger::Event);
  }
  SUBCASE("deferred waits for idle time") {
    ReplayOptions o;
    o.policy = parse_policy("deferred:1s:2s");
    o.until = 30000;
    const auto results = replay(b, events, o);
    REQUIRE(!results.empty());
    for (const auto& r : results) {
      CHECK(r.trigger == CycleTrigger::Idle);
      Millis last = -1;
      for (const auto& e : events) {
        if (e.timestamp <= r.time) last = e.timestamp;
      }
      if (last >= 0) CHECK(r.time - last >= 2000);
    }
  }
}
