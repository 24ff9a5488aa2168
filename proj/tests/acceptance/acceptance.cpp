// Acceptance checks. Prints one PASS or FAIL line per criterion and exits
// non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "bn_oracle.hpp"
#include "engine_oracle.hpp"
#include "goalcast/bundle.hpp"
#include "goalcast/pattern_parser.hpp"
#include "goalcast/replay.hpp"
#include "goalcast/temporal_inference.hpp"
#include "pattern_oracle.hpp"
#include "scale_bundle.hpp"

using namespace goalcast;
namespace fs = std::filesystem;

namespace {

const fs::path kExample = fs::path(GOALCAST_SOURCE_DIR) / "bundles" / "example";

// Collects the first few failure messages of one criterion.
struct Check {
  std::vector<std::string> failures;
  std::size_t count = 0;

  void expect(bool ok, const std::function<std::string()>& what) {
    ++count;
    if (!ok && failures.size() < 5) failures.push_back(what());
    if (!ok && failures.size() == 5) failures.emplace_back("...");
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::shared_ptr<const ModelBundle> example() {
  static const auto bundle = std::make_shared<const ModelBundle>(load_bundle(kExample));
  return bundle;
}

std::vector<AtomicEvent> random_log(std::mt19937_64& rng, const ModelBundle& b, int max_events, Millis max_gap) {
  const std::vector<std::string> symbols(b.config.event_symbols.begin(), b.config.event_symbols.end());
  std::vector<AtomicEvent> out;
  Millis t = 0;
  const int n = std::uniform_int_distribution<int>(0, max_events)(rng);
  for (int i = 0; i < n; ++i) {
    t += std::uniform_int_distribution<Millis>(0, max_gap)(rng);
    out.push_back({symbols[std::uniform_int_distribution<std::size_t>(0, symbols.size() - 1)(rng)], t, {}});
  }
  return out;
}

Distribution random_distribution(std::mt19937_64& rng, std::size_t n, bool allow_zero) {
  Distribution d;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    d.states.push_back("s" + std::to_string(i));
    double x = u(rng);
    if (allow_zero && u(rng) < 0.15) x = 0.0;
    d.probabilities.push_back(x);
    z += x;
  }
  if (z == 0.0) {
    d.probabilities[0] = 1.0;
    z = 1.0;
  }
  for (auto& x : d.probabilities) x /= z;
  return d;
}

std::size_t argmax(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

// ---------------------------------------------------------------------------

Check inference_equivalence() {
  Check c;
  std::mt19937_64 rng(1);
  const auto start = Clock::now();
  int networks = 0;
  while (networks < 200) {
    const auto net = oracle::random_network(rng);
    const auto ev = oracle::random_evidence(rng, net, 3);
    std::vector<std::string> query;
    for (const auto& v : net.variables()) {
      if (!ev.contains(v.name)) query.push_back(v.name);
    }
    if (oracle::evidence_probability(net, ev) <= 0.0) continue;
    ++networks;
    const auto post = bn::infer(net, ev, query);
    for (const auto& q : query) {
      const auto want = oracle::enumerate(net, ev, q);
      const double tv = oracle::total_variation(post.at(q).probabilities, *want);
      c.expect(tv < 1e-9, [&] { return fmt::format("network {} variable {}: TV {}", networks, q, tv); });
    }
  }
  const double elapsed = seconds_since(start);
  c.expect(elapsed < 5.0, [&] { return fmt::format("took {:.2f} s", elapsed); });
  return c;
}

Check noisy_or() {
  Check c;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = trial % 7;
    bn::NoisyOrNode node{"effect", {}, {}, u(rng) * 0.3};
    for (int i = 0; i < n; ++i) {
      node.parents.push_back("c" + std::to_string(i));
      node.activation.push_back(u(rng));
    }
    const auto cpt = bn::expand_noisy_or(node);
    c.expect(cpt.rows.size() == (std::size_t{1} << n), [&] { return "row count"; });
    for (std::size_t row = 0; row < cpt.rows.size(); ++row) {
      double off = 1.0 - node.leak;
      for (int i = 0; i < n; ++i) {
        // The first parent is the most significant bit of the row index.
        if ((row >> (n - 1 - i)) & 1U) off *= 1.0 - node.activation[static_cast<std::size_t>(i)];
      }
      const double want = 1.0 - off;
      c.expect(std::abs(cpt.rows[row][1] - want) <= 1e-15 && std::abs(cpt.rows[row][0] - off) <= 1e-15,
               [&] { return fmt::format("{} parents, row {}: {} vs {}", n, row, cpt.rows[row][1], want); });
    }
  }
  oracle::RandomNetworkOptions opts;
  opts.noisy_or_share = 0.7;
  int compared = 0;
  while (compared < 200) {
    const auto net = oracle::random_network(rng, opts);
    bn::Network expanded = net;
    bool any = false;
    for (const auto& node : net.nodes()) {
      if (const auto* nor = std::get_if<bn::NoisyOrNode>(&node)) {
        expanded.set_node(bn::expand_noisy_or(*nor));
        any = true;
      }
    }
    if (!any) continue;
    const auto ev = oracle::random_evidence(rng, net, 3);
    if (oracle::evidence_probability(net, ev) <= 0.0) continue;
    ++compared;
    std::vector<std::string> query;
    for (const auto& v : net.variables()) query.push_back(v.name);
    const auto a = bn::infer(net, ev, query);
    const auto b = bn::infer(expanded, ev, query);
    for (const auto& q : query) {
      for (std::size_t s = 0; s < a.at(q).size(); ++s) {
        const double d = std::abs(a.at(q).probabilities[s] - b.at(q).probabilities[s]);
        c.expect(d <= 1e-12, [&] { return fmt::format("posterior of {} moved by {}", q, d); });
      }
    }
  }
  return c;
}

Check decay_properties() {
  Check c;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> p(0.0, 1.0);
  std::uniform_real_distribution<double> len(0.0, 50.0);
  const DecayShape shapes[] = {DecayShape::Step, DecayShape::Linear, DecayShape::Exponential};
  for (int trial = 0; trial < 3000; ++trial) {
    const DecayShape shape = shapes[trial % 3];
    const DecaySpec spec{len(rng), shape, shape == DecayShape::Step ? 0.0 : 0.1 + len(rng),
                         trial % 2 ? AgeUnit::Millis : AgeUnit::Actions};
    const double imm = p(rng);
    const double stale = p(rng);
    auto at = [&](double age) { return decayed_probability(imm, stale, age, spec); };
    const std::string name(to_string(shape));

    c.expect(at(0.0) == imm && at(spec.horizon) == imm, [&] { return name + ": not immediate at the horizon"; });
    c.expect(std::abs(at(std::numeric_limits<double>::infinity()) - stale) <= 1e-12,
             [&] { return name + ": infinite age is not stale"; });
    c.expect(std::abs(at(spec.horizon + 1e9) - stale) <= 1e-12, [&] { return name + ": very old is not stale"; });

    double prev = imm;
    for (int k = 0; k <= 200; ++k) {
      const double age = spec.horizon * 1.5 * k / 200.0 + spec.parameter * 3.0 * k / 200.0;
      const double v = at(age);
      const bool between = std::min(imm, stale) - 1e-15 <= v && v <= std::max(imm, stale) + 1e-15;
      const bool toward = stale >= imm ? v >= prev - 1e-15 : v <= prev + 1e-15;
      c.expect(between && toward, [&] { return fmt::format("{}: not monotone at age {}", name, age); });
      prev = v;
    }
    if (shape == DecayShape::Exponential) {
      const double mid = at(spec.horizon + spec.parameter);
      c.expect(std::abs(mid - (imm + stale) / 2.0) <= 1e-12, [&] { return fmt::format("half-life point {}", mid); });
    }
    if (shape == DecayShape::Linear) {
      c.expect(std::abs(at(spec.horizon + spec.parameter) - stale) <= 1e-12, [&] { return "linear completion"; });
      c.expect(std::abs(at(spec.horizon + spec.parameter / 2.0) - (imm + stale) / 2.0) <= 1e-12,
               [&] { return "linear midpoint"; });
    }
    if (shape == DecayShape::Step) c.expect(at(spec.horizon + 1e-9) == stale, [&] { return "step past horizon"; });

    for (double age : {0.0, spec.horizon, spec.horizon + 1.0, 1e6}) {
      c.expect(decayed_probability(imm, imm, age, spec) == imm, [&] { return name + ": equal endpoints drifted"; });
    }
  }
  return c;
}

Check pattern_oracle() {
  Check c;
  std::mt19937_64 rng(4);
  const std::set<std::string> symbols{"a", "b", "c", "d"};
  const std::vector<std::string> syms(symbols.begin(), symbols.end());
  int satisfied = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto program = oracle::random_program(rng);
    const auto events = oracle::random_trace(rng, syms, 50);
    ClockModel clock;
    for (const auto& e : events) clock.observe(e.timestamp);
    const Millis now = (events.empty() ? 0 : events.back().timestamp) +
                       std::uniform_int_distribution<Millis>(0, 16)(rng) * 500;
    const auto got = pattern::compile(program, symbols).evaluate(events, now, clock);
    const auto want = oracle::scan(program, events, now, clock);
    std::map<std::string, std::pair<Millis, std::size_t>> g;
    std::map<std::string, std::pair<Millis, std::size_t>> w;
    for (const auto& m : got) g[m.name] = {m.satisfied_at, m.events_since};
    for (const auto& m : want) w[m.name] = {m.satisfied_at, m.events_since};
    c.expect(g == w, [&] { return fmt::format("trial {}:\n{}", trial, pattern::print(program)); });
    satisfied += static_cast<int>(want.size());

    // Every tight sequence match must also be a loose one.
    for (const auto& d : program) {
      const auto* f = std::get_if<pattern::FilterDefinition>(&d);
      if (!f) continue;
      const auto* seq = std::get_if<pattern::Seq>(&f->expr->node);
      if (!seq || !seq->tight) continue;
      pattern::Seq loose = *seq;
      loose.tight = false;
      auto extended = program;
      extended.push_back(pattern::FilterDefinition{"loose_copy", pattern::make(loose), f->scaled});
      const auto tight_m = oracle::sequence_matches(extended, f->name, events, now, clock);
      const auto loose_m = oracle::sequence_matches(extended, "loose_copy", events, now, clock);
      const std::set<std::vector<oracle::ElementSpan>> loose_set(loose_m.begin(), loose_m.end());
      for (const auto& m : tight_m) {
        c.expect(loose_set.contains(m), [&] { return fmt::format("trial {}: tight match not loose", trial); });
      }
    }
  }
  c.expect(satisfied > 500, [&] { return fmt::format("only {} satisfactions exercised", satisfied); });
  return c;
}

Check fusion_properties() {
  Check c;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> w(0.0, 3.0);
  std::uniform_real_distribution<double> scale(0.1, 10.0);
  for (int trial = 0; trial < 3000; ++trial) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 40)(rng);
    const auto a = random_distribution(rng, n, false);
    auto b = random_distribution(rng, n, false);
    b.states = a.states;
    const FusionWeights fw{w(rng), w(rng)};
    const auto f = fuse(a, b, fw);
    double z = 0.0;
    for (double x : f.probabilities) z += x;
    c.expect(std::abs(z - 1.0) <= 1e-9, [&] { return fmt::format("sum {}", z); });

    Distribution uniform{a.states, std::vector<double>(n, 1.0 / static_cast<double>(n))};
    const auto u = fuse(a, uniform, {1.0, w(rng)});
    const auto zero = fuse(a, b, {1.0, 0.0});
    for (std::size_t i = 0; i < n; ++i) {
      c.expect(std::abs(u.probabilities[i] - a.probabilities[i]) <= 1e-12, [&] { return "uniform factor changed the result"; });
      c.expect(std::abs(zero.probabilities[i] - a.probabilities[i]) <= 1e-12, [&] { return "zero weight changed the result"; });
    }

    if (fw.actions + fw.words > 0.0) {
      const double k = scale(rng);
      const auto scaled = fuse(a, b, {fw.actions * k, fw.words * k});
      const std::size_t i = argmax(f.probabilities);
      const std::size_t j = argmax(scaled.probabilities);
      // Only a clear winner has to survive rounding.
      auto sorted = f.probabilities;
      std::sort(sorted.rbegin(), sorted.rend());
      if (n == 1 || sorted[0] - sorted[1] > 1e-9) c.expect(i == j, [&] { return "argmax moved under weight scaling"; });
    }
  }
  return c;
}

Check temporal_consistency() {
  Check c;
  const auto& b = *example();
  const auto& net = b.model.network;
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<TemporalFinding> fresh;
    std::vector<TemporalFinding> old;
    bn::Evidence plain;
    bn::Network stale = net;
    bn::Evidence stale_ev;
    for (const auto& spec : b.model.temporal) {
      if (std::uniform_int_distribution<int>(0, 3)(rng) == 0) continue;
      const auto& v = net.variable(spec.variable);
      const bool seen = std::uniform_int_distribution<int>(0, 3)(rng) != 0;
      fresh.push_back({spec.variable, FindingState::Seen, 0.0, spec.units()});
      plain[spec.variable] = v.states[1];
      old.push_back({spec.variable, seen ? FindingState::Seen : FindingState::NotSeen,
                     std::numeric_limits<double>::infinity(), spec.units()});
      stale_ev[spec.variable] = v.states[seen ? 1 : 0];
      const auto& node = *net.find_node(spec.variable);
      if (const auto* cpt = std::get_if<bn::CptNode>(&node)) {
        bn::CptNode copy = *cpt;
        for (std::size_t r = 0; r < copy.rows.size(); ++r) copy.rows[r] = {1.0 - spec.stale[r], spec.stale[r]};
        stale.set_node(copy);
      } else {
        bn::NoisyOrNode copy = std::get<bn::NoisyOrNode>(node);
        copy.activation = spec.stale;
        stale.set_node(copy);
      }
    }
    if (trial % 2) {
      plain["expertise"] = stale_ev["expertise"] = "novice";
    }
    const std::vector<std::string> query{"need", "assistance", "difficulty"};

    auto instant = build_instant_model(net, b.model.temporal, fresh);
    if (trial % 2) instant.evidence["expertise"] = "novice";
    const auto now = bn::infer(instant.network, instant.evidence, query);
    const auto base = bn::infer(net, plain, query);
    auto aged = build_instant_model(net, b.model.temporal, old);
    if (trial % 2) aged.evidence["expertise"] = "novice";
    const auto late = bn::infer(aged.network, aged.evidence, query);
    for (const auto& q : query) {
      const auto want = oracle::enumerate(stale, stale_ev, q);
      for (std::size_t s = 0; s < now.at(q).size(); ++s) {
        c.expect(std::abs(now.at(q).probabilities[s] - base.at(q).probabilities[s]) <= 1e-12,
                 [&] { return "age 0 differs from plain evidence on " + q; });
        c.expect(std::abs(late.at(q).probabilities[s] - (*want)[s]) <= 1e-12,
                 [&] { return "infinite age differs from stale tables on " + q; });
      }
    }
  }
  return c;
}

Check controller_contract() {
  Check c;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);

  AssistanceConfig symmetric;
  symmetric.utility = UtilityTable{1, 0, 0, 1};
  c.expect(effective_threshold(symmetric) == 0.5, [&] { return "symmetric utilities are not 0.5"; });
  std::uniform_real_distribution<double> util(-5.0, 5.0);
  for (int trial = 0; trial < 2000; ++trial) {
    UtilityTable t{util(rng), util(rng), util(rng), util(rng)};
    if (t.offer_yes - t.quiet_yes <= 1e-3 || t.quiet_no - t.offer_no <= 1e-3) continue;
    AssistanceConfig cfg;
    cfg.utility = t;
    const double p = effective_threshold(cfg);
    const double gap = (p * t.offer_yes + (1 - p) * t.offer_no) - (p * t.quiet_yes + (1 - p) * t.quiet_no);
    c.expect(std::abs(gap) <= 1e-12, [&] { return fmt::format("indifference gap {}", gap); });
  }

  const std::vector<std::string> topics{"a", "b", "c", "d"};
  for (int run = 0; run < 200; ++run) {
    AssistanceConfig cfg;
    cfg.threshold = u(rng);
    cfg.top_k = 2;
    SessionTracker tracker;
    std::optional<std::string> last;
    for (int step = 0; step < 50; ++step) {
      Distribution d = random_distribution(rng, topics.size(), true);
      d.states = topics;
      const auto ranked = top_k(d, d.size());
      const double p_help = u(rng);
      const auto decision = decide(ranked, p_help, cfg, tracker, step * 100);
      const bool offered = decision.action == DecisionAction::Offer;
      if (p_help < cfg.threshold) c.expect(!offered, [&] { return "offer below threshold"; });
      if (offered) {
        c.expect(ranked.front().first != last, [&] { return "offer repeated an unchanged argmax"; });
        last = ranked.front().first;
      } else if (p_help >= cfg.threshold) {
        c.expect(ranked.front().first == last, [&] { return "quiet despite a new argmax above threshold"; });
      }
      if (step % 7 == 0) resolve_offer(tracker, OfferOutcome::Dismissed, std::nullopt);
    }
  }

  const auto b = example();
  for (int trial = 0; trial < 40; ++trial) {
    const auto events = random_log(rng, *b, 30, 1500);
    const Millis interval = std::uniform_int_distribution<Millis>(100, 3000)(rng);
    const Millis until = std::uniform_int_distribution<Millis>(0, 40000)(rng);
    ReplayOptions o;
    o.policy = Pulsed{interval};
    o.until = until;
    const auto results = replay(b, events, o);
    const auto pulses = std::count_if(results.begin(), results.end(),
                                      [](const CycleResult& r) { return r.trigger == CycleTrigger::Pulse; });
    c.expect(pulses == until / interval,
             [&] { return fmt::format("{} pulses over {} ms at {} ms", pulses, until, interval); });
  }
  return c;
}

Check determinism() {
  Check c;
  const auto events = read_event_log((kExample / "session.log").string());
  ReplayOptions o;
  o.policy = parse_policy("pulsed:1s");
  o.queries.push_back(parse_query_at("24000:how do I change the chart axis"));
  o.until = 30000;
  const auto first = render_trace(replay(example(), events, o));
  const auto second = render_trace(replay(std::make_shared<const ModelBundle>(load_bundle(kExample)), events, o));
  c.expect(first == second, [&] { return "two replays differ"; });
  const auto recorded = slurp(kExample / "session.sha256").substr(0, 64);
  const auto actual = sha256_hex(first);
  c.expect(recorded == actual, [&] { return "checksum " + actual + " does not match " + recorded; });
  const auto audit = oracle::audit_trace(*example(), events, first);
  for (const auto& m : audit.mismatches) c.expect(false, [&] { return m; });
  return c;
}

Check scale() {
  Check c;
  const fs::path dir = fs::temp_directory_path() / ("goalcast_accept_" + std::to_string(std::random_device{}()));
  fs::create_directories(dir);
  oracle::write_scale_bundle(dir, 42);
  const auto bundle = std::make_shared<const ModelBundle>(load_bundle(dir));
  fs::remove_all(dir);
  c.expect(bundle->terms.goals.size() == oracle::kScaleGoals, [&] { return "goal count"; });
  c.expect(bundle->terms.likelihood.size() == oracle::kScaleTerms, [&] { return "term count"; });

  Session session(bundle, {});
  for (auto& e : oracle::scale_events(7, 400)) session.submit_event(std::move(e));
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    session.advance_to(session.now() + 250);
    const auto start = Clock::now();
    const auto r = session.query("w001 w017 w230 w599");
    worst = std::max(worst, seconds_since(start) * 1000.0);
    c.expect(r.needs.size() == oracle::kScaleGoals, [&] { return "needs size"; });
  }
  c.expect(worst < 50.0, [&] { return fmt::format("slowest cycle {:.2f} ms", worst); });
  return c;
}

Check profiles() {
  Check c;
  std::mt19937_64 rng(10);
  const auto text = [&] {
    static const std::string alphabet = "abcXYZ019 _-\"\\/\n\t";
    std::string s;
    for (int i = std::uniform_int_distribution<int>(0, 10)(rng); i > 0; --i) {
      s += alphabet[std::uniform_int_distribution<std::size_t>(0, alphabet.size() - 1)(rng)];
    }
    return s;
  };
  const fs::path path = fs::temp_directory_path() / ("goalcast_accept_profile_" + std::to_string(std::random_device{}()));
  for (int trial = 0; trial < 300; ++trial) {
    Profile p;
    p.user_id = text();
    p.declared_level = text();
    for (int i = std::uniform_int_distribution<int>(0, 5)(rng); i > 0; --i) {
      CompetencyRecord r;
      r.count = std::uniform_int_distribution<std::uint64_t>()(rng);
      r.last_seen = std::uniform_int_distribution<std::int64_t>(std::numeric_limits<std::int64_t>::min())(rng);
      r.derived_state = text();
      p.competencies[text() + std::to_string(i)] = r;
    }
    store(p, path);
    c.expect(load(path) == p, [&] { return fmt::format("round trip {} lost data", trial); });
  }
  fs::remove(path);

  const auto& rules = example()->rules;
  const std::vector<std::string> names{"chart_built", "saved_work", "unrelated"};
  auto batch = [&] {
    std::vector<TriggerEvent> out;
    for (int i = std::uniform_int_distribution<int>(0, 8)(rng); i > 0; --i) {
      out.push_back({names[std::uniform_int_distribution<std::size_t>(0, 2)(rng)],
                     std::uniform_int_distribution<std::int64_t>(0, 1'000'000)(rng)});
    }
    return out;
  };
  for (int trial = 0; trial < 500; ++trial) {
    const Profile start = trial % 2 ? update(Profile{}, batch(), rules) : Profile{};
    const auto a = batch();
    const auto b2 = batch();
    auto ab = a;
    ab.insert(ab.end(), b2.begin(), b2.end());
    c.expect(update(update(start, a, rules), b2, rules) == update(start, ab, rules),
             [&] { return fmt::format("batch split changed the profile in trial {}", trial); });
  }
  return c;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Check()>>> criteria = {
      {"inference matches joint enumeration", inference_equivalence},
      {"noisy-OR expansion", noisy_or},
      {"decay properties", decay_properties},
      {"pattern evaluation matches the brute-force scanner", pattern_oracle},
      {"fusion properties", fusion_properties},
      {"single-stage temporal consistency", temporal_consistency},
      {"controller contract", controller_contract},
      {"deterministic replay and committed checksum", determinism},
      {"40 goals, 600 terms, one cycle under 50 ms", scale},
      {"profile round trip and batch associativity", profiles},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto& [name, run] = criteria[i];
    const auto start = Clock::now();
    Check result;
    try {
      result = run();
    } catch (const std::exception& e) {
      result.failures.push_back(std::string("exception: ") + e.what());
    }
    const bool ok = result.failures.empty();
    failed += !ok;
    fmt::print("{} {:2}. {} ({} checks, {:.2f} s)\n", ok ? "PASS" : "FAIL", i + 1, name, result.count, seconds_since(start));
    for (const auto& f : result.failures) fmt::print("       {}\n", f);
  }
  return failed == 0 ? 0 : 1;
}
