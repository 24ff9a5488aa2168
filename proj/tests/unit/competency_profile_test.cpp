#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "goalcast/competency_profile.hpp"
#include "goalcast/error.hpp"

using namespace goalcast;
namespace fs = std::filesystem;

namespace {

ProfileRules chart_rules() {
  return parse_rules(R"({
    "expertise_variable": "expertise",
    "default_level": "novice",
    "competencies": [
      {"name": "chart_use", "variable": "chart_skill",
       "schedule": [{"count": 0, "state": "novice"}, {"count": 3, "state": "skilled"}]},
      {"name": "macros", "variable": "macro_skill", "schedule": [{"count": 1, "state": "bogus"}]},
      {"name": "printing", "schedule": [{"count": 2, "state": "seen"}]}
    ],
    "rules": [
      {"trigger": "chart_done", "competency": "chart_use", "topic": "charting"},
      {"trigger": "macro_run", "competency": "macros"},
      {"trigger": "print_done", "competency": "printing"},
      {"trigger": "both", "competency": "chart_use"},
      {"trigger": "both", "competency": "printing"}
    ]
  })");
}

bn::Network profile_network() {
  bn::Network net;
  net.add_variable({"expertise", {"novice", "expert"}, bn::VariableKind::Profile});
  net.add_variable({"chart_skill", {"novice", "skilled"}, bn::VariableKind::Profile});
  net.add_variable({"macro_skill", {"none", "some"}, bn::VariableKind::Profile});
  return net;
}

fs::path temp_file(const std::string& name) {
  return fs::temp_directory_path() / ("goalcast-profile-" + std::to_string(std::random_device{}()) + "-" + name);
}

std::string random_text(std::mt19937_64& rng) {
  static const std::string alphabet = "abcXYZ019 _-\"\\/\n\t\xc3\xa9";
  std::string s;
  const int n = std::uniform_int_distribution<int>(0, 12)(rng);
  for (int i = 0; i < n; ++i) s += alphabet[std::uniform_int_distribution<std::size_t>(0, alphabet.size() - 3)(rng)];
  if (std::uniform_int_distribution<int>(0, 3)(rng) == 0) s += "\xc3\xa9";
  return s;
}

Profile random_profile(std::mt19937_64& rng) {
  Profile p;
  p.user_id = random_text(rng);
  p.declared_level = random_text(rng);
  const int n = std::uniform_int_distribution<int>(0, 6)(rng);
  for (int i = 0; i < n; ++i) {
    CompetencyRecord r;
    r.count = std::uniform_int_distribution<std::uint64_t>(0, std::numeric_limits<std::uint64_t>::max())(rng);
    r.last_seen = std::uniform_int_distribution<std::int64_t>(std::numeric_limits<std::int64_t>::min(),
                                                              std::numeric_limits<std::int64_t>::max())(rng);
    r.derived_state = random_text(rng);
    p.competencies[random_text(rng) + std::to_string(i)] = r;
  }
  return p;
}

std::vector<TriggerEvent> random_batch(std::mt19937_64& rng) {
  static const std::vector<std::string> names{"chart_done", "macro_run", "print_done", "both", "unrelated"};
  std::vector<TriggerEvent> out;
  const int n = std::uniform_int_distribution<int>(0, 8)(rng);
  for (int i = 0; i < n; ++i) {
    out.push_back({names[std::uniform_int_distribution<std::size_t>(0, names.size() - 1)(rng)],
                   std::uniform_int_distribution<std::int64_t>(0, 1'000'000)(rng)});
  }
  return out;
}

}  // namespace

TEST_CASE("update follows the schedule") {
  const auto rules = chart_rules();
  Profile p;
  p.competencies["chart_use"] = {2, 100, "novice"};
  const auto once = update(p, {{"chart_done", 500}}, rules);
  CHECK(once.competencies.at("chart_use") == CompetencyRecord{3, 500, "skilled"});

  CHECK(update(p, {}, rules) == p);
  CHECK(update(p, {{"unrelated", 10}}, rules) == p);

  const auto twice = update(Profile{}, {{"print_done", 1}, {"print_done", 2}}, rules);
  CHECK(twice.competencies.at("printing") == CompetencyRecord{2, 2, "seen"});

  // One trigger feeding two competencies.
  const auto both = update(Profile{}, {{"both", 7}}, rules);
  CHECK(both.competencies.at("chart_use").count == 1);
  CHECK(both.competencies.at("printing").count == 1);
  CHECK(both.competencies.at("printing").derived_state.empty());

  ProfileRules broken = rules;
  broken.rules.push_back({"x", "no_such_competency", std::nullopt});
  CHECK_THROWS_AS(check(broken), UnknownCompetency);
  CHECK_THROWS_AS(update(Profile{}, {{"x", 1}}, broken), UnknownCompetency);
}

TEST_CASE("update is batch-associative") {
  const auto rules = chart_rules();
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 500; ++trial) {
    Profile p;
    if (trial % 2) p = update(Profile{}, random_batch(rng), rules);
    const auto a = random_batch(rng);
    const auto b = random_batch(rng);
    auto ab = a;
    ab.insert(ab.end(), b.begin(), b.end());
    const auto split = update(update(p, a, rules), b, rules);
    CHECK(split == update(p, ab, rules));
    for (const auto& [name, rec] : split.competencies) {
      const auto it = p.competencies.find(name);
      CHECK(rec.count >= (it == p.competencies.end() ? 0 : it->second.count));
    }
  }
}

TEST_CASE("as_evidence maps declared level and competencies") {
  const auto rules = chart_rules();
  const auto net = profile_network();

  Profile expert;
  expert.declared_level = "expert";
  CHECK(as_evidence(expert, rules, net).evidence == bn::Evidence{{"expertise", "expert"}});

  Profile empty;
  const auto defaults = as_evidence(empty, rules, net);
  CHECK(defaults.evidence == bn::Evidence{{"expertise", "novice"}});
  CHECK(defaults.warnings.empty());

  Profile skilled = update(Profile{}, {{"chart_done", 1}, {"chart_done", 2}, {"chart_done", 3}}, rules);
  CHECK(as_evidence(skilled, rules, net).evidence.at("chart_skill") == "skilled");

  Profile odd;
  odd.declared_level = "wizard";
  odd = update(odd, {{"macro_run", 1}, {"print_done", 2}}, rules);
  odd.competencies["retired"] = {4, 1, "x"};
  const auto ev = as_evidence(odd, rules, net);
  CHECK(ev.evidence.empty());
  CHECK(ev.warnings.size() == 4);  // bad level, bad macro state, unmapped printing, unknown retired
}

TEST_CASE("as_evidence never asserts a state the variable lacks") {
  const auto rules = chart_rules();
  const auto net = profile_network();
  std::mt19937_64 rng(13);
  const std::vector<std::string> levels{"novice", "expert", "guru", ""};
  for (int trial = 0; trial < 500; ++trial) {
    Profile p = update(Profile{}, random_batch(rng), rules);
    p.declared_level = levels[std::uniform_int_distribution<std::size_t>(0, 3)(rng)];
    if (trial % 3 == 0) p.competencies["chart_use"].derived_state = random_text(rng);
    for (const auto& [var, state] : as_evidence(p, rules, net).evidence) {
      const auto* v = net.find_variable(var);
      REQUIRE(v != nullptr);
      CHECK(v->state_index(state).has_value());
    }
  }
}

TEST_CASE("store and load round-trip random profiles") {
  std::mt19937_64 rng(14);
  const auto path = temp_file("roundtrip.json");
  for (int trial = 0; trial < 300; ++trial) {
    const Profile p = random_profile(rng);
    store(p, path);
    CHECK(load(path) == p);
    CHECK(profile_from_json(to_json(p)) == p);
  }
  fs::remove(path);
}

TEST_CASE("load rejects bad files") {
  const auto path = temp_file("bad.json");
  Profile p;
  p.user_id = "u";
  p.competencies["chart_use"] = {5, 1, "novice"};
  store(p, path);

  // Stored states are recomputed from counts when rules are supplied.
  CHECK(load(path, nullptr).competencies.at("chart_use").derived_state == "novice");
  const auto rules = chart_rules();
  CHECK(load(path, &rules).competencies.at("chart_use").derived_state == "skilled");

  std::string text;
  {
    std::ifstream in(path);
    text.assign(std::istreambuf_iterator<char>(in), {});
  }
  {
    std::ofstream out(path, std::ios::trunc);
    out << text.substr(0, text.size() / 2);
  }
  CHECK_THROWS_AS(load(path), CorruptProfile);
  {
    std::ofstream out(path, std::ios::trunc);
    out << R"({"schema_version": 99, "user_id": "u", "declared_level": "", "competencies": {}})";
  }
  CHECK_THROWS_AS(load(path), SchemaVersionError);
  {
    std::ofstream out(path, std::ios::trunc);
    out << R"({"schema_version": 1, "user_id": "u", "competencies": {}})";
  }
  CHECK_THROWS_AS(load(path), CorruptProfile);
  fs::remove(path);
  CHECK_THROWS_AS(load(path), IoError);
  CHECK_THROWS_AS(store(p, "/nonexistent-dir/profile.json"), IoError);
}
