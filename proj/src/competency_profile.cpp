#include "goalcast/competency_profile.hpp"

#include <unistd.h>

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <system_error>

#include <json.hpp>

#include "goalcast/error.hpp"

namespace goalcast {

using nlohmann::json;

const CompetencySpec* ProfileRules::find(const std::string& competency) const {
  for (const auto& c : competencies) {
    if (c.name == competency) return &c;
  }
  return nullptr;
}

void check(const ProfileRules& rules) {
  std::map<std::string, int> names;
  for (const auto& c : rules.competencies) {
    if (names[c.name]++) throw std::invalid_argument("competency '" + c.name + "' declared twice");
    if (c.schedule.empty()) throw std::invalid_argument("competency '" + c.name + "' has an empty schedule");
    for (std::size_t i = 1; i < c.schedule.size(); ++i) {
      if (c.schedule[i].first <= c.schedule[i - 1].first) {
        throw std::invalid_argument("schedule of '" + c.name + "' must have increasing thresholds");
      }
    }
  }
  for (const auto& r : rules.rules) {
    if (!rules.find(r.competency)) {
      throw UnknownCompetency("rule for '" + r.trigger + "' names unknown competency '" + r.competency + "'");
    }
  }
}

ProfileRules parse_rules(const std::string& json_text) {
  ProfileRules rules;
  try {
    const json j = json::parse(json_text);
    rules.expertise_variable = j.at("expertise_variable").get<std::string>();
    rules.default_level = j.at("default_level").get<std::string>();
    for (const auto& c : j.at("competencies")) {
      CompetencySpec spec;
      spec.name = c.at("name").get<std::string>();
      spec.variable = c.value("variable", std::string{});
      for (const auto& step : c.at("schedule")) {
        spec.schedule.emplace_back(step.at("count").get<std::uint64_t>(), step.at("state").get<std::string>());
      }
      rules.competencies.push_back(std::move(spec));
    }
    for (const auto& r : j.at("rules")) {
      IndicatorRule rule;
      rule.trigger = r.at("trigger").get<std::string>();
      rule.competency = r.at("competency").get<std::string>();
      if (r.contains("topic")) rule.topic = r.at("topic").get<std::string>();
      rules.rules.push_back(std::move(rule));
    }
  } catch (const json::exception& e) {
    throw CorruptProfile(std::string("malformed rules: ") + e.what());
  }
  try {
    check(rules);
  } catch (const std::invalid_argument& e) {
    throw CorruptProfile(std::string("malformed rules: ") + e.what());
  }
  return rules;
}

namespace {

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("cannot read " + path.string());
  return ss.str();
}

}  // namespace

ProfileRules read_rules(const std::filesystem::path& path) { return parse_rules(slurp(path)); }

std::string derive_state(std::uint64_t count, const CompetencySpec& spec) {
  std::string state;
  for (const auto& [threshold, s] : spec.schedule) {
    if (count >= threshold) state = s;
  }
  return state;
}

Profile update(const Profile& profile, const std::vector<TriggerEvent>& events, const ProfileRules& rules) {
  Profile out = profile;
  for (const auto& ev : events) {
    for (const auto& rule : rules.rules) {
      if (rule.trigger != ev.name) continue;
      const CompetencySpec* spec = rules.find(rule.competency);
      if (!spec) throw UnknownCompetency("unknown competency '" + rule.competency + "'");
      auto& rec = out.competencies[rule.competency];
      const bool first = rec.count == 0;
      ++rec.count;
      rec.last_seen = first ? ev.timestamp : std::max(rec.last_seen, ev.timestamp);
      rec.derived_state = derive_state(rec.count, *spec);
    }
  }
  return out;
}

void rederive(Profile& profile, const ProfileRules& rules) {
  for (auto& [name, rec] : profile.competencies) {
    if (const auto* spec = rules.find(name)) rec.derived_state = derive_state(rec.count, *spec);
  }
}

ProfileEvidence as_evidence(const Profile& profile, const ProfileRules& rules, const bn::Network& network) {
  ProfileEvidence out;
  const std::string level = profile.declared_level.empty() ? rules.default_level : profile.declared_level;
  if (!rules.expertise_variable.empty() && !level.empty()) {
    const bn::Variable* var = network.find_variable(rules.expertise_variable);
    if (!var) {
      out.warnings.push_back("expertise variable '" + rules.expertise_variable + "' is not in the network");
    } else if (!var->state_index(level)) {
      out.warnings.push_back("declared level '" + level + "' is not a state of '" + var->name + "'");
    } else {
      out.evidence[var->name] = level;
    }
  }
  for (const auto& [name, rec] : profile.competencies) {
    const CompetencySpec* spec = rules.find(name);
    if (!spec || spec->variable.empty()) {
      out.warnings.push_back("competency '" + name + "' is not mapped to a variable");
      continue;
    }
    if (rec.derived_state.empty()) continue;
    const bn::Variable* var = network.find_variable(spec->variable);
    if (!var) {
      out.warnings.push_back("competency '" + name + "' maps to missing variable '" + spec->variable + "'");
    } else if (!var->state_index(rec.derived_state)) {
      out.warnings.push_back("competency '" + name + "' state '" + rec.derived_state + "' is not a state of '" +
                             var->name + "'");
    } else {
      out.evidence[var->name] = rec.derived_state;
    }
  }
  return out;
}

std::string to_json(const Profile& profile) {
  json comps = json::object();
  for (const auto& [name, rec] : profile.competencies) {
    comps[name] = {{"count", rec.count}, {"last_seen", rec.last_seen}, {"derived_state", rec.derived_state}};
  }
  const json j = {{"schema_version", profile.schema_version},
                  {"user_id", profile.user_id},
                  {"declared_level", profile.declared_level},
                  {"competencies", comps}};
  return j.dump(2) + "\n";
}

Profile profile_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw CorruptProfile(std::string("profile is not valid JSON: ") + e.what());
  }
  try {
    Profile p;
    p.schema_version = j.at("schema_version").get<int>();
    if (p.schema_version != kProfileSchemaVersion) {
      throw SchemaVersionError("unsupported profile schema_version " + std::to_string(p.schema_version));
    }
    p.user_id = j.at("user_id").get<std::string>();
    p.declared_level = j.at("declared_level").get<std::string>();
    for (const auto& [name, rec] : j.at("competencies").items()) {
      CompetencyRecord r;
      r.count = rec.at("count").get<std::uint64_t>();
      r.last_seen = rec.at("last_seen").get<std::int64_t>();
      r.derived_state = rec.at("derived_state").get<std::string>();
      p.competencies.emplace(name, std::move(r));
    }
    return p;
  } catch (const json::exception& e) {
    throw CorruptProfile(std::string("malformed profile: ") + e.what());
  }
}

void store(const Profile& profile, const std::filesystem::path& path) {
  const std::string text = to_json(profile);
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << text;
    out.flush();
    if (!out) throw IoError("cannot write " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot replace " + path.string());
  }
}

Profile load(const std::filesystem::path& path, const ProfileRules* rules) {
  Profile p = profile_from_json(slurp(path));
  if (rules) rederive(p, *rules);
  return p;
}

}  // namespace goalcast
