#include "goalcast/bundle.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "goalcast/error.hpp"
#include "goalcast/pattern_parser.hpp"

namespace goalcast {

using nlohmann::json;

namespace {

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string kind_of(const std::exception& e) {
  if (dynamic_cast<const SyntaxError*>(&e)) return "SyntaxError";
  if (dynamic_cast<const DuplicateName*>(&e)) return "DuplicateName";
  if (dynamic_cast<const UnknownSymbol*>(&e)) return "UnknownSymbol";
  if (dynamic_cast<const CyclicDefinition*>(&e)) return "CyclicDefinition";
  if (dynamic_cast<const UnknownVariable*>(&e)) return "UnknownVariable";
  if (dynamic_cast<const InvalidNetwork*>(&e)) return "InvalidNetwork";
  if (dynamic_cast<const ModelFormatError*>(&e)) return "ModelFormatError";
  if (dynamic_cast<const TermModelError*>(&e)) return "TermModelError";
  if (dynamic_cast<const UnknownCompetency*>(&e)) return "UnknownCompetency";
  if (dynamic_cast<const CorruptProfile*>(&e)) return "CorruptProfile";
  if (dynamic_cast<const IoError*>(&e)) return "IoError";
  return "ConfigError";
}

/// Runs `fn`, turning any failure into a problem line. Returns success.
bool attempt(std::vector<std::string>& problems, const std::string& file, const std::function<void()>& fn) {
  try {
    fn();
    return true;
  } catch (const std::exception& e) {
    problems.push_back(file + ": " + kind_of(e) + ": " + e.what());
    return false;
  }
}

Millis positive_ms(const json& j, const char* key, Millis fallback) {
  if (!j.contains(key)) return fallback;
  const auto v = j.at(key).get<Millis>();
  if (v <= 0) throw std::invalid_argument(std::string(key) + " must be positive");
  return v;
}

}  // namespace

EngineConfig parse_config(const std::string& json_text) {
  EngineConfig c;
  std::vector<std::string> problems;
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("not valid JSON: ") + e.what());
  }
  auto field = [&](const char* what, const std::function<void()>& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      problems.push_back(std::string(what) + ": " + e.what());
    }
  };
  field("event_symbols", [&] {
    for (const auto& s : j.at("event_symbols")) c.event_symbols.insert(s.get<std::string>());
    if (c.event_symbols.empty()) throw std::invalid_argument("no event symbols declared");
  });
  field("need_variable", [&] { c.need_variable = j.at("need_variable").get<std::string>(); });
  field("assistance_variable", [&] { c.assistance_variable = j.at("assistance_variable").get<std::string>(); });
  field("internal_filters", [&] {
    if (j.contains("internal_filters")) {
      for (const auto& s : j.at("internal_filters")) c.internal_filters.insert(s.get<std::string>());
    }
  });
  field("policy", [&] {
    if (j.contains("policy")) c.policy = parse_policy(j.at("policy").get<std::string>());
  });
  field("assistance", [&] {
    if (!j.contains("assistance")) return;
    const auto& a = j.at("assistance");
    c.assistance.threshold = a.value("threshold", c.assistance.threshold);
    c.assistance.timeout = positive_ms(a, "timeout_ms", c.assistance.timeout);
    c.assistance.top_k = a.value("top_k", c.assistance.top_k);
    c.assistance.offline_threshold = a.value("offline_threshold", c.assistance.offline_threshold);
    if (a.contains("utility")) {
      const auto& u = a.at("utility");
      c.assistance.utility = UtilityTable{u.at("offer_yes").get<double>(), u.at("offer_no").get<double>(),
                                          u.at("quiet_yes").get<double>(), u.at("quiet_no").get<double>()};
      effective_threshold(c.assistance);
    }
    check(c.assistance);
  });
  field("fusion", [&] {
    if (!j.contains("fusion")) return;
    const auto& f = j.at("fusion");
    c.fusion.actions = f.value("actions", c.fusion.actions);
    c.fusion.words = f.value("words", c.fusion.words);
    c.words_only = f.value("words_only", false);
    if (c.fusion.actions < 0 || c.fusion.words < 0 || (c.fusion.actions == 0 && c.fusion.words == 0)) {
      throw std::invalid_argument("weights must be non-negative and not both zero");
    }
  });
  field("queue_capacity", [&] {
    c.queue_capacity = j.value("queue_capacity", c.queue_capacity);
    if (c.queue_capacity == 0) throw std::invalid_argument("must be positive");
  });
  field("clock", [&] {
    if (!j.contains("clock")) return;
    const auto& k = j.at("clock");
    c.clock.reference_rate = k.value("reference_rate", c.clock.reference_rate);
    c.clock.smoothing = k.value("smoothing", c.clock.smoothing);
    c.clock.clamp = k.value("clamp", c.clock.clamp);
    if (!(c.clock.reference_rate > 0)) throw std::invalid_argument("reference_rate must be positive");
    if (!(c.clock.smoothing > 0 && c.clock.smoothing <= 1)) throw std::invalid_argument("smoothing must lie in (0,1]");
    if (!(c.clock.clamp >= 1)) throw std::invalid_argument("clamp must be at least 1");
  });
  field("epoch_ms", [&] { c.epoch_ms = j.value("epoch_ms", std::int64_t{0}); });
  for (const auto& [key, value] : j.items()) {
    static const std::set<std::string> known{"event_symbols", "need_variable", "assistance_variable",
                                             "internal_filters", "policy", "assistance", "fusion",
                                             "queue_capacity", "clock", "epoch_ms"};
    if (!known.contains(key)) problems.push_back("unknown key '" + key + "'");
  }
  if (!problems.empty()) {
    std::string all;
    for (const auto& p : problems) all += (all.empty() ? "" : "; ") + p;
    throw std::invalid_argument(all);
  }
  return c;
}

std::vector<std::string> cross_check(const ModelBundle& b) {
  std::vector<std::string> problems;
  auto problem = [&](const std::string& what) { problems.push_back("CrossReferenceError: " + what); };
  const auto& net = b.model.network;
  const auto& cfg = b.config;

  const bn::Variable* need = net.find_variable(cfg.need_variable);
  if (!need) {
    problem("need variable '" + cfg.need_variable + "' is not in the network");
  } else {
    std::set<std::string> states(need->states.begin(), need->states.end());
    for (const auto& g : b.terms.goals) {
      if (!states.contains(g)) problem("term model goal '" + g + "' is not a state of '" + need->name + "'");
    }
    const std::set<std::string> goals(b.terms.goals.begin(), b.terms.goals.end());
    for (const auto& s : need->states) {
      if (!goals.contains(s)) problem("need state '" + s + "' has no goal in the term model");
    }
  }
  const bn::Variable* assist = net.find_variable(cfg.assistance_variable);
  if (!assist || assist->cardinality() != 2) {
    problem("assistance variable '" + cfg.assistance_variable + "' must be a binary network variable");
  }

  for (const auto& f : b.program.filters()) {
    const bool internal = cfg.internal_filters.contains(f.name);
    const bn::Variable* v = net.find_variable(f.name);
    if (!internal && !v) problem("filter '" + f.name + "' has no observation variable and is not internal");
    if (v && v->cardinality() != 2) problem("observation variable '" + f.name + "' must be binary");
  }
  for (const auto& name : cfg.internal_filters) {
    if (!b.program.has_filter(name)) problem("internal filter '" + name + "' is not defined");
  }
  for (const auto& s : b.model.temporal) {
    if (!b.program.has_filter(s.variable)) problem("temporal observation '" + s.variable + "' has no filter");
  }

  auto known_name = [&](const std::string& n) {
    if (b.program.has_filter(n) || cfg.event_symbols.contains(n)) return true;
    return std::any_of(b.program.classes().begin(), b.program.classes().end(),
                       [&](const EventClass& c) { return c.name == n; });
  };
  const std::set<std::string>* triggers = nullptr;
  if (const auto* p = std::get_if<EventDriven>(&cfg.policy)) triggers = &p->triggers;
  if (const auto* p = std::get_if<AugmentedPulsed>(&cfg.policy)) triggers = &p->triggers;
  if (triggers) {
    for (const auto& t : *triggers) {
      if (!known_name(t)) problem("policy trigger '" + t + "' is not an event, class or filter");
    }
  }

  if (!b.rules.expertise_variable.empty()) {
    const bn::Variable* e = net.find_variable(b.rules.expertise_variable);
    if (!e) {
      problem("expertise variable '" + b.rules.expertise_variable + "' is not in the network");
    } else if (!b.rules.default_level.empty() && !e->state_index(b.rules.default_level)) {
      problem("default level '" + b.rules.default_level + "' is not a state of '" + e->name + "'");
    }
  }
  for (const auto& c : b.rules.competencies) {
    if (c.variable.empty()) continue;
    const bn::Variable* v = net.find_variable(c.variable);
    if (!v) {
      problem("competency '" + c.name + "' maps to missing variable '" + c.variable + "'");
      continue;
    }
    for (const auto& [count, state] : c.schedule) {
      if (!v->state_index(state)) problem("schedule state '" + state + "' is not a state of '" + v->name + "'");
    }
  }
  for (const auto& r : b.rules.rules) {
    if (!b.program.has_filter(r.trigger)) problem("indicator trigger '" + r.trigger + "' is not a filter");
    if (r.topic && need && !need->state_index(*r.topic)) {
      problem("indicator topic '" + *r.topic + "' is not a state of '" + need->name + "'");
    }
  }
  return problems;
}

ModelBundle load_bundle(const std::filesystem::path& directory) {
  ModelBundle b;
  b.directory = directory;
  std::vector<std::string> problems;
  if (!std::filesystem::is_directory(directory)) throw BundleError({"not a directory: " + directory.string()});
  for (const char* f : {kNetworkFile, kPatternFile, kTermsFile, kRulesFile, kConfigFile}) {
    if (!std::filesystem::is_regular_file(directory / f)) problems.push_back(std::string(f) + ": missing file");
  }
  if (!problems.empty()) throw BundleError(problems);

  const bool config_ok = attempt(problems, kConfigFile, [&] { b.config = parse_config(slurp(directory / kConfigFile)); });
  bool network_ok = attempt(problems, kNetworkFile, [&] { b.model = read_model(directory / kNetworkFile); });
  if (network_ok) {
    const auto issues = bn::validate(b.model.network);
    for (const auto& i : issues) {
      problems.push_back(std::string(kNetworkFile) + ": " + std::string(bn::to_string(i.kind)) + ": " + i.message);
    }
    network_ok = issues.empty() &&
                 attempt(problems, kNetworkFile, [&] { check_specs(b.model.network, b.model.temporal); });
  }

  bool patterns_ok = attempt(problems, kPatternFile, [&] { b.definitions = pattern::parse(slurp(directory / kPatternFile)); });
  if (patterns_ok && config_ok) {
    patterns_ok = attempt(problems, kPatternFile, [&] { b.program = pattern::compile(b.definitions, b.config.event_symbols); });
  }
  const bool terms_ok = attempt(problems, kTermsFile, [&] { b.terms = read_terms(directory / kTermsFile); });
  const bool rules_ok = attempt(problems, kRulesFile, [&] { b.rules = read_rules(directory / kRulesFile); });

  if (config_ok && network_ok && patterns_ok && terms_ok && rules_ok) {
    auto more = cross_check(b);
    problems.insert(problems.end(), more.begin(), more.end());
    if (more.empty()) {
      // Align the term model with the need variable's state order.
      const auto& states = b.model.network.variable(b.config.need_variable).states;
      TermModel aligned;
      aligned.goals = states;
      std::vector<std::size_t> from;
      for (const auto& s : states) {
        from.push_back(static_cast<std::size_t>(std::find(b.terms.goals.begin(), b.terms.goals.end(), s) - b.terms.goals.begin()));
      }
      for (auto i : from) aligned.priors.push_back(b.terms.priors[i]);
      for (const auto& [term, lik] : b.terms.likelihood) {
        std::vector<double> v;
        for (auto i : from) v.push_back(lik[i]);
        aligned.likelihood.emplace(term, std::move(v));
      }
      b.terms = std::move(aligned);
    }
  }
  if (!problems.empty()) throw BundleError(problems);
  return b;
}

}  // namespace goalcast
