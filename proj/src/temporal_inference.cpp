#include "goalcast/temporal_inference.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "goalcast/error.hpp"

namespace goalcast {

std::string_view to_string(AgeUnit unit) { return unit == AgeUnit::Millis ? "ms" : "actions"; }

std::string_view to_string(DecayShape shape) {
  switch (shape) {
    case DecayShape::Step: return "step";
    case DecayShape::Linear: return "linear";
    case DecayShape::Exponential: return "exponential";
  }
  return "step";
}

std::optional<DecayShape> parse_shape(std::string_view text) {
  for (auto s : {DecayShape::Step, DecayShape::Linear, DecayShape::Exponential}) {
    if (to_string(s) == text) return s;
  }
  return std::nullopt;
}

std::string check(const DecaySpec& spec) {
  if (!(spec.horizon >= 0.0)) return "horizon must be non-negative";
  if (spec.shape == DecayShape::Exponential && !(spec.parameter > 0.0)) return "half-life must be positive";
  if (spec.shape == DecayShape::Linear && !(spec.parameter > 0.0)) return "linear span must be positive";
  return {};
}

double decayed_probability(double p_immediate, double p_stale, double age, const DecaySpec& spec) {
  if (age <= spec.horizon) return p_immediate;
  const double a = age - spec.horizon;
  double p = p_stale;
  switch (spec.shape) {
    case DecayShape::Step:
      break;
    case DecayShape::Linear:
      if (a < spec.parameter) p = p_immediate + (p_stale - p_immediate) * (a / spec.parameter);
      break;
    case DecayShape::Exponential:
      p = p_stale + (p_immediate - p_stale) * std::exp2(-a / spec.parameter);
      break;
  }
  return std::clamp(p, std::min(p_immediate, p_stale), std::max(p_immediate, p_stale));
}

namespace {

std::size_t positions(const bn::Network& base, const bn::Node& node) {
  if (std::holds_alternative<bn::NoisyOrNode>(node)) return bn::node_parents(node).size();
  std::size_t rows = 1;
  for (const auto& p : bn::node_parents(node)) rows *= base.variable(p).cardinality();
  return rows;
}

bool in_unit_interval(double p) { return std::isfinite(p) && p >= 0.0 && p <= 1.0; }

}  // namespace

void check_specs(const bn::Network& base, const std::vector<TemporalObservationSpec>& specs) {
  std::map<std::string, int> seen;
  for (const auto& spec : specs) {
    const auto fail = [&](const std::string& why) {
      throw InvalidNetwork("temporal spec for '" + spec.variable + "': " + why);
    };
    if (seen[spec.variable]++) fail("declared twice");
    const bn::Variable& var = base.variable(spec.variable);
    const bn::Node* node = base.find_node(spec.variable);
    if (!node) fail("variable has no node");
    if (var.cardinality() != 2) fail("observation must be binary");
    const std::size_t n = positions(base, *node);
    if (spec.immediate.size() != n || spec.stale.size() != n) {
      fail("expected " + std::to_string(n) + " immediate and stale values");
    }
    if (!std::all_of(spec.immediate.begin(), spec.immediate.end(), in_unit_interval) ||
        !std::all_of(spec.stale.begin(), spec.stale.end(), in_unit_interval)) {
      fail("probabilities must lie in [0,1]");
    }
    if (spec.decay.empty() || (spec.decay.size() != 1 && spec.decay.size() != n)) {
      fail("expected one decay spec or one per position");
    }
    for (const auto& d : spec.decay) {
      if (auto why = check(d); !why.empty()) fail(why);
      if (d.units != spec.decay.front().units) fail("decay specs mix units");
    }
  }
}

InstantModel build_instant_model(const bn::Network& base, const std::vector<TemporalObservationSpec>& specs,
                                 const std::vector<TemporalFinding>& findings) {
  check_specs(base, specs);
  std::map<std::string, const TemporalObservationSpec*> by_name;
  for (const auto& s : specs) by_name.emplace(s.variable, &s);

  InstantModel model{base, {}};
  for (const auto& finding : findings) {
    const auto it = by_name.find(finding.variable);
    if (it == by_name.end()) throw UnknownVariable("no temporal spec for '" + finding.variable + "'");
    const TemporalObservationSpec& spec = *it->second;
    if (finding.state == FindingState::Unobserved) continue;
    if (finding.units != spec.units()) {
      throw UnitMismatch("finding for '" + finding.variable + "' is measured in " + std::string(to_string(finding.units)) +
                         " but its spec uses " + std::string(to_string(spec.units())));
    }
    if (!(finding.age >= 0.0)) throw UnitMismatch("finding for '" + finding.variable + "' has a negative age");

    const bool seen = finding.state == FindingState::Seen;
    std::vector<double> p(spec.immediate.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
      p[i] = seen ? decayed_probability(spec.immediate[i], spec.stale[i], finding.age, spec.decay_at(i)) : spec.stale[i];
    }
    const bn::Node& node = *base.find_node(spec.variable);
    if (const auto* nor = std::get_if<bn::NoisyOrNode>(&node)) {
      bn::NoisyOrNode aged = *nor;
      aged.activation = std::move(p);
      model.network.set_node(std::move(aged));
    } else {
      bn::CptNode aged = std::get<bn::CptNode>(node);
      for (std::size_t r = 0; r < p.size(); ++r) {
        // Rewriting an unchanged row would cost a rounding step in 1 - p.
        if (aged.rows[r][1] != p[r]) aged.rows[r] = {1.0 - p[r], p[r]};
      }
      model.network.set_node(std::move(aged));
    }
    const auto& states = base.variable(spec.variable).states;
    model.evidence[spec.variable] = seen ? states[1] : states[0];
  }
  return model;
}

NeedsEstimate infer_needs(const InstantModel& model, const bn::Evidence& profile_evidence,
                          const std::vector<std::string>& need_variables, const std::string& assistance_variable) {
  const bn::Variable* assist = model.network.find_variable(assistance_variable);
  if (!assist || assist->cardinality() != 2) {
    throw MissingAssistanceVariable("model has no binary assistance variable '" + assistance_variable + "'");
  }
  bn::Evidence evidence = model.evidence;
  for (const auto& [k, v] : profile_evidence) evidence.try_emplace(k, v);

  std::vector<std::string> query = need_variables;
  if (std::find(query.begin(), query.end(), assistance_variable) == query.end()) query.push_back(assistance_variable);
  bn::Posterior full = bn::infer(model.network, evidence, query);

  NeedsEstimate out;
  out.p_help = full.at(assistance_variable).probabilities[1];
  for (const auto& v : need_variables) out.posterior.marginals.emplace(v, full.at(v));
  return out;
}

}  // namespace goalcast
