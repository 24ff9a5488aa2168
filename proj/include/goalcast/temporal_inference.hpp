#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "goalcast/belief_network.hpp"

namespace goalcast {

/// Unit in which observation ages, horizons and decay parameters are measured.
enum class AgeUnit { Millis, Actions };

enum class DecayShape { Step, Linear, Exponential };

std::string_view to_string(AgeUnit unit);
std::string_view to_string(DecayShape shape);
std::optional<DecayShape> parse_shape(std::string_view text);

struct DecaySpec {
  double horizon = 0.0;    ///< age up to which the immediate probability holds
  DecayShape shape = DecayShape::Step;
  double parameter = 0.0;  ///< half-life (exponential) or completion span (linear)
  AgeUnit units = AgeUnit::Actions;

  bool operator==(const DecaySpec&) const = default;
};

/// Empty string when the spec is usable, otherwise the reason it is not.
std::string check(const DecaySpec& spec);

/// Probability for an observation of the given age. Holds `p_immediate` up to
/// the horizon, then moves toward `p_stale` according to the shape.
double decayed_probability(double p_immediate, double p_stale, double age, const DecaySpec& spec);

/// Aging parameters for one binary observation variable.
///
/// For a CPT node, `immediate` and `stale` hold P(observation present) per
/// parent configuration. For a noisy-OR node they hold per-parent activations
/// and the leak is left alone. `decay` has either one entry shared by all
/// positions or one entry per position.
struct TemporalObservationSpec {
  std::string variable;
  std::vector<double> immediate;
  std::vector<double> stale;
  std::vector<DecaySpec> decay;

  const DecaySpec& decay_at(std::size_t i) const { return decay.size() == 1 ? decay.front() : decay.at(i); }
  AgeUnit units() const { return decay.front().units; }

  bool operator==(const TemporalObservationSpec&) const = default;
};

enum class FindingState {
  Seen,        ///< matched; `age` is time or actions since the latest match
  NotSeen,     ///< no match in the retained history
  Unobserved,  ///< nothing known; contributes no evidence
};

struct TemporalFinding {
  std::string variable;
  FindingState state = FindingState::Unobserved;
  double age = 0.0;
  AgeUnit units = AgeUnit::Actions;

  bool operator==(const TemporalFinding&) const = default;
};

struct InstantModel {
  bn::Network network;
  bn::Evidence evidence;
};

/// Throws InvalidNetwork when a spec does not fit its node.
void check_specs(const bn::Network& base, const std::vector<TemporalObservationSpec>& specs);

/// Single-stage model for the present moment. A seen finding rewrites its
/// node with decayed probabilities and asserts the present state; a not-seen
/// finding uses the stale probabilities and asserts the absent state.
/// Throws UnknownVariable, UnitMismatch or InvalidNetwork.
InstantModel build_instant_model(const bn::Network& base, const std::vector<TemporalObservationSpec>& specs,
                                 const std::vector<TemporalFinding>& findings);

struct NeedsEstimate {
  bn::Posterior posterior;  ///< marginals of the need variables
  double p_help = 0.0;      ///< P(assistance variable present)
};

/// Posterior over `need_variables` and the probability that help is wanted.
/// Profile evidence never overrides evidence from findings.
/// Throws MissingAssistanceVariable when the assistance variable is absent or
/// not binary, plus anything bn::infer throws.
NeedsEstimate infer_needs(const InstantModel& model, const bn::Evidence& profile_evidence,
                          const std::vector<std::string>& need_variables, const std::string& assistance_variable);

}  // namespace goalcast
