#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "goalcast/distribution.hpp"

namespace goalcast::bn {

enum class VariableKind { Goal, Need, Profile, Observation, Other };

std::string_view to_string(VariableKind kind);
std::optional<VariableKind> parse_kind(std::string_view text);

struct Variable {
  std::string name;
  std::vector<std::string> states;
  VariableKind kind = VariableKind::Other;

  std::optional<std::size_t> state_index(std::string_view state) const;
  std::size_t cardinality() const noexcept { return states.size(); }

  bool operator==(const Variable&) const = default;
};

/// Conditional probability table. Rows enumerate parent configurations in
/// lexicographic order of parent state indices, first parent most significant;
/// each row is a distribution over the variable's states.
struct CptNode {
  std::string variable;
  std::vector<std::string> parents;
  std::vector<std::vector<double>> rows;

  bool operator==(const CptNode&) const = default;
};

/// Leaky noisy-OR over binary causes. For binary variables state 0 is "absent"
/// and state 1 is "present"; that holds for the node and each parent.
struct NoisyOrNode {
  std::string variable;
  std::vector<std::string> parents;
  std::vector<double> activation;  ///< P(effect | only parent i present), per parent
  double leak = 0.0;               ///< P(effect | no parent present)

  bool operator==(const NoisyOrNode&) const = default;
};

using Node = std::variant<CptNode, NoisyOrNode>;

const std::string& node_variable(const Node& node);
const std::vector<std::string>& node_parents(const Node& node);

/// Discrete Bayesian network: declared variables plus one node (CPT or
/// noisy-OR) per variable. Declaration order is preserved for printing.
class Network {
 public:
  /// Throws InvalidNetwork on a duplicate name.
  void add_variable(Variable variable);
  /// Adds or replaces the node for `node`'s variable.
  void set_node(Node node);

  const Variable* find_variable(std::string_view name) const;
  /// Throws UnknownVariable.
  const Variable& variable(std::string_view name) const;
  const Node* find_node(std::string_view name) const;

  const std::vector<Variable>& variables() const noexcept { return variables_; }
  const std::vector<Node>& nodes() const noexcept { return nodes_; }

  bool operator==(const Network& other) const {
    return variables_ == other.variables_ && nodes_ == other.nodes_;
  }

 private:
  std::vector<Variable> variables_;
  std::unordered_map<std::string, std::size_t> variable_index_;
  std::vector<Node> nodes_;
  std::unordered_map<std::string, std::size_t> node_index_;
};

enum class IssueKind {
  Cycle,
  UnresolvedReference,
  MissingNode,
  Normalization,
  Arity,
  Range,
  BadVariable,
};

std::string_view to_string(IssueKind kind);

struct ValidationIssue {
  IssueKind kind;
  std::string node;
  std::optional<std::size_t> row;
  std::string message;
};

/// Structural and numeric checks. Never throws; an empty list means valid.
std::vector<ValidationIssue> validate(const Network& network);

/// Equivalent table: P(present | x) = 1 - (1 - leak) * prod_{i: x_i present} (1 - p_i).
CptNode expand_noisy_or(const NoisyOrNode& node);

/// variable -> asserted state label
using Evidence = std::map<std::string, std::string>;

struct Posterior {
  std::map<std::string, Distribution> marginals;

  /// Throws UnknownVariable.
  const Distribution& at(const std::string& variable) const;
};

/// Exact posterior marginals by variable elimination (min-fill order), after
/// pruning nodes that are neither queried, observed, nor ancestors of either.
/// Throws InvalidNetwork, UnknownVariable, or InconsistentEvidence when the
/// evidence has probability zero.
Posterior infer(const Network& network, const Evidence& evidence, const std::vector<std::string>& query);

/// Top-k states of one posterior marginal, descending; ties keep state order.
RankedStates most_probable(const Posterior& posterior, const std::string& variable, std::size_t k);

}  // namespace goalcast::bn
