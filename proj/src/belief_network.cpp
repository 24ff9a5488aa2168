#include "goalcast/belief_network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

#include "goalcast/error.hpp"

namespace goalcast::bn {

namespace {

constexpr double kRowTolerance = 1e-9;

/// Dense table over variables sorted by id; the last variable varies fastest.
struct Factor {
  std::vector<std::size_t> vars;
  std::vector<std::size_t> card;
  std::vector<double> values;

  std::vector<std::size_t> strides() const {
    std::vector<std::size_t> s(vars.size(), 1);
    for (std::size_t i = vars.size(); i-- > 1;) s[i - 1] = s[i] * card[i];
    return s;
  }
};

/// Stride of each of `out_vars` inside `f` (0 where `f` lacks the variable).
std::vector<std::size_t> strides_in(const Factor& f, const std::vector<std::size_t>& out_vars) {
  const auto fs = f.strides();
  std::vector<std::size_t> s(out_vars.size(), 0);
  for (std::size_t i = 0; i < out_vars.size(); ++i) {
    const auto it = std::lower_bound(f.vars.begin(), f.vars.end(), out_vars[i]);
    if (it != f.vars.end() && *it == out_vars[i]) s[i] = fs[static_cast<std::size_t>(it - f.vars.begin())];
  }
  return s;
}

Factor multiply(const Factor& a, const Factor& b) {
  Factor out;
  std::set_union(a.vars.begin(), a.vars.end(), b.vars.begin(), b.vars.end(), std::back_inserter(out.vars));
  std::size_t size = 1;
  for (auto v : out.vars) {
    const auto ia = std::lower_bound(a.vars.begin(), a.vars.end(), v);
    const std::size_t c = (ia != a.vars.end() && *ia == v)
                              ? a.card[static_cast<std::size_t>(ia - a.vars.begin())]
                              : b.card[static_cast<std::size_t>(std::lower_bound(b.vars.begin(), b.vars.end(), v) - b.vars.begin())];
    out.card.push_back(c);
    size *= c;
  }
  out.values.resize(size);
  const auto sa = strides_in(a, out.vars);
  const auto sb = strides_in(b, out.vars);
  std::vector<std::size_t> assign(out.vars.size(), 0);
  std::size_t ia = 0;
  std::size_t ib = 0;
  for (std::size_t idx = 0; idx < size; ++idx) {
    out.values[idx] = a.values[ia] * b.values[ib];
    for (std::size_t p = out.vars.size(); p-- > 0;) {
      if (++assign[p] < out.card[p]) {
        ia += sa[p];
        ib += sb[p];
        break;
      }
      ia -= sa[p] * (out.card[p] - 1);
      ib -= sb[p] * (out.card[p] - 1);
      assign[p] = 0;
    }
  }
  return out;
}

/// Sums out `var`, or keeps only `keep_state` of it when one is given.
Factor drop(const Factor& f, std::size_t var, std::optional<std::size_t> keep_state) {
  const auto pos = static_cast<std::size_t>(std::find(f.vars.begin(), f.vars.end(), var) - f.vars.begin());
  Factor out;
  for (std::size_t i = 0; i < f.vars.size(); ++i) {
    if (i == pos) continue;
    out.vars.push_back(f.vars[i]);
    out.card.push_back(f.card[i]);
  }
  std::size_t size = 1;
  for (auto c : out.card) size *= c;
  out.values.assign(size, 0.0);
  const auto so = strides_in(out, f.vars);
  std::vector<std::size_t> assign(f.vars.size(), 0);
  std::size_t io = 0;
  for (std::size_t idx = 0; idx < f.values.size(); ++idx) {
    if (!keep_state || assign[pos] == *keep_state) out.values[io] += f.values[idx];
    for (std::size_t p = f.vars.size(); p-- > 0;) {
      if (++assign[p] < f.card[p]) {
        io += so[p];
        break;
      }
      io -= so[p] * (f.card[p] - 1);
      assign[p] = 0;
    }
  }
  return out;
}

/// Builds a factor from values laid out in `order` (last fastest).
Factor make_factor(const std::vector<std::size_t>& order, const std::vector<std::size_t>& card,
                   const std::vector<double>& values) {
  Factor src{order, card, values};
  Factor out;
  std::vector<std::size_t> perm(order.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) { return order[a] < order[b]; });
  for (auto p : perm) {
    out.vars.push_back(order[p]);
    out.card.push_back(card[p]);
  }
  out.values.resize(values.size());
  const auto so = strides_in(out, order);
  std::vector<std::size_t> assign(order.size(), 0);
  std::size_t io = 0;
  for (std::size_t idx = 0; idx < values.size(); ++idx) {
    out.values[io] = values[idx];
    for (std::size_t p = order.size(); p-- > 0;) {
      if (++assign[p] < card[p]) {
        io += so[p];
        break;
      }
      io -= so[p] * (card[p] - 1);
      assign[p] = 0;
    }
  }
  return out;
}

Factor eliminate_all(std::vector<Factor> factors, std::set<std::size_t> elim) {
  while (!elim.empty()) {
    // Min-fill: fewest new edges; then smallest clique table; then lowest id.
    std::size_t best = *elim.begin();
    std::size_t best_fill = std::numeric_limits<std::size_t>::max();
    double best_weight = std::numeric_limits<double>::infinity();
    for (auto v : elim) {
      std::set<std::size_t> nbrs;
      std::map<std::size_t, std::size_t> cards;
      std::vector<const Factor*> touching;
      for (const auto& f : factors) {
        if (!std::binary_search(f.vars.begin(), f.vars.end(), v)) continue;
        touching.push_back(&f);
        for (std::size_t i = 0; i < f.vars.size(); ++i) {
          if (f.vars[i] != v) {
            nbrs.insert(f.vars[i]);
            cards[f.vars[i]] = f.card[i];
          }
        }
      }
      std::size_t fill = 0;
      for (auto x = nbrs.begin(); x != nbrs.end(); ++x) {
        for (auto y = std::next(x); y != nbrs.end(); ++y) {
          const bool linked = std::any_of(factors.begin(), factors.end(), [&](const Factor& f) {
            return std::binary_search(f.vars.begin(), f.vars.end(), *x) &&
                   std::binary_search(f.vars.begin(), f.vars.end(), *y);
          });
          if (!linked) ++fill;
        }
      }
      double weight = 1.0;
      for (const auto& [id, c] : cards) weight *= static_cast<double>(c);
      if (fill < best_fill || (fill == best_fill && weight < best_weight)) {
        best = v;
        best_fill = fill;
        best_weight = weight;
      }
    }
    elim.erase(best);

    std::vector<Factor> rest;
    std::optional<Factor> product;
    for (auto& f : factors) {
      if (std::binary_search(f.vars.begin(), f.vars.end(), best)) {
        product = product ? multiply(*product, f) : std::move(f);
      } else {
        rest.push_back(std::move(f));
      }
    }
    if (product) rest.push_back(drop(*product, best, std::nullopt));
    factors = std::move(rest);
  }
  Factor result{{}, {}, {1.0}};
  for (const auto& f : factors) result = multiply(result, f);
  return result;
}

std::size_t row_count(const Network& net, const std::vector<std::string>& parents) {
  std::size_t rows = 1;
  for (const auto& p : parents) {
    if (const auto* v = net.find_variable(p)) rows *= v->cardinality();
  }
  return rows;
}

}  // namespace

std::string_view to_string(VariableKind kind) {
  switch (kind) {
    case VariableKind::Goal: return "goal";
    case VariableKind::Need: return "need";
    case VariableKind::Profile: return "profile";
    case VariableKind::Observation: return "observation";
    case VariableKind::Other: return "other";
  }
  return "other";
}

std::optional<VariableKind> parse_kind(std::string_view text) {
  for (auto k : {VariableKind::Goal, VariableKind::Need, VariableKind::Profile, VariableKind::Observation,
                 VariableKind::Other}) {
    if (to_string(k) == text) return k;
  }
  return std::nullopt;
}

std::string_view to_string(IssueKind kind) {
  switch (kind) {
    case IssueKind::Cycle: return "CycleError";
    case IssueKind::UnresolvedReference: return "UnresolvedReference";
    case IssueKind::MissingNode: return "MissingNode";
    case IssueKind::Normalization: return "NormalizationError";
    case IssueKind::Arity: return "ArityError";
    case IssueKind::Range: return "RangeError";
    case IssueKind::BadVariable: return "BadVariable";
  }
  return "Unknown";
}

std::optional<std::size_t> Variable::state_index(std::string_view state) const {
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (states[i] == state) return i;
  }
  return std::nullopt;
}

const std::string& node_variable(const Node& node) {
  return std::visit([](const auto& n) -> const std::string& { return n.variable; }, node);
}

const std::vector<std::string>& node_parents(const Node& node) {
  return std::visit([](const auto& n) -> const std::vector<std::string>& { return n.parents; }, node);
}

void Network::add_variable(Variable variable) {
  if (variable_index_.contains(variable.name)) {
    throw InvalidNetwork("variable '" + variable.name + "' declared twice");
  }
  variable_index_.emplace(variable.name, variables_.size());
  variables_.push_back(std::move(variable));
}

void Network::set_node(Node node) {
  const std::string name = node_variable(node);
  if (auto it = node_index_.find(name); it != node_index_.end()) {
    nodes_[it->second] = std::move(node);
    return;
  }
  node_index_.emplace(name, nodes_.size());
  nodes_.push_back(std::move(node));
}

const Variable* Network::find_variable(std::string_view name) const {
  const auto it = variable_index_.find(std::string(name));
  return it == variable_index_.end() ? nullptr : &variables_[it->second];
}

const Variable& Network::variable(std::string_view name) const {
  if (const auto* v = find_variable(name)) return *v;
  throw UnknownVariable("unknown variable '" + std::string(name) + "'");
}

const Node* Network::find_node(std::string_view name) const {
  const auto it = node_index_.find(std::string(name));
  return it == node_index_.end() ? nullptr : &nodes_[it->second];
}

std::vector<ValidationIssue> validate(const Network& net) {
  std::vector<ValidationIssue> issues;
  auto report = [&](IssueKind kind, const std::string& node, std::optional<std::size_t> row, std::string msg) {
    issues.push_back({kind, node, row, std::move(msg)});
  };

  for (const auto& v : net.variables()) {
    if (v.states.size() < 2) report(IssueKind::BadVariable, v.name, {}, "variable '" + v.name + "' needs at least two states");
    std::set<std::string> seen;
    for (const auto& s : v.states) {
      if (!seen.insert(s).second) report(IssueKind::BadVariable, v.name, {}, "variable '" + v.name + "' repeats state '" + s + "'");
    }
    if (!net.find_node(v.name)) report(IssueKind::MissingNode, v.name, {}, "variable '" + v.name + "' has no node");
  }

  for (const auto& node : net.nodes()) {
    const auto& name = node_variable(node);
    const auto& parents = node_parents(node);
    const Variable* var = net.find_variable(name);
    if (!var) {
      report(IssueKind::UnresolvedReference, name, {}, "node '" + name + "' has no declared variable");
      continue;
    }
    bool parents_ok = true;
    std::set<std::string> seen;
    for (const auto& p : parents) {
      if (p == name) {
        report(IssueKind::Cycle, name, {}, "node '" + name + "' lists itself as a parent");
        parents_ok = false;
      } else if (!net.find_variable(p)) {
        report(IssueKind::UnresolvedReference, name, {}, "node '" + name + "' has unknown parent '" + p + "'");
        parents_ok = false;
      }
      if (!seen.insert(p).second) {
        report(IssueKind::Arity, name, {}, "node '" + name + "' repeats parent '" + p + "'");
        parents_ok = false;
      }
    }
    if (!parents_ok) continue;

    if (const auto* cpt = std::get_if<CptNode>(&node)) {
      const std::size_t expected = row_count(net, parents);
      if (cpt->rows.size() != expected) {
        report(IssueKind::Arity, name, {},
               "node '" + name + "' has " + std::to_string(cpt->rows.size()) + " rows, expected " + std::to_string(expected));
        continue;
      }
      for (std::size_t r = 0; r < cpt->rows.size(); ++r) {
        const auto& row = cpt->rows[r];
        if (row.size() != var->cardinality()) {
          report(IssueKind::Arity, name, r,
                 "node '" + name + "' row " + std::to_string(r) + " has " + std::to_string(row.size()) + " entries, expected " +
                     std::to_string(var->cardinality()));
          continue;
        }
        double sum = 0.0;
        bool in_range = true;
        for (double p : row) {
          if (!std::isfinite(p) || p < 0.0 || p > 1.0) in_range = false;
          sum += p;
        }
        if (!in_range) {
          report(IssueKind::Range, name, r, "node '" + name + "' row " + std::to_string(r) + " has an entry outside [0,1]");
        } else if (std::abs(sum - 1.0) > kRowTolerance) {
          report(IssueKind::Normalization, name, r,
                 "node '" + name + "' row " + std::to_string(r) + " sums to " + std::to_string(sum));
        }
      }
    } else {
      const auto& nor = std::get<NoisyOrNode>(node);
      if (var->cardinality() != 2) report(IssueKind::Arity, name, {}, "noisy-or node '" + name + "' must be binary");
      for (const auto& p : parents) {
        if (net.variable(p).cardinality() != 2) {
          report(IssueKind::Arity, name, {}, "noisy-or node '" + name + "' has non-binary parent '" + p + "'");
        }
      }
      if (nor.activation.size() != parents.size()) {
        report(IssueKind::Arity, name, {}, "noisy-or node '" + name + "' needs one activation per parent");
      }
      for (double p : nor.activation) {
        if (!std::isfinite(p) || p < 0.0 || p > 1.0) {
          report(IssueKind::Range, name, {}, "noisy-or node '" + name + "' has activation outside [0,1]");
          break;
        }
      }
      if (!std::isfinite(nor.leak) || nor.leak < 0.0 || nor.leak >= 1.0) {
        report(IssueKind::Range, name, {}, "noisy-or node '" + name + "' has leak outside [0,1)");
      }
    }
  }

  // Cycles through resolvable parents.
  enum class Mark { None, Active, Done };
  std::map<std::string, Mark> mark;
  std::set<std::string> reported;
  auto visit = [&](auto&& self, const std::string& name) -> void {
    auto& m = mark[name];
    if (m == Mark::Done) return;
    if (m == Mark::Active) {
      if (reported.insert(name).second) report(IssueKind::Cycle, name, {}, "cycle through '" + name + "'");
      return;
    }
    m = Mark::Active;
    if (const Node* n = net.find_node(name)) {
      for (const auto& p : node_parents(*n)) {
        if (p != name && net.find_variable(p)) self(self, p);
      }
    }
    mark[name] = Mark::Done;
  };
  for (const auto& node : net.nodes()) visit(visit, node_variable(node));
  return issues;
}

CptNode expand_noisy_or(const NoisyOrNode& node) {
  const std::size_t n = node.parents.size();
  const std::size_t rows = std::size_t{1} << n;
  CptNode out{node.variable, node.parents, {}};
  out.rows.reserve(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double off = 1.0 - node.leak;
    for (std::size_t i = 0; i < n; ++i) {
      // First parent is the most significant digit.
      const bool present = (r >> (n - 1 - i)) & 1U;
      if (present) off *= 1.0 - node.activation[i];
    }
    out.rows.push_back({off, 1.0 - off});
  }
  return out;
}

const Distribution& Posterior::at(const std::string& variable) const {
  const auto it = marginals.find(variable);
  if (it == marginals.end()) throw UnknownVariable("no posterior for '" + variable + "'");
  return it->second;
}

Posterior infer(const Network& net, const Evidence& evidence, const std::vector<std::string>& query) {
  if (const auto issues = validate(net); !issues.empty()) {
    throw InvalidNetwork("invalid network: " + issues.front().message);
  }
  const auto& vars = net.variables();
  std::map<std::string, std::size_t> id;
  for (std::size_t i = 0; i < vars.size(); ++i) id.emplace(vars[i].name, i);

  std::map<std::size_t, std::size_t> observed;
  for (const auto& [name, state] : evidence) {
    const Variable& v = net.variable(name);
    const auto s = v.state_index(state);
    if (!s) throw UnknownVariable("variable '" + name + "' has no state '" + state + "'");
    observed.emplace(id.at(name), *s);
  }
  std::vector<std::size_t> query_ids;
  for (const auto& q : query) {
    net.variable(q);
    query_ids.push_back(id.at(q));
  }

  std::vector<std::vector<std::size_t>> parents(vars.size());
  std::vector<Factor> factors(vars.size());
  for (const auto& node : net.nodes()) {
    const std::size_t v = id.at(node_variable(node));
    const CptNode cpt = std::holds_alternative<CptNode>(node) ? std::get<CptNode>(node)
                                                               : expand_noisy_or(std::get<NoisyOrNode>(node));
    std::vector<std::size_t> order;
    std::vector<std::size_t> card;
    for (const auto& p : cpt.parents) {
      order.push_back(id.at(p));
      card.push_back(vars[id.at(p)].cardinality());
    }
    parents[v] = order;
    order.push_back(v);
    card.push_back(vars[v].cardinality());
    std::vector<double> flat;
    flat.reserve(cpt.rows.size() * vars[v].cardinality());
    for (const auto& row : cpt.rows) flat.insert(flat.end(), row.begin(), row.end());
    Factor f = make_factor(order, card, flat);
    for (const auto& [ev, state] : observed) {
      if (std::binary_search(f.vars.begin(), f.vars.end(), ev)) f = drop(f, ev, state);
    }
    factors[v] = std::move(f);
  }

  auto relevant_for = [&](std::optional<std::size_t> target) {
    std::vector<char> keep(vars.size(), 0);
    std::vector<std::size_t> stack;
    if (target) stack.push_back(*target);
    for (const auto& [ev, state] : observed) stack.push_back(ev);
    while (!stack.empty()) {
      const auto v = stack.back();
      stack.pop_back();
      if (keep[v]) continue;
      keep[v] = 1;
      for (auto p : parents[v]) stack.push_back(p);
    }
    return keep;
  };

  auto run = [&](std::optional<std::size_t> target) {
    const auto keep = relevant_for(target);
    std::vector<Factor> active;
    std::set<std::size_t> elim;
    for (std::size_t v = 0; v < vars.size(); ++v) {
      if (!keep[v]) continue;
      active.push_back(factors[v]);
      if (!observed.contains(v) && v != target) elim.insert(v);
    }
    return eliminate_all(std::move(active), std::move(elim));
  };

  auto inconsistent = [&] {
    std::string what = "evidence has zero probability:";
    for (const auto& [name, state] : evidence) what += " " + name + "=" + state;
    return InconsistentEvidence(what);
  };

  Posterior post;
  if (query_ids.empty() && !observed.empty()) {
    if (run(std::nullopt).values.front() <= 0.0) throw inconsistent();
  }
  for (std::size_t qi = 0; qi < query_ids.size(); ++qi) {
    const std::size_t q = query_ids[qi];
    const Variable& var = vars[q];
    Distribution d{var.states, std::vector<double>(var.cardinality(), 0.0)};
    if (auto it = observed.find(q); it != observed.end()) {
      if (run(std::nullopt).values.front() <= 0.0) throw inconsistent();
      d.probabilities[it->second] = 1.0;
    } else {
      const Factor f = run(q);
      const double z = std::accumulate(f.values.begin(), f.values.end(), 0.0);
      if (!(z > 0.0)) throw inconsistent();
      for (std::size_t s = 0; s < f.values.size(); ++s) d.probabilities[s] = f.values[s] / z;
    }
    post.marginals.insert_or_assign(query[qi], std::move(d));
  }
  return post;
}

RankedStates most_probable(const Posterior& posterior, const std::string& variable, std::size_t k) {
  return top_k(posterior.at(variable), k);
}

}  // namespace goalcast::bn
