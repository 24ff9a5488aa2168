#include "goalcast/pattern_program.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <optional>

#include "goalcast/error.hpp"

namespace goalcast::pattern {

namespace detail {

struct Target {
  bool is_filter = false;
  std::size_t index = 0;  // matcher index, or filter index
};

using NodePtr = std::shared_ptr<const Node>;

struct NRate {
  Target target;
  Span span;
  Comparator comparator;
  std::int64_t count;
};
struct NOneof {
  std::vector<Target> targets;
  Span span;
};
struct NAll {
  std::vector<Target> targets;
  Span span;
};
struct NElem {
  Target target;
  std::optional<Millis> dwell;
};
struct NSeq {
  std::vector<NElem> elements;
  Span span;
  bool tight;
};
struct NDwell {
  Millis span;
};
struct NRef {
  std::size_t filter;
};
struct NAnd {
  NodePtr lhs, rhs;
};
struct NOr {
  NodePtr lhs, rhs;
};
struct NNot {
  NodePtr operand;
};

struct Node {
  std::variant<NRate, NOneof, NAll, NSeq, NDwell, NRef, NAnd, NOr, NNot> v;
};

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

struct Result {
  bool sat = false;
  Millis at = 0;
};

/// An element occurrence inside one evaluation context.
struct Occ {
  std::int64_t slot;
  Millis start;
  Millis end;
  std::int64_t start_ord;
  std::int64_t end_ord;
};

}  // namespace

class Evaluator {
 public:
  Evaluator(const FilterProgram& program, std::span<const AtomicEvent> events, Millis now, const ClockModel& clock)
      : p_(program), clock_(clock), final_now_(now) {
    const auto end = std::upper_bound(events.begin(), events.end(), now,
                                      [](Millis t, const AtomicEvent& e) { return t < e.timestamp; });
    n_ = static_cast<std::size_t>(end - events.begin());
    ts_.reserve(n_);
    matcher_positions_.resize(p_.matchers_.size());
    for (std::size_t k = 0; k < n_; ++k) {
      ts_.push_back(events[k].timestamp);
      const auto it = p_.symbol_ids_.find(events[k].symbol);
      if (it == p_.symbol_ids_.end()) continue;
      for (std::size_t mi = 0; mi < p_.matchers_.size(); ++mi) {
        if (p_.matchers_[mi].member[static_cast<std::size_t>(it->second)]) {
          matcher_positions_[mi].push_back(k);
        }
      }
    }
    current_.resize(p_.filters_.size());
    history_.resize(p_.filters_.size());
  }

  std::vector<ModeledEvent> run() {
    const auto filter_count = p_.filters_.size();
    const bool any_prefix = std::any_of(p_.needs_prefix_.begin(), p_.needs_prefix_.end(), [](char c) { return c; });
    if (any_prefix) {
      for (std::size_t i = 0; i < n_; ++i) {
        m_ = i + 1;
        now_ = ts_[i];
        for (std::size_t f = 0; f < filter_count; ++f) {
          if (!p_.needs_prefix_[f]) continue;
          current_[f] = eval_filter(f);
          if (p_.needs_history_[f] && current_[f].sat && current_[f].at == now_) {
            history_[f].push_back(i);
          }
        }
      }
    }
    m_ = n_;
    now_ = final_now_;
    std::vector<ModeledEvent> out;
    for (std::size_t f = 0; f < filter_count; ++f) {
      current_[f] = eval_filter(f);
      if (!current_[f].sat) continue;
      const Millis at = current_[f].at;
      const auto after = std::upper_bound(ts_.begin(), ts_.end(), at);
      out.push_back(ModeledEvent{p_.filters_[f].name, at, now_ - at, static_cast<std::size_t>(ts_.end() - after)});
    }
    return out;
  }

 private:
  Result eval_filter(std::size_t f) {
    scaled_ = p_.filters_[f].scaled;
    return eval(*p_.nodes_[f]);
  }

  Millis effective(Millis ms) const { return scaled_ ? scale_duration(ms, clock_) : ms; }

  Result eval(const Node& node) {
    return std::visit(overloaded{
                          [&](const NRate& r) { return eval_rate(r); },
                          [&](const NOneof& o) { return eval_oneof(o.targets, o.span, false); },
                          [&](const NAll& a) { return eval_oneof(a.targets, a.span, true); },
                          [&](const NSeq& q) { return eval_seq(q); },
                          [&](const NDwell& d) {
                            const Millis span = effective(d.span);
                            const bool quiet = m_ == 0 || ts_[m_ - 1] <= now_ - span;
                            return Result{quiet, now_};
                          },
                          [&](const NRef& r) { return current_[r.filter]; },
                          [&](const NAnd& a) {
                            const Result l = eval(*a.lhs);
                            const Result r = eval(*a.rhs);
                            if (!l.sat || !r.sat) return Result{};
                            return Result{true, std::max(l.at, r.at)};
                          },
                          [&](const NOr& o) {
                            const Result l = eval(*o.lhs);
                            const Result r = eval(*o.rhs);
                            if (l.sat && r.sat) return Result{true, std::max(l.at, r.at)};
                            return l.sat ? l : r;
                          },
                          [&](const NNot& n) {
                            const Result inner = eval(*n.operand);
                            return Result{!inner.sat, now_};
                          },
                      },
                      node.v);
  }

  const std::vector<std::size_t>& positions(const Target& t) const {
    return t.is_filter ? history_[t.index] : matcher_positions_[t.index];
  }

  /// Whether a filter target also occurs at the current `now`, past the newest event.
  bool virtual_occurrence(const Target& t) const {
    if (!t.is_filter) return false;
    if (m_ > 0 && now_ <= ts_[m_ - 1]) return false;
    const Result& r = current_[t.index];
    return r.sat && r.at == now_;
  }

  /// First queue position inside the window ending at now_.
  std::size_t window_floor(const Span& span) const {
    if (span.unit == SpanUnit::Commands) {
      return static_cast<std::size_t>(std::max<std::int64_t>(0, static_cast<std::int64_t>(m_) - span.amount));
    }
    const Millis floor = now_ - effective(span.amount);
    return static_cast<std::size_t>(std::upper_bound(ts_.begin(), ts_.begin() + static_cast<std::ptrdiff_t>(m_), floor) -
                                    ts_.begin());
  }

  Result eval_rate(const NRate& r) {
    const auto& pos = positions(r.target);
    const std::size_t lo = window_floor(r.span);
    const auto first = std::lower_bound(pos.begin(), pos.end(), lo);
    const auto last = std::lower_bound(pos.begin(), pos.end(), m_);
    std::int64_t count = last - first;
    if (virtual_occurrence(r.target)) ++count;
    bool ok = false;
    switch (r.comparator) {
      case Comparator::AtLeast: ok = count >= r.count; break;
      case Comparator::Exactly: ok = count == r.count; break;
      case Comparator::AtMost: ok = count <= r.count; break;
    }
    return {ok, now_};
  }

  /// oneof (require_all = false) or all (require_all = true).
  Result eval_oneof(const std::vector<Target>& targets, const Span& span, bool require_all) {
    const std::size_t lo = window_floor(span);
    bool any = false;
    Millis at = std::numeric_limits<Millis>::min();
    for (const auto& t : targets) {
      std::optional<Millis> latest;
      if (virtual_occurrence(t)) {
        latest = now_;
      } else {
        const auto& pos = positions(t);
        const auto it = std::lower_bound(pos.begin(), pos.end(), m_);
        if (it != pos.begin() && *std::prev(it) >= lo) latest = ts_[*std::prev(it)];
      }
      if (!latest) {
        if (require_all) return {};
        continue;
      }
      any = true;
      at = std::max(at, *latest);
    }
    if (!any) return {};
    return {true, at};
  }

  Occ event_occ(std::size_t k) const {
    const auto ord = static_cast<std::int64_t>(k) + 1;
    return {2 * static_cast<std::int64_t>(k) + 1, ts_[k], ts_[k], ord, ord};
  }

  Occ virtual_occ() const {
    const auto m = static_cast<std::int64_t>(m_);
    return {2 * m + 1, now_, now_, m, m};
  }

  /// Latest occurrence of a target with slot < bound.
  std::optional<Occ> target_before(const Target& t, std::int64_t bound) const {
    if (virtual_occurrence(t) && 2 * static_cast<std::int64_t>(m_) + 1 < bound) return virtual_occ();
    if (bound < 2 || m_ == 0) return std::nullopt;
    const std::int64_t k_max = std::min<std::int64_t>((bound - 2) / 2, static_cast<std::int64_t>(m_) - 1);
    const auto& pos = positions(t);
    const auto it = std::upper_bound(pos.begin(), pos.end(), static_cast<std::size_t>(k_max));
    if (it == pos.begin()) return std::nullopt;
    return event_occ(*std::prev(it));
  }

  /// Interior gaps (between consecutive snapshot events) at least `d` long.
  const std::vector<std::size_t>& interior_gaps(Millis d) {
    auto [it, inserted] = gap_cache_.try_emplace(d);
    if (inserted) {
      for (std::size_t j = 0; j + 1 < n_; ++j) {
        if (ts_[j + 1] - ts_[j] >= d) it->second.push_back(j);
      }
    }
    return it->second;
  }

  /// Latest quiet gap of at least `d` with slot < bound.
  std::optional<Occ> gap_before(Millis d, std::int64_t bound) {
    if (bound < 3 || m_ == 0) return std::nullopt;
    const auto m = static_cast<std::int64_t>(m_);
    const std::int64_t j_max = std::min((bound - 3) / 2, m - 1);
    if (j_max == m - 1 && now_ - ts_[m_ - 1] >= d) {
      return Occ{2 * m, ts_[m_ - 1], now_, m, m};
    }
    const std::int64_t interior_max = std::min(j_max, m - 2);
    if (interior_max < 0) return std::nullopt;
    const auto& gaps = interior_gaps(d);
    const auto it = std::upper_bound(gaps.begin(), gaps.end(), static_cast<std::size_t>(interior_max));
    if (it == gaps.begin()) return std::nullopt;
    const std::size_t j = *std::prev(it);
    const auto jj = static_cast<std::int64_t>(j);
    return Occ{2 * jj + 2, ts_[j], ts_[j + 1], jj + 1, jj + 2};
  }

  std::optional<Occ> element_before(const NElem& el, std::int64_t bound) {
    if (el.dwell) return gap_before(effective(*el.dwell), bound);
    return target_before(el.target, bound);
  }

  /// No snapshot event lies strictly between the two slots.
  bool adjacent(const Occ& before, const Occ& after) const {
    const std::int64_t lo = (before.slot + 1) / 2;
    const std::int64_t hi = std::min(after.slot / 2 - 1, static_cast<std::int64_t>(m_) - 1);
    return lo > hi;
  }

  Result eval_seq(const NSeq& q) {
    const bool commands = q.span.unit == SpanUnit::Commands;
    const std::int64_t span = commands ? q.span.amount : effective(q.span.amount);
    std::int64_t bound = 2 * static_cast<std::int64_t>(m_) + 2;
    const std::size_t count = q.elements.size();
    for (;;) {
      const auto last = element_before(q.elements.back(), bound);
      if (!last) return {};
      bound = last->slot;
      Occ next = *last;
      bool ok = true;
      for (std::size_t e = count - 1; e-- > 0;) {
        const auto prev = element_before(q.elements[e], next.slot);
        if (!prev) {
          // Later candidates only shrink the room available to earlier elements.
          if (!q.tight) return {};
          ok = false;
          break;
        }
        if (q.tight && !adjacent(*prev, next)) {
          ok = false;
          break;
        }
        next = *prev;
      }
      if (!ok) continue;
      const std::int64_t length = commands ? last->end_ord - next.start_ord : last->end - next.start;
      if (length < span) return {true, last->end};
    }
  }

  const FilterProgram& p_;
  const ClockModel& clock_;
  Millis final_now_;
  std::size_t n_ = 0;
  std::vector<Millis> ts_;
  std::vector<std::vector<std::size_t>> matcher_positions_;
  std::vector<Result> current_;
  std::vector<std::vector<std::size_t>> history_;
  std::map<Millis, std::vector<std::size_t>> gap_cache_;
  std::size_t m_ = 0;
  Millis now_ = 0;
  bool scaled_ = false;
};

}  // namespace detail

FilterProgram::FilterProgram() = default;
FilterProgram::~FilterProgram() = default;
FilterProgram::FilterProgram(const FilterProgram&) = default;
FilterProgram& FilterProgram::operator=(const FilterProgram&) = default;
FilterProgram::FilterProgram(FilterProgram&&) noexcept = default;
FilterProgram& FilterProgram::operator=(FilterProgram&&) noexcept = default;

std::vector<ModeledEvent> FilterProgram::evaluate(std::span<const AtomicEvent> snapshot, Millis now,
                                                  const ClockModel& clock) const {
  return detail::Evaluator(*this, snapshot, now, clock).run();
}

std::vector<std::string> FilterProgram::evaluation_order() const {
  std::vector<std::string> out;
  out.reserve(filters_.size());
  for (const auto& f : filters_) out.push_back(f.name);
  return out;
}

namespace {

using detail::Node;
using detail::NodePtr;
using detail::Target;

struct Resolver {
  const std::set<std::string>& symbols;
  const std::map<std::string, std::size_t>& class_index;     // name -> position in classes
  const std::map<std::string, std::size_t>& filter_source;   // name -> source index
  std::map<std::string, std::size_t>& matcher_for;           // symbol/class name -> matcher
  std::vector<std::string>& matcher_names;
  const std::string& owner;

  // Filters are resolved to source indices here and remapped after ordering.
  Target target(const std::string& name) {
    if (auto it = filter_source.find(name); it != filter_source.end()) return {true, it->second};
    if (!symbols.contains(name) && !class_index.contains(name)) {
      throw UnknownSymbol("definition '" + owner + "' refers to unknown event '" + name + "'");
    }
    auto [it, inserted] = matcher_for.try_emplace(name, matcher_names.size());
    if (inserted) matcher_names.push_back(name);
    return {false, it->second};
  }

  NodePtr node(const Expr& e) {
    auto wrap = [](auto n) { return std::make_shared<const Node>(Node{std::move(n)}); };
    return std::visit(
        detail::overloaded{
            [&](const Rate& r) { return wrap(detail::NRate{target(r.target), r.span, r.comparator, r.count}); },
            [&](const Oneof& o) { return wrap(detail::NOneof{targets(o.targets), o.span}); },
            [&](const All& a) { return wrap(detail::NAll{targets(a.targets), a.span}); },
            [&](const Seq& q) {
              detail::NSeq out{{}, q.span, q.tight};
              for (const auto& el : q.elements) {
                out.elements.push_back(el.is_dwell() ? detail::NElem{{}, el.dwell} : detail::NElem{target(el.target), {}});
              }
              return wrap(std::move(out));
            },
            [&](const Dwell& d) { return wrap(detail::NDwell{d.span}); },
            [&](const Ref& r) {
              const auto it = filter_source.find(r.name);
              if (it == filter_source.end()) {
                throw UnknownSymbol("definition '" + owner + "' uses '" + r.name +
                                    "' as a condition, but no definition has that name");
              }
              return wrap(detail::NRef{it->second});
            },
            [&](const And& a) { return wrap(detail::NAnd{node(*a.lhs), node(*a.rhs)}); },
            [&](const Or& o) { return wrap(detail::NOr{node(*o.lhs), node(*o.rhs)}); },
            [&](const Not& n) { return wrap(detail::NNot{node(*n.operand)}); },
        },
        e.node);
  }

  std::vector<Target> targets(const std::vector<std::string>& names) {
    std::vector<Target> out;
    for (const auto& n : names) out.push_back(target(n));
    return out;
  }
};

/// Source indices of filters a node depends on; `as_target` marks occurrence use.
void dependencies(const Node& n, std::vector<std::pair<std::size_t, bool>>& out) {
  auto add = [&](const Target& t) {
    if (t.is_filter) out.emplace_back(t.index, true);
  };
  std::visit(detail::overloaded{
                 [&](const detail::NRate& r) { add(r.target); },
                 [&](const detail::NOneof& o) { std::for_each(o.targets.begin(), o.targets.end(), add); },
                 [&](const detail::NAll& a) { std::for_each(a.targets.begin(), a.targets.end(), add); },
                 [&](const detail::NSeq& q) {
                   for (const auto& el : q.elements) {
                     if (!el.dwell) add(el.target);
                   }
                 },
                 [](const detail::NDwell&) {},
                 [&](const detail::NRef& r) { out.emplace_back(r.filter, false); },
                 [&](const detail::NAnd& a) {
                   dependencies(*a.lhs, out);
                   dependencies(*a.rhs, out);
                 },
                 [&](const detail::NOr& o) {
                   dependencies(*o.lhs, out);
                   dependencies(*o.rhs, out);
                 },
                 [&](const detail::NNot& x) { dependencies(*x.operand, out); },
             },
             n.v);
}

NodePtr remap(const Node& n, const std::vector<std::size_t>& order_of) {
  auto fix = [&](Target t) {
    if (t.is_filter) t.index = order_of[t.index];
    return t;
  };
  auto wrap = [](auto x) { return std::make_shared<const Node>(Node{std::move(x)}); };
  return std::visit(detail::overloaded{
                        [&](const detail::NRate& r) {
                          auto c = r;
                          c.target = fix(c.target);
                          return wrap(c);
                        },
                        [&](const detail::NOneof& o) {
                          auto c = o;
                          for (auto& t : c.targets) t = fix(t);
                          return wrap(c);
                        },
                        [&](const detail::NAll& a) {
                          auto c = a;
                          for (auto& t : c.targets) t = fix(t);
                          return wrap(c);
                        },
                        [&](const detail::NSeq& q) {
                          auto c = q;
                          for (auto& el : c.elements) {
                            if (!el.dwell) el.target = fix(el.target);
                          }
                          return wrap(c);
                        },
                        [&](const detail::NDwell& d) { return wrap(d); },
                        [&](const detail::NRef& r) { return wrap(detail::NRef{order_of[r.filter]}); },
                        [&](const detail::NAnd& a) { return wrap(detail::NAnd{remap(*a.lhs, order_of), remap(*a.rhs, order_of)}); },
                        [&](const detail::NOr& o) { return wrap(detail::NOr{remap(*o.lhs, order_of), remap(*o.rhs, order_of)}); },
                        [&](const detail::NNot& x) { return wrap(detail::NNot{remap(*x.operand, order_of)}); },
                    },
                    n.v);
}

}  // namespace

FilterProgram compile(const std::vector<Definition>& definitions, const std::set<std::string>& symbols) {
  FilterProgram prog;
  prog.symbols_ = symbols;
  {
    int id = 0;
    for (const auto& s : symbols) prog.symbol_ids_.emplace(s, id++);
  }

  std::map<std::string, std::size_t> class_index;
  std::map<std::string, std::size_t> filter_source;
  std::vector<const FilterDefinition*> source_filters;
  for (const auto& def : definitions) {
    if (const auto* c = std::get_if<EventClass>(&def)) {
      if (symbols.contains(c->name)) {
        throw DuplicateName("class '" + c->name + "' has the same name as an atomic event");
      }
      if (c->members.empty()) throw UnknownSymbol("class '" + c->name + "' has no members");
      for (const auto& m : c->members) {
        if (!symbols.contains(m)) {
          throw UnknownSymbol("class '" + c->name + "' lists unknown event '" + m + "'");
        }
      }
      if (!class_index.emplace(c->name, prog.classes_.size()).second || filter_source.contains(c->name)) {
        throw DuplicateName("'" + c->name + "' is defined more than once");
      }
      prog.classes_.push_back(*c);
    } else {
      const auto& f = std::get<FilterDefinition>(def);
      if (symbols.contains(f.name)) {
        throw DuplicateName("definition '" + f.name + "' has the same name as an atomic event");
      }
      if (class_index.contains(f.name) || !filter_source.emplace(f.name, source_filters.size()).second) {
        throw DuplicateName("'" + f.name + "' is defined more than once");
      }
      source_filters.push_back(&f);
    }
  }
  for (const auto& f : source_filters) {
    if (class_index.contains(f->name)) throw DuplicateName("'" + f->name + "' is defined more than once");
  }

  std::map<std::string, std::size_t> matcher_for;
  std::vector<std::string> matcher_names;
  std::vector<NodePtr> source_nodes;
  std::vector<std::vector<std::pair<std::size_t, bool>>> deps(source_filters.size());
  for (std::size_t i = 0; i < source_filters.size(); ++i) {
    Resolver r{symbols, class_index, filter_source, matcher_for, matcher_names, source_filters[i]->name};
    source_nodes.push_back(r.node(*source_filters[i]->expr));
    dependencies(*source_nodes.back(), deps[i]);
  }

  // Depth-first post-order in source order; reports the first cycle found.
  enum class Mark { None, Active, Done };
  std::vector<Mark> mark(source_filters.size(), Mark::None);
  std::vector<std::size_t> order;
  std::vector<std::size_t> stack;
  auto visit = [&](auto&& self, std::size_t i) -> void {
    if (mark[i] == Mark::Done) return;
    if (mark[i] == Mark::Active) {
      std::string path;
      auto from = std::find(stack.begin(), stack.end(), i);
      for (auto it = from; it != stack.end(); ++it) path += source_filters[*it]->name + " -> ";
      throw CyclicDefinition("cyclic definition: " + path + source_filters[i]->name);
    }
    mark[i] = Mark::Active;
    stack.push_back(i);
    for (const auto& [d, as_target] : deps[i]) self(self, d);
    stack.pop_back();
    mark[i] = Mark::Done;
    order.push_back(i);
  };
  for (std::size_t i = 0; i < source_filters.size(); ++i) visit(visit, i);

  std::vector<std::size_t> order_of(source_filters.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos) order_of[order[pos]] = pos;

  prog.needs_history_.assign(order.size(), 0);
  prog.needs_prefix_.assign(order.size(), 0);
  for (std::size_t src = 0; src < deps.size(); ++src) {
    for (const auto& [d, as_target] : deps[src]) {
      if (as_target) prog.needs_history_[order_of[d]] = 1;
    }
  }
  // Anything evaluated at every event time drags its dependencies along.
  for (std::size_t pos = order.size(); pos-- > 0;) {
    if (prog.needs_history_[pos]) prog.needs_prefix_[pos] = 1;
    if (!prog.needs_prefix_[pos]) continue;
    for (const auto& [d, as_target] : deps[order[pos]]) prog.needs_prefix_[order_of[d]] = 1;
  }

  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const std::size_t src = order[pos];
    prog.filter_index_.emplace(source_filters[src]->name, pos);
    prog.filters_.push_back(*source_filters[src]);
    prog.nodes_.push_back(remap(*source_nodes[src], order_of));
  }

  for (const auto& name : matcher_names) {
    FilterProgram::Matcher m{name, std::vector<char>(symbols.size(), 0)};
    if (auto it = class_index.find(name); it != class_index.end()) {
      for (const auto& s : prog.classes_[it->second].members) m.member[static_cast<std::size_t>(prog.symbol_ids_.at(s))] = 1;
    } else {
      m.member[static_cast<std::size_t>(prog.symbol_ids_.at(name))] = 1;
    }
    prog.matchers_.push_back(std::move(m));
  }
  return prog;
}

}  // namespace goalcast::pattern
