#include "goalcast/pattern_ast.hpp"

#include <algorithm>

namespace goalcast::pattern {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

bool same_elements(const std::vector<SeqElement>& a, const std::vector<SeqElement>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].target != b[i].target || a[i].dwell != b[i].dwell) return false;
  }
  return true;
}

void collect(const Expr& e, std::vector<std::string>& out) {
  auto add = [&](const std::string& n) {
    if (std::find(out.begin(), out.end(), n) == out.end()) out.push_back(n);
  };
  std::visit(overloaded{
                 [&](const Rate& r) { add(r.target); },
                 [&](const Oneof& o) { std::for_each(o.targets.begin(), o.targets.end(), add); },
                 [&](const All& a) { std::for_each(a.targets.begin(), a.targets.end(), add); },
                 [&](const Seq& s) {
                   for (const auto& el : s.elements) {
                     if (!el.is_dwell()) add(el.target);
                   }
                 },
                 [](const Dwell&) {},
                 [&](const Ref& r) { add(r.name); },
                 [&](const And& a) {
                   collect(*a.lhs, out);
                   collect(*a.rhs, out);
                 },
                 [&](const Or& o) {
                   collect(*o.lhs, out);
                   collect(*o.rhs, out);
                 },
                 [&](const Not& n) { collect(*n.operand, out); },
             },
             e.node);
}

}  // namespace

bool equal(const Expr& a, const Expr& b) {
  if (a.node.index() != b.node.index()) return false;
  return std::visit(
      overloaded{
          [&](const Rate& x) {
            const auto& y = std::get<Rate>(b.node);
            return x.target == y.target && x.span == y.span && x.comparator == y.comparator &&
                   x.count == y.count;
          },
          [&](const Oneof& x) {
            const auto& y = std::get<Oneof>(b.node);
            return x.targets == y.targets && x.span == y.span;
          },
          [&](const All& x) {
            const auto& y = std::get<All>(b.node);
            return x.targets == y.targets && x.span == y.span;
          },
          [&](const Seq& x) {
            const auto& y = std::get<Seq>(b.node);
            return x.tight == y.tight && x.span == y.span && same_elements(x.elements, y.elements);
          },
          [&](const Dwell& x) { return x.span == std::get<Dwell>(b.node).span; },
          [&](const Ref& x) { return x.name == std::get<Ref>(b.node).name; },
          [&](const And& x) {
            const auto& y = std::get<And>(b.node);
            return equal(*x.lhs, *y.lhs) && equal(*x.rhs, *y.rhs);
          },
          [&](const Or& x) {
            const auto& y = std::get<Or>(b.node);
            return equal(*x.lhs, *y.lhs) && equal(*x.rhs, *y.rhs);
          },
          [&](const Not& x) { return equal(*x.operand, *std::get<Not>(b.node).operand); },
      },
      a.node);
}

bool equal(const Definition& a, const Definition& b) {
  if (a.index() != b.index()) return false;
  if (const auto* c = std::get_if<EventClass>(&a)) {
    return *c == std::get<EventClass>(b);
  }
  const auto& x = std::get<FilterDefinition>(a);
  const auto& y = std::get<FilterDefinition>(b);
  return x.name == y.name && x.scaled == y.scaled && equal(*x.expr, *y.expr);
}

std::vector<std::string> referenced_names(const Expr& expr) {
  std::vector<std::string> out;
  collect(expr, out);
  return out;
}

int depth(const Expr& expr) {
  return std::visit(overloaded{
                        [](const And& a) { return 1 + std::max(depth(*a.lhs), depth(*a.rhs)); },
                        [](const Or& o) { return 1 + std::max(depth(*o.lhs), depth(*o.rhs)); },
                        [](const Not& n) { return 1 + depth(*n.operand); },
                        [](const auto&) { return 1; },
                    },
                    expr.node);
}

}  // namespace goalcast::pattern
