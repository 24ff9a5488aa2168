#pragma once

#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "goalcast/event_stream.hpp"

namespace goalcast::pattern {

enum class Comparator { AtLeast, Exactly, AtMost };

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

/// rate(target, span) CMP n
struct Rate {
  std::string target;
  Span span;
  Comparator comparator = Comparator::AtLeast;
  std::int64_t count = 1;
};

/// oneof({a, b, ...}, span)
struct Oneof {
  std::vector<std::string> targets;
  Span span;
};

/// all({a, b, ...}, span)
struct All {
  std::vector<std::string> targets;
  Span span;
};

/// One element of a sequence: a target, or a quiet gap of at least `dwell`.
struct SeqElement {
  std::string target;
  std::optional<Millis> dwell;

  bool is_dwell() const noexcept { return dwell.has_value(); }
};

/// seq(e1, ..., en, span) or tightseq(...) when `tight`.
struct Seq {
  std::vector<SeqElement> elements;
  Span span;
  bool tight = false;
};

/// dwell(span): no event at all in (now - span, now].
struct Dwell {
  Millis span = 0;
};

/// Bare name of another definition: true while that definition is satisfied.
struct Ref {
  std::string name;
};

struct And {
  ExprPtr lhs;
  ExprPtr rhs;
};

struct Or {
  ExprPtr lhs;
  ExprPtr rhs;
};

struct Not {
  ExprPtr operand;
};

struct Expr {
  std::variant<Rate, Oneof, All, Seq, Dwell, Ref, And, Or, Not> node;
};

template <typename T>
ExprPtr make(T node) {
  return std::make_shared<const Expr>(Expr{std::move(node)});
}

struct FilterDefinition {
  std::string name;
  ExprPtr expr;
  bool scaled = false;
};

using Definition = std::variant<EventClass, FilterDefinition>;

/// Structural equality of expression trees.
bool equal(const Expr& a, const Expr& b);
bool equal(const Definition& a, const Definition& b);

/// Every name an expression mentions as a target or reference, in first-seen order.
std::vector<std::string> referenced_names(const Expr& expr);

/// Nesting depth; primitives have depth 1.
int depth(const Expr& expr);

}  // namespace goalcast::pattern
