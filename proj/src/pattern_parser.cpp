#include "goalcast/pattern_parser.hpp"

#include <cctype>
#include <charconv>
#include <set>

#include "goalcast/error.hpp"

namespace goalcast::pattern {

namespace {

enum class Tok { Ident, Int, SpanLit, Assign, LBrace, RBrace, LParen, RParen, Comma, Semi, Ge, Le, Eq, End };

struct Token {
  Tok kind;
  std::string text;
  std::size_t line;
  std::size_t column;
  std::int64_t value = 0;  // Int count, or span amount
  SpanUnit unit = SpanUnit::Millis;
};

const std::set<std::string, std::less<>> kKeywords = {"class", "define", "scaled", "and",      "or",   "not",
                                                      "rate",  "oneof",  "all",    "seq", "tightseq", "dwell"};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    for (;;) {
      skip_space();
      if (pos_ >= src_.size()) {
        out.push_back({Tok::End, "end of input", line_, col_});
        return out;
      }
      out.push_back(next());
    }
  }

 private:
  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  void skip_space() {
    while (pos_ < src_.size()) {
      const char c = src_[pos_];
      if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else if (c == '-' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '-') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else {
        return;
      }
    }
  }

  Token next() {
    const std::size_t line = line_;
    const std::size_t col = col_;
    const char c = src_[pos_];
    auto punct = [&](Tok kind, std::size_t len) {
      Token t{kind, std::string(src_.substr(pos_, len)), line, col};
      for (std::size_t i = 0; i < len; ++i) advance();
      return t;
    };
    auto peek = [&](std::size_t off) { return pos_ + off < src_.size() ? src_[pos_ + off] : '\0'; };

    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const std::size_t start = pos_;
      while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
        advance();
      }
      return {Tok::Ident, std::string(src_.substr(start, pos_ - start)), line, col};
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      return number(line, col);
    }
    switch (c) {
      case ':':
        if (peek(1) == '=') return punct(Tok::Assign, 2);
        break;
      case '{': return punct(Tok::LBrace, 1);
      case '}': return punct(Tok::RBrace, 1);
      case '(': return punct(Tok::LParen, 1);
      case ')': return punct(Tok::RParen, 1);
      case ',': return punct(Tok::Comma, 1);
      case ';': return punct(Tok::Semi, 1);
      case '>':
        if (peek(1) == '=') return punct(Tok::Ge, 2);
        break;
      case '<':
        if (peek(1) == '=') return punct(Tok::Le, 2);
        break;
      case '=':
        return punct(Tok::Eq, peek(1) == '=' ? 2 : 1);
      default:
        break;
    }
    throw SyntaxError(line, col, std::string("unexpected character '") + c + "'");
  }

  Token number(std::size_t line, std::size_t col) {
    const std::size_t start = pos_;
    while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) advance();
    std::size_t frac_start = 0;
    std::size_t frac_len = 0;
    if (pos_ < src_.size() && src_[pos_] == '.') {
      advance();
      frac_start = pos_;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) advance();
      frac_len = pos_ - frac_start;
      if (frac_len == 0) throw SyntaxError(line, col, "malformed number");
    }
    const std::size_t int_end = frac_len ? frac_start - 1 : pos_;
    const std::size_t unit_start = pos_;
    while (pos_ < src_.size() && std::isalpha(static_cast<unsigned char>(src_[pos_]))) advance();
    const std::string text(src_.substr(start, pos_ - start));
    const std::string_view unit = src_.substr(unit_start, pos_ - unit_start);

    std::int64_t whole = 0;
    const auto [p, ec] = std::from_chars(src_.data() + start, src_.data() + int_end, whole);
    if (ec != std::errc()) throw SyntaxError(line, col, "number out of range: " + text);

    if (unit.empty()) {
      if (frac_len) throw SyntaxError(line, col, "fractional number needs a unit: " + text);
      Token t{Tok::Int, text, line, col};
      t.value = whole;
      return t;
    }
    Token t{Tok::SpanLit, text, line, col};
    if (unit == "s") {
      if (frac_len > 3) throw SyntaxError(line, col, "sub-millisecond span: " + text);
      std::int64_t frac = 0;
      std::from_chars(src_.data() + frac_start, src_.data() + frac_start + frac_len, frac);
      for (std::size_t i = frac_len; i < 3; ++i) frac *= 10;
      t.value = whole * 1000 + frac;
      t.unit = SpanUnit::Millis;
    } else if (unit == "ms" || unit == "cmds") {
      if (frac_len) throw SyntaxError(line, col, "fractional " + std::string(unit) + ": " + text);
      t.value = whole;
      t.unit = unit == "ms" ? SpanUnit::Millis : SpanUnit::Commands;
    } else {
      throw SyntaxError(line, col, "unknown span unit '" + std::string(unit) + "'");
    }
    if (t.value <= 0) throw SyntaxError(line, col, "span must be positive: " + text);
    return t;
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::size_t col_ = 1;
};

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  std::vector<Definition> program() {
    std::vector<Definition> defs;
    std::set<std::string> names;
    while (peek().kind != Tok::End) {
      const Token& head = peek();
      Definition def = statement();
      const std::string& name = std::visit([](const auto& d) -> const std::string& { return d.name; }, def);
      if (!names.insert(name).second) {
        throw DuplicateName(std::to_string(head.line) + ":" + std::to_string(head.column) + ": '" + name +
                            "' is defined more than once");
      }
      defs.push_back(std::move(def));
    }
    return defs;
  }

 private:
  const Token& peek() const { return toks_[pos_]; }
  const Token& take() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }

  [[noreturn]] void fail(const Token& at, const std::string& what) const {
    throw SyntaxError(at.line, at.column, what + " (found '" + at.text + "')");
  }

  const Token& expect(Tok kind, const char* what) {
    if (peek().kind != kind) fail(peek(), std::string("expected ") + what);
    return take();
  }

  bool is_keyword(const Token& t, std::string_view kw) const { return t.kind == Tok::Ident && t.text == kw; }

  void expect_keyword(std::string_view kw) {
    if (!is_keyword(peek(), kw)) fail(peek(), "expected '" + std::string(kw) + "'");
    take();
  }

  std::string name(const char* what) {
    const Token& t = peek();
    if (t.kind != Tok::Ident || kKeywords.contains(t.text)) fail(t, std::string("expected ") + what);
    return take().text;
  }

  Span span() {
    const Token& t = expect(Tok::SpanLit, "a span such as 10s, 500ms or 5cmds");
    return Span{t.value, t.unit};
  }

  Millis duration() {
    const Token& at = peek();
    const Span s = span();
    if (s.unit != SpanUnit::Millis) fail(at, "dwell needs a time span, not a command count");
    return s.amount;
  }

  Definition statement() {
    if (is_keyword(peek(), "class")) {
      take();
      EventClass c;
      c.name = name("a class name");
      expect(Tok::Assign, "':='");
      expect(Tok::LBrace, "'{'");
      c.members.insert(name("an event symbol"));
      while (peek().kind == Tok::Comma) {
        take();
        c.members.insert(name("an event symbol"));
      }
      expect(Tok::RBrace, "'}'");
      expect(Tok::Semi, "';'");
      return c;
    }
    if (is_keyword(peek(), "define")) {
      take();
      FilterDefinition f;
      f.name = name("a definition name");
      if (is_keyword(peek(), "scaled")) {
        take();
        f.scaled = true;
      }
      expect(Tok::Assign, "':='");
      f.expr = expr();
      expect(Tok::Semi, "';'");
      return f;
    }
    fail(peek(), "expected 'class' or 'define'");
  }

  ExprPtr expr() {
    ExprPtr lhs = and_expr();
    while (is_keyword(peek(), "or")) {
      take();
      lhs = make(Or{lhs, and_expr()});
    }
    return lhs;
  }

  ExprPtr and_expr() {
    ExprPtr lhs = unary();
    while (is_keyword(peek(), "and")) {
      take();
      lhs = make(And{lhs, unary()});
    }
    return lhs;
  }

  ExprPtr unary() {
    if (is_keyword(peek(), "not")) {
      take();
      return make(Not{unary()});
    }
    return primary();
  }

  std::vector<std::string> target_set() {
    expect(Tok::LBrace, "'{'");
    std::vector<std::string> out{name("an event name")};
    while (peek().kind == Tok::Comma) {
      take();
      out.push_back(name("an event name"));
    }
    expect(Tok::RBrace, "'}'");
    return out;
  }

  ExprPtr primary() {
    const Token& t = peek();
    if (t.kind == Tok::LParen) {
      take();
      ExprPtr inner = expr();
      expect(Tok::RParen, "')'");
      return inner;
    }
    if (t.kind != Tok::Ident) fail(t, "expected an expression");

    if (t.text == "rate") {
      take();
      expect(Tok::LParen, "'('");
      Rate r;
      r.target = name("an event name");
      expect(Tok::Comma, "','");
      r.span = span();
      expect(Tok::RParen, "')'");
      switch (peek().kind) {
        case Tok::Ge: r.comparator = Comparator::AtLeast; break;
        case Tok::Le: r.comparator = Comparator::AtMost; break;
        case Tok::Eq: r.comparator = Comparator::Exactly; break;
        default: fail(peek(), "rate needs a comparison (>=, =, <=)");
      }
      take();
      const Token& n = expect(Tok::Int, "an integer count");
      if (n.value < 1) fail(n, "rate threshold must be at least 1");
      r.count = n.value;
      return make(std::move(r));
    }
    if (t.text == "oneof" || t.text == "all") {
      const bool all = t.text == "all";
      take();
      expect(Tok::LParen, "'('");
      auto targets = target_set();
      expect(Tok::Comma, "','");
      const Span s = span();
      expect(Tok::RParen, "')'");
      if (all) return make(All{std::move(targets), s});
      return make(Oneof{std::move(targets), s});
    }
    if (t.text == "seq" || t.text == "tightseq") {
      Seq q;
      q.tight = t.text == "tightseq";
      take();
      expect(Tok::LParen, "'('");
      for (;;) {
        if (peek().kind == Tok::SpanLit) {
          if (q.elements.empty()) fail(peek(), "sequence needs at least one element");
          q.span = span();
          break;
        }
        SeqElement el;
        if (is_keyword(peek(), "dwell")) {
          take();
          expect(Tok::LParen, "'('");
          el.dwell = duration();
          expect(Tok::RParen, "')'");
        } else {
          el.target = name("a sequence element");
        }
        q.elements.push_back(std::move(el));
        expect(Tok::Comma, "','");
      }
      expect(Tok::RParen, "')'");
      return make(std::move(q));
    }
    if (t.text == "dwell") {
      take();
      expect(Tok::LParen, "'('");
      const Millis d = duration();
      expect(Tok::RParen, "')'");
      return make(Dwell{d});
    }
    return make(Ref{name("an expression")});
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

int precedence(const Expr& e) {
  if (std::holds_alternative<Or>(e.node)) return 1;
  if (std::holds_alternative<And>(e.node)) return 2;
  if (std::holds_alternative<Not>(e.node)) return 3;
  return 4;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ", ";
    out += items[i];
  }
  return out;
}

std::string print_at(const Expr& e, int min_prec) {
  std::string s = print(e);
  return precedence(e) < min_prec ? "(" + s + ")" : s;
}

}  // namespace

std::vector<Definition> parse(std::string_view source) {
  return Parser(Lexer(source).run()).program();
}

std::string print_span(const Span& span) {
  if (span.unit == SpanUnit::Commands) return std::to_string(span.amount) + "cmds";
  if (span.amount % 1000 == 0) return std::to_string(span.amount / 1000) + "s";
  return std::to_string(span.amount) + "ms";
}

std::string print(const Expr& expr) {
  return std::visit(
      overloaded{
          [](const Rate& r) {
            const char* cmp = r.comparator == Comparator::AtLeast ? ">=" : r.comparator == Comparator::AtMost ? "<=" : "=";
            return "rate(" + r.target + ", " + print_span(r.span) + ") " + cmp + " " + std::to_string(r.count);
          },
          [](const Oneof& o) { return "oneof({" + join(o.targets) + "}, " + print_span(o.span) + ")"; },
          [](const All& a) { return "all({" + join(a.targets) + "}, " + print_span(a.span) + ")"; },
          [](const Seq& q) {
            std::string out = q.tight ? "tightseq(" : "seq(";
            for (const auto& el : q.elements) {
              out += el.is_dwell() ? "dwell(" + print_span(Span::millis(*el.dwell)) + ")" : el.target;
              out += ", ";
            }
            return out + print_span(q.span) + ")";
          },
          [](const Dwell& d) { return "dwell(" + print_span(Span::millis(d.span)) + ")"; },
          [](const Ref& r) { return r.name; },
          [](const And& a) { return print_at(*a.lhs, 2) + " and " + print_at(*a.rhs, 3); },
          [](const Or& o) { return print_at(*o.lhs, 1) + " or " + print_at(*o.rhs, 2); },
          [](const Not& n) { return "not " + print_at(*n.operand, 3); },
      },
      expr.node);
}

std::string print(const Definition& definition) {
  if (const auto* c = std::get_if<EventClass>(&definition)) {
    return "class " + c->name + " := { " + join({c->members.begin(), c->members.end()}) + " };";
  }
  const auto& f = std::get<FilterDefinition>(definition);
  return "define " + f.name + (f.scaled ? " scaled" : "") + " := " + print(*f.expr) + ";";
}

std::string print(const std::vector<Definition>& program) {
  std::string out;
  for (const auto& d : program) {
    out += print(d);
    out += '\n';
  }
  return out;
}

}  // namespace goalcast::pattern
