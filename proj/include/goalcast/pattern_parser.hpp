#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "goalcast/pattern_ast.hpp"

namespace goalcast::pattern {

/// Parses an events-language program.
///
///   program   := { statement }
///   statement := "class" NAME ":=" "{" NAME { "," NAME } "}" ";"
///              | "define" NAME [ "scaled" ] ":=" expr ";"
///   expr      := and_expr { "or" and_expr }
///   and_expr  := unary { "and" unary }
///   unary     := "not" unary | primary
///   primary   := "(" expr ")" | NAME
///              | "rate" "(" NAME "," SPAN ")" ( ">=" | "=" | "==" | "<=" ) INT
///              | ( "oneof" | "all" ) "(" "{" NAME { "," NAME } "}" "," SPAN ")"
///              | ( "seq" | "tightseq" ) "(" element { "," element } "," SPAN ")"
///              | "dwell" "(" SPAN ")"
///   element   := NAME | "dwell" "(" SPAN ")"
///   SPAN      := number ( "ms" | "s" | "cmds" )
///
/// `--` starts a comment that runs to end of line. Definitions come back in
/// source order. Throws SyntaxError (with line/column) or DuplicateName.
std::vector<Definition> parse(std::string_view source);

/// Normal form: one statement per line, minimal parentheses.
std::string print(const std::vector<Definition>& program);
std::string print(const Definition& definition);
std::string print(const Expr& expr);
std::string print_span(const Span& span);

}  // namespace goalcast::pattern
