#pragma once

#include "edge/ast.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace edge {

struct ParseResult {
    std::optional<ast::Program> program;  // set iff diagnostics is empty
    std::vector<ast::Diagnostic> diagnostics;

    bool ok() const { return program.has_value(); }
};

ParseResult parse(std::string_view text, const std::string& file = "<input>");

// Canonical text form; parse(pretty_print(p)) is structurally equal to p.
std::string pretty_print(const ast::Program& p);

std::string print_rank_expr(const ast::RankExpr& e);
std::string print_cond(const ast::BoolCond& c);
std::string print_access(const ast::Access& a);
std::string print_rhs(const ast::RhsExpr& e, bool top = true);
std::string print_statement(const ast::Statement& s);
std::string print_literal(const Scalar& v);

}  // namespace edge
