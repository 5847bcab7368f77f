#pragma once

// Statement-level front end for decompiled pseudo-C.
//
// The accepted subset covers declarations, assignments (including compound
// field/array/deref lvalues), calls, if/else, while/for/do, return, casts,
// address-of, dereference and the ternary operator. Anything outside the
// subset becomes an Opaque statement; parsing only fails when braces are
// unbalanced at the top level.

#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace taintchain::pseudoc {

enum class ExprKind {
    none,
    identifier,
    number,
    string_literal,
    char_literal,
    boolean,
    unary,     // text = operator; prefix unless postfix == true
    binary,    // text = operator
    assign,    // text = operator ("=", "+=", ...)
    ternary,   // children: cond, then, else
    call,      // children[0] = callee expression, rest = arguments
    index,     // children: base, subscript
    member,    // text = "." or "->"; children[0] = base; field = member name
    cast,      // type_text = target type; children[0] = operand
    size_of,   // type_text set for sizeof(type), otherwise children[0]
    comma,
    init_list,
};

struct Expr {
    ExprKind kind = ExprKind::none;
    std::string text;
    std::string type_text;
    std::string field;
    bool postfix = false;
    std::vector<Expr> children;

    bool empty() const { return kind == ExprKind::none; }
    bool operator==(const Expr&) const = default;

    static Expr ident(std::string name);
};

/// Identifier summary of an expression tree.
struct ExprInfo {
    std::set<std::string> reads;
    std::set<std::string> derefs;      // identifiers read through *, [] or ->
    std::set<std::string> address_of;  // identifiers whose address is taken
};

ExprInfo analyze_expr(const Expr& e);

/// Identifiers the expression reads. Callee names of direct calls, member
/// names, type names and sizeof operands are not reads.
std::set<std::string> identifiers(const Expr& e);

/// Base identifier of an lvalue-like expression: x, x[i], x.f, p->f, *p,
/// *(p + 4), (T)x, &x all resolve to the leftmost variable. Empty if none.
std::string base_identifier(const Expr& e);

/// True when the lvalue reaches its base through a pointer (*, [] or ->).
bool is_dereference(const Expr& e);

const Expr& strip_casts(const Expr& e);

/// String, integer, char, float or boolean literal, possibly cast or negated.
bool is_literal_constant(const Expr& e);

/// Callee name of a call expression, "<indirect>" for calls through
/// anything that is not a plain identifier.
std::string callee_name(const Expr& call);

std::string to_string(const Expr& e);

/// Parses a standalone expression. Throws ParseError on malformed input.
Expr parse_expression(std::string_view text);

enum class StmtKind { assign, call, if_, loop, ret, decl, opaque };

std::string_view to_string(StmtKind k);

struct Stmt {
    StmtKind kind = StmtKind::opaque;
    int line = 0;        // 1-based line within the function text
    int cond_line = 0;   // loop condition line (differs from line for do/while)

    Expr lhs;            // assign target, or the result target of a call
    Expr value;          // assign rhs, call expression, if/loop condition, return value
    std::string op;      // assignment operator for assign and call-with-lhs
    std::string name;    // decl
    std::string type_text;
    std::string text;    // opaque raw text, whitespace-normalized
    bool do_while = false;

    std::vector<Stmt> body;       // then-branch, loop body, or switch body
    std::vector<Stmt> else_body;

    std::set<std::string> reads;
    std::set<std::string> writes;
    std::set<std::string> address_of;
    std::set<std::string> derefs;

    bool operator==(const Stmt&) const = default;
};

struct Param {
    std::string name;
    std::string type;
    bool operator==(const Param&) const = default;
};

struct FunctionIR {
    std::string header;           // signature text before the opening brace
    int header_line = 1;
    std::vector<Param> params;    // parsed from the header when present
    std::vector<Stmt> stmts;

    bool operator==(const FunctionIR&) const = default;
};

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, int line)
        : std::runtime_error(what), line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

/// Parses a decompiled function. Only unbalanced top-level braces (or an
/// unterminated comment/literal) raise ParseError.
FunctionIR parse_function(std::string_view body_text);

struct CallSite {
    int line = 0;
    std::string callee;
    std::vector<Expr> args;
    Expr lhs;  // target of the enclosing assignment, if any
};

/// Every call expression whose callee matches, in line order. Nested calls
/// are included (printf(..., atoi(x)) lists atoi under "atoi").
std::vector<CallSite> call_sites(const FunctionIR& ir, std::string_view callee);

/// Every call expression in the function regardless of callee.
std::vector<CallSite> all_call_sites(const FunctionIR& ir);

/// Total number of statements, counting nested ones.
std::size_t count_statements(const std::vector<Stmt>& stmts);

/// Pretty-prints the IR back to pseudo-C, keeping every statement on its
/// recorded line so that reparsing yields the same IR.
std::string print_function(const FunctionIR& ir);

/// Calls f(stmt) on every statement, depth first, in source order.
template <typename F>
void for_each_stmt(const std::vector<Stmt>& stmts, F&& f) {
    for (const auto& s : stmts) {
        f(s);
        for_each_stmt(s.body, f);
        for_each_stmt(s.else_body, f);
    }
}

/// Expressions directly owned by a statement (not its nested statements).
std::vector<const Expr*> stmt_exprs(const Stmt& s);

/// Collects call sub-expressions in evaluation order (outer call first).
void collect_calls(const Expr& e, std::vector<const Expr*>& out);

}  // namespace taintchain::pseudoc
