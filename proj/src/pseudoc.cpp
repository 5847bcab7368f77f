#include "taintchain/pseudoc.hpp"

#include "pseudoc_lexer.hpp"

#include <algorithm>
#include <cctype>
#include <optional>
#include <sstream>

namespace taintchain::pseudoc {

using detail::Token;
using detail::TokKind;

Expr Expr::ident(std::string name) {
    Expr e;
    e.kind = ExprKind::identifier;
    e.text = std::move(name);
    return e;
}

std::string_view to_string(StmtKind k) {
    switch (k) {
        case StmtKind::assign: return "assign";
        case StmtKind::call: return "call";
        case StmtKind::if_: return "if";
        case StmtKind::loop: return "loop";
        case StmtKind::ret: return "return";
        case StmtKind::decl: return "decl";
        case StmtKind::opaque: return "opaque";
    }
    return "opaque";
}

// ---------------------------------------------------------------------------
// Expression queries

namespace {

void collect_info(const Expr& e, ExprInfo& info) {
    switch (e.kind) {
        case ExprKind::identifier:
            info.reads.insert(e.text);
            return;
        case ExprKind::call:
            if (!e.children.empty() && e.children[0].kind != ExprKind::identifier) {
                collect_info(e.children[0], info);
            }
            for (std::size_t i = 1; i < e.children.size(); ++i) collect_info(e.children[i], info);
            return;
        case ExprKind::member:
            if (e.text == "->") {
                if (auto b = base_identifier(e.children[0]); !b.empty()) info.derefs.insert(b);
            }
            collect_info(e.children[0], info);
            return;
        case ExprKind::size_of:
            return;
        case ExprKind::unary:
            if (e.text == "*") {
                if (auto b = base_identifier(e.children[0]); !b.empty()) info.derefs.insert(b);
            } else if (e.text == "&") {
                if (auto b = base_identifier(e.children[0]); !b.empty()) info.address_of.insert(b);
            }
            break;
        case ExprKind::index:
            if (auto b = base_identifier(e.children[0]); !b.empty()) info.derefs.insert(b);
            break;
        default:
            break;
    }
    for (const auto& c : e.children) collect_info(c, info);
}

}  // namespace

ExprInfo analyze_expr(const Expr& e) {
    ExprInfo info;
    collect_info(e, info);
    return info;
}

std::set<std::string> identifiers(const Expr& e) { return analyze_expr(e).reads; }

const Expr& strip_casts(const Expr& e) {
    const Expr* cur = &e;
    while (cur->kind == ExprKind::cast && !cur->children.empty()) cur = &cur->children[0];
    return *cur;
}

std::string base_identifier(const Expr& e) {
    switch (e.kind) {
        case ExprKind::identifier:
            return e.text;
        case ExprKind::unary:
            if (e.text == "*" || e.text == "&" || e.text == "++" || e.text == "--") {
                return base_identifier(e.children[0]);
            }
            return {};
        case ExprKind::index:
        case ExprKind::member:
        case ExprKind::cast:
            return base_identifier(e.children[0]);
        case ExprKind::binary:
            if (e.text == "+" || e.text == "-") {
                auto b = base_identifier(e.children[0]);
                return b.empty() ? base_identifier(e.children[1]) : b;
            }
            return {};
        case ExprKind::assign:
            return base_identifier(e.children[0]);
        case ExprKind::comma:
            return base_identifier(e.children.back());
        default:
            return {};
    }
}

bool is_dereference(const Expr& e) {
    const Expr& s = strip_casts(e);
    switch (s.kind) {
        case ExprKind::unary:
            return s.text == "*";
        case ExprKind::index:
            return true;
        case ExprKind::member:
            return s.text == "->" || is_dereference(s.children[0]);
        default:
            return false;
    }
}

bool is_literal_constant(const Expr& e) {
    const Expr& s = strip_casts(e);
    switch (s.kind) {
        case ExprKind::number:
        case ExprKind::string_literal:
        case ExprKind::char_literal:
        case ExprKind::boolean:
            return true;
        case ExprKind::unary:
            return (s.text == "-" || s.text == "+" || s.text == "~") && is_literal_constant(s.children[0]);
        default:
            return false;
    }
}

std::string callee_name(const Expr& call) {
    if (call.kind != ExprKind::call || call.children.empty()) return {};
    const Expr& f = call.children[0];
    if (f.kind == ExprKind::identifier) return f.text;
    return "<indirect>";
}

// ---------------------------------------------------------------------------
// Printing

namespace {

constexpr int kPrecComma = 1;
constexpr int kPrecAssign = 2;
constexpr int kPrecTernary = 3;
constexpr int kPrecUnary = 14;
constexpr int kPrecPostfix = 15;
constexpr int kPrecPrimary = 16;

int binary_prec(std::string_view op) {
    if (op == "||") return 4;
    if (op == "&&") return 5;
    if (op == "|") return 6;
    if (op == "^") return 7;
    if (op == "&") return 8;
    if (op == "==" || op == "!=") return 9;
    if (op == "<" || op == ">" || op == "<=" || op == ">=") return 10;
    if (op == "<<" || op == ">>") return 11;
    if (op == "+" || op == "-") return 12;
    if (op == "*" || op == "/" || op == "%") return 13;
    return -1;
}

int expr_prec(const Expr& e) {
    switch (e.kind) {
        case ExprKind::comma: return kPrecComma;
        case ExprKind::assign: return kPrecAssign;
        case ExprKind::ternary: return kPrecTernary;
        case ExprKind::binary: return binary_prec(e.text);
        case ExprKind::unary: return e.postfix ? kPrecPostfix : kPrecUnary;
        case ExprKind::cast:
        case ExprKind::size_of: return kPrecUnary;
        case ExprKind::call:
        case ExprKind::index:
        case ExprKind::member: return kPrecPostfix;
        default: return kPrecPrimary;
    }
}

std::string print(const Expr& e, int ctx);

std::string print_list(const std::vector<Expr>& xs, std::size_t from) {
    std::string s;
    for (std::size_t i = from; i < xs.size(); ++i) {
        if (i > from) s += ", ";
        s += print(xs[i], kPrecAssign);
    }
    return s;
}

std::string render(const Expr& e) {
    switch (e.kind) {
        case ExprKind::none:
            return "";
        case ExprKind::identifier:
        case ExprKind::number:
        case ExprKind::string_literal:
        case ExprKind::char_literal:
        case ExprKind::boolean:
            return e.text;
        case ExprKind::unary: {
            if (e.postfix) return print(e.children[0], kPrecPostfix) + e.text;
            std::string operand = print(e.children[0], kPrecUnary);
            if (!operand.empty() && (operand[0] == e.text.back() || operand[0] == e.text.front())) {
                return e.text + " " + operand;
            }
            return e.text + operand;
        }
        case ExprKind::binary: {
            int p = binary_prec(e.text);
            return print(e.children[0], p) + " " + e.text + " " + print(e.children[1], p + 1);
        }
        case ExprKind::assign:
            return print(e.children[0], kPrecUnary) + " " + e.text + " " + print(e.children[1], kPrecAssign);
        case ExprKind::ternary:
            return print(e.children[0], kPrecTernary + 1) + " ? " + print(e.children[1], kPrecComma) + " : " +
                   print(e.children[2], kPrecTernary);
        case ExprKind::call:
            return print(e.children[0], kPrecPostfix) + "(" + print_list(e.children, 1) + ")";
        case ExprKind::index:
            return print(e.children[0], kPrecPostfix) + "[" + print(e.children[1], kPrecComma) + "]";
        case ExprKind::member:
            return print(e.children[0], kPrecPostfix) + e.text + e.field;
        case ExprKind::cast:
            return "(" + e.type_text + ")" + print(e.children[0], kPrecUnary);
        case ExprKind::size_of:
            if (!e.type_text.empty()) return "sizeof(" + e.type_text + ")";
            return "sizeof(" + print(e.children[0], kPrecComma) + ")";
        case ExprKind::comma:
            return print_list(e.children, 0);
        case ExprKind::init_list:
            return "{" + print_list(e.children, 0) + "}";
    }
    return "";
}

std::string print(const Expr& e, int ctx) {
    std::string s = render(e);
    if (expr_prec(e) < ctx) return "(" + s + ")";
    return s;
}

}  // namespace

std::string to_string(const Expr& e) { return print(e, kPrecComma); }

// ---------------------------------------------------------------------------
// Parser

namespace {

bool is_assign_op(std::string_view t) {
    return t == "=" || t == "+=" || t == "-=" || t == "*=" || t == "/=" || t == "%=" || t == "&=" ||
           t == "|=" || t == "^=" || t == "<<=" || t == ">>=";
}

std::string normalize_ws(std::string_view s) {
    std::string out;
    bool space = false;
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            space = !out.empty();
            continue;
        }
        if (space) out += ' ';
        space = false;
        out += c;
    }
    return out;
}

class Parser {
public:
    Parser(std::string_view src, std::vector<Token> toks) : src_(src), toks_(std::move(toks)) {}

    FunctionIR parse_function();
    Expr parse_standalone_expr();

private:
    const Token& peek(std::size_t k = 0) const {
        std::size_t i = std::min(pos_ + k, toks_.size() - 1);
        return toks_[i];
    }
    bool at_punct(std::string_view p, std::size_t k = 0) const {
        const Token& t = peek(k);
        return t.kind == TokKind::punct && t.text == p;
    }
    bool at_ident(std::string_view w, std::size_t k = 0) const {
        const Token& t = peek(k);
        return t.kind == TokKind::ident && t.text == w;
    }
    bool at_end() const { return peek().kind == TokKind::end; }
    const Token& next() {
        const Token& t = toks_[pos_];
        if (pos_ + 1 < toks_.size()) ++pos_;
        return t;
    }
    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError(msg + " near '" + peek().text + "'", peek().line);
    }
    void expect(std::string_view p) {
        if (!at_punct(p)) fail("expected '" + std::string(p) + "'");
        next();
    }

    // statements
    void parse_items_until_brace(std::vector<Stmt>& out);
    void parse_stmt(std::vector<Stmt>& out);
    void parse_stmt_inner(std::vector<Stmt>& out);
    std::vector<Stmt> parse_sub_stmt();
    void opaque_skip(std::vector<Stmt>& out, std::size_t start);
    bool looks_like_decl() const;
    void parse_decl(std::vector<Stmt>& out);
    void parse_asm(std::vector<Stmt>& out);
    void append_expr_stmt(std::vector<Stmt>& out, Expr e, int line);

    // expressions
    Expr parse_expr();
    Expr parse_assign();
    Expr parse_ternary();
    Expr parse_binary(int min_prec);
    Expr parse_unary();
    Expr parse_postfix();
    Expr parse_primary();
    Expr parse_initializer();
    std::optional<std::string> try_type_in_parens(std::size_t& end_pos) const;

    std::string source_text(std::size_t from_tok, std::size_t to_tok) const {
        if (from_tok >= to_tok) return {};
        auto b = toks_[from_tok].begin;
        auto e = toks_[to_tok - 1].end;
        return normalize_ws(src_.substr(b, e - b));
    }

    std::string_view src_;
    std::vector<Token> toks_;
    std::size_t pos_ = 0;
};

// Type names in casts and sizeof: identifiers/keywords followed by stars.
std::optional<std::string> Parser::try_type_in_parens(std::size_t& end_pos) const {
    if (!at_punct("(")) return std::nullopt;
    std::size_t k = 1;
    std::vector<std::string> words;
    int stars = 0;
    bool saw_known = false;
    while (true) {
        const Token& t = peek(k);
        if (t.kind == TokKind::ident && stars == 0) {
            if (detail::is_keyword(t.text) && !detail::is_type_keyword(t.text) && t.text != "bool") {
                return std::nullopt;
            }
            if (detail::is_known_type_name(t.text)) saw_known = true;
            words.push_back(t.text);
            ++k;
        } else if (t.kind == TokKind::punct && t.text == "*" && !words.empty()) {
            ++stars;
            ++k;
        } else if (t.kind == TokKind::ident && stars > 0 && t.text == "const") {
            ++k;
        } else {
            break;
        }
    }
    if (words.empty() || !at_punct(")", k)) return std::nullopt;
    if (!(saw_known || stars > 0 || words.size() >= 2)) return std::nullopt;
    std::string type;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i) type += ' ';
        type += words[i];
    }
    if (stars > 0) type += " " + std::string(static_cast<std::size_t>(stars), '*');
    end_pos = k + 1;  // relative offset past ')'
    return type;
}

Expr Parser::parse_standalone_expr() {
    Expr e = parse_expr();
    if (!at_end()) fail("trailing tokens in expression");
    return e;
}

Expr Parser::parse_expr() {
    Expr first = parse_assign();
    if (!at_punct(",")) return first;
    Expr c;
    c.kind = ExprKind::comma;
    c.children.push_back(std::move(first));
    while (at_punct(",")) {
        next();
        c.children.push_back(parse_assign());
    }
    return c;
}

Expr Parser::parse_assign() {
    Expr lhs = parse_ternary();
    if (peek().kind == TokKind::punct && is_assign_op(peek().text)) {
        std::string op = next().text;
        Expr rhs = parse_assign();
        Expr a;
        a.kind = ExprKind::assign;
        a.text = op;
        a.children.push_back(std::move(lhs));
        a.children.push_back(std::move(rhs));
        return a;
    }
    return lhs;
}

Expr Parser::parse_ternary() {
    Expr cond = parse_binary(4);
    if (!at_punct("?")) return cond;
    next();
    Expr a = parse_expr();
    expect(":");
    Expr b = parse_ternary();
    Expr t;
    t.kind = ExprKind::ternary;
    t.children = {std::move(cond), std::move(a), std::move(b)};
    return t;
}

Expr Parser::parse_binary(int min_prec) {
    Expr lhs = parse_unary();
    while (true) {
        const Token& t = peek();
        if (t.kind != TokKind::punct) break;
        int p = binary_prec(t.text);
        if (p < 0 || p < min_prec) break;
        std::string op = next().text;
        Expr rhs = parse_binary(p + 1);
        Expr b;
        b.kind = ExprKind::binary;
        b.text = op;
        b.children.push_back(std::move(lhs));
        b.children.push_back(std::move(rhs));
        lhs = std::move(b);
    }
    return lhs;
}

Expr Parser::parse_unary() {
    const Token& t = peek();
    if (t.kind == TokKind::punct) {
        if (t.text == "++" || t.text == "--" || t.text == "&" || t.text == "*" || t.text == "-" ||
            t.text == "+" || t.text == "!" || t.text == "~") {
            std::string op = next().text;
            Expr u;
            u.kind = ExprKind::unary;
            u.text = op;
            u.children.push_back(parse_unary());
            return u;
        }
        if (t.text == "(") {
            std::size_t rel = 0;
            if (auto type = try_type_in_parens(rel)) {
                const Token& after = peek(rel);
                bool starts_operand =
                    after.kind == TokKind::ident || after.kind == TokKind::number ||
                    after.kind == TokKind::string_lit || after.kind == TokKind::char_lit ||
                    (after.kind == TokKind::punct &&
                     (after.text == "(" || after.text == "*" || after.text == "&" || after.text == "-" ||
                      after.text == "+" || after.text == "!" || after.text == "~" || after.text == "++" ||
                      after.text == "--"));
                if (starts_operand) {
                    pos_ += rel;
                    Expr c;
                    c.kind = ExprKind::cast;
                    c.type_text = *type;
                    c.children.push_back(parse_unary());
                    return c;
                }
            }
        }
    }
    if (t.kind == TokKind::ident && t.text == "sizeof") {
        next();
        Expr s;
        s.kind = ExprKind::size_of;
        std::size_t rel = 0;
        if (auto type = try_type_in_parens(rel)) {
            pos_ += rel;
            s.type_text = *type;
            return s;
        }
        s.children.push_back(parse_unary());
        return s;
    }
    return parse_postfix();
}

Expr Parser::parse_postfix() {
    Expr e = parse_primary();
    while (true) {
        if (at_punct("(")) {
            next();
            Expr call;
            call.kind = ExprKind::call;
            call.children.push_back(std::move(e));
            if (!at_punct(")")) {
                call.children.push_back(parse_assign());
                while (at_punct(",")) {
                    next();
                    call.children.push_back(parse_assign());
                }
            }
            expect(")");
            e = std::move(call);
        } else if (at_punct("[")) {
            next();
            Expr idx;
            idx.kind = ExprKind::index;
            idx.children.push_back(std::move(e));
            idx.children.push_back(parse_expr());
            expect("]");
            e = std::move(idx);
        } else if (at_punct(".") || at_punct("->")) {
            std::string op = next().text;
            if (peek().kind != TokKind::ident && peek().kind != TokKind::number) fail("expected member name");
            Expr m;
            m.kind = ExprKind::member;
            m.text = op;
            m.field = next().text;
            m.children.push_back(std::move(e));
            e = std::move(m);
        } else if (at_punct("++") || at_punct("--")) {
            Expr u;
            u.kind = ExprKind::unary;
            u.text = next().text;
            u.postfix = true;
            u.children.push_back(std::move(e));
            e = std::move(u);
        } else {
            break;
        }
    }
    return e;
}

Expr Parser::parse_primary() {
    const Token& t = peek();
    Expr e;
    switch (t.kind) {
        case TokKind::ident:
            if (detail::is_keyword(t.text) && t.text != "true" && t.text != "false") {
                fail("unexpected keyword");
            }
            e.kind = (t.text == "true" || t.text == "false") ? ExprKind::boolean : ExprKind::identifier;
            e.text = next().text;
            return e;
        case TokKind::number:
            e.kind = ExprKind::number;
            e.text = next().text;
            return e;
        case TokKind::char_lit:
            e.kind = ExprKind::char_literal;
            e.text = next().text;
            return e;
        case TokKind::string_lit:
            e.kind = ExprKind::string_literal;
            e.text = next().text;
            while (peek().kind == TokKind::string_lit) e.text += " " + next().text;
            return e;
        case TokKind::punct:
            if (t.text == "(") {
                next();
                Expr inner = parse_expr();
                expect(")");
                return inner;
            }
            break;
        case TokKind::end:
            break;
    }
    fail("unexpected token");
}

Expr Parser::parse_initializer() {
    if (!at_punct("{")) return parse_assign();
    next();
    Expr list;
    list.kind = ExprKind::init_list;
    while (!at_punct("}")) {
        list.children.push_back(parse_initializer());
        if (at_punct(",")) {
            next();
        } else {
            break;
        }
    }
    expect("}");
    return list;
}

void fill_sets(Stmt& s) {
    s.reads.clear();
    s.writes.clear();
    s.address_of.clear();
    s.derefs.clear();
    auto merge = [&](const ExprInfo& info) {
        s.reads.insert(info.reads.begin(), info.reads.end());
        s.derefs.insert(info.derefs.begin(), info.derefs.end());
        s.address_of.insert(info.address_of.begin(), info.address_of.end());
    };
    switch (s.kind) {
        case StmtKind::assign: {
            merge(analyze_expr(s.value));
            auto base = base_identifier(s.lhs);
            if (s.op != "=" && !base.empty()) s.reads.insert(base);
            if (!base.empty()) {
                s.writes.insert(base);
                if (is_dereference(s.lhs)) s.derefs.insert(base);
            }
            break;
        }
        case StmtKind::call: {
            merge(analyze_expr(s.value));
            if (!s.lhs.empty()) {
                auto base = base_identifier(s.lhs);
                if (!base.empty()) {
                    s.writes.insert(base);
                    if (is_dereference(s.lhs)) s.derefs.insert(base);
                }
            }
            for (std::size_t i = 1; i < s.value.children.size(); ++i) {
                const Expr& arg = strip_casts(s.value.children[i]);
                if (arg.kind == ExprKind::unary && arg.text == "&") {
                    if (auto b = base_identifier(arg); !b.empty()) s.writes.insert(b);
                }
            }
            break;
        }
        case StmtKind::if_:
        case StmtKind::loop:
        case StmtKind::ret:
            merge(analyze_expr(s.value));
            break;
        case StmtKind::decl:
            break;
        case StmtKind::opaque:
            // filled by the caller from the token scan
            break;
    }
}

void Parser::append_expr_stmt(std::vector<Stmt>& out, Expr e, int line) {
    if (e.kind == ExprKind::comma) {
        for (auto& c : e.children) append_expr_stmt(out, std::move(c), line);
        return;
    }
    Stmt s;
    s.line = line;
    s.cond_line = line;
    if (e.kind == ExprKind::assign) {
        const Expr& rhs = strip_casts(e.children[1]);
        if (e.text == "=" && rhs.kind == ExprKind::call) {
            s.kind = StmtKind::call;
            s.op = "=";
            s.lhs = std::move(e.children[0]);
            s.value = rhs;
        } else {
            s.kind = StmtKind::assign;
            s.op = e.text;
            s.lhs = std::move(e.children[0]);
            s.value = std::move(e.children[1]);
        }
    } else if (e.kind == ExprKind::call) {
        s.kind = StmtKind::call;
        s.value = std::move(e);
    } else if (e.kind == ExprKind::unary && (e.text == "++" || e.text == "--")) {
        s.kind = StmtKind::assign;
        s.op = e.text == "++" ? "+=" : "-=";
        s.lhs = std::move(e.children[0]);
        s.value.kind = ExprKind::number;
        s.value.text = "1";
    } else {
        s.kind = StmtKind::opaque;
        s.text = to_string(e);
        s.reads = identifiers(e);
        s.writes = s.reads;
        out.push_back(std::move(s));
        return;
    }
    fill_sets(s);
    out.push_back(std::move(s));
}

bool Parser::looks_like_decl() const {
    const Token& t0 = peek();
    if (t0.kind != TokKind::ident) return false;
    if (detail::is_type_keyword(t0.text) || t0.text == "bool") return true;
    if (detail::is_keyword(t0.text)) return false;
    const Token& t1 = peek(1);
    if (t1.kind == TokKind::ident && !detail::is_keyword(t1.text)) return true;
    if (t1.kind == TokKind::ident && detail::is_type_keyword(t1.text)) return true;
    if (t1.kind == TokKind::punct && t1.text == "*") {
        std::size_t k = 1;
        while (at_punct("*", k)) ++k;
        if (peek(k).kind != TokKind::ident) return false;
        const Token& after = peek(k + 1);
        return after.kind == TokKind::punct &&
               (after.text == ";" || after.text == "=" || after.text == "[" || after.text == ",");
    }
    return false;
}

void Parser::parse_decl(std::vector<Stmt>& out) {
    const std::size_t start = pos_;
    const int line = peek().line;
    std::vector<std::string> words;
    while (peek().kind == TokKind::ident) words.push_back(next().text);
    std::string base;
    std::optional<std::string> first_name;
    if (!at_punct("*")) {
        if (words.size() < 2 || !(at_punct(";") || at_punct("=") || at_punct("[") || at_punct(","))) {
            pos_ = start;
            opaque_skip(out, start);
            return;
        }
        first_name = words.back();
        words.pop_back();
    }
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i) base += ' ';
        base += words[i];
    }

    bool first = true;
    while (true) {
        int stars = 0;
        std::string name;
        if (first && first_name) {
            name = *first_name;
        } else {
            while (at_punct("*")) {
                next();
                ++stars;
                while (at_ident("const")) next();
            }
            if (peek().kind != TokKind::ident) fail("expected declarator name");
            name = next().text;
        }
        first = false;
        std::string dims;
        while (at_punct("[")) {
            next();
            if (at_punct("]")) {
                dims += "[]";
            } else {
                dims += "[" + to_string(parse_expr()) + "]";
            }
            expect("]");
        }
        std::string type = base;
        if (stars > 0) type += " " + std::string(static_cast<std::size_t>(stars), '*');
        if (!dims.empty()) type += " " + dims;

        Stmt d;
        d.kind = StmtKind::decl;
        d.line = line;
        d.cond_line = line;
        d.name = name;
        d.type_text = type;
        out.push_back(std::move(d));

        if (at_punct("=")) {
            next();
            Expr init = parse_initializer();
            Expr a;
            a.kind = ExprKind::assign;
            a.text = "=";
            a.children.push_back(Expr::ident(name));
            a.children.push_back(std::move(init));
            append_expr_stmt(out, std::move(a), line);
        }
        if (at_punct(",")) {
            next();
            continue;
        }
        expect(";");
        return;
    }
}

void Parser::opaque_skip(std::vector<Stmt>& out, std::size_t start) {
    pos_ = start;
    const int line = peek().line;
    int paren = 0;
    std::size_t end_tok = pos_;
    while (!at_end()) {
        const Token& t = peek();
        if (t.kind == TokKind::punct) {
            if (t.text == "(" || t.text == "[") {
                ++paren;
            } else if (t.text == ")" || t.text == "]") {
                --paren;
            } else if (t.text == "}") {
                break;
            } else if (t.text == ";" && paren <= 0) {
                end_tok = pos_;
                next();
                break;
            } else if (t.text == "{") {
                int depth = 0;
                do {
                    if (at_punct("{")) ++depth;
                    if (at_punct("}")) --depth;
                    next();
                } while (depth > 0 && !at_end());
                end_tok = pos_;
                if (paren <= 0) break;
                continue;
            }
        }
        next();
        end_tok = pos_;
    }
    if (end_tok == start) {
        // lone stray token; consume it so parsing makes progress
        next();
        end_tok = pos_;
    }
    Stmt s;
    s.kind = StmtKind::opaque;
    s.line = line;
    s.cond_line = line;
    s.text = source_text(start, end_tok);
    for (std::size_t i = start; i < end_tok; ++i) {
        const Token& t = toks_[i];
        if (t.kind == TokKind::ident && !detail::is_keyword(t.text)) s.reads.insert(t.text);
    }
    s.writes = s.reads;
    out.push_back(std::move(s));
}

void Parser::parse_asm(std::vector<Stmt>& out) {
    const std::size_t start = pos_;
    const int line = peek().line;
    next();
    while (at_ident("volatile") || at_ident("__volatile__") || at_ident("goto")) next();
    auto skip_balanced = [&](std::string_view open, std::string_view close) {
        int depth = 0;
        do {
            if (at_punct(open)) ++depth;
            if (at_punct(close)) --depth;
            next();
        } while (depth > 0 && !at_end());
    };
    if (at_punct("(")) {
        skip_balanced("(", ")");
    } else if (at_punct("{")) {
        skip_balanced("{", "}");
    } else {
        while (!at_end() && !at_punct(";") && !at_punct("}")) next();
    }
    const std::size_t end_tok = pos_;
    if (at_punct(";")) next();
    Stmt s;
    s.kind = StmtKind::opaque;
    s.line = line;
    s.cond_line = line;
    s.text = source_text(start, end_tok);
    for (std::size_t i = start + 1; i < end_tok; ++i) {
        const Token& t = toks_[i];
        if (t.kind == TokKind::ident && !detail::is_keyword(t.text) && t.text != "__volatile__") {
            s.reads.insert(t.text);
        }
    }
    s.writes = s.reads;
    out.push_back(std::move(s));
}

std::vector<Stmt> Parser::parse_sub_stmt() {
    std::vector<Stmt> body;
    parse_stmt(body);
    return body;
}

void Parser::parse_items_until_brace(std::vector<Stmt>& out) {
    while (!at_end() && !at_punct("}")) parse_stmt(out);
}

void Parser::parse_stmt(std::vector<Stmt>& out) {
    const std::size_t start = pos_;
    const std::size_t before = out.size();
    try {
        parse_stmt_inner(out);
    } catch (const ParseError&) {
        out.resize(before);
        opaque_skip(out, start);
    }
}

void Parser::parse_stmt_inner(std::vector<Stmt>& out) {
    const Token& t = peek();
    const int line = t.line;
    if (t.kind == TokKind::punct) {
        if (t.text == ";") {
            next();
            return;
        }
        if (t.text == "{") {
            next();
            parse_items_until_brace(out);
            expect("}");
            return;
        }
    }
    if (t.kind == TokKind::ident) {
        const std::string& w = t.text;
        if (w == "if") {
            next();
            expect("(");
            Stmt s;
            s.kind = StmtKind::if_;
            s.line = line;
            s.cond_line = line;
            s.value = parse_expr();
            expect(")");
            s.body = parse_sub_stmt();
            if (at_ident("else")) {
                next();
                s.else_body = parse_sub_stmt();
            }
            fill_sets(s);
            out.push_back(std::move(s));
            return;
        }
        if (w == "while") {
            next();
            expect("(");
            Stmt s;
            s.kind = StmtKind::loop;
            s.line = line;
            s.cond_line = line;
            s.value = parse_expr();
            expect(")");
            s.body = parse_sub_stmt();
            fill_sets(s);
            out.push_back(std::move(s));
            return;
        }
        if (w == "do") {
            next();
            Stmt s;
            s.kind = StmtKind::loop;
            s.do_while = true;
            s.line = line;
            s.body = parse_sub_stmt();
            if (!at_ident("while")) fail("expected 'while' after do body");
            s.cond_line = peek().line;
            next();
            expect("(");
            s.value = parse_expr();
            expect(")");
            expect(";");
            fill_sets(s);
            out.push_back(std::move(s));
            return;
        }
        if (w == "for") {
            next();
            expect("(");
            std::vector<Stmt> init;
            if (looks_like_decl()) {
                parse_decl(init);
            } else {
                if (!at_punct(";")) append_expr_stmt(init, parse_expr(), line);
                expect(";");
            }
            Stmt s;
            s.kind = StmtKind::loop;
            s.line = line;
            s.cond_line = line;
            if (at_punct(";")) {
                s.value.kind = ExprKind::boolean;
                s.value.text = "true";
            } else {
                s.value = parse_expr();
            }
            expect(";");
            std::vector<Stmt> step;
            if (!at_punct(")")) append_expr_stmt(step, parse_expr(), line);
            expect(")");
            std::vector<Stmt> body = parse_sub_stmt();
            s.body = std::move(step);
            for (auto& b : body) s.body.push_back(std::move(b));
            fill_sets(s);
            for (auto& i : init) out.push_back(std::move(i));
            out.push_back(std::move(s));
            return;
        }
        if (w == "return") {
            next();
            Stmt s;
            s.kind = StmtKind::ret;
            s.line = line;
            s.cond_line = line;
            if (!at_punct(";")) s.value = parse_expr();
            expect(";");
            fill_sets(s);
            out.push_back(std::move(s));
            return;
        }
        if (w == "switch") {
            next();
            expect("(");
            Stmt s;
            s.kind = StmtKind::opaque;
            s.line = line;
            s.cond_line = line;
            s.value = parse_expr();
            expect(")");
            s.text = "switch (" + to_string(s.value) + ")";
            s.reads = identifiers(s.value);
            s.writes = s.reads;
            s.body = parse_sub_stmt();
            out.push_back(std::move(s));
            return;
        }
        if (w == "case") {
            next();
            int depth = 0;
            while (!at_end() && !(depth == 0 && at_punct(":"))) {
                if (at_punct("(")) ++depth;
                if (at_punct(")")) --depth;
                next();
            }
            expect(":");
            return;
        }
        if (w == "default" && at_punct(":", 1)) {
            next();
            next();
            return;
        }
        if (w == "asm" || w == "__asm__" || w == "__asm") {
            parse_asm(out);
            return;
        }
        if (w == "goto" || w == "break" || w == "continue") {
            opaque_skip(out, pos_);
            return;
        }
        if (!detail::is_keyword(w) && at_punct(":", 1)) {
            next();
            next();
            return;
        }
        if (looks_like_decl()) {
            if (detail::is_type_keyword(w) && at_punct("(", 1)) {
                opaque_skip(out, pos_);
                return;
            }
            parse_decl(out);
            return;
        }
    }
    Expr e = parse_expr();
    expect(";");
    append_expr_stmt(out, std::move(e), line);
}

std::vector<Param> parse_params(const std::vector<Token>& header) {
    std::vector<Param> params;
    // last top-level parenthesized group
    std::ptrdiff_t close = -1;
    for (std::ptrdiff_t i = static_cast<std::ptrdiff_t>(header.size()) - 1; i >= 0; --i) {
        if (header[static_cast<std::size_t>(i)].kind == TokKind::punct && header[static_cast<std::size_t>(i)].text == ")") {
            close = i;
            break;
        }
    }
    if (close < 0) return params;
    int depth = 0;
    std::ptrdiff_t open = -1;
    for (std::ptrdiff_t i = close; i >= 0; --i) {
        const auto& t = header[static_cast<std::size_t>(i)];
        if (t.kind != TokKind::punct) continue;
        if (t.text == ")") ++depth;
        if (t.text == "(") {
            if (--depth == 0) {
                open = i;
                break;
            }
        }
    }
    if (open < 0) return params;
    std::vector<std::vector<const Token*>> groups(1);
    depth = 0;
    for (std::ptrdiff_t i = open + 1; i < close; ++i) {
        const auto& t = header[static_cast<std::size_t>(i)];
        if (t.kind == TokKind::punct && (t.text == "(" || t.text == "[")) ++depth;
        if (t.kind == TokKind::punct && (t.text == ")" || t.text == "]")) --depth;
        if (depth == 0 && t.kind == TokKind::punct && t.text == ",") {
            groups.emplace_back();
            continue;
        }
        groups.back().push_back(&t);
    }
    for (const auto& g : groups) {
        if (g.empty()) continue;
        if (g.size() == 1 && g[0]->text == "void") continue;
        if (g.size() == 1 && g[0]->text == "...") {
            params.push_back({"...", "..."});
            continue;
        }
        std::ptrdiff_t name_at = -1;
        for (std::ptrdiff_t i = static_cast<std::ptrdiff_t>(g.size()) - 1; i >= 0; --i) {
            if (g[static_cast<std::size_t>(i)]->kind == TokKind::ident) {
                name_at = i;
                break;
            }
        }
        Param p;
        std::string type;
        std::string suffix;
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (static_cast<std::ptrdiff_t>(i) == name_at && (i > 0)) {
                p.name = g[i]->text;
                continue;
            }
            std::string& dst = (name_at >= 0 && static_cast<std::ptrdiff_t>(i) > name_at && i > 0) ? suffix : type;
            if (g[i]->text == "*") {
                if (!dst.empty() && dst.back() != '*') dst += ' ';
                dst += '*';
            } else {
                if (!dst.empty() && g[i]->text != "[" && g[i]->text != "]" && dst.back() != '[') dst += ' ';
                dst += g[i]->text;
            }
        }
        if (!suffix.empty()) type += " " + suffix;
        p.type = type;
        params.push_back(std::move(p));
    }
    return params;
}

FunctionIR Parser::parse_function() {
    // top-level brace balance
    int depth = 0;
    for (const auto& t : toks_) {
        if (t.kind != TokKind::punct) continue;
        if (t.text == "{") ++depth;
        if (t.text == "}") {
            if (--depth < 0) throw ParseError("unbalanced '}'", t.line);
        }
    }
    if (depth != 0) throw ParseError("unbalanced '{'", toks_.back().line);

    FunctionIR ir;
    std::size_t open = toks_.size();
    for (std::size_t i = 0; i < toks_.size(); ++i) {
        if (toks_[i].kind == TokKind::punct && toks_[i].text == "{") {
            open = i;
            break;
        }
    }
    if (open == toks_.size()) {
        // bare statement list
        while (!at_end()) {
            if (at_punct("}")) {
                next();
                continue;
            }
            parse_stmt(ir.stmts);
        }
        return ir;
    }
    std::vector<Token> header(toks_.begin(), toks_.begin() + static_cast<std::ptrdiff_t>(open));
    if (!header.empty()) {
        ir.header = source_text(0, open);
        ir.header_line = header.front().line;
        ir.params = parse_params(header);
    } else {
        ir.header_line = toks_[open].line;
    }
    pos_ = open + 1;
    parse_items_until_brace(ir.stmts);
    expect("}");
    return ir;
}

}  // namespace

Expr parse_expression(std::string_view text) {
    Parser p(text, detail::lex(text));
    return p.parse_standalone_expr();
}

FunctionIR parse_function(std::string_view body_text) {
    Parser p(body_text, detail::lex(body_text));
    return p.parse_function();
}

// ---------------------------------------------------------------------------
// Queries over parsed functions

std::vector<const Expr*> stmt_exprs(const Stmt& s) {
    std::vector<const Expr*> out;
    if (!s.lhs.empty()) out.push_back(&s.lhs);
    if (!s.value.empty()) out.push_back(&s.value);
    return out;
}

void collect_calls(const Expr& e, std::vector<const Expr*>& out) {
    if (e.kind == ExprKind::call) out.push_back(&e);
    for (const auto& c : e.children) collect_calls(c, out);
}

namespace {

void gather_sites(const std::vector<Stmt>& stmts, std::optional<std::string_view> callee,
                  std::vector<CallSite>& out) {
    for_each_stmt(stmts, [&](const Stmt& s) {
        std::vector<const Expr*> calls;
        for (const Expr* e : stmt_exprs(s)) collect_calls(*e, calls);
        const int line = s.kind == StmtKind::loop ? s.cond_line : s.line;
        for (const Expr* c : calls) {
            std::string name = callee_name(*c);
            if (callee && name != *callee) continue;
            CallSite site;
            site.line = line;
            site.callee = std::move(name);
            site.args.assign(c->children.begin() + 1, c->children.end());
            if (s.kind == StmtKind::call || s.kind == StmtKind::assign) site.lhs = s.lhs;
            out.push_back(std::move(site));
        }
    });
    std::stable_sort(out.begin(), out.end(), [](const CallSite& a, const CallSite& b) { return a.line < b.line; });
}

}  // namespace

std::vector<CallSite> call_sites(const FunctionIR& ir, std::string_view callee) {
    std::vector<CallSite> out;
    gather_sites(ir.stmts, callee, out);
    return out;
}

std::vector<CallSite> all_call_sites(const FunctionIR& ir) {
    std::vector<CallSite> out;
    gather_sites(ir.stmts, std::nullopt, out);
    return out;
}

std::size_t count_statements(const std::vector<Stmt>& stmts) {
    std::size_t n = 0;
    for_each_stmt(stmts, [&](const Stmt&) { ++n; });
    return n;
}

namespace {

class LinePrinter {
public:
    void at(int line, const std::string& text) {
        while (cur_ < line) {
            out_ += '\n';
            ++cur_;
            fresh_ = true;
        }
        if (!fresh_) out_ += ' ';
        out_ += text;
        fresh_ = false;
    }
    void append(const std::string& text) { at(cur_, text); }
    std::string take() { return std::move(out_); }

private:
    std::string out_;
    int cur_ = 1;
    bool fresh_ = true;
};

std::string decl_text(const Stmt& s) {
    // type_text = base [" " stars] [" " dims]
    std::string base = s.type_text;
    std::string stars;
    std::string dims;
    if (auto b = base.find(" ["); b != std::string::npos) {
        dims = base.substr(b + 1);
        base.resize(b);
    }
    if (auto st = base.find(" *"); st != std::string::npos) {
        stars = base.substr(st + 1);
        base.resize(st);
    }
    return base + " " + stars + s.name + dims + ";";
}

void print_stmts(const std::vector<Stmt>& stmts, LinePrinter& lp);

void print_stmt(const Stmt& s, LinePrinter& lp) {
    switch (s.kind) {
        case StmtKind::assign:
            lp.at(s.line, to_string(s.lhs) + " " + s.op + " " + print(s.value, kPrecAssign) + ";");
            return;
        case StmtKind::call:
            if (!s.lhs.empty()) {
                lp.at(s.line, to_string(s.lhs) + " = " + to_string(s.value) + ";");
            } else {
                lp.at(s.line, to_string(s.value) + ";");
            }
            return;
        case StmtKind::decl:
            lp.at(s.line, decl_text(s));
            return;
        case StmtKind::ret:
            lp.at(s.line, s.value.empty() ? "return;" : "return " + to_string(s.value) + ";");
            return;
        case StmtKind::if_:
            lp.at(s.line, "if (" + to_string(s.value) + ") {");
            print_stmts(s.body, lp);
            lp.append("}");
            if (!s.else_body.empty()) {
                lp.append("else {");
                print_stmts(s.else_body, lp);
                lp.append("}");
            }
            return;
        case StmtKind::loop:
            if (s.do_while) {
                lp.at(s.line, "do {");
                print_stmts(s.body, lp);
                lp.at(s.cond_line, "} while (" + to_string(s.value) + ");");
            } else {
                lp.at(s.line, "while (" + to_string(s.value) + ") {");
                print_stmts(s.body, lp);
                lp.append("}");
            }
            return;
        case StmtKind::opaque:
            if (s.text.starts_with("switch")) {
                lp.at(s.line, s.text + " {");
                print_stmts(s.body, lp);
                lp.append("}");
            } else {
                lp.at(s.line, s.text + ";");
            }
            return;
    }
}

void print_stmts(const std::vector<Stmt>& stmts, LinePrinter& lp) {
    for (const auto& s : stmts) print_stmt(s, lp);
}

}  // namespace

std::string print_function(const FunctionIR& ir) {
    LinePrinter lp;
    if (!ir.header.empty()) {
        lp.at(ir.header_line, ir.header + " {");
    } else {
        lp.at(ir.header_line, "{");
    }
    print_stmts(ir.stmts, lp);
    lp.append("}");
    return lp.take() + "\n";
}

}  // namespace taintchain::pseudoc
