#include "pseudoc_lexer.hpp"

#include "taintchain/pseudoc.hpp"

#include <array>
#include <cctype>

namespace taintchain::pseudoc::detail {

namespace {

constexpr std::array<std::string_view, 24> kPunct3Or2 = {
    "<<=", ">>=", "...", "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=",
    "&&",  "||",  "+=",  "-=", "*=", "/=", "%=", "&=", "|=", "^=", "::", "##"};

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '$'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$'; }
bool digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }

}  // namespace

bool is_type_keyword(std::string_view w) {
    static constexpr std::array<std::string_view, 22> kTypes = {
        "struct", "union",    "enum",   "const",  "volatile", "static", "extern", "register",
        "signed", "unsigned", "void",   "char",   "short",    "int",    "long",   "float",
        "double", "_Bool",    "inline", "typedef", "restrict", "auto"};
    for (auto t : kTypes) {
        if (t == w) return true;
    }
    return false;
}

bool is_keyword(std::string_view w) {
    static constexpr std::array<std::string_view, 17> kOther = {
        "if",   "else",  "while", "for",  "do",   "return", "switch", "case",   "default",
        "break", "continue", "goto", "sizeof", "true", "false", "asm", "__asm__"};
    if (is_type_keyword(w) || w == "__asm" || w == "bool") return true;
    for (auto k : kOther) {
        if (k == w) return true;
    }
    return false;
}

bool is_known_type_name(std::string_view w) {
    if (is_type_keyword(w)) return true;
    static constexpr std::array<std::string_view, 30> kGhidra = {
        "bool",     "byte",      "sbyte",    "word",    "dword",   "qword",   "uint",    "ulong",
        "ushort",   "uchar",     "longlong", "ulonglong", "float10", "code",   "FILE",    "wchar_t",
        "wchar16",  "wchar32",   "pointer",  "string",  "undefined", "BOOL",  "DWORD",   "WORD",
        "BYTE",     "HANDLE",    "LPSTR",    "LPCSTR",  "SOCKET",  "va_list"};
    for (auto t : kGhidra) {
        if (t == w) return true;
    }
    if (w.starts_with("undefined")) return true;
    if (w.size() > 2 && w.ends_with("_t")) return true;
    return false;
}

std::vector<Token> lex(std::string_view src) {
    std::vector<Token> out;
    std::size_t i = 0;
    int line = 1;
    const std::size_t n = src.size();
    bool at_line_start = true;

    auto push = [&](TokKind kind, std::size_t begin, std::size_t end, int tok_line) {
        out.push_back(Token{kind, std::string(src.substr(begin, end - begin)), tok_line, begin, end});
    };

    auto lex_quoted = [&](std::size_t begin, char quote) -> std::size_t {
        std::size_t j = begin;
        while (j < n && src[j] != quote) ++j;  // skip encoding prefix
        ++j;
        while (j < n && src[j] != quote) {
            if (src[j] == '\\' && j + 1 < n) ++j;
            if (src[j] == '\n') {
                throw ParseError("unterminated literal", line);
            }
            ++j;
        }
        if (j >= n) throw ParseError("unterminated literal", line);
        return j + 1;
    };

    while (i < n) {
        char c = src[i];
        if (c == '\n') {
            ++line;
            ++i;
            at_line_start = true;
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        if (c == '#' && at_line_start) {
            while (i < n && src[i] != '\n') ++i;
            continue;
        }
        at_line_start = false;
        if (c == '/' && i + 1 < n && src[i + 1] == '/') {
            while (i < n && src[i] != '\n') ++i;
            continue;
        }
        if (c == '/' && i + 1 < n && src[i + 1] == '*') {
            const int start_line = line;
            i += 2;
            while (i + 1 < n && !(src[i] == '*' && src[i + 1] == '/')) {
                if (src[i] == '\n') ++line;
                ++i;
            }
            if (i + 1 >= n) throw ParseError("unterminated comment", start_line);
            i += 2;
            continue;
        }
        if (c == '"' || c == '\'') {
            std::size_t end = lex_quoted(i, c);
            push(c == '"' ? TokKind::string_lit : TokKind::char_lit, i, end, line);
            i = end;
            continue;
        }
        if (ident_start(c)) {
            std::size_t j = i;
            while (j < n && ident_char(src[j])) ++j;
            std::string_view word = src.substr(i, j - i);
            if (j < n && (src[j] == '"' || src[j] == '\'') &&
                (word == "L" || word == "u" || word == "U" || word == "u8")) {
                char q = src[j];
                std::size_t end = lex_quoted(i, q);
                push(q == '"' ? TokKind::string_lit : TokKind::char_lit, i, end, line);
                i = end;
                continue;
            }
            push(TokKind::ident, i, j, line);
            i = j;
            continue;
        }
        if (digit(c) || (c == '.' && i + 1 < n && digit(src[i + 1]))) {
            std::size_t j = i;
            while (j < n) {
                char d = src[j];
                if (ident_char(d) || d == '.') {
                    ++j;
                } else if ((d == '+' || d == '-') && j > i &&
                           (src[j - 1] == 'e' || src[j - 1] == 'E' || src[j - 1] == 'p' ||
                            src[j - 1] == 'P') &&
                           !(src.substr(i, 2) == "0x" || src.substr(i, 2) == "0X") ) {
                    ++j;
                } else {
                    break;
                }
            }
            push(TokKind::number, i, j, line);
            i = j;
            continue;
        }
        std::size_t len = 1;
        for (auto p : kPunct3Or2) {
            if (src.substr(i, p.size()) == p) {
                len = p.size();
                break;
            }
        }
        push(TokKind::punct, i, i + len, line);
        i += len;
    }
    out.push_back(Token{TokKind::end, "", line, n, n});
    return out;
}

}  // namespace taintchain::pseudoc::detail
