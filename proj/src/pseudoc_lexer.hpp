#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace taintchain::pseudoc::detail {

enum class TokKind { ident, number, string_lit, char_lit, punct, end };

struct Token {
    TokKind kind = TokKind::end;
    std::string text;
    int line = 0;
    std::size_t begin = 0;  // byte offsets into the source
    std::size_t end = 0;
};

/// Throws ParseError on unterminated comments or literals.
std::vector<Token> lex(std::string_view src);

bool is_keyword(std::string_view word);
bool is_type_keyword(std::string_view word);
bool is_known_type_name(std::string_view word);

}  // namespace taintchain::pseudoc::detail
