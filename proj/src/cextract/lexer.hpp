#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace trop::cextract {

enum class TokenKind { identifier, keyword, number, char_literal, string_literal, punct, end };

struct Token {
    TokenKind kind = TokenKind::end;
    std::string text;
    int line = 0;
    int col = 0;
};

bool is_keyword(std::string_view word);

// Throws Error(parse_error / unsupported_construct) with "<unit>:<line>:<col>".
std::vector<Token> tokenize(std::string_view source, const std::string& unit);

} // namespace trop::cextract
