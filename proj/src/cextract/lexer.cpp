#include "lexer.hpp"

#include "trop/error.hpp"

#include <array>
#include <cctype>

namespace trop::cextract {

namespace {

constexpr std::array<std::string_view, 36> keywords = {
    "auto",    "break",  "case",     "char",  "const",    "continue", "default",  "do",     "double",
    "else",    "enum",   "extern",   "float", "for",      "goto",     "if",       "inline", "int",
    "long",    "register", "restrict", "return", "short", "signed",   "sizeof",   "static", "struct",
    "switch",  "typedef", "union",   "unsigned", "void",  "volatile", "while",    "_Bool",  "bool",
};

// Longest first within each length class.
constexpr std::array<std::string_view, 46> punctuators = {
    "...", "<<=", ">>=", "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "*=", "/=",
    "%=",  "+=",  "-=",  "&=", "^=", "|=", "[",  "]",  "(",  ")",  "{",  "}",  ".",  "&",  "*",  "+",
    "-",   "~",   "!",   "/",  "%",  "<",  ">",  "^",  "|",  "?",  ":",  ";",  "=",  ",",
};

bool ident_start(char c)
{
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}

bool ident_char(char c)
{
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

} // namespace

bool is_keyword(std::string_view word)
{
    for (auto k : keywords)
        if (k == word)
            return true;
    return false;
}

std::vector<Token> tokenize(std::string_view src, const std::string& unit)
{
    std::vector<Token> out;
    std::size_t i = 0;
    int line = 1;
    int col = 1;
    bool line_start = true;

    auto where = [&](int l, int c) { return unit + ":" + std::to_string(l) + ":" + std::to_string(c); };
    auto advance = [&](std::size_t n) {
        for (std::size_t k = 0; k < n && i < src.size(); ++k, ++i) {
            if (src[i] == '\n') {
                ++line;
                col = 1;
                line_start = true;
            } else {
                ++col;
            }
        }
    };

    while (i < src.size()) {
        const char c = src[i];
        if (c == '\n' || c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v') {
            advance(1);
            continue;
        }
        if (src.compare(i, 2, "//") == 0) {
            while (i < src.size() && src[i] != '\n')
                advance(1);
            continue;
        }
        if (src.compare(i, 2, "/*") == 0) {
            const int l = line, cl = col;
            auto end = src.find("*/", i + 2);
            if (end == std::string_view::npos)
                throw Error(ErrorCode::parse_error, where(l, cl), where(l, cl) + ": unterminated comment");
            advance(end + 2 - i);
            continue;
        }
        if (c == '#' && line_start) {
            const int l = line, cl = col;
            std::size_t end = src.find('\n', i);
            if (end == std::string_view::npos)
                end = src.size();
            std::string_view directive = src.substr(i + 1, end - i - 1);
            auto first = directive.find_first_not_of(" \t");
            directive = first == std::string_view::npos ? std::string_view{} : directive.substr(first);
            if (directive.substr(0, 7) != "include")
                throw Error(ErrorCode::unsupported_construct, where(l, cl),
                            where(l, cl) + ": preprocessor directive other than #include");
            advance(end - i);
            continue;
        }
        line_start = false;

        Token tok;
        tok.line = line;
        tok.col = col;
        const std::size_t start = i;

        if (ident_start(c)) {
            std::size_t n = 1;
            while (i + n < src.size() && ident_char(src[i + n]))
                ++n;
            tok.text = std::string(src.substr(start, n));
            tok.kind = is_keyword(tok.text) ? TokenKind::keyword : TokenKind::identifier;
            advance(n);
        } else if (std::isdigit(static_cast<unsigned char>(c)) ||
                   (c == '.' && i + 1 < src.size() && std::isdigit(static_cast<unsigned char>(src[i + 1])))) {
            std::size_t n = 1;
            while (i + n < src.size()) {
                const char d = src[i + n];
                if (ident_char(d) || d == '.') {
                    ++n;
                } else if ((d == '+' || d == '-') &&
                           (src[i + n - 1] == 'e' || src[i + n - 1] == 'E' || src[i + n - 1] == 'p' ||
                            src[i + n - 1] == 'P')) {
                    ++n;
                } else {
                    break;
                }
            }
            tok.kind = TokenKind::number;
            tok.text = std::string(src.substr(start, n));
            advance(n);
        } else if (c == '"' || c == '\'') {
            std::size_t n = 1;
            while (true) {
                if (i + n >= src.size() || src[i + n] == '\n')
                    throw Error(ErrorCode::parse_error, where(tok.line, tok.col),
                                where(tok.line, tok.col) + ": unterminated literal");
                if (src[i + n] == '\\') {
                    n += 2;
                    continue;
                }
                if (src[i + n] == c) {
                    ++n;
                    break;
                }
                ++n;
            }
            tok.kind = c == '"' ? TokenKind::string_literal : TokenKind::char_literal;
            tok.text = std::string(src.substr(start, n));
            advance(n);
        } else {
            bool matched = false;
            for (auto p : punctuators) {
                if (src.compare(i, p.size(), p) == 0) {
                    tok.kind = TokenKind::punct;
                    tok.text = std::string(p);
                    advance(p.size());
                    matched = true;
                    break;
                }
            }
            if (!matched)
                throw Error(ErrorCode::parse_error, where(line, col),
                            where(line, col) + ": unexpected character '" + std::string(1, c) + "'");
        }
        out.push_back(std::move(tok));
    }

    Token end;
    end.kind = TokenKind::end;
    end.line = line;
    end.col = col;
    out.push_back(end);
    return out;
}

} // namespace trop::cextract
