#pragma once

#include <array>
#include <cctype>
#include <string>
#include <string_view>
#include <vector>

namespace toolgraph {

// Language-agnostic source tokenizer used for dependency extraction,
// structural alignment, and the operation-count metric. Literal values are
// collapsed to class tokens (NUM/STR) so constants do not affect structure;
// comments and whitespace are dropped.
enum class TokenKind {
    identifier, // identifiers and keywords, kept verbatim
    number,     // numeric literal, collapsed to "NUM"
    string,     // string literal, collapsed to "STR"
    op,         // operator or punctuation, verbatim
};

struct Token {
    TokenKind kind;
    std::string text;

    bool operator==(const Token&) const = default;
};

namespace detail {

inline bool is_ident_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}

inline bool is_ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

inline bool is_digit(char c) {
    return std::isdigit(static_cast<unsigned char>(c));
}

// Multi-character operators matched greedily, longest first.
inline constexpr std::array<std::string_view, 21> kMultiOps = {
    "**=", "<<=", ">>=",
    "**", "<<", ">>", "<=", ">=", "==", "!=",
    "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=",
    "->", "&&", "||",
};

} // namespace detail

inline std::vector<Token> tokenize_source(std::string_view source) {
    std::vector<Token> out;
    size_t i = 0;
    const size_t n = source.size();

    auto starts_with = [&](std::string_view prefix) {
        return source.substr(i, prefix.size()) == prefix;
    };

    while (i < n) {
        char c = source[i];

        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }

        // Comments: line (# or //) and block (/* */).
        if (c == '#' || starts_with("//")) {
            while (i < n && source[i] != '\n') ++i;
            continue;
        }
        if (starts_with("/*")) {
            i += 2;
            while (i + 1 < n && !(source[i] == '*' && source[i + 1] == '/')) ++i;
            i = (i + 1 < n) ? i + 2 : n; // unterminated block comment eats the rest
            continue;
        }

        // String literals. Triple-quoted forms span lines; single-quoted
        // forms that never close consume to end of line.
        if (c == '"' || c == '\'') {
            if (starts_with("\"\"\"") || starts_with("'''")) {
                const std::string_view closer = source.substr(i, 3);
                i += 3;
                while (i < n && !starts_with(closer)) {
                    i += (source[i] == '\\' && i + 1 < n) ? 2 : 1;
                }
                i = (i < n) ? i + 3 : n;
            } else {
                const char closer = c;
                ++i;
                bool closed = false;
                while (i < n && source[i] != '\n') {
                    if (source[i] == '\\' && i + 1 < n) {
                        i += 2;
                        continue;
                    }
                    if (source[i] == closer) {
                        ++i;
                        closed = true;
                        break;
                    }
                    ++i;
                }
                (void)closed;
            }
            out.push_back({TokenKind::string, "STR"});
            continue;
        }

        if (detail::is_ident_start(c)) {
            size_t start = i;
            while (i < n && detail::is_ident_char(source[i])) ++i;
            out.push_back({TokenKind::identifier, std::string(source.substr(start, i - start))});
            continue;
        }

        if (detail::is_digit(c)) {
            while (i < n && (detail::is_ident_char(source[i]) || source[i] == '.')) {
                // keep exponent signs attached: 1e-5, 2.5E+10
                if ((source[i] == 'e' || source[i] == 'E') && i + 1 < n &&
                    (source[i + 1] == '+' || source[i + 1] == '-') && i + 2 < n &&
                    detail::is_digit(source[i + 2])) {
                    i += 2;
                }
                ++i;
            }
            out.push_back({TokenKind::number, "NUM"});
            continue;
        }

        bool matched = false;
        for (std::string_view mop : detail::kMultiOps) {
            if (starts_with(mop)) {
                out.push_back({TokenKind::op, std::string(mop)});
                i += mop.size();
                matched = true;
                break;
            }
        }
        if (matched) continue;

        out.push_back({TokenKind::op, std::string(1, c)});
        ++i;
    }
    return out;
}

// Token texts only, the alphabet used by sequence alignment.
inline std::vector<std::string> token_texts(std::string_view source) {
    std::vector<std::string> texts;
    for (auto& tok : tokenize_source(source)) texts.push_back(std::move(tok.text));
    return texts;
}

// Identifiers that can never be call sites even when followed by '('.
inline bool is_reserved_word(std::string_view ident) {
    static constexpr std::array<std::string_view, 22> kReserved = {
        "if", "elif", "else", "for", "while", "try", "except", "return", "with",
        "and", "or", "not", "in", "is", "def", "function", "lambda", "class",
        "import", "from", "async", "await",
    };
    for (auto word : kReserved)
        if (word == ident) return true;
    return false;
}

// Names invoked as calls: an identifier token immediately followed by '(',
// excluding reserved words and definition heads (`def name(`, `function name(`).
inline std::vector<std::string> call_sites(std::string_view source) {
    const std::vector<Token> toks = tokenize_source(source);
    std::vector<std::string> calls;
    for (size_t i = 0; i + 1 < toks.size(); ++i) {
        if (toks[i].kind != TokenKind::identifier) continue;
        if (toks[i + 1].kind != TokenKind::op || toks[i + 1].text != "(") continue;
        if (is_reserved_word(toks[i].text)) continue;
        if (i > 0 && toks[i - 1].kind == TokenKind::identifier &&
            (toks[i - 1].text == "def" || toks[i - 1].text == "function")) {
            continue;
        }
        calls.push_back(toks[i].text);
    }
    return calls;
}

} // namespace toolgraph
