#pragma once

// Token-level analysis of single Java methods: lexing, physical lines,
// maskable construct spans (branch/loop conditions, call arguments,
// catch parameters) and brace-delimited blocks with statement counts.

#include <algorithm>
#include <array>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace maskbench::lex {

enum class TokenKind {
    identifier,
    keyword,
    number,
    string_lit,
    char_lit,
    op,
    separator,
};

struct Token {
    std::string text;
    TokenKind kind;
    std::size_t begin = 0;  // byte offset into the source
    std::size_t end = 0;    // one past the last byte
};

enum class LexErrorKind { unbalanced_delimiters, unterminated_literal };

class LexError : public std::runtime_error {
public:
    LexError(LexErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind(kind) {}
    LexErrorKind kind;
};

struct LineSpan {
    std::size_t first = 0;  // token indices, inclusive
    std::size_t last = 0;
    std::size_t n_tokens() const { return last - first + 1; }
};

enum class ConstructKind { if_cond, while_cond, for_cond, call_args, catch_param };

inline const char* construct_kind_name(ConstructKind k) {
    switch (k) {
        case ConstructKind::if_cond: return "if_cond";
        case ConstructKind::while_cond: return "while_cond";
        case ConstructKind::for_cond: return "for_cond";
        case ConstructKind::call_args: return "call_args";
        case ConstructKind::catch_param: return "catch_param";
    }
    return "?";
}

inline std::optional<ConstructKind> construct_kind_from_name(std::string_view s) {
    if (s == "if_cond") return ConstructKind::if_cond;
    if (s == "while_cond") return ConstructKind::while_cond;
    if (s == "for_cond") return ConstructKind::for_cond;
    if (s == "call_args") return ConstructKind::call_args;
    if (s == "catch_param") return ConstructKind::catch_param;
    return std::nullopt;
}

struct ConstructSpan {
    ConstructKind kind;
    std::size_t first = 0;  // token indices, inclusive; parens excluded
    std::size_t last = 0;
    std::size_t n_tokens() const { return last - first + 1; }
};

struct BlockSpan {
    std::size_t first = 0;  // token indices of '{' and '}' inclusive
    std::size_t last = 0;
    std::size_t n_statements = 0;
    bool is_method_body = false;
    std::size_t n_tokens() const { return last - first + 1; }
};

struct Method {
    std::string id;
    std::string source;
    std::string origin;  // empty when unknown
    std::vector<Token> tokens;
    std::vector<LineSpan> lines;
    std::vector<ConstructSpan> constructs;
    std::vector<BlockSpan> blocks;
};

namespace detail {

inline bool is_ident_start(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' || c == '$';
}

inline bool is_ident_part(char c) {
    return is_ident_start(c) || (c >= '0' && c <= '9');
}

inline bool is_digit(char c) { return c >= '0' && c <= '9'; }

inline bool is_keyword(std::string_view s) {
    static constexpr std::string_view kw[] = {
        "abstract", "assert", "boolean", "break", "byte", "case", "catch",
        "char", "class", "const", "continue", "default", "do", "double",
        "else", "enum", "extends", "false", "final", "finally", "float",
        "for", "goto", "if", "implements", "import", "instanceof", "int",
        "interface", "long", "native", "new", "null", "package", "private",
        "protected", "public", "return", "short", "static", "strictfp",
        "super", "switch", "synchronized", "this", "throw", "throws", "true",
        "transient", "try", "void", "volatile", "while",
    };
    for (auto k : kw)
        if (k == s) return true;
    return false;
}

// Tokens that may legally sit inside a type-argument list. Anything else
// ends the generics context used to decide whether '>>' closes two lists.
inline bool generics_friendly(const Token& t) {
    if (t.kind == TokenKind::identifier) return true;
    if (t.kind == TokenKind::keyword) return t.text == "extends" || t.text == "super";
    return t.text == "." || t.text == "," || t.text == "?" || t.text == "<" ||
           t.text == ">" || t.text == "[" || t.text == "]" || t.text == "&";
}

}  // namespace detail

// Lexes one Java method body. Comments are dropped; string, char and
// numeric literals are single tokens; multi-character operators are
// matched greedily, except that '>>'/'>>>' closing nested type-argument
// lists is split back into single '>' tokens.
inline std::vector<Token> tokenize(std::string_view src) {
    std::vector<Token> out;
    std::vector<char> delims;        // (, {, [ balance
    std::size_t generics_open = 0;   // '<' tokens that look like type-argument openers
    std::size_t i = 0;
    const std::size_t n = src.size();

    auto push = [&](std::string text, TokenKind kind, std::size_t b, std::size_t e) {
        out.push_back(Token{std::move(text), kind, b, e});
    };

    auto check_delim = [&](char c, std::size_t at) {
        if (c == '(' || c == '{' || c == '[') {
            delims.push_back(c);
        } else {
            char want = c == ')' ? '(' : c == '}' ? '{' : '[';
            if (delims.empty() || delims.back() != want)
                throw LexError(LexErrorKind::unbalanced_delimiters,
                               "unmatched '" + std::string(1, c) + "' at offset " +
                                   std::to_string(at));
            delims.pop_back();
        }
    };

    while (i < n) {
        char c = src[i];
        if (c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '\v') {
            ++i;
            continue;
        }
        if (c == '/' && i + 1 < n && src[i + 1] == '/') {
            while (i < n && src[i] != '\n') ++i;
            continue;
        }
        if (c == '/' && i + 1 < n && src[i + 1] == '*') {
            i += 2;
            while (i + 1 < n && !(src[i] == '*' && src[i + 1] == '/')) ++i;
            i = i + 1 < n ? i + 2 : n;
            continue;
        }
        std::size_t b = i;
        if (c == '"' || c == '\'') {
            ++i;
            while (i < n && src[i] != c) {
                if (src[i] == '\n') break;
                if (src[i] == '\\' && i + 1 < n) ++i;
                ++i;
            }
            if (i >= n || src[i] != c)
                throw LexError(LexErrorKind::unterminated_literal,
                               "unterminated literal at offset " + std::to_string(b));
            ++i;
            push(std::string(src.substr(b, i - b)),
                 c == '"' ? TokenKind::string_lit : TokenKind::char_lit, b, i);
        } else if (detail::is_digit(c) ||
                   (c == '.' && i + 1 < n && detail::is_digit(src[i + 1]))) {
            ++i;
            while (i < n) {
                char d = src[i];
                if (detail::is_ident_part(d) || d == '.') {
                    ++i;
                } else if ((d == '+' || d == '-') &&
                           (src[i - 1] == 'e' || src[i - 1] == 'E' ||
                            src[i - 1] == 'p' || src[i - 1] == 'P') &&
                           (src[b] != '0' || i - b < 2 ||
                            (src[b + 1] != 'x' && src[b + 1] != 'X'))) {
                    ++i;
                } else {
                    break;
                }
            }
            push(std::string(src.substr(b, i - b)), TokenKind::number, b, i);
        } else if (detail::is_ident_start(c)) {
            ++i;
            while (i < n && detail::is_ident_part(src[i])) ++i;
            std::string text(src.substr(b, i - b));
            TokenKind kind =
                detail::is_keyword(text) ? TokenKind::keyword : TokenKind::identifier;
            push(std::move(text), kind, b, i);
        } else if (c == '>') {
            auto rest = src.substr(i);
            if (rest.rfind(">>>=", 0) == 0) {
                push(">>>=", TokenKind::op, i, i + 4);
                i += 4;
            } else if (rest.rfind(">>>", 0) == 0 && generics_open >= 3) {
                for (int k = 0; k < 3; ++k, ++i) push(">", TokenKind::op, i, i + 1);
                generics_open -= 3;
            } else if (rest.rfind(">>>", 0) == 0) {
                push(">>>", TokenKind::op, i, i + 3);
                i += 3;
            } else if (rest.rfind(">>=", 0) == 0) {
                push(">>=", TokenKind::op, i, i + 3);
                i += 3;
            } else if (rest.rfind(">>", 0) == 0 && generics_open >= 2) {
                for (int k = 0; k < 2; ++k, ++i) push(">", TokenKind::op, i, i + 1);
                generics_open -= 2;
            } else if (rest.rfind(">>", 0) == 0) {
                push(">>", TokenKind::op, i, i + 2);
                i += 2;
            } else if (rest.rfind(">=", 0) == 0) {
                push(">=", TokenKind::op, i, i + 2);
                i += 2;
            } else {
                push(">", TokenKind::op, i, i + 1);
                i += 1;
                if (generics_open > 0) --generics_open;
            }
        } else {
            static constexpr std::string_view multi[] = {
                "<<=", "...", "==", "!=", "<=", "&&", "||", "++", "--", "+=",
                "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<", "->", "::",
            };
            std::string_view matched;
            for (auto m : multi) {
                if (src.substr(i, m.size()) == m) {
                    matched = m;
                    break;
                }
            }
            if (!matched.empty()) {
                TokenKind kind = matched == "..." ? TokenKind::separator : TokenKind::op;
                push(std::string(matched), kind, i, i + matched.size());
                i += matched.size();
            } else {
                static const std::string_view seps = "(){}[];,.@";
                TokenKind kind =
                    seps.find(c) != std::string_view::npos ? TokenKind::separator
                                                           : TokenKind::op;
                if (c == '(' || c == ')' || c == '{' || c == '}' || c == '[' || c == ']')
                    check_delim(c, i);
                if (c == '<') {
                    const Token* prev = out.empty() ? nullptr : &out.back();
                    if (prev && (prev->kind == TokenKind::identifier ||
                                 prev->text == ">" || prev->text == "?"))
                        ++generics_open;
                }
                push(std::string(1, c), kind, i, i + 1);
                i += 1;
            }
        }
        if (generics_open > 0 && !detail::generics_friendly(out.back()))
            generics_open = 0;
    }
    if (!delims.empty())
        throw LexError(LexErrorKind::unbalanced_delimiters,
                       "unclosed '" + std::string(1, delims.back()) + "'");
    return out;
}

// Groups tokens by physical source line; lines with no tokens yield no span.
inline std::vector<LineSpan> find_lines(const std::vector<Token>& tokens,
                                        std::string_view src) {
    std::vector<LineSpan> out;
    std::size_t cursor = 0;  // byte offset scanned so far
    std::size_t line = 0;
    std::size_t cur_line = static_cast<std::size_t>(-1);
    for (std::size_t t = 0; t < tokens.size(); ++t) {
        while (cursor < tokens[t].begin) {
            if (src[cursor] == '\n') ++line;
            ++cursor;
        }
        if (out.empty() || line != cur_line) {
            out.push_back(LineSpan{t, t});
            cur_line = line;
        } else {
            out.back().last = t;
        }
    }
    return out;
}

namespace detail {

// Index one past the matching ')' group, or npos if unmatched.
inline std::size_t match_paren(const std::vector<Token>& toks, std::size_t open) {
    std::size_t depth = 0;
    for (std::size_t i = open; i < toks.size(); ++i) {
        if (toks[i].text == "(") ++depth;
        else if (toks[i].text == ")" && --depth == 0) return i;
    }
    return static_cast<std::size_t>(-1);
}

// First '{' at zero combined (), {}, [] nesting depth: the method body.
inline std::size_t body_open_index(const std::vector<Token>& toks) {
    long depth = 0;
    for (std::size_t i = 0; i < toks.size(); ++i) {
        const std::string& t = toks[i].text;
        if (t == "{" && depth == 0) return i;
        if (t == "(" || t == "{" || t == "[") ++depth;
        else if (t == ")" || t == "}" || t == "]") --depth;
    }
    return static_cast<std::size_t>(-1);
}

// True when the identifier at i is the trailing segment of an annotation
// name: '@' Ident ('.' Ident)*
inline bool is_annotation_name(const std::vector<Token>& toks, std::size_t i) {
    while (i >= 2 && toks[i - 1].text == "." &&
           toks[i - 2].kind == TokenKind::identifier)
        i -= 2;
    return i >= 1 && toks[i - 1].text == "@";
}

}  // namespace detail

// Scans for maskable constructs. Malformed regions (unmatched or empty
// condition parens) are skipped; when `malformed` is given they are tallied.
inline std::vector<ConstructSpan> find_constructs(const Method& m,
                                                  std::size_t* malformed = nullptr) {
    const auto& toks = m.tokens;
    std::vector<ConstructSpan> out;
    std::size_t body = detail::body_open_index(toks);
    auto tally = [&] {
        if (malformed) ++*malformed;
    };
    for (std::size_t i = 0; i + 1 < toks.size(); ++i) {
        const Token& t = toks[i];
        std::optional<ConstructKind> kind;
        if (t.kind == TokenKind::keyword) {
            if (t.text == "if") kind = ConstructKind::if_cond;
            else if (t.text == "while") kind = ConstructKind::while_cond;
            else if (t.text == "for") kind = ConstructKind::for_cond;
            else if (t.text == "catch") kind = ConstructKind::catch_param;
        } else if (t.kind == TokenKind::identifier && toks[i + 1].text == "(") {
            // Calls live in the body; identifier+'(' before it is the
            // declarator, and annotation arguments are not calls either.
            // Brace-less fragments have no declarator, so everything counts.
            bool in_body = body == static_cast<std::size_t>(-1) || i > body;
            if (in_body && !detail::is_annotation_name(toks, i))
                kind = ConstructKind::call_args;
        }
        if (!kind) continue;
        if (toks[i + 1].text != "(") {
            if (*kind != ConstructKind::call_args) tally();
            continue;
        }
        std::size_t close = detail::match_paren(toks, i + 1);
        if (close == static_cast<std::size_t>(-1)) {
            tally();
            continue;
        }
        if (close == i + 2) {
            // Zero-argument call: nothing to mask. An empty condition or
            // catch parameter list is malformed Java instead.
            if (*kind != ConstructKind::call_args) tally();
            continue;
        }
        out.push_back(ConstructSpan{*kind, i + 2, close - 1});
    }
    return out;
}

namespace detail {

std::size_t skip_statement(const std::vector<Token>& toks, std::size_t i,
                           std::size_t end);

inline bool is_structured_keyword(const Token& t) {
    if (t.kind != TokenKind::keyword) return false;
    return t.text == "if" || t.text == "for" || t.text == "while" ||
           t.text == "do" || t.text == "try" || t.text == "switch" ||
           t.text == "synchronized" || t.text == "else" || t.text == "catch" ||
           t.text == "finally";
}

inline std::size_t match_brace(const std::vector<Token>& toks, std::size_t open,
                               std::size_t end) {
    std::size_t depth = 0;
    for (std::size_t i = open; i < end; ++i) {
        if (toks[i].text == "{") ++depth;
        else if (toks[i].text == "}" && --depth == 0) return i;
    }
    return static_cast<std::size_t>(-1);
}

// Consumes one structured statement (keyword, attached parens, body and
// any else/catch/finally/do-while chain) and returns the index after it.
inline std::size_t skip_structured(const std::vector<Token>& toks, std::size_t i,
                                   std::size_t end) {
    const std::string kw = toks[i].text;
    ++i;
    if (kw == "do") {
        if (i < end) i = skip_statement(toks, i, end);
        if (i < end && toks[i].text == "while") {
            ++i;
            if (i < end && toks[i].text == "(") {
                std::size_t close = match_paren(toks, i);
                i = close == static_cast<std::size_t>(-1) ? end : close + 1;
            }
            if (i < end && toks[i].text == ";") ++i;
        }
        return i;
    }
    if ((kw == "if" || kw == "for" || kw == "while" || kw == "switch" ||
         kw == "synchronized" || kw == "catch" || kw == "try") &&
        i < end && toks[i].text == "(") {
        std::size_t close = match_paren(toks, i);
        i = close == static_cast<std::size_t>(-1) ? end : close + 1;
    }
    if (i < end) i = skip_statement(toks, i, end);
    if (kw == "if") {
        if (i < end && toks[i].text == "else") i = skip_structured(toks, i, end);
    } else if (kw == "try") {
        while (i < end && toks[i].text == "catch") i = skip_structured(toks, i, end);
        if (i < end && toks[i].text == "finally") i = skip_structured(toks, i, end);
    }
    return i;
}

inline std::size_t skip_statement(const std::vector<Token>& toks, std::size_t i,
                                  std::size_t end) {
    const Token& t = toks[i];
    if (t.text == "{") {
        std::size_t close = match_brace(toks, i, end);
        return close == static_cast<std::size_t>(-1) ? end : close + 1;
    }
    if (is_structured_keyword(t)) return skip_structured(toks, i, end);
    if (t.kind == TokenKind::keyword && (t.text == "case" || t.text == "default")) {
        std::size_t j = i + 1;
        long depth = 0;
        while (j < end) {
            const std::string& s = toks[j].text;
            if (s == "(" || s == "[") ++depth;
            else if (s == ")" || s == "]") --depth;
            else if (s == ":" && depth == 0) return j + 1 < end
                       ? skip_statement(toks, j + 1, end) : end;
            else if (s == "->" && depth == 0) return j + 1 < end
                       ? skip_statement(toks, j + 1, end) : end;
            ++j;
        }
        return end;
    }
    if (t.kind == TokenKind::identifier && i + 1 < end && toks[i + 1].text == ":")
        return i + 2 < end ? skip_statement(toks, i + 2, end) : end;
    // Simple statement: scan to ';' at this depth, skipping nested groups.
    long depth = 0;
    for (std::size_t j = i; j < end; ++j) {
        const std::string& s = toks[j].text;
        if (s == "(" || s == "{" || s == "[") ++depth;
        else if (s == ")" || s == "}" || s == "]") --depth;
        else if (s == ";" && depth == 0) return j + 1;
    }
    return end;
}

inline std::size_t count_statements(const std::vector<Token>& toks,
                                    std::size_t open, std::size_t close) {
    std::size_t i = open + 1;
    std::size_t count = 0;
    while (i < close) {
        ++count;
        std::size_t next = skip_statement(toks, i, close);
        if (next <= i) break;  // malformed; bail out rather than loop
        i = next;
    }
    return count;
}

}  // namespace detail

// All brace-delimited blocks, ordered by opening token, each with the
// number of immediate statements it contains.
inline std::vector<BlockSpan> find_blocks(const Method& m) {
    const auto& toks = m.tokens;
    std::vector<BlockSpan> out;
    std::vector<std::size_t> stack;
    std::size_t body = detail::body_open_index(toks);
    for (std::size_t i = 0; i < toks.size(); ++i) {
        if (toks[i].text == "{") {
            stack.push_back(i);
        } else if (toks[i].text == "}" && !stack.empty()) {
            std::size_t open = stack.back();
            stack.pop_back();
            BlockSpan b{open, i, detail::count_statements(toks, open, i), open == body};
            out.push_back(b);
        }
    }
    std::sort(out.begin(), out.end(),
              [](const BlockSpan& a, const BlockSpan& b) { return a.first < b.first; });
    return out;
}

// Lexes and fully annotates a method. Throws LexError on malformed input.
inline Method analyze(std::string id, std::string source, std::string origin = "") {
    Method m;
    m.id = std::move(id);
    m.source = std::move(source);
    m.origin = std::move(origin);
    m.tokens = tokenize(m.source);
    m.lines = find_lines(m.tokens, m.source);
    m.constructs = find_constructs(m);
    m.blocks = find_blocks(m);
    return m;
}

// The declared name: the identifier before the parameter list '(' of the
// signature, skipping annotation argument lists.
inline std::string method_name(const Method& m) {
    const auto& toks = m.tokens;
    long depth = 0;
    for (std::size_t i = 0; i < toks.size(); ++i) {
        const std::string& t = toks[i].text;
        if (t == "{" && depth == 0) break;
        if (t == "(" && depth == 0 && i > 0 &&
            toks[i - 1].kind == TokenKind::identifier &&
            !detail::is_annotation_name(toks, i - 1))
            return toks[i - 1].text;
        if (t == "(" || t == "{" || t == "[") ++depth;
        else if (t == ")" || t == "}" || t == "]") --depth;
    }
    return "";
}

}  // namespace maskbench::lex
