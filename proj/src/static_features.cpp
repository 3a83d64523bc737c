#include "tracelens/static_features.hpp"

#include "tracelens/error.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_set>

namespace tracelens::pruning {

void StaticFeatures::validate() const {
    if (loc < 0 || loops < 0 || nested_loops < 0 || calls < 0 || branches < 0 || params < 0) {
        throw ValidationError("static features of '" + function.name + "': negative count");
    }
    if (nested_loops > loops) {
        throw ValidationError("static features of '" + function.name + "': nested_loops > loops");
    }
}

namespace {

enum class TokenKind { Ident, Punct, Number };

struct Token {
    TokenKind kind;
    std::string text;
    std::size_t line;
    std::size_t col;
};

bool is(const Token& t, std::string_view text) { return t.text == text; }

std::vector<Token> tokenize(std::string_view src) {
    std::vector<Token> out;
    std::size_t i = 0, line = 1, col = 1;
    bool line_start = true;
    auto advance = [&](std::size_t n = 1) {
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
        if (c == '\n' || std::isspace(static_cast<unsigned char>(c))) {
            advance();
            continue;
        }
        if (c == '#' && line_start) {
            // Preprocessor directive, honouring backslash continuations.
            while (i < src.size() && !(src[i] == '\n' && (i == 0 || src[i - 1] != '\\'))) advance();
            continue;
        }
        line_start = false;
        if (c == '/' && i + 1 < src.size() && src[i + 1] == '/') {
            while (i < src.size() && src[i] != '\n') advance();
            continue;
        }
        if (c == '/' && i + 1 < src.size() && src[i + 1] == '*') {
            const std::size_t open_line = line, open_col = col;
            advance(2);
            while (i + 1 < src.size() && !(src[i] == '*' && src[i + 1] == '/')) advance();
            if (i + 1 >= src.size()) {
                throw ParseError("unterminated comment opened at " + std::to_string(open_line) + ":" +
                                 std::to_string(open_col));
            }
            advance(2);
            continue;
        }
        if (c == '"' || c == '\'') {
            advance();
            while (i < src.size() && src[i] != c && src[i] != '\n') advance(src[i] == '\\' ? 2 : 1);
            advance();
            continue;
        }
        const std::size_t tl = line, tc = col;
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            const std::size_t b = i;
            while (i < src.size() && (std::isalnum(static_cast<unsigned char>(src[i])) || src[i] == '_')) advance();
            out.push_back({TokenKind::Ident, std::string(src.substr(b, i - b)), tl, tc});
            continue;
        }
        if (std::isdigit(static_cast<unsigned char>(c))) {
            const std::size_t b = i;
            while (i < src.size() && (std::isalnum(static_cast<unsigned char>(src[i])) || src[i] == '.' || src[i] == '\'')) advance();
            out.push_back({TokenKind::Number, std::string(src.substr(b, i - b)), tl, tc});
            continue;
        }
        if (c == ':' && i + 1 < src.size() && src[i + 1] == ':') {
            advance(2);
            out.push_back({TokenKind::Punct, "::", tl, tc});
            continue;
        }
        advance();
        out.push_back({TokenKind::Punct, std::string(1, c), tl, tc});
    }
    return out;
}

const std::unordered_set<std::string>& non_call_keywords() {
    static const std::unordered_set<std::string> k = {
        "if",     "for",      "while",   "switch", "return",   "sizeof", "catch",  "do",
        "else",   "case",     "alignof", "decltype", "new",    "delete", "typeid", "throw",
        "defined", "noexcept", "static_assert", "alignas", "requires", "co_return", "co_await", "co_yield"};
    return k;
}

const std::unordered_set<std::string>& trailing_qualifiers() {
    static const std::unordered_set<std::string> k = {"const", "noexcept", "override", "final",
                                                      "volatile", "mutable", "try", "throw"};
    return k;
}

std::string location(const Token& t) { return std::to_string(t.line) + ":" + std::to_string(t.col); }

// Index of the token matching the bracket at `open`, or npos.
std::size_t match_forward(const std::vector<Token>& toks, std::size_t open, std::string_view o, std::string_view c) {
    int depth = 0;
    for (std::size_t k = open; k < toks.size(); ++k) {
        if (is(toks[k], o)) ++depth;
        if (is(toks[k], c) && --depth == 0) return k;
    }
    return std::string::npos;
}

std::size_t match_backward(const std::vector<Token>& toks, std::size_t close, std::string_view o, std::string_view c) {
    int depth = 0;
    for (std::size_t k = close + 1; k-- > 0;) {
        if (is(toks[k], c)) ++depth;
        if (is(toks[k], o) && --depth == 0) return k;
    }
    return std::string::npos;
}

struct Signature {
    std::size_t name_begin;  // first token of the (qualified) name
    std::size_t name_end;    // the unqualified name token
    std::size_t open_paren;
    std::size_t close_paren;
};

// Tries to read a function signature ending right before the '{' at `brace`.
std::optional<Signature> signature_before(const std::vector<Token>& toks, std::size_t brace) {
    std::size_t j = brace;
    while (true) {
        if (j == 0) return std::nullopt;
        --j;
        const Token& t = toks[j];
        if (t.kind == TokenKind::Ident && trailing_qualifiers().contains(t.text)) continue;
        if (is(t, "&")) continue;
        if (is(t, ")")) {
            const std::size_t open = match_backward(toks, j, "(", ")");
            if (open == std::string::npos || open == 0) return std::nullopt;
            const Token& before = toks[open - 1];
            if (before.kind == TokenKind::Ident && (before.text == "noexcept" || before.text == "throw")) {
                j = open - 1;
                continue;
            }
            if (before.kind != TokenKind::Ident || non_call_keywords().contains(before.text)) return std::nullopt;

            std::size_t begin = open - 1;
            while (begin >= 2 && is(toks[begin - 1], "::") && toks[begin - 2].kind == TokenKind::Ident) begin -= 2;
            if (begin >= 1 && is(toks[begin - 1], "~")) --begin;
            // Member-initializer list: `Ctor(args) : a_(x), b_(y) {`.
            // An access label (`public: Foo() {`) also precedes a ':'.
            const bool initializer_list =
                begin >= 2 && (is(toks[begin - 1], ",") || is(toks[begin - 1], ":")) &&
                (is(toks[begin - 2], ")") ||
                 (toks[begin - 2].kind == TokenKind::Ident && trailing_qualifiers().contains(toks[begin - 2].text)));
            if (initializer_list) {
                j = begin - 1;
                continue;
            }
            return Signature{begin, open - 1, open, j};
        }
        return std::nullopt;
    }
}

std::int64_t count_params(const std::vector<Token>& toks, std::size_t open, std::size_t close) {
    if (close == open + 1) return 0;
    if (close == open + 2 && is(toks[open + 1], "void")) return 0;
    std::int64_t commas = 0;
    int depth = 0;
    for (std::size_t k = open + 1; k < close; ++k) {
        const auto& t = toks[k];
        if (is(t, "(") || is(t, "<") || is(t, "[") || is(t, "{")) ++depth;
        if (is(t, ")") || is(t, ">") || is(t, "]") || is(t, "}")) --depth;
        if (is(t, ",") && depth == 0) ++commas;
    }
    return commas + 1;
}

StaticFeatures analyze_body(const std::vector<Token>& toks, std::size_t open, std::size_t close,
                            const std::string& short_name) {
    StaticFeatures f;
    f.loc = static_cast<std::int64_t>(toks[close].line - toks[open].line + 1);

    struct Brace {
        bool loop;
        bool do_loop;
    };
    std::vector<Brace> braces;
    std::vector<std::size_t> stmt_loops;  // brace depth owning a braceless loop body
    bool expect_do_while = false;

    auto loop_depth = [&] {
        return static_cast<std::size_t>(std::count_if(braces.begin(), braces.end(), [](const Brace& b) { return b.loop; })) +
               stmt_loops.size();
    };
    auto enter_loop_body = [&](std::size_t& k, bool do_loop) {
        if (k + 1 < close && is(toks[k + 1], "{")) {
            ++k;
            braces.push_back({true, do_loop});
        } else if (k + 1 < close && is(toks[k + 1], ";")) {
            ++k;
        } else {
            stmt_loops.push_back(braces.size());
        }
    };
    auto close_statements = [&] {
        while (!stmt_loops.empty() && stmt_loops.back() == braces.size()) stmt_loops.pop_back();
    };

    for (std::size_t k = open + 1; k < close; ++k) {
        const Token& t = toks[k];
        const bool after_do = expect_do_while;
        expect_do_while = false;

        if (t.kind == TokenKind::Ident) {
            if ((t.text == "for" || t.text == "while") && !(after_do && t.text == "while")) {
                ++f.loops;
                if (loop_depth() >= 1) ++f.nested_loops;
                if (k + 1 < close && is(toks[k + 1], "(")) {
                    const std::size_t hdr = match_forward(toks, k + 1, "(", ")");
                    k = std::min(hdr, close - 1);
                }
                enter_loop_body(k, false);
                continue;
            }
            if (t.text == "while" && after_do) {
                if (k + 1 < close && is(toks[k + 1], "(")) k = std::min(match_forward(toks, k + 1, "(", ")"), close - 1);
                continue;
            }
            if (t.text == "do") {
                ++f.loops;
                if (loop_depth() >= 1) ++f.nested_loops;
                enter_loop_body(k, true);
                continue;
            }
            if (t.text == "if" || t.text == "case") ++f.branches;
            if (k + 1 < close && is(toks[k + 1], "(") && !non_call_keywords().contains(t.text)) {
                ++f.calls;
                if (t.text == short_name) f.is_recursive = true;
            }
            continue;
        }
        if (is(t, "{")) {
            braces.push_back({false, false});
        } else if (is(t, "}")) {
            if (braces.empty()) break;
            const Brace b = braces.back();
            braces.pop_back();
            if (b.do_loop) {
                expect_do_while = true;
            } else if (!(k + 1 < close && is(toks[k + 1], "else"))) {
                close_statements();
            }
        } else if (is(t, ";")) {
            close_statements();
        }
    }
    return f;
}

std::string qualified_name(const std::vector<Token>& toks, const Signature& sig) {
    std::string name;
    for (std::size_t k = sig.name_begin; k <= sig.name_end; ++k) name += toks[k].text;
    return name;
}

} // namespace

std::vector<StaticFeatures> extract_static_features(std::string_view source) {
    const auto toks = tokenize(source);
    std::vector<StaticFeatures> out;

    struct Scope {
        std::string name;  // empty for unnamed/extern/other blocks
        bool named_scope;
    };
    std::vector<Scope> scopes;
    std::vector<std::size_t> open_at;

    std::size_t statement_start = 0;
    for (std::size_t i = 0; i < toks.size(); ++i) {
        const Token& t = toks[i];
        if (is(t, ";")) {
            statement_start = i + 1;
            continue;
        }
        if (is(t, "}")) {
            if (scopes.empty()) {
                throw ParseError("unbalanced braces: unexpected '}' at " + location(t));
            }
            scopes.pop_back();
            open_at.pop_back();
            statement_start = i + 1;
            continue;
        }
        if (!is(t, "{")) continue;

        const std::size_t close = match_forward(toks, i, "{", "}");
        if (close == std::string::npos) {
            throw ParseError("unbalanced braces: '{' at " + location(t) + " is never closed");
        }

        // Aggregate keyword of this declaration, if any.
        std::string keyword;
        std::string keyword_name;
        for (std::size_t k = statement_start; k < i; ++k) {
            const auto& s = toks[k].text;
            const bool template_param = k > statement_start && (is(toks[k - 1], "<") || is(toks[k - 1], ","));
            if (template_param) continue;
            if (s == "namespace" || s == "struct" || s == "class" || s == "union" || s == "enum" || s == "extern") {
                keyword = s;
                if (k + 1 < i && toks[k + 1].kind == TokenKind::Ident) keyword_name = toks[k + 1].text;
                if (s == "enum" && (keyword_name == "class" || keyword_name == "struct")) keyword_name.clear();
                break;
            }
        }
        bool has_assignment = false;
        int paren_depth = 0;
        for (std::size_t k = statement_start; k < i; ++k) {
            if (is(toks[k], "(")) ++paren_depth;
            if (is(toks[k], ")")) --paren_depth;
            if (is(toks[k], "=") && paren_depth == 0) has_assignment = true;
        }

        std::optional<Signature> sig;
        if (!has_assignment) sig = signature_before(toks, i);
        if (sig) {
            std::string name;
            for (const auto& s : scopes) {
                if (s.named_scope && !s.name.empty()) name += s.name + "::";
            }
            name += qualified_name(toks, *sig);
            StaticFeatures f = analyze_body(toks, i, close, toks[sig->name_end].text);
            f.function = FunctionId(std::move(name));
            f.params = count_params(toks, sig->open_paren, sig->close_paren);
            out.push_back(std::move(f));
            i = close;
            statement_start = close + 1;
            continue;
        }
        const bool named = keyword == "namespace" || keyword == "struct" || keyword == "class" || keyword == "union";
        if (named || keyword == "extern") {
            scopes.push_back({keyword_name, named});
            open_at.push_back(i);
            statement_start = i + 1;
        } else {
            // Initializers, enums and anything else we do not descend into.
            i = close;
            statement_start = close + 1;
        }
    }
    if (!scopes.empty()) {
        throw ParseError("unbalanced braces: '{' at " + location(toks[open_at.back()]) + " is never closed");
    }
    return out;
}

std::vector<StaticFeatures> parse_static_features_csv(std::istream& in) {
    std::vector<StaticFeatures> out;
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        if (!raw.empty() && raw.back() == '\r') raw.pop_back();
        if (raw.empty()) continue;
        if (line_no == 1 && raw.rfind("function,", 0) == 0) continue;
        // function name may contain commas: take the last 7 fields from the right.
        std::vector<std::string> fields;
        std::string rest = raw;
        for (int k = 0; k < 7; ++k) {
            const auto comma = rest.rfind(',');
            if (comma == std::string::npos) throw ParseError("expected 8 fields", line_no);
            fields.insert(fields.begin(), rest.substr(comma + 1));
            rest.erase(comma);
        }
        StaticFeatures f;
        f.function = FunctionId(rest);
        auto num = [&](const std::string& s) -> std::int64_t {
            try {
                std::size_t used = 0;
                const long long v = std::stoll(s, &used);
                if (used != s.size()) throw ParseError("malformed number '" + s + "'", line_no);
                return v;
            } catch (const std::logic_error&) {
                throw ParseError("malformed number '" + s + "'", line_no);
            }
        };
        f.loc = num(fields[0]);
        f.loops = num(fields[1]);
        f.nested_loops = num(fields[2]);
        f.calls = num(fields[3]);
        if (fields[4] == "true" || fields[4] == "1") {
            f.is_recursive = true;
        } else if (fields[4] == "false" || fields[4] == "0") {
            f.is_recursive = false;
        } else {
            throw ParseError("malformed recursive flag '" + fields[4] + "'", line_no);
        }
        f.branches = num(fields[5]);
        f.params = num(fields[6]);
        f.validate();
        out.push_back(std::move(f));
    }
    return out;
}

std::vector<StaticFeatures> load_static_features_csv(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw NotFoundError("cannot open '" + file.string() + "'");
    try {
        return parse_static_features_csv(in);
    } catch (const ParseError& e) {
        throw ParseError(file.string() + ": " + e.what());
    }
}

void write_static_features_csv(std::ostream& out, std::span<const StaticFeatures> features) {
    out << "function,loc,loops,nested_loops,calls,recursive,branches,params\n";
    for (const auto& f : features) {
        out << f.function.name << ',' << f.loc << ',' << f.loops << ',' << f.nested_loops << ',' << f.calls << ','
            << (f.is_recursive ? "true" : "false") << ',' << f.branches << ',' << f.params << '\n';
    }
}

} // namespace tracelens::pruning
