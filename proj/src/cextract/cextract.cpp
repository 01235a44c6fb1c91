#include "trop/cextract.hpp"

#include "lexer.hpp"
#include "trop/error.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <sstream>

namespace trop {

std::vector<std::string> default_sinks()
{
    return {"execl", "execle", "execlp", "execv", "execve", "execvp", "system"};
}

std::vector<std::string> default_allocators()
{
    return {"aligned_alloc", "calloc", "malloc", "realloc", "strdup", "strndup"};
}

namespace {

using cextract::Token;
using cextract::TokenKind;

struct Expr;
using ExprPtr = std::unique_ptr<Expr>;

struct Expr {
    enum class Kind { ident, literal, unary, postfix, binary, assign, ternary, call, index, member, cast, sizeof_type, comma, init_list };

    Kind kind = Kind::literal;
    std::string text; // identifier, literal, member name or type spelling
    std::string op;
    std::vector<ExprPtr> kids;
    RawType type; // cast target
    bool paren = false;
    int line = 0;
    int col = 0;
};

struct DeclOp {
    enum class Kind { pointer, array, function };

    Kind kind = Kind::pointer;
    bool is_const = false;
    bool is_volatile = false;
    std::optional<std::uint64_t> size;
    std::vector<RawType> params;
    std::vector<std::string> param_names;
    bool variadic = false;
};

struct Declarator {
    std::string name;
    int line = 0;
    int col = 0;
    std::vector<DeclOp> ops;
};

struct Specs {
    RawType base;
    bool have_type = false;
    bool is_typedef = false;
    bool is_static = false;
    bool is_extern = false;
};

struct Symbol {
    RawType type;
    ScopeClass scope = ScopeClass::local;
    bool file_scope = false;
    bool is_static = false;
};

struct PendingSite {
    std::string function;
    std::string pointer;
    std::string pointer_decl;
    RawSignature signature;
    std::string location;
    std::vector<GuardAnnotation> guards;
};

struct PendingEdge {
    std::string caller;
    std::string callee;
    std::vector<GuardAnnotation> guards;
    std::string location;
};

using Guards = std::vector<GuardAnnotation>;

RawType apply_ops(RawType t, const std::vector<DeclOp>& ops)
{
    for (const auto& op : ops) {
        switch (op.kind) {
        case DeclOp::Kind::pointer:
            t = RawType::pointer_to(std::move(t));
            t.is_const = op.is_const;
            t.is_volatile = op.is_volatile;
            break;
        case DeclOp::Kind::array:
            t = RawType::array_of(std::move(t), op.size);
            break;
        case DeclOp::Kind::function:
            t = RawType::function(std::move(t), op.params, op.variadic);
            break;
        }
    }
    return t;
}

bool is_builtin_word(std::string_view w)
{
    return w == "void" || w == "char" || w == "short" || w == "int" || w == "long" || w == "float" ||
           w == "double" || w == "signed" || w == "unsigned" || w == "_Bool" || w == "bool";
}

bool is_storage_word(std::string_view w)
{
    return w == "typedef" || w == "static" || w == "extern" || w == "inline" || w == "register" || w == "auto";
}

bool is_qualifier_word(std::string_view w)
{
    return w == "const" || w == "volatile" || w == "restrict";
}

bool is_assign_op(std::string_view op)
{
    return op == "=" || op == "*=" || op == "/=" || op == "%=" || op == "+=" || op == "-=" || op == "<<=" ||
           op == ">>=" || op == "&=" || op == "^=" || op == "|=";
}

int binary_precedence(const Token& t)
{
    if (t.kind != TokenKind::punct)
        return -1;
    const auto& op = t.text;
    if (op == "||")
        return 1;
    if (op == "&&")
        return 2;
    if (op == "|")
        return 3;
    if (op == "^")
        return 4;
    if (op == "&")
        return 5;
    if (op == "==" || op == "!=")
        return 6;
    if (op == "<" || op == ">" || op == "<=" || op == ">=")
        return 7;
    if (op == "<<" || op == ">>")
        return 8;
    if (op == "+" || op == "-")
        return 9;
    if (op == "*" || op == "/" || op == "%")
        return 10;
    return -1;
}

std::string render(const Expr& e);

std::string render_core(const Expr& e)
{
    auto join = [](const std::vector<ExprPtr>& xs, std::size_t from, const char* sep) {
        std::string s;
        for (std::size_t i = from; i < xs.size(); ++i) {
            if (i > from)
                s += sep;
            s += render(*xs[i]);
        }
        return s;
    };
    switch (e.kind) {
    case Expr::Kind::ident:
    case Expr::Kind::literal:
        return e.text;
    case Expr::Kind::unary:
        if (e.op == "sizeof")
            return "sizeof" + std::string(e.kids[0]->paren ? "" : " ") + render(*e.kids[0]);
        return e.op + render(*e.kids[0]);
    case Expr::Kind::postfix:
        return render(*e.kids[0]) + e.op;
    case Expr::Kind::binary:
    case Expr::Kind::assign:
        return render(*e.kids[0]) + " " + e.op + " " + render(*e.kids[1]);
    case Expr::Kind::comma:
        return render(*e.kids[0]) + ", " + render(*e.kids[1]);
    case Expr::Kind::ternary:
        return render(*e.kids[0]) + " ? " + render(*e.kids[1]) + " : " + render(*e.kids[2]);
    case Expr::Kind::call:
        return render(*e.kids[0]) + "(" + join(e.kids, 1, ", ") + ")";
    case Expr::Kind::index:
        return render(*e.kids[0]) + "[" + render(*e.kids[1]) + "]";
    case Expr::Kind::member:
        return render(*e.kids[0]) + e.op + e.text;
    case Expr::Kind::cast:
        return "(" + e.text + ")" + render(*e.kids[0]);
    case Expr::Kind::sizeof_type:
        return "sizeof(" + e.text + ")";
    case Expr::Kind::init_list:
        return "{" + join(e.kids, 0, ", ") + "}";
    }
    return {};
}

std::string render(const Expr& e)
{
    auto s = render_core(e);
    return e.paren ? "(" + s + ")" : s;
}

std::string negated(const Expr& e)
{
    return e.paren ? "!" + render(e) : "!(" + render(e) + ")";
}

class Parser {
public:
    Parser(std::string_view source, std::string unit, const ExtractOptions& options)
        : unit_(std::move(unit))
        , options_(options)
        , toks_(cextract::tokenize(source, unit_))
        , sinks_(options.sinks.begin(), options.sinks.end())
        , allocators_(options.allocators.begin(), options.allocators.end())
    {
    }

    FactsDB run()
    {
        while (peek().kind != TokenKind::end)
            external_declaration();
        return finish();
    }

private:
    std::string unit_;
    const ExtractOptions& options_;
    std::vector<Token> toks_;
    std::size_t pos_ = 0;
    std::set<std::string> sinks_;
    std::set<std::string> allocators_;

    TypedefTable typedefs_;
    std::map<std::string, FunctionDecl> functions_;
    std::map<std::string, Symbol> globals_;
    std::set<std::string> enumerators_;
    std::map<std::string, std::map<std::string, RawType>> records_;
    int anon_counter_ = 0;

    std::vector<std::map<std::string, Symbol>> scopes_;
    std::string current_fn_;
    std::set<std::string> calls_sinks_of_current_;

    std::vector<PendingSite> sites_;
    std::vector<PendingEdge> edges_;
    std::set<std::string> value_uses_;
    std::map<std::string, std::set<std::string>> calls_sinks_;

    // --- tokens --------------------------------------------------------

    const Token& peek(std::size_t k = 0) const
    {
        return toks_[std::min(pos_ + k, toks_.size() - 1)];
    }

    const Token& advance()
    {
        const Token& t = toks_[pos_];
        if (pos_ + 1 < toks_.size())
            ++pos_;
        return t;
    }

    bool is(std::string_view text, std::size_t k = 0) const
    {
        const Token& t = peek(k);
        return (t.kind == TokenKind::punct || t.kind == TokenKind::keyword) && t.text == text;
    }

    bool accept(std::string_view text)
    {
        if (!is(text))
            return false;
        advance();
        return true;
    }

    std::string where(const Token& t) const
    {
        return unit_ + ":" + std::to_string(t.line) + ":" + std::to_string(t.col);
    }

    std::string location(int line) const
    {
        return unit_ + ":" + std::to_string(line);
    }

    [[noreturn]] void fail(const Token& t, const std::string& expected) const
    {
        const std::string found = t.kind == TokenKind::end ? "end of input" : "'" + t.text + "'";
        throw Error(ErrorCode::parse_error, where(t), where(t) + ": expected " + expected + ", found " + found);
    }

    [[noreturn]] void unsupported(const Token& t, const std::string& what) const
    {
        throw Error(ErrorCode::unsupported_construct, where(t), where(t) + ": unsupported construct: " + what);
    }

    [[noreturn]] void unsupported_at(int line, int col, const std::string& what) const
    {
        const std::string w = unit_ + ":" + std::to_string(line) + ":" + std::to_string(col);
        throw Error(ErrorCode::unsupported_construct, w, w + ": unsupported construct: " + what);
    }

    void expect(std::string_view text)
    {
        if (!accept(text))
            fail(peek(), "'" + std::string(text) + "'");
    }

    std::string expect_identifier()
    {
        if (peek().kind != TokenKind::identifier)
            fail(peek(), "identifier");
        return advance().text;
    }

    // --- symbols -------------------------------------------------------

    const Symbol* lookup_var(const std::string& name) const
    {
        for (auto it = scopes_.rbegin(); it != scopes_.rend(); ++it)
            if (auto f = it->find(name); f != it->end())
                return &f->second;
        if (auto g = globals_.find(name); g != globals_.end())
            return &g->second;
        return nullptr;
    }

    bool is_typedef_name(const std::string& name) const
    {
        return typedefs_.count(name) && !lookup_var(name);
    }

    bool is_type_start(const Token& t) const
    {
        if (t.kind == TokenKind::keyword)
            return is_builtin_word(t.text) || is_storage_word(t.text) || is_qualifier_word(t.text) ||
                   t.text == "struct" || t.text == "union" || t.text == "enum";
        return t.kind == TokenKind::identifier && is_typedef_name(t.text);
    }

    std::optional<RawType> resolved(const RawType& t) const
    {
        try {
            return resolve_typedefs(t, typedefs_);
        } catch (const Error&) {
            return std::nullopt;
        }
    }

    std::optional<RawType> function_type_of(const std::optional<RawType>& t) const
    {
        if (!t)
            return std::nullopt;
        auto r = resolved(*t);
        if (!r)
            return std::nullopt;
        if (r->kind == RawType::Kind::function)
            return r;
        if (r->kind == RawType::Kind::pointer) {
            auto e = resolved(r->children.at(0));
            if (e && e->kind == RawType::Kind::function)
                return e;
        }
        return std::nullopt;
    }

    void add_typedef(const std::string& name, const RawType& t, const Token& at)
    {
        auto [it, inserted] = typedefs_.emplace(name, t);
        if (!inserted && !(it->second == t))
            throw Error(ErrorCode::typedef_conflict, name, where(at) + ": conflicting typedef '" + name + "'");
    }

    void declare_function(const std::string& name, const RawType& type, bool is_static, bool defining, int line,
                          const Token& at)
    {
        auto sig = RawSignature::from_type(type);
        auto it = functions_.find(name);
        if (it == functions_.end()) {
            FunctionDecl f;
            f.name = name;
            f.unit = unit_;
            f.signature = std::move(sig);
            f.is_static = is_static;
            f.is_definition = defining;
            f.location = location(line);
            functions_.emplace(name, std::move(f));
            return;
        }
        auto& f = it->second;
        if (defining && f.is_definition)
            throw Error(ErrorCode::duplicate_definition, name, where(at) + ": redefinition of '" + name + "'");
        f.is_static = f.is_static || is_static;
        if (defining) {
            f.signature = std::move(sig);
            f.location = location(line);
            f.is_definition = true;
        }
    }

    // --- declarations --------------------------------------------------

    Specs parse_specs()
    {
        Specs s;
        std::vector<std::string> words;
        bool is_const = false, is_volatile = false;
        while (true) {
            const Token& t = peek();
            if (t.kind == TokenKind::keyword) {
                if (t.text == "typedef") {
                    s.is_typedef = true;
                } else if (t.text == "static") {
                    s.is_static = true;
                } else if (t.text == "extern") {
                    s.is_extern = true;
                } else if (is_storage_word(t.text)) {
                } else if (t.text == "const") {
                    is_const = true;
                } else if (t.text == "volatile") {
                    is_volatile = true;
                } else if (t.text == "restrict") {
                } else if (is_builtin_word(t.text)) {
                    if (s.have_type)
                        fail(t, "declarator");
                    words.push_back(t.text == "bool" ? "_Bool" : t.text);
                } else if (t.text == "struct" || t.text == "union") {
                    if (s.have_type || !words.empty())
                        fail(t, "declarator");
                    s.base = parse_record();
                    s.have_type = true;
                    continue;
                } else if (t.text == "enum") {
                    if (s.have_type || !words.empty())
                        fail(t, "declarator");
                    s.base = parse_enum();
                    s.have_type = true;
                    continue;
                } else {
                    break;
                }
                advance();
                continue;
            }
            if (t.kind == TokenKind::identifier && !s.have_type && words.empty() && is_typedef_name(t.text)) {
                s.base = RawType::named(t.text);
                s.have_type = true;
                advance();
                continue;
            }
            break;
        }
        if (!words.empty()) {
            std::string joined;
            for (const auto& w : words)
                joined += (joined.empty() ? "" : " ") + w;
            s.base = RawType::builtin(normalize_builtin(joined));
            s.have_type = true;
        }
        s.base.is_const = s.base.is_const || is_const;
        s.base.is_volatile = s.base.is_volatile || is_volatile;
        return s;
    }

    RawType parse_record()
    {
        const Token& kw = advance();
        const auto kind = kw.text == "struct" ? RawType::Kind::struct_tag : RawType::Kind::union_tag;
        const std::string prefix = kw.text + ":";
        std::string tag;
        if (peek().kind == TokenKind::identifier)
            tag = advance().text;
        if (accept("{")) {
            if (tag.empty())
                tag = "__anon" + std::to_string(++anon_counter_) + "@" + unit_;
            std::map<std::string, RawType> members;
            while (!accept("}")) {
                Specs ms = parse_specs();
                if (!ms.have_type)
                    fail(peek(), "member type");
                if (accept(";"))
                    continue;
                while (true) {
                    Declarator d;
                    if (!is(":"))
                        d = parse_declarator(false);
                    if (accept(":"))
                        parse_conditional();
                    if (!d.name.empty())
                        members[d.name] = apply_ops(ms.base, d.ops);
                    if (accept(","))
                        continue;
                    expect(";");
                    break;
                }
            }
            records_[prefix + tag] = std::move(members);
        } else if (tag.empty()) {
            fail(peek(), "struct tag or '{'");
        }
        return RawType::tagged(kind, tag);
    }

    RawType parse_enum()
    {
        advance();
        std::string tag;
        if (peek().kind == TokenKind::identifier)
            tag = advance().text;
        if (accept("{")) {
            if (tag.empty())
                tag = "__anon" + std::to_string(++anon_counter_) + "@" + unit_;
            while (!accept("}")) {
                enumerators_.insert(expect_identifier());
                if (accept("="))
                    parse_conditional();
                if (!accept(",")) {
                    expect("}");
                    break;
                }
            }
        } else if (tag.empty()) {
            fail(peek(), "enum tag or '{'");
        }
        return RawType::tagged(RawType::Kind::enum_tag, tag);
    }

    bool nested_declarator_ahead(bool abstract_ok) const
    {
        if (!is("("))
            return false;
        const Token& n = peek(1);
        if (n.kind == TokenKind::punct)
            return n.text == "*" || n.text == "(" || n.text == "[";
        if (n.kind == TokenKind::identifier)
            return !abstract_ok || !is_typedef_name(n.text);
        return false;
    }

    Declarator parse_declarator(bool abstract_ok)
    {
        std::vector<DeclOp> pointers;
        while (accept("*")) {
            DeclOp op;
            op.kind = DeclOp::Kind::pointer;
            while (peek().kind == TokenKind::keyword && is_qualifier_word(peek().text)) {
                if (peek().text == "const")
                    op.is_const = true;
                else if (peek().text == "volatile")
                    op.is_volatile = true;
                advance();
            }
            pointers.push_back(op);
        }

        Declarator inner;
        bool has_inner = false;
        std::string name;
        int line = peek().line, col = peek().col;
        if (peek().kind == TokenKind::identifier) {
            name = advance().text;
        } else if (nested_declarator_ahead(abstract_ok)) {
            advance();
            inner = parse_declarator(abstract_ok);
            expect(")");
            has_inner = true;
        } else if (!abstract_ok) {
            fail(peek(), "identifier");
        }

        std::vector<DeclOp> suffixes;
        while (true) {
            if (accept("[")) {
                DeclOp op;
                op.kind = DeclOp::Kind::array;
                if (!is("]")) {
                    auto e = parse_conditional();
                    if (e->kind == Expr::Kind::literal && !e->text.empty() && std::isdigit(static_cast<unsigned char>(e->text[0]))) {
                        try {
                            op.size = std::stoull(e->text, nullptr, 0);
                        } catch (const std::exception&) {
                        }
                    }
                }
                expect("]");
                suffixes.push_back(std::move(op));
            } else if (is("(")) {
                advance();
                suffixes.push_back(parse_params());
            } else {
                break;
            }
        }

        Declarator d;
        d.ops = std::move(pointers);
        for (auto it = suffixes.rbegin(); it != suffixes.rend(); ++it)
            d.ops.push_back(std::move(*it));
        if (has_inner) {
            for (auto& op : inner.ops)
                d.ops.push_back(std::move(op));
            d.name = inner.name;
            d.line = inner.line;
            d.col = inner.col;
        } else {
            d.name = name;
            d.line = line;
            d.col = col;
        }
        return d;
    }

    DeclOp parse_params()
    {
        DeclOp op;
        op.kind = DeclOp::Kind::function;
        if (accept(")"))
            return op;
        if (is("void") && is(")", 1)) {
            advance();
            advance();
            return op;
        }
        while (true) {
            if (accept("...")) {
                op.variadic = true;
                expect(")");
                break;
            }
            Specs s = parse_specs();
            if (!s.have_type)
                fail(peek(), "parameter type");
            Declarator d = parse_declarator(true);
            op.params.push_back(apply_ops(s.base, d.ops));
            op.param_names.push_back(d.name);
            if (accept(","))
                continue;
            expect(")");
            break;
        }
        return op;
    }

    RawType parse_type_name(std::string& spelling)
    {
        const std::size_t start = pos_;
        Specs s = parse_specs();
        if (!s.have_type)
            fail(peek(), "type name");
        Declarator d = parse_declarator(true);
        if (!d.name.empty())
            fail(peek(), "abstract declarator");
        for (std::size_t i = start; i < pos_; ++i) {
            if (i > start && toks_[i].text != ")" && toks_[i - 1].text != "(" && toks_[i].text != "[" &&
                toks_[i].text != "]" && toks_[i - 1].text != "[")
                spelling += ' ';
            spelling += toks_[i].text;
        }
        return apply_ops(s.base, d.ops);
    }

    ExprPtr parse_initializer()
    {
        if (!is("{"))
            return parse_assignment();
        auto list = std::make_unique<Expr>();
        list->kind = Expr::Kind::init_list;
        list->line = peek().line;
        list->col = peek().col;
        advance();
        while (!accept("}")) {
            if (accept(".")) {
                expect_identifier();
                while (accept(".") || is("[")) {
                    if (accept("[")) {
                        parse_conditional();
                        expect("]");
                    } else {
                        expect_identifier();
                    }
                }
                expect("=");
            } else if (accept("[")) {
                parse_conditional();
                expect("]");
                expect("=");
            }
            list->kids.push_back(parse_initializer());
            if (!accept(",")) {
                expect("}");
                break;
            }
        }
        return list;
    }

    void external_declaration()
    {
        if (accept(";"))
            return;
        const Token start = peek();
        Specs s = parse_specs();
        if (!s.have_type) {
            if (start.kind == TokenKind::identifier) {
                if (is("(", 1))
                    unsupported(start, "function declared without a return type");
                fail(start, "type name (unknown type '" + start.text + "'?)");
            }
            fail(start, "declaration");
        }
        if (accept(";"))
            return;
        bool first = true;
        while (true) {
            const Token at = peek();
            Declarator d = parse_declarator(false);
            RawType t = apply_ops(s.base, d.ops);
            if (s.is_typedef) {
                add_typedef(d.name, t, at);
            } else if (auto r = resolved(t); r && r->kind == RawType::Kind::function) {
                const bool defining = first && is("{");
                declare_function(d.name, *r, s.is_static, defining, d.line, at);
                if (defining) {
                    function_body(d, *r);
                    return;
                }
            } else {
                Symbol sym{t, ScopeClass::global, true, s.is_static};
                globals_[d.name] = sym;
                if (accept("=")) {
                    auto init = parse_initializer();
                    Guards none;
                    walk(*init, none);
                }
            }
            first = false;
            if (accept(","))
                continue;
            expect(";");
            return;
        }
    }

    void function_body(const Declarator& d, const RawType& type)
    {
        if (d.ops.empty() || d.ops.back().kind != DeclOp::Kind::function)
            unsupported_at(d.line, d.col, "function definition through a typedef'd function type");
        const DeclOp& fn = d.ops.back();
        current_fn_ = d.name;
        scopes_.clear();
        scopes_.emplace_back();
        for (std::size_t i = 0; i < fn.params.size(); ++i)
            if (!fn.param_names[i].empty())
                scopes_.back()[fn.param_names[i]] = Symbol{fn.params[i], ScopeClass::param, false, false};
        (void)type;
        Guards guards;
        compound(guards);
        scopes_.clear();
        current_fn_.clear();
    }

    // --- statements ----------------------------------------------------

    GuardAnnotation guard_of(const Expr& cond, bool negate)
    {
        GuardAnnotation g;
        g.expression = negate ? negated(cond) : render(cond);
        std::set<std::string> seen;
        collect_refs(cond, g.referenced, seen);
        return g;
    }

    void collect_refs(const Expr& e, std::vector<IdentifierRef>& out, std::set<std::string>& seen)
    {
        switch (e.kind) {
        case Expr::Kind::ident: {
            if (seen.count(e.text))
                return;
            const Symbol* sym = lookup_var(e.text);
            ScopeClass scope = ScopeClass::unknown;
            if (sym)
                scope = sym->scope;
            else if (functions_.count(e.text) || enumerators_.count(e.text))
                return;
            seen.insert(e.text);
            out.push_back({e.text, scope});
            return;
        }
        case Expr::Kind::call: {
            const Expr& callee = *e.kids[0];
            if (callee.kind != Expr::Kind::ident || lookup_var(callee.text))
                collect_refs(callee, out, seen);
            for (std::size_t i = 1; i < e.kids.size(); ++i)
                collect_refs(*e.kids[i], out, seen);
            return;
        }
        case Expr::Kind::member:
            collect_refs(*e.kids[0], out, seen);
            return;
        case Expr::Kind::sizeof_type:
        case Expr::Kind::literal:
            return;
        default:
            for (const auto& k : e.kids)
                collect_refs(*k, out, seen);
        }
    }

    void compound(Guards& guards)
    {
        expect("{");
        scopes_.emplace_back();
        while (!accept("}")) {
            if (peek().kind == TokenKind::end)
                fail(peek(), "'}'");
            statement(guards);
        }
        scopes_.pop_back();
    }

    ExprPtr parenthesized_condition()
    {
        expect("(");
        auto c = parse_expression();
        expect(")");
        return c;
    }

    void statement(Guards& guards)
    {
        const Token t = peek();
        if (t.kind == TokenKind::punct) {
            if (t.text == "{") {
                compound(guards);
                return;
            }
            if (t.text == ";") {
                advance();
                return;
            }
        }
        if (t.kind == TokenKind::keyword) {
            if (t.text == "if") {
                advance();
                auto c = parenthesized_condition();
                walk(*c, guards);
                guards.push_back(guard_of(*c, false));
                statement(guards);
                guards.pop_back();
                if (accept("else")) {
                    guards.push_back(guard_of(*c, true));
                    statement(guards);
                    guards.pop_back();
                }
                return;
            }
            if (t.text == "while" || t.text == "switch") {
                advance();
                auto c = parenthesized_condition();
                walk(*c, guards);
                guards.push_back(guard_of(*c, false));
                statement(guards);
                guards.pop_back();
                return;
            }
            if (t.text == "do") {
                advance();
                statement(guards);
                expect("while");
                auto c = parenthesized_condition();
                walk(*c, guards);
                expect(";");
                return;
            }
            if (t.text == "for") {
                advance();
                expect("(");
                scopes_.emplace_back();
                if (!accept(";")) {
                    if (is_type_start(peek())) {
                        local_declaration(guards);
                    } else {
                        auto init = parse_expression();
                        walk(*init, guards);
                        expect(";");
                    }
                }
                ExprPtr cond;
                if (!accept(";")) {
                    cond = parse_expression();
                    walk(*cond, guards);
                    expect(";");
                }
                ExprPtr step;
                if (!is(")"))
                    step = parse_expression();
                expect(")");
                if (cond)
                    guards.push_back(guard_of(*cond, false));
                statement(guards);
                if (step)
                    walk(*step, guards);
                if (cond)
                    guards.pop_back();
                scopes_.pop_back();
                return;
            }
            if (t.text == "case") {
                advance();
                parse_conditional();
                expect(":");
                return;
            }
            if (t.text == "default") {
                advance();
                expect(":");
                return;
            }
            if (t.text == "return") {
                advance();
                if (!accept(";")) {
                    auto e = parse_expression();
                    walk(*e, guards);
                    expect(";");
                }
                return;
            }
            if (t.text == "break" || t.text == "continue") {
                advance();
                expect(";");
                return;
            }
            if (t.text == "goto")
                unsupported(t, "goto");
            if (t.text == "else")
                fail(t, "statement");
        }
        if (t.kind == TokenKind::identifier && is(":", 1))
            unsupported(t, "labeled statement");
        if (is_type_start(t)) {
            local_declaration(guards);
            return;
        }
        auto e = parse_expression();
        walk(*e, guards);
        expect(";");
    }

    static const Expr& strip_casts(const Expr& e)
    {
        const Expr* p = &e;
        while (p->kind == Expr::Kind::cast)
            p = p->kids[0].get();
        return *p;
    }

    bool is_allocation(const Expr& init) const
    {
        const Expr& e = strip_casts(init);
        return e.kind == Expr::Kind::call && e.kids[0]->kind == Expr::Kind::ident &&
               allocators_.count(e.kids[0]->text) && !lookup_var(e.kids[0]->text);
    }

    void local_declaration(Guards& guards)
    {
        Specs s = parse_specs();
        if (!s.have_type)
            fail(peek(), "type name");
        if (accept(";"))
            return;
        while (true) {
            const Token at = peek();
            Declarator d = parse_declarator(false);
            RawType t = apply_ops(s.base, d.ops);
            if (s.is_typedef) {
                add_typedef(d.name, t, at);
            } else if (auto r = resolved(t); r && r->kind == RawType::Kind::function) {
                declare_function(d.name, *r, s.is_static, false, d.line, at);
            } else {
                Symbol sym{t, s.is_static ? ScopeClass::global : ScopeClass::local, false, s.is_static};
                if (accept("=")) {
                    auto init = parse_initializer();
                    walk(*init, guards);
                    auto rt = resolved(t);
                    if (!s.is_static && rt && rt->kind == RawType::Kind::pointer && is_allocation(*init))
                        sym.scope = ScopeClass::heap;
                }
                scopes_.back()[d.name] = sym;
            }
            if (accept(","))
                continue;
            expect(";");
            return;
        }
    }

    // --- expressions ---------------------------------------------------

    ExprPtr make(Expr::Kind kind, const Token& at)
    {
        auto e = std::make_unique<Expr>();
        e->kind = kind;
        e->line = at.line;
        e->col = at.col;
        return e;
    }

    ExprPtr parse_expression()
    {
        auto lhs = parse_assignment();
        while (is(",")) {
            const Token at = advance();
            auto e = make(Expr::Kind::comma, at);
            e->kids.push_back(std::move(lhs));
            e->kids.push_back(parse_assignment());
            lhs = std::move(e);
        }
        return lhs;
    }

    ExprPtr parse_assignment()
    {
        auto lhs = parse_conditional();
        if (peek().kind == TokenKind::punct && is_assign_op(peek().text)) {
            const Token at = advance();
            auto e = make(Expr::Kind::assign, at);
            e->op = at.text;
            e->kids.push_back(std::move(lhs));
            e->kids.push_back(parse_assignment());
            return e;
        }
        return lhs;
    }

    ExprPtr parse_conditional()
    {
        auto c = parse_binary(1);
        if (is("?")) {
            const Token at = advance();
            auto e = make(Expr::Kind::ternary, at);
            e->kids.push_back(std::move(c));
            e->kids.push_back(parse_expression());
            expect(":");
            e->kids.push_back(parse_conditional());
            return e;
        }
        return c;
    }

    ExprPtr parse_binary(int min_prec)
    {
        auto lhs = parse_unary();
        while (true) {
            const int prec = binary_precedence(peek());
            if (prec < min_prec)
                return lhs;
            const Token at = advance();
            auto rhs = parse_binary(prec + 1);
            auto e = make(Expr::Kind::binary, at);
            e->op = at.text;
            e->kids.push_back(std::move(lhs));
            e->kids.push_back(std::move(rhs));
            lhs = std::move(e);
        }
    }

    ExprPtr parse_unary()
    {
        const Token t = peek();
        if (t.kind == TokenKind::punct &&
            (t.text == "&" || t.text == "*" || t.text == "+" || t.text == "-" || t.text == "~" || t.text == "!" ||
             t.text == "++" || t.text == "--")) {
            advance();
            auto e = make(Expr::Kind::unary, t);
            e->op = t.text;
            e->kids.push_back(parse_unary());
            return e;
        }
        if (is("sizeof")) {
            advance();
            if (is("(") && is_type_start(peek(1))) {
                advance();
                auto e = make(Expr::Kind::sizeof_type, t);
                e->type = parse_type_name(e->text);
                expect(")");
                return e;
            }
            auto e = make(Expr::Kind::unary, t);
            e->op = "sizeof";
            e->kids.push_back(parse_unary());
            return e;
        }
        if (is("(") && is_type_start(peek(1))) {
            advance();
            auto e = make(Expr::Kind::cast, t);
            e->type = parse_type_name(e->text);
            expect(")");
            if (is("{"))
                unsupported(peek(), "compound literal");
            e->kids.push_back(parse_unary());
            return e;
        }
        return parse_postfix();
    }

    ExprPtr parse_postfix()
    {
        auto e = parse_primary();
        while (true) {
            const Token t = peek();
            if (is("(")) {
                advance();
                auto call = make(Expr::Kind::call, t);
                call->kids.push_back(std::move(e));
                if (!accept(")")) {
                    while (true) {
                        call->kids.push_back(parse_assignment());
                        if (accept(","))
                            continue;
                        expect(")");
                        break;
                    }
                }
                e = std::move(call);
            } else if (is("[")) {
                advance();
                auto idx = make(Expr::Kind::index, t);
                idx->kids.push_back(std::move(e));
                idx->kids.push_back(parse_expression());
                expect("]");
                e = std::move(idx);
            } else if (is(".") || is("->")) {
                advance();
                auto m = make(Expr::Kind::member, t);
                m->op = t.text;
                m->text = expect_identifier();
                m->kids.push_back(std::move(e));
                e = std::move(m);
            } else if (is("++") || is("--")) {
                advance();
                auto p = make(Expr::Kind::postfix, t);
                p->op = t.text;
                p->kids.push_back(std::move(e));
                e = std::move(p);
            } else {
                return e;
            }
        }
    }

    ExprPtr parse_primary()
    {
        const Token t = peek();
        switch (t.kind) {
        case TokenKind::identifier: {
            advance();
            auto e = make(Expr::Kind::ident, t);
            e->text = t.text;
            return e;
        }
        case TokenKind::number:
        case TokenKind::char_literal: {
            advance();
            auto e = make(Expr::Kind::literal, t);
            e->text = t.text;
            return e;
        }
        case TokenKind::string_literal: {
            auto e = make(Expr::Kind::literal, t);
            e->text = advance().text;
            while (peek().kind == TokenKind::string_literal)
                e->text += " " + advance().text;
            return e;
        }
        case TokenKind::punct:
            if (t.text == "(") {
                advance();
                auto e = parse_expression();
                expect(")");
                e->paren = true;
                return e;
            }
            break;
        case TokenKind::keyword:
        case TokenKind::end:
            break;
        }
        fail(t, "expression");
    }

    // --- analysis ------------------------------------------------------

    std::optional<RawType> type_of(const Expr& e) const
    {
        switch (e.kind) {
        case Expr::Kind::ident: {
            if (const Symbol* s = lookup_var(e.text))
                return s->type;
            if (auto f = functions_.find(e.text); f != functions_.end())
                return f->second.signature.as_type();
            return std::nullopt;
        }
        case Expr::Kind::unary: {
            if (e.op == "*") {
                auto t = type_of(*e.kids[0]);
                auto r = t ? resolved(*t) : std::nullopt;
                if (!r)
                    return std::nullopt;
                if (r->kind == RawType::Kind::pointer || r->kind == RawType::Kind::array)
                    return r->children.at(0);
                if (r->kind == RawType::Kind::function)
                    return r;
                return std::nullopt;
            }
            if (e.op == "&") {
                auto t = type_of(*e.kids[0]);
                if (t)
                    return RawType::pointer_to(*t);
            }
            return std::nullopt;
        }
        case Expr::Kind::member: {
            auto key = record_key_of_base(e);
            if (!key)
                return std::nullopt;
            auto rec = records_.find(*key);
            if (rec == records_.end())
                return std::nullopt;
            auto m = rec->second.find(e.text);
            if (m == rec->second.end())
                return std::nullopt;
            return m->second;
        }
        case Expr::Kind::index: {
            auto t = type_of(*e.kids[0]);
            auto r = t ? resolved(*t) : std::nullopt;
            if (r && (r->kind == RawType::Kind::pointer || r->kind == RawType::Kind::array))
                return r->children.at(0);
            return std::nullopt;
        }
        case Expr::Kind::call: {
            auto f = function_type_of(type_of(*e.kids[0]));
            if (f)
                return f->children.at(0);
            return std::nullopt;
        }
        case Expr::Kind::cast:
            return e.type;
        case Expr::Kind::ternary:
            return type_of(*e.kids[1]);
        case Expr::Kind::assign:
            return type_of(*e.kids[0]);
        case Expr::Kind::comma:
            return type_of(*e.kids[1]);
        default:
            return std::nullopt;
        }
    }

    std::optional<std::string> record_key_of_base(const Expr& member) const
    {
        auto t = type_of(*member.kids[0]);
        auto r = t ? resolved(*t) : std::nullopt;
        if (!r)
            return std::nullopt;
        if (member.op == "->") {
            if (r->kind != RawType::Kind::pointer && r->kind != RawType::Kind::array)
                return std::nullopt;
            r = resolved(r->children.at(0));
            if (!r)
                return std::nullopt;
        }
        if (r->kind == RawType::Kind::struct_tag)
            return "struct:" + r->name;
        if (r->kind == RawType::Kind::union_tag)
            return "union:" + r->name;
        return std::nullopt;
    }

    std::string pointer_decl_of(const Expr& e) const
    {
        switch (e.kind) {
        case Expr::Kind::ident: {
            const Symbol* s = lookup_var(e.text);
            if (s && !s->file_scope)
                return current_fn_ + "." + e.text;
            if (s && s->is_static)
                return static_function_key(unit_, e.text);
            return e.text;
        }
        case Expr::Kind::unary:
            if (e.op == "*")
                return pointer_decl_of(*e.kids[0]);
            break;
        case Expr::Kind::index:
        case Expr::Kind::cast:
            return pointer_decl_of(*e.kids[0]);
        case Expr::Kind::member:
            if (auto key = record_key_of_base(e))
                return *key + "." + e.text;
            break;
        default:
            break;
        }
        auto s = render(e);
        return e.paren ? s.substr(1, s.size() - 2) : s;
    }

    void add_direct(const std::string& callee, const Guards& guards, int line)
    {
        edges_.push_back({current_fn_, callee, guards, location(line)});
        if (sinks_.count(callee))
            calls_sinks_[current_fn_].insert(callee);
    }

    void handle_call(const Expr& call, Guards& guards)
    {
        const Expr& callee = *call.kids[0];
        if (current_fn_.empty())
            unsupported_at(call.line, call.col, "call outside a function body");

        if (callee.kind == Expr::Kind::ident) {
            const Symbol* sym = lookup_var(callee.text);
            if (!sym) {
                add_direct(callee.text, guards, call.line);
                return;
            }
        }
        if (callee.kind == Expr::Kind::unary && callee.op == "*" && callee.kids[0]->kind == Expr::Kind::ident &&
            !lookup_var(callee.kids[0]->text)) {
            add_direct(callee.kids[0]->text, guards, call.line);
            return;
        }

        auto fn = function_type_of(type_of(callee));
        if (!fn)
            unsupported_at(call.line, call.col, "call through '" + render(callee) + "', which is not a function pointer");
        std::string text = render(callee);
        if (callee.paren)
            text = text.substr(1, text.size() - 2);
        sites_.push_back({current_fn_, text, pointer_decl_of(callee), RawSignature::from_type(*fn), location(call.line),
                          guards});
        walk(callee, guards);
    }

    void walk(const Expr& e, Guards& guards)
    {
        switch (e.kind) {
        case Expr::Kind::ident:
            if (!lookup_var(e.text))
                value_uses_.insert(e.text);
            return;
        case Expr::Kind::call:
            handle_call(e, guards);
            for (std::size_t i = 1; i < e.kids.size(); ++i)
                walk(*e.kids[i], guards);
            return;
        case Expr::Kind::binary:
            if (e.op == "&&" || e.op == "||") {
                walk(*e.kids[0], guards);
                guards.push_back(guard_of(*e.kids[0], e.op == "||"));
                walk(*e.kids[1], guards);
                guards.pop_back();
                return;
            }
            break;
        case Expr::Kind::ternary:
            walk(*e.kids[0], guards);
            guards.push_back(guard_of(*e.kids[0], false));
            walk(*e.kids[1], guards);
            guards.back() = guard_of(*e.kids[0], true);
            walk(*e.kids[2], guards);
            guards.pop_back();
            return;
        case Expr::Kind::unary:
            if (e.op == "sizeof")
                return;
            break;
        case Expr::Kind::sizeof_type:
        case Expr::Kind::literal:
            return;
        default:
            break;
        }
        for (const auto& k : e.kids)
            walk(*k, guards);
    }

    // --- output --------------------------------------------------------

    std::string key_of(const std::string& name) const
    {
        if (auto f = functions_.find(name); f != functions_.end())
            return f->second.key();
        return name;
    }

    FactsDB finish()
    {
        FactsDB db;
        db.units = {unit_};
        db.sink_config = options_.sinks;
        db.typedefs = typedefs_;
        for (auto& [name, f] : functions_) {
            FunctionDecl d = f;
            d.is_address_taken = value_uses_.count(name) > 0;
            if (auto c = calls_sinks_.find(name); c != calls_sinks_.end())
                d.calls_sinks.assign(c->second.begin(), c->second.end());
            db.functions.push_back(std::move(d));
        }
        for (auto& e : edges_)
            db.direct_edges.push_back({key_of(e.caller), key_of(e.callee), e.guards, e.location});
        std::map<std::pair<std::string, std::string>, int> counters;
        for (auto& s : sites_) {
            const int n = ++counters[{s.function, s.pointer}];
            IndirectCallSite site;
            site.enclosing_function = key_of(s.function);
            site.id = site.enclosing_function + "/" + s.pointer + "#" + std::to_string(n);
            site.pointer = s.pointer;
            site.pointer_decl = s.pointer_decl;
            site.fp_signature = s.signature;
            site.location = s.location;
            site.guards = s.guards;
            db.call_sites.push_back(std::move(site));
        }
        normalize(db);
        return db;
    }
};

std::string message_of(const Error& e)
{
    std::string w = e.what();
    const std::string prefix = std::string(to_string(e.code())) + ": ";
    return w.rfind(prefix, 0) == 0 ? w.substr(prefix.size()) : w;
}

} // namespace

FactsDB parse_unit(std::string_view source, const std::string& unit, const ExtractOptions& options)
{
    Parser p(source, unit, options);
    return p.run();
}

FactsDB extract_corpus(const std::vector<std::string>& paths, const ExtractOptions& options)
{
    FactsDB acc;
    acc.sink_config = options.sinks;
    normalize(acc);
    for (const auto& path : paths) {
        std::ifstream in(path, std::ios::binary);
        if (!in)
            throw Error(ErrorCode::io_error, path, "cannot read '" + path + "'");
        std::ostringstream buf;
        buf << in.rdbuf();
        const std::string unit = std::filesystem::path(path).filename().string();
        FactsDB fragment;
        try {
            fragment = parse_unit(buf.str(), unit, options);
        } catch (const Error& e) {
            throw Error(e.code(), e.subject(), path + ": " + message_of(e));
        }
        acc = merge_facts(acc, fragment);
    }
    return acc;
}

} // namespace trop
