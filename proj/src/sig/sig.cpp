#include "trop/sig.hpp"

#include "trop/error.hpp"

#include <cstdio>
#include <set>
#include <sstream>

namespace trop {

RawType RawType::builtin(std::string spelling)
{
    RawType t;
    t.kind = Kind::builtin;
    t.name = std::move(spelling);
    return t;
}

RawType RawType::named(std::string typedef_name)
{
    RawType t;
    t.kind = Kind::typedef_name;
    t.name = std::move(typedef_name);
    return t;
}

RawType RawType::tagged(Kind kind, std::string tag)
{
    RawType t;
    t.kind = kind;
    t.name = std::move(tag);
    return t;
}

RawType RawType::pointer_to(RawType pointee)
{
    RawType t;
    t.kind = Kind::pointer;
    t.children.push_back(std::move(pointee));
    return t;
}

RawType RawType::array_of(RawType element, std::optional<std::uint64_t> size)
{
    RawType t;
    t.kind = Kind::array;
    t.children.push_back(std::move(element));
    t.array_size = size;
    return t;
}

RawType RawType::function(RawType ret, std::vector<RawType> params, bool variadic)
{
    RawType t;
    t.kind = Kind::function;
    t.children.reserve(params.size() + 1);
    t.children.push_back(std::move(ret));
    for (auto& p : params)
        t.children.push_back(std::move(p));
    t.variadic = variadic;
    return t;
}

RawType RawSignature::as_type() const
{
    return RawType::function(ret, params, variadic);
}

RawSignature RawSignature::from_type(const RawType& function_type)
{
    if (function_type.kind != RawType::Kind::function || function_type.children.empty())
        throw Error(ErrorCode::invalid_argument, "", "not a function type");
    RawSignature sig;
    sig.ret = function_type.children.front();
    sig.params.assign(function_type.children.begin() + 1, function_type.children.end());
    sig.variadic = function_type.variadic;
    return sig;
}

std::string CanonicalSignature::serialize() const
{
    std::string out = return_token.text;
    out += '(';
    for (std::size_t i = 0; i < param_tokens.size(); ++i) {
        if (i)
            out += ',';
        out += param_tokens[i].text;
    }
    if (variadic)
        out += param_tokens.empty() ? "..." : ",...";
    out += ')';
    return out;
}

std::string MatchMode::name() const
{
    switch (kind) {
    case Kind::strict:
        return "strict";
    case Kind::relaxed_ptr:
        return "relaxed_ptr";
    case Kind::arity:
        return arity_include_return ? "arity+ret" : "arity";
    }
    return "strict";
}

MatchMode parse_match_mode(std::string_view text)
{
    if (text == "strict")
        return MatchMode::strict();
    if (text == "relaxed_ptr" || text == "relaxed")
        return MatchMode::relaxed_ptr();
    if (text == "arity")
        return MatchMode::arity(false);
    if (text == "arity+ret")
        return MatchMode::arity(true);
    throw Error(ErrorCode::invalid_argument, std::string(text),
                "unknown match mode '" + std::string(text) + "' (expected strict, relaxed_ptr, arity, arity+ret)");
}

std::string TypeHash::hex() const
{
    char buf[19];
    std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(value));
    return buf;
}

std::string normalize_builtin(std::string_view spelling)
{
    std::istringstream words{std::string(spelling)};
    std::string w;
    int n_signed = 0, n_unsigned = 0, n_short = 0, n_long = 0, n_char = 0, n_int = 0;
    int n_float = 0, n_double = 0, n_void = 0, n_bool = 0, n_other = 0;
    std::string other;
    while (words >> w) {
        if (w == "signed" || w == "__signed__")
            ++n_signed;
        else if (w == "unsigned")
            ++n_unsigned;
        else if (w == "short")
            ++n_short;
        else if (w == "long")
            ++n_long;
        else if (w == "char")
            ++n_char;
        else if (w == "int")
            ++n_int;
        else if (w == "float")
            ++n_float;
        else if (w == "double")
            ++n_double;
        else if (w == "void")
            ++n_void;
        else if (w == "_Bool" || w == "bool")
            ++n_bool;
        else {
            ++n_other;
            if (!other.empty())
                other += '_';
            other += w;
        }
    }
    if (n_other)
        // Opaque spellings (e.g. "__int128") are kept, joined without whitespace.
        return other;
    if (n_void)
        return "void";
    if (n_bool)
        return "_Bool";
    if (n_float)
        return "float";
    if (n_double)
        return n_long ? "long_double" : "double";
    const std::string sign = n_unsigned ? "unsigned_" : "";
    if (n_char) {
        if (n_unsigned)
            return "unsigned_char";
        return n_signed ? "signed_char" : "char";
    }
    if (n_short)
        return sign + "short";
    if (n_long >= 2)
        return sign + "long_long";
    if (n_long == 1)
        return sign + "long";
    return sign + "int";
}

const RawType& resolve_typedefs(const RawType& type, const TypedefTable& typedefs)
{
    const RawType* cur = &type;
    std::set<std::string, std::less<>> seen;
    while (cur->kind == RawType::Kind::typedef_name) {
        if (!seen.insert(cur->name).second)
            throw Error(ErrorCode::cyclic_typedef, cur->name, "typedef cycle through '" + cur->name + "'");
        auto it = typedefs.find(cur->name);
        if (it == typedefs.end())
            throw Error(ErrorCode::unresolved_typedef, cur->name, "unresolved typedef '" + cur->name + "'");
        cur = &it->second;
    }
    return *cur;
}

std::optional<std::string> find_typedef_cycle(const TypedefTable& typedefs)
{
    // Only chains of bare typedef names can cycle; a typedef reached through a
    // pointer still has to be complete before use, so those are cycles too.
    enum class State { unvisited, active, done };
    std::map<std::string, State, std::less<>> state;
    for (const auto& [name, _] : typedefs)
        state[name] = State::unvisited;

    std::optional<std::string> found;
    auto visit_type = [&](auto&& self_name, auto&& self_type, const RawType& t) -> void {
        if (found)
            return;
        if (t.kind == RawType::Kind::typedef_name) {
            if (typedefs.count(t.name))
                self_name(self_name, self_type, t.name);
            return;
        }
        for (const auto& c : t.children)
            self_type(self_name, self_type, c);
    };
    auto visit_name = [&](auto&& self_name, auto&& self_type, const std::string& name) -> void {
        if (found)
            return;
        auto& st = state[name];
        if (st == State::done)
            return;
        if (st == State::active) {
            found = name;
            return;
        }
        st = State::active;
        visit_type(self_name, self_type, typedefs.find(name)->second);
        st = State::done;
    };
    for (const auto& [name, _] : typedefs) {
        visit_name(visit_name, visit_type, name);
        if (found)
            break;
    }
    return found;
}

namespace {

CanonicalSignature canonical_strict_or_relaxed(const RawSignature& sig, const TypedefTable& typedefs, bool relaxed);

bool is_void(const RawType& t)
{
    return t.kind == RawType::Kind::builtin && normalize_builtin(t.name) == "void";
}

TypeToken function_pointer_token(const RawType& fn, const TypedefTable& typedefs, bool relaxed)
{
    const auto inner = canonical_strict_or_relaxed(RawSignature::from_type(fn), typedefs, relaxed);
    return {"ptr<fn:" + inner.serialize() + ">", 1};
}

TypeToken token_of(const RawType& raw, const TypedefTable& typedefs, bool relaxed, bool param_position)
{
    const RawType& t = resolve_typedefs(raw, typedefs);
    switch (t.kind) {
    case RawType::Kind::builtin:
        return {normalize_builtin(t.name), 0};
    case RawType::Kind::struct_tag:
        return {"struct:" + t.name, 0};
    case RawType::Kind::union_tag:
        return {"union:" + t.name, 0};
    case RawType::Kind::enum_tag:
        return {"enum:" + t.name, 0};
    case RawType::Kind::typedef_name:
        break;
    case RawType::Kind::pointer: {
        const RawType& pointee = resolve_typedefs(t.children.at(0), typedefs);
        if (pointee.kind == RawType::Kind::function)
            return function_pointer_token(pointee, typedefs, relaxed);
        // Resolve the pointee even when collapsing so unresolved typedefs are
        // reported in every mode.
        TypeToken inner = token_of(pointee, typedefs, relaxed, false);
        if (relaxed)
            return {"ptr", 1};
        return {"ptr<" + inner.text + ">", inner.pointer_depth + 1};
    }
    case RawType::Kind::array: {
        if (param_position) {
            // Array parameters decay to pointers.
            return token_of(RawType::pointer_to(t.children.at(0)), typedefs, relaxed, false);
        }
        TypeToken inner = token_of(t.children.at(0), typedefs, relaxed, false);
        std::string text = "arr<" + inner.text;
        if (t.array_size)
            text += "," + std::to_string(*t.array_size);
        text += ">";
        return {text, inner.pointer_depth};
    }
    case RawType::Kind::function:
        if (param_position)
            return function_pointer_token(t, typedefs, relaxed);
        return {"fn:" + canonical_strict_or_relaxed(RawSignature::from_type(t), typedefs, relaxed).serialize(), 0};
    }
    return {"?", 0};
}

bool is_void_param_list(const RawSignature& sig, const TypedefTable& typedefs)
{
    return sig.params.size() == 1 && !sig.variadic && is_void(resolve_typedefs(sig.params[0], typedefs));
}

CanonicalSignature canonical_strict_or_relaxed(const RawSignature& sig, const TypedefTable& typedefs, bool relaxed)
{
    CanonicalSignature out;
    out.return_token = token_of(sig.ret, typedefs, relaxed, false);
    out.variadic = sig.variadic;
    if (is_void_param_list(sig, typedefs))
        return out;
    out.param_tokens.reserve(sig.params.size());
    for (const auto& p : sig.params)
        out.param_tokens.push_back(token_of(p, typedefs, relaxed, true));
    return out;
}

} // namespace

CanonicalSignature canonicalize(const RawSignature& sig, const TypedefTable& typedefs, MatchMode mode)
{
    switch (mode.kind) {
    case MatchMode::Kind::strict:
        return canonical_strict_or_relaxed(sig, typedefs, false);
    case MatchMode::Kind::relaxed_ptr:
        return canonical_strict_or_relaxed(sig, typedefs, true);
    case MatchMode::Kind::arity: {
        CanonicalSignature full = canonical_strict_or_relaxed(sig, typedefs, false);
        CanonicalSignature out;
        out.variadic = full.variadic;
        out.param_tokens.assign(full.param_tokens.size(), TypeToken{"arg", 0});
        if (mode.arity_include_return && full.return_token.text == "void")
            out.return_token = {"void", 0};
        else
            out.return_token = {"ret", 0};
        return out;
    }
    }
    return canonical_strict_or_relaxed(sig, typedefs, false);
}

TypeHash type_hash(const CanonicalSignature& sig, EdgeKind edge_kind)
{
    constexpr std::uint64_t offset_basis = 0xcbf29ce484222325ULL;
    constexpr std::uint64_t prime = 0x100000001b3ULL;

    std::uint64_t h = offset_basis;
    auto mix = [&](unsigned char byte) {
        h ^= byte;
        h *= prime;
    };
    mix(static_cast<unsigned char>(edge_kind));
    for (char c : sig.serialize())
        mix(static_cast<unsigned char>(c));
    return {h, edge_kind};
}

bool signatures_match(const CanonicalSignature& a, const CanonicalSignature& b, MatchMode)
{
    return a.serialize() == b.serialize();
}

} // namespace trop
