#pragma once

// Function type signatures: the raw structured form recorded in facts files,
// the canonical form hashes are computed over, and the matching policies.
//
// Canonical serialization grammar (the stability contract for hashes):
//
//   signature := token '(' [ token { ',' token } ] [ ',...' | '...' ] ')'
//   token     := builtin | 'struct:' tag | 'union:' tag | 'enum:' tag
//              | 'ptr<' token '>' | 'ptr<fn:' signature '>' | 'ptr'
//              | 'arr<' token [ ',' size ] '>' | 'arg' | 'ret'
//
// See docs/signature-grammar.md for the full description.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace trop {

struct RawType {
    enum class Kind {
        builtin,
        typedef_name,
        struct_tag,
        union_tag,
        enum_tag,
        pointer,
        array,
        function,
    };

    Kind kind = Kind::builtin;
    // Builtin spelling, typedef name, or tag. Unused for derived kinds.
    std::string name;
    // pointer/array: {element}; function: {return, params...}.
    std::vector<RawType> children;
    bool variadic = false;
    std::optional<std::uint64_t> array_size;
    bool is_const = false;
    bool is_volatile = false;

    static RawType builtin(std::string spelling);
    static RawType named(std::string typedef_name);
    static RawType tagged(Kind kind, std::string tag);
    static RawType pointer_to(RawType pointee);
    static RawType array_of(RawType element, std::optional<std::uint64_t> size = std::nullopt);
    static RawType function(RawType ret, std::vector<RawType> params, bool variadic = false);

    friend bool operator==(const RawType&, const RawType&) = default;
};

struct RawSignature {
    RawType ret;
    std::vector<RawType> params;
    bool variadic = false;

    RawType as_type() const;
    static RawSignature from_type(const RawType& function_type);

    friend bool operator==(const RawSignature&, const RawSignature&) = default;
};

using TypedefTable = std::map<std::string, RawType, std::less<>>;

struct TypeToken {
    std::string text;
    int pointer_depth = 0;

    friend bool operator==(const TypeToken&, const TypeToken&) = default;
};

struct CanonicalSignature {
    TypeToken return_token;
    std::vector<TypeToken> param_tokens;
    bool variadic = false;

    std::string serialize() const;

    friend bool operator==(const CanonicalSignature&, const CanonicalSignature&) = default;
};

struct MatchMode {
    enum class Kind { strict, relaxed_ptr, arity };

    Kind kind = Kind::strict;
    bool arity_include_return = false;

    static MatchMode strict() { return {Kind::strict, false}; }
    static MatchMode relaxed_ptr() { return {Kind::relaxed_ptr, false}; }
    static MatchMode arity(bool include_return = false) { return {Kind::arity, include_return}; }

    // "strict", "relaxed_ptr", "arity" or "arity+ret".
    std::string name() const;

    friend bool operator==(const MatchMode&, const MatchMode&) = default;
};

// Accepts the names produced by MatchMode::name(). Throws invalid_argument.
MatchMode parse_match_mode(std::string_view text);

enum class EdgeKind : std::uint8_t { forward = 0x01, backward = 0x02 };

struct TypeHash {
    std::uint64_t value = 0;
    EdgeKind edge_kind = EdgeKind::forward;

    std::string hex() const;

    friend bool operator==(const TypeHash&, const TypeHash&) = default;
};

// Normalizes a builtin spelling ("long unsigned int" -> "unsigned_long").
std::string normalize_builtin(std::string_view spelling);

// Follows typedef names until a structural type is reached.
// Throws unresolved_typedef / cyclic_typedef.
const RawType& resolve_typedefs(const RawType& type, const TypedefTable& typedefs);

// Returns a typedef name that participates in a cycle, if any.
std::optional<std::string> find_typedef_cycle(const TypedefTable& typedefs);

CanonicalSignature canonicalize(const RawSignature& sig, const TypedefTable& typedefs, MatchMode mode);

// FNV-1a 64 over one domain byte (0x01 forward, 0x02 backward) followed by
// the canonical serialization.
TypeHash type_hash(const CanonicalSignature& sig, EdgeKind edge_kind);

bool signatures_match(const CanonicalSignature& a, const CanonicalSignature& b, MatchMode mode);

} // namespace trop
