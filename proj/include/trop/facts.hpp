#pragma once

// The facts database: everything the analyses know about a codebase.
// The on-disk form is documented in docs/facts-schema.md.

#include "trop/sig.hpp"

#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace trop {

inline constexpr int facts_schema_version = 1;

enum class ScopeClass { global, heap, local, param, unknown };

std::string_view to_string(ScopeClass scope);
std::optional<ScopeClass> parse_scope_class(std::string_view text);

// Undeclared identifiers are treated as global.
inline ScopeClass effective_scope(ScopeClass scope)
{
    return scope == ScopeClass::unknown ? ScopeClass::global : scope;
}

struct IdentifierRef {
    std::string name;
    ScopeClass scope = ScopeClass::unknown;

    friend bool operator==(const IdentifierRef&, const IdentifierRef&) = default;
};

struct GuardAnnotation {
    std::string expression;
    std::vector<IdentifierRef> referenced;

    friend bool operator==(const GuardAnnotation&, const GuardAnnotation&) = default;
};

struct FunctionDecl {
    std::string name;
    std::string unit;
    RawSignature signature;
    bool is_static = false;
    bool is_address_taken = false;
    bool is_definition = true;
    std::vector<std::string> calls_sinks;
    std::string location;

    // Static functions are qualified by their unit: "<unit>::<name>".
    std::string key() const;

    friend bool operator==(const FunctionDecl&, const FunctionDecl&) = default;
};

std::string static_function_key(std::string_view unit, std::string_view name);

struct IndirectCallSite {
    std::string id;
    std::string enclosing_function;
    // Source spelling of the called pointer expression.
    std::string pointer;
    // Declaration the pointer comes from ("exit_process", "vulnerable.fp",
    // "struct:ngx_module_s.exit_process"); distinct-pointer counting key.
    std::string pointer_decl;
    RawSignature fp_signature;
    std::string location;
    std::vector<GuardAnnotation> guards;

    friend bool operator==(const IndirectCallSite&, const IndirectCallSite&) = default;
};

struct DirectCallEdge {
    std::string caller;
    std::string callee;
    std::vector<GuardAnnotation> guards;
    std::string location;

    friend bool operator==(const DirectCallEdge&, const DirectCallEdge&) = default;
};

using SitePair = std::pair<std::string, std::string>; // (site id, function key)

struct GroundTruthLabels {
    std::set<SitePair> valid_pairs;

    friend bool operator==(const GroundTruthLabels&, const GroundTruthLabels&) = default;
};

struct FactsDB {
    std::vector<std::string> units;
    std::vector<FunctionDecl> functions;
    std::vector<IndirectCallSite> call_sites;
    std::vector<DirectCallEdge> direct_edges;
    TypedefTable typedefs;
    std::optional<GroundTruthLabels> labels;
    std::vector<std::string> sink_config;

    // Lookups require canonical ordering (see normalize()).
    const FunctionDecl* find_function(std::string_view key) const;
    const IndirectCallSite* find_site(std::string_view id) const;

    friend bool operator==(const FactsDB&, const FactsDB&) = default;
};

// Sorts and deduplicates every collection into the canonical order.
void normalize(FactsDB& db);

struct Diagnostic {
    enum class Severity { error, warning };

    Severity severity = Severity::error;
    std::string code;
    std::string subject;
    std::string message;

    friend bool operator==(const Diagnostic&, const Diagnostic&) = default;
};

std::vector<Diagnostic> validate_facts(const FactsDB& db);

nlohmann::json to_json(const RawType& type);
nlohmann::json to_json(const RawSignature& sig);
nlohmann::json to_json(const GuardAnnotation& guard);
nlohmann::json to_json(const FactsDB& db);
nlohmann::json to_json(const Diagnostic& d);

RawType raw_type_from_json(const nlohmann::json& j, const std::string& path = "$");
RawSignature raw_signature_from_json(const nlohmann::json& j, const std::string& path = "$");
FactsDB facts_from_json(const nlohmann::json& j);
// Reads the optional "guards" array member of `j`; `path` prefixes errors.
std::vector<GuardAnnotation> guards_from_json(const nlohmann::json& j, const std::string& path = "$");

// Parses, normalizes and validates. Throws Error (schema_violation,
// referential_integrity, cyclic_typedef, ...).
FactsDB load_facts(std::istream& in);
FactsDB load_facts_file(const std::string& path);

// Canonical JSON text (sorted keys, two-space indent, trailing newline).
std::string save_facts(const FactsDB& db);

// Sidecar pair files: a JSON array of [site_id, function_key] pairs, or an
// object with a "valid_pairs" member holding such an array.
std::set<SitePair> load_pairs(std::istream& in);
std::set<SitePair> load_pairs_file(const std::string& path);

// Union of two databases over disjoint units. Throws unit_collision,
// duplicate_definition, typedef_conflict or any validation error.
FactsDB merge_facts(const FactsDB& app, const FactsDB& lib);

} // namespace trop
