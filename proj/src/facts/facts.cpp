#include "trop/facts.hpp"

#include "trop/error.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

using nlohmann::json;

namespace trop {

std::string_view to_string(ScopeClass scope)
{
    switch (scope) {
    case ScopeClass::global:
        return "global";
    case ScopeClass::heap:
        return "heap";
    case ScopeClass::local:
        return "local";
    case ScopeClass::param:
        return "param";
    case ScopeClass::unknown:
        return "unknown";
    }
    return "unknown";
}

std::optional<ScopeClass> parse_scope_class(std::string_view text)
{
    for (auto s : {ScopeClass::global, ScopeClass::heap, ScopeClass::local, ScopeClass::param, ScopeClass::unknown})
        if (to_string(s) == text)
            return s;
    return std::nullopt;
}

std::string static_function_key(std::string_view unit, std::string_view name)
{
    std::string key(unit);
    key += "::";
    key += name;
    return key;
}

std::string FunctionDecl::key() const
{
    return is_static ? static_function_key(unit, name) : name;
}

const FunctionDecl* FactsDB::find_function(std::string_view key) const
{
    auto it = std::lower_bound(functions.begin(), functions.end(), key,
                               [](const FunctionDecl& f, std::string_view k) { return f.key() < k; });
    if (it != functions.end() && it->key() == key)
        return &*it;
    return nullptr;
}

const IndirectCallSite* FactsDB::find_site(std::string_view id) const
{
    auto it = std::lower_bound(call_sites.begin(), call_sites.end(), id,
                               [](const IndirectCallSite& s, std::string_view k) { return s.id < k; });
    if (it != call_sites.end() && it->id == id)
        return &*it;
    return nullptr;
}

namespace {

void sort_unique(std::vector<std::string>& v)
{
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
}

std::string guards_key(const std::vector<GuardAnnotation>& guards)
{
    json j = json::array();
    for (const auto& g : guards)
        j.push_back(to_json(g));
    return j.dump();
}

bool edge_less(const DirectCallEdge& a, const DirectCallEdge& b)
{
    if (a.caller != b.caller)
        return a.caller < b.caller;
    if (a.callee != b.callee)
        return a.callee < b.callee;
    if (a.location != b.location)
        return a.location < b.location;
    return guards_key(a.guards) < guards_key(b.guards);
}

} // namespace

void normalize(FactsDB& db)
{
    sort_unique(db.units);
    sort_unique(db.sink_config);
    for (auto& f : db.functions)
        sort_unique(f.calls_sinks);
    std::stable_sort(db.functions.begin(), db.functions.end(),
                     [](const FunctionDecl& a, const FunctionDecl& b) { return a.key() < b.key(); });
    std::stable_sort(db.call_sites.begin(), db.call_sites.end(),
                     [](const IndirectCallSite& a, const IndirectCallSite& b) { return a.id < b.id; });
    std::sort(db.direct_edges.begin(), db.direct_edges.end(), edge_less);
    db.direct_edges.erase(std::unique(db.direct_edges.begin(), db.direct_edges.end()), db.direct_edges.end());
}

// ---------------------------------------------------------------------------
// JSON encoding

json to_json(const RawType& type)
{
    json j = json::object();
    switch (type.kind) {
    case RawType::Kind::builtin:
        j["builtin"] = type.name;
        break;
    case RawType::Kind::typedef_name:
        j["typedef"] = type.name;
        break;
    case RawType::Kind::struct_tag:
        j["struct"] = type.name;
        break;
    case RawType::Kind::union_tag:
        j["union"] = type.name;
        break;
    case RawType::Kind::enum_tag:
        j["enum"] = type.name;
        break;
    case RawType::Kind::pointer:
        j["pointer"] = to_json(type.children.at(0));
        break;
    case RawType::Kind::array:
        j["array"] = to_json(type.children.at(0));
        if (type.array_size)
            j["size"] = *type.array_size;
        break;
    case RawType::Kind::function:
        j["function"] = to_json(RawSignature::from_type(type));
        break;
    }
    if (type.is_const)
        j["const"] = true;
    if (type.is_volatile)
        j["volatile"] = true;
    return j;
}

json to_json(const RawSignature& sig)
{
    json params = json::array();
    for (const auto& p : sig.params)
        params.push_back(to_json(p));
    return json{{"ret", to_json(sig.ret)}, {"params", std::move(params)}, {"variadic", sig.variadic}};
}

json to_json(const GuardAnnotation& guard)
{
    json refs = json::array();
    for (const auto& r : guard.referenced)
        refs.push_back(json{{"name", r.name}, {"scope", std::string(to_string(r.scope))}});
    return json{{"expression", guard.expression}, {"referenced", std::move(refs)}};
}

namespace {

json guards_json(const std::vector<GuardAnnotation>& guards)
{
    json j = json::array();
    for (const auto& g : guards)
        j.push_back(to_json(g));
    return j;
}

json pairs_json(const std::set<SitePair>& pairs)
{
    json j = json::array();
    for (const auto& [site, fn] : pairs)
        j.push_back(json::array({site, fn}));
    return j;
}

} // namespace

json to_json(const FactsDB& db)
{
    json typedefs = json::object();
    for (const auto& [name, type] : db.typedefs)
        typedefs[name] = to_json(type);

    json functions = json::array();
    for (const auto& f : db.functions) {
        functions.push_back(json{
            {"name", f.name},
            {"unit", f.unit},
            {"signature", to_json(f.signature)},
            {"is_static", f.is_static},
            {"is_address_taken", f.is_address_taken},
            {"is_definition", f.is_definition},
            {"calls_sinks", f.calls_sinks},
            {"location", f.location},
        });
    }

    json sites = json::array();
    for (const auto& s : db.call_sites) {
        sites.push_back(json{
            {"id", s.id},
            {"enclosing_function", s.enclosing_function},
            {"pointer", s.pointer},
            {"pointer_decl", s.pointer_decl},
            {"fp_signature", to_json(s.fp_signature)},
            {"location", s.location},
            {"guards", guards_json(s.guards)},
        });
    }

    json edges = json::array();
    for (const auto& e : db.direct_edges) {
        edges.push_back(json{
            {"caller", e.caller},
            {"callee", e.callee},
            {"guards", guards_json(e.guards)},
            {"location", e.location},
        });
    }

    json j{
        {"schema_version", facts_schema_version},
        {"units", db.units},
        {"sink_config", db.sink_config},
        {"typedefs", std::move(typedefs)},
        {"functions", std::move(functions)},
        {"call_sites", std::move(sites)},
        {"direct_edges", std::move(edges)},
    };
    if (db.labels)
        j["labels"] = json{{"valid_pairs", pairs_json(db.labels->valid_pairs)}};
    return j;
}

json to_json(const Diagnostic& d)
{
    return json{
        {"severity", d.severity == Diagnostic::Severity::error ? "error" : "warning"},
        {"code", d.code},
        {"subject", d.subject},
        {"message", d.message},
    };
}

// ---------------------------------------------------------------------------
// JSON decoding

namespace {

[[noreturn]] void schema_error(const std::string& path, const std::string& reason)
{
    throw Error(ErrorCode::schema_violation, path, path + ": " + reason);
}

void require_object(const json& j, const std::string& path)
{
    if (!j.is_object())
        schema_error(path, "expected object");
}

void reject_unknown_keys(const json& j, const std::string& path, std::initializer_list<std::string_view> allowed)
{
    for (const auto& [key, _] : j.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            schema_error(path + "." + key, "unknown field");
    }
}

std::string get_string(const json& j, const std::string& path, const char* key, std::optional<std::string> fallback = {})
{
    auto it = j.find(key);
    if (it == j.end()) {
        if (fallback)
            return *fallback;
        schema_error(path + "." + key, "required field missing");
    }
    if (!it->is_string())
        schema_error(path + "." + key, "expected string");
    return it->get<std::string>();
}

bool get_bool(const json& j, const std::string& path, const char* key, bool fallback)
{
    auto it = j.find(key);
    if (it == j.end())
        return fallback;
    if (!it->is_boolean())
        schema_error(path + "." + key, "expected boolean");
    return it->get<bool>();
}

const json* get_array(const json& j, const std::string& path, const char* key, bool required = false)
{
    auto it = j.find(key);
    if (it == j.end() || (it->is_null() && !required)) {
        if (required)
            schema_error(path + "." + key, "required field missing");
        return nullptr;
    }
    if (!it->is_array())
        schema_error(path + "." + key, "expected array");
    return &*it;
}

std::vector<std::string> string_list(const json& j, const std::string& path, const char* key)
{
    std::vector<std::string> out;
    if (const json* arr = get_array(j, path, key)) {
        for (std::size_t i = 0; i < arr->size(); ++i) {
            const auto& v = (*arr)[i];
            if (!v.is_string())
                schema_error(path + "." + key + "[" + std::to_string(i) + "]", "expected string");
            out.push_back(v.get<std::string>());
        }
    }
    return out;
}

} // namespace

std::vector<GuardAnnotation> guards_from_json(const json& j, const std::string& path)
{
    std::vector<GuardAnnotation> out;
    const json* arr = get_array(j, path, "guards");
    if (!arr)
        return out;
    for (std::size_t i = 0; i < arr->size(); ++i) {
        const std::string gpath = path + ".guards[" + std::to_string(i) + "]";
        const json& g = (*arr)[i];
        require_object(g, gpath);
        reject_unknown_keys(g, gpath, {"expression", "referenced"});
        GuardAnnotation guard;
        guard.expression = get_string(g, gpath, "expression");
        if (const json* refs = get_array(g, gpath, "referenced")) {
            for (std::size_t k = 0; k < refs->size(); ++k) {
                const std::string rpath = gpath + ".referenced[" + std::to_string(k) + "]";
                const json& r = (*refs)[k];
                require_object(r, rpath);
                reject_unknown_keys(r, rpath, {"name", "scope"});
                IdentifierRef ref;
                ref.name = get_string(r, rpath, "name");
                const std::string scope = get_string(r, rpath, "scope", "unknown");
                auto parsed = parse_scope_class(scope);
                if (!parsed)
                    schema_error(rpath + ".scope", "unknown scope class '" + scope + "'");
                ref.scope = *parsed;
                guard.referenced.push_back(std::move(ref));
            }
        }
        out.push_back(std::move(guard));
    }
    return out;
}

namespace {

std::set<SitePair> pairs_from_json(const json& arr, const std::string& path)
{
    if (!arr.is_array())
        schema_error(path, "expected array of [site_id, function_key] pairs");
    std::set<SitePair> out;
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const json& p = arr[i];
        const std::string ppath = path + "[" + std::to_string(i) + "]";
        if (!p.is_array() || p.size() != 2 || !p[0].is_string() || !p[1].is_string())
            schema_error(ppath, "expected [site_id, function_key]");
        out.emplace(p[0].get<std::string>(), p[1].get<std::string>());
    }
    return out;
}

} // namespace

RawType raw_type_from_json(const json& j, const std::string& path)
{
    require_object(j, path);
    reject_unknown_keys(j, path,
                        {"builtin", "typedef", "struct", "union", "enum", "pointer", "array", "function", "size",
                         "const", "volatile"});
    constexpr std::string_view kinds[] = {"builtin", "typedef", "struct", "union", "enum", "pointer", "array", "function"};
    int n_kinds = 0;
    for (auto k : kinds)
        n_kinds += j.contains(k) ? 1 : 0;
    if (n_kinds != 1)
        schema_error(path, "type needs exactly one of builtin/typedef/struct/union/enum/pointer/array/function");

    RawType t;
    if (j.contains("size") && !j.contains("array"))
        schema_error(path + ".size", "only arrays carry a size");
    if (j.contains("builtin")) {
        t = RawType::builtin(get_string(j, path, "builtin"));
        if (t.name.empty())
            schema_error(path + ".builtin", "empty spelling");
    } else if (j.contains("typedef")) {
        t = RawType::named(get_string(j, path, "typedef"));
    } else if (j.contains("struct")) {
        t = RawType::tagged(RawType::Kind::struct_tag, get_string(j, path, "struct"));
    } else if (j.contains("union")) {
        t = RawType::tagged(RawType::Kind::union_tag, get_string(j, path, "union"));
    } else if (j.contains("enum")) {
        t = RawType::tagged(RawType::Kind::enum_tag, get_string(j, path, "enum"));
    } else if (j.contains("pointer")) {
        t = RawType::pointer_to(raw_type_from_json(j["pointer"], path + ".pointer"));
    } else if (j.contains("array")) {
        std::optional<std::uint64_t> size;
        if (j.contains("size")) {
            if (!j["size"].is_number_unsigned())
                schema_error(path + ".size", "expected non-negative integer");
            size = j["size"].get<std::uint64_t>();
        }
        t = RawType::array_of(raw_type_from_json(j["array"], path + ".array"), size);
    } else {
        t = raw_signature_from_json(j["function"], path + ".function").as_type();
    }
    t.is_const = get_bool(j, path, "const", false);
    t.is_volatile = get_bool(j, path, "volatile", false);
    return t;
}

RawSignature raw_signature_from_json(const json& j, const std::string& path)
{
    require_object(j, path);
    reject_unknown_keys(j, path, {"ret", "params", "variadic"});
    if (!j.contains("ret"))
        schema_error(path + ".ret", "required field missing");
    RawSignature sig;
    sig.ret = raw_type_from_json(j["ret"], path + ".ret");
    if (const json* params = get_array(j, path, "params", true)) {
        for (std::size_t i = 0; i < params->size(); ++i)
            sig.params.push_back(raw_type_from_json((*params)[i], path + ".params[" + std::to_string(i) + "]"));
    }
    sig.variadic = get_bool(j, path, "variadic", false);
    return sig;
}

FactsDB facts_from_json(const json& j)
{
    const std::string root = "$";
    require_object(j, root);
    reject_unknown_keys(j, root,
                        {"schema_version", "units", "sink_config", "typedefs", "functions", "call_sites",
                         "direct_edges", "labels"});
    auto ver = j.find("schema_version");
    if (ver == j.end())
        schema_error("$.schema_version", "required field missing");
    if (!ver->is_number_integer() || ver->get<int>() != facts_schema_version)
        schema_error("$.schema_version", "unsupported schema version (expected " +
                                             std::to_string(facts_schema_version) + ")");

    FactsDB db;
    db.sink_config = string_list(j, root, "sink_config");

    if (auto td = j.find("typedefs"); td != j.end() && !td->is_null()) {
        if (!td->is_object())
            schema_error("$.typedefs", "expected object");
        for (const auto& [name, type] : td->items())
            db.typedefs.emplace(name, raw_type_from_json(type, "$.typedefs." + name));
    }

    if (const json* fns = get_array(j, root, "functions")) {
        for (std::size_t i = 0; i < fns->size(); ++i) {
            const std::string p = "$.functions[" + std::to_string(i) + "]";
            const json& f = (*fns)[i];
            require_object(f, p);
            reject_unknown_keys(f, p,
                                {"name", "unit", "signature", "is_static", "is_address_taken", "is_definition",
                                 "calls_sinks", "location"});
            FunctionDecl decl;
            decl.name = get_string(f, p, "name");
            decl.unit = get_string(f, p, "unit");
            if (!f.contains("signature"))
                schema_error(p + ".signature", "required field missing");
            decl.signature = raw_signature_from_json(f["signature"], p + ".signature");
            decl.is_static = get_bool(f, p, "is_static", false);
            decl.is_address_taken = get_bool(f, p, "is_address_taken", false);
            decl.is_definition = get_bool(f, p, "is_definition", true);
            decl.calls_sinks = string_list(f, p, "calls_sinks");
            decl.location = get_string(f, p, "location", "");
            db.functions.push_back(std::move(decl));
        }
    }

    if (const json* sites = get_array(j, root, "call_sites")) {
        for (std::size_t i = 0; i < sites->size(); ++i) {
            const std::string p = "$.call_sites[" + std::to_string(i) + "]";
            const json& s = (*sites)[i];
            require_object(s, p);
            reject_unknown_keys(s, p,
                                {"id", "enclosing_function", "pointer", "pointer_decl", "fp_signature", "location",
                                 "guards"});
            IndirectCallSite site;
            site.id = get_string(s, p, "id");
            site.enclosing_function = get_string(s, p, "enclosing_function");
            site.pointer = get_string(s, p, "pointer", "");
            site.pointer_decl = get_string(s, p, "pointer_decl", site.pointer);
            if (!s.contains("fp_signature"))
                schema_error(p + ".fp_signature", "required field missing");
            site.fp_signature = raw_signature_from_json(s["fp_signature"], p + ".fp_signature");
            site.location = get_string(s, p, "location", "");
            site.guards = guards_from_json(s, p);
            db.call_sites.push_back(std::move(site));
        }
    }

    if (const json* edges = get_array(j, root, "direct_edges")) {
        for (std::size_t i = 0; i < edges->size(); ++i) {
            const std::string p = "$.direct_edges[" + std::to_string(i) + "]";
            const json& e = (*edges)[i];
            require_object(e, p);
            reject_unknown_keys(e, p, {"caller", "callee", "guards", "location"});
            DirectCallEdge edge;
            edge.caller = get_string(e, p, "caller");
            edge.callee = get_string(e, p, "callee");
            edge.guards = guards_from_json(e, p);
            edge.location = get_string(e, p, "location", "");
            db.direct_edges.push_back(std::move(edge));
        }
    }

    if (auto lab = j.find("labels"); lab != j.end() && !lab->is_null()) {
        GroundTruthLabels labels;
        if (lab->is_array()) {
            labels.valid_pairs = pairs_from_json(*lab, "$.labels");
        } else {
            require_object(*lab, "$.labels");
            reject_unknown_keys(*lab, "$.labels", {"valid_pairs"});
            if (!lab->contains("valid_pairs"))
                schema_error("$.labels.valid_pairs", "required field missing");
            labels.valid_pairs = pairs_from_json((*lab)["valid_pairs"], "$.labels.valid_pairs");
        }
        db.labels = std::move(labels);
    }

    if (j.contains("units")) {
        db.units = string_list(j, root, "units");
    } else {
        for (const auto& f : db.functions)
            db.units.push_back(f.unit);
    }

    normalize(db);
    return db;
}

// ---------------------------------------------------------------------------
// Validation

std::vector<Diagnostic> validate_facts(const FactsDB& db)
{
    using Sev = Diagnostic::Severity;
    std::vector<Diagnostic> out;
    auto error = [&](std::string code, std::string subject, std::string message) {
        out.push_back({Sev::error, std::move(code), std::move(subject), std::move(message)});
    };
    auto warn = [&](std::string code, std::string subject, std::string message) {
        out.push_back({Sev::warning, std::move(code), std::move(subject), std::move(message)});
    };

    const bool has_cycle_free_typedefs = [&] {
        if (auto cyc = find_typedef_cycle(db.typedefs)) {
            error("CyclicTypedef", *cyc, "typedef '" + *cyc + "' is part of a cycle");
            return false;
        }
        return true;
    }();

    auto check_signature = [&](const RawSignature& sig, const std::string& owner) {
        if (!has_cycle_free_typedefs)
            return;
        try {
            (void)canonicalize(sig, db.typedefs, MatchMode::strict());
        } catch (const Error& e) {
            error(std::string(to_string(e.code())), e.subject(), owner + ": " + e.what());
        }
    };

    std::set<std::string> units(db.units.begin(), db.units.end());
    std::set<std::string> sinks(db.sink_config.begin(), db.sink_config.end());
    std::set<std::string> keys;
    for (const auto& f : db.functions) {
        const std::string key = f.key();
        if (!keys.insert(key).second)
            error("DuplicateDefinition", key, "function key '" + key + "' appears more than once");
        if (!units.count(f.unit))
            error("ReferentialIntegrity", f.unit, "function '" + key + "' names unknown unit '" + f.unit + "'");
        check_signature(f.signature, "function '" + key + "'");
        for (const auto& s : f.calls_sinks)
            if (!sinks.count(s))
                warn("SinkNotConfigured", s, "function '" + key + "' lists sink '" + s + "' missing from sink_config");
    }

    auto check_guards = [&](const std::vector<GuardAnnotation>& guards, const std::string& owner) {
        for (const auto& g : guards)
            for (const auto& r : g.referenced)
                if (r.scope == ScopeClass::unknown)
                    warn("UnknownIdentifier", r.name,
                         owner + ": guard '" + g.expression + "' references undeclared '" + r.name +
                             "' (classified global)");
    };

    std::set<std::string> site_ids;
    for (const auto& s : db.call_sites) {
        if (!site_ids.insert(s.id).second)
            error("DuplicateDefinition", s.id, "call site id '" + s.id + "' appears more than once");
        if (!keys.count(s.enclosing_function))
            error("ReferentialIntegrity", s.enclosing_function,
                  "call site '" + s.id + "' is enclosed by unknown function '" + s.enclosing_function + "'");
        check_signature(s.fp_signature, "call site '" + s.id + "'");
        check_guards(s.guards, "call site '" + s.id + "'");
    }

    for (const auto& e : db.direct_edges) {
        if (!keys.count(e.caller))
            error("ReferentialIntegrity", e.caller, "direct edge from unknown function '" + e.caller + "'");
        check_guards(e.guards, "edge " + e.caller + " -> " + e.callee);
    }

    if (db.labels) {
        for (const auto& [site, fn] : db.labels->valid_pairs) {
            if (!site_ids.count(site))
                error("ReferentialIntegrity", site, "label references unknown call site '" + site + "'");
            if (!keys.count(fn))
                error("ReferentialIntegrity", fn, "label references unknown function '" + fn + "'");
        }
    }
    return out;
}

namespace {

ErrorCode code_for_diagnostic(const std::string& code)
{
    if (code == "CyclicTypedef")
        return ErrorCode::cyclic_typedef;
    if (code == "UnresolvedTypedef")
        return ErrorCode::unresolved_typedef;
    if (code == "DuplicateDefinition")
        return ErrorCode::duplicate_definition;
    if (code == "ReferentialIntegrity")
        return ErrorCode::referential_integrity;
    return ErrorCode::schema_violation;
}

void throw_on_errors(const FactsDB& db)
{
    for (const auto& d : validate_facts(db))
        if (d.severity == Diagnostic::Severity::error)
            throw Error(code_for_diagnostic(d.code), d.subject, d.message);
}

json parse_json(std::istream& in)
{
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::schema_violation, "$", std::string("malformed JSON: ") + e.what());
    }
}

} // namespace

FactsDB load_facts(std::istream& in)
{
    FactsDB db = facts_from_json(parse_json(in));
    throw_on_errors(db);
    return db;
}

FactsDB load_facts_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::io_error, path, "cannot open '" + path + "'");
    return load_facts(in);
}

std::string save_facts(const FactsDB& db)
{
    return to_json(db).dump(2) + "\n";
}

std::set<SitePair> load_pairs(std::istream& in)
{
    const json j = parse_json(in);
    if (j.is_object()) {
        if (!j.contains("valid_pairs"))
            schema_error("$.valid_pairs", "required field missing");
        return pairs_from_json(j["valid_pairs"], "$.valid_pairs");
    }
    return pairs_from_json(j, "$");
}

std::set<SitePair> load_pairs_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::io_error, path, "cannot open '" + path + "'");
    return load_pairs(in);
}

// ---------------------------------------------------------------------------
// Merging

FactsDB merge_facts(const FactsDB& app, const FactsDB& lib)
{
    for (const auto& u : lib.units)
        if (std::binary_search(app.units.begin(), app.units.end(), u))
            throw Error(ErrorCode::unit_collision, u, "unit '" + u + "' present in both inputs");

    FactsDB out;
    out.units = app.units;
    out.units.insert(out.units.end(), lib.units.begin(), lib.units.end());
    out.sink_config = app.sink_config;
    out.sink_config.insert(out.sink_config.end(), lib.sink_config.begin(), lib.sink_config.end());

    out.typedefs = app.typedefs;
    for (const auto& [name, type] : lib.typedefs) {
        auto [it, inserted] = out.typedefs.emplace(name, type);
        if (!inserted && !(it->second == type))
            throw Error(ErrorCode::typedef_conflict, name, "typedef '" + name + "' defined differently in the inputs");
    }

    std::map<std::string, FunctionDecl> functions;
    for (const auto* db : {&app, &lib}) {
        for (const auto& f : db->functions) {
            const std::string key = f.key();
            auto [it, inserted] = functions.emplace(key, f);
            if (inserted)
                continue;
            FunctionDecl& have = it->second;
            if (have.is_definition && f.is_definition)
                throw Error(ErrorCode::duplicate_definition, key, "function '" + key + "' defined in both inputs");
            FunctionDecl merged = f.is_definition ? f : have;
            if (!have.is_definition && !f.is_definition)
                merged = f.unit < have.unit ? f : have;
            merged.is_address_taken = have.is_address_taken || f.is_address_taken;
            merged.calls_sinks = have.calls_sinks;
            merged.calls_sinks.insert(merged.calls_sinks.end(), f.calls_sinks.begin(), f.calls_sinks.end());
            have = std::move(merged);
        }
    }
    for (auto& [_, f] : functions)
        out.functions.push_back(std::move(f));

    out.call_sites = app.call_sites;
    out.call_sites.insert(out.call_sites.end(), lib.call_sites.begin(), lib.call_sites.end());
    out.direct_edges = app.direct_edges;
    out.direct_edges.insert(out.direct_edges.end(), lib.direct_edges.begin(), lib.direct_edges.end());

    if (app.labels || lib.labels) {
        GroundTruthLabels labels;
        for (const auto* db : {&app, &lib})
            if (db->labels)
                labels.valid_pairs.insert(db->labels->valid_pairs.begin(), db->labels->valid_pairs.end());
        out.labels = std::move(labels);
    }

    normalize(out);
    throw_on_errors(out);
    return out;
}

} // namespace trop
