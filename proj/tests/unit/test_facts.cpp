#include "paths.hpp"
#include "random_facts.hpp"

#include "trop/callgraph.hpp"
#include "trop/cextract.hpp"
#include "trop/eligibility.hpp"
#include "trop/error.hpp"
#include "trop/facts.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>
#include <sstream>

using namespace trop;
using trop::testing::fixture;

namespace {

FactsDB load_text(const std::string& text)
{
    std::istringstream in(text);
    return load_facts(in);
}

ErrorCode load_error(const std::string& text)
{
    try {
        (void)load_text(text);
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected load to fail");
    return ErrorCode::invariant_violation;
}

FunctionDecl fn(std::string name, RawSignature sig, bool is_static = false, bool address_taken = false)
{
    FunctionDecl f;
    f.name = std::move(name);
    f.unit = "u.c";
    f.signature = std::move(sig);
    f.is_static = is_static;
    f.is_address_taken = address_taken;
    return f;
}

RawSignature void_void()
{
    return {RawType::builtin("void"), {}, false};
}

FactsDB fig5()
{
    return extract_corpus({fixture("fig5.c")});
}

bool has_code(const std::vector<Diagnostic>& ds, const std::string& code)
{
    return std::any_of(ds.begin(), ds.end(), [&](const Diagnostic& d) { return d.code == code; });
}

} // namespace

TEST_CASE("an empty document is an empty database")
{
    auto db = load_text(R"({"schema_version": 1})");
    CHECK(db.functions.empty());
    CHECK(db.call_sites.empty());
    CHECK(db.direct_edges.empty());
    CHECK_FALSE(db.labels.has_value());
    CHECK(load_facts_file(fixture("empty.json")) == db);
}

TEST_CASE("schema violations")
{
    CHECK(load_error("{") == ErrorCode::schema_violation);
    CHECK(load_error("[]") == ErrorCode::schema_violation);
    CHECK(load_error(R"({"schema_version": 2})") == ErrorCode::schema_violation);
    CHECK(load_error(R"({"schema_version": 1, "functions": {}})") == ErrorCode::schema_violation);
    CHECK(load_error(R"({"schema_version": 1, "units": ["u.c"],
        "functions": [{"name": "f", "unit": "u.c", "signature": {"ret": {"bogus": 1}, "params": []}}]})") ==
          ErrorCode::schema_violation);
}

TEST_CASE("a call site enclosed by a missing function is a referential error")
{
    const std::string text = R"({"schema_version": 1, "units": ["u.c"], "functions": [],
        "call_sites": [{"id": "s", "enclosing_function": "ghost", "pointer": "p", "pointer_decl": "p",
                        "fp_signature": {"ret": {"builtin": "void"}, "params": []}}]})";
    CHECK(load_error(text) == ErrorCode::referential_integrity);
}

TEST_CASE("validate: clean fixture, typedef cycle, undeclared guard identifier")
{
    CHECK(validate_facts(fig5()).empty());

    FactsDB cyc;
    cyc.typedefs["a"] = RawType::named("b");
    cyc.typedefs["b"] = RawType::named("a");
    auto ds = validate_facts(cyc);
    REQUIRE(ds.size() == 1);
    CHECK(ds[0].code == "CyclicTypedef");
    CHECK(ds[0].severity == Diagnostic::Severity::error);

    FactsDB g;
    g.units = {"u.c"};
    g.functions.push_back(fn("f", void_void()));
    IndirectCallSite s;
    s.id = "f/p#1";
    s.enclosing_function = "f";
    s.pointer = s.pointer_decl = "p";
    s.fp_signature = void_void();
    s.guards.push_back({"ready", {{"ready", ScopeClass::unknown}}});
    g.call_sites.push_back(s);
    normalize(g);
    ds = validate_facts(g);
    REQUIRE(ds.size() == 1);
    CHECK(ds[0].code == "UnknownIdentifier");
    CHECK(ds[0].severity == Diagnostic::Severity::warning);
    CHECK(effective_scope(ScopeClass::unknown) == ScopeClass::global);
}

TEST_CASE("validate reports duplicates and bad labels")
{
    FactsDB db;
    db.units = {"u.c"};
    db.functions = {fn("f", void_void()), fn("f", void_void())};
    db.labels = GroundTruthLabels{{{"nowhere", "f"}, {"nowhere", "g"}}};
    auto ds = validate_facts(db);
    CHECK(has_code(ds, "DuplicateDefinition"));
    CHECK(std::count_if(ds.begin(), ds.end(), [](auto& d) { return d.code == "ReferentialIntegrity"; }) == 3);

    FactsDB u;
    u.units = {"u.c"};
    u.functions = {fn("f", {RawType::named("nope_t"), {}, false})};
    CHECK(has_code(validate_facts(u), "UnresolvedTypedef"));
}

TEST_CASE("function keys")
{
    CHECK(fn("f", void_void()).key() == "f");
    CHECK(fn("f", void_void(), true).key() == "u.c::f");
    CHECK(static_function_key("a.c", "init") == "a.c::init");
}

TEST_CASE("hash eligibility")
{
    FactsDB db;
    CHECK(hash_eligible(fn("ngx_master_process_cycle", void_void()), db));
    CHECK_FALSE(hash_eligible(fn("hidden", void_void(), true, false), db));
    CHECK(hash_eligible(fn("registered", void_void(), true, true), db));
    auto decl = fn("extern_only", void_void());
    decl.is_definition = false;
    CHECK_FALSE(hash_eligible(decl, db));
}

TEST_CASE("a static function is a target only once its address is taken")
{
    for (bool taken : {false, true}) {
        FactsDB db;
        db.units = {"u.c"};
        db.functions = {fn("caller", void_void()), fn("cb", void_void(), true, taken)};
        IndirectCallSite s;
        s.id = "caller/p#1";
        s.enclosing_function = "caller";
        s.pointer = s.pointer_decl = "p";
        s.fp_signature = void_void();
        db.call_sites.push_back(s);
        normalize(db);
        auto g = build_graph(db, MatchMode::strict());
        const bool has = std::any_of(g.indirect_edges.begin(), g.indirect_edges.end(),
                                     [](const IndirectEdge& e) { return e.target == "u.c::cb"; });
        CHECK(has == taken);
    }
    auto db = extract_corpus({fixture("static_hooks.c")});
    auto targets = permitted_targets(db.call_sites.at(0), db, MatchMode::strict());
    CHECK(std::count(targets.begin(), targets.end(), "static_hooks.c::registered") == 1);
    CHECK(std::count(targets.begin(), targets.end(), "static_hooks.c::hidden") == 0);
}

TEST_CASE("save is canonical and round-trips")
{
    auto db = fig5();
    const auto text = save_facts(db);
    CHECK(text.back() == '\n');
    auto again = load_text(text);
    CHECK(again == db);
    CHECK(save_facts(again) == text);

    std::mt19937_64 rng(11);
    for (int i = 0; i < 40; ++i) {
        auto r = trop::testing::random_facts(rng);
        for (const auto& d : validate_facts(r))
            REQUIRE(d.severity == Diagnostic::Severity::warning);
        CHECK(load_text(save_facts(r)) == r);
    }
}

TEST_CASE("normalize is order independent")
{
    std::mt19937_64 rng(5);
    for (int i = 0; i < 30; ++i) {
        auto db = trop::testing::random_facts(rng);
        auto shuffled = db;
        std::shuffle(shuffled.functions.begin(), shuffled.functions.end(), rng);
        std::shuffle(shuffled.call_sites.begin(), shuffled.call_sites.end(), rng);
        std::shuffle(shuffled.direct_edges.begin(), shuffled.direct_edges.end(), rng);
        std::reverse(shuffled.sink_config.begin(), shuffled.sink_config.end());
        normalize(shuffled);
        CHECK(shuffled == db);
        CHECK(save_facts(shuffled) == save_facts(db));
    }
}

TEST_CASE("sidecar pair files")
{
    std::istringstream a(R"([["s1", "f"], ["s2", "g"]])");
    CHECK(load_pairs(a) == std::set<SitePair>{{"s1", "f"}, {"s2", "g"}});
    std::istringstream b(R"({"valid_pairs": [["s1", "f"]]})");
    CHECK(load_pairs(b) == std::set<SitePair>{{"s1", "f"}});
    std::istringstream c(R"([["s1"]])");
    CHECK_THROWS_AS(load_pairs(c), Error);
    auto labels = load_pairs_file(fixture("fig5.labels.json"));
    CHECK(labels.size() == 2);
}

TEST_CASE("merge")
{
    auto app = fig5();
    FactsDB empty;
    CHECK(merge_facts(app, empty) == app);

    FactsDB lib;
    lib.units = {"lib.c"};
    auto helper = fn("helper", void_void());
    helper.unit = "lib.c";
    lib.functions = {helper};
    auto merged = merge_facts(app, lib);
    const auto& site = app.call_sites.at(0);
    auto before = permitted_targets(site, app, MatchMode::strict());
    auto after = permitted_targets(site, merged, MatchMode::strict());
    CHECK(std::includes(after.begin(), after.end(), before.begin(), before.end()));
    after.erase(std::remove(after.begin(), after.end(), "helper"), after.end());
    CHECK(after == before);

    CHECK_THROWS_AS(merge_facts(app, app), Error);
    try {
        (void)merge_facts(app, app);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::unit_collision);
    }

    FactsDB dup;
    dup.units = {"other.c"};
    auto v = fn("valid_target1", void_void());
    v.unit = "other.c";
    dup.functions = {v};
    try {
        (void)merge_facts(app, dup);
        FAIL("expected duplicate definition");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::duplicate_definition);
        CHECK(e.subject() == "valid_target1");
    }

    FactsDB td1, td2;
    td1.units = {"a.c"};
    td2.units = {"b.c"};
    td1.typedefs["t"] = RawType::builtin("int");
    td2.typedefs["t"] = RawType::builtin("long");
    try {
        (void)merge_facts(td1, td2);
        FAIL("expected typedef conflict");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::typedef_conflict);
    }
}

TEST_CASE("merge joins a declaration with its definition")
{
    FactsDB app, lib;
    app.units = {"app.c"};
    lib.units = {"lib.c"};
    auto decl = fn("shared", void_void());
    decl.unit = "app.c";
    decl.is_definition = false;
    decl.is_address_taken = true;
    auto def = fn("shared", void_void());
    def.unit = "lib.c";
    app.functions = {decl};
    lib.functions = {def};
    auto m = merge_facts(app, lib);
    REQUIRE(m.functions.size() == 1);
    CHECK(m.functions[0].unit == "lib.c");
    CHECK(m.functions[0].is_definition);
    CHECK(m.functions[0].is_address_taken);
}

TEST_CASE("merge is commutative on random disjoint databases")
{
    std::mt19937_64 rng(23);
    for (int i = 0; i < 30; ++i) {
        trop::testing::RandomFactsOptions a, b;
        a.unit = "app.c";
        a.prefix = "a";
        b.unit = "lib.c";
        b.prefix = "l";
        auto x = trop::testing::random_facts(rng, a);
        auto y = trop::testing::random_facts(rng, b);
        CHECK(merge_facts(x, y) == merge_facts(y, x));
    }
}
