#include "oracles.hpp"
#include "paths.hpp"
#include "random_facts.hpp"

#include "trop/analyzer.hpp"
#include "trop/callgraph.hpp"
#include "trop/cextract.hpp"
#include "trop/error.hpp"

#include <doctest.h>

#include <random>

using namespace trop;
using trop::testing::fixture;

namespace {

FactsDB fig5_labeled()
{
    auto db = extract_corpus({fixture("fig5.c")});
    db.labels = GroundTruthLabels{load_pairs_file(fixture("fig5.labels.json"))};
    return db;
}

FunctionDecl void_fn(std::string name, std::string unit, bool is_static = false)
{
    FunctionDecl f;
    f.name = std::move(name);
    f.unit = std::move(unit);
    f.signature = {RawType::builtin("void"), {}, false};
    f.is_static = is_static;
    return f;
}

struct PublishedCollisionRow {
    const char* program;
    std::uint64_t functions, with_hash, valid_targets, invalid_targets, all_pairs, invalid_pairs;
    const char* pct_hash;
    const char* pct_targets;
    const char* pct_pairs;
};

// Published per-program counts and the percentages printed beside them.
const PublishedCollisionRow published_collisions[] = {
    {"base-passwd", 45, 45, 0, 0, 0, 0, "100.0", "0.0", "0.0"},
    {"coreutils", 1789, 682, 116, 43, 416, 110, "38.1", "37.1", "26.4"},
    {"e2fsprogs", 1964, 1243, 251, 176, 1383, 400, "63.3", "70.1", "28.9"},
    {"exim", 968, 607, 88, 121, 359, 165, "62.7", "137.5", "46.0"},
    {"findutils", 821, 554, 200, 89, 326, 65, "67.5", "44.5", "19.9"},
    {"grep", 460, 264, 38, 19, 113, 52, "57.4", "50.0", "46.0"},
    {"httpd", 2800, 2338, 1332, 483, 3915, 794, "83.5", "36.3", "20.3"},
    {"lighttpd", 899, 524, 228, 40, 830, 221, "58.3", "17.5", "26.6"},
    {"ncurses", 1835, 1045, 156, 273, 969, 397, "56.9", "175.0", "41.0"},
    {"nginx", 1299, 977, 610, 319, 5977, 3512, "75.2", "52.3", "58.8"},
    {"sed", 213, 140, 2, 0, 2, 0, "65.7", "0.0", "0.0"},
    {"tar", 1166, 730, 141, 166, 1008, 754, "62.6", "117.7", "74.8"},
    {"util-linux", 3143, 1681, 211, 177, 1060, 643, "53.5", "83.9", "60.7"},
    {"zlib", 152, 108, 5, 0, 13, 0, "71.1", "0.0", "0.0"},
};

struct PublishedEdgeRow {
    const char* program;
    std::uint64_t base, total, invalid;
    const char* pct;
};

const PublishedEdgeRow published_type_check_edges[] = {
    {"base-passwd", 0, 0, 0, "0.0"},    {"coreutils", 213, 291, 78, "26.8"}, {"e2fsprogs", 557, 861, 304, "35.3"},
    {"exim", 107, 212, 105, "49.5"},    {"findutils", 237, 279, 42, "15.1"}, {"grep", 54, 105, 51, "48.6"},
    {"httpd", 2126, 2870, 744, "25.9"}, {"lighttpd", 327, 442, 115, "26.0"}, {"ncurses", 291, 558, 267, "47.8"},
    {"nginx", 1276, 2287, 1011, "44.2"}, {"sed", 2, 2, 0, "0.0"},           {"tar", 208, 664, 456, "68.7"},
    {"util-linux", 311, 943, 632, "67.0"}, {"zlib", 10, 10, 0, "0.0"},
};

struct PtaRow {
    const char* program;
    std::uint64_t base, total, invalid;
    const char* pct;
};

// The points-to columns: invalid is not total - base here, it is the count
// of edges outside the labeled base.
const PtaRow published_points_to_edges[] = {
    {"coreutils", 213, 308, 198, "64.3"}, {"e2fsprogs", 557, 42, 15, "35.7"}, {"exim", 107, 169, 99, "58.6"},
    {"findutils", 237, 448, 231, "51.6"}, {"grep", 54, 108, 60, "55.6"},      {"lighttpd", 327, 1096, 938, "85.6"},
    {"ncurses", 291, 507, 238, "46.9"},   {"sed", 2, 2, 0, "0.0"},             {"tar", 208, 360, 167, "46.4"},
    {"util-linux", 311, 596, 465, "78.0"}, {"zlib", 10, 10, 4, "40.0"},
};

} // namespace

TEST_CASE("percentages")
{
    CHECK(percent(121, 88) == doctest::Approx(137.5));
    CHECK(percent(0, 0) == 0.0);
    CHECK(percent_tenths(1, 3) == 333);
    CHECK(percent_tenths(2, 3) == 667);
    CHECK(percent_tenths(1, 8) == 125);
    CHECK(percent_tenths(1, 16) == 63);
    CHECK(format_percent(121, 88) == "137.5");
    CHECK(format_percent(0, 0) == "0.0");
    CHECK(format_percent(7, 7) == "100.0");

    std::mt19937_64 rng(1);
    for (int i = 0; i < 2000; ++i) {
        const std::uint64_t d = std::uniform_int_distribution<std::uint64_t>(1, 100000)(rng);
        const std::uint64_t n = std::uniform_int_distribution<std::uint64_t>(0, 3 * d)(rng);
        CHECK(percent_tenths(n, d) == trop::testing::reference_tenths(n, d));
    }
}

TEST_CASE("published collision counts reproduce their percentages")
{
    for (const auto& row : published_collisions) {
        CAPTURE(row.program);
        auto r = collision_report_from_counts(row.valid_targets, row.invalid_targets, row.all_pairs, row.invalid_pairs);
        CHECK(format_percent(row.with_hash, row.functions) == row.pct_hash);
        CHECK(format_percent(*r.n_invalid_targets, *r.n_valid_targets) == row.pct_targets);
        CHECK(format_percent(*r.n_invalid_indirect_pairs, r.n_indirect_call_pairs) == row.pct_pairs);
        CHECK(*r.pct_invalid_targets() == doctest::Approx(percent(row.invalid_targets, row.valid_targets)));
        CHECK(*r.pct_invalid_pairs() == doctest::Approx(percent(row.invalid_pairs, row.all_pairs)));
    }
}

TEST_CASE("published comparison counts reproduce their differences")
{
    for (const auto& row : published_type_check_edges) {
        CAPTURE(row.program);
        auto r = comparison_from_counts(row.program, row.base, row.total);
        CHECK(r.invalid_edges == row.invalid);
        CHECK(format_percent(r.invalid_edges, r.total_edges) == row.pct);
        CHECK(r.diagnostics.empty());
    }
    auto neg = comparison_from_counts("e2fsprogs-pta", 557, 42);
    CHECK(neg.invalid_edges == 0);
    REQUIRE(neg.diagnostics.size() == 1);
    CHECK(neg.diagnostics[0].code == "NegativeInvalidEdges");
}

TEST_CASE("points-to columns match edges outside the base")
{
    for (const auto& row : published_points_to_edges) {
        CAPTURE(row.program);
        // One site, enough void() targets, the first `base` labeled valid;
        // the alternative set keeps total - invalid of them and adds the rest.
        const std::uint64_t kept = row.total - row.invalid;
        REQUIRE(kept <= row.base);
        const std::uint64_t n = row.base + row.invalid;
        FactsDB db;
        db.units = {"p.c"};
        db.functions.push_back(void_fn("main", "p.c"));
        for (std::uint64_t i = 0; i < n; ++i)
            db.functions.push_back(void_fn("t" + std::to_string(i), "p.c"));
        IndirectCallSite s;
        s.id = "main/fp#1";
        s.enclosing_function = "main";
        s.pointer = s.pointer_decl = "fp";
        s.fp_signature = {RawType::builtin("int"), {RawType::builtin("int")}, false};
        db.call_sites = {s};
        normalize(db);
        GroundTruthLabels labels;
        std::set<SitePair> alt;
        for (std::uint64_t i = 0; i < row.base; ++i)
            labels.valid_pairs.insert({s.id, "t" + std::to_string(i)});
        for (std::uint64_t i = 0; i < kept; ++i)
            alt.insert({s.id, "t" + std::to_string(i)});
        for (std::uint64_t i = row.base; i < n; ++i)
            alt.insert({s.id, "t" + std::to_string(i)});
        auto r = compare_target_sets(db, alt, labels, MatchMode::strict()).alternative;
        CHECK(r.total_edges == row.total);
        CHECK(r.edges_outside_base == row.invalid);
        CHECK(r.base_edges_missed == row.base - kept);
        CHECK(format_percent(r.edges_outside_base, r.total_edges) == row.pct);
    }
}

TEST_CASE("collision metrics on the sample program")
{
    auto r = collision_metrics(fig5_labeled(), MatchMode::strict());
    CHECK(r.n_call_sites == 1);
    CHECK(r.n_function_pointer_sigs == 1);
    CHECK(r.n_function_pointer_decls == 1);
    CHECK(r.n_functions == 6);
    CHECK(r.n_functions_with_hash == 6);
    CHECK(r.n_permitted_targets == 3);
    CHECK(r.n_indirect_call_pairs == 3);
    CHECK(r.n_signature_target_pairs == 3);
    CHECK(*r.n_valid_targets == 2);
    CHECK(*r.n_invalid_targets == 1);
    CHECK(*r.n_invalid_indirect_pairs == 1);
    CHECK(*r.n_invalid_signature_target_pairs == 1);
    CHECK(*r.n_labeled_pairs_denied == 0);
    CHECK(r.invalid_targets == std::set<std::string>{"invalid_target"});
    CHECK(*r.pct_invalid_targets() == doctest::Approx(50.0));

    auto unlabeled = extract_corpus({fixture("fig5.c")});
    auto u = collision_metrics(unlabeled, MatchMode::strict());
    CHECK_FALSE(u.n_valid_targets.has_value());
    CHECK_FALSE(u.n_invalid_indirect_pairs.has_value());
    CHECK_FALSE(u.pct_invalid_pairs().has_value());
    CHECK(u.n_indirect_call_pairs == 3);
    CHECK_FALSE(u.diagnostics.empty());
    CHECK(to_json(u)["n_invalid_targets"].is_null());
}

TEST_CASE("collision metrics on the nginx-shaped fixture")
{
    auto db = extract_corpus({fixture("nginx_like.c")});
    db.labels = GroundTruthLabels{load_pairs_file(fixture("nginx_like.labels.json"))};
    auto r = collision_metrics(db, MatchMode::strict());
    CHECK(r.n_functions == 11);
    CHECK(r.n_functions_with_hash == 9);
    CHECK(r.n_call_sites == 3);
    CHECK(r.n_permitted_targets == 7);
    CHECK(r.n_indirect_call_pairs == 7);
    CHECK(*r.n_valid_targets == 3);
    CHECK(*r.n_invalid_targets == 4);
    CHECK(*r.n_invalid_indirect_pairs == 4);
    CHECK(r.invalid_targets == std::set<std::string>{"ngx_core_module_init", "ngx_master_process_cycle",
                                                     "ngx_single_process_cycle", "ngx_worker_process_exit"});
}

TEST_CASE("empty database gives an all-zero report")
{
    FactsDB db;
    db.labels = GroundTruthLabels{};
    auto r = collision_metrics(db, MatchMode::strict());
    CHECK(r.n_functions == 0);
    CHECK(r.n_call_sites == 0);
    CHECK(r.n_indirect_call_pairs == 0);
    CHECK(*r.n_valid_targets == 0);
    CHECK(*r.n_invalid_targets == 0);
    CHECK(*r.pct_invalid_targets() == 0.0);
}

TEST_CASE("hash coverage")
{
    FactsDB db;
    db.units = {"u.c"};
    db.functions = {void_fn("a", "u.c"), void_fn("b", "u.c"), void_fn("c", "u.c"), void_fn("d", "u.c", true)};
    normalize(db);
    auto c = hash_coverage(db);
    CHECK(c.n_functions == 4);
    CHECK(c.n_with_hash == 3);
    CHECK(c.fraction == doctest::Approx(0.75));
    db.functions.pop_back();
    CHECK(hash_coverage(db).fraction == doctest::Approx(1.0));
    CHECK(hash_coverage(FactsDB{}).fraction == 0.0);
}

TEST_CASE("library impact")
{
    auto app = fig5_labeled();
    FactsDB empty;
    auto none = library_impact(app, empty, MatchMode::strict());
    CHECK(none.target_delta() == 0);
    CHECK(none.pair_delta() == 0);

    auto lib = extract_corpus({fixture("lib_void.c")});
    auto r = library_impact(app, lib, MatchMode::strict());
    CHECK(r.target_delta() == 1);
    CHECK(r.pair_delta() == 1);
    CHECK(r.new_targets == std::set<std::string>{"lib_reset"});
}

TEST_CASE("comparison with an external target set")
{
    auto db = fig5_labeled();
    const auto& labels = *db.labels;
    auto same = compare_target_sets(db, labels.valid_pairs, labels, MatchMode::strict());
    CHECK(same.alternative.invalid_edges == 0);
    CHECK(same.alternative.edges_outside_base == 0);
    CHECK(same.type_checking.total_edges == 3);
    CHECK(same.type_checking.base_edges == 2);
    CHECK(same.type_checking.invalid_edges == 1);
    CHECK(same.type_checking.edges_outside_base == 1);

    std::set<SitePair> bad = {{"nowhere", "valid_target1"}};
    CHECK_THROWS_AS(compare_target_sets(db, bad, labels, MatchMode::strict()), Error);
}

TEST_CASE("report counts are monotone across modes")
{
    std::mt19937_64 rng(99);
    const MatchMode modes[] = {MatchMode::strict(), MatchMode::relaxed_ptr(), MatchMode::arity()};
    for (int i = 0; i < 60; ++i) {
        auto db = trop::testing::random_facts(rng);
        std::optional<CollisionReport> prev;
        for (const auto& m : modes) {
            auto r = collision_metrics(db, m);
            CHECK(r.n_indirect_call_pairs >= r.n_permitted_targets);
            if (prev) {
                CHECK(r.n_indirect_call_pairs >= prev->n_indirect_call_pairs);
                CHECK(r.n_signature_target_pairs >= prev->n_signature_target_pairs);
                CHECK(r.n_permitted_targets >= prev->n_permitted_targets);
                CHECK(*r.n_invalid_indirect_pairs >= *prev->n_invalid_indirect_pairs);
                CHECK(*r.n_invalid_signature_target_pairs >= *prev->n_invalid_signature_target_pairs);
                CHECK(*r.n_invalid_targets >= *prev->n_invalid_targets);
            }
            CHECK(to_json(r).dump() == to_json(collision_metrics(db, m)).dump());
            prev = std::move(r);
        }
    }
}
