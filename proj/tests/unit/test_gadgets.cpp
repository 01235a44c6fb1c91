#include "oracles.hpp"
#include "paths.hpp"
#include "random_facts.hpp"

#include "trop/cextract.hpp"
#include "trop/error.hpp"
#include "trop/gadgets.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

using namespace trop;
using trop::testing::fixture;

namespace {

using Str = std::vector<std::string>;

FactsDB fig5()
{
    return extract_corpus({fixture("fig5.c")});
}

FactsDB nginx()
{
    auto db = extract_corpus({fixture("nginx_like.c")});
    db.labels = GroundTruthLabels{load_pairs_file(fixture("nginx_like.labels.json"))};
    return db;
}

GuardAnnotation guard(std::string name, ScopeClass scope)
{
    return {name + " != 0", {{name, scope}}};
}

} // namespace

TEST_CASE("E-gadgets")
{
    CHECK(find_e_gadgets(fig5(), {"system"}) == Str{"final_target"});
    CHECK(find_e_gadgets(nginx(), {"execve"}) == Str{"ngx_execute_proc"});
    CHECK(find_e_gadgets(fig5(), {"execve"}).empty());
    CHECK_THROWS_AS(find_e_gadgets(fig5(), Str{}), Error);
    CHECK(sink_calls(fig5(), "final_target", {"system", "execve"}) == Str{"system"});

    // A direct edge to a sink counts even when calls_sinks is empty.
    FactsDB db;
    db.units = {"u.c"};
    FunctionDecl f;
    f.name = "wrapper";
    f.unit = "u.c";
    f.signature = {RawType::builtin("void"), {}, false};
    db.functions = {f};
    db.direct_edges = {{"wrapper", "execl", {}, ""}};
    normalize(db);
    CHECK(find_e_gadgets(db, {"execl"}) == Str{"wrapper"});
}

TEST_CASE("C-gadget candidates")
{
    auto db = fig5();
    db.labels = GroundTruthLabels{load_pairs_file(fixture("fig5.labels.json"))};
    auto g = build_graph(db, MatchMode::strict());
    auto c = find_c_gadgets(db.call_sites.at(0), g, db);
    CHECK(c.all == Str{"invalid_target", "valid_target1", "valid_target2"});
    CHECK(c.labeled);
    CHECK(c.valid == Str{"valid_target1", "valid_target2"});
    CHECK(c.invalid == Str{"invalid_target"});

    auto n = nginx();
    auto ng = build_graph(n, MatchMode::strict());
    auto exit = find_c_gadgets(*n.find_site("ngx_worker_process_exit/ngx_modules[i]->exit_process#1"), ng, n);
    CHECK(std::count(exit.all.begin(), exit.all.end(), "ngx_master_process_cycle") == 1);
    CHECK(exit.valid == Str{"ngx_conf_flush_files"});

    // A site whose signature is unique has exactly its own target.
    auto spawn = find_c_gadgets(*n.find_site("ngx_spawn_process/proc#1"), ng, n);
    CHECK(spawn.all == Str{"nginx_like.c::ngx_worker_process_cycle", "ngx_execute_proc"});
    CHECK(spawn.invalid.empty());
}

TEST_CASE("candidate paths")
{
    auto db = fig5();
    auto view = adjacency(build_graph(db, MatchMode::strict()));
    auto r = find_candidate_paths(view, {"invalid_target"}, {"final_target"});
    CHECK(r.paths == std::vector<FunctionPath>{{"invalid_target", "linker_func", "final_target"}});
    CHECK_FALSE(r.truncated());

    auto same = find_candidate_paths(view, {"final_target"}, {"final_target"});
    CHECK(same.paths == std::vector<FunctionPath>{{"final_target"}});

    auto shallow = find_candidate_paths(view, {"invalid_target"}, {"final_target"}, {2, 100});
    CHECK(shallow.paths.empty());
    CHECK(shallow.depth_limit_hit);

    CHECK_THROWS_AS(find_candidate_paths(view, {"nope"}, {"final_target"}), Error);
    CHECK_THROWS_AS(find_candidate_paths(view, {"invalid_target"}, {"final_target"}, {0, 1}), Error);
}

TEST_CASE("path enumeration matches brute force on random digraphs")
{
    std::mt19937_64 rng(2024);
    for (int round = 0; round < 120; ++round) {
        const int n = std::uniform_int_distribution<int>(1, 8)(rng);
        const double density = std::uniform_real_distribution<double>(0.1, 0.5)(rng);
        auto edges = trop::testing::random_digraph(rng, n, density);
        std::vector<std::string> names;
        for (int i = 0; i < n; ++i)
            names.push_back("n" + std::to_string(i));
        AdjacencyView view(names);
        for (auto [a, b] : edges)
            view.set(a, b);
        auto pick = [&] {
            std::vector<int> out;
            const int k = std::uniform_int_distribution<int>(1, std::min(3, n))(rng);
            for (int i = 0; i < k; ++i)
                out.push_back(std::uniform_int_distribution<int>(0, n - 1)(rng));
            std::sort(out.begin(), out.end());
            out.erase(std::unique(out.begin(), out.end()), out.end());
            return out;
        };
        auto cg = pick();
        auto eg = pick();
        Str cgs, egs;
        for (int c : cg)
            cgs.push_back(names[c]);
        for (int e : eg)
            egs.push_back(names[e]);
        auto want = trop::testing::brute_force_paths(n, edges, cg, eg, n);
        auto got = find_candidate_paths(view, cgs, egs, {static_cast<std::size_t>(n), 1000000});
        std::set<std::vector<int>> got_idx;
        for (const auto& p : got.paths) {
            std::vector<int> v;
            for (const auto& s : p)
                v.push_back(std::stoi(s.substr(1)));
            got_idx.insert(v);
        }
        CHECK(got.paths.size() == got_idx.size());
        CHECK(got_idx == want);
        CHECK_FALSE(got.truncated());
        CHECK(std::is_sorted(got.paths.begin(), got.paths.end(), [](const auto& a, const auto& b) {
            return a.size() != b.size() ? a.size() < b.size() : a < b;
        }));
    }
}

TEST_CASE("path limit truncates")
{
    Str names = {"a", "b", "c", "d"};
    AdjacencyView view(names);
    view.set(0, 1);
    view.set(0, 2);
    view.set(1, 3);
    view.set(2, 3);
    view.set(1, 2);
    auto all = find_candidate_paths(view, {"a"}, {"d"});
    CHECK(all.paths.size() == 3);
    auto cut = find_candidate_paths(view, {"a"}, {"d"}, {8, 2});
    CHECK(cut.paths.size() == 2);
    CHECK(cut.path_limit_hit);
}

TEST_CASE("guard classification")
{
    CHECK(classify_guard(guard("flag", ScopeClass::global)) == Controllability::globally_controllable);
    CHECK(classify_guard(guard("h", ScopeClass::heap)) == Controllability::globally_controllable);
    CHECK(classify_guard(guard("ext", ScopeClass::unknown)) == Controllability::globally_controllable);
    CHECK(classify_guard(guard("p", ScopeClass::param)) == Controllability::blocked);
    CHECK(classify_guard(guard("i", ScopeClass::local)) == Controllability::blocked);
    GuardAnnotation mixed{"g && i", {{"g", ScopeClass::global}, {"i", ScopeClass::local}}};
    CHECK(classify_guard(mixed) == Controllability::blocked);
    CHECK(classify_guard({"1", {}}) == Controllability::globally_controllable);
}

TEST_CASE("chain controllability")
{
    auto db = fig5();
    auto g = build_graph(db, MatchMode::strict());
    auto c = classify_controllability({"invalid_target", "linker_func", "final_target"}, g, db, {"system"});
    CHECK(c.controllability == Controllability::globally_controllable);
    REQUIRE(c.guards_on_path.size() == 1);
    CHECK(c.guards_on_path[0].expression == "flag == 1");

    CHECK(classify_controllability({"valid_target1"}, g, db).controllability == Controllability::unconstrained);

    auto blocked = extract_corpus({fixture("blocked_guard.c")});
    auto bg = build_graph(blocked, MatchMode::strict());
    auto chains = find_chains(blocked, MatchMode::strict());
    REQUIRE_FALSE(chains.chains.empty());
    for (const auto& ch : chains.chains)
        CHECK(ch.controllability == Controllability::blocked);

    // The least constrained of parallel edges decides a hop.
    FactsDB two;
    two.units = {"u.c"};
    for (const char* n : {"a", "b"}) {
        FunctionDecl f;
        f.name = n;
        f.unit = "u.c";
        f.signature = {RawType::builtin("void"), {}, false};
        two.functions.push_back(f);
    }
    two.direct_edges = {{"a", "b", {guard("p", ScopeClass::param)}, "u.c:1"},
                        {"a", "b", {guard("g", ScopeClass::global)}, "u.c:2"}};
    normalize(two);
    auto tg = build_graph(two, MatchMode::strict());
    CHECK(classify_controllability({"a", "b"}, tg, two).controllability == Controllability::globally_controllable);
    two.direct_edges.pop_back();
    tg = build_graph(two, MatchMode::strict());
    CHECK(classify_controllability({"a", "b"}, tg, two).controllability == Controllability::blocked);
}

TEST_CASE("chains in the sample program")
{
    auto r = find_chains(fig5(), MatchMode::strict(), {{}, {"system"}, false});
    REQUIRE(r.chains.size() == 1);
    const auto& ch = r.chains[0];
    CHECK(ch.entry_site == "vulnerable/corruptible_fptr#1");
    CHECK(ch.path == FunctionPath{"invalid_target", "linker_func", "final_target"});
    CHECK(ch.controllability == Controllability::globally_controllable);
    CHECK(ch.loop_edges.empty());
    CHECK_FALSE(ch.can_retrigger_entry);
    CHECK(r.e_gadgets == Str{"final_target"});

    auto census = census_of(r.chains);
    CHECK(census.c_gadgets == 1);
    CHECK(census.l_gadgets == 1);
    CHECK(census.e_gadgets == 1);
    auto gc = gadget_census(fig5(), MatchMode::strict(), {}, {"system"});
    CHECK(gc.c_gadgets == 1);
    CHECK(gc.l_gadgets == 1);
    CHECK(gc.e_gadgets == 1);

    auto cut = find_chains(fig5(), MatchMode::strict(), {{1, 100}, {"system"}, false});
    CHECK(cut.chains.empty());
    CHECK(cut.truncated);

    CHECK(chain_from_json(to_json(ch)) == ch);
}

TEST_CASE("no sinks, no gadgets")
{
    auto db = fig5();
    auto census = gadget_census(db, MatchMode::strict(), {}, {"execve"});
    CHECK(census.c_gadgets == 0);
    CHECK(census.l_gadgets == 0);
    CHECK(census.e_gadgets == 0);
    db.sink_config.clear();
    census = gadget_census(db, MatchMode::strict());
    CHECK(census.e_gadgets == 0);
}

TEST_CASE("nginx-shaped chain through the master cycle")
{
    auto db = nginx();
    auto r = find_chains(db, MatchMode::strict(), {{}, {"execve"}, false});
    const FunctionPath want = {"ngx_master_process_cycle", "nginx_like.c::ngx_reap_children", "ngx_spawn_process",
                               "ngx_execute_proc"};
    auto it = std::find_if(r.chains.begin(), r.chains.end(), [&](const GadgetChain& c) {
        return c.path == want && c.entry_site == "ngx_worker_process_exit/ngx_modules[i]->exit_process#1";
    });
    REQUIRE(it != r.chains.end());
    CHECK(it->controllability == Controllability::globally_controllable);
    CHECK(it->can_retrigger_entry);
    for (const auto& c : r.chains)
        CHECK(c.path.back() == "ngx_execute_proc");

    auto invalid_only = find_chains(db, MatchMode::strict(), {{}, {"execve"}, true});
    CHECK(invalid_only.chains.size() <= r.chains.size());
    for (const auto& c : invalid_only.chains)
        CHECK_FALSE(db.labels->valid_pairs.count({c.entry_site, c.path.front()}));
}

TEST_CASE("chain properties on random databases")
{
    std::mt19937_64 rng(77);
    for (int i = 0; i < 60; ++i) {
        auto db = trop::testing::random_facts(rng);
        auto r = find_chains(db, MatchMode::relaxed_ptr());
        auto g = build_graph(db, MatchMode::relaxed_ptr());
        auto view = adjacency(g);
        std::set<std::string> egs(r.e_gadgets.begin(), r.e_gadgets.end());
        std::set<std::string> heads;
        for (const auto& c : r.chains) {
            heads.insert(c.path.front());
            CHECK(egs.count(c.path.back()));
            std::set<std::string> uniq(c.path.begin(), c.path.end());
            CHECK(uniq.size() == c.path.size());
            for (std::size_t k = 0; k + 1 < c.path.size(); ++k)
                CHECK(view.has_edge(c.path[k], c.path[k + 1]));
            const auto ps = permitted_targets(*db.find_site(c.entry_site), db, MatchMode::relaxed_ptr());
            CHECK(std::count(ps.begin(), ps.end(), c.path.front()) == 1);
        }
        for (const auto& e : r.e_gadgets)
            CHECK_FALSE(sink_calls(db, e, r.sinks).empty());
        CHECK(census_of(r.chains).c_gadgets <= heads.size());
        CHECK(find_chains(db, MatchMode::relaxed_ptr()).chains == r.chains);
    }
}
