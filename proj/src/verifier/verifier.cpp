#include "trop/verifier.hpp"

#include "trop/callgraph.hpp"
#include "trop/eligibility.hpp"
#include "trop/error.hpp"

#include <set>

using nlohmann::json;

namespace trop {

std::string_view to_string(TransferVerdict::Reason reason)
{
    switch (reason) {
    case TransferVerdict::Reason::hash_match:
        return "hash_match";
    case TransferVerdict::Reason::hash_mismatch:
        return "hash_mismatch";
    case TransferVerdict::Reason::ineligible_target:
        return "ineligible_target";
    case TransferVerdict::Reason::unknown_site:
        return "unknown_site";
    }
    return "unknown_site";
}

TransferVerdict check_forward(std::string_view site_id, std::string_view target, const FactsDB& db, MatchMode mode)
{
    const IndirectCallSite* site = db.find_site(site_id);
    if (!site)
        throw Error(ErrorCode::unknown_site, std::string(site_id), "unknown call site '" + std::string(site_id) + "'");
    const FunctionDecl* fn = db.find_function(target);
    if (!fn)
        throw Error(ErrorCode::unknown_target, std::string(target), "unknown function '" + std::string(target) + "'");

    TransferVerdict v;
    v.expected = type_hash(canonicalize(site->fp_signature, db.typedefs, mode), EdgeKind::forward);
    if (!hash_eligible(*fn, db)) {
        v.allowed = false;
        v.reason = TransferVerdict::Reason::ineligible_target;
        return v;
    }
    v.actual = type_hash(canonicalize(fn->signature, db.typedefs, mode), EdgeKind::forward);
    v.allowed = *v.actual == v.expected;
    v.reason = v.allowed ? TransferVerdict::Reason::hash_match : TransferVerdict::Reason::hash_mismatch;
    return v;
}

ChainVerdict simulate_chain(const GadgetChain& chain, const FactsDB& db, MatchMode mode)
{
    if (chain.path.empty())
        throw Error(ErrorCode::invalid_argument, chain.entry_site, "chain path is empty");
    std::set<std::string> seen;
    for (const auto& f : chain.path)
        if (!seen.insert(f).second)
            throw Error(ErrorCode::invalid_argument, f, "chain path repeats '" + f + "'");

    ChainVerdict out;
    out.entry_verdict = check_forward(chain.entry_site, chain.path.front(), db, mode);

    const CallGraph graph = build_graph(db, mode);
    const AdjacencyView view = adjacency(graph);
    for (const auto& f : chain.path)
        if (!view.index_of(f))
            throw Error(ErrorCode::unknown_target, f, "chain function '" + f + "' is not in the call graph");

    out.path_connected = true;
    for (std::size_t i = 0; i + 1 < chain.path.size(); ++i) {
        if (!view.has_edge(chain.path[i], chain.path[i + 1])) {
            out.path_connected = false;
            out.broken_hop = std::make_pair(chain.path[i], chain.path[i + 1]);
            break;
        }
    }
    out.guards_screen = classify_controllability(chain.path, graph, db, db.sink_config).controllability;
    out.pass = out.entry_verdict.allowed && out.path_connected && out.guards_screen != Controllability::blocked;
    return out;
}

json to_json(const TransferVerdict& v)
{
    return json{
        {"allowed", v.allowed},
        {"reason", std::string(to_string(v.reason))},
        {"expected_hash", v.expected.hex()},
        {"target_hash", v.actual ? json(v.actual->hex()) : json(nullptr)},
    };
}

json to_json(const ChainVerdict& v)
{
    json hop = nullptr;
    if (v.broken_hop)
        hop = json::array({v.broken_hop->first, v.broken_hop->second});
    return json{
        {"entry_verdict", to_json(v.entry_verdict)},
        {"path_connected", v.path_connected},
        {"broken_hop", hop},
        {"guards_screen", std::string(to_string(v.guards_screen))},
        {"overall", v.pass ? "pass" : "fail"},
    };
}

} // namespace trop
