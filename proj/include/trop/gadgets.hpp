#pragma once

// TROP gadget discovery. Whole functions are gadgets: a C-gadget collides
// with a corruptible pointer, L-gadgets link, and an E-gadget calls a sink.

#include "trop/callgraph.hpp"
#include "trop/facts.hpp"

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace trop {

enum class Controllability { unconstrained, globally_controllable, blocked };

std::string_view to_string(Controllability c);

struct SearchLimits {
    // Maximum number of functions on a path.
    std::size_t max_depth = 8;
    std::size_t max_paths = 10000;
};

using FunctionPath = std::vector<std::string>;

struct PathSearchResult {
    // Ordered by length, then lexicographically.
    std::vector<FunctionPath> paths;
    bool depth_limit_hit = false;
    bool path_limit_hit = false;

    bool truncated() const { return depth_limit_hit || path_limit_hit; }
};

// Functions that call one of `sinks` directly, either recorded in
// calls_sinks or visible as a direct edge to a callee of that name.
// Throws invalid_argument when `sinks` is empty.
std::vector<std::string> find_e_gadgets(const FactsDB& db, const std::vector<std::string>& sinks);
std::vector<std::string> find_e_gadgets(const FactsDB& db);

// Sink calls made by `function_key` among `sinks`.
std::vector<std::string> sink_calls(const FactsDB& db, std::string_view function_key,
                                    const std::vector<std::string>& sinks);

struct CGadgetCandidates {
    std::vector<std::string> all;
    bool labeled = false;
    std::vector<std::string> valid;
    std::vector<std::string> invalid;
};

CGadgetCandidates find_c_gadgets(const IndirectCallSite& site, const CallGraph& graph, const FactsDB& db);

// Every simple path from a member of `c_gadgets` to a member of `e_gadgets`
// in `view`; a function in both sets yields the one-node path.
PathSearchResult find_candidate_paths(const AdjacencyView& view, const std::vector<std::string>& c_gadgets,
                                      const std::vector<std::string>& e_gadgets, SearchLimits limits = {});

struct ChainControl {
    Controllability controllability = Controllability::unconstrained;
    std::vector<GuardAnnotation> guards_on_path;
};

Controllability classify_guard(const GuardAnnotation& guard);

// Screens the guards met along `path`. Each hop uses its least constrained
// edge; the sink call out of the last function counts as a hop when `sinks`
// is non-empty.
ChainControl classify_controllability(const FunctionPath& path, const CallGraph& graph, const FactsDB& db,
                                      const std::vector<std::string>& sinks = {});

struct GadgetChain {
    std::string entry_site;
    FunctionPath path;
    std::vector<GuardAnnotation> guards_on_path;
    Controllability controllability = Controllability::unconstrained;
    // Edges from a path function back to itself or an earlier one.
    std::vector<std::pair<std::string, std::string>> loop_edges;
    // Some path function can reach the entry site's function again.
    bool can_retrigger_entry = false;

    friend bool operator==(const GadgetChain&, const GadgetChain&) = default;
};

struct ChainSearchOptions {
    SearchLimits limits;
    // Use the facts file's sink_config when empty.
    std::vector<std::string> sinks;
    // With labels present, only start chains from labeled-invalid targets.
    bool invalid_entries_only = false;
};

struct ChainSearchResult {
    MatchMode mode;
    SearchLimits limits;
    std::vector<std::string> sinks;
    std::vector<std::string> e_gadgets;
    std::vector<GadgetChain> chains;
    bool truncated = false;
};

ChainSearchResult find_chains(const FactsDB& db, MatchMode mode, const ChainSearchOptions& options = {});

struct GadgetCensus {
    std::size_t c_gadgets = 0;
    std::size_t l_gadgets = 0;
    std::size_t e_gadgets = 0;
    bool truncated = false;
};

GadgetCensus census_of(const std::vector<GadgetChain>& chains);
GadgetCensus gadget_census(const FactsDB& db, MatchMode mode, SearchLimits limits = {},
                           const std::vector<std::string>& sinks = {});

nlohmann::json to_json(const GadgetChain& chain);
GadgetChain chain_from_json(const nlohmann::json& j);

} // namespace trop
