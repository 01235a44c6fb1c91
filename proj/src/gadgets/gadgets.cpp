#include "trop/gadgets.hpp"

#include "trop/error.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <set>

using nlohmann::json;

namespace trop {

std::string_view to_string(Controllability c)
{
    switch (c) {
    case Controllability::unconstrained:
        return "unconstrained";
    case Controllability::globally_controllable:
        return "globally_controllable";
    case Controllability::blocked:
        return "blocked";
    }
    return "blocked";
}

namespace {

std::string_view plain_name(std::string_view key)
{
    auto pos = key.rfind("::");
    return pos == std::string_view::npos ? key : key.substr(pos + 2);
}

bool path_less(const FunctionPath& a, const FunctionPath& b)
{
    if (a.size() != b.size())
        return a.size() < b.size();
    return a < b;
}

std::vector<std::string> sorted_unique(std::vector<std::string> v)
{
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

} // namespace

std::vector<std::string> sink_calls(const FactsDB& db, std::string_view function_key,
                                    const std::vector<std::string>& sinks)
{
    std::set<std::string, std::less<>> sink_set(sinks.begin(), sinks.end());
    std::set<std::string> out;
    if (const FunctionDecl* f = db.find_function(function_key))
        for (const auto& s : f->calls_sinks)
            if (sink_set.count(s))
                out.insert(s);
    auto first = std::lower_bound(db.direct_edges.begin(), db.direct_edges.end(), function_key,
                                  [](const DirectCallEdge& e, std::string_view k) { return e.caller < k; });
    for (auto it = first; it != db.direct_edges.end() && it->caller == function_key; ++it) {
        auto name = plain_name(it->callee);
        if (sink_set.count(name))
            out.emplace(name);
    }
    return {out.begin(), out.end()};
}

std::vector<std::string> find_e_gadgets(const FactsDB& db, const std::vector<std::string>& sinks)
{
    if (sinks.empty())
        throw Error(ErrorCode::invalid_argument, "sinks", "the sink list must not be empty");
    std::vector<std::string> out;
    for (const auto& f : db.functions) {
        if (!f.is_definition)
            continue;
        const std::string key = f.key();
        if (!sink_calls(db, key, sinks).empty())
            out.push_back(key);
    }
    return out;
}

std::vector<std::string> find_e_gadgets(const FactsDB& db)
{
    return find_e_gadgets(db, db.sink_config);
}

CGadgetCandidates find_c_gadgets(const IndirectCallSite& site, const CallGraph& graph, const FactsDB& db)
{
    CGadgetCandidates out;
    auto it = std::lower_bound(graph.indirect_edges.begin(), graph.indirect_edges.end(), site.id,
                               [](const IndirectEdge& e, const std::string& id) { return e.site_id < id; });
    for (; it != graph.indirect_edges.end() && it->site_id == site.id; ++it)
        out.all.push_back(it->target);
    out.all = sorted_unique(std::move(out.all));
    if (db.labels) {
        out.labeled = true;
        for (const auto& t : out.all) {
            if (db.labels->valid_pairs.count({site.id, t}))
                out.valid.push_back(t);
            else
                out.invalid.push_back(t);
        }
    }
    return out;
}

namespace {

// Depth-first simple-path enumeration between one C-gadget and one E-gadget.
// `budget` counts the paths still allowed; finding one more sets the flag.
class PathSearch {
public:
    PathSearch(const AdjacencyView& view, SearchLimits limits, std::size_t budget)
        : view_(view)
        , limits_(limits)
        , budget_(budget)
        , visited_(view.size(), 0)
    {
        predecessors_.resize(view.size());
        for (std::size_t a = 0; a < view.size(); ++a)
            for (auto b : view.successors(a))
                predecessors_[b].push_back(a);
    }

    void run(std::size_t cg, std::size_t eg)
    {
        if (stopped_)
            return;
        auto cached = reach_cache_.find(eg);
        if (cached == reach_cache_.end()) {
            compute_reaches(eg);
            cached = reach_cache_.emplace(eg, reaches_).first;
        } else {
            reaches_ = cached->second;
        }
        if (!reaches_[cg])
            return;
        goal_ = eg;
        discover(cg);
    }

    std::vector<FunctionPath> take_paths() { return std::move(found_); }
    bool depth_limit_hit() const { return depth_hit_; }
    bool path_limit_hit() const { return stopped_; }

private:
    void compute_reaches(std::size_t eg)
    {
        reaches_.assign(view_.size(), 0);
        std::deque<std::size_t> queue{eg};
        reaches_[eg] = 1;
        while (!queue.empty()) {
            auto n = queue.front();
            queue.pop_front();
            for (auto p : predecessors_[n])
                if (!reaches_[p]) {
                    reaches_[p] = 1;
                    queue.push_back(p);
                }
        }
    }

    void discover(std::size_t node)
    {
        path_.push_back(node);
        visited_[node] = 1;
        if (node == goal_) {
            record();
        } else if (path_.size() >= limits_.max_depth) {
            for (auto next : view_.successors(node))
                if (!visited_[next] && reaches_[next])
                    depth_hit_ = true;
        } else {
            for (auto next : view_.successors(node)) {
                if (stopped_)
                    break;
                if (!visited_[next] && reaches_[next])
                    discover(next);
            }
        }
        visited_[node] = 0;
        path_.pop_back();
    }

    void record()
    {
        if (found_.size() >= budget_) {
            stopped_ = true;
            return;
        }
        FunctionPath p;
        p.reserve(path_.size());
        for (auto i : path_)
            p.push_back(view_.nodes()[i]);
        found_.push_back(std::move(p));
    }

    const AdjacencyView& view_;
    SearchLimits limits_;
    std::size_t budget_;
    std::vector<std::vector<std::size_t>> predecessors_;
    std::vector<std::uint8_t> reaches_;
    std::map<std::size_t, std::vector<std::uint8_t>> reach_cache_;
    std::vector<std::uint8_t> visited_;
    std::vector<std::size_t> path_;
    std::size_t goal_ = 0;
    std::vector<FunctionPath> found_;
    bool depth_hit_ = false;
    bool stopped_ = false;
};

std::vector<std::size_t> indices_of(const AdjacencyView& view, const std::vector<std::string>& keys, const char* what)
{
    std::vector<std::size_t> out;
    for (const auto& k : sorted_unique(keys)) {
        auto i = view.index_of(k);
        if (!i)
            throw Error(ErrorCode::invalid_argument, k, std::string(what) + " '" + k + "' is not a graph node");
        out.push_back(*i);
    }
    return out;
}

PathSearchResult search_paths(const AdjacencyView& view, const std::vector<std::string>& c_gadgets,
                              const std::vector<std::string>& e_gadgets, SearchLimits limits, std::size_t budget)
{
    const auto cgs = indices_of(view, c_gadgets, "C-gadget");
    const auto egs = indices_of(view, e_gadgets, "E-gadget");
    PathSearch search(view, limits, budget);
    for (auto cg : cgs)
        for (auto eg : egs)
            search.run(cg, eg);
    PathSearchResult out;
    out.paths = search.take_paths();
    out.depth_limit_hit = search.depth_limit_hit();
    out.path_limit_hit = search.path_limit_hit();
    std::sort(out.paths.begin(), out.paths.end(), path_less);
    return out;
}

void check_limits(const SearchLimits& limits)
{
    if (limits.max_depth == 0 || limits.max_paths == 0)
        throw Error(ErrorCode::invalid_argument, "limits", "max_depth and max_paths must be positive");
}

} // namespace

PathSearchResult find_candidate_paths(const AdjacencyView& view, const std::vector<std::string>& c_gadgets,
                                      const std::vector<std::string>& e_gadgets, SearchLimits limits)
{
    check_limits(limits);
    return search_paths(view, c_gadgets, e_gadgets, limits, limits.max_paths);
}

Controllability classify_guard(const GuardAnnotation& guard)
{
    for (const auto& r : guard.referenced) {
        const auto scope = effective_scope(r.scope);
        if (scope != ScopeClass::global && scope != ScopeClass::heap)
            return Controllability::blocked;
    }
    return Controllability::globally_controllable;
}

namespace {

Controllability classify_edge(const std::vector<GuardAnnotation>& guards)
{
    Controllability c = Controllability::unconstrained;
    for (const auto& g : guards)
        c = std::max(c, classify_guard(g));
    return c;
}

// Guard lists of every edge, keyed by (caller, callee).
class HopIndex {
public:
    HopIndex(const CallGraph& graph)
    {
        for (const auto& e : graph.direct_edges)
            hops_[{e.caller, e.callee}].push_back(&e.guards);
        for (const auto& e : graph.indirect_edges)
            hops_[{e.caller, e.target}].push_back(&e.guards);
    }

    // The least constrained edge of a hop, or nullptr if there is no edge.
    const std::vector<GuardAnnotation>* best(const std::string& from, const std::string& to) const
    {
        auto it = hops_.find({from, to});
        if (it == hops_.end())
            return nullptr;
        const std::vector<GuardAnnotation>* best = nullptr;
        Controllability best_class = Controllability::blocked;
        for (const auto* guards : it->second) {
            auto c = classify_edge(*guards);
            if (!best || c < best_class) {
                best = guards;
                best_class = c;
            }
        }
        return best;
    }

private:
    std::map<std::pair<std::string, std::string>, std::vector<const std::vector<GuardAnnotation>*>> hops_;
};

ChainControl classify_with(const FunctionPath& path, const HopIndex& hops, const FactsDB& db,
                           const std::vector<std::string>& sinks)
{
    ChainControl out;
    auto take = [&](const std::vector<GuardAnnotation>* guards) {
        if (!guards)
            return;
        out.controllability = std::max(out.controllability, classify_edge(*guards));
        out.guards_on_path.insert(out.guards_on_path.end(), guards->begin(), guards->end());
    };
    for (std::size_t i = 0; i + 1 < path.size(); ++i)
        take(hops.best(path[i], path[i + 1]));
    if (!path.empty() && !sinks.empty()) {
        // The sink call itself: pick its least constrained occurrence.
        const std::vector<GuardAnnotation>* best = nullptr;
        for (const auto& sink : sink_calls(db, path.back(), sinks)) {
            const auto* guards = hops.best(path.back(), sink);
            if (guards && (!best || classify_edge(*guards) < classify_edge(*best)))
                best = guards;
        }
        take(best);
    }
    return out;
}

} // namespace

ChainControl classify_controllability(const FunctionPath& path, const CallGraph& graph, const FactsDB& db,
                                      const std::vector<std::string>& sinks)
{
    return classify_with(path, HopIndex(graph), db, sinks);
}

ChainSearchResult find_chains(const FactsDB& db, MatchMode mode, const ChainSearchOptions& options)
{
    check_limits(options.limits);
    ChainSearchResult out;
    out.mode = mode;
    out.limits = options.limits;
    out.sinks = sorted_unique(options.sinks.empty() ? db.sink_config : options.sinks);
    out.e_gadgets = find_e_gadgets(db, out.sinks);

    const CallGraph graph = build_graph(db, mode);
    const AdjacencyView view = adjacency(graph);
    const HopIndex hops(graph);

    std::vector<std::vector<std::size_t>> predecessors(view.size());
    for (std::size_t a = 0; a < view.size(); ++a)
        for (auto b : view.successors(a))
            predecessors[b].push_back(a);

    std::size_t budget = options.limits.max_paths;
    for (const auto& site : db.call_sites) {
        const auto cands = find_c_gadgets(site, graph, db);
        const auto& entries = (options.invalid_entries_only && cands.labeled) ? cands.invalid : cands.all;
        if (entries.empty() || out.e_gadgets.empty())
            continue;
        auto found = search_paths(view, entries, out.e_gadgets, options.limits, budget);
        out.truncated = out.truncated || found.truncated();
        budget -= found.paths.size();

        // Functions from which the site's enclosing function is reachable.
        std::vector<std::uint8_t> retrigger(view.size(), 0);
        if (auto enc = view.index_of(site.enclosing_function)) {
            std::deque<std::size_t> queue{*enc};
            retrigger[*enc] = 1;
            while (!queue.empty()) {
                auto n = queue.front();
                queue.pop_front();
                for (auto p : predecessors[n])
                    if (!retrigger[p]) {
                        retrigger[p] = 1;
                        queue.push_back(p);
                    }
            }
        }

        for (auto& path : found.paths) {
            GadgetChain chain;
            chain.entry_site = site.id;
            auto control = classify_with(path, hops, db, out.sinks);
            chain.controllability = control.controllability;
            chain.guards_on_path = std::move(control.guards_on_path);
            for (std::size_t i = 0; i < path.size(); ++i) {
                for (std::size_t j = 0; j <= i; ++j)
                    if (view.has_edge(path[i], path[j]))
                        chain.loop_edges.emplace_back(path[i], path[j]);
                if (retrigger[*view.index_of(path[i])])
                    chain.can_retrigger_entry = true;
            }
            chain.path = std::move(path);
            out.chains.push_back(std::move(chain));
        }
        if (found.path_limit_hit)
            break;
    }

    std::sort(out.chains.begin(), out.chains.end(), [](const GadgetChain& a, const GadgetChain& b) {
        if (a.path != b.path)
            return path_less(a.path, b.path);
        return a.entry_site < b.entry_site;
    });
    return out;
}

GadgetCensus census_of(const std::vector<GadgetChain>& chains)
{
    std::set<std::string> c, l, e;
    for (const auto& chain : chains) {
        if (chain.path.empty())
            continue;
        c.insert(chain.path.front());
        e.insert(chain.path.back());
        for (std::size_t i = 1; i + 1 < chain.path.size(); ++i)
            l.insert(chain.path[i]);
    }
    return {c.size(), l.size(), e.size(), false};
}

GadgetCensus gadget_census(const FactsDB& db, MatchMode mode, SearchLimits limits, const std::vector<std::string>& sinks)
{
    const auto& effective = sinks.empty() ? db.sink_config : sinks;
    if (effective.empty())
        return {};
    ChainSearchOptions options;
    options.limits = limits;
    options.sinks = effective;
    const auto result = find_chains(db, mode, options);
    auto census = census_of(result.chains);
    census.truncated = result.truncated;
    return census;
}

json to_json(const GadgetChain& chain)
{
    json guards = json::array();
    for (const auto& g : chain.guards_on_path)
        guards.push_back(to_json(g));
    json loops = json::array();
    for (const auto& [a, b] : chain.loop_edges)
        loops.push_back(json::array({a, b}));
    json l_gadgets = json::array();
    for (std::size_t i = 1; i + 1 < chain.path.size(); ++i)
        l_gadgets.push_back(chain.path[i]);
    return json{
        {"entry_site", chain.entry_site},
        {"path", chain.path},
        {"c_gadget", chain.path.empty() ? "" : chain.path.front()},
        {"l_gadgets", std::move(l_gadgets)},
        {"e_gadget", chain.path.empty() ? "" : chain.path.back()},
        {"controllability", std::string(to_string(chain.controllability))},
        {"guards_on_path", std::move(guards)},
        {"loop_edges", std::move(loops)},
        {"can_retrigger_entry", chain.can_retrigger_entry},
    };
}

GadgetChain chain_from_json(const json& j)
{
    if (!j.is_object())
        throw Error(ErrorCode::schema_violation, "$", "chain must be a JSON object");
    GadgetChain chain;
    auto site = j.find("entry_site");
    if (site == j.end() || !site->is_string())
        throw Error(ErrorCode::schema_violation, "$.entry_site", "chain needs a string entry_site");
    chain.entry_site = site->get<std::string>();
    auto path = j.find("path");
    if (path == j.end() || !path->is_array())
        throw Error(ErrorCode::schema_violation, "$.path", "chain needs a path array");
    for (const auto& p : *path) {
        if (!p.is_string())
            throw Error(ErrorCode::schema_violation, "$.path", "path entries must be strings");
        chain.path.push_back(p.get<std::string>());
    }

    // Report metadata is optional; verification recomputes it.
    if (auto c = j.find("controllability"); c != j.end()) {
        const std::string text = c->is_string() ? c->get<std::string>() : "";
        bool known = false;
        for (auto v : {Controllability::unconstrained, Controllability::globally_controllable, Controllability::blocked})
            if (to_string(v) == text) {
                chain.controllability = v;
                known = true;
            }
        if (!known)
            throw Error(ErrorCode::schema_violation, "$.controllability", "unknown controllability '" + text + "'");
    }
    if (auto g = j.find("guards_on_path"); g != j.end())
        chain.guards_on_path = guards_from_json(json{{"guards", *g}}, "$");
    if (auto l = j.find("loop_edges"); l != j.end()) {
        if (!l->is_array())
            throw Error(ErrorCode::schema_violation, "$.loop_edges", "loop_edges must be an array");
        for (const auto& e : *l) {
            if (!e.is_array() || e.size() != 2 || !e[0].is_string() || !e[1].is_string())
                throw Error(ErrorCode::schema_violation, "$.loop_edges", "loop edges are [from, to] string pairs");
            chain.loop_edges.emplace_back(e[0].get<std::string>(), e[1].get<std::string>());
        }
    }
    if (auto r = j.find("can_retrigger_entry"); r != j.end()) {
        if (!r->is_boolean())
            throw Error(ErrorCode::schema_violation, "$.can_retrigger_entry", "can_retrigger_entry must be a boolean");
        chain.can_retrigger_entry = r->get<bool>();
    }
    return chain;
}

} // namespace trop
