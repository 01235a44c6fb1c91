#include "trop/callgraph.hpp"

#include "trop/eligibility.hpp"

#include <algorithm>
#include <set>
#include <sstream>

using nlohmann::json;

namespace trop {

AdjacencyView::AdjacencyView(std::vector<std::string> nodes)
    : nodes_(std::move(nodes))
    , cells_(nodes_.size() * nodes_.size(), 0)
    , successors_(nodes_.size())
{
    for (std::size_t i = 0; i < nodes_.size(); ++i)
        index_.emplace(nodes_[i], i);
}

std::optional<std::size_t> AdjacencyView::index_of(std::string_view key) const
{
    auto it = index_.find(key);
    if (it == index_.end())
        return std::nullopt;
    return it->second;
}

void AdjacencyView::set(std::size_t from, std::size_t to)
{
    auto& cell = cells_[from * nodes_.size() + to];
    if (cell)
        return;
    cell = 1;
    ++edge_count_;
    auto& succ = successors_[from];
    succ.insert(std::upper_bound(succ.begin(), succ.end(), to), to);
}

bool AdjacencyView::has_edge(std::string_view from, std::string_view to) const
{
    auto a = index_of(from);
    auto b = index_of(to);
    return a && b && has_edge(*a, *b);
}

TargetIndex::TargetIndex(const FactsDB& db, MatchMode mode)
    : db_(&db)
    , mode_(mode)
{
    for (const auto& f : db.functions) {
        if (!hash_eligible(f, db))
            continue;
        by_signature_[canonicalize(f.signature, db.typedefs, mode).serialize()].push_back(f.key());
    }
    // db.functions is sorted by key, so every bucket already is too.
}

const std::vector<std::string>& TargetIndex::targets_for(const RawSignature& fp_signature) const
{
    auto it = by_signature_.find(canonicalize(fp_signature, db_->typedefs, mode_).serialize());
    return it == by_signature_.end() ? empty_ : it->second;
}

CallGraph build_graph(const FactsDB& db, MatchMode mode)
{
    CallGraph g;
    g.mode = mode;

    std::set<std::string> nodes;
    for (const auto& f : db.functions)
        if (f.is_definition)
            nodes.insert(f.key());
    for (const auto& e : db.direct_edges) {
        nodes.insert(e.caller);
        nodes.insert(e.callee);
    }
    g.nodes.assign(nodes.begin(), nodes.end());
    g.direct_edges = db.direct_edges;

    const TargetIndex index(db, mode);
    for (const auto& site : db.call_sites)
        for (const auto& target : index.targets_for(site.fp_signature))
            g.indirect_edges.push_back({site.id, site.enclosing_function, target, site.guards});
    return g;
}

std::vector<std::string> permitted_targets(const IndirectCallSite& site, const FactsDB& db, MatchMode mode)
{
    return TargetIndex(db, mode).targets_for(site.fp_signature);
}

AdjacencyView adjacency(const CallGraph& graph)
{
    AdjacencyView view(graph.nodes);
    auto link = [&](const std::string& from, const std::string& to) {
        auto a = view.index_of(from);
        auto b = view.index_of(to);
        if (a && b)
            view.set(*a, *b);
    };
    for (const auto& e : graph.direct_edges)
        link(e.caller, e.callee);
    for (const auto& e : graph.indirect_edges)
        link(e.caller, e.target);
    return view;
}

json to_json(const CallGraph& graph)
{
    json direct = json::array();
    for (const auto& e : graph.direct_edges) {
        json guards = json::array();
        for (const auto& gd : e.guards)
            guards.push_back(to_json(gd));
        direct.push_back(json{{"caller", e.caller}, {"callee", e.callee}, {"guards", guards}, {"location", e.location}});
    }
    json indirect = json::array();
    for (const auto& e : graph.indirect_edges) {
        json guards = json::array();
        for (const auto& gd : e.guards)
            guards.push_back(to_json(gd));
        indirect.push_back(
            json{{"site", e.site_id}, {"caller", e.caller}, {"target", e.target}, {"guards", guards}});
    }
    return json{
        {"mode", graph.mode.name()},
        {"nodes", graph.nodes},
        {"direct_edges", std::move(direct)},
        {"indirect_edges", std::move(indirect)},
    };
}

namespace {

std::string dot_quote(const std::string& s)
{
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\')
            out += '\\';
        out += c;
    }
    return out + "\"";
}

} // namespace

std::string to_dot(const CallGraph& graph)
{
    std::ostringstream os;
    os << "digraph callgraph {\n";
    os << "  // mode: " << graph.mode.name() << "\n";
    for (const auto& n : graph.nodes)
        os << "  " << dot_quote(n) << ";\n";
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& e : graph.direct_edges)
        if (seen.emplace(e.caller, e.callee).second)
            os << "  " << dot_quote(e.caller) << " -> " << dot_quote(e.callee)
               << (e.guards.empty() ? "" : " [color=orange]") << ";\n";
    for (const auto& e : graph.indirect_edges)
        os << "  " << dot_quote(e.caller) << " -> " << dot_quote(e.target)
           << " [style=dashed, label=" << dot_quote(e.site_id) << "];\n";
    os << "}\n";
    return os.str();
}

} // namespace trop
