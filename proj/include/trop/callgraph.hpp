#pragma once

#include "trop/facts.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace trop {

struct IndirectEdge {
    std::string site_id;
    std::string caller;
    std::string target;
    std::vector<GuardAnnotation> guards;

    friend bool operator==(const IndirectEdge&, const IndirectEdge&) = default;
};

// Direct calls plus every indirect transfer the type check lets through.
struct CallGraph {
    MatchMode mode;
    // Defined functions and external callees, sorted.
    std::vector<std::string> nodes;
    std::vector<DirectCallEdge> direct_edges;
    // Sorted by (site_id, target).
    std::vector<IndirectEdge> indirect_edges;

    friend bool operator==(const CallGraph&, const CallGraph&) = default;
};

// Boolean caller -> callee matrix over the sorted node list, multi-edges
// collapsed.
class AdjacencyView {
public:
    AdjacencyView() = default;
    explicit AdjacencyView(std::vector<std::string> nodes);

    std::size_t size() const { return nodes_.size(); }
    const std::vector<std::string>& nodes() const { return nodes_; }
    std::optional<std::size_t> index_of(std::string_view key) const;

    void set(std::size_t from, std::size_t to);
    bool has_edge(std::size_t from, std::size_t to) const { return cells_[from * nodes_.size() + to] != 0; }
    bool has_edge(std::string_view from, std::string_view to) const;

    // Successor indices in ascending order.
    const std::vector<std::size_t>& successors(std::size_t from) const { return successors_[from]; }
    std::size_t edge_count() const { return edge_count_; }

private:
    std::vector<std::string> nodes_;
    std::map<std::string, std::size_t, std::less<>> index_;
    std::vector<std::uint8_t> cells_;
    std::vector<std::vector<std::size_t>> successors_;
    std::size_t edge_count_ = 0;
};

// Canonical signature of every hash-eligible function, grouped for lookup.
class TargetIndex {
public:
    TargetIndex(const FactsDB& db, MatchMode mode);

    // Sorted keys of eligible functions whose canonical form equals `sig`'s.
    const std::vector<std::string>& targets_for(const RawSignature& fp_signature) const;

private:
    const FactsDB* db_;
    MatchMode mode_;
    std::map<std::string, std::vector<std::string>, std::less<>> by_signature_;
    std::vector<std::string> empty_;
};

CallGraph build_graph(const FactsDB& db, MatchMode mode);

std::vector<std::string> permitted_targets(const IndirectCallSite& site, const FactsDB& db, MatchMode mode);

AdjacencyView adjacency(const CallGraph& graph);

nlohmann::json to_json(const CallGraph& graph);
std::string to_dot(const CallGraph& graph);

} // namespace trop
