#pragma once

#include <cstdint>
#include <set>
#include <string_view>
#include <utility>
#include <vector>

namespace trop::testing {

// Breadth-first enumeration of every simple path that starts in `sources`
// and ends in `sinks`, up to `max_nodes` nodes.
std::set<std::vector<int>> brute_force_paths(int n, const std::vector<std::pair<int, int>>& edges,
                                             const std::vector<int>& sources, const std::vector<int>& sinks,
                                             std::size_t max_nodes);

// Plain FNV-1a 64 over `domain` followed by `text`.
std::uint64_t reference_fnv1a(std::uint8_t domain, std::string_view text);

// Half-up tenths of a percentage, via long double.
std::uint64_t reference_tenths(std::uint64_t num, std::uint64_t den);

} // namespace trop::testing
