#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace trop::testing {

std::set<std::vector<int>> brute_force_paths(int n, const std::vector<std::pair<int, int>>& edges,
                                             const std::vector<int>& sources, const std::vector<int>& sinks,
                                             std::size_t max_nodes)
{
    std::vector<std::vector<bool>> adj(n, std::vector<bool>(n, false));
    for (auto [a, b] : edges)
        adj[a][b] = true;
    auto is_sink = [&](int v) { return std::find(sinks.begin(), sinks.end(), v) != sinks.end(); };

    std::set<std::vector<int>> out;
    std::deque<std::vector<int>> queue;
    for (int s : sources)
        queue.push_back({s});
    while (!queue.empty()) {
        auto path = std::move(queue.front());
        queue.pop_front();
        if (is_sink(path.back()))
            out.insert(path);
        if (path.size() >= max_nodes)
            continue;
        for (int v = 0; v < n; ++v) {
            if (!adj[path.back()][v] || std::find(path.begin(), path.end(), v) != path.end())
                continue;
            auto next = path;
            next.push_back(v);
            queue.push_back(std::move(next));
        }
    }
    return out;
}

std::uint64_t reference_fnv1a(std::uint8_t domain, std::string_view text)
{
    std::uint64_t h = 14695981039346656037ull;
    h = (h ^ domain) * 1099511628211ull;
    for (unsigned char c : text)
        h = (h ^ c) * 1099511628211ull;
    return h;
}

std::uint64_t reference_tenths(std::uint64_t num, std::uint64_t den)
{
    if (den == 0)
        return 0;
    const long double tenths = 1000.0L * num / den;
    return static_cast<std::uint64_t>(std::floor(tenths + 0.5L + 1e-12L));
}

} // namespace trop::testing
