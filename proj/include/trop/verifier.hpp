#pragma once

// Forward-edge RTC simulation: the `cmpq hash, -8(fn); jne .error` check
// reduced to a verdict, applied to single transfers and whole chains.

#include "trop/facts.hpp"
#include "trop/gadgets.hpp"

#include <string>

#include <json.hpp>

namespace trop {

struct TransferVerdict {
    enum class Reason { hash_match, hash_mismatch, ineligible_target, unknown_site };

    bool allowed = false;
    Reason reason = Reason::unknown_site;
    TypeHash expected{};
    std::optional<TypeHash> actual;

    friend bool operator==(const TransferVerdict&, const TransferVerdict&) = default;
};

std::string_view to_string(TransferVerdict::Reason reason);

// Throws unknown_site / unknown_target.
TransferVerdict check_forward(std::string_view site_id, std::string_view target, const FactsDB& db, MatchMode mode);

struct ChainVerdict {
    TransferVerdict entry_verdict;
    bool path_connected = false;
    // First hop without a call edge, when the path is disconnected.
    std::optional<std::pair<std::string, std::string>> broken_hop;
    Controllability guards_screen = Controllability::unconstrained;
    bool pass = false;
};

// Only the entry transfer is hash-checked; later hops are direct calls or
// other sites' permitted transfers. Throws on structurally invalid chains
// (empty path, repeated function, unknown function or site).
ChainVerdict simulate_chain(const GadgetChain& chain, const FactsDB& db, MatchMode mode);

nlohmann::json to_json(const TransferVerdict& v);
nlohmann::json to_json(const ChainVerdict& v);

} // namespace trop
