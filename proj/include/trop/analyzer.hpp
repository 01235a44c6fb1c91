#pragma once

// Over-approximation metrics: collision counts against ground-truth labels,
// library-merge deltas, and comparisons with externally computed target sets.

#include "trop/facts.hpp"

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

namespace trop {

// 100 * numerator / denominator, 0 when the denominator is 0.
double percent(std::uint64_t numerator, std::uint64_t denominator);
// The same percentage in tenths, rounded half up with integer arithmetic.
std::uint64_t percent_tenths(std::uint64_t numerator, std::uint64_t denominator);
// "137.5" style rendering of percent_tenths().
std::string format_percent(std::uint64_t numerator, std::uint64_t denominator);

struct CollisionReport {
    MatchMode mode;
    // Distinct canonical fp signatures over all call sites, and distinct
    // pointer declarations. Which of the two a "function pointer" count
    // means is left to the reader.
    std::uint64_t n_function_pointer_sigs = 0;
    std::uint64_t n_function_pointer_decls = 0;
    std::uint64_t n_call_sites = 0;
    std::uint64_t n_functions = 0;
    std::uint64_t n_functions_with_hash = 0;
    // Distinct functions that are a permitted target of some site.
    std::uint64_t n_permitted_targets = 0;
    std::uint64_t n_indirect_call_pairs = 0;
    // Same pairs counted per (strict pointer signature, target); the mode
    // only decides which targets are permitted.
    std::uint64_t n_signature_target_pairs = 0;

    // Present only when ground-truth labels are available.
    std::optional<std::uint64_t> n_valid_targets;
    std::optional<std::uint64_t> n_invalid_targets;
    std::optional<std::uint64_t> n_invalid_indirect_pairs;
    std::optional<std::uint64_t> n_invalid_signature_target_pairs;
    // Labeled-valid pairs the type check rejects (real type mismatches).
    std::optional<std::uint64_t> n_labeled_pairs_denied;

    std::optional<double> pct_invalid_targets() const;
    std::optional<double> pct_invalid_pairs() const;

    std::vector<Diagnostic> diagnostics;

    std::set<std::string> permitted_targets;
    std::set<std::string> invalid_targets;
};

// Builds the arithmetic part of a report from published-style counts.
CollisionReport collision_report_from_counts(std::uint64_t valid_targets, std::uint64_t invalid_targets,
                                             std::uint64_t all_pairs, std::uint64_t invalid_pairs);

CollisionReport collision_metrics(const FactsDB& db, MatchMode mode);

struct HashCoverage {
    std::uint64_t n_functions = 0;
    std::uint64_t n_with_hash = 0;
    double fraction = 0.0;
};

HashCoverage hash_coverage(const FactsDB& db);

struct ComparisonReport {
    std::string label;
    std::uint64_t base_edges = 0;
    std::uint64_t total_edges = 0;
    // max(total - base, 0).
    std::uint64_t invalid_edges = 0;
    // Edges outside the labeled base, and base edges the policy misses.
    std::uint64_t edges_outside_base = 0;
    std::uint64_t base_edges_missed = 0;
    std::vector<Diagnostic> diagnostics;

    double pct_invalid() const { return percent(invalid_edges, total_edges); }
};

ComparisonReport comparison_from_counts(std::string label, std::uint64_t base, std::uint64_t total);

struct ComparisonPair {
    ComparisonReport type_checking;
    ComparisonReport alternative;
};

// `alt_pairs` is the externally computed (site, target) set; `labels` the
// ground truth. Throws referential_integrity on unknown sites or functions.
ComparisonPair compare_target_sets(const FactsDB& db, const std::set<SitePair>& alt_pairs,
                                   const GroundTruthLabels& labels, MatchMode mode);

struct MergeImpactReport {
    MatchMode mode;
    CollisionReport before;
    CollisionReport after;
    std::uint64_t targets_before = 0;
    std::uint64_t targets_after = 0;
    std::uint64_t pairs_before = 0;
    std::uint64_t pairs_after = 0;
    std::set<std::string> new_targets;

    std::int64_t target_delta() const { return static_cast<std::int64_t>(targets_after - targets_before); }
    std::int64_t pair_delta() const { return static_cast<std::int64_t>(pairs_after - pairs_before); }
};

MergeImpactReport library_impact(const FactsDB& app, const FactsDB& lib, MatchMode mode);

nlohmann::json to_json(const CollisionReport& r);
nlohmann::json to_json(const HashCoverage& c);
nlohmann::json to_json(const ComparisonReport& r);
nlohmann::json to_json(const MergeImpactReport& r);

} // namespace trop
