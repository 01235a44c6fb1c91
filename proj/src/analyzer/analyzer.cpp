#include "trop/analyzer.hpp"

#include "trop/callgraph.hpp"
#include "trop/eligibility.hpp"
#include "trop/error.hpp"

#include <algorithm>
#include <iterator>
#include <map>

using nlohmann::json;

namespace trop {

double percent(std::uint64_t numerator, std::uint64_t denominator)
{
    if (denominator == 0)
        return 0.0;
    return 100.0 * static_cast<double>(numerator) / static_cast<double>(denominator);
}

std::uint64_t percent_tenths(std::uint64_t numerator, std::uint64_t denominator)
{
    if (denominator == 0)
        return 0;
    return (2 * numerator * 1000 + denominator) / (2 * denominator);
}

std::string format_percent(std::uint64_t numerator, std::uint64_t denominator)
{
    const auto tenths = percent_tenths(numerator, denominator);
    return std::to_string(tenths / 10) + "." + std::to_string(tenths % 10);
}

std::optional<double> CollisionReport::pct_invalid_targets() const
{
    if (!n_valid_targets || !n_invalid_targets)
        return std::nullopt;
    return percent(*n_invalid_targets, *n_valid_targets);
}

std::optional<double> CollisionReport::pct_invalid_pairs() const
{
    if (!n_invalid_indirect_pairs)
        return std::nullopt;
    return percent(*n_invalid_indirect_pairs, n_indirect_call_pairs);
}

CollisionReport collision_report_from_counts(std::uint64_t valid_targets, std::uint64_t invalid_targets,
                                             std::uint64_t all_pairs, std::uint64_t invalid_pairs)
{
    CollisionReport r;
    r.n_valid_targets = valid_targets;
    r.n_invalid_targets = invalid_targets;
    r.n_indirect_call_pairs = all_pairs;
    r.n_invalid_indirect_pairs = invalid_pairs;
    return r;
}

HashCoverage hash_coverage(const FactsDB& db)
{
    HashCoverage c;
    for (const auto& f : db.functions) {
        if (!f.is_definition)
            continue;
        ++c.n_functions;
        if (hash_eligible(f, db))
            ++c.n_with_hash;
    }
    c.fraction = c.n_functions ? static_cast<double>(c.n_with_hash) / static_cast<double>(c.n_functions) : 0.0;
    return c;
}

CollisionReport collision_metrics(const FactsDB& db, MatchMode mode)
{
    CollisionReport r;
    r.mode = mode;

    const auto coverage = hash_coverage(db);
    r.n_functions = coverage.n_functions;
    r.n_functions_with_hash = coverage.n_with_hash;
    r.n_call_sites = db.call_sites.size();

    std::set<std::string> fp_sigs, fp_decls;
    std::map<std::string, std::string> site_sig;
    for (const auto& s : db.call_sites) {
        auto text = canonicalize(s.fp_signature, db.typedefs, MatchMode::strict()).serialize();
        fp_sigs.insert(text);
        fp_decls.insert(s.pointer_decl.empty() ? s.id : s.pointer_decl);
        site_sig.emplace(s.id, text);
    }
    r.n_function_pointer_sigs = fp_sigs.size();
    r.n_function_pointer_decls = fp_decls.size();

    const CallGraph graph = build_graph(db, mode);
    std::set<SitePair> pairs;
    std::set<std::pair<std::string, std::string>> sig_pairs;
    for (const auto& e : graph.indirect_edges) {
        pairs.emplace(e.site_id, e.target);
        sig_pairs.emplace(site_sig.at(e.site_id), e.target);
        r.permitted_targets.insert(e.target);
    }
    r.n_permitted_targets = r.permitted_targets.size();
    r.n_indirect_call_pairs = pairs.size();
    r.n_signature_target_pairs = sig_pairs.size();

    if (!db.labels) {
        r.diagnostics.push_back({Diagnostic::Severity::warning, "MissingLabels", "",
                                 "no ground-truth labels: invalid counts are not reported"});
        return r;
    }

    const auto& valid = db.labels->valid_pairs;
    std::set<std::string> valid_targets;
    std::set<std::pair<std::string, std::string>> valid_sig_pairs;
    std::uint64_t denied = 0;
    for (const auto& [site, fn] : valid) {
        valid_targets.insert(fn);
        if (auto it = site_sig.find(site); it != site_sig.end())
            valid_sig_pairs.emplace(it->second, fn);
        if (!pairs.count({site, fn}))
            ++denied;
    }
    for (const auto& t : r.permitted_targets)
        if (!valid_targets.count(t))
            r.invalid_targets.insert(t);

    std::uint64_t invalid_pairs = 0;
    for (const auto& p : pairs)
        if (!valid.count(p))
            ++invalid_pairs;
    std::uint64_t invalid_sig_pairs = 0;
    for (const auto& p : sig_pairs)
        if (!valid_sig_pairs.count(p))
            ++invalid_sig_pairs;

    r.n_valid_targets = valid_targets.size();
    r.n_invalid_targets = r.invalid_targets.size();
    r.n_invalid_indirect_pairs = invalid_pairs;
    r.n_invalid_signature_target_pairs = invalid_sig_pairs;
    r.n_labeled_pairs_denied = denied;
    return r;
}

namespace {

ComparisonReport compare_one(std::string label, const std::set<SitePair>& edges, const std::set<SitePair>& base)
{
    ComparisonReport r = comparison_from_counts(std::move(label), base.size(), edges.size());
    for (const auto& e : edges)
        if (!base.count(e))
            ++r.edges_outside_base;
    for (const auto& b : base)
        if (!edges.count(b))
            ++r.base_edges_missed;
    return r;
}

} // namespace

ComparisonReport comparison_from_counts(std::string label, std::uint64_t base, std::uint64_t total)
{
    ComparisonReport r;
    r.label = std::move(label);
    r.base_edges = base;
    r.total_edges = total;
    if (total >= base) {
        r.invalid_edges = total - base;
    } else {
        r.invalid_edges = 0;
        r.diagnostics.push_back({Diagnostic::Severity::warning, "NegativeInvalidEdges", r.label,
                                 "total edges (" + std::to_string(total) + ") below base (" + std::to_string(base) +
                                     "); invalid edges floored at 0"});
    }
    return r;
}

ComparisonPair compare_target_sets(const FactsDB& db, const std::set<SitePair>& alt_pairs,
                                   const GroundTruthLabels& labels, MatchMode mode)
{
    auto check = [&](const std::set<SitePair>& pairs, const char* what) {
        for (const auto& [site, fn] : pairs) {
            if (!db.find_site(site))
                throw Error(ErrorCode::referential_integrity, site,
                            std::string(what) + " references unknown call site '" + site + "'");
            if (!db.find_function(fn))
                throw Error(ErrorCode::referential_integrity, fn,
                            std::string(what) + " references unknown function '" + fn + "'");
        }
    };
    check(alt_pairs, "alternative target set");
    check(labels.valid_pairs, "labels");

    std::set<SitePair> tc;
    for (const auto& e : build_graph(db, mode).indirect_edges)
        tc.emplace(e.site_id, e.target);

    return {compare_one("type_checking", tc, labels.valid_pairs),
            compare_one("alternative", alt_pairs, labels.valid_pairs)};
}

MergeImpactReport library_impact(const FactsDB& app, const FactsDB& lib, MatchMode mode)
{
    const FactsDB merged = merge_facts(app, lib);
    MergeImpactReport r;
    r.mode = mode;
    r.before = collision_metrics(app, mode);
    r.after = collision_metrics(merged, mode);
    r.targets_before = r.before.n_permitted_targets;
    r.targets_after = r.after.n_permitted_targets;
    r.pairs_before = r.before.n_indirect_call_pairs;
    r.pairs_after = r.after.n_indirect_call_pairs;
    std::set_difference(r.after.permitted_targets.begin(), r.after.permitted_targets.end(),
                        r.before.permitted_targets.begin(), r.before.permitted_targets.end(),
                        std::inserter(r.new_targets, r.new_targets.end()));
    return r;
}

namespace {

json optional_count(const std::optional<std::uint64_t>& v)
{
    return v ? json(*v) : json(nullptr);
}

json pct_json(std::uint64_t num, std::uint64_t den)
{
    return static_cast<double>(percent_tenths(num, den)) / 10.0;
}

json diagnostics_json(const std::vector<Diagnostic>& ds)
{
    json j = json::array();
    for (const auto& d : ds)
        j.push_back(to_json(d));
    return j;
}

} // namespace

json to_json(const CollisionReport& r)
{
    json j{
        {"mode", r.mode.name()},
        {"n_function_pointer_sigs", r.n_function_pointer_sigs},
        {"n_function_pointer_decls", r.n_function_pointer_decls},
        {"n_call_sites", r.n_call_sites},
        {"n_functions", r.n_functions},
        {"n_functions_with_hash", r.n_functions_with_hash},
        {"pct_functions_with_hash", pct_json(r.n_functions_with_hash, r.n_functions)},
        {"n_permitted_targets", r.n_permitted_targets},
        {"n_indirect_call_pairs", r.n_indirect_call_pairs},
        {"n_signature_target_pairs", r.n_signature_target_pairs},
        {"n_valid_targets", optional_count(r.n_valid_targets)},
        {"n_invalid_targets", optional_count(r.n_invalid_targets)},
        {"n_invalid_indirect_pairs", optional_count(r.n_invalid_indirect_pairs)},
        {"n_invalid_signature_target_pairs", optional_count(r.n_invalid_signature_target_pairs)},
        {"n_labeled_pairs_denied", optional_count(r.n_labeled_pairs_denied)},
        {"pct_invalid_targets", nullptr},
        {"pct_invalid_pairs", nullptr},
        {"permitted_targets", r.permitted_targets},
        {"invalid_targets", r.invalid_targets},
        {"diagnostics", diagnostics_json(r.diagnostics)},
    };
    if (r.n_valid_targets && r.n_invalid_targets)
        j["pct_invalid_targets"] = pct_json(*r.n_invalid_targets, *r.n_valid_targets);
    if (r.n_invalid_indirect_pairs)
        j["pct_invalid_pairs"] = pct_json(*r.n_invalid_indirect_pairs, r.n_indirect_call_pairs);
    return j;
}

json to_json(const HashCoverage& c)
{
    return json{{"n_functions", c.n_functions}, {"n_with_hash", c.n_with_hash}, {"fraction", c.fraction}};
}

json to_json(const ComparisonReport& r)
{
    return json{
        {"label", r.label},
        {"base_edges", r.base_edges},
        {"total_edges", r.total_edges},
        {"invalid_edges", r.invalid_edges},
        {"pct_invalid", pct_json(r.invalid_edges, r.total_edges)},
        {"edges_outside_base", r.edges_outside_base},
        {"pct_outside_base", pct_json(r.edges_outside_base, r.total_edges)},
        {"base_edges_missed", r.base_edges_missed},
        {"diagnostics", diagnostics_json(r.diagnostics)},
    };
}

json to_json(const MergeImpactReport& r)
{
    return json{
        {"mode", r.mode.name()},
        {"targets_before", r.targets_before},
        {"targets_after", r.targets_after},
        {"target_delta", r.target_delta()},
        {"pairs_before", r.pairs_before},
        {"pairs_after", r.pairs_after},
        {"pair_delta", r.pair_delta()},
        {"new_targets", r.new_targets},
        {"before", to_json(r.before)},
        {"after", to_json(r.after)},
    };
}

} // namespace trop
