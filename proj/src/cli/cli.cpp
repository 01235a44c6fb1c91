#include "trop/cli.hpp"

#include "trop/analyzer.hpp"
#include "trop/callgraph.hpp"
#include "trop/cextract.hpp"
#include "trop/eligibility.hpp"
#include "trop/error.hpp"
#include "trop/facts.hpp"
#include "trop/verifier.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

using nlohmann::json;

namespace trop::cli {

std::optional<Format> parse_format(std::string_view text)
{
    if (text == "json")
        return Format::json;
    if (text == "csv")
        return Format::csv;
    if (text == "text")
        return Format::text;
    return std::nullopt;
}

namespace {

void flatten(const json& j, const std::string& prefix, std::vector<std::pair<std::string, std::string>>& out)
{
    auto scalar = [](const json& v) -> std::string {
        if (v.is_null())
            return "";
        if (v.is_string())
            return v.get<std::string>();
        return v.dump();
    };
    if (j.is_object()) {
        for (const auto& [k, v] : j.items())
            flatten(v, prefix.empty() ? k : prefix + "." + k, out);
        return;
    }
    if (j.is_array()) {
        const bool flat = std::all_of(j.begin(), j.end(), [](const json& v) { return v.is_primitive(); });
        if (flat) {
            std::string s;
            for (std::size_t i = 0; i < j.size(); ++i)
                s += (i ? ";" : "") + scalar(j[i]);
            out.emplace_back(prefix, s);
            return;
        }
        for (std::size_t i = 0; i < j.size(); ++i)
            flatten(j[i], prefix + "." + std::to_string(i), out);
        return;
    }
    out.emplace_back(prefix, scalar(j));
}

std::string csv_field(const std::string& s)
{
    if (s.find_first_of(",\"\n") == std::string::npos)
        return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"')
            q += '"';
        q += c;
    }
    return q + "\"";
}

} // namespace

std::string render_json(const json& report)
{
    return report.dump(2) + "\n";
}

std::string render_csv(const json& report)
{
    std::vector<std::pair<std::string, std::string>> rows;
    flatten(report, "", rows);
    std::string s = "key,value\n";
    for (const auto& [k, v] : rows)
        s += csv_field(k) + "," + csv_field(v) + "\n";
    return s;
}

std::string render_text(const json& report, bool color)
{
    std::vector<std::pair<std::string, std::string>> rows;
    const json body = report.contains("report") ? report["report"] : report;
    flatten(body, "", rows);
    std::size_t width = 0;
    for (const auto& r : rows)
        width = std::max(width, r.first.size());

    std::string s = std::string(tool_name) + " " + report.value("command", std::string{});
    if (report.contains("mode"))
        s += " [mode " + report["mode"].get<std::string>() + "]";
    if (report.contains("limits"))
        s += " [max-depth " + report["limits"]["max_depth"].dump() + ", max-paths " +
             report["limits"]["max_paths"].dump() + "]";
    s += "\n";
    for (const auto& [k, v] : rows) {
        std::string key = k + std::string(width - k.size(), ' ');
        if (color)
            key = "\x1b[1m" + key + "\x1b[0m";
        s += "  " + key + "  " + v + "\n";
    }
    return s;
}

namespace {

json envelope(const RunConfig& cfg, json report, bool with_mode, bool with_limits)
{
    json j{
        {"tool", tool_name},
        {"tool_version", tool_version},
        {"schema_version", facts_schema_version},
        {"command", cfg.subcommand},
        {"report", std::move(report)},
    };
    if (with_mode)
        j["mode"] = cfg.mode.name();
    if (with_limits)
        j["limits"] = json{{"max_depth", cfg.limits.max_depth}, {"max_paths", cfg.limits.max_paths}};
    return j;
}

void write_output(const RunConfig& cfg, const std::string& text, std::ostream& out)
{
    if (cfg.output.empty()) {
        out << text;
        return;
    }
    std::ofstream f(cfg.output, std::ios::binary);
    if (!f)
        throw Error(ErrorCode::io_error, cfg.output, "cannot write '" + cfg.output + "'");
    f << text;
    if (!f)
        throw Error(ErrorCode::io_error, cfg.output, "write failed for '" + cfg.output + "'");
}

void emit(const RunConfig& cfg, const json& report, std::ostream& out)
{
    switch (cfg.format) {
    case Format::json:
        write_output(cfg, render_json(report), out);
        return;
    case Format::csv:
        write_output(cfg, render_csv(report), out);
        return;
    case Format::text:
        write_output(cfg, render_text(report, cfg.color), out);
        return;
    }
}

void need_inputs(const RunConfig& cfg, std::size_t n, bool at_least = false)
{
    if (at_least ? cfg.inputs.size() < n : cfg.inputs.size() != n)
        throw Error(ErrorCode::invalid_argument, cfg.subcommand,
                    cfg.subcommand + " expects " + std::string(at_least ? "at least " : "") + std::to_string(n) +
                        " input file(s), got " + std::to_string(cfg.inputs.size()));
}

void throw_first_error(const FactsDB& db)
{
    static const std::map<std::string, ErrorCode, std::less<>> codes = {
        {"ReferentialIntegrity", ErrorCode::referential_integrity},
        {"CyclicTypedef", ErrorCode::cyclic_typedef},
        {"UnresolvedTypedef", ErrorCode::unresolved_typedef},
        {"DuplicateDefinition", ErrorCode::duplicate_definition},
    };
    for (const auto& d : validate_facts(db)) {
        if (d.severity != Diagnostic::Severity::error)
            continue;
        auto it = codes.find(d.code);
        throw Error(it == codes.end() ? ErrorCode::schema_violation : it->second, d.subject, d.message);
    }
}

FactsDB load_with_labels(const RunConfig& cfg, const std::string& path)
{
    FactsDB db = load_facts_file(path);
    if (!cfg.labels.empty()) {
        db.labels = GroundTruthLabels{load_pairs_file(cfg.labels)};
        throw_first_error(db);
    }
    return db;
}

std::vector<std::string> effective_sinks(const RunConfig& cfg, const FactsDB& db)
{
    if (!cfg.sinks.empty())
        return cfg.sinks;
    if (!db.sink_config.empty())
        return db.sink_config;
    return default_sinks();
}

int cmd_extract(const RunConfig& cfg, std::ostream& out)
{
    need_inputs(cfg, 1, true);
    ExtractOptions opts;
    if (!cfg.sinks.empty())
        opts.sinks = cfg.sinks;
    FactsDB db = extract_corpus(cfg.inputs, opts);
    if (!cfg.labels.empty()) {
        db.labels = GroundTruthLabels{load_pairs_file(cfg.labels)};
        throw_first_error(db);
    }
    write_output(cfg, save_facts(db), out);
    return exit_ok;
}

int cmd_merge(const RunConfig& cfg, std::ostream& out)
{
    need_inputs(cfg, 2, true);
    FactsDB acc = load_facts_file(cfg.inputs[0]);
    for (std::size_t i = 1; i < cfg.inputs.size(); ++i)
        acc = merge_facts(acc, load_facts_file(cfg.inputs[i]));
    write_output(cfg, save_facts(acc), out);
    return exit_ok;
}

int cmd_validate(const RunConfig& cfg, std::ostream& out)
{
    need_inputs(cfg, 1);
    std::ifstream in(cfg.inputs[0], std::ios::binary);
    if (!in)
        throw Error(ErrorCode::io_error, cfg.inputs[0], "cannot read '" + cfg.inputs[0] + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::schema_violation, cfg.inputs[0], std::string("malformed JSON: ") + e.what());
    }
    FactsDB db = facts_from_json(j);
    normalize(db);
    const auto diags = validate_facts(db);
    json list = json::array();
    std::size_t errors = 0, warnings = 0;
    for (const auto& d : diags) {
        list.push_back(to_json(d));
        (d.severity == Diagnostic::Severity::error ? errors : warnings)++;
    }
    json report{{"input", cfg.inputs[0]},
                {"diagnostics", list},
                {"n_errors", errors},
                {"n_warnings", warnings},
                {"valid", errors == 0}};
    emit(cfg, envelope(cfg, report, false, false), out);
    return errors ? exit_input : exit_ok;
}

int cmd_analyze(const RunConfig& cfg, std::ostream& out)
{
    need_inputs(cfg, 1);
    const FactsDB db = load_with_labels(cfg, cfg.inputs[0]);
    json report = to_json(collision_metrics(db, cfg.mode));
    report["hash_coverage"] = to_json(hash_coverage(db));
    emit(cfg, envelope(cfg, report, true, false), out);
    return exit_ok;
}

int cmd_gadgets(const RunConfig& cfg, std::ostream& out)
{
    need_inputs(cfg, 1);
    const FactsDB db = load_with_labels(cfg, cfg.inputs[0]);
    ChainSearchOptions opts;
    opts.limits = cfg.limits;
    opts.sinks = effective_sinks(cfg, db);
    opts.invalid_entries_only = cfg.invalid_only;
    const ChainSearchResult r = find_chains(db, cfg.mode, opts);

    json chains = json::array();
    for (const auto& c : r.chains)
        chains.push_back(to_json(c));
    const GadgetCensus census = census_of(r.chains);
    json report{
        {"sinks", r.sinks},
        {"e_gadgets", r.e_gadgets},
        {"chains", chains},
        {"n_chains", r.chains.size()},
        {"truncated", r.truncated},
        {"note", r.truncated ? json("search limits reached; the chain list may be incomplete") : json(nullptr)},
        {"census", json{{"c_gadgets", census.c_gadgets}, {"l_gadgets", census.l_gadgets}, {"e_gadgets", census.e_gadgets}}},
    };
    emit(cfg, envelope(cfg, report, true, true), out);
    return exit_ok;
}

int cmd_compare(const RunConfig& cfg, std::ostream& out)
{
    need_inputs(cfg, 1);
    if (cfg.alt.empty())
        throw Error(ErrorCode::invalid_argument, "--alt", "compare needs --alt <pairs.json>");
    const FactsDB db = load_with_labels(cfg, cfg.inputs[0]);
    if (!db.labels)
        throw Error(ErrorCode::invalid_argument, "--labels", "compare needs ground-truth labels (--labels or embedded)");
    const auto alt = load_pairs_file(cfg.alt);
    const ComparisonPair r = compare_target_sets(db, alt, *db.labels, cfg.mode);
    json report{{"type_checking", to_json(r.type_checking)}, {"alternative", to_json(r.alternative)}};
    emit(cfg, envelope(cfg, report, true, false), out);
    return exit_ok;
}

int cmd_libimpact(const RunConfig& cfg, std::ostream& out)
{
    need_inputs(cfg, 2);
    const FactsDB app = load_facts_file(cfg.inputs[0]);
    const FactsDB lib = load_facts_file(cfg.inputs[1]);
    emit(cfg, envelope(cfg, to_json(library_impact(app, lib, cfg.mode)), true, false), out);
    return exit_ok;
}

int cmd_graph(const RunConfig& cfg, std::ostream& out)
{
    need_inputs(cfg, 1);
    const FactsDB db = load_facts_file(cfg.inputs[0]);
    const CallGraph g = build_graph(db, cfg.mode);
    if (cfg.format == Format::text) {
        write_output(cfg, to_dot(g), out);
        return exit_ok;
    }
    json report = to_json(g);
    json hashes = json::object();
    for (const auto& f : db.functions) {
        const auto c = canonicalize(f.signature, db.typedefs, cfg.mode);
        hashes[f.key()] = {
            {"canonical", c.serialize()},
            {"forward", type_hash(c, EdgeKind::forward).hex()},
            {"backward", type_hash(c, EdgeKind::backward).hex()},
            {"hash_eligible", hash_eligible(f, db)},
        };
    }
    report["function_hashes"] = std::move(hashes);
    emit(cfg, envelope(cfg, std::move(report), true, false), out);
    return exit_ok;
}

int cmd_verify(const RunConfig& cfg, std::ostream& out)
{
    need_inputs(cfg, 1);
    const FactsDB db = load_facts_file(cfg.inputs[0]);
    const bool single = !cfg.site.empty() || !cfg.target.empty();
    if (single == !cfg.chain.empty())
        throw Error(ErrorCode::invalid_argument, "verify", "verify needs either --site and --target, or --chain");
    if (single) {
        if (cfg.site.empty() || cfg.target.empty())
            throw Error(ErrorCode::invalid_argument, "verify", "--site and --target go together");
        const TransferVerdict v = check_forward(cfg.site, cfg.target, db, cfg.mode);
        json report = to_json(v);
        report["site"] = cfg.site;
        report["target"] = cfg.target;
        emit(cfg, envelope(cfg, report, true, false), out);
        return v.allowed ? exit_ok : exit_denied;
    }
    std::ifstream in(cfg.chain, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::io_error, cfg.chain, "cannot read '" + cfg.chain + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::schema_violation, cfg.chain, std::string("malformed JSON: ") + e.what());
    }
    // A gadgets report or a bare chain object.
    if (j.is_object() && j.contains("report") && j["report"].contains("chains")) {
        const auto& chains = j["report"]["chains"];
        if (chains.empty())
            throw Error(ErrorCode::invalid_argument, cfg.chain, "report holds no chains");
        j = chains.front();
    }
    const GadgetChain chain = chain_from_json(j);
    const ChainVerdict v = simulate_chain(chain, db, cfg.mode);
    json report = to_json(v);
    report["chain"] = j;
    emit(cfg, envelope(cfg, report, true, false), out);
    return v.pass ? exit_ok : exit_denied;
}

int exit_code_for(ErrorCode code)
{
    switch (code) {
    case ErrorCode::invalid_argument:
        return exit_usage;
    case ErrorCode::invariant_violation:
        return exit_internal;
    default:
        return exit_input;
    }
}

std::vector<std::string> split_list(const std::string& s)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty())
            out.push_back(item);
    return out;
}

} // namespace

int run(const RunConfig& cfg, std::ostream& out, std::ostream& err)
{
    const bool is_verify = cfg.subcommand == "verify";
    try {
        if (cfg.subcommand == "extract")
            return cmd_extract(cfg, out);
        if (cfg.subcommand == "merge")
            return cmd_merge(cfg, out);
        if (cfg.subcommand == "validate")
            return cmd_validate(cfg, out);
        if (cfg.subcommand == "analyze")
            return cmd_analyze(cfg, out);
        if (cfg.subcommand == "gadgets")
            return cmd_gadgets(cfg, out);
        if (cfg.subcommand == "compare")
            return cmd_compare(cfg, out);
        if (cfg.subcommand == "libimpact")
            return cmd_libimpact(cfg, out);
        if (cfg.subcommand == "graph")
            return cmd_graph(cfg, out);
        if (is_verify)
            return cmd_verify(cfg, out);
        err << "error: unknown subcommand '" << cfg.subcommand << "'\n";
        return exit_usage;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return is_verify ? exit_verify_error : exit_code_for(e.code());
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return is_verify ? exit_verify_error : exit_internal;
    }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Type-collision and TROP gadget analysis over C facts databases", tool_name};
    app.set_version_flag("--version", std::string(tool_version));
    app.require_subcommand(1);

    RunConfig cfg;
    std::string mode = "strict";
    bool include_return = false;
    std::string sinks;
    std::string format = "text";

    auto add_mode = [&](CLI::App* sub) {
        sub->add_option("--mode", mode, "strict, relaxed_ptr or arity")->capture_default_str();
        sub->add_flag("--arity-include-return", include_return, "arity mode also compares return presence");
    };
    auto add_format = [&](CLI::App* sub) {
        sub->add_option("--format", format, "json, csv or text")->capture_default_str();
    };
    auto add_output = [&](CLI::App* sub) { sub->add_option("-o,--output", cfg.output, "output file (default stdout)"); };
    auto add_inputs = [&](CLI::App* sub, const char* what) {
        sub->add_option("inputs", cfg.inputs, what)->required();
    };

    auto* extract = app.add_subcommand("extract", "extract a facts file from restricted C sources");
    add_inputs(extract, "C source files");
    extract->add_option("--sinks", sinks, "comma-separated sink functions");
    extract->add_option("--labels", cfg.labels, "embed a [site_id, function_key] pairs file as labels");
    add_output(extract);

    auto* analyze = app.add_subcommand("analyze", "type-collision metrics");
    add_inputs(analyze, "facts file");
    analyze->add_option("--labels", cfg.labels, "ground-truth pairs file");
    add_mode(analyze);
    add_format(analyze);
    add_output(analyze);

    auto* gadgets = app.add_subcommand("gadgets", "find gadget chains from corruptible call sites to sinks");
    add_inputs(gadgets, "facts file");
    gadgets->add_option("--labels", cfg.labels, "ground-truth pairs file");
    gadgets->add_option("--sinks", sinks, "comma-separated sink functions");
    gadgets->add_option("--max-depth", cfg.limits.max_depth, "maximum functions per chain")->capture_default_str();
    gadgets->add_option("--max-paths", cfg.limits.max_paths, "maximum chains reported")->capture_default_str();
    gadgets->add_flag("--invalid-only", cfg.invalid_only, "start only from targets never labeled valid");
    add_mode(gadgets);
    add_format(gadgets);
    add_output(gadgets);

    auto* compare = app.add_subcommand("compare", "compare type checking with another target set");
    add_inputs(compare, "facts file");
    compare->add_option("--alt", cfg.alt, "alternative [site_id, function_key] pairs")->required();
    compare->add_option("--labels", cfg.labels, "ground-truth pairs file");
    add_mode(compare);
    add_format(compare);
    add_output(compare);

    auto* libimpact = app.add_subcommand("libimpact", "target growth from merging a library");
    add_inputs(libimpact, "application and library facts files");
    add_mode(libimpact);
    add_format(libimpact);
    add_output(libimpact);

    auto* verify = app.add_subcommand("verify", "check one transfer or a whole chain against the type check");
    add_inputs(verify, "facts file");
    verify->add_option("--site", cfg.site, "call site id");
    verify->add_option("--target", cfg.target, "target function key");
    verify->add_option("--chain", cfg.chain, "chain JSON (a gadgets report or one chain)");
    add_mode(verify);
    add_format(verify);
    add_output(verify);

    auto* merge = app.add_subcommand("merge", "merge facts files over disjoint units");
    add_inputs(merge, "facts files");
    add_output(merge);

    auto* graph = app.add_subcommand("graph", "export the call graph (text = DOT)");
    add_inputs(graph, "facts file");
    add_mode(graph);
    add_format(graph);
    add_output(graph);

    auto* validate = app.add_subcommand("validate", "list schema and integrity diagnostics");
    add_inputs(validate, "facts file");
    add_format(validate);
    add_output(validate);

    const bool is_verify = !args.empty() && args.front() == "verify";
    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            app.exit(e, out, err);
            return exit_ok;
        }
        err << "error: " << e.what() << "\nrun with --help for usage\n";
        return is_verify ? exit_verify_error : exit_usage;
    }

    for (auto* sub : app.get_subcommands())
        cfg.subcommand = sub->get_name();

    try {
        cfg.mode = parse_match_mode(mode);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return is_verify ? exit_verify_error : exit_usage;
    }
    if (include_return) {
        if (cfg.mode.kind != MatchMode::Kind::arity) {
            err << "error: --arity-include-return needs --mode arity\n";
            return is_verify ? exit_verify_error : exit_usage;
        }
        cfg.mode.arity_include_return = true;
    }
    auto fmt = parse_format(format);
    if (!fmt) {
        err << "error: unknown format '" << format << "' (json, csv or text)\n";
        return is_verify ? exit_verify_error : exit_usage;
    }
    cfg.format = *fmt;
    cfg.sinks = split_list(sinks);
    if (!sinks.empty() && cfg.sinks.empty()) {
        err << "error: --sinks needs at least one name\n";
        return exit_usage;
    }
    const char* color = std::getenv("TROP_COLOR");
    cfg.color = color && std::string_view(color) == "1";
    return run(cfg, out, err);
}

} // namespace trop::cli
