#pragma once

#include "trop/gadgets.hpp"
#include "trop/sig.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace trop::cli {

inline constexpr const char* tool_name = "tropcheck";
inline constexpr const char* tool_version = "0.1.0";

inline constexpr int exit_ok = 0;
inline constexpr int exit_usage = 64;
inline constexpr int exit_input = 65;
inline constexpr int exit_internal = 70;

// verify only
inline constexpr int exit_denied = 1;
inline constexpr int exit_verify_error = 2;

enum class Format { json, csv, text };

std::optional<Format> parse_format(std::string_view text);

struct RunConfig {
    std::string subcommand;
    std::vector<std::string> inputs;
    MatchMode mode = MatchMode::strict();
    // Empty: the facts file's sink_config, else the default list.
    std::vector<std::string> sinks;
    SearchLimits limits;
    Format format = Format::text;
    std::string output;

    std::string labels;
    std::string alt;
    std::string site;
    std::string target;
    std::string chain;
    bool invalid_only = false;
    // TROP_COLOR=1
    bool color = false;
};

// Parses argv-style arguments (without the program name) and runs.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(const RunConfig& config, std::ostream& out, std::ostream& err);

// Projections of a report envelope.
std::string render_json(const nlohmann::json& report);
std::string render_csv(const nlohmann::json& report);
std::string render_text(const nlohmann::json& report, bool color);

} // namespace trop::cli
