#pragma once

// Facts extraction from a restricted subset of C (see docs/restricted-c.md).
// Sources are expected pre-expanded: the only preprocessor lines allowed are
// `#include` lines, which are skipped.

#include "trop/facts.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace trop {

// exec family plus system.
std::vector<std::string> default_sinks();
std::vector<std::string> default_allocators();

struct ExtractOptions {
    std::vector<std::string> sinks = default_sinks();
    // Calls whose result marks a pointer variable as heap storage.
    std::vector<std::string> allocators = default_allocators();
};

// Throws Error with parse_error or unsupported_construct; the subject is
// "<unit>:<line>:<col>".
FactsDB parse_unit(std::string_view source, const std::string& unit, const ExtractOptions& options = {});

// Units are named by file name; fragments are merged with merge_facts.
FactsDB extract_corpus(const std::vector<std::string>& paths, const ExtractOptions& options = {});

} // namespace trop
