#pragma once

#include "trop/facts.hpp"

namespace trop {

// Whether `f` carries a forward hash and so can be an indirect-call target.
// Definitions only; a static function also needs its address taken.
bool hash_eligible(const FunctionDecl& f, const FactsDB& db);

} // namespace trop
