#include "trop/eligibility.hpp"

namespace trop {

bool hash_eligible(const FunctionDecl& f, const FactsDB&)
{
    if (!f.is_definition)
        return false;
    return !f.is_static || f.is_address_taken;
}

} // namespace trop
