#pragma once

#include "gridsched/profiles.hpp"

#include <vector>

namespace gridsched {

// Non-volatile requirement filter, the first stage of resource matching.
// String comparison is case-insensitive after trimming; absent os/arch in the
// requirements means "any".
bool matches(const NonVolatileRequirements& req, const NonVolatileFacts& facts);

// Stable-order subsequence of `profiles` where matches() holds.
std::vector<ComputerProfile> prune(const NonVolatileRequirements& req,
                                   const std::vector<ComputerProfile>& profiles);

}  // namespace gridsched
