#pragma once

#include "dgs/gaussian.hpp"

#include <cstdint>

namespace dgs {

/// Counter-based normal draws: every (seed, stream, step) triple maps to a
/// fixed sample regardless of how many other streams were drawn before it.
struct NoiseKey {
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
    std::uint64_t step = 0;
};

std::uint64_t mix64(std::uint64_t x);
// Uniform in the open interval (0, 1).
double counter_uniform(const NoiseKey &key, std::uint64_t index);
Vec3 counter_normal3(const NoiseKey &key);

} // namespace dgs
