#include "dgs/rng.hpp"

#include <cmath>
#include <numbers>

namespace dgs {

std::uint64_t mix64(std::uint64_t x) {
    // splitmix64 finalizer
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double counter_uniform(const NoiseKey &key, std::uint64_t index) {
    const std::uint64_t h = mix64(mix64(mix64(mix64(key.seed) ^ key.stream) ^ key.step) ^ index);
    // 53 random bits, shifted off zero.
    return (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53;
}

Vec3 counter_normal3(const NoiseKey &key) {
    // Two Box-Muller pairs; the fourth normal is discarded.
    const double u1 = counter_uniform(key, 0), u2 = counter_uniform(key, 1);
    const double u3 = counter_uniform(key, 2), u4 = counter_uniform(key, 3);
    const double r1 = std::sqrt(-2.0 * std::log(u1)), r2 = std::sqrt(-2.0 * std::log(u3));
    constexpr double two_pi = 2.0 * std::numbers::pi;
    return Vec3(r1 * std::cos(two_pi * u2), r1 * std::sin(two_pi * u2), r2 * std::cos(two_pi * u4));
}

} // namespace dgs
