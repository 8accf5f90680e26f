#include "statnet/rng.hpp"

#include <cmath>
#include <numbers>

namespace statnet {

std::uint64_t Rng::next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double Rng::uniform() {
    // (k + 0.5) / 2^53 for k in [0, 2^53) never hits 0 or 1.
    const auto k = next_u64() >> 11;
    return (static_cast<double>(k) + 0.5) * 0x1.0p-53;
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
}

std::uint64_t Rng::below(std::uint64_t bound) {
    const unsigned __int128 product =
        static_cast<unsigned __int128>(next_u64()) * bound;
    return static_cast<std::uint64_t>(product >> 64);
}

} // namespace statnet
