#pragma once

#include <cstdint>
#include <string_view>

namespace statnet {

/// Counter-based SplitMix64 generator with Box-Muller normals.
///
/// The n-th 64-bit output is a fixed bijective mix of `seed + n * golden`,
/// so a stream is fully determined by its seed and replays bit-exactly on
/// any IEEE-754 platform with a correctly rounded libm. The algorithm
/// identifier is written into every artifact that depends on it.
class Rng {
public:
    static constexpr std::string_view kAlgorithm = "splitmix64+box-muller/v1";

    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64();
    /// Uniform on the open interval (0, 1), 53 bits of resolution.
    double uniform();
    /// Standard normal.
    double normal();
    /// Uniform integer in [0, bound), bound > 0. Rejection-free Lemire reduction.
    std::uint64_t below(std::uint64_t bound);

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Role tags XOR-ed into a root seed so that the target, the train/test
/// data and the optimizer initialization draw from disjoint streams.
enum class StreamRole : std::uint64_t {
    target = 0x7461726765740000ULL,   // "target"
    train = 0x747261696e000000ULL,    // "train"
    test = 0x7465737400000000ULL,     // "test"
    init = 0x696e697400000000ULL,     // "init"
    verify = 0x7665726966790000ULL,   // "verify"
};

constexpr std::uint64_t derive_seed(std::uint64_t root, StreamRole role) {
    return root ^ static_cast<std::uint64_t>(role);
}

} // namespace statnet
