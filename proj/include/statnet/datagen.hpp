#pragma once

#include <cstdint>

#include "statnet/rng.hpp"
#include "statnet/risk_calculus.hpp"

namespace statnet {

struct GenConfig {
    Eigen::Index w = 10;
    Eigen::Index d = 10;
    Eigen::Index n = 500;
    double sigma = 0.5;
    /// Fraction of target coordinates (per layer) left nonzero.
    double sparsity = 0.3;
    std::uint64_t seed = 0;
    Activation activation = Activation::linear;

    void validate() const;
};

/// Number of nonzero coordinates out of `count` kept at the given sparsity.
Eigen::Index kept_coordinates(Eigen::Index count, double sparsity);

/// Sparse Gaussian target with ||gamma*||_1, ||Theta*||_1 <= sqrt(log n),
/// enforced by uniform shrinkage of each layer. Throws
/// DegenerateParameterError if ten masked draws all leave a layer at zero.
NetworkParams sample_target(const GenConfig& cfg);

/// n rows x_i ~ N(0, I_d), y_i = target(x_i) + u_i with u_i ~ N(0, sigma^2).
/// The stream is derive_seed(cfg.seed, role).
Dataset sample_dataset(const NetworkParams& target, const GenConfig& cfg,
                       StreamRole role = StreamRole::train);

void to_json(nlohmann::json& j, const GenConfig& cfg);

} // namespace statnet
