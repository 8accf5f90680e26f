#include "statnet/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "statnet/error.hpp"

namespace statnet {

namespace {

// Zeroes all but `keep` entries of v, choosing the survivors by a partial
// Fisher-Yates shuffle.
void mask_to(Eigen::Ref<VectorXd> v, Eigen::Index keep, Rng& rng) {
    std::vector<Eigen::Index> order(static_cast<std::size_t>(v.size()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    for (Eigen::Index i = 0; i < keep; ++i) {
        const auto span = static_cast<std::uint64_t>(v.size() - i);
        const auto pick = i + static_cast<Eigen::Index>(rng.below(span));
        std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(pick)]);
    }
    VectorXd kept = VectorXd::Zero(v.size());
    for (Eigen::Index i = 0; i < keep; ++i) {
        const auto idx = order[static_cast<std::size_t>(i)];
        kept[idx] = v[idx];
    }
    v = kept;
}

// Takes the matrix itself so the l1 norm is summed in the same order as
// NetworkParams::l1_theta.
template <typename Derived>
void shrink_to_budget(Eigen::MatrixBase<Derived>& v, double budget) {
    const double norm = v.cwiseAbs().sum();
    if (norm <= budget) return;
    v *= budget / norm;
    while (v.cwiseAbs().sum() > budget) v *= 1.0 - 0x1.0p-52;
}

} // namespace

void GenConfig::validate() const {
    if (w < 1 || d < 1) throw DimensionError("w and d must be at least 1");
    if (n < 1) throw InvalidSizeError("n must be at least 1");
    if (!(sigma >= 0.0)) throw InvalidTuningError("sigma must be nonnegative");
    if (!(sparsity >= 0.0 && sparsity <= 1.0)) {
        throw InvalidTuningError("sparsity must lie in [0, 1]");
    }
}

Eigen::Index kept_coordinates(Eigen::Index count, double sparsity) {
    // The small offset keeps e.g. 0.3 * 10 from rounding up to 4.
    const auto keep = static_cast<Eigen::Index>(std::ceil(sparsity * static_cast<double>(count) - 1e-9));
    return std::clamp<Eigen::Index>(keep, 0, count);
}

NetworkParams sample_target(const GenConfig& cfg) {
    cfg.validate();
    if (cfg.n < 2) throw InvalidSizeError("target budget sqrt(log n) needs n >= 2");
    const double budget = std::sqrt(std::log(static_cast<double>(cfg.n)));
    Rng rng(derive_seed(cfg.seed, StreamRole::target));
    for (int attempt = 0; attempt < 10; ++attempt) {
        VectorXd gamma(cfg.w);
        for (auto& g : gamma) g = rng.normal();
        VectorXd theta_flat(cfg.w * cfg.d);
        for (auto& t : theta_flat) t = rng.normal();
        mask_to(gamma, kept_coordinates(cfg.w, cfg.sparsity), rng);
        mask_to(theta_flat, kept_coordinates(cfg.w * cfg.d, cfg.sparsity), rng);
        if (gamma.isZero(0.0) || theta_flat.isZero(0.0)) continue;
        MatrixXd theta = unflatten_rows(theta_flat, cfg.w, cfg.d);
        shrink_to_budget(gamma, budget);
        shrink_to_budget(theta, budget);
        return {std::move(gamma), std::move(theta)};
    }
    throw DegenerateParameterError("target draw stayed zero after masking in 10 attempts");
}

Dataset sample_dataset(const NetworkParams& target, const GenConfig& cfg, StreamRole role) {
    cfg.validate();
    if (target.input_dim() != cfg.d || target.width() != cfg.w) {
        throw DimensionError("target shape does not match the generation config");
    }
    const auto seed = derive_seed(cfg.seed, role);
    Rng rng(seed);
    MatrixXd X(cfg.n, cfg.d);
    VectorXd noise(cfg.n);
    for (Eigen::Index i = 0; i < cfg.n; ++i) {
        for (Eigen::Index k = 0; k < cfg.d; ++k) X(i, k) = rng.normal();
        noise[i] = cfg.sigma * rng.normal();
    }
    VectorXd y = predict(target, X, cfg.activation) + noise;
    return {std::move(X), std::move(y), cfg.sigma, cfg.activation, seed};
}

void to_json(nlohmann::json& j, const GenConfig& cfg) {
    j = nlohmann::json{{"w", cfg.w},
                       {"d", cfg.d},
                       {"n", cfg.n},
                       {"sigma", cfg.sigma},
                       {"sparsity", cfg.sparsity},
                       {"seed", cfg.seed},
                       {"activation", std::string(to_string(cfg.activation))},
                       {"rng", std::string(Rng::kAlgorithm)}};
}

} // namespace statnet
