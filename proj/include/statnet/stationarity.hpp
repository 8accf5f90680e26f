#pragma once

#include <cstddef>
#include <optional>

#include "statnet/risk_calculus.hpp"

namespace statnet {

inline constexpr double kDefaultKktTolerance = 1e-8;

struct StationarityReport {
    double kkt_residual = 0.0;
    double tolerance = kDefaultKktTolerance;
    bool is_stationary = false;
    std::optional<double> tau_gap;
    bool reasonable = false;
};

/// nu is the distribution-dependent constant of the oracle tuning
/// parameter; r the l1 penalty level.
struct TuningConfig {
    double nu = 1.0;
    double r = 0.0;

    void validate() const;
};

/// sign(v) * max(|v| - lambda, 0).
double soft_threshold(double v, double lambda);

/// Largest coordinatewise violation of 0 in grad + r * subdiff ||beta||_1,
/// given the gradient already evaluated at beta.
double kkt_residual(const VectorXd& beta, const VectorXd& grad, double r);

/// Same, evaluating the loss gradient (ReLU subgradient on ReLU data).
double kkt_residual(const NetworkParams& p, const Dataset& ds, double r);

/// |objective(candidate) - objective(reference)|.
double tau_gap(const NetworkParams& candidate, const NetworkParams& reference,
               const Dataset& ds, double r);

/// ||gamma||_1 <= sqrt(log n) and ||Theta||_1 <= sqrt(log n). Requires n >= 2.
bool is_reasonable(const NetworkParams& p, std::size_t n);

/// nu * (log n)^{3/2} * sqrt(log(n p) / n) with p = w + w d. Requires n >= 2.
double oracle_tuning(std::size_t n, std::size_t w, std::size_t d, double nu);

StationarityReport certify(const NetworkParams& p, const Dataset& ds, double r,
                           double tolerance = kDefaultKktTolerance,
                           const NetworkParams* reference = nullptr);

void to_json(nlohmann::json& j, const StationarityReport& report);

} // namespace statnet
