#include "statnet/stationarity.hpp"

#include <algorithm>
#include <cmath>

#include "statnet/error.hpp"

namespace statnet {

namespace {

void require_sample_size(std::size_t n) {
    if (n < 2) throw InvalidSizeError("sample size must be at least 2 for sqrt(log n)");
}

void require_tuning(double r) {
    if (!(r >= 0.0)) throw InvalidTuningError("tuning parameter r must be nonnegative");
}

} // namespace

void TuningConfig::validate() const {
    if (!(nu > 0.0)) throw InvalidTuningError("nu must be positive");
    require_tuning(r);
}

double soft_threshold(double v, double lambda) {
    const double mag = std::abs(v) - lambda;
    if (mag <= 0.0) return 0.0;
    return std::copysign(mag, v);
}

double kkt_residual(const VectorXd& beta, const VectorXd& grad, double r) {
    require_tuning(r);
    if (beta.size() != grad.size()) throw DimensionError("gradient and parameters differ in length");
    double worst = 0.0;
    for (Eigen::Index i = 0; i < beta.size(); ++i) {
        const double violation = beta[i] != 0.0
                                     ? std::abs(grad[i] + std::copysign(r, beta[i]))
                                     : std::max(std::abs(grad[i]) - r, 0.0);
        worst = std::max(worst, violation);
    }
    return worst;
}

double kkt_residual(const NetworkParams& p, const Dataset& ds, double r) {
    return kkt_residual(vec_params(p), loss_gradient(p, ds).flat(), r);
}

double tau_gap(const NetworkParams& candidate, const NetworkParams& reference,
               const Dataset& ds, double r) {
    return std::abs(objective(candidate, ds, r) - objective(reference, ds, r));
}

bool is_reasonable(const NetworkParams& p, std::size_t n) {
    require_sample_size(n);
    const double budget = std::sqrt(std::log(static_cast<double>(n)));
    return p.l1_gamma() <= budget && p.l1_theta() <= budget;
}

double oracle_tuning(std::size_t n, std::size_t w, std::size_t d, double nu) {
    require_sample_size(n);
    if (!(nu > 0.0)) throw InvalidTuningError("nu must be positive");
    const double nn = static_cast<double>(n);
    const double p = static_cast<double>(w + w * d);
    const double log_n = std::log(nn);
    return nu * std::pow(log_n, 1.5) * std::sqrt(std::log(nn * p) / nn);
}

StationarityReport certify(const NetworkParams& p, const Dataset& ds, double r,
                           double tolerance, const NetworkParams* reference) {
    StationarityReport out;
    out.kkt_residual = kkt_residual(p, ds, r);
    out.tolerance = tolerance;
    out.is_stationary = out.kkt_residual <= tolerance;
    if (reference != nullptr) out.tau_gap = tau_gap(p, *reference, ds, r);
    out.reasonable = is_reasonable(p, static_cast<std::size_t>(ds.size()));
    return out;
}

void to_json(nlohmann::json& j, const StationarityReport& report) {
    j = nlohmann::json{{"kkt_residual", report.kkt_residual},
                       {"tolerance", report.tolerance},
                       {"is_stationary", report.is_stationary},
                       {"tau_gap", report.tau_gap ? nlohmann::json(*report.tau_gap)
                                                  : nlohmann::json(nullptr)},
                       {"reasonable", report.reasonable}};
}

} // namespace statnet
