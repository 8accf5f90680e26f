#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include "statnet/core_model.hpp"

namespace statnet {

/// Inputs x_i as rows of X with outputs y_i. sigma, activation and seed are
/// generation metadata; activation also selects the forward pass used by
/// the risks.
class Dataset {
public:
    Dataset(MatrixXd X, VectorXd y, double sigma = 0.0,
            Activation activation = Activation::linear,
            std::optional<std::uint64_t> seed = std::nullopt);

    const MatrixXd& X() const { return X_; }
    const VectorXd& y() const { return y_; }
    double sigma() const { return sigma_; }
    Activation activation() const { return activation_; }
    const std::optional<std::uint64_t>& seed() const { return seed_; }

    Eigen::Index size() const { return X_.rows(); }
    Eigen::Index input_dim() const { return X_.cols(); }

private:
    MatrixXd X_;
    VectorXd y_;
    double sigma_;
    Activation activation_;
    std::optional<std::uint64_t> seed_;
};

/// Partial derivatives laid out like the parameters they belong to.
struct ParamGradient {
    VectorXd gamma;
    MatrixXd theta;

    /// Canonical (gamma, Theta row-major) order, matching vec_params.
    VectorXd flat() const;
};

struct RiskReport {
    double empirical_risk = 0.0;
    double population_risk = 0.0;
    double objective = 0.0;
    double l1_beta = 0.0;
};

/// Blocks of the population Hessian. Theta coordinates are indexed
/// j*d + k (row-major), matching the Theta part of vec_params.
struct HessianBlocks {
    MatrixXd block_thetatheta; // (w*d) x (w*d)
    MatrixXd block_gammagamma; // w x w
    MatrixXd block_cross;      // (w*d) x w, d^2 / d theta_{j'k'} d gamma_j

    /// Full p x p matrix in canonical (gamma, Theta) order.
    MatrixXd assembled() const;
    /// Full matrix in (Theta, gamma) order, the layout used when the probe
    /// direction is written as (a_theta, a_gamma).
    MatrixXd assembled_theta_first() const;
};

double empirical_risk(const NetworkParams& p, const Dataset& ds);

/// empirical_risk + r * ||beta||_1. Throws InvalidTuningError for r < 0.
double objective(const NetworkParams& p, const Dataset& ds, double r);

/// Gradient of the empirical risk for the linear network.
/// Throws UnsupportedActivationError on a ReLU dataset.
ParamGradient empirical_gradient(const NetworkParams& p, const Dataset& ds);

/// ReLU subgradient, taking the indicator at zero pre-activation as 0.
/// Always evaluates the ReLU network regardless of ds.activation().
ParamGradient subgradient_relu(const NetworkParams& p, const Dataset& ds);

/// Dispatches on ds.activation().
ParamGradient loss_gradient(const NetworkParams& p, const Dataset& ds);

/// E[(y - gamma^T Theta x)^2] for x ~ N(0, I), y = target(x) + N(0, sigma^2):
/// ||Theta^T gamma - Theta*^T gamma*||^2 + sigma^2.
double population_risk(const NetworkParams& p, const NetworkParams& target, double sigma);

ParamGradient population_gradient(const NetworkParams& p, const NetworkParams& target);

/// Exact population Hessian under identity input covariance. `bias`, when
/// given, is E[(y - target(x)) x]; it is zero under the generating model.
HessianBlocks population_hessian(const NetworkParams& p, const NetworkParams& target,
                                 const std::optional<VectorXd>& bias = std::nullopt);

/// a^T H a for a = (a_theta, a_gamma) without forming H:
///   2 sum_k ((Theta_{.,k})^T a_gamma + gamma^T a_theta^k)^2
///     + 4 sum_k (m_k - bias_k) a_gamma^T a_theta^k,
/// where m = Theta^T gamma - Theta*^T gamma* and a_theta^k gathers the
/// coordinates (j, k) of the row-major a_theta.
double hessian_quadratic_closed(const NetworkParams& p, const NetworkParams& target,
                                const VectorXd& a_theta, const VectorXd& a_gamma,
                                const std::optional<VectorXd>& bias = std::nullopt);

RiskReport risk_report(const NetworkParams& p, const Dataset& ds,
                       const NetworkParams& target, double r);

void to_json(nlohmann::json& j, const RiskReport& report);
void to_json(nlohmann::json& j, const Dataset& ds);
Dataset dataset_from_json(const nlohmann::json& j);

/// CSV with header x_1,...,x_d,y and 17 significant digits.
void write_dataset_csv(const Dataset& ds, const std::filesystem::path& path);
Dataset read_dataset_csv(const std::filesystem::path& path, double sigma = 0.0,
                         Activation activation = Activation::linear);

} // namespace statnet
