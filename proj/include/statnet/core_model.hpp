#pragma once

#include <Eigen/Dense>

#include <string_view>

#include "json.hpp"

namespace statnet {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class Activation { linear, relu };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view name);

/// Weights of the shallow network x -> gamma^T sigma(Theta x).
///
/// gamma holds the w outer weights, theta the w x d inner weights. Both are
/// validated on construction (w >= 1, d >= 1, every entry finite) and the
/// object is immutable afterwards.
class NetworkParams {
public:
    NetworkParams(VectorXd gamma, MatrixXd theta);

    static NetworkParams zeros(Eigen::Index w, Eigen::Index d);

    const VectorXd& gamma() const { return gamma_; }
    const MatrixXd& theta() const { return theta_; }

    Eigen::Index width() const { return gamma_.size(); }
    Eigen::Index input_dim() const { return theta_.cols(); }
    /// Effective dimension w + w*d.
    Eigen::Index num_params() const { return width() + width() * input_dim(); }

    /// gamma^T Theta as a length-d column vector; the linear network's
    /// end-to-end coefficient vector.
    VectorXd end_to_end() const { return theta_.transpose() * gamma_; }

    double l1_gamma() const { return gamma_.lpNorm<1>(); }
    double l1_theta() const { return theta_.cwiseAbs().sum(); }
    double l1() const { return l1_gamma() + l1_theta(); }

    friend bool operator==(const NetworkParams& a, const NetworkParams& b);

private:
    VectorXd gamma_;
    MatrixXd theta_;
};

/// Nonzero per-unit scale factors alpha_j for the rescaling
/// gamma_j -> gamma_j * alpha_j, theta_jk -> theta_jk / alpha_j.
class ScalingVector {
public:
    explicit ScalingVector(VectorXd alpha);

    /// alpha = (1/c, ..., 1/c).
    static ScalingVector uniform(Eigen::Index w, double c);

    const VectorXd& alpha() const { return alpha_; }
    ScalingVector inverse() const;

private:
    VectorXd alpha_;
};

/// Network whose input is augmented by w-1 extra coordinates that the
/// inner layer maps into the orthogonal complement of gamma, so the output
/// does not depend on them.
class ExtendedParams {
public:
    ExtendedParams(NetworkParams base, MatrixXd basis);

    const NetworkParams& base() const { return base_; }
    /// w x (w-1), columns orthonormal and orthogonal to gamma.
    const MatrixXd& basis() const { return basis_; }
    /// [Theta, A], w x (d + w - 1).
    MatrixXd extended_theta() const;
    /// gamma^T [Theta, A] (x, x_tilde).
    double forward(const VectorXd& x, const VectorXd& x_tilde) const;

private:
    NetworkParams base_;
    MatrixXd basis_;
};

/// (gamma_1..gamma_w, Theta row by row).
VectorXd vec_params(const NetworkParams& p);
NetworkParams unvec_params(const VectorXd& beta, Eigen::Index w, Eigen::Index d);

/// Row-major flattening of a w x d matrix, the layout of the Theta part of beta.
VectorXd flatten_rows(const MatrixXd& m);
MatrixXd unflatten_rows(const VectorXd& v, Eigen::Index rows, Eigen::Index cols);

double forward_linear(const NetworkParams& p, const VectorXd& x);
double forward_relu(const NetworkParams& p, const VectorXd& x);
double forward(const NetworkParams& p, const VectorXd& x, Activation act);

/// Network outputs for every row of X.
VectorXd predict(const NetworkParams& p, const MatrixXd& X, Activation act);

NetworkParams rescale(const NetworkParams& p, const ScalingVector& s);

/// Throws DegenerateParameterError when gamma == 0.
ExtendedParams extend(const NetworkParams& p);

void to_json(nlohmann::json& j, const NetworkParams& p);
NetworkParams params_from_json(const nlohmann::json& j);

} // namespace statnet
