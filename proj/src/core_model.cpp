#include "statnet/core_model.hpp"

#include <cmath>
#include <string>

#include "statnet/error.hpp"

namespace statnet {

namespace {

void require_input_dim(const NetworkParams& p, const VectorXd& x) {
    if (x.size() != p.input_dim()) {
        throw DimensionError("input has length " + std::to_string(x.size()) +
                             ", network expects " + std::to_string(p.input_dim()));
    }
}

} // namespace

std::string_view to_string(Activation a) {
    return a == Activation::linear ? "linear" : "relu";
}

Activation parse_activation(std::string_view name) {
    if (name == "linear") return Activation::linear;
    if (name == "relu") return Activation::relu;
    throw UnsupportedActivationError("unknown activation '" + std::string(name) + "'");
}

NetworkParams::NetworkParams(VectorXd gamma, MatrixXd theta)
    : gamma_(std::move(gamma)), theta_(std::move(theta)) {
    if (gamma_.size() < 1) throw DimensionError("network width must be at least 1");
    if (theta_.cols() < 1) throw DimensionError("input dimension must be at least 1");
    if (theta_.rows() != gamma_.size()) {
        throw DimensionError("theta has " + std::to_string(theta_.rows()) +
                             " rows but gamma has " + std::to_string(gamma_.size()) +
                             " entries");
    }
    if (!gamma_.allFinite() || !theta_.allFinite()) {
        throw DimensionError("network parameters must be finite");
    }
}

NetworkParams NetworkParams::zeros(Eigen::Index w, Eigen::Index d) {
    if (w < 1 || d < 1) throw DimensionError("network width and input dimension must be >= 1");
    return {VectorXd::Zero(w), MatrixXd::Zero(w, d)};
}

bool operator==(const NetworkParams& a, const NetworkParams& b) {
    return a.gamma_.size() == b.gamma_.size() && a.theta_.rows() == b.theta_.rows() &&
           a.theta_.cols() == b.theta_.cols() && a.gamma_ == b.gamma_ &&
           a.theta_ == b.theta_;
}

ScalingVector::ScalingVector(VectorXd alpha) : alpha_(std::move(alpha)) {
    if (alpha_.size() < 1) throw InvalidScalingError("scaling vector is empty");
    for (Eigen::Index j = 0; j < alpha_.size(); ++j) {
        if (alpha_[j] == 0.0 || !std::isfinite(alpha_[j])) {
            throw InvalidScalingError("scaling entry " + std::to_string(j) +
                                      " must be finite and nonzero");
        }
    }
}

ScalingVector ScalingVector::uniform(Eigen::Index w, double c) {
    if (c == 0.0) throw InvalidScalingError("uniform scale c must be nonzero");
    return ScalingVector(VectorXd::Constant(w, 1.0 / c));
}

ScalingVector ScalingVector::inverse() const {
    return ScalingVector(alpha_.cwiseInverse());
}

ExtendedParams::ExtendedParams(NetworkParams base, MatrixXd basis)
    : base_(std::move(base)), basis_(std::move(basis)) {
    if (basis_.rows() != base_.width() || basis_.cols() != base_.width() - 1) {
        throw DimensionError("extension basis must be w x (w-1)");
    }
}

MatrixXd ExtendedParams::extended_theta() const {
    MatrixXd out(base_.width(), base_.input_dim() + basis_.cols());
    out.leftCols(base_.input_dim()) = base_.theta();
    out.rightCols(basis_.cols()) = basis_;
    return out;
}

double ExtendedParams::forward(const VectorXd& x, const VectorXd& x_tilde) const {
    require_input_dim(base_, x);
    if (x_tilde.size() != basis_.cols()) {
        throw DimensionError("augmented input must have length w-1");
    }
    return base_.gamma().dot(base_.theta() * x + basis_ * x_tilde);
}

VectorXd flatten_rows(const MatrixXd& m) {
    VectorXd out(m.size());
    Eigen::Index idx = 0;
    for (Eigen::Index j = 0; j < m.rows(); ++j)
        for (Eigen::Index k = 0; k < m.cols(); ++k) out[idx++] = m(j, k);
    return out;
}

MatrixXd unflatten_rows(const VectorXd& v, Eigen::Index rows, Eigen::Index cols) {
    if (v.size() != rows * cols) throw DimensionError("flattened size mismatch");
    MatrixXd out(rows, cols);
    Eigen::Index idx = 0;
    for (Eigen::Index j = 0; j < rows; ++j)
        for (Eigen::Index k = 0; k < cols; ++k) out(j, k) = v[idx++];
    return out;
}

VectorXd vec_params(const NetworkParams& p) {
    VectorXd beta(p.num_params());
    beta << p.gamma(), flatten_rows(p.theta());
    return beta;
}

NetworkParams unvec_params(const VectorXd& beta, Eigen::Index w, Eigen::Index d) {
    if (w < 1 || d < 1) throw DimensionError("w and d must be at least 1");
    if (beta.size() != w + w * d) {
        throw DimensionError("parameter vector has length " + std::to_string(beta.size()) +
                             ", expected " + std::to_string(w + w * d));
    }
    return {beta.head(w), unflatten_rows(beta.tail(w * d), w, d)};
}

double forward_linear(const NetworkParams& p, const VectorXd& x) {
    require_input_dim(p, x);
    return p.gamma().dot(p.theta() * x);
}

double forward_relu(const NetworkParams& p, const VectorXd& x) {
    require_input_dim(p, x);
    return p.gamma().dot((p.theta() * x).cwiseMax(0.0));
}

double forward(const NetworkParams& p, const VectorXd& x, Activation act) {
    return act == Activation::linear ? forward_linear(p, x) : forward_relu(p, x);
}

VectorXd predict(const NetworkParams& p, const MatrixXd& X, Activation act) {
    if (X.cols() != p.input_dim()) {
        throw DimensionError("design has " + std::to_string(X.cols()) +
                             " columns, network expects " + std::to_string(p.input_dim()));
    }
    if (act == Activation::linear) return X * p.end_to_end();
    const MatrixXd hidden = (X * p.theta().transpose()).cwiseMax(0.0);
    return hidden * p.gamma();
}

NetworkParams rescale(const NetworkParams& p, const ScalingVector& s) {
    const VectorXd& alpha = s.alpha();
    if (alpha.size() != p.width()) throw DimensionError("scaling vector length must equal w");
    VectorXd gamma = p.gamma().cwiseProduct(alpha);
    MatrixXd theta = alpha.cwiseInverse().asDiagonal() * p.theta();
    return {std::move(gamma), std::move(theta)};
}

ExtendedParams extend(const NetworkParams& p) {
    const double norm = p.gamma().norm();
    if (norm == 0.0) {
        throw DegenerateParameterError("cannot extend a network with gamma = 0");
    }
    const Eigen::Index w = p.width();
    // The Householder reflector mapping gamma onto e_1 is orthogonal and
    // symmetric; its last w-1 columns span the complement of gamma.
    Eigen::HouseholderQR<MatrixXd> qr(MatrixXd(p.gamma() / norm));
    const MatrixXd q = qr.householderQ() * MatrixXd::Identity(w, w);
    return {p, q.rightCols(w - 1)};
}

void to_json(nlohmann::json& j, const NetworkParams& p) {
    nlohmann::json theta = nlohmann::json::array();
    for (Eigen::Index r = 0; r < p.theta().rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < p.theta().cols(); ++c) row.push_back(p.theta()(r, c));
        theta.push_back(std::move(row));
    }
    j = nlohmann::json{{"gamma", std::vector<double>(p.gamma().begin(), p.gamma().end())},
                       {"theta", std::move(theta)}};
}

NetworkParams params_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("gamma") || !j.contains("theta")) {
        throw DimensionError("network JSON needs 'gamma' and 'theta'");
    }
    const auto gamma = j.at("gamma").get<std::vector<double>>();
    const auto& rows = j.at("theta");
    if (!rows.is_array() || rows.size() != gamma.size()) {
        throw DimensionError("'theta' must have one row per gamma entry");
    }
    const auto d = rows.empty() ? std::size_t{0} : rows.front().size();
    MatrixXd theta(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto row = rows[r].get<std::vector<double>>();
        if (row.size() != d) throw DimensionError("'theta' rows must have equal length");
        for (std::size_t c = 0; c < d; ++c)
            theta(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c];
    }
    return {Eigen::Map<const VectorXd>(gamma.data(), static_cast<Eigen::Index>(gamma.size())),
            std::move(theta)};
}

} // namespace statnet
