#include "statnet/risk_calculus.hpp"

#include <sstream>
#include <string>

#include "statnet/error.hpp"
#include "statnet/text_io.hpp"

namespace statnet {

namespace {

void require_compatible(const NetworkParams& p, const Dataset& ds) {
    if (p.input_dim() != ds.input_dim()) {
        throw DimensionError("network input dimension " + std::to_string(p.input_dim()) +
                             " does not match dataset dimension " +
                             std::to_string(ds.input_dim()));
    }
}

void require_same_shape(const NetworkParams& p, const NetworkParams& target) {
    if (p.input_dim() != target.input_dim()) {
        throw DimensionError("network and target have different input dimensions");
    }
}

void require_bias(const std::optional<VectorXd>& bias, Eigen::Index d) {
    if (bias && bias->size() != d) throw DimensionError("bias vector must have length d");
}

VectorXd residuals(const NetworkParams& p, const Dataset& ds) {
    require_compatible(p, ds);
    return ds.y() - predict(p, ds.X(), ds.activation());
}

} // namespace

Dataset::Dataset(MatrixXd X, VectorXd y, double sigma, Activation activation,
                 std::optional<std::uint64_t> seed)
    : X_(std::move(X)), y_(std::move(y)), sigma_(sigma), activation_(activation),
      seed_(seed) {
    if (X_.rows() < 1) throw DimensionError("dataset needs at least one sample");
    if (X_.rows() != y_.size()) {
        throw DimensionError("X has " + std::to_string(X_.rows()) + " rows but y has " +
                             std::to_string(y_.size()) + " entries");
    }
    if (X_.cols() < 1) throw DimensionError("dataset needs at least one input column");
    if (!(sigma_ >= 0.0)) throw DimensionError("noise level sigma must be nonnegative");
}

VectorXd ParamGradient::flat() const {
    VectorXd out(gamma.size() + theta.size());
    out << gamma, flatten_rows(theta);
    return out;
}

MatrixXd HessianBlocks::assembled() const {
    const auto w = block_gammagamma.rows();
    const auto wd = block_thetatheta.rows();
    MatrixXd h(w + wd, w + wd);
    h.topLeftCorner(w, w) = block_gammagamma;
    h.topRightCorner(w, wd) = block_cross.transpose();
    h.bottomLeftCorner(wd, w) = block_cross;
    h.bottomRightCorner(wd, wd) = block_thetatheta;
    return h;
}

MatrixXd HessianBlocks::assembled_theta_first() const {
    const auto w = block_gammagamma.rows();
    const auto wd = block_thetatheta.rows();
    MatrixXd h(w + wd, w + wd);
    h.topLeftCorner(wd, wd) = block_thetatheta;
    h.topRightCorner(wd, w) = block_cross;
    h.bottomLeftCorner(w, wd) = block_cross.transpose();
    h.bottomRightCorner(w, w) = block_gammagamma;
    return h;
}

double empirical_risk(const NetworkParams& p, const Dataset& ds) {
    return residuals(p, ds).squaredNorm() / static_cast<double>(ds.size());
}

double objective(const NetworkParams& p, const Dataset& ds, double r) {
    if (!(r >= 0.0)) throw InvalidTuningError("tuning parameter r must be nonnegative");
    return empirical_risk(p, ds) + r * p.l1();
}

ParamGradient empirical_gradient(const NetworkParams& p, const Dataset& ds) {
    if (ds.activation() != Activation::linear) {
        throw UnsupportedActivationError(
            "empirical_gradient is defined for linear networks; use subgradient_relu");
    }
    const VectorXd res = residuals(p, ds);
    const double scale = -2.0 / static_cast<double>(ds.size());
    const VectorXd xr = ds.X().transpose() * res; // sum_i r_i x_i
    return {scale * (p.theta() * xr), scale * (p.gamma() * xr.transpose())};
}

ParamGradient subgradient_relu(const NetworkParams& p, const Dataset& ds) {
    require_compatible(p, ds);
    const MatrixXd pre = ds.X() * p.theta().transpose(); // n x w
    const MatrixXd act = pre.cwiseMax(0.0);
    const VectorXd res = ds.y() - act * p.gamma();
    const double scale = -2.0 / static_cast<double>(ds.size());
    MatrixXd gated(pre.rows(), pre.cols());
    for (Eigen::Index j = 0; j < pre.cols(); ++j)
        for (Eigen::Index i = 0; i < pre.rows(); ++i)
            gated(i, j) = pre(i, j) > 0.0 ? res[i] : 0.0;
    return {scale * (act.transpose() * res),
            scale * (p.gamma().asDiagonal() * (gated.transpose() * ds.X()))};
}

ParamGradient loss_gradient(const NetworkParams& p, const Dataset& ds) {
    return ds.activation() == Activation::linear ? empirical_gradient(p, ds)
                                                 : subgradient_relu(p, ds);
}

double population_risk(const NetworkParams& p, const NetworkParams& target, double sigma) {
    require_same_shape(p, target);
    return (p.end_to_end() - target.end_to_end()).squaredNorm() + sigma * sigma;
}

ParamGradient population_gradient(const NetworkParams& p, const NetworkParams& target) {
    require_same_shape(p, target);
    const VectorXd m = p.end_to_end() - target.end_to_end();
    return {2.0 * (p.theta() * m), 2.0 * (p.gamma() * m.transpose())};
}

HessianBlocks population_hessian(const NetworkParams& p, const NetworkParams& target,
                                 const std::optional<VectorXd>& bias) {
    require_same_shape(p, target);
    const auto w = p.width();
    const auto d = p.input_dim();
    require_bias(bias, d);
    VectorXd shift = p.end_to_end() - target.end_to_end();
    if (bias) shift -= *bias;
    const VectorXd& gamma = p.gamma();
    const MatrixXd& theta = p.theta();

    HessianBlocks h;
    h.block_gammagamma = 2.0 * theta * theta.transpose();
    h.block_thetatheta = MatrixXd::Zero(w * d, w * d);
    h.block_cross = MatrixXd::Zero(w * d, w);
    for (Eigen::Index jp = 0; jp < w; ++jp) {
        for (Eigen::Index kp = 0; kp < d; ++kp) {
            const auto row = jp * d + kp;
            for (Eigen::Index j = 0; j < w; ++j) {
                h.block_thetatheta(row, j * d + kp) = 2.0 * gamma[jp] * gamma[j];
                double cross = 2.0 * gamma[jp] * theta(j, kp);
                if (j == jp) cross += 2.0 * shift[kp];
                h.block_cross(row, j) = cross;
            }
        }
    }
    return h;
}

double hessian_quadratic_closed(const NetworkParams& p, const NetworkParams& target,
                                const VectorXd& a_theta, const VectorXd& a_gamma,
                                const std::optional<VectorXd>& bias) {
    require_same_shape(p, target);
    const auto w = p.width();
    const auto d = p.input_dim();
    if (a_theta.size() != w * d || a_gamma.size() != w) {
        throw DimensionError("probe direction must have w*d theta and w gamma coordinates");
    }
    require_bias(bias, d);
    VectorXd shift = p.end_to_end() - target.end_to_end();
    if (bias) shift -= *bias;
    const MatrixXd a_theta_mat = unflatten_rows(a_theta, w, d);
    // Column k of a_theta_mat is the sub-vector a_theta^k.
    const VectorXd outer_part = p.theta().transpose() * a_gamma;
    const VectorXd inner_part = a_theta_mat.transpose() * p.gamma();
    const VectorXd coupling = a_theta_mat.transpose() * a_gamma;
    return 2.0 * (outer_part + inner_part).squaredNorm() + 4.0 * shift.dot(coupling);
}

RiskReport risk_report(const NetworkParams& p, const Dataset& ds, const NetworkParams& target,
                       double r) {
    RiskReport out;
    out.empirical_risk = empirical_risk(p, ds);
    out.population_risk = population_risk(p, target, ds.sigma());
    out.objective = objective(p, ds, r);
    out.l1_beta = p.l1();
    return out;
}

void to_json(nlohmann::json& j, const RiskReport& report) {
    j = nlohmann::json{{"empirical_risk", report.empirical_risk},
                       {"population_risk", report.population_risk},
                       {"objective", report.objective},
                       {"l1_beta", report.l1_beta}};
}

void to_json(nlohmann::json& j, const Dataset& ds) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < ds.size(); ++i) {
        std::vector<double> row(static_cast<std::size_t>(ds.input_dim()));
        for (Eigen::Index k = 0; k < ds.input_dim(); ++k) row[static_cast<std::size_t>(k)] = ds.X()(i, k);
        rows.push_back(std::move(row));
    }
    j = nlohmann::json{{"X", std::move(rows)},
                       {"y", std::vector<double>(ds.y().begin(), ds.y().end())},
                       {"sigma", ds.sigma()},
                       {"activation", std::string(to_string(ds.activation()))}};
    if (ds.seed()) j["seed"] = *ds.seed();
}

Dataset dataset_from_json(const nlohmann::json& j) {
    const auto& rows = j.at("X");
    const auto y = j.at("y").get<std::vector<double>>();
    if (!rows.is_array() || rows.empty()) throw DimensionError("dataset JSON needs a nonempty 'X'");
    const auto d = rows.front().size();
    MatrixXd X(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto row = rows[i].get<std::vector<double>>();
        if (row.size() != d) throw DimensionError("dataset rows must have equal length");
        for (std::size_t k = 0; k < d; ++k)
            X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = row[k];
    }
    std::optional<std::uint64_t> seed;
    if (j.contains("seed")) seed = j.at("seed").get<std::uint64_t>();
    return {std::move(X),
            Eigen::Map<const VectorXd>(y.data(), static_cast<Eigen::Index>(y.size())),
            j.value("sigma", 0.0), parse_activation(j.value("activation", std::string("linear"))),
            seed};
}

void write_dataset_csv(const Dataset& ds, const std::filesystem::path& path) {
    std::string out;
    for (Eigen::Index k = 0; k < ds.input_dim(); ++k) out += "x_" + std::to_string(k + 1) + ",";
    out += "y\n";
    for (Eigen::Index i = 0; i < ds.size(); ++i) {
        for (Eigen::Index k = 0; k < ds.input_dim(); ++k) {
            out += format_real(ds.X()(i, k));
            out += ',';
        }
        out += format_real(ds.y()[i]);
        out += '\n';
    }
    write_text_file(path, out);
}

Dataset read_dataset_csv(const std::filesystem::path& path, double sigma, Activation activation) {
    std::istringstream in(read_text_file(path));
    std::string line;
    if (!std::getline(in, line)) throw DimensionError("empty dataset CSV " + path.string());
    const auto header = split_csv_line(line);
    if (header.size() < 2) throw DimensionError("dataset CSV needs x columns and y");
    const auto d = static_cast<Eigen::Index>(header.size() - 1);
    std::vector<double> values;
    Eigen::Index n = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        const auto cells = split_csv_line(line);
        if (static_cast<Eigen::Index>(cells.size()) != d + 1) {
            throw DimensionError("row " + std::to_string(n + 2) + " of " + path.string() +
                                 " has the wrong number of columns");
        }
        for (const auto cell : cells) values.push_back(parse_real(cell));
        ++n;
    }
    MatrixXd X(n, d);
    VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index k = 0; k < d; ++k) X(i, k) = values[static_cast<std::size_t>(i * (d + 1) + k)];
        y[i] = values[static_cast<std::size_t>(i * (d + 1) + d)];
    }
    return {std::move(X), std::move(y), sigma, activation};
}

} // namespace statnet
