#include "statnet/theory_verifier.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include "statnet/error.hpp"
#include "statnet/stationarity.hpp"
#include "statnet/text_io.hpp"

namespace statnet {

namespace {

BoundCheck make_check(double lhs, double rhs) {
    BoundCheck out;
    out.lhs = lhs;
    out.rhs = rhs;
    out.slack = rhs - lhs;
    out.holds = lhs <= rhs;
    return out;
}

double sqrt_log(std::size_t n) {
    if (n < 2) throw InvalidSizeError("sample size must be at least 2");
    return std::sqrt(std::log(static_cast<double>(n)));
}

void require_probe(const NetworkParams& p, const VectorXd& a_theta, const VectorXd& a_gamma) {
    if (a_theta.size() != p.width() * p.input_dim() || a_gamma.size() != p.width()) {
        throw DimensionError("probe direction must have w*d theta and w gamma coordinates");
    }
}

bool degenerate_direction(const VectorXd& a_theta, const VectorXd& a_gamma) {
    return a_theta.isZero(0.0) || a_gamma.isZero(0.0);
}

double smallest_singular_value(const MatrixXd& m) {
    return Eigen::JacobiSVD<MatrixXd>(m).singularValues().minCoeff();
}

} // namespace

BoundCheck check_theorem1(const NetworkParams& target, const NetworkParams& stationary,
                          double r, std::size_t n, double sigma) {
    const double budget = sqrt_log(n);
    if (!(r >= 0.0)) throw InvalidTuningError("tuning parameter r must be nonnegative");
    BoundCheck out = make_check(population_risk(stationary, target, sigma),
                                population_risk(target, target, sigma) + 5.0 * r * budget);
    out.reasonable = is_reasonable(stationary, n);
    return out;
}

BoundCheck check_theorem2(const NetworkParams& target, const NetworkParams& candidate,
                          const NetworkParams& reference_stationary, const Dataset& ds,
                          double r, std::size_t n, double sigma) {
    const double budget = sqrt_log(n);
    const double tau = tau_gap(candidate, reference_stationary, ds, r);
    BoundCheck out = make_check(population_risk(candidate, target, sigma),
                                population_risk(target, target, sigma) + 8.0 * r * budget + tau);
    out.reasonable = is_reasonable(candidate, n);
    out.tau = tau;
    return out;
}

double prop1_min_c(const NetworkParams& p, const NetworkParams& target, const VectorXd& a_theta,
                   const VectorXd& a_gamma) {
    require_probe(p, a_theta, a_gamma);
    if (p.input_dim() != target.input_dim()) throw DimensionError("target dimension mismatch");
    if (degenerate_direction(a_theta, a_gamma)) return 1.0;

    const MatrixXd gram = p.theta() * p.theta().transpose();
    const VectorXd eig =
        Eigen::SelfAdjointEigenSolver<MatrixXd>(gram, Eigen::EigenvaluesOnly).eigenvalues();
    const double e_min = eig.minCoeff();
    if (!(e_min > 1e-14 * std::max(1.0, eig.maxCoeff()))) {
        throw SingularityError("Theta Theta^T is singular (smallest eigenvalue " +
                               format_real(e_min) + ")");
    }
    const double a1 = a_theta.norm();
    const double a2 = a_gamma.norm();
    const double mismatch = (p.end_to_end() - target.end_to_end()).norm();
    const double numerator =
        2.0 * p.gamma().squaredNorm() * a1 * a1 + 4.0 * a1 * a2 * mismatch;
    const double denominator = e_min * a2 * a2;
    return std::max(1.0, std::sqrt(numerator / denominator));
}

double prop1_quadratic_form(const NetworkParams& p, const NetworkParams& target,
                            const VectorXd& a_theta, const VectorXd& a_gamma,
                            const ScalingVector& alpha) {
    return hessian_quadratic_closed(rescale(p, alpha), target, a_theta, a_gamma);
}

bool check_prop1(const NetworkParams& p, const NetworkParams& target, const VectorXd& a_theta,
                 const VectorXd& a_gamma, double c) {
    const double required = prop1_min_c(p, target, a_theta, a_gamma);
    if (!(c >= required)) {
        throw PreconditionError("scale c = " + format_real(c) + " is below the required " +
                                format_real(required));
    }
    return prop1_quadratic_form(p, target, a_theta, a_gamma,
                                ScalingVector::uniform(p.width(), c)) >=
           kQuadraticFormTolerance;
}

bool check_prop1(const NetworkParams& p, const NetworkParams& target, const VectorXd& a_theta,
                 const VectorXd& a_gamma, const ScalingVector& alpha) {
    require_probe(p, a_theta, a_gamma);
    if (alpha.alpha().size() != p.width()) throw DimensionError("scaling vector length must be w");
    if (!degenerate_direction(a_theta, a_gamma)) {
        const VectorXd& a = alpha.alpha();
        if (!(a.array() == a[0]).all() || !(a[0] > 0.0)) {
            throw PreconditionError(
                "directions with both parts nonzero need a uniform positive scaling");
        }
        return check_prop1(p, target, a_theta, a_gamma, 1.0 / a[0]);
    }
    return prop1_quadratic_form(p, target, a_theta, a_gamma, alpha) >= kQuadraticFormTolerance;
}

SegmentSingularities segment_singularities(const MatrixXd& A, const MatrixXd& C) {
    if (A.rows() != C.rows() || A.cols() != C.cols()) {
        throw DimensionError("A and C must have the same shape");
    }
    if (A.rows() < 1 || A.rows() > A.cols()) {
        throw PreconditionError("segment analysis needs 1 <= rows <= cols");
    }
    // A^T = U D V^T (thin). det(U^T (A + tC)^T V) = t^w det(D) p_Z(-1/t) with
    // Z = D^{-1} U^T C^T V, so singular t are negative reciprocals of the
    // real nonzero eigenvalues of Z.
    Eigen::JacobiSVD<MatrixXd> svd(A.transpose(), Eigen::ComputeThinU | Eigen::ComputeThinV);
    const VectorXd& D = svd.singularValues();
    const double sigma_max = D.maxCoeff();
    if (!(D.minCoeff() > 1e-12 * sigma_max * static_cast<double>(A.cols()))) {
        throw PreconditionError("A must have full row rank");
    }
    const MatrixXd Z =
        D.cwiseInverse().asDiagonal() * (svd.matrixU().transpose() * C.transpose() * svd.matrixV());
    const Eigen::VectorXcd eig = Eigen::EigenSolver<MatrixXd>(Z, false).eigenvalues();

    SegmentSingularities out;
    for (const std::complex<double>& lambda : eig) {
        if (std::abs(lambda.imag()) > 1e-10 * std::abs(lambda)) continue;
        if (lambda.real() == 0.0) continue;
        const double t = -1.0 / lambda.real();
        if (!(t > 0.0 && t < 1.0)) continue;
        // For rows < cols the reduction only sees the part of (A + tC)^T in
        // the column space of U, so each root is confirmed on the full matrix.
        if (smallest_singular_value(A + t * C) >= kSingularRelativeTolerance * sigma_max) continue;
        out.singular_points.push_back(t);
    }
    std::sort(out.singular_points.begin(), out.singular_points.end());
    out.singular_points.erase(
        std::unique(out.singular_points.begin(), out.singular_points.end(),
                    [](double a, double b) { return std::abs(a - b) <= 1e-12; }),
        out.singular_points.end());
    return out;
}

double empirical_process_gap(const NetworkParams& p, const NetworkParams& target,
                             const Dataset& ds) {
    const VectorXd diff = empirical_gradient(p, ds).flat() - population_gradient(p, target).flat();
    if (target.width() != p.width()) throw DimensionError("target width mismatch");
    return std::abs(diff.dot(vec_params(target) - vec_params(p)));
}

double risk_uniform_gap(const NetworkParams& p, const Dataset& ds, const NetworkParams& target,
                        double sigma) {
    return std::abs(empirical_risk(p, ds) - population_risk(p, target, sigma));
}

void to_json(nlohmann::json& j, const BoundCheck& check) {
    j = nlohmann::json{{"lhs", check.lhs},           {"rhs", check.rhs},
                       {"holds", check.holds},       {"slack", check.slack},
                       {"reasonable", check.reasonable}};
    if (check.tau) j["tau"] = *check.tau;
}

std::string bound_csv_header() { return "trial_id,lhs,rhs,holds,slack\n"; }

std::string bound_csv_row(std::size_t trial_id, const BoundCheck& check) {
    return std::to_string(trial_id) + "," + format_real(check.lhs) + "," +
           format_real(check.rhs) + "," + (check.holds ? "true" : "false") + "," +
           format_real(check.slack) + "\n";
}

} // namespace statnet
