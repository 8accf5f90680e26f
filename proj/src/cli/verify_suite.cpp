#include "statnet/verify_suite.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "statnet/core_model.hpp"
#include "statnet/error.hpp"
#include "statnet/parallel.hpp"
#include "statnet/risk_calculus.hpp"
#include "statnet/rng.hpp"
#include "statnet/theory_verifier.hpp"

namespace statnet {

namespace {

using Eigen::Index;

constexpr double kGradientTolerance = 1e-6;
constexpr double kPopulationGradientTolerance = 1e-8;
constexpr double kHessianTolerance = 1e-6;
constexpr double kQuadraticTolerance = 1e-10;
constexpr double kInvarianceTolerance = 1e-12;
constexpr double kSegmentMatchTolerance = 1e-3;

Rng suite_rng(std::uint64_t seed, std::uint64_t suite) {
    return Rng(derive_seed(seed, StreamRole::verify) + 0x9E3779B97F4A7C15ULL * (suite + 1));
}

Index draw_between(Rng& rng, Index lo, Index hi) {
    return lo + static_cast<Index>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
}

VectorXd normal_vector(Rng& rng, Index n, double scale = 1.0) {
    VectorXd v(n);
    for (Index i = 0; i < n; ++i) v(i) = scale * rng.normal();
    return v;
}

MatrixXd normal_matrix(Rng& rng, Index rows, Index cols, double scale = 1.0) {
    MatrixXd m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        for (Index j = 0; j < cols; ++j) m(i, j) = scale * rng.normal();
    }
    return m;
}

NetworkParams normal_params(Rng& rng, Index w, Index d, double scale = 1.0) {
    VectorXd gamma = normal_vector(rng, w, scale);
    MatrixXd theta = normal_matrix(rng, w, d, scale);
    return {std::move(gamma), std::move(theta)};
}

// The risks are degree-4 polynomials in beta, so one Richardson step on
// central differences cancels the truncation error exactly.
VectorXd fd_gradient(const std::function<double(const VectorXd&)>& f, const VectorXd& x,
                     double h = 1e-2) {
    VectorXd g(x.size());
    for (Index i = 0; i < x.size(); ++i) {
        auto central = [&](double step) {
            VectorXd plus = x;
            VectorXd minus = x;
            plus(i) += step;
            minus(i) -= step;
            return (f(plus) - f(minus)) / (2.0 * step);
        };
        g(i) = (4.0 * central(h / 2) - central(h)) / 3.0;
    }
    return g;
}

MatrixXd fd_hessian(const std::function<double(const VectorXd&)>& f, const VectorXd& x,
                    double h = 1e-2) {
    const Index p = x.size();
    MatrixXd H(p, p);
    for (Index i = 0; i < p; ++i) {
        for (Index j = i; j < p; ++j) {
            auto mixed = [&](double step) {
                auto at = [&](double si, double sj) {
                    VectorXd y = x;
                    y(i) += si;
                    y(j) += sj;
                    return f(y);
                };
                return (at(step, step) - at(step, -step) - at(-step, step) + at(-step, -step)) /
                       (4.0 * step * step);
            };
            H(i, j) = H(j, i) = (4.0 * mixed(h / 2) - mixed(h)) / 3.0;
        }
    }
    return H;
}

double relative_error(const MatrixXd& got, const MatrixXd& want) {
    const double scale = want.cwiseAbs().maxCoeff();
    const double diff = (got - want).cwiseAbs().maxCoeff();
    return scale > 0.0 ? diff / scale : diff;
}

SuiteResult gradient_suite(const VerifyConfig& cfg) {
    SuiteResult out{"empirical_gradient", cfg.gradient_instances};
    out.tolerance = kGradientTolerance;
    Rng rng = suite_rng(cfg.seed, 0);
    for (int i = 0; i < cfg.gradient_instances; ++i) {
        const Index w = draw_between(rng, 1, 6);
        const Index d = draw_between(rng, 1, 6);
        const Index n = draw_between(rng, 2, 50);
        const NetworkParams p = normal_params(rng, w, d);
        const Dataset ds(normal_matrix(rng, n, d), normal_vector(rng, n));
        const VectorXd fd = fd_gradient(
            [&](const VectorXd& b) { return empirical_risk(unvec_params(b, w, d), ds); },
            vec_params(p));
        const double err = relative_error(empirical_gradient(p, ds).flat(), fd);
        out.worst = std::max(out.worst, err);
        if (!(err < kGradientTolerance)) ++out.failures;
    }
    return out;
}

SuiteResult population_suite(const VerifyConfig& cfg) {
    SuiteResult out{"population_calculus", cfg.hessian_instances};
    out.tolerance = kHessianTolerance;
    Rng rng = suite_rng(cfg.seed, 1);
    double worst_gradient = 0.0;
    double worst_hessian = 0.0;
    double worst_quadratic = 0.0;
    for (int i = 0; i < cfg.hessian_instances; ++i) {
        const Index w = draw_between(rng, 1, 5);
        const Index d = draw_between(rng, 1, 5);
        const NetworkParams p = normal_params(rng, w, d);
        const NetworkParams target = normal_params(rng, w, d);
        const double sigma = rng.uniform();
        auto risk = [&](const VectorXd& b) {
            return population_risk(unvec_params(b, w, d), target, sigma);
        };
        const VectorXd beta = vec_params(p);
        const double g_err = relative_error(population_gradient(p, target).flat(),
                                            fd_gradient(risk, beta));
        const MatrixXd H = population_hessian(p, target).assembled();
        const double h_err = relative_error(H, fd_hessian(risk, beta));

        const VectorXd a_gamma = normal_vector(rng, w);
        const VectorXd a_theta = normal_vector(rng, w * d);
        VectorXd a(w + w * d);
        a << a_gamma, a_theta;
        const double block = a.dot(H * a);
        const double closed = hessian_quadratic_closed(p, target, a_theta, a_gamma);
        const double q_err = std::abs(block - closed) / std::max(1.0, std::abs(block));

        worst_gradient = std::max(worst_gradient, g_err);
        worst_hessian = std::max(worst_hessian, h_err);
        worst_quadratic = std::max(worst_quadratic, q_err);
        if (!(g_err < kPopulationGradientTolerance) || !(h_err < kHessianTolerance) ||
            !(q_err <= kQuadraticTolerance)) {
            ++out.failures;
        }
    }
    out.worst = worst_hessian;
    out.details = {{"max_gradient_relative_error", worst_gradient},
                   {"gradient_tolerance", kPopulationGradientTolerance},
                   {"max_hessian_relative_error", worst_hessian},
                   {"hessian_tolerance", kHessianTolerance},
                   {"max_quadratic_form_error", worst_quadratic},
                   {"quadratic_form_tolerance", kQuadraticTolerance}};
    return out;
}

ScalingVector random_scaling(Rng& rng, Index w, bool positive) {
    VectorXd alpha(w);
    for (Index j = 0; j < w; ++j) {
        const double magnitude = std::exp(3.0 * (rng.uniform() - 0.5));
        alpha(j) = (!positive && rng.uniform() < 0.5) ? -magnitude : magnitude;
    }
    return ScalingVector(std::move(alpha));
}

SuiteResult prop1_suite(const VerifyConfig& cfg) {
    SuiteResult out{"rescaled_hessian", cfg.prop1_instances};
    out.tolerance = kQuadraticFormTolerance;
    out.worst = std::numeric_limits<double>::infinity();
    Rng rng = suite_rng(cfg.seed, 2);
    int zero_direction_checks = 0;
    int zero_direction_failures = 0;
    int unscaled_negative = 0;
    double largest_c = 1.0;
    for (int i = 0; i < cfg.prop1_instances; ++i) {
        const Index w = draw_between(rng, 1, 8);
        const Index d = draw_between(rng, w, 8);
        NetworkParams p = normal_params(rng, w, d);
        // Keep Theta Theta^T comfortably invertible.
        while (Eigen::SelfAdjointEigenSolver<MatrixXd>(p.theta() * p.theta().transpose(),
                                                       Eigen::EigenvaluesOnly)
                   .eigenvalues()
                   .minCoeff() < 1e-3) {
            p = normal_params(rng, w, d);
        }
        // Targets far from p make the mixed term large and force c > 1.
        const NetworkParams target = normal_params(rng, w, d, std::exp(4.0 * rng.uniform() - 1.0));
        const VectorXd a_theta = normal_vector(rng, w * d);
        const VectorXd a_gamma = normal_vector(rng, w);

        const double c = prop1_min_c(p, target, a_theta, a_gamma);
        largest_c = std::max(largest_c, c);
        const double form =
            prop1_quadratic_form(p, target, a_theta, a_gamma, ScalingVector::uniform(w, c));
        out.worst = std::min(out.worst, form);
        if (!check_prop1(p, target, a_theta, a_gamma, c)) ++out.failures;
        if (prop1_quadratic_form(p, target, a_theta, a_gamma, ScalingVector::uniform(w, 1.0)) <
            kQuadraticFormTolerance) {
            ++unscaled_negative;
        }

        const VectorXd zero_theta = VectorXd::Zero(w * d);
        const VectorXd zero_gamma = VectorXd::Zero(w);
        for (int k = 0; k < cfg.prop1_alpha_draws; ++k) {
            zero_direction_checks += 2;
            if (!check_prop1(p, target, zero_theta, a_gamma, random_scaling(rng, w, false))) {
                ++zero_direction_failures;
            }
            if (!check_prop1(p, target, a_theta, zero_gamma, random_scaling(rng, w, false))) {
                ++zero_direction_failures;
            }
        }
    }
    out.failures += zero_direction_failures;
    out.details = {{"min_quadratic_form_at_min_c", out.worst},
                   {"largest_min_c", largest_c},
                   {"zero_direction_checks", zero_direction_checks},
                   {"zero_direction_failures", zero_direction_failures},
                   {"negative_without_rescaling", unscaled_negative}};
    return out;
}

double sigma_min(const MatrixXd& m) {
    return Eigen::JacobiSVD<MatrixXd>(m).singularValues().minCoeff();
}

bool interior(double t) {
    return t > kSegmentMatchTolerance && t < 1.0 - kSegmentMatchTolerance;
}

// Every interior point of `from` has a partner in `to` within the match tolerance.
bool covered(const std::vector<double>& from, const std::vector<double>& to) {
    return std::all_of(from.begin(), from.end(), [&](double t) {
        if (!interior(t)) return true;
        return std::any_of(to.begin(), to.end(), [&](double s) {
            return std::abs(s - t) <= kSegmentMatchTolerance;
        });
    });
}

SuiteResult segment_suite(const VerifyConfig& cfg) {
    SuiteResult out{"segment_singularities", cfg.segment_instances + 2};
    out.tolerance = kSegmentMatchTolerance;
    Rng rng = suite_rng(cfg.seed, 3);
    int with_points = 0;

    auto agree = [&](const MatrixXd& A, const MatrixXd& C) {
        const auto got = segment_singularities(A, C).singular_points;
        const auto want = scan_singular_points(A, C, cfg.segment_grid);
        if (!want.empty()) ++with_points;
        return covered(got, want) && covered(want, got);
    };

    const MatrixXd I = MatrixXd::Identity(2, 2);
    const auto diag = segment_singularities(I, Eigen::Vector2d(-2.0, 0.0).asDiagonal().toDenseMatrix())
                          .singular_points;
    if (diag.size() != 1 || std::abs(diag[0] - 0.5) > 1e-12) ++out.failures;
    if (!segment_singularities(I, -I).singular_points.empty()) ++out.failures;

    for (int i = 0; i < cfg.segment_instances; ++i) {
        const Index rows = draw_between(rng, 1, 5);
        const Index cols = draw_between(rng, rows, 8);
        const MatrixXd A = normal_matrix(rng, rows, cols);
        MatrixXd C;
        if (i % 2 == 0) {
            // Route the segment through a rank-deficient matrix at t0.
            const double t0 = 0.05 + 0.9 * rng.uniform();
            const MatrixXd B = normal_matrix(rng, rows, rows - 1) * normal_matrix(rng, rows - 1, cols);
            C = (B - A) / t0;
        } else {
            C = normal_matrix(rng, rows, cols, 2.0);
        }
        if (!agree(A, C)) ++out.failures;
    }
    out.worst = out.failures;
    out.details = {{"instances_with_singular_points", with_points},
                   {"scan_grid", cfg.segment_grid}};
    return out;
}

SuiteResult invariance_suite(const VerifyConfig& cfg) {
    SuiteResult out{"invariances", cfg.invariance_instances};
    out.tolerance = kInvarianceTolerance;
    Rng rng = suite_rng(cfg.seed, 4);
    int roundtrip_failures = 0;
    for (int i = 0; i < cfg.invariance_instances; ++i) {
        const Index w = draw_between(rng, 1, 8);
        const Index d = draw_between(rng, 1, 8);
        const NetworkParams p = normal_params(rng, w, d);
        const NetworkParams linear_scaled = rescale(p, random_scaling(rng, w, false));
        const NetworkParams relu_scaled = rescale(p, random_scaling(rng, w, true));
        const ExtendedParams ext = extend(p);
        double err = 0.0;
        for (int k = 0; k < 5; ++k) {
            const VectorXd x = normal_vector(rng, d);
            const VectorXd x_tilde = normal_vector(rng, w - 1);
            const double lin = forward_linear(p, x);
            const double relu = forward_relu(p, x);
            const double scale = std::max(1.0, std::abs(lin));
            err = std::max(err, std::abs(forward_linear(linear_scaled, x) - lin) / scale);
            err = std::max(err, std::abs(forward_relu(relu_scaled, x) - relu) /
                                    std::max(1.0, std::abs(relu)));
            err = std::max(err, std::abs(ext.forward(x, x_tilde) - lin) / scale);
        }
        out.worst = std::max(out.worst, err);
        const bool roundtrip = unvec_params(vec_params(p), w, d) == p;
        if (!roundtrip) ++roundtrip_failures;
        if (!(err <= kInvarianceTolerance) || !roundtrip) ++out.failures;
    }
    out.details = {{"roundtrip_failures", roundtrip_failures}};
    return out;
}

} // namespace

void VerifyConfig::validate() const {
    for (int count : {gradient_instances, hessian_instances, prop1_instances, prop1_alpha_draws,
                      segment_instances, invariance_instances}) {
        if (count < 1) throw PreconditionError("instance counts must be at least 1");
    }
    if (segment_grid < 10) throw PreconditionError("segment_grid must be at least 10");
}

std::vector<double> scan_singular_points(const MatrixXd& A, const MatrixXd& C, int grid) {
    if (A.rows() != C.rows() || A.cols() != C.cols()) {
        throw DimensionError("A and C must have the same shape");
    }
    const double threshold =
        kSingularRelativeTolerance * Eigen::JacobiSVD<MatrixXd>(A).singularValues().maxCoeff();
    auto at = [&](double t) { return sigma_min(A + t * C); };

    std::vector<double> ts(grid + 1);
    std::vector<double> values(grid + 1);
    for (int i = 0; i <= grid; ++i) {
        ts[i] = static_cast<double>(i) / grid;
        values[i] = at(ts[i]);
    }

    std::vector<double> found;
    for (int i = 0; i <= grid; ++i) {
        const bool left = i == 0 || values[i] <= values[i - 1];
        const bool right = i == grid || values[i] <= values[i + 1];
        if (!left || !right) continue;
        double lo = ts[std::max(i - 1, 0)];
        double hi = ts[std::min(i + 1, grid)];
        const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
        double a = hi - phi * (hi - lo);
        double b = lo + phi * (hi - lo);
        double fa = at(a);
        double fb = at(b);
        for (int k = 0; k < 200 && hi - lo > 1e-15; ++k) {
            if (fa < fb) {
                hi = b;
                b = a;
                fb = fa;
                a = hi - phi * (hi - lo);
                fa = at(a);
            } else {
                lo = a;
                a = b;
                fa = fb;
                b = lo + phi * (hi - lo);
                fb = at(b);
            }
        }
        const double t = 0.5 * (lo + hi);
        if (at(t) < threshold) found.push_back(t);
    }

    if (A.rows() == A.cols()) {
        auto det = [&](double t) { return (A + t * C).determinant(); };
        for (int i = 0; i < grid; ++i) {
            double lo = ts[i];
            double hi = ts[i + 1];
            double f_lo = det(lo);
            if (f_lo == 0.0) {
                found.push_back(lo);
                continue;
            }
            if ((f_lo > 0.0) == (det(hi) > 0.0)) continue;
            for (int k = 0; k < 200 && hi - lo > 1e-15; ++k) {
                const double mid = 0.5 * (lo + hi);
                const double f_mid = det(mid);
                if ((f_mid > 0.0) == (f_lo > 0.0)) {
                    lo = mid;
                    f_lo = f_mid;
                } else {
                    hi = mid;
                }
            }
            found.push_back(0.5 * (lo + hi));
        }
    }

    std::erase_if(found, [](double t) { return !(t > 0.0 && t < 1.0); });
    std::sort(found.begin(), found.end());
    found.erase(std::unique(found.begin(), found.end(),
                            [](double a, double b) { return std::abs(a - b) <= 1e-9; }),
                found.end());
    return found;
}

std::vector<SuiteResult> run_property_suite(const VerifyConfig& cfg, std::size_t threads) {
    cfg.validate();
    const std::vector<std::function<SuiteResult(const VerifyConfig&)>> suites = {
        gradient_suite, population_suite, prop1_suite, segment_suite, invariance_suite};
    std::vector<SuiteResult> results(suites.size());
    parallel_for(suites.size(), threads, [&](std::size_t i) {
        results[i] = suites[i](cfg);
        results[i].passed = results[i].failures == 0;
    });
    return results;
}

void to_json(nlohmann::json& j, const SuiteResult& result) {
    j = nlohmann::json{{"name", result.name},         {"instances", result.instances},
                       {"failures", result.failures}, {"worst", result.worst},
                       {"tolerance", result.tolerance}, {"passed", result.passed},
                       {"details", result.details}};
}

} // namespace statnet
