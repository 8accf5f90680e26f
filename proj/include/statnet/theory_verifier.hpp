#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "statnet/risk_calculus.hpp"

namespace statnet {

/// lhs <= rhs comparison for a risk bound.
struct BoundCheck {
    double lhs = 0.0;
    double rhs = 0.0;
    bool holds = false;
    double slack = 0.0;
    /// False when the evaluated point violates the sqrt(log n) l1 budget,
    /// in which case the bound is not guaranteed to apply.
    bool reasonable = true;
    std::optional<double> tau;
};

struct SegmentSingularities {
    /// Sorted, inside (0, 1), at most w' entries.
    std::vector<double> singular_points;
};

/// Hessian quadratic forms at or above this value count as nonnegative.
inline constexpr double kQuadraticFormTolerance = -1e-10;
/// sigma_min(A + tC) below this multiple of sigma_max(A) counts as singular.
inline constexpr double kSingularRelativeTolerance = 1e-8;

/// risk(stationary) <= risk(target) + 5 r sqrt(log n).
BoundCheck check_theorem1(const NetworkParams& target, const NetworkParams& stationary,
                          double r, std::size_t n, double sigma);

/// risk(candidate) <= risk(target) + 8 r sqrt(log n) + tau, with tau the
/// objective gap between candidate and reference on ds.
BoundCheck check_theorem2(const NetworkParams& target, const NetworkParams& candidate,
                          const NetworkParams& reference_stationary, const Dataset& ds,
                          double r, std::size_t n, double sigma);

/// Smallest uniform scale c >= 1 for which rescaling by alpha = (1/c, ..., 1/c)
/// makes the population Hessian quadratic form along (a_theta, a_gamma)
/// nonnegative:
///   c^2 >= (2 ||gamma||^2 ||a_theta||^2 + 4 ||a_theta|| ||a_gamma|| ||m||)
///          / (e_min[Theta Theta^T] ||a_gamma||^2),
/// m = Theta^T gamma - Theta*^T gamma*. Returns 1 when either part of the
/// direction is zero; throws SingularityError if Theta Theta^T is singular.
double prop1_min_c(const NetworkParams& p, const NetworkParams& target,
                   const VectorXd& a_theta, const VectorXd& a_gamma);

/// Evaluates the quadratic form at the uniformly rescaled parameters and
/// reports whether it is >= kQuadraticFormTolerance. Throws
/// PreconditionError if c is below prop1_min_c.
bool check_prop1(const NetworkParams& p, const NetworkParams& target, const VectorXd& a_theta,
                 const VectorXd& a_gamma, double c);

/// Same for an arbitrary scaling vector. Non-uniform scalings are only
/// accepted for directions with a zero part.
bool check_prop1(const NetworkParams& p, const NetworkParams& target, const VectorXd& a_theta,
                 const VectorXd& a_gamma, const ScalingVector& alpha);

/// Quadratic form value used by check_prop1, exposed for reporting.
double prop1_quadratic_form(const NetworkParams& p, const NetworkParams& target,
                            const VectorXd& a_theta, const VectorXd& a_gamma,
                            const ScalingVector& alpha);

/// Values t in (0, 1) where (A + tC)(A + tC)^T is singular, for A of full
/// row rank with rows <= cols.
SegmentSingularities segment_singularities(const MatrixXd& A, const MatrixXd& C);

/// |(grad f_hat - grad f)^T (vec(target) - vec(p))| at p.
double empirical_process_gap(const NetworkParams& p, const NetworkParams& target,
                             const Dataset& ds);

/// |empirical_risk(p) - population_risk(p)|.
double risk_uniform_gap(const NetworkParams& p, const Dataset& ds, const NetworkParams& target,
                        double sigma);

void to_json(nlohmann::json& j, const BoundCheck& check);

/// trial_id,lhs,rhs,holds,slack
std::string bound_csv_header();
std::string bound_csv_row(std::size_t trial_id, const BoundCheck& check);

} // namespace statnet
