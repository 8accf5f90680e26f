#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

namespace statnet {

/// Instance counts for the randomized property suite run by `statnet verify`.
struct VerifyConfig {
    std::uint64_t seed = 0;
    int gradient_instances = 50;
    int hessian_instances = 100;
    int prop1_instances = 500;
    int prop1_alpha_draws = 20;
    int segment_instances = 100;
    int segment_grid = 10000;
    int invariance_instances = 200;

    void validate() const;
};

struct SuiteResult {
    std::string name;
    int instances = 0;
    int failures = 0;
    /// Largest observed error (or smallest margin) and the limit it is held to.
    double worst = 0.0;
    double tolerance = 0.0;
    bool passed = false;
    nlohmann::json details = nlohmann::json::object();
};

/// Gradient, Hessian, rescaled Hessian, segment singularity and
/// invariance checks on random instances. Suites are independent and may run
/// on `threads` workers; results come back in a fixed order.
std::vector<SuiteResult> run_property_suite(const VerifyConfig& cfg, std::size_t threads);

/// Singular points of (A + tC)(A + tC)^T in (0, 1) located by scanning
/// sigma_min(A + tC) on `grid` points (plus determinant sign changes when A is
/// square) and refining each local minimum by golden-section search.
std::vector<double> scan_singular_points(const Eigen::MatrixXd& A, const Eigen::MatrixXd& C,
                                         int grid);

void to_json(nlohmann::json& j, const SuiteResult& result);

} // namespace statnet
