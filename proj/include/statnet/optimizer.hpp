#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "statnet/risk_calculus.hpp"
#include "statnet/stationarity.hpp"

namespace statnet {

/// Step rule for ReLU training. `backtracking` is proximal (sub)gradient with
/// the sufficient-decrease line search used for the linear model;
/// `diminishing` is the proximal subgradient method with step c / sqrt(t).
enum class ReluSchedule { backtracking, diminishing };

struct TrainConfig {
    int max_iters = 20000;
    /// nullopt selects the automatic, periodically refreshed step.
    std::optional<double> step_size;
    double kkt_tolerance = kDefaultKktTolerance;
    std::uint64_t seed = 0;
    double init_scale = 0.5;
    /// Monotone FISTA momentum.
    bool accelerated = true;
    ReluSchedule relu_schedule = ReluSchedule::backtracking;
    /// ReLU runs stop once the best objective improved by less than
    /// stagnation_tolerance over the last stagnation_window iterations.
    double stagnation_tolerance = 1e-9;
    int stagnation_window = 100;
    /// Automatic step refresh period (linear model).
    int step_refresh = 50;

    void validate() const;
};

struct TrainResult {
    NetworkParams params;
    std::uint64_t seed = 0;
    /// Objective at the initial point and after every iteration.
    std::vector<double> objective_trace;
    std::vector<double> kkt_trace;
    double final_objective = 0.0;
    double final_kkt_residual = 0.0;
    int iterations_run = 0;
    bool converged = false;
};

inline constexpr double kDivergenceThreshold = 1e12;

/// One proximal gradient step on the linear model:
/// soft_threshold(beta - step * grad, step * r) coordinatewise.
NetworkParams prox_step(const NetworkParams& p, const Dataset& ds, double r, double step);

/// Step size 1 / (2 lambda_max(X^T X / n) (1 + ||beta||^2)).
double auto_step(const NetworkParams& p, const Dataset& ds);

/// i.i.d. N(0, init_scale^2) entries from the init stream of `seed`.
NetworkParams initial_params(Eigen::Index w, Eigen::Index d, double init_scale,
                             std::uint64_t seed);

/// Trains from initial_params(w, d, cfg.init_scale, cfg.seed).
/// Throws DivergenceError once the objective exceeds kDivergenceThreshold.
TrainResult train(const Dataset& ds, Eigen::Index w, double r, const TrainConfig& cfg);

/// Same, from a caller-supplied starting point.
TrainResult train_from(const Dataset& ds, const NetworkParams& init, double r,
                       const TrainConfig& cfg);

/// k runs with seeds cfg.seed, ..., cfg.seed + k - 1, sorted by final
/// objective (ties within 1e-12 broken by seed). Diverged runs are dropped;
/// ExperimentError if all diverge.
std::vector<TrainResult> multi_start(const Dataset& ds, Eigen::Index w, double r,
                                     const TrainConfig& cfg, int k, std::size_t threads = 1);

/// As multi_start with an explicit seed list.
std::vector<TrainResult> multi_start_seeds(const Dataset& ds, Eigen::Index w, double r,
                                           const TrainConfig& cfg,
                                           std::span<const std::uint64_t> seeds,
                                           std::size_t threads = 1);

/// Sorts by objective, grouping values within 1e-12 and ordering those by seed.
void sort_runs(std::vector<TrainResult>& runs);

/// Index of the converged run with the highest final objective.
std::optional<std::size_t> worst_converged(const std::vector<TrainResult>& runs);

/// Summary without the traces.
void to_json(nlohmann::json& j, const TrainResult& result);

/// iter,objective,kkt_residual
void write_trace_csv(const TrainResult& result, const std::filesystem::path& path);

} // namespace statnet
