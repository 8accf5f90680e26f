#include "statnet/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "statnet/error.hpp"
#include "statnet/parallel.hpp"
#include "statnet/rng.hpp"
#include "statnet/text_io.hpp"

namespace statnet {

namespace {

// Loss and gradient of the linear model through the sufficient statistics
// S = X^T X / n, c = X^T y / n, q = y^T y / n, so an evaluation costs O(d^2)
// instead of O(n d).
class LinearGram {
public:
    explicit LinearGram(const Dataset& ds) {
        const double n = static_cast<double>(ds.size());
        S_ = ds.X().transpose() * ds.X() / n;
        c_ = ds.X().transpose() * ds.y() / n;
        q_ = ds.y().squaredNorm() / n;
        lambda_max_ = Eigen::SelfAdjointEigenSolver<MatrixXd>(S_, Eigen::EigenvaluesOnly)
                          .eigenvalues()
                          .maxCoeff();
    }

    double loss(const VectorXd& gamma, const MatrixXd& theta) const {
        const VectorXd v = theta.transpose() * gamma;
        return std::max(0.0, q_ - 2.0 * c_.dot(v) + v.dot(S_ * v));
    }

    double loss_and_gradient(const VectorXd& gamma, const MatrixXd& theta, VectorXd& grad_gamma,
                             MatrixXd& grad_theta) const {
        const VectorXd v = theta.transpose() * gamma;
        const VectorXd Sv = S_ * v;
        // -(2/n) X^T (y - X v) = -2 (c - S v)
        const VectorXd xr = c_ - Sv;
        grad_gamma = -2.0 * (theta * xr);
        grad_theta = -2.0 * (gamma * xr.transpose());
        return std::max(0.0, q_ - 2.0 * c_.dot(v) + v.dot(Sv));
    }

    double lambda_max() const { return lambda_max_; }

private:
    MatrixXd S_;
    VectorXd c_;
    double q_ = 0.0;
    double lambda_max_ = 0.0;
};

double l1(const VectorXd& gamma, const MatrixXd& theta) {
    return gamma.lpNorm<1>() + theta.cwiseAbs().sum();
}

double flat_kkt(const VectorXd& gamma, const MatrixXd& theta, const VectorXd& grad_gamma,
                const MatrixXd& grad_theta, double r) {
    double worst = 0.0;
    auto visit = [&](double b, double g) {
        const double v = b != 0.0 ? std::abs(g + std::copysign(r, b)) : std::max(std::abs(g) - r, 0.0);
        worst = std::max(worst, v);
    };
    for (Eigen::Index j = 0; j < gamma.size(); ++j) visit(gamma[j], grad_gamma[j]);
    for (Eigen::Index j = 0; j < theta.rows(); ++j)
        for (Eigen::Index k = 0; k < theta.cols(); ++k) visit(theta(j, k), grad_theta(j, k));
    return worst;
}

template <typename Derived>
void soft_threshold_inplace(Eigen::MatrixBase<Derived>& m, double lambda) {
    for (Eigen::Index j = 0; j < m.rows(); ++j)
        for (Eigen::Index k = 0; k < m.cols(); ++k) m(j, k) = soft_threshold(m(j, k), lambda);
}

double step_from_curvature(double lambda_max, const VectorXd& gamma, const MatrixXd& theta) {
    const double scale = 2.0 * lambda_max * (1.0 + gamma.squaredNorm() + theta.squaredNorm());
    return scale > 0.0 ? 1.0 / scale : 1.0;
}

void check_divergence(double value, int iteration) {
    if (!(value <= kDivergenceThreshold)) {
        throw DivergenceError("objective reached " + format_real(value) + " at iteration " +
                              std::to_string(iteration));
    }
}

// Sufficient-decrease slack for rounding in the Gram-form loss.
double rounding_slack(double f) { return 1e-14 * std::max(1.0, std::abs(f)); }

// Loss and gradient of the ReLU network evaluated on the raw samples.
class ReluModel {
public:
    explicit ReluModel(const Dataset& ds) : ds_(ds) {
        const double n = static_cast<double>(ds.size());
        lambda_max_ = Eigen::SelfAdjointEigenSolver<MatrixXd>(ds.X().transpose() * ds.X() / n,
                                                              Eigen::EigenvaluesOnly)
                          .eigenvalues()
                          .maxCoeff();
    }

    double loss(const VectorXd& gamma, const MatrixXd& theta) const {
        const VectorXd res = ds_.y() - (ds_.X() * theta.transpose()).cwiseMax(0.0) * gamma;
        return res.squaredNorm() / static_cast<double>(ds_.size());
    }

    double loss_and_gradient(const VectorXd& gamma, const MatrixXd& theta, VectorXd& grad_gamma,
                             MatrixXd& grad_theta) const {
        const NetworkParams p(gamma, theta);
        ParamGradient g = subgradient_relu(p, ds_);
        grad_gamma = std::move(g.gamma);
        grad_theta = std::move(g.theta);
        return loss(gamma, theta);
    }

    double lambda_max() const { return lambda_max_; }

private:
    const Dataset& ds_;
    double lambda_max_ = 0.0;
};

// Proximal gradient with backtracking on the sufficient-decrease condition,
// optionally with monotone FISTA momentum. Stops on the KKT tolerance, on
// objective stagnation when `stagnation_stop` is set, or at max_iters.
template <typename Model>
TrainResult run_prox_gradient(const Model& model, const Dataset& ds, const NetworkParams& init,
                              double r, const TrainConfig& cfg, bool stagnation_stop) {
    VectorXd gamma = init.gamma();
    MatrixXd theta = init.theta();
    VectorXd grad_gamma;
    MatrixXd grad_theta;
    double f = model.loss_and_gradient(gamma, theta, grad_gamma, grad_theta);
    double F = f + r * l1(gamma, theta);
    check_divergence(F, 0);
    double step = cfg.step_size.value_or(step_from_curvature(model.lambda_max(), gamma, theta));

    // Momentum state for the monotone FISTA variant.
    VectorXd prev_gamma = gamma;
    MatrixXd prev_theta = theta;
    VectorXd z_gamma = gamma;
    MatrixXd z_theta = theta;
    double t_momentum = 1.0;

    TrainResult out{init, cfg.seed, {}, {}};
    const auto window = static_cast<std::size_t>(cfg.stagnation_window);

    int it = 0;
    for (;; ++it) {
        const double kkt = flat_kkt(gamma, theta, grad_gamma, grad_theta, r);
        out.objective_trace.push_back(F);
        out.kkt_trace.push_back(kkt);
        if (kkt <= cfg.kkt_tolerance) {
            out.converged = true;
            break;
        }
        const auto& trace = out.objective_trace;
        if (stagnation_stop && trace.size() > window &&
            trace[trace.size() - 1 - window] - F < cfg.stagnation_tolerance) {
            out.converged = true;
            break;
        }
        if (it == cfg.max_iters) break;
        if (!cfg.step_size && it > 0 && it % cfg.step_refresh == 0) {
            step = step_from_curvature(model.lambda_max(), gamma, theta);
        }

        // Extrapolated base point; equals the iterate without momentum.
        VectorXd base_gamma = gamma;
        MatrixXd base_theta = theta;
        VectorXd base_grad_gamma = grad_gamma;
        MatrixXd base_grad_theta = grad_theta;
        double base_f = f;
        double t_next = 1.0;
        if (cfg.accelerated) {
            t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_momentum * t_momentum));
            const double a = t_momentum / t_next;
            const double b = (t_momentum - 1.0) / t_next;
            if (a != 1.0 || b != 0.0) {
                base_gamma = gamma + a * (z_gamma - gamma) + b * (gamma - prev_gamma);
                base_theta = theta + a * (z_theta - theta) + b * (theta - prev_theta);
                base_f = model.loss_and_gradient(base_gamma, base_theta, base_grad_gamma,
                                                 base_grad_theta);
            }
        }

        VectorXd cand_gamma;
        MatrixXd cand_theta;
        bool accepted = false;
        for (int halving = 0; halving < 200; ++halving) {
            cand_gamma = base_gamma - step * base_grad_gamma;
            cand_theta = base_theta - step * base_grad_theta;
            soft_threshold_inplace(cand_gamma, step * r);
            soft_threshold_inplace(cand_theta, step * r);
            const double cand_f = model.loss(cand_gamma, cand_theta);
            if (std::isfinite(cand_f)) {
                const double linear =
                    base_grad_gamma.dot(cand_gamma - base_gamma) +
                    (base_grad_theta.array() * (cand_theta - base_theta).array()).sum();
                const double prox = ((cand_gamma - base_gamma).squaredNorm() +
                                     (cand_theta - base_theta).squaredNorm()) /
                                    (2.0 * step);
                if (cand_f <= base_f + linear + prox + rounding_slack(base_f)) {
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if (!accepted) break; // no representable descent step left

        VectorXd cand_grad_gamma;
        MatrixXd cand_grad_theta;
        const double cand_f =
            model.loss_and_gradient(cand_gamma, cand_theta, cand_grad_gamma, cand_grad_theta);
        const double cand_F = cand_f + r * l1(cand_gamma, cand_theta);
        check_divergence(cand_F, it + 1);
        if (!cfg.accelerated) {
            gamma = std::move(cand_gamma);
            theta = std::move(cand_theta);
            grad_gamma = std::move(cand_grad_gamma);
            grad_theta = std::move(cand_grad_theta);
            f = cand_f;
            F = cand_F;
        } else if (cand_F <= F) {
            z_gamma = cand_gamma;
            z_theta = cand_theta;
            prev_gamma = gamma;
            prev_theta = theta;
            t_momentum = t_next;
            gamma = std::move(cand_gamma);
            theta = std::move(cand_theta);
            grad_gamma = std::move(cand_grad_gamma);
            grad_theta = std::move(cand_grad_theta);
            f = cand_f;
            F = cand_F;
        } else {
            // Non-descent: keep the iterate and restart the momentum.
            t_momentum = 1.0;
            z_gamma = gamma;
            z_theta = theta;
            prev_gamma = gamma;
            prev_theta = theta;
        }
    }

    out.params = NetworkParams(gamma, theta);
    out.iterations_run = it;
    out.final_objective = objective(out.params, ds, r);
    out.final_kkt_residual = flat_kkt(gamma, theta, grad_gamma, grad_theta, r);
    return out;
}

// Proximal subgradient with step c / sqrt(t); returns the best iterate.
TrainResult train_relu_diminishing(const Dataset& ds, const NetworkParams& init, double r,
                                   const TrainConfig& cfg) {
    const ReluModel model(ds);
    VectorXd gamma = init.gamma();
    MatrixXd theta = init.theta();
    const double base_step =
        cfg.step_size.value_or(step_from_curvature(model.lambda_max(), gamma, theta));

    TrainResult out{init, cfg.seed, {}, {}};
    VectorXd best_gamma = gamma;
    MatrixXd best_theta = theta;
    double best_F = std::numeric_limits<double>::infinity();
    std::vector<double> best_history;
    const auto window = static_cast<std::size_t>(cfg.stagnation_window);

    int it = 0;
    VectorXd grad_gamma;
    MatrixXd grad_theta;
    for (;; ++it) {
        const double F =
            model.loss_and_gradient(gamma, theta, grad_gamma, grad_theta) + r * l1(gamma, theta);
        check_divergence(F, it);
        out.objective_trace.push_back(F);
        out.kkt_trace.push_back(flat_kkt(gamma, theta, grad_gamma, grad_theta, r));
        if (F < best_F) {
            best_F = F;
            best_gamma = gamma;
            best_theta = theta;
        }
        best_history.push_back(best_F);
        if (best_history.size() > window &&
            best_history[best_history.size() - 1 - window] - best_F < cfg.stagnation_tolerance) {
            out.converged = true;
            break;
        }
        if (it == cfg.max_iters) break;
        const double step = base_step / std::sqrt(static_cast<double>(it + 1));
        gamma -= step * grad_gamma;
        theta -= step * grad_theta;
        soft_threshold_inplace(gamma, step * r);
        soft_threshold_inplace(theta, step * r);
    }

    out.params = NetworkParams(best_gamma, best_theta);
    out.iterations_run = it;
    out.final_objective = objective(out.params, ds, r);
    out.final_kkt_residual = kkt_residual(out.params, ds, r);
    return out;
}

} // namespace

void TrainConfig::validate() const {
    if (max_iters < 1) throw PreconditionError("max_iters must be at least 1");
    if (step_size && !(*step_size > 0.0)) throw PreconditionError("step_size must be positive");
    if (!(kkt_tolerance > 0.0)) throw PreconditionError("kkt_tolerance must be positive");
    if (!(init_scale > 0.0)) throw PreconditionError("init_scale must be positive");
    if (!(stagnation_tolerance > 0.0) || stagnation_window < 1) {
        throw PreconditionError("stagnation criterion must be positive");
    }
    if (step_refresh < 1) throw PreconditionError("step_refresh must be at least 1");
}

NetworkParams prox_step(const NetworkParams& p, const Dataset& ds, double r, double step) {
    if (!(step > 0.0)) throw PreconditionError("step must be positive");
    if (!(r >= 0.0)) throw InvalidTuningError("tuning parameter r must be nonnegative");
    const ParamGradient g = empirical_gradient(p, ds);
    VectorXd gamma = p.gamma() - step * g.gamma;
    MatrixXd theta = p.theta() - step * g.theta;
    soft_threshold_inplace(gamma, step * r);
    soft_threshold_inplace(theta, step * r);
    return {std::move(gamma), std::move(theta)};
}

double auto_step(const NetworkParams& p, const Dataset& ds) {
    const double n = static_cast<double>(ds.size());
    const double lambda_max =
        Eigen::SelfAdjointEigenSolver<MatrixXd>(ds.X().transpose() * ds.X() / n,
                                                Eigen::EigenvaluesOnly)
            .eigenvalues()
            .maxCoeff();
    return step_from_curvature(lambda_max, p.gamma(), p.theta());
}

NetworkParams initial_params(Eigen::Index w, Eigen::Index d, double init_scale,
                             std::uint64_t seed) {
    Rng rng(derive_seed(seed, StreamRole::init));
    VectorXd gamma(w);
    for (auto& g : gamma) g = init_scale * rng.normal();
    MatrixXd theta(w, d);
    for (Eigen::Index j = 0; j < w; ++j)
        for (Eigen::Index k = 0; k < d; ++k) theta(j, k) = init_scale * rng.normal();
    return {std::move(gamma), std::move(theta)};
}

TrainResult train(const Dataset& ds, Eigen::Index w, double r, const TrainConfig& cfg) {
    cfg.validate();
    return train_from(ds, initial_params(w, ds.input_dim(), cfg.init_scale, cfg.seed), r, cfg);
}

TrainResult train_from(const Dataset& ds, const NetworkParams& init, double r,
                       const TrainConfig& cfg) {
    cfg.validate();
    if (!(r >= 0.0)) throw InvalidTuningError("tuning parameter r must be nonnegative");
    if (init.input_dim() != ds.input_dim()) {
        throw DimensionError("initial network does not match the dataset dimension");
    }
    if (ds.activation() == Activation::linear) {
        return run_prox_gradient(LinearGram(ds), ds, init, r, cfg, false);
    }
    if (cfg.relu_schedule == ReluSchedule::diminishing) {
        return train_relu_diminishing(ds, init, r, cfg);
    }
    return run_prox_gradient(ReluModel(ds), ds, init, r, cfg, true);
}

void sort_runs(std::vector<TrainResult>& runs) {
    std::sort(runs.begin(), runs.end(), [](const TrainResult& a, const TrainResult& b) {
        if (a.final_objective != b.final_objective) return a.final_objective < b.final_objective;
        return a.seed < b.seed;
    });
    // Chains of objectives within 1e-12 of their neighbour count as ties.
    std::size_t start = 0;
    while (start < runs.size()) {
        std::size_t end = start + 1;
        while (end < runs.size() &&
               runs[end].final_objective - runs[end - 1].final_objective <= 1e-12)
            ++end;
        std::sort(runs.begin() + static_cast<std::ptrdiff_t>(start),
                  runs.begin() + static_cast<std::ptrdiff_t>(end),
                  [](const TrainResult& a, const TrainResult& b) { return a.seed < b.seed; });
        start = end;
    }
}

std::vector<TrainResult> multi_start_seeds(const Dataset& ds, Eigen::Index w, double r,
                                           const TrainConfig& cfg,
                                           std::span<const std::uint64_t> seeds,
                                           std::size_t threads) {
    if (seeds.size() < 2) throw PreconditionError("multi-start needs at least 2 runs");
    cfg.validate();
    std::vector<std::optional<TrainResult>> slots(seeds.size());
    parallel_for(seeds.size(), threads, [&](std::size_t i) {
        TrainConfig run_cfg = cfg;
        run_cfg.seed = seeds[i];
        try {
            slots[i] = train(ds, w, r, run_cfg);
        } catch (const DivergenceError&) {
        }
    });
    std::vector<TrainResult> runs;
    for (auto& slot : slots)
        if (slot) runs.push_back(std::move(*slot));
    if (runs.empty()) throw ExperimentError("every multi-start run diverged");
    sort_runs(runs);
    return runs;
}

std::vector<TrainResult> multi_start(const Dataset& ds, Eigen::Index w, double r,
                                     const TrainConfig& cfg, int k, std::size_t threads) {
    if (k < 2) throw PreconditionError("multi-start needs k >= 2");
    std::vector<std::uint64_t> seeds(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) seeds[static_cast<std::size_t>(i)] = cfg.seed + static_cast<std::uint64_t>(i);
    return multi_start_seeds(ds, w, r, cfg, seeds, threads);
}

std::optional<std::size_t> worst_converged(const std::vector<TrainResult>& runs) {
    std::optional<std::size_t> worst;
    for (std::size_t i = 0; i < runs.size(); ++i)
        if (runs[i].converged) worst = i;
    return worst;
}

void to_json(nlohmann::json& j, const TrainResult& result) {
    j = nlohmann::json{{"seed", result.seed},
                       {"params", result.params},
                       {"final_objective", result.final_objective},
                       {"final_kkt_residual", result.final_kkt_residual},
                       {"iterations_run", result.iterations_run},
                       {"converged", result.converged}};
}

void write_trace_csv(const TrainResult& result, const std::filesystem::path& path) {
    std::string out = "iter,objective,kkt_residual\n";
    for (std::size_t t = 0; t < result.objective_trace.size(); ++t) {
        out += std::to_string(t);
        out += ',';
        out += format_real(result.objective_trace[t]);
        out += ',';
        out += format_real(result.kkt_trace[t]);
        out += '\n';
    }
    write_text_file(path, out);
}

} // namespace statnet
