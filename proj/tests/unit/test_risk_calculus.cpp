#include "doctest.h"

#include <filesystem>

#include "statnet/error.hpp"
#include "statnet/risk_calculus.hpp"
#include "support/oracles.hpp"

using namespace statnet;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// d = w = 1 with samples (x, y) = (-1, 0) and (1, 1).
Dataset two_points(Activation act = Activation::linear) {
    return Dataset((MatrixXd(2, 1) << -1, 1).finished(), Eigen::Vector2d(0, 1), 0.0, act);
}

NetworkParams scalar(double gamma, double theta) {
    return {VectorXd::Constant(1, gamma), MatrixXd::Constant(1, 1, theta)};
}

Dataset random_dataset(Rng& rng, Eigen::Index n, Eigen::Index d,
                       Activation act = Activation::linear) {
    return Dataset(oracle::normal_matrix(rng, n, d), oracle::normal_vector(rng, n), 0.0, act);
}

} // namespace

TEST_CASE("Dataset validation") {
    CHECK_THROWS_AS(Dataset(MatrixXd::Ones(3, 2), VectorXd::Ones(2)), DimensionError);
    CHECK_THROWS_AS(Dataset(MatrixXd(0, 2), VectorXd(0)), DimensionError);
    CHECK_THROWS(Dataset(MatrixXd::Ones(2, 2), VectorXd::Ones(2), -1.0));
}

TEST_CASE("empirical risk on the two-point example") {
    CHECK(empirical_risk(scalar(1.0, 0.5), two_points()) == doctest::Approx(0.25));
    CHECK(empirical_risk(scalar(0.5, 1.0), two_points()) == doctest::Approx(0.25));

    // Perfect fit.
    Rng rng(1);
    const NetworkParams p = oracle::normal_params(rng, 3, 4);
    const MatrixXd X = oracle::normal_matrix(rng, 20, 4);
    const Dataset exact(X, predict(p, X, Activation::linear));
    CHECK(empirical_risk(p, exact) < 1e-25);
}

TEST_CASE("empirical risk matches a per-sample loop") {
    Rng rng(2);
    for (int i = 0; i < 30; ++i) {
        const auto w = oracle::between(rng, 1, 5);
        const auto d = oracle::between(rng, 1, 5);
        const NetworkParams p = oracle::normal_params(rng, w, d);
        for (Activation act : {Activation::linear, Activation::relu}) {
            const Dataset ds = random_dataset(rng, 15, d, act);
            const double want = oracle::loop_risk(p, ds.X(), ds.y(), act == Activation::relu);
            CHECK(std::abs(empirical_risk(p, ds) - want) <= 1e-12 * std::max(1.0, want));
        }
    }
}

TEST_CASE("objective adds the l1 penalty") {
    Rng rng(3);
    const NetworkParams p = oracle::normal_params(rng, 3, 2);
    const Dataset ds = random_dataset(rng, 10, 2);
    CHECK(objective(p, ds, 0.0) == empirical_risk(p, ds));
    const double r = 0.37;
    CHECK(objective(p, ds, r) ==
          doctest::Approx(empirical_risk(p, ds) + r * vec_params(p).lpNorm<1>()).epsilon(1e-14));
    CHECK(objective(NetworkParams::zeros(3, 2), ds, r) ==
          doctest::Approx(ds.y().squaredNorm() / 10.0));
    CHECK_THROWS_AS(objective(p, ds, -1e-3), InvalidTuningError);
}

TEST_CASE("empirical gradient: hand example and errors") {
    const ParamGradient g = empirical_gradient(scalar(1.0, 1.0), two_points());
    CHECK(g.gamma(0) == doctest::Approx(1.0));
    CHECK(g.theta(0, 0) == doctest::Approx(1.0));
    CHECK_THROWS_AS(empirical_gradient(scalar(1.0, 1.0), two_points(Activation::relu)),
                    UnsupportedActivationError);

    Rng rng(4);
    const NetworkParams p = oracle::normal_params(rng, 2, 3);
    const MatrixXd X = oracle::normal_matrix(rng, 8, 3);
    const ParamGradient zero = empirical_gradient(p, Dataset(X, predict(p, X, Activation::linear)));
    CHECK(zero.flat().cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("empirical gradient matches central differences") {
    Rng rng(5);
    for (int i = 0; i < 50; ++i) {
        const auto w = oracle::between(rng, 1, 6);
        const auto d = oracle::between(rng, 1, 6);
        const auto n = oracle::between(rng, 2, 50);
        const NetworkParams p = oracle::normal_params(rng, w, d);
        const Dataset ds = random_dataset(rng, n, d);
        const VectorXd fd = oracle::central_gradient(
            [&](const VectorXd& b) { return empirical_risk(unvec_params(b, w, d), ds); },
            vec_params(p));
        CHECK(oracle::max_relative_error(empirical_gradient(p, ds).flat(), fd) < 1e-6);
    }
}

TEST_CASE("ReLU subgradient") {
    Rng rng(6);
    const auto d = 3;
    const NetworkParams p = oracle::normal_params(rng, 4, d);

    // All pre-activations positive: equals the linear gradient.
    const NetworkParams pos(p.gamma(), p.theta().cwiseAbs());
    const MatrixXd X = oracle::normal_matrix(rng, 12, d).cwiseAbs();
    const VectorXd y = oracle::normal_vector(rng, 12);
    const Dataset lin(X, y);
    const Dataset relu(X, y, 0.0, Activation::relu);
    CHECK((subgradient_relu(pos, relu).flat() - empirical_gradient(pos, lin).flat())
              .cwiseAbs()
              .maxCoeff() < 1e-13);

    // All pre-activations negative: dead units.
    const NetworkParams neg(p.gamma(), -p.theta().cwiseAbs());
    CHECK(subgradient_relu(neg, relu).theta.isZero(0.0));
    CHECK(subgradient_relu(neg, relu).gamma.isZero(0.0));

    // Zero pre-activation takes the zero indicator.
    const NetworkParams flat(VectorXd::Ones(1), MatrixXd::Zero(1, 1));
    const Dataset one(MatrixXd::Ones(1, 1), VectorXd::Ones(1), 0.0, Activation::relu);
    CHECK(subgradient_relu(flat, one).theta(0, 0) == 0.0);
}

TEST_CASE("ReLU subgradient matches differences away from kinks") {
    Rng rng(7);
    int checked = 0;
    while (checked < 30) {
        const auto w = oracle::between(rng, 1, 4);
        const auto d = oracle::between(rng, 1, 4);
        const NetworkParams p = oracle::normal_params(rng, w, d);
        const Dataset ds = random_dataset(rng, 20, d, Activation::relu);
        if ((ds.X() * p.theta().transpose()).cwiseAbs().minCoeff() <= 1e-3) continue;
        ++checked;
        const VectorXd fd = oracle::central_gradient(
            [&](const VectorXd& b) { return empirical_risk(unvec_params(b, w, d), ds); },
            vec_params(p));
        CHECK(oracle::max_relative_error(subgradient_relu(p, ds).flat(), fd) < 1e-5);
    }
}

TEST_CASE("population risk closed form") {
    const NetworkParams zero(VectorXd::Ones(1), MatrixXd::Zero(1, 2));
    const NetworkParams target(VectorXd::Ones(1), (MatrixXd(1, 2) << 1, 0).finished());
    CHECK(population_risk(zero, target, 1.0) == doctest::Approx(2.0));
    CHECK(population_risk(target, target, 0.5) == doctest::Approx(0.25));
    CHECK_THROWS_AS(population_risk(zero, NetworkParams::zeros(1, 3), 0.0), DimensionError);

    Rng rng(8);
    for (int i = 0; i < 20; ++i) {
        const NetworkParams p = oracle::normal_params(rng, 3, 3);
        const NetworkParams t = oracle::normal_params(rng, 3, 3);
        CHECK(population_risk(p, t, 0.7) >= 0.49);
        // Same end-to-end map through a different factorization.
        const NetworkParams same = rescale(t, ScalingVector(VectorXd::Constant(3, 2.5)));
        CHECK(population_risk(same, t, 0.7) == doctest::Approx(0.49).epsilon(1e-12));
    }
}

TEST_CASE("population risk agrees with Monte Carlo") {
    Rng rng(9);
    for (int i = 0; i < 3; ++i) {
        const NetworkParams p = oracle::normal_params(rng, 3, 4, 0.5);
        const NetworkParams t = oracle::normal_params(rng, 3, 4, 0.5);
        const double sigma = 0.5;
        const auto mc = oracle::population_risk_mc(p, t, sigma, 1000000, 100 + i);
        CHECK(std::abs(mc.mean - population_risk(p, t, sigma)) < 3.0 * mc.standard_error);
    }
}

TEST_CASE("empirical quantities approach the population ones") {
    Rng rng(10);
    const NetworkParams p = oracle::normal_params(rng, 2, 3, 0.7);
    const NetworkParams t = oracle::normal_params(rng, 2, 3, 0.7);
    const double sigma = 0.4;
    const Eigen::Index n = 200000;
    const MatrixXd X = oracle::normal_matrix(rng, n, 3);
    const VectorXd y = predict(t, X, Activation::linear) + oracle::normal_vector(rng, n, sigma);
    const Dataset ds(X, y, sigma);
    const double pop = population_risk(p, t, sigma);
    // Residual^2 has variance 2 pop^2 for Gaussian residuals.
    CHECK(std::abs(empirical_risk(p, ds) - pop) < 3.0 * std::sqrt(2.0 / n) * pop);
    const VectorXd g = empirical_gradient(p, ds).flat();
    const VectorXd g_pop = population_gradient(p, t).flat();
    CHECK((g - g_pop).cwiseAbs().maxCoeff() < 0.05 * std::max(1.0, g_pop.cwiseAbs().maxCoeff()));
}

TEST_CASE("population gradient") {
    const ParamGradient g = population_gradient(scalar(1, 1), scalar(0, 0));
    CHECK(g.gamma(0) == doctest::Approx(2.0));
    CHECK(g.theta(0, 0) == doctest::Approx(2.0));
    CHECK(population_gradient(scalar(2, 3), scalar(3, 2)).flat().isZero(0.0));

    Rng rng(11);
    for (int i = 0; i < 50; ++i) {
        const auto w = oracle::between(rng, 1, 5);
        const auto d = oracle::between(rng, 1, 5);
        const NetworkParams p = oracle::normal_params(rng, w, d);
        const NetworkParams t = oracle::normal_params(rng, w, d);
        auto risk = [&](const VectorXd& b) { return population_risk(unvec_params(b, w, d), t, 0.3); };
        // The risk is quartic in beta: extrapolated differences are exact up to rounding.
        const VectorXd beta = vec_params(p);
        VectorXd fd(beta.size());
        for (Eigen::Index k = 0; k < beta.size(); ++k) {
            auto central = [&](double h) {
                VectorXd a = beta, b = beta;
                a(k) += h;
                b(k) -= h;
                return (risk(a) - risk(b)) / (2 * h);
            };
            fd(k) = (4 * central(5e-3) - central(1e-2)) / 3;
        }
        CHECK(oracle::max_relative_error(population_gradient(p, t).flat(), fd) < 1e-8);
    }
}

TEST_CASE("population Hessian") {
    const HessianBlocks h = population_hessian(scalar(1, 1), scalar(1, 1));
    const MatrixXd H = h.assembled();
    CHECK((H - MatrixXd::Constant(2, 2, 2.0)).cwiseAbs().maxCoeff() < 1e-14);

    Rng rng(12);
    for (int i = 0; i < 40; ++i) {
        const auto w = oracle::between(rng, 1, 4);
        const auto d = oracle::between(rng, 1, 4);
        const NetworkParams p = oracle::normal_params(rng, w, d);
        const NetworkParams t = oracle::normal_params(rng, w, d);
        const HessianBlocks blocks = population_hessian(p, t);
        const MatrixXd full = blocks.assembled();
        CHECK((full - full.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
        CHECK(blocks.block_gammagamma.isApprox(blocks.block_gammagamma.transpose()));

        auto risk = [&](const VectorXd& b) { return population_risk(unvec_params(b, w, d), t, 0.2); };
        const VectorXd beta = vec_params(p);
        CHECK(oracle::max_relative_error(full, oracle::central_hessian(risk, beta)) < 1e-6);

        const VectorXd a = oracle::normal_vector(rng, beta.size());
        const double along = oracle::directional_second(risk, beta, a);
        CHECK(std::abs(a.dot(full * a) - along) < 1e-6 * std::max(1.0, std::abs(along)));

        // Theta-first layout is a permutation of the canonical one.
        const MatrixXd tf = blocks.assembled_theta_first();
        VectorXd a_tf(beta.size());
        a_tf << a.tail(w * d), a.head(w);
        CHECK(std::abs(a_tf.dot(tf * a_tf) - a.dot(full * a)) < 1e-10 * std::max(1.0, std::abs(along)));
    }
}

TEST_CASE("closed-form Hessian quadratic form") {
    Rng rng(13);
    for (int i = 0; i < 100; ++i) {
        const auto w = oracle::between(rng, 1, 6);
        const auto d = oracle::between(rng, 1, 6);
        const NetworkParams p = oracle::normal_params(rng, w, d);
        const NetworkParams t = oracle::normal_params(rng, w, d);
        const VectorXd a_theta = oracle::normal_vector(rng, w * d);
        const VectorXd a_gamma = oracle::normal_vector(rng, w);
        VectorXd a(w + w * d);
        a << a_gamma, a_theta;
        const double block = a.dot(population_hessian(p, t).assembled() * a);
        const double closed = hessian_quadratic_closed(p, t, a_theta, a_gamma);
        CHECK(std::abs(block - closed) <= 1e-10 * std::max(1.0, std::abs(block)));

        // Zero sub-directions reduce to squared norms.
        const MatrixXd U = unflatten_rows(a_theta, w, d);
        CHECK(hessian_quadratic_closed(p, t, a_theta, VectorXd::Zero(w)) ==
              doctest::Approx(2.0 * (U.transpose() * p.gamma()).squaredNorm()).epsilon(1e-12));
        CHECK(hessian_quadratic_closed(p, t, VectorXd::Zero(w * d), a_gamma) ==
              doctest::Approx(2.0 * (p.theta().transpose() * a_gamma).squaredNorm()).epsilon(1e-12));

        // A bias vector shifts the mixed term.
        const VectorXd bias = oracle::normal_vector(rng, d);
        VectorXd a2(w + w * d);
        a2 << a_gamma, a_theta;
        const double biased = a2.dot(population_hessian(p, t, bias).assembled() * a2);
        CHECK(std::abs(biased - hessian_quadratic_closed(p, t, a_theta, a_gamma, bias)) <=
              1e-10 * std::max(1.0, std::abs(biased)));
    }
    const NetworkParams p = NetworkParams::zeros(2, 2);
    CHECK_THROWS_AS(hessian_quadratic_closed(p, p, VectorXd::Zero(3), VectorXd::Zero(2)),
                    DimensionError);
}

TEST_CASE("rescaling leaves empirical risk unchanged") {
    Rng rng(14);
    for (int i = 0; i < 50; ++i) {
        const NetworkParams p = oracle::normal_params(rng, 4, 3);
        const Dataset ds = random_dataset(rng, 25, 3);
        VectorXd alpha = oracle::normal_vector(rng, 4);
        const NetworkParams q = rescale(p, ScalingVector(alpha));
        const double r = empirical_risk(p, ds);
        CHECK(std::abs(empirical_risk(q, ds) - r) <= 1e-12 * std::max(1.0, r));
    }
}

TEST_CASE("risk report and dataset serialization") {
    Rng rng(15);
    const NetworkParams p = oracle::normal_params(rng, 2, 3);
    const NetworkParams t = oracle::normal_params(rng, 2, 3);
    const Dataset ds(oracle::normal_matrix(rng, 9, 3), oracle::normal_vector(rng, 9), 0.5,
                     Activation::linear, 42);
    const RiskReport rep = risk_report(p, ds, t, 0.1);
    CHECK(rep.objective >= rep.empirical_risk);
    CHECK(rep.population_risk >= 0.25);
    CHECK(rep.l1_beta == doctest::Approx(p.l1()));

    const Dataset back = dataset_from_json(nlohmann::json::parse(nlohmann::json(ds).dump()));
    CHECK(back.X() == ds.X());
    CHECK(back.y() == ds.y());
    CHECK(back.seed() == ds.seed());

    const auto path = std::filesystem::temp_directory_path() / "statnet_ds_roundtrip.csv";
    write_dataset_csv(ds, path);
    const Dataset csv = read_dataset_csv(path, 0.5);
    CHECK(csv.X() == ds.X());
    CHECK(csv.y() == ds.y());
    std::filesystem::remove(path);
}
