#include <doctest.h>

#include <cmath>
#include <vector>

#include "dobkit/config.hpp"
#include "dobkit/observers.hpp"
#include "dobkit/plant.hpp"
#include "dobkit/rng.hpp"
#include "dobkit/simlab.hpp"

using namespace dobkit;

namespace {

PlantModel onedof_plant() { return make_one_dof_plant(OneDofParams{}, 0.01); }

NoiseConfig onedof_noise(double eta = 1.0) {
    NoiseConfig nc;
    nc.Qd = Mat::Constant(1, 1, 0.25);
    nc.Qs = 1e-4 * Mat::Identity(2, 2);
    nc.R = Mat::Constant(1, 1, 1.8e-5);
    nc.eta = eta;
    return nc;
}

AugmentedState some_state() {
    AugmentedState s;
    s.x = Vec(3);
    s.x << 2.0, -0.5, 0.3;
    s.P = 0.5 * Mat::Identity(3, 3);
    return s;
}

}  // namespace

TEST_CASE("infinite measurement noise leaves the prediction untouched") {
    const PlantModel plant = onedof_plant();
    NoiseConfig nc = onedof_noise();
    nc.R = Mat::Constant(1, 1, 1e12);
    const AugmentedState s = some_state();
    const Vec u = Vec::Constant(1, 1.0);
    const Vec x_pred = plant.step(s.x, u);
    const Vec y = Vec::Constant(1, x_pred(2) + 5.0);  // large innovation
    const AugmentedState post = ekf_dob_step(s, plant, u, y, nc);
    CHECK((post.x - x_pred).norm() < 1e-9);
}

TEST_CASE("near-exact full-state measurement pins the posterior to it") {
    PlantModel plant = onedof_plant();
    plant.H = Mat::Identity(3, 3);
    NoiseConfig nc = onedof_noise();
    nc.R = 1e-12 * Mat::Identity(3, 3);
    const AugmentedState s = some_state();
    const Vec u = Vec::Constant(1, 1.0);
    Vec y = plant.step(s.x, u);
    y(0) += 0.3;
    y(1) -= 0.2;
    y(2) += 0.1;
    const AugmentedState post = ekf_dob_step(s, plant, u, y, nc);
    CHECK((post.x - y).norm() < 1e-6);
}

TEST_CASE("scalar steady-state covariance hits the golden ratio") {
    // Random walk with unit process and measurement noise: the steady
    // posterior variance solves P^2 + P - 1 = 0.
    PlantModel plant;
    plant.dist_dim = 1;
    plant.state_dim = 0;
    plant.dt = 1.0;
    plant.H = Mat::Identity(1, 1);
    plant.step = [](const Vec& x, const Vec&) { return x; };
    NoiseConfig nc;
    nc.Qd = Mat::Identity(1, 1);
    nc.Qs = Mat(0, 0);
    nc.R = Mat::Identity(1, 1);
    AugmentedState s;
    s.x = Vec::Zero(1);
    s.P = Mat::Identity(1, 1);
    const Vec u = Vec::Zero(1);
    const Vec y = Vec::Zero(1);
    for (int k = 0; k < 200; ++k) s = ekf_dob_step(s, plant, u, y, nc);
    CHECK(s.P(0, 0) == doctest::Approx((std::sqrt(5.0) - 1.0) / 2.0).epsilon(1e-9));
}

TEST_CASE("measurement update never increases the posterior trace") {
    const PlantModel plant = onedof_plant();
    const NoiseConfig nc = onedof_noise();
    AugmentedState s = some_state();
    Rng rng(21);
    const Vec u = Vec::Constant(1, 0.5);
    for (int k = 0; k < 100; ++k) {
        const Vec x_pred = plant.step(s.x, u);
        const Mat F = numerical_jacobian([&](const Vec& v) { return plant.step(v, u); }, s.x);
        const Mat P_pred = F * s.P * F.transpose() + nc.assembled_Q();
        const Vec y = Vec::Constant(1, x_pred(2) + 0.01 * rng.normal());
        s = ekf_dob_step(s, plant, u, y, nc);
        CHECK(s.P.trace() <= P_pred.trace() + 1e-12);
        CHECK((s.P - s.P.transpose()).norm() < 1e-12);
    }
}

TEST_CASE("residual whitening divides by the Cholesky factors") {
    const Mat P = Mat::Constant(1, 1, 4.0);
    const Mat R = Mat::Constant(1, 1, 9.0);
    const Mat H = Mat::Constant(1, 1, 1.0);
    const Vec x_pred = Vec::Constant(1, 3.0);
    const Vec x_iter = Vec::Constant(1, 1.0);
    const Vec y = Vec::Constant(1, 7.0);
    const WhitenedResiduals w = whiten_residuals(x_pred, P, R, x_iter, y, H);
    CHECK(w.B_p(0, 0) == doctest::Approx(2.0));
    CHECK(w.e_p(0) == doctest::Approx(1.0));          // (3 - 1) / 2
    CHECK(w.e_r(0) == doctest::Approx(2.0));          // (7 - 1) / 3
    CHECK_THROWS_AS(whiten_residuals(x_pred, -P, R, x_iter, y, H), NotPD);
}

TEST_CASE("Gaussian kernel weights") {
    Vec e(3), sigma(3);
    e << 1.5, 0.0, 123.0;
    sigma << 1.5, 2.0, kInfiniteBandwidth;
    const Mat W = mkc_weight_matrix(e, sigma);
    CHECK(W(0, 0) == doctest::Approx(std::exp(-0.5)).epsilon(1e-14));
    CHECK(W(1, 1) == 1.0);
    CHECK(W(2, 2) == 1.0);  // infinite bandwidth is exactly quadratic
    CHECK(W(0, 1) == 0.0);
}

TEST_CASE("kernel inflation never shrinks the prior") {
    // P_tilde = B diag(1/w) B^T with w in (0,1], so P_tilde - P is PSD.
    Rng rng(22);
    for (int trial = 0; trial < 100; ++trial) {
        Mat A(3, 3);
        for (int i = 0; i < 9; ++i) A(i / 3, i % 3) = rng.normal();
        const Mat P = A * A.transpose() + 0.1 * Mat::Identity(3, 3);
        const Mat B = P.llt().matrixL();
        Vec e(3), sigma(3);
        for (int i = 0; i < 3; ++i) {
            e(i) = rng.normal();
            sigma(i) = 0.5 + std::abs(rng.normal());
        }
        const Vec w = mkc_weight_matrix(e, sigma).diagonal();
        const Mat P_tilde = B * w.cwiseInverse().asDiagonal() * B.transpose();
        Eigen::SelfAdjointEigenSolver<Mat> es(P_tilde - P);
        CHECK(es.eigenvalues().minCoeff() > -1e-12);
    }
}

TEST_CASE("infinite bandwidths reduce the robust filter to the plain one") {
    SimScenario scn = make_onedof_benchmark();
    scn.observer = make_ekf_spec(scn, 1.0);
    const Trace ekf = run_closed_loop(scn);

    SimScenario robust = scn;
    robust.observer.type = ObserverType::Mkc;
    robust.observer.name = "mkc-degenerate";
    robust.observer.mkc.sigma_d = Vec::Constant(1, kInfiniteBandwidth);
    robust.observer.mkc.sigma_s = Vec::Constant(2, kInfiniteBandwidth);
    robust.observer.mkc.sigma_r = Vec::Constant(1, kInfiniteBandwidth);
    const Trace mkc = run_closed_loop(robust);

    REQUIRE(mkc.length() == ekf.length());
    double worst = 0.0;
    for (long k = 0; k < ekf.length(); ++k)
        worst = std::max(worst, (mkc.x_hat[k] - ekf.x_hat[k]).cwiseAbs().maxCoeff());
    CHECK(worst < 1e-9);
    for (long k = 0; k < ekf.length(); ++k) CHECK(mkc.iters[k] >= 1);
}

TEST_CASE("a consistent measurement converges in one fixed-point iteration") {
    const PlantModel plant = onedof_plant();
    const NoiseConfig nc = onedof_noise();
    const MkcConfig mk = MkcConfig::defaults(plant, 1.5);
    const AugmentedState s = some_state();
    const Vec u = Vec::Constant(1, 1.0);
    const Vec y = plant.H * plant.step(s.x, u);  // zero innovation
    const MkcStepResult out = mkcekf_dob_step(s, plant, u, y, nc, mk);
    CHECK(out.iters == 1);
    CHECK_FALSE(out.diverged);
    CHECK((out.state.x - plant.step(s.x, u)).norm() < 1e-12);
}

TEST_CASE("single-model bank collapses to the plain filter") {
    SimScenario scn = make_onedof_benchmark();
    scn.observer = make_ekf_spec(scn, 1.0);
    const Trace ekf = run_closed_loop(scn);

    SimScenario imm = scn;
    imm.observer = make_imm_spec(scn, {1.0}, Mat::Ones(1, 1));
    const Trace got = run_closed_loop(imm);

    double worst = 0.0;
    for (long k = 0; k < ekf.length(); ++k)
        worst = std::max(worst, (got.x_hat[k] - ekf.x_hat[k]).cwiseAbs().maxCoeff());
    CHECK(worst < 1e-12);
    for (long k = 0; k < got.length(); ++k) CHECK(got.mu[k](0) == doctest::Approx(1.0));
}

TEST_CASE("identical hypotheses keep symmetric probabilities") {
    SimScenario scn = make_onedof_benchmark();
    Mat markov(2, 2);
    markov << 0.5, 0.5, 0.5, 0.5;
    scn.observer = make_imm_spec(scn, {1.0, 1.0}, markov);
    const Trace tr = run_closed_loop(scn);
    for (long k = 0; k < tr.length(); ++k) {
        CHECK(tr.mu[k](0) == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(tr.mu[k](1) == doctest::Approx(0.5).epsilon(1e-12));
    }
}

TEST_CASE("model probabilities live on the simplex") {
    SimScenario scn = make_onedof_benchmark();
    Mat markov(2, 2);
    markov << 0.95, 0.05, 0.3, 0.7;
    scn.observer = make_imm_spec(scn, {1.0, std::exp(4.0)}, markov);
    const Trace tr = run_closed_loop(scn);
    for (long k = 0; k < tr.length(); ++k) {
        CHECK(tr.mu[k].minCoeff() >= 0.0);
        CHECK(std::abs(tr.mu[k].sum() - 1.0) < 1e-12);
    }
}

TEST_CASE("the aggressive model takes over at a disturbance jump") {
    SimScenario scn = make_onedof_benchmark();
    Mat markov(2, 2);
    markov << 0.95, 0.05, 0.3, 0.7;
    scn.observer = make_imm_spec(scn, {1.0, std::exp(4.0)}, markov);
    const Trace tr = run_closed_loop(scn);

    // The Coulomb term flips sign when the desired velocity crosses zero.
    long flip = -1;
    for (long k = 350; k + 1 < tr.length(); ++k) {
        if (tr.x_true[k](0) * tr.x_true[k + 1](0) < 0.0 && std::abs(tr.x_true[k](0)) > 10.0) {
            flip = k;
            break;
        }
    }
    REQUIRE(flip > 0);
    bool crossed = false;
    for (long k = flip + 1; k <= flip + 10; ++k) crossed = crossed || tr.mu[k](1) > tr.mu[k](0);
    CHECK(crossed);
    bool recovered = false;
    for (long k = flip + 3; k <= flip + 50 && k < tr.length(); ++k)
        recovered = recovered || tr.mu[k](0) > 0.6;
    CHECK(recovered);
}

TEST_CASE("nonlinear observer error decays and holds its fixed point") {
    const TwoLinkParams leg = two_link_preset("exo-left-leg");
    const Vec2 theta(0.3, 0.5);
    const Vec2 thetadot = Vec2::Zero();
    const Vec2 d(5.0, -3.0);
    const TwoLinkTerms t = two_link_terms(theta, thetadot, leg);
    const Vec2 tau = t.G - d;  // holds the leg at rest against d
    const double dt = 1e-3;

    SUBCASE("monotone decay from a cold start") {
        NdobState nd;
        nd.c = 50.0;
        double prev = d.norm();
        for (int k = 0; k < 200; ++k) {
            auto [next, d_hat] = ndob_step(nd, theta, thetadot, tau, leg, dt);
            nd = next;
            const double err = (d_hat - d).norm();
            CHECK(err <= prev + 1e-12);
            prev = err;
        }
        CHECK(prev < 5e-3);
    }

    SUBCASE("exact estimate is a fixed point") {
        NdobState nd;
        nd.c = 50.0;
        nd.z = d;  // p(thetadot) = 0 at rest, so z = d_hat = d
        auto [next, d_hat] = ndob_step(nd, theta, thetadot, tau, leg, dt);
        CHECK((d_hat - d).norm() < 1e-9);
        CHECK((next.z - d).norm() < 1e-9);
    }

    SUBCASE("rise time tracks the slow eigenvalue of the gain") {
        NdobState nd;
        nd.c = 50.0;
        Mat2 shape;
        shape << 1.0, 0.0, 1.0, 1.0;
        const Mat2 L = nd.c * shape * t.M.inverse();
        const double lambda_slow = Eigen::EigenSolver<Mat2>(L).eigenvalues().real().minCoeff();
        const double t95_pred = std::log(20.0) / lambda_slow;
        long k95 = -1;
        for (long k = 0; k < 5000; ++k) {
            auto [next, d_hat] = ndob_step(nd, theta, thetadot, tau, leg, dt);
            nd = next;
            if (d_hat(0) >= 0.95 * d(0)) {
                k95 = k + 1;
                break;
            }
        }
        REQUIRE(k95 > 0);
        CHECK(static_cast<double>(k95) * dt == doctest::Approx(t95_pred).epsilon(0.2));
    }
}

TEST_CASE("noise configuration validation") {
    const PlantModel plant = onedof_plant();
    NoiseConfig nc = onedof_noise();
    nc.eta = 0.5;  // must be >= 1
    CHECK_THROWS_AS(nc.validate(plant), ConfigError);
    nc = onedof_noise();
    nc.R = Mat::Constant(1, 1, -1.0);  // not positive definite
    CHECK_THROWS_AS(nc.validate(plant), ConfigError);
    nc = onedof_noise();
    nc.Qs = Mat::Identity(3, 3);  // wrong size
    CHECK_THROWS_AS(nc.validate(plant), ConfigError);

    ImmConfig imm;
    CHECK_THROWS_AS(imm.validate(plant), ConfigError);  // empty bank

    MkcConfig mk = MkcConfig::defaults(plant, 1.5);
    mk.sigma_d(0) = 0.0;
    CHECK_THROWS_AS(mk.validate(plant), ConfigError);
}
