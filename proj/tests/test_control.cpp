#include <doctest.h>

#include <cmath>

#include "dobkit/config.hpp"
#include "dobkit/control.hpp"
#include "dobkit/simlab.hpp"

using namespace dobkit;

namespace {

PdGains gains2(double kp, double kd) {
    PdGains g;
    g.kp = Vec::Constant(2, kp);
    g.kd = Vec::Constant(2, kd);
    return g;
}

}  // namespace

TEST_CASE("ultimate bound arithmetic") {
    BoundInputs b;  // l_e_bar = 1, eps = 0.01
    const double kappa = ultimate_bound(gains2(5000.0, 100.0), b);
    CHECK(kappa == doctest::Approx(0.005001).epsilon(1e-12));
}

TEST_CASE("ultimate bound scales quadratically with the error bound") {
    BoundInputs b;
    const PdGains g = gains2(5000.0, 100.0);
    b.l_e_bar = 0.0;
    CHECK(ultimate_bound(g, b) == 0.0);
    b.l_e_bar = 1.0;
    const double k1 = ultimate_bound(g, b);
    b.l_e_bar = 2.0;
    CHECK(ultimate_bound(g, b) == doctest::Approx(4.0 * k1).epsilon(1e-12));
}

TEST_CASE("stiffer gains never enlarge the bound") {
    BoundInputs b;
    double prev = ultimate_bound(gains2(100.0, 10.0), b);
    for (double scale : {2.0, 5.0, 10.0, 100.0}) {
        const double kappa = ultimate_bound(gains2(100.0 * scale, 10.0 * scale), b);
        CHECK(kappa <= prev);
        prev = kappa;
    }
    // The minimum gain entry is what matters for diagonal gains.
    PdGains mixed;
    mixed.kp = Vec(2);
    mixed.kp << 100.0, 1e6;
    mixed.kd = Vec(2);
    mixed.kd << 10.0, 1e6;
    CHECK(ultimate_bound(mixed, b) == doctest::Approx(ultimate_bound(gains2(100.0, 10.0), b)));
}

TEST_CASE("gain validation") {
    PdGains g;
    g.kp = Vec::Constant(2, 10.0);
    g.kd = Vec::Constant(1, 1.0);
    CHECK_THROWS_AS(g.validate(), ConfigError);  // size mismatch
    g.kd = Vec::Constant(2, 0.0);
    CHECK_THROWS_AS(g.validate(), ConfigError);  // non-positive
}

TEST_CASE("perfect information and Euler-consistent reference cancel exactly") {
    // With an oracle observer, no noise, and a trajectory generated by the
    // same Euler rule the plant uses, the feedforward matches the discrete
    // dynamics and the tracking error stays at numerical zero.
    SUBCASE("one-dof") {
        SimScenario scn = make_onedof_benchmark();
        scn.observer = ObserverSpec{};
        scn.observer.type = ObserverType::Oracle;
        scn.observer.name = "oracle";
        scn.disturbance[0].noise_std = 0.0;
        scn.meas_noise_std = Vec::Zero(1);
        scn.traj.euler_consistent = true;
        const Trace tr = run_closed_loop(scn);
        // The loop starts at rest while the reference starts moving, so allow
        // the initial PD transient to die out before checking.
        double worst = 0.0;
        for (long k = tr.length() / 2; k < tr.length(); ++k)
            worst = std::max(worst, std::abs(tr.x_true[k](2) - tr.theta_d[k](0)));
        CHECK(worst < 1e-6);
    }
    SUBCASE("two-link") {
        SimScenario scn = make_twolink_elastic_benchmark();
        scn.observer = ObserverSpec{};
        scn.observer.type = ObserverType::Oracle;
        scn.observer.name = "oracle";
        for (auto& d : scn.disturbance) d.noise_std = 0.0;
        scn.meas_noise_std = Vec::Zero(4);
        scn.traj.euler_consistent = true;
        const Trace tr = run_closed_loop(scn);
        double worst = 0.0;
        for (long k = tr.length() / 2; k < tr.length(); ++k)
            worst = std::max(worst, (tr.x_true[k].segment(2, 2) - tr.theta_d[k]).norm());
        CHECK(worst < 1e-6);
    }
}

TEST_CASE("controller reduces to the feedforward at zero error") {
    const TwoLinkParams leg = two_link_preset("exo-left-leg");
    DesiredTraj des;
    des.theta_d = Vec2(0.3, -0.2);
    des.thetadot_d = Vec2(0.1, 0.4);
    des.thetaddot_d = Vec2(-0.5, 0.2);
    Vec x_hat(6);
    x_hat << 1.5, -2.0, des.theta_d, des.thetadot_d;
    const Vec2 tau = augmented_pd(x_hat, des, gains2(5000.0, 100.0), leg);
    const TwoLinkTerms t = two_link_terms(des.theta_d, des.thetadot_d, leg);
    const Vec2 ff = t.M * des.thetaddot_d + t.C * des.thetadot_d + t.G;
    CHECK((tau - (ff - x_hat.head(2))).norm() < 1e-12);
}

TEST_CASE("one-dof controller compensates gravity and disturbance") {
    const OneDofParams p;
    DesiredTraj des;
    des.theta_d = Vec::Constant(1, 0.7);
    des.thetadot_d = Vec::Zero(1);
    des.thetaddot_d = Vec::Zero(1);
    Vec x_hat(3);
    x_hat << 4.0, 0.0, 0.7;  // [d, thetadot, theta] at the reference
    const double tau = one_dof_pd(x_hat, des, 100.0, 12.5, p);
    const double ff = p.stiffness * 0.7 + p.mass * p.g * std::sin(0.7);
    CHECK(tau == doctest::Approx(ff - 4.0).epsilon(1e-12));
}
