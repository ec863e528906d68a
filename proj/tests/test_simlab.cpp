#include <doctest.h>

#include <cmath>
#include <sstream>

#include "dobkit/config.hpp"
#include "dobkit/simlab.hpp"

using namespace dobkit;

TEST_CASE("deterministic disturbance signals") {
    DisturbanceProfile cv;
    cv.kind = DisturbanceKind::CoulombViscous;
    cv.coulomb = 20.0;
    cv.viscous = 0.5;
    CHECK(disturbance_signal(cv, 2.0, 0, 0.01) == doctest::Approx(21.0).epsilon(1e-12));
    CHECK(disturbance_signal(cv, -2.0, 0, 0.01) == doctest::Approx(-21.0).epsilon(1e-12));
    CHECK(disturbance_signal(cv, 0.0, 0, 0.01) == 0.0);

    DisturbanceProfile pulse;
    pulse.kind = DisturbanceKind::ImpulseTrain;
    pulse.magnitude = 5.0;
    pulse.width_steps = 10;
    pulse.period_steps = 100;
    pulse.start_step = 50;
    CHECK(disturbance_signal(pulse, 0.0, 49, 0.01) == 0.0);
    CHECK(disturbance_signal(pulse, 0.0, 50, 0.01) == 5.0);
    CHECK(disturbance_signal(pulse, 0.0, 59, 0.01) == 5.0);
    CHECK(disturbance_signal(pulse, 0.0, 60, 0.01) == 0.0);
    CHECK(disturbance_signal(pulse, 0.0, 150, 0.01) == 5.0);

    DisturbanceProfile el;
    el.kind = DisturbanceKind::ElasticPeriodic;
    el.amplitude = 20.0;
    el.freq_hz = 0.3;
    el.phase = 0.0;
    el.cap = 14.7;
    double peak = 0.0;
    for (long k = 0; k < 2000; ++k)
        peak = std::max(peak, std::abs(disturbance_signal(el, 0.0, k, 0.005)));
    CHECK(peak <= 14.7 + 1e-12);
    CHECK(peak == doctest::Approx(14.7).epsilon(1e-6));  // the cap actually binds

    DisturbanceProfile cst;
    cst.kind = DisturbanceKind::Constant;
    cst.constant_value = -3.0;
    CHECK(disturbance_signal(cst, 1.0, 7, 0.01) == -3.0);
}

TEST_CASE("trace has one record per step") {
    SimScenario scn = make_onedof_benchmark();
    scn.horizon = 123;
    scn.window = {10, 100};
    const Trace tr = run_closed_loop(scn);
    CHECK(tr.length() == 123);
    CHECK(tr.n == 3);
    CHECK(tr.m == 1);
    CHECK(tr.p == 1);
    CHECK(tr.mu.empty());  // not an IMM run
}

TEST_CASE("identical scenarios give identical traces") {
    const SimScenario scn = make_onedof_benchmark();
    const Trace a = run_closed_loop(scn);
    const Trace b = run_closed_loop(scn);
    REQUIRE(a.length() == b.length());
    for (long k = 0; k < a.length(); ++k) {
        CHECK(a.x_true[k] == b.x_true[k]);
        CHECK(a.x_hat[k] == b.x_hat[k]);
        CHECK(a.tau[k] == b.tau[k]);
        CHECK(a.y[k] == b.y[k]);
    }
}

TEST_CASE("changing the seed changes the realization") {
    SimScenario scn = make_onedof_benchmark();
    const Trace a = run_closed_loop(scn);
    scn.seed = 2;
    const Trace b = run_closed_loop(scn);
    double diff = 0.0;
    for (long k = 0; k < a.length(); ++k) diff += (a.x_true[k] - b.x_true[k]).norm();
    CHECK(diff > 0.0);
}

TEST_CASE("tracking metric names and values") {
    SimScenario scn = make_onedof_benchmark();
    const Trace tr = run_closed_loop(scn);
    const RmseSet rmse = tracking_metrics(tr);
    REQUIRE(rmse.names.size() == 5);
    CHECK(rmse.names[0] == "rmse_x1");
    CHECK(rmse.names[1] == "rmse_x2");
    CHECK(rmse.names[2] == "rmse_x3");
    CHECK(rmse.names[3] == "rmse_track_theta");
    CHECK(rmse.names[4] == "rmse_track_thetadot");

    // Cross-check rmse_x1 against a direct computation.
    double acc = 0.0;
    for (long k = 0; k < tr.length(); ++k) {
        const double e = tr.x_true[k](0) - tr.x_hat[k](0);
        acc += e * e;
    }
    CHECK(rmse.values(0) == doctest::Approx(std::sqrt(acc / static_cast<double>(tr.length()))));

    SimScenario two = make_twolink_elastic_benchmark();
    two.horizon = 300;
    two.window = {50, 250};
    const RmseSet r2 = tracking_metrics(run_closed_loop(two));
    REQUIRE(r2.names.size() == 10);
    CHECK(r2.names[0] == "rmse_x1");
    CHECK(r2.names[6] == "rmse_track_theta1");
    CHECK(r2.names[7] == "rmse_track_theta2");
    CHECK(r2.names[8] == "rmse_track_thetadot1");
    CHECK(r2.names[9] == "rmse_track_thetadot2");
}

TEST_CASE("oracle estimates have zero bias and zero spread") {
    SimScenario scn = make_onedof_benchmark();
    scn.observer = ObserverSpec{};
    scn.observer.type = ObserverType::Oracle;
    scn.observer.name = "oracle";
    const McReport rep = monte_carlo(scn, 8, 1000);
    CHECK(rep.bar_bias2 == 0.0);
    CHECK(rep.bar_var == 0.0);
}

TEST_CASE("noise-free runs have zero spread but honest bias") {
    SimScenario scn = make_onedof_benchmark();
    scn.disturbance[0].noise_std = 0.0;
    scn.meas_noise_std = Vec::Zero(1);
    const McReport rep = monte_carlo(scn, 4, 1000);
    CHECK(rep.bar_var == 0.0);
    CHECK(rep.bar_bias2 > 0.0);
}

TEST_CASE("the MSE curve equals squared bias plus variance") {
    SimScenario scn = make_onedof_benchmark();
    const McReport rep = monte_carlo(scn, 16, 1000);
    REQUIRE(rep.mse.rows() == rep.bias.rows());
    double worst = 0.0;
    for (Eigen::Index r = 0; r < rep.mse.rows(); ++r)
        for (Eigen::Index c = 0; c < rep.mse.cols(); ++c) {
            const double recon =
                rep.bias(r, c) * rep.bias(r, c) + rep.stddev(r, c) * rep.stddev(r, c);
            worst = std::max(worst, std::abs(rep.mse(r, c) - recon));
        }
    CHECK(worst < 1e-10);
}

TEST_CASE("reports are identical for any worker count") {
    const SimScenario scn = make_onedof_benchmark();
    const McReport a = monte_carlo(scn, 12, 1000, 1);
    const McReport b = monte_carlo(scn, 12, 1000, 4);
    CHECK(a.bias == b.bias);
    CHECK(a.stddev == b.stddev);
    CHECK(a.mse == b.mse);
    CHECK(a.bar_bias2 == b.bar_bias2);
    CHECK(a.bar_var == b.bar_var);
    CHECK(a.rmse_mean == b.rmse_mean);
    CHECK(a.rmse_std == b.rmse_std);
    CHECK(a.snr == b.snr);
}

TEST_CASE("Monte Carlo needs at least two runs") {
    const SimScenario scn = make_onedof_benchmark();
    CHECK_THROWS_AS(monte_carlo(scn, 1, 1000), ConfigError);
}

TEST_CASE("scenario validation") {
    SimScenario scn = make_onedof_benchmark();
    scn.window = {450, 300};  // reversed
    CHECK_THROWS_AS(scn.validate(), ConfigError);
    scn = make_onedof_benchmark();
    scn.observer.type = ObserverType::Ndob;  // needs the two-link plant
    CHECK_THROWS_AS(scn.validate(), ConfigError);
    scn = make_onedof_benchmark();
    scn.horizon = 0;
    CHECK_THROWS_AS(scn.validate(), ConfigError);
}

TEST_CASE("requested thread counts are honored") {
    CHECK(resolve_thread_count(3) == 3);
    CHECK(resolve_thread_count(1) == 1);
    CHECK(resolve_thread_count(0) >= 1);
}

TEST_CASE("runtime failures carry the failing step") {
    SimScenario scn = make_onedof_benchmark();
    // A disturbance near the double range overflows the truth propagation.
    scn.disturbance[0].kind = DisturbanceKind::Constant;
    scn.disturbance[0].constant_value = 1e308;
    scn.disturbance[0].noise_std = 0.0;
    bool threw = false;
    try {
        run_closed_loop(scn);
    } catch (const RunError& e) {
        threw = true;
        CHECK(std::string(e.what()).find("step ") == 0);
        CHECK(e.step >= 0);
    }
    CHECK(threw);
}
