#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "dobkit/butterworth.hpp"
#include "dobkit/control.hpp"
#include "dobkit/observers.hpp"
#include "dobkit/rng.hpp"

namespace dobkit {

enum class PlantType { OneDof, TwoLink };
enum class ObserverType { Ekf, Imm, Mkc, Ndob, Oracle };
enum class DisturbanceKind { CoulombViscous, Stribeck, ImpulseTrain, ElasticPeriodic, Constant };

/// Parametric disturbance acting on one joint.
struct DisturbanceProfile {
    DisturbanceKind kind = DisturbanceKind::CoulombViscous;
    double noise_std = 0.0;

    // coulomb-viscous: coulomb*sgn(thetadot) + viscous*thetadot + w
    double coulomb = 20.0;
    double viscous = 0.5;

    // stribeck
    StribeckParams stribeck;

    // impulse-train: rectangular pulses
    double magnitude = 5.0;
    long width_steps = 50;
    long period_steps = 500;
    long start_step = 100;

    // elastic-periodic: saturated gait-synchronous sinusoid
    double amplitude = 10.0;
    double freq_hz = 0.3;
    double phase = 0.0;
    double cap = 14.7;  // 5-kg-equivalent force cap at a 0.3 m lever (N*m)

    // constant
    double constant_value = 0.0;
};

/// Deterministic part of the disturbance at step k; noise is added by the
/// caller so the statistical pieces stay testable in isolation.
double disturbance_signal(const DisturbanceProfile& profile, double thetadot, long k, double dt);

/// Full sample: signal term plus N(0, noise_std^2) drawn from rng.
double gen_disturbance(const DisturbanceProfile& profile, double thetadot, long k, double dt,
                       Rng& rng);

/// Desired trajectory: per-joint sinusoid theta_d = A sin(2 pi f t + phase).
/// With euler_consistent set, theta_d and thetadot_d are generated by Euler
/// integration of the analytic acceleration so the discrete feedforward
/// cancels exactly.
struct TrajectorySpec {
    Vec amplitude = Vec::Constant(1, 10.0);
    double freq_hz = 0.2;
    Vec phase = Vec::Zero(1);
    bool euler_consistent = false;

    DesiredTraj analytic_at(long k, double dt) const;
};

/// Which estimator closes the loop.
struct ObserverSpec {
    ObserverType type = ObserverType::Ekf;
    std::string name = "ekf";
    NoiseConfig noise;       // ekf / mkc
    ImmConfig imm;           // imm
    MkcConfig mkc;           // mkc bandwidths
    double ndob_gain = 50.0; // ndob
};

struct SimScenario {
    PlantType plant_type = PlantType::OneDof;
    OneDofParams one_dof;
    TwoLinkParams two_link;
    double dt = 0.01;
    bool rk4_truth = false;
    long horizon = 500;
    std::uint64_t seed = 1;

    TrajectorySpec traj;
    PdGains gains;
    ObserverSpec observer;
    std::vector<DisturbanceProfile> disturbance;  // one per joint
    Vec meas_noise_std;   // per measurement channel; empty = sqrt(diag(R))
    double torque_limit = 0.0;  // symmetric clamp, 0 disables

    Vec theta0;        // initial true configuration (defaults to zeros)
    Vec thetadot0;
    bool perfect_init = true;  // start the observer at the truth
    double p0_scale = 1e-2;    // initial covariance when filtering

    std::array<long, 2> window{300, 450};
    long burn_in = 0;

    // Test hook for the ultimate-bound study: with an Oracle observer and
    // l_e_inject > 0, the compensated disturbance is biased by a bounded
    // signal of that norm.
    double l_e_inject = 0.0;

    int joints() const { return plant_type == PlantType::OneDof ? 1 : 2; }
    void validate() const;
};

/// Per-step record of one closed-loop run.
struct Trace {
    double dt = 0.0;
    int n = 0, m = 0, p = 0;
    std::vector<Vec> x_true;      // posterior-aligned truth [d; s]
    std::vector<Vec> y;
    std::vector<Vec> x_hat;
    std::vector<Vec> d_hat;
    std::vector<Vec> tau;
    std::vector<Vec> mu;          // IMM only (empty otherwise)
    std::vector<int> iters;       // MKC only (zeros otherwise)
    std::vector<Vec> theta_d;
    std::vector<Vec> thetadot_d;
    std::vector<Vec> l_e;         // lumped-error diagnostic
    std::vector<double> step_time;  // observer step wall seconds
    long degenerate_count = 0;

    long length() const { return static_cast<long>(x_true.size()); }
};

Trace run_closed_loop(const SimScenario& scn);

/// Table-style RMSE columns computed from one trace.
struct RmseSet {
    std::vector<std::string> names;
    Vec values;
};

RmseSet tracking_metrics(const Trace& trace, long burn_in = 0);

/// Monte-Carlo summary: bias/variance curves over the disturbance channels,
/// window averages, RMSE table rows, torque SNR, timing.
struct McReport {
    long runs = 0;
    std::array<long, 2> window{0, 0};
    Mat bias;    // p x horizon
    Mat stddev;  // p x horizon
    Mat mse;     // p x horizon, computed independently of bias/stddev
    double bar_bias2 = 0.0;
    double bar_var = 0.0;
    std::vector<std::string> columns;
    Vec rmse_mean;
    Vec rmse_std;
    Vec snr;                       // per joint, mean over runs
    double mean_step_time = 0.0;   // excluded from the determinism contract
    long degenerate_count = 0;
};

/// K independent seeded runs (seed = base_seed + run index). Worker count
/// comes from the argument, or DOBKIT_THREADS, or the hardware default;
/// results are identical for any worker count.
McReport monte_carlo(const SimScenario& scn, long runs, std::uint64_t base_seed, int threads = 0);

int resolve_thread_count(int requested);

}  // namespace dobkit
