#include "dobkit/simlab.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <thread>

#include "dobkit/plant.hpp"

namespace dobkit {

namespace {

double sgn(double v) { return (v > 0.0) - (v < 0.0); }

void require(bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
}

}  // namespace

double disturbance_signal(const DisturbanceProfile& profile, double thetadot, long k, double dt) {
    switch (profile.kind) {
        case DisturbanceKind::CoulombViscous:
            return profile.coulomb * sgn(thetadot) + profile.viscous * thetadot;
        case DisturbanceKind::Stribeck:
            return stribeck_friction(thetadot, profile.stribeck);
        case DisturbanceKind::ImpulseTrain: {
            if (k < profile.start_step) return 0.0;
            const long phase = (k - profile.start_step) % profile.period_steps;
            return phase < profile.width_steps ? profile.magnitude : 0.0;
        }
        case DisturbanceKind::ElasticPeriodic: {
            const double v =
                profile.amplitude *
                std::sin(2.0 * M_PI * profile.freq_hz * static_cast<double>(k) * dt +
                         profile.phase);
            return std::clamp(v, -profile.cap, profile.cap);
        }
        case DisturbanceKind::Constant:
            return profile.constant_value;
    }
    return 0.0;
}

double gen_disturbance(const DisturbanceProfile& profile, double thetadot, long k, double dt,
                       Rng& rng) {
    double d = disturbance_signal(profile, thetadot, k, dt);
    if (profile.noise_std > 0.0) d += rng.normal(0.0, profile.noise_std);
    return d;
}

DesiredTraj TrajectorySpec::analytic_at(long k, double dt) const {
    const double w = 2.0 * M_PI * freq_hz;
    const double t = static_cast<double>(k) * dt;
    const auto nj = amplitude.size();
    DesiredTraj des;
    des.theta_d.resize(nj);
    des.thetadot_d.resize(nj);
    des.thetaddot_d.resize(nj);
    for (Eigen::Index j = 0; j < nj; ++j) {
        const double a = w * t + phase(j);
        des.theta_d(j) = amplitude(j) * std::sin(a);
        des.thetadot_d(j) = amplitude(j) * w * std::cos(a);
        des.thetaddot_d(j) = -amplitude(j) * w * w * std::sin(a);
    }
    return des;
}

void SimScenario::validate() const {
    require(dt > 0.0, "scenario: dt must be positive");
    require(horizon >= 1, "scenario: horizon must be >= 1");
    const int nj = joints();
    require(static_cast<int>(disturbance.size()) == nj,
            "scenario: one disturbance profile per joint required");
    require(gains.kp.size() == nj && gains.kd.size() == nj, "scenario: gains size mismatch");
    require(traj.amplitude.size() == nj && traj.phase.size() == nj,
            "scenario: trajectory size mismatch");
    require(window[0] >= 0 && window[0] <= window[1], "scenario: bad window");
    if (observer.type == ObserverType::Ndob)
        require(plant_type == PlantType::TwoLink, "scenario: NDOB requires the two-link plant");
    gains.validate();
    for (const auto& p : disturbance) require(p.noise_std >= 0.0, "scenario: negative noise_std");
}

namespace {

PlantModel build_plant(const SimScenario& scn) {
    return scn.plant_type == PlantType::OneDof ? make_one_dof_plant(scn.one_dof, scn.dt)
                                               : make_exo_plant(scn.two_link, scn.dt);
}

// Feedforward torque evaluated at a given configuration, for the lumped-error
// diagnostic delta = ff(estimate) - ff(truth).
Vec feedforward(const SimScenario& scn, const Vec& theta, const Vec& thetadot,
                const DesiredTraj& des) {
    if (scn.plant_type == PlantType::OneDof) {
        const OneDofParams& p = scn.one_dof;
        Vec u(1);
        u(0) = p.inertia * des.thetaddot_d(0) + p.damping * des.thetadot_d(0) +
               p.stiffness * des.theta_d(0) + p.mass * p.g * std::sin(theta(0));
        return u;
    }
    const TwoLinkTerms t = two_link_terms(theta, thetadot, scn.two_link);
    return t.M * Vec2(des.thetaddot_d) + t.C * Vec2(des.thetadot_d) + t.G;
}

struct ObserverRuntime {
    ObserverType type;
    AugmentedState ekf;                // ekf / mkc
    std::vector<AugmentedState> bank;  // imm
    Vec mu;
    NdobState ndob;
};

}  // namespace

Trace run_closed_loop(const SimScenario& scn) {
    scn.validate();
    const PlantModel model = build_plant(scn);
    const int nj = scn.joints();
    const int n = model.n();
    const int m = model.m();
    const int p = model.dist_dim;

    const ObserverSpec& obs = scn.observer;
    switch (obs.type) {
        case ObserverType::Ekf: obs.noise.validate(model); break;
        case ObserverType::Mkc: obs.noise.validate(model); obs.mkc.validate(model); break;
        case ObserverType::Imm: obs.imm.validate(model); break;
        default: break;
    }

    Vec noise_std = scn.meas_noise_std;
    if (noise_std.size() == 0) {
        if (obs.type == ObserverType::Ekf || obs.type == ObserverType::Mkc)
            noise_std = obs.noise.R.diagonal().cwiseSqrt();
        else if (obs.type == ObserverType::Imm)
            noise_std = obs.imm.bank[0].R.diagonal().cwiseSqrt();
        else
            noise_std = Vec::Zero(m);
    }
    require(noise_std.size() == m, "scenario: meas_noise_std size mismatch");

    Rng rng(scn.seed);

    // Truth.
    Vec theta = scn.theta0.size() ? scn.theta0 : Vec::Zero(nj);
    Vec thetadot = scn.thetadot0.size() ? scn.thetadot0 : Vec::Zero(nj);

    // Desired trajectory state (Euler-consistent mode integrates it forward).
    DesiredTraj des = scn.traj.analytic_at(0, scn.dt);

    // Observer state.
    ObserverRuntime rt;
    rt.type = obs.type;
    {
        Vec x0 = Vec::Zero(n);
        if (scn.perfect_init) {
            if (scn.plant_type == PlantType::OneDof) {
                x0(1) = thetadot(0);
                x0(2) = theta(0);
            } else {
                x0.segment(2, 2) = theta;
                x0.segment(4, 2) = thetadot;
            }
        }
        AugmentedState s0{x0, scn.p0_scale * Mat::Identity(n, n), 0};
        rt.ekf = s0;
        if (obs.type == ObserverType::Imm) {
            rt.bank.assign(obs.imm.bank.size(), s0);
            rt.mu = obs.imm.mu0;
        }
        rt.ndob.c = obs.ndob_gain;
    }
    Vec x_hat = rt.ekf.x;  // current estimate used by the controller
    if (obs.type == ObserverType::Oracle) {
        x_hat = Vec::Zero(n);
        if (scn.plant_type == PlantType::OneDof) {
            x_hat(1) = thetadot(0);
            x_hat(2) = theta(0);
        } else {
            x_hat.segment(2, 2) = theta;
            x_hat.segment(4, 2) = thetadot;
        }
    }

    Trace trace;
    trace.dt = scn.dt;
    trace.n = n;
    trace.m = m;
    trace.p = p;
    trace.x_true.reserve(scn.horizon);

    try {
        for (long k = 0; k < scn.horizon; ++k) {
            // Disturbance applied over [k, k+1).
            Vec d(nj);
            for (int j = 0; j < nj; ++j)
                d(j) = gen_disturbance(scn.disturbance[j], thetadot(j), k, scn.dt, rng);

            // Oracle sees the truth; the l_e_inject hook biases its
            // compensation by a bounded signal.
            if (obs.type == ObserverType::Oracle) {
                x_hat.segment(0, p) = d;
                if (scn.l_e_inject > 0.0) {
                    Vec b(p);
                    for (int j = 0; j < p; ++j)
                        b(j) = std::sin(1.3 * static_cast<double>(k) * scn.dt + 0.7 * j);
                    b *= scn.l_e_inject / std::max(b.norm(), 1e-12);
                    x_hat.segment(0, p) += b;
                }
                if (scn.plant_type == PlantType::OneDof) {
                    x_hat(1) = thetadot(0);
                    x_hat(2) = theta(0);
                } else {
                    x_hat.segment(2, 2) = theta;
                    x_hat.segment(4, 2) = thetadot;
                }
            }

            // Control from the current estimate.
            Vec tau(nj);
            if (scn.plant_type == PlantType::OneDof)
                tau(0) = one_dof_pd(x_hat, des, scn.gains.kp(0), scn.gains.kd(0), scn.one_dof);
            else
                tau = augmented_pd(x_hat, des, scn.gains, scn.two_link);
            if (scn.torque_limit > 0.0)
                tau = tau.cwiseMax(-scn.torque_limit).cwiseMin(scn.torque_limit);

            // Lumped-error diagnostic at control time (Eq. of the closed loop).
            Vec l_e;
            {
                Vec theta_hat, thetadot_hat, d_hat_now;
                if (scn.plant_type == PlantType::OneDof) {
                    theta_hat = x_hat.segment(2, 1);
                    thetadot_hat = x_hat.segment(1, 1);
                    d_hat_now = x_hat.segment(0, 1);
                } else {
                    theta_hat = x_hat.segment(2, 2);
                    thetadot_hat = x_hat.segment(4, 2);
                    d_hat_now = x_hat.segment(0, 2);
                }
                const Vec delta = feedforward(scn, theta_hat, thetadot_hat, des) -
                                  feedforward(scn, theta, thetadot, des);
                l_e = -scn.gains.kd.cwiseProduct(thetadot - thetadot_hat) -
                      scn.gains.kp.cwiseProduct(theta - theta_hat) - (d_hat_now - d) - delta;
            }

            // Plant truth step.
            if (scn.plant_type == PlantType::OneDof) {
                Vec xt(3);
                xt << d(0), thetadot(0), theta(0);
                const Vec xn = one_dof_transition(xt, tau(0), scn.dt, scn.one_dof);
                thetadot(0) = xn(1);
                theta(0) = xn(2);
            } else {
                Vec xt(6);
                xt << d, theta, thetadot;
                const Vec xn = scn.rk4_truth
                                   ? exo_transition_rk4(xt, Vec2(tau), scn.dt, scn.two_link)
                                   : exo_transition(xt, Vec2(tau), scn.dt, scn.two_link);
                theta = xn.segment(2, 2);
                thetadot = xn.segment(4, 2);
            }

            Vec x_true(n);
            if (scn.plant_type == PlantType::OneDof)
                x_true << d(0), thetadot(0), theta(0);
            else
                x_true << d, theta, thetadot;

            // Measurement.
            Vec y = model.H * x_true;
            for (int i = 0; i < m; ++i)
                if (noise_std(i) > 0.0) y(i) += rng.normal(0.0, noise_std(i));

            // Observer update.
            int iters = 0;
            Vec mu_rec;
            const auto t0 = std::chrono::steady_clock::now();
            switch (obs.type) {
                case ObserverType::Ekf:
                    rt.ekf = ekf_dob_step(rt.ekf, model, tau, y, obs.noise);
                    x_hat = rt.ekf.x;
                    break;
                case ObserverType::Mkc: {
                    const MkcStepResult r = mkcekf_dob_step(rt.ekf, model, tau, y, obs.noise,
                                                            obs.mkc);
                    rt.ekf = r.state;
                    x_hat = rt.ekf.x;
                    iters = r.iters;
                    break;
                }
                case ObserverType::Imm: {
                    ImmStepResult r = immekf_dob_step(rt.bank, rt.mu, model, tau, y, obs.imm);
                    rt.bank = std::move(r.bank);
                    rt.mu = r.mu;
                    x_hat = r.fused.x;
                    rt.ekf = r.fused;
                    if (r.degenerate) ++trace.degenerate_count;
                    mu_rec = rt.mu;
                    break;
                }
                case ObserverType::Ndob: {
                    const Vec2 th_m(y(0), y(1));
                    const Vec2 thd_m(y(2), y(3));
                    auto [nd, d_hat2] = ndob_step(rt.ndob, th_m, thd_m, Vec2(tau), scn.two_link,
                                                  scn.dt);
                    rt.ndob = nd;
                    x_hat.segment(0, 2) = d_hat2;
                    x_hat.segment(2, 2) = th_m;
                    x_hat.segment(4, 2) = thd_m;
                    break;
                }
                case ObserverType::Oracle:
                    x_hat.segment(0, p) = d;
                    if (scn.plant_type == PlantType::OneDof) {
                        x_hat(1) = thetadot(0);
                        x_hat(2) = theta(0);
                    } else {
                        x_hat.segment(2, 2) = theta;
                        x_hat.segment(4, 2) = thetadot;
                    }
                    break;
            }
            const auto t1 = std::chrono::steady_clock::now();

            // Advance the desired trajectory.
            DesiredTraj des_next;
            if (scn.traj.euler_consistent) {
                des_next = des;
                des_next.theta_d = des.theta_d + scn.dt * des.thetadot_d;
                des_next.thetadot_d = des.thetadot_d + scn.dt * des.thetaddot_d;
                des_next.thetaddot_d = scn.traj.analytic_at(k + 1, scn.dt).thetaddot_d;
            } else {
                des_next = scn.traj.analytic_at(k + 1, scn.dt);
            }

            trace.x_true.push_back(x_true);
            trace.y.push_back(y);
            trace.x_hat.push_back(x_hat);
            trace.d_hat.push_back(x_hat.segment(0, p));
            trace.tau.push_back(tau);
            if (mu_rec.size()) trace.mu.push_back(mu_rec);
            trace.iters.push_back(iters);
            trace.theta_d.push_back(des_next.theta_d);
            trace.thetadot_d.push_back(des_next.thetadot_d);
            trace.l_e.push_back(l_e);
            trace.step_time.push_back(std::chrono::duration<double>(t1 - t0).count());

            des = des_next;
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::runtime_error& e) {
        throw RunError(trace.length(), e.what());
    }
    return trace;
}

RmseSet tracking_metrics(const Trace& trace, long burn_in) {
    const long N = trace.length();
    require(N > burn_in, "tracking_metrics: burn-in exceeds trace length");
    const long span = N - burn_in;
    const int nj = trace.p;

    RmseSet out;
    Vec acc = Vec::Zero(trace.n + 2 * nj);
    for (long k = burn_in; k < N; ++k) {
        const Vec err = trace.x_true[k] - trace.x_hat[k];
        for (int i = 0; i < trace.n; ++i) acc(i) += err(i) * err(i);
        const Vec theta = trace.p == 1 ? trace.x_true[k].segment(2, 1)
                                       : trace.x_true[k].segment(2, 2);
        const Vec thetadot = trace.p == 1 ? trace.x_true[k].segment(1, 1)
                                          : trace.x_true[k].segment(4, 2);
        for (int j = 0; j < nj; ++j) {
            const double te = trace.theta_d[k](j) - theta(j);
            const double ve = trace.thetadot_d[k](j) - thetadot(j);
            acc(trace.n + j) += te * te;
            acc(trace.n + nj + j) += ve * ve;
        }
    }
    out.values = (acc / static_cast<double>(span)).cwiseSqrt();
    for (int i = 0; i < trace.n; ++i) out.names.push_back("rmse_x" + std::to_string(i + 1));
    for (int j = 0; j < nj; ++j)
        out.names.push_back(nj == 1 ? "rmse_track_theta"
                                    : "rmse_track_theta" + std::to_string(j + 1));
    for (int j = 0; j < nj; ++j)
        out.names.push_back(nj == 1 ? "rmse_track_thetadot"
                                    : "rmse_track_thetadot" + std::to_string(j + 1));
    return out;
}

int resolve_thread_count(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("DOBKIT_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw ? static_cast<int>(hw) : 1;
}

McReport monte_carlo(const SimScenario& scn, long runs, std::uint64_t base_seed, int threads) {
    require(runs >= 2, "monte_carlo: K must be >= 2");
    scn.validate();
    const int p = scn.joints();
    const long N = scn.horizon;

    struct RunResult {
        Mat d_err;  // p x N
        Vec rmse;
        Vec snr;
        double mean_step_time = 0.0;
        long degenerate = 0;
    };
    std::vector<RunResult> results(static_cast<std::size_t>(runs));
    std::vector<std::string> columns;

    std::atomic<long> next{0};
    std::exception_ptr first_error;
    std::mutex err_mutex;

    auto worker = [&]() {
        for (;;) {
            const long i = next.fetch_add(1);
            if (i >= runs) return;
            try {
                SimScenario run_scn = scn;
                run_scn.seed = base_seed + static_cast<std::uint64_t>(i);
                const Trace trace = run_closed_loop(run_scn);
                RunResult r;
                r.d_err.resize(p, N);
                for (long k = 0; k < N; ++k)
                    r.d_err.col(k) = trace.x_true[k].segment(0, p) - trace.d_hat[k];
                const RmseSet rmse = tracking_metrics(trace, scn.burn_in);
                r.rmse = rmse.values;
                if (i == 0) columns = rmse.names;
                r.snr.resize(p);
                for (int j = 0; j < p; ++j) {
                    std::vector<double> series(static_cast<std::size_t>(N));
                    for (long k = 0; k < N; ++k) series[static_cast<std::size_t>(k)] =
                        trace.tau[k](j);
                    r.snr(j) = N > 36 ? snr_metric(series) : 0.0;
                }
                double t = 0.0;
                for (double s : trace.step_time) t += s;
                r.mean_step_time = t / static_cast<double>(N);
                r.degenerate = trace.degenerate_count;
                results[static_cast<std::size_t>(i)] = std::move(r);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!first_error) first_error = std::current_exception();
                next.store(runs);
                return;
            }
        }
    };

    const int nthreads = std::min<long>(resolve_thread_count(threads), runs);
    if (nthreads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(nthreads));
        for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    McReport rep;
    rep.runs = runs;
    rep.window = scn.window;
    rep.bias = Mat::Zero(p, N);
    rep.stddev = Mat::Zero(p, N);
    rep.mse = Mat::Zero(p, N);

    for (const auto& r : results) rep.bias += r.d_err;
    rep.bias /= static_cast<double>(runs);
    for (const auto& r : results) {
        rep.stddev += (r.d_err - rep.bias).cwiseAbs2();
        rep.mse += r.d_err.cwiseAbs2();
    }
    rep.stddev = (rep.stddev / static_cast<double>(runs)).cwiseSqrt();
    rep.mse /= static_cast<double>(runs);

    const long m1 = std::min(scn.window[0], N - 1);
    const long m2 = std::min(scn.window[1], N - 1);
    double b2 = 0.0, v2 = 0.0;
    for (long k = m1; k <= m2; ++k)
        for (int j = 0; j < p; ++j) {
            b2 += rep.bias(j, k) * rep.bias(j, k);
            v2 += rep.stddev(j, k) * rep.stddev(j, k);
        }
    const double wlen = static_cast<double>((m2 - m1 + 1) * p);
    rep.bar_bias2 = b2 / wlen;
    rep.bar_var = v2 / wlen;

    rep.columns = columns;
    const Eigen::Index ncols = results[0].rmse.size();
    rep.rmse_mean = Vec::Zero(ncols);
    rep.rmse_std = Vec::Zero(ncols);
    rep.snr = Vec::Zero(p);
    for (const auto& r : results) {
        rep.rmse_mean += r.rmse;
        rep.snr += r.snr;
        rep.mean_step_time += r.mean_step_time;
        rep.degenerate_count += r.degenerate;
    }
    rep.rmse_mean /= static_cast<double>(runs);
    rep.snr /= static_cast<double>(runs);
    rep.mean_step_time /= static_cast<double>(runs);
    for (const auto& r : results) rep.rmse_std += (r.rmse - rep.rmse_mean).cwiseAbs2();
    rep.rmse_std = (rep.rmse_std / static_cast<double>(runs)).cwiseSqrt();
    return rep;
}

}  // namespace dobkit
