#include "dobkit/config.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>

#include <nlohmann/json.hpp>

namespace dobkit {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& msg) { throw ConfigError(msg); }

double json_bandwidth(const json& v) {
    if (v.is_string()) {
        if (v.get<std::string>() == "inf") return kInfiniteBandwidth;
        fail("bandwidth must be a number or \"inf\"");
    }
    return v.get<double>();
}

Vec json_vec(const json& v, int expected = -1) {
    Vec out;
    if (v.is_number()) {
        out = Vec::Constant(expected > 0 ? expected : 1, v.get<double>());
    } else if (v.is_array()) {
        out.resize(static_cast<Eigen::Index>(v.size()));
        for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) =
            json_bandwidth(v[i]);
    } else {
        fail("expected number or array");
    }
    if (expected > 0 && out.size() != expected)
        fail("vector has size " + std::to_string(out.size()) + ", expected " +
             std::to_string(expected));
    return out;
}

Mat json_mat(const json& v) {
    if (!v.is_array() || v.empty() || !v[0].is_array()) fail("expected a matrix (array of rows)");
    const auto rows = static_cast<Eigen::Index>(v.size());
    const auto cols = static_cast<Eigen::Index>(v[0].size());
    Mat out(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        if (static_cast<Eigen::Index>(v[i].size()) != cols) fail("ragged matrix");
        for (Eigen::Index j = 0; j < cols; ++j) out(i, j) = v[i][j].get<double>();
    }
    return out;
}

NoiseConfig noise_from_json(const json& j, int p, int s, int m) {
    NoiseConfig nc;
    nc.Qd = json_vec(j.at("q_d"), p).asDiagonal();
    nc.Qs = json_vec(j.at("q_s"), s).asDiagonal();
    nc.R = json_vec(j.at("r"), m).asDiagonal();
    nc.eta = j.value("eta", 1.0);
    return nc;
}

DisturbanceProfile profile_from_json(const json& j) {
    DisturbanceProfile p;
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "coulomb-viscous") {
        p.kind = DisturbanceKind::CoulombViscous;
        p.coulomb = j.value("coulomb", 20.0);
        p.viscous = j.value("viscous", 0.5);
    } else if (kind == "stribeck") {
        p.kind = DisturbanceKind::Stribeck;
        p.stribeck.tau_c = j.at("tau_c").get<double>();
        p.stribeck.tau_s = j.at("tau_s").get<double>();
        p.stribeck.thetadot_s = j.at("thetadot_s").get<double>();
        p.stribeck.eta_v = j.at("eta_v").get<double>();
        p.stribeck.validate();
    } else if (kind == "impulse-train") {
        p.kind = DisturbanceKind::ImpulseTrain;
        p.magnitude = j.value("magnitude", 5.0);
        p.width_steps = j.value("width_steps", 50L);
        p.period_steps = j.value("period_steps", 500L);
        p.start_step = j.value("start_step", 100L);
    } else if (kind == "elastic-periodic") {
        p.kind = DisturbanceKind::ElasticPeriodic;
        p.amplitude = j.value("amplitude", 10.0);
        p.freq_hz = j.value("freq_hz", 0.3);
        p.phase = j.value("phase", 0.0);
        p.cap = j.value("cap", 14.7);
    } else if (kind == "constant") {
        p.kind = DisturbanceKind::Constant;
        p.constant_value = j.value("value", 0.0);
    } else {
        fail("unknown disturbance kind: " + kind);
    }
    p.noise_std = j.value("noise_std", 0.0);
    return p;
}

void dims_of(const SimScenario& scn, int& p, int& s, int& m) {
    if (scn.plant_type == PlantType::OneDof) {
        p = 1;
        s = 2;
        m = 1;
    } else {
        p = 2;
        s = 4;
        m = 4;
    }
}

}  // namespace

TwoLinkParams two_link_preset(const std::string& name) {
    if (name != "exo-left-leg") fail("unknown two-link preset: " + name);
    TwoLinkParams p;
    p.X1 = 3.746;
    p.Y1 = 0.01;
    p.J1 = 1.671;
    p.X2 = 0.592;
    p.Y2 = 0.01;
    p.J2 = 0.549;
    p.l1 = 0.40;
    p.g = 9.81;
    return p;
}

StribeckParams stribeck_preset(const std::string& name, int joint) {
    if (name != "exo-left-leg") fail("unknown friction preset: " + name);
    StribeckParams p;
    if (joint == 0) {  // hip
        p.tau_c = 9.964;
        p.tau_s = 6.141;
        p.thetadot_s = 19.311;
        p.eta_v = 3.967;
    } else {  // knee
        p.tau_c = 2.582;
        p.tau_s = 6.216;
        p.thetadot_s = 2.886;
        p.eta_v = 6.495;
    }
    return p;
}

ObserverSpec observer_from_json(const json& j, const SimScenario& scn) {
    int p, s, m;
    dims_of(scn, p, s, m);
    ObserverSpec spec;
    const std::string type = j.at("type").get<std::string>();
    spec.name = j.value("name", type);
    if (type == "ekf") {
        spec.type = ObserverType::Ekf;
        spec.noise = noise_from_json(j, p, s, m);
    } else if (type == "mkc") {
        spec.type = ObserverType::Mkc;
        spec.noise = noise_from_json(j, p, s, m);
        spec.mkc.sigma_d = json_vec(j.at("sigma_d"), p);
        spec.mkc.sigma_s = j.contains("sigma_s") ? json_vec(j.at("sigma_s"), s)
                                                 : Vec::Constant(s, kInfiniteBandwidth);
        spec.mkc.sigma_r = j.contains("sigma_r") ? json_vec(j.at("sigma_r"), m)
                                                 : Vec::Constant(m, kInfiniteBandwidth);
        spec.mkc.eps_fp = j.value("eps_fp", 1e-6);
        spec.mkc.max_iter = j.value("max_iter", 20);
    } else if (type == "imm") {
        spec.type = ObserverType::Imm;
        if (!j.contains("bank") || !j.at("bank").is_array() || j.at("bank").empty())
            fail("imm observer requires a non-empty bank");
        for (const auto& b : j.at("bank")) spec.imm.bank.push_back(noise_from_json(b, p, s, m));
        spec.imm.markov = json_mat(j.at("markov"));
        const auto nb = static_cast<Eigen::Index>(spec.imm.bank.size());
        spec.imm.mu0 = j.contains("mu0") ? json_vec(j.at("mu0"), static_cast<int>(nb))
                                         : Vec::Constant(nb, 1.0 / static_cast<double>(nb));
    } else if (type == "ndob") {
        spec.type = ObserverType::Ndob;
        spec.ndob_gain = j.value("c", 50.0);
    } else if (type == "oracle") {
        spec.type = ObserverType::Oracle;
    } else {
        fail("unknown observer type: " + type);
    }
    return spec;
}

SimScenario scenario_from_json(const json& j) {
    SimScenario scn;
    const json& plant = j.at("plant");
    const std::string type = plant.at("type").get<std::string>();
    if (type == "one-dof") {
        scn.plant_type = PlantType::OneDof;
        if (plant.contains("params")) {
            const json& p = plant.at("params");
            scn.one_dof.inertia = p.value("I", scn.one_dof.inertia);
            scn.one_dof.mass = p.value("m", scn.one_dof.mass);
            scn.one_dof.stiffness = p.value("k", scn.one_dof.stiffness);
            scn.one_dof.damping = p.value("b", scn.one_dof.damping);
            scn.one_dof.length = p.value("l", scn.one_dof.length);
            scn.one_dof.g = p.value("g", scn.one_dof.g);
        }
        scn.one_dof.validate();
    } else if (type == "two-link") {
        scn.plant_type = PlantType::TwoLink;
        scn.two_link = two_link_preset(plant.value("preset", "exo-left-leg"));
        if (plant.contains("params")) {
            const json& p = plant.at("params");
            scn.two_link.X1 = p.value("X1", scn.two_link.X1);
            scn.two_link.Y1 = p.value("Y1", scn.two_link.Y1);
            scn.two_link.J1 = p.value("J1", scn.two_link.J1);
            scn.two_link.X2 = p.value("X2", scn.two_link.X2);
            scn.two_link.Y2 = p.value("Y2", scn.two_link.Y2);
            scn.two_link.J2 = p.value("J2", scn.two_link.J2);
            scn.two_link.l1 = p.value("l1", scn.two_link.l1);
            scn.two_link.g = p.value("g", scn.two_link.g);
        }
        scn.two_link.validate();
    } else {
        fail("unknown plant type: " + type);
    }
    scn.dt = plant.value("dt", 0.01);
    scn.rk4_truth = plant.value("rk4_truth", false);

    const int nj = scn.joints();
    if (j.contains("trajectory")) {
        const json& t = j.at("trajectory");
        scn.traj.amplitude = json_vec(t.value("amplitude", json(10.0)), nj);
        scn.traj.freq_hz = t.value("freq_hz", 0.2);
        scn.traj.phase = t.contains("phase") ? json_vec(t.at("phase"), nj) : Vec::Zero(nj);
        scn.traj.euler_consistent = t.value("euler_consistent", false);
    } else {
        scn.traj.amplitude = Vec::Constant(nj, 10.0);
        scn.traj.phase = Vec::Zero(nj);
    }

    const json& c = j.at("controller");
    scn.gains.kp = json_vec(c.at("kp"), nj);
    scn.gains.kd = json_vec(c.at("kd"), nj);
    scn.torque_limit = c.value("torque_limit", 0.0);

    const json& d = j.at("disturbance");
    if (d.is_array()) {
        for (const auto& e : d) scn.disturbance.push_back(profile_from_json(e));
    } else {
        for (int i = 0; i < nj; ++i) scn.disturbance.push_back(profile_from_json(d));
    }

    scn.horizon = j.value("horizon", 500L);
    scn.seed = j.value("seed", std::uint64_t{1});
    if (j.contains("window")) {
        const Vec w = json_vec(j.at("window"), 2);
        scn.window = {static_cast<long>(w(0)), static_cast<long>(w(1))};
    }
    scn.burn_in = j.value("burn_in", 0L);
    scn.perfect_init = j.value("perfect_init", true);
    scn.p0_scale = j.value("p0_scale", 1e-2);
    if (j.contains("meas_noise_std")) {
        int p, s, m;
        dims_of(scn, p, s, m);
        scn.meas_noise_std = json_vec(j.at("meas_noise_std"), m);
    }
    if (j.contains("theta0")) scn.theta0 = json_vec(j.at("theta0"), nj);
    if (j.contains("thetadot0")) scn.thetadot0 = json_vec(j.at("thetadot0"), nj);

    if (j.contains("observer")) scn.observer = observer_from_json(j.at("observer"), scn);
    scn.validate();
    return scn;
}

SimScenario load_scenario_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        fail("config parse error in " + path + ": " + e.what());
    }
    try {
        return scenario_from_json(j);
    } catch (const json::exception& e) {
        fail("config error in " + path + ": " + e.what());
    }
}

std::vector<ObserverSpec> observers_from_json(const json& j, const SimScenario& scn) {
    std::vector<ObserverSpec> out;
    if (j.contains("observers")) {
        for (const auto& o : j.at("observers")) out.push_back(observer_from_json(o, scn));
    } else if (j.contains("observer")) {
        out.push_back(observer_from_json(j.at("observer"), scn));
    }
    return out;
}

std::vector<ObserverSpec> load_observer_list(const std::string& path, const SimScenario& scn) {
    std::ifstream in(path);
    if (!in) fail("cannot open config file: " + path);
    json j;
    try {
        in >> j;
        return observers_from_json(j, scn);
    } catch (const json::exception& e) {
        fail("config error in " + path + ": " + e.what());
    }
}

long runs_from_file(const std::string& path, long fallback) {
    std::ifstream in(path);
    if (!in) fail("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        fail("config parse error in " + path + ": " + e.what());
    }
    return j.value("runs", fallback);
}

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void write_trace_csv(const Trace& trace, std::ostream& os) {
    os << "k";
    for (int i = 0; i < trace.n; ++i) os << ",x_true_" << i + 1;
    for (int i = 0; i < trace.m; ++i) os << ",y_" << i + 1;
    for (int i = 0; i < trace.n; ++i) os << ",x_hat_" << i + 1;
    for (int i = 0; i < trace.p; ++i) os << ",d_hat_" << i + 1;
    for (int i = 0; i < trace.p; ++i) os << ",tau_" << i + 1;
    for (int i = 0; i < trace.p; ++i) os << ",theta_d_" << i + 1;
    for (int i = 0; i < trace.p; ++i) os << ",thetadot_d_" << i + 1;
    for (int i = 0; i < trace.p; ++i) os << ",l_e_" << i + 1;
    const bool has_mu = !trace.mu.empty();
    if (has_mu)
        for (Eigen::Index i = 0; i < trace.mu[0].size(); ++i) os << ",mu_" << i + 1;
    os << ",iters\n";

    for (long k = 0; k < trace.length(); ++k) {
        os << k;
        auto put = [&](const Vec& v) {
            for (Eigen::Index i = 0; i < v.size(); ++i) os << ',' << fmt(v(i));
        };
        put(trace.x_true[k]);
        put(trace.y[k]);
        put(trace.x_hat[k]);
        put(trace.d_hat[k]);
        put(trace.tau[k]);
        put(trace.theta_d[k]);
        put(trace.thetadot_d[k]);
        put(trace.l_e[k]);
        if (has_mu) put(trace.mu[k]);
        os << ',' << trace.iters[k] << '\n';
    }
}

json report_to_json(const McReport& rep, bool include_timing) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["runs"] = rep.runs;
    j["window"] = {rep.window[0], rep.window[1]};
    j["bar_bias2"] = rep.bar_bias2;
    j["bar_var"] = rep.bar_var;
    json bias = json::array(), stddev = json::array(), mse = json::array();
    for (Eigen::Index r = 0; r < rep.bias.rows(); ++r) {
        json br = json::array(), sr = json::array(), mr = json::array();
        for (Eigen::Index c = 0; c < rep.bias.cols(); ++c) {
            br.push_back(rep.bias(r, c));
            sr.push_back(rep.stddev(r, c));
            mr.push_back(rep.mse(r, c));
        }
        bias.push_back(br);
        stddev.push_back(sr);
        mse.push_back(mr);
    }
    j["bias"] = bias;
    j["stddev"] = stddev;
    j["mse"] = mse;
    json rmse = json::object();
    for (std::size_t i = 0; i < rep.columns.size(); ++i) {
        rmse[rep.columns[i]] = {{"mean", rep.rmse_mean(static_cast<Eigen::Index>(i))},
                                {"std", rep.rmse_std(static_cast<Eigen::Index>(i))}};
    }
    j["rmse"] = rmse;
    json snr = json::array();
    for (Eigen::Index i = 0; i < rep.snr.size(); ++i) snr.push_back(rep.snr(i));
    j["snr_db"] = snr;
    j["degenerate_count"] = rep.degenerate_count;
    if (include_timing) j["timing"] = {{"mean_step_time_s", rep.mean_step_time}};
    return j;
}

SimScenario make_onedof_benchmark() {
    SimScenario scn;
    scn.plant_type = PlantType::OneDof;
    scn.one_dof = OneDofParams{};  // I=0.1, m=0.1, k=0.1, b=1, l=0.2, g=9.81
    scn.dt = 0.01;
    scn.horizon = 500;
    scn.seed = 1;
    scn.traj.amplitude = Vec::Constant(1, 10.0);
    scn.traj.freq_hz = 0.2;  // theta_d = 10 sin(0.4 pi t)
    scn.traj.phase = Vec::Zero(1);
    scn.gains.kp = Vec::Constant(1, 100.0);
    scn.gains.kd = Vec::Constant(1, 12.5);
    DisturbanceProfile d;
    d.kind = DisturbanceKind::CoulombViscous;
    d.coulomb = 20.0;
    d.viscous = 0.5;
    d.noise_std = 0.5;
    scn.disturbance = {d};
    scn.window = {300, 450};
    scn.observer = make_ekf_spec(scn, 1.0);
    return scn;
}

namespace {

NoiseConfig benchmark_noise(const SimScenario& scn, double eta) {
    int p, s, m;
    dims_of(scn, p, s, m);
    NoiseConfig nc;
    if (scn.plant_type == PlantType::OneDof) {
        nc.Qd = Mat::Constant(1, 1, 0.25);
        nc.Qs = 1e-4 * Mat::Identity(s, s);
        nc.R = 1.8e-5 * Mat::Identity(m, m);
    } else {
        nc.Qd = 0.25 * Mat::Identity(p, p);
        nc.Qs = 1e-6 * Mat::Identity(s, s);
        nc.R = 1e-6 * Mat::Identity(m, m);
        nc.R.bottomRightCorner(2, 2) = 1e-4 * Mat::Identity(2, 2);  // velocity channels
    }
    nc.eta = eta;
    return nc;
}

}  // namespace

ObserverSpec make_ekf_spec(const SimScenario& scn, double eta) {
    ObserverSpec spec;
    spec.type = ObserverType::Ekf;
    spec.name = "ekf-eta-" + std::to_string(eta);
    spec.noise = benchmark_noise(scn, eta);
    return spec;
}

ObserverSpec make_imm_spec(const SimScenario& scn, const std::vector<double>& etas,
                           const Mat& markov) {
    ObserverSpec spec;
    spec.type = ObserverType::Imm;
    spec.name = "imm";
    for (double eta : etas) spec.imm.bank.push_back(benchmark_noise(scn, eta));
    spec.imm.markov = markov;
    const auto nb = static_cast<Eigen::Index>(etas.size());
    spec.imm.mu0 = Vec::Constant(nb, 1.0 / static_cast<double>(nb));
    return spec;
}

ObserverSpec make_mkc_spec(const SimScenario& scn, double sigma_d) {
    ObserverSpec spec;
    spec.type = ObserverType::Mkc;
    spec.name = "mkc";
    spec.noise = benchmark_noise(scn, 1.0);
    int p, s, m;
    dims_of(scn, p, s, m);
    spec.mkc.sigma_d = Vec::Constant(p, sigma_d);
    spec.mkc.sigma_s = Vec::Constant(s, kInfiniteBandwidth);
    spec.mkc.sigma_r = Vec::Constant(m, kInfiniteBandwidth);
    return spec;
}

SimScenario make_twolink_elastic_benchmark() {
    SimScenario scn;
    scn.plant_type = PlantType::TwoLink;
    scn.two_link = two_link_preset("exo-left-leg");
    scn.dt = 0.005;
    scn.horizon = 2000;
    scn.seed = 1;
    scn.traj.amplitude = Vec(2);
    scn.traj.amplitude << 0.3, 0.5;
    scn.traj.freq_hz = 0.3;
    scn.traj.phase = Vec(2);
    scn.traj.phase << 0.0, M_PI / 2.0;
    scn.gains.kp = Vec::Constant(2, 5000.0);
    scn.gains.kd = Vec::Constant(2, 100.0);

    DisturbanceProfile hip;
    hip.kind = DisturbanceKind::Stribeck;
    hip.stribeck = stribeck_preset("exo-left-leg", 0);
    hip.noise_std = 0.3;
    DisturbanceProfile knee;
    knee.kind = DisturbanceKind::ElasticPeriodic;
    knee.amplitude = 20.0;
    knee.freq_hz = 0.3;
    knee.cap = 14.7;
    knee.noise_std = 0.3;
    scn.disturbance = {hip, knee};

    scn.window = {400, 1600};
    scn.observer = make_ekf_spec(scn, 1.0);
    return scn;
}

}  // namespace dobkit
