#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "dobkit/config.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dobkit;

namespace {

struct CommonOpts {
    std::string config;
    std::string out = ".";
    std::uint64_t seed = 0;
    bool seed_set = false;
    long runs = 0;  // 0 = use config / default
    int threads = 0;
    bool quiet = false;
    bool timing = false;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool needs_runs) {
    cmd->add_option("--config", o.config, "scenario JSON file")->required();
    cmd->add_option("--out", o.out, "output directory (created if missing)");
    cmd->add_option("--seed", o.seed, "override the scenario seed")
        ->each([&o](const std::string&) { o.seed_set = true; });
    if (needs_runs) {
        cmd->add_option("--runs", o.runs, "Monte-Carlo run count");
        cmd->add_option("--threads", o.threads, "worker threads (0 = auto / DOBKIT_THREADS)");
        cmd->add_flag("--timing", o.timing, "include wall-clock timing in the report");
    }
    cmd->add_flag("--quiet", o.quiet, "suppress stdout summaries");
}

fs::path ensure_out(const CommonOpts& o) {
    fs::path dir(o.out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory " + o.out + ": " + ec.message());
    return dir;
}

SimScenario load_scenario(const CommonOpts& o) {
    SimScenario scn = load_scenario_file(o.config);
    if (o.seed_set) scn.seed = o.seed;
    return scn;
}

long resolve_runs(const CommonOpts& o, long fallback) {
    if (o.runs > 0) return o.runs;
    return runs_from_file(o.config, fallback);
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << text;
}

json rmse_json(const RmseSet& rmse) {
    json j = json::object();
    for (std::size_t i = 0; i < rmse.names.size(); ++i)
        j[rmse.names[i]] = rmse.values(static_cast<Eigen::Index>(i));
    return j;
}

/// Noise configuration the parameter sweeps are anchored on.
NoiseConfig sweep_base_noise(const SimScenario& scn, const char* sweep) {
    switch (scn.observer.type) {
        case ObserverType::Ekf:
        case ObserverType::Mkc:
            return scn.observer.noise;
        case ObserverType::Imm:
            if (!scn.observer.imm.bank.empty()) return scn.observer.imm.bank.front();
            [[fallthrough]];
        default:
            throw ConfigError(std::string(sweep) +
                              " needs an observer with process/measurement noise (ekf, mkc, or "
                              "imm) in the config");
    }
}

int cmd_run(const CommonOpts& o) {
    SimScenario scn = load_scenario(o);
    const fs::path dir = ensure_out(o);
    Trace trace = run_closed_loop(scn);

    {
        std::ofstream csv(dir / "trace.csv", std::ios::binary);
        if (!csv) throw ConfigError("cannot write " + (dir / "trace.csv").string());
        write_trace_csv(trace, csv);
    }

    const RmseSet rmse = tracking_metrics(trace, scn.burn_in);
    json summary;
    summary["schema_version"] = kSchemaVersion;
    summary["observer"] = scn.observer.name;
    summary["seed"] = scn.seed;
    summary["horizon"] = scn.horizon;
    summary["dt"] = scn.dt;
    summary["rmse"] = rmse_json(rmse);
    summary["degenerate_count"] = trace.degenerate_count;
    write_text(dir / "summary.json", summary.dump(2) + "\n");

    if (!o.quiet) {
        std::printf("observer %s, %ld steps\n", scn.observer.name.c_str(), trace.length());
        for (std::size_t i = 0; i < rmse.names.size(); ++i)
            std::printf("  %-22s %.6g\n", rmse.names[i].c_str(),
                        rmse.values(static_cast<Eigen::Index>(i)));
    }
    return 0;
}

int cmd_mc(const CommonOpts& o) {
    SimScenario scn = load_scenario(o);
    const fs::path dir = ensure_out(o);
    const long runs = resolve_runs(o, 100);
    McReport rep = monte_carlo(scn, runs, scn.seed, o.threads);
    write_text(dir / "report.json", report_to_json(rep, o.timing).dump(2) + "\n");
    if (!o.quiet)
        std::printf("%ld runs: bar_bias2 = %.6g, bar_var = %.6g\n", rep.runs, rep.bar_bias2,
                    rep.bar_var);
    return 0;
}

struct SweepPoint {
    double value;
    McReport rep;
};

void write_sweep(const fs::path& dir, const std::string& stem, const char* param,
                 const std::vector<SweepPoint>& points, const CommonOpts& o, long runs) {
    std::string csv = std::string(param) + ",bar_bias2,bar_var";
    for (const auto& name : points.front().rep.columns) csv += "," + name + "_mean";
    csv += "\n";
    char buf[96];
    for (const auto& pt : points) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g", pt.value, pt.rep.bar_bias2,
                      pt.rep.bar_var);
        csv += buf;
        for (Eigen::Index i = 0; i < pt.rep.rmse_mean.size(); ++i) {
            std::snprintf(buf, sizeof(buf), ",%.17g", pt.rep.rmse_mean(i));
            csv += buf;
        }
        csv += "\n";
    }
    write_text(dir / (stem + ".csv"), csv);

    json summary;
    summary["schema_version"] = kSchemaVersion;
    summary["sweep"] = stem;
    summary["parameter"] = param;
    summary["runs"] = runs;
    json grid = json::array(), reports = json::array();
    for (const auto& pt : points) {
        grid.push_back(pt.value);
        reports.push_back(report_to_json(pt.rep, o.timing));
    }
    summary["grid"] = grid;
    summary["reports"] = reports;
    write_text(dir / "summary.json", summary.dump(2) + "\n");

    if (!o.quiet)
        for (const auto& pt : points)
            std::printf("%s = %-12.6g bar_bias2 = %-12.6g bar_var = %.6g\n", param, pt.value,
                        pt.rep.bar_bias2, pt.rep.bar_var);
}

int cmd_sweep_eta(const CommonOpts& o) {
    SimScenario scn = load_scenario(o);
    const fs::path dir = ensure_out(o);
    const long runs = resolve_runs(o, 100);
    const NoiseConfig base = sweep_base_noise(scn, "sweep-eta");

    std::vector<double> grid;
    for (double x : {0.0, 1.0, 2.0, 3.0, 4.0, 40.0}) grid.push_back(std::exp(x));

    std::vector<SweepPoint> points;
    for (double eta : grid) {
        SimScenario s = scn;
        s.observer.type = ObserverType::Ekf;
        s.observer.name = "ekf";
        s.observer.noise = base;
        s.observer.noise.eta = eta;
        points.push_back({eta, monte_carlo(s, runs, s.seed, o.threads)});
    }
    write_sweep(dir, "sweep_eta", "eta", points, o, runs);
    return 0;
}

int cmd_sweep_sigma(const CommonOpts& o) {
    SimScenario scn = load_scenario(o);
    const fs::path dir = ensure_out(o);
    const long runs = resolve_runs(o, 100);
    const NoiseConfig base = sweep_base_noise(scn, "sweep-sigma");
    const int p = scn.joints();

    std::vector<double> grid;
    for (double x = -1.0; x <= 5.0 + 1e-9; x += 0.5) grid.push_back(std::exp(x));

    std::vector<SweepPoint> points;
    for (double sigma : grid) {
        SimScenario s = scn;
        s.observer.type = ObserverType::Mkc;
        s.observer.name = "mkc";
        s.observer.noise = base;
        s.observer.noise.eta = 1.0;
        s.observer.mkc.sigma_d = Vec::Constant(p, sigma);
        s.observer.mkc.sigma_s = Vec::Constant(base.Qs.rows(), kInfiniteBandwidth);
        s.observer.mkc.sigma_r = Vec::Constant(base.R.rows(), kInfiniteBandwidth);
        points.push_back({sigma, monte_carlo(s, runs, s.seed, o.threads)});
    }
    write_sweep(dir, "sweep_sigma", "sigma_d", points, o, runs);
    return 0;
}

int cmd_sweep_markov(const CommonOpts& o) {
    SimScenario scn = load_scenario(o);
    const fs::path dir = ensure_out(o);
    const long runs = resolve_runs(o, 1);
    const NoiseConfig base = sweep_base_noise(scn, "sweep-markov");

    std::vector<double> grid;
    for (int i = 1; i <= 19; ++i) grid.push_back(0.05 * i);

    auto imm_scenario = [&](double p) {
        SimScenario s = scn;
        s.observer = ObserverSpec{};
        s.observer.type = ObserverType::Imm;
        s.observer.name = "imm";
        NoiseConfig slow = base, fast = base;
        slow.eta = 1.0;
        fast.eta = 20.0;
        s.observer.imm.bank = {slow, fast};
        Mat markov(2, 2);
        markov << p, 1.0 - p, 1.0 - p, p;
        s.observer.imm.markov = markov;
        s.observer.imm.mu0 = Vec::Constant(2, 0.5);
        return s;
    };
    auto metrics_of = [&](const SimScenario& s) {
        RmseSet rmse;
        if (runs >= 2) {
            McReport rep = monte_carlo(s, runs, s.seed, o.threads);
            rmse.names = rep.columns;
            rmse.values = rep.rmse_mean;
        } else {
            rmse = tracking_metrics(run_closed_loop(s), s.burn_in);
        }
        return rmse;
    };

    SimScenario baseline = scn;
    baseline.observer.type = ObserverType::Ekf;
    baseline.observer.name = "ekf";
    baseline.observer.noise = base;
    const RmseSet ekf_rmse = metrics_of(baseline);

    std::string csv = "p";
    std::vector<RmseSet> rows;
    for (double p : grid) rows.push_back(metrics_of(imm_scenario(p)));
    for (const auto& name : rows.front().names) csv += "," + name;
    csv += "\n";
    char buf[64];
    for (std::size_t i = 0; i < grid.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", grid[i]);
        csv += buf;
        for (Eigen::Index c = 0; c < rows[i].values.size(); ++c) {
            std::snprintf(buf, sizeof(buf), ",%.17g", rows[i].values(c));
            csv += buf;
        }
        csv += "\n";
    }
    write_text(dir / "sweep_markov.csv", csv);

    json summary;
    summary["schema_version"] = kSchemaVersion;
    summary["sweep"] = "sweep_markov";
    summary["parameter"] = "p";
    summary["runs"] = runs;
    summary["grid"] = grid;
    summary["ekf_baseline"] = rmse_json(ekf_rmse);
    json pts = json::array();
    for (const auto& row : rows) pts.push_back(rmse_json(row));
    summary["imm"] = pts;
    write_text(dir / "summary.json", summary.dump(2) + "\n");

    if (!o.quiet)
        for (std::size_t i = 0; i < grid.size(); ++i)
            std::printf("p = %.2f  rmse_x1 = %.6g\n", grid[i], rows[i].values(0));
    return 0;
}

int cmd_compare(const CommonOpts& o) {
    SimScenario scn = load_scenario(o);
    const std::vector<ObserverSpec> observers = load_observer_list(o.config, scn);
    if (observers.size() < 2)
        throw ConfigError("compare needs at least two observers in the config");
    const fs::path dir = ensure_out(o);
    const long runs = resolve_runs(o, 1);

    struct Row {
        std::string name;
        RmseSet rmse;
        double step_time_us = 0.0;
    };
    std::vector<Row> rows;
    for (const auto& obs : observers) {
        SimScenario s = scn;
        s.observer = obs;
        Row row;
        row.name = obs.name;
        if (runs >= 2) {
            McReport rep = monte_carlo(s, runs, s.seed, o.threads);
            row.rmse.names = rep.columns;
            row.rmse.values = rep.rmse_mean;
            row.step_time_us = rep.mean_step_time * 1e6;
        } else {
            Trace trace = run_closed_loop(s);
            row.rmse = tracking_metrics(trace, s.burn_in);
            double total = 0.0;
            for (double t : trace.step_time) total += t;
            row.step_time_us = 1e6 * total / static_cast<double>(trace.length());
        }
        rows.push_back(std::move(row));
    }

    // Deterministic artifact: the CSV holds only (config, seed)-pure columns;
    // wall-clock step time appears in the text table alone.
    std::string csv = "observer";
    for (const auto& name : rows.front().rmse.names) csv += "," + name;
    csv += "\n";
    char buf[64];
    for (const auto& row : rows) {
        csv += row.name;
        for (Eigen::Index c = 0; c < row.rmse.values.size(); ++c) {
            std::snprintf(buf, sizeof(buf), ",%.17g", row.rmse.values(c));
            csv += buf;
        }
        csv += "\n";
    }
    write_text(dir / "compare.csv", csv);

    std::string table;
    {
        char line[512];
        std::string header = "observer        ";
        for (const auto& name : rows.front().rmse.names) {
            std::snprintf(line, sizeof(line), " %14s", name.c_str());
            header += line;
        }
        header += "   step_time_us\n";
        table += header;
        for (const auto& row : rows) {
            std::snprintf(line, sizeof(line), "%-16s", row.name.c_str());
            table += line;
            for (Eigen::Index c = 0; c < row.rmse.values.size(); ++c) {
                std::snprintf(line, sizeof(line), " %14.6g", row.rmse.values(c));
                table += line;
            }
            std::snprintf(line, sizeof(line), " %14.3f\n", row.step_time_us);
            table += line;
        }
    }
    write_text(dir / "compare.txt", table);
    if (!o.quiet) std::fputs(table.c_str(), stdout);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"disturbance-observer benchmark toolkit"};
    app.require_subcommand(1);

    CommonOpts run_o, mc_o, eta_o, sigma_o, markov_o, cmp_o;
    add_common(app.add_subcommand("run", "single closed-loop run; writes trace.csv + summary.json"),
               run_o, false);
    add_common(app.add_subcommand("mc", "Monte-Carlo study; writes report.json"), mc_o, true);
    add_common(app.add_subcommand("sweep-eta",
                                  "EKF process-noise inflation sweep over eta = exp(0..4), exp(40)"),
               eta_o, true);
    add_common(app.add_subcommand(
                   "sweep-sigma", "MKC kernel-bandwidth sweep over sigma_d = exp(-1..5 step 0.5)"),
               sigma_o, true);
    add_common(app.add_subcommand(
                   "sweep-markov",
                   "IMM transition-probability sweep over p = 0.05..0.95 step 0.05"),
               markov_o, true);
    add_common(app.add_subcommand("compare", "observer comparison table from one scenario"), cmp_o,
               true);

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand("run")) return cmd_run(run_o);
        if (app.got_subcommand("mc")) return cmd_mc(mc_o);
        if (app.got_subcommand("sweep-eta")) return cmd_sweep_eta(eta_o);
        if (app.got_subcommand("sweep-sigma")) return cmd_sweep_sigma(sigma_o);
        if (app.got_subcommand("sweep-markov")) return cmd_sweep_markov(markov_o);
        if (app.got_subcommand("compare")) return cmd_compare(cmp_o);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
