#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "dobkit/simlab.hpp"

namespace dobkit {

inline constexpr int kSchemaVersion = 1;

/// Table-default two-link parameters (left leg) under the preset name
/// "exo-left-leg". Throws ConfigError for unknown names.
TwoLinkParams two_link_preset(const std::string& name);
StribeckParams stribeck_preset(const std::string& name, int joint);

/// Scenario (de)serialization. Observer specs are sized against the plant
/// declared in the same document.
SimScenario scenario_from_json(const nlohmann::json& j);
ObserverSpec observer_from_json(const nlohmann::json& j, const SimScenario& scn);
SimScenario load_scenario_file(const std::string& path);

/// Observer list for `compare`; falls back to the single `observer` entry.
std::vector<ObserverSpec> observers_from_json(const nlohmann::json& j, const SimScenario& scn);
std::vector<ObserverSpec> load_observer_list(const std::string& path, const SimScenario& scn);

long runs_from_file(const std::string& path, long fallback);

void write_trace_csv(const Trace& trace, std::ostream& os);

/// McReport serialization. Wall-clock timing lives under a separate key and
/// is omitted unless requested, so the default serialization is a pure
/// function of (config, seed).
nlohmann::json report_to_json(const McReport& rep, bool include_timing = false);

/// Baseline 1-DOF benchmark: sinusoidal reference, Coulomb-viscous friction
/// disturbance with step-like sign changes, 100 Hz, 500 steps.
SimScenario make_onedof_benchmark();

ObserverSpec make_ekf_spec(const SimScenario& scn, double eta);
ObserverSpec make_imm_spec(const SimScenario& scn, const std::vector<double>& etas,
                           const Mat& markov);
ObserverSpec make_mkc_spec(const SimScenario& scn, double sigma_d);

/// Two-link benchmark with an elastic-periodic shank disturbance, used by the
/// Markov-sweep robustness study.
SimScenario make_twolink_elastic_benchmark();

}  // namespace dobkit
