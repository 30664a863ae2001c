#pragma once

// JSON experiment report: { schema_version, config, seed, metrics, pass }.
// No timestamps anywhere, so identical (config, seed) runs produce
// byte-identical files.

#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "dbmlab/config.hpp"

namespace dbmlab {

using ordered_json = nlohmann::ordered_json;

inline ordered_json config_to_json(const ExperimentConfig& cfg) {
    ordered_json j;
    j["kind"] = cfg.kind;
    j["N"] = cfg.n;
    if (cfg.t) j["t"] = *cfg.t;
    if (cfg.cap_t) j["T"] = *cfg.cap_t;
    j["profile"] = cfg.profile;
    j["ell"] = cfg.ell;
    j["G"] = cfg.g;
    if (cfg.e0_given) j["E0"] = cfg.e0;
    j["half_width"] = cfg.half_width;
    j["rough_scale"] = cfg.rough_scale;
    j["samples"] = cfg.samples;
    j["q"] = cfg.q;
    j["grid_points"] = cfg.grid_points;
    j["eta_floor"] = cfg.eta_floor;
    j["polylog_power"] = cfg.polylog_power;
    j["eta_count"] = cfg.eta_count;
    j["energy_count"] = cfg.energy_count;
    j["slope_tol"] = cfg.slope_tol;
    j["eps_min"] = cfg.eps_min;
    j["eps_max"] = cfg.eps_max;
    j["eps_count"] = cfg.eps_count;
    j["exponent_lo"] = cfg.exponent_lo;
    j["exponent_hi"] = cfg.exponent_hi;
    j["K"] = cfg.window_k;
    j["dt"] = cfg.dt_micro;
    j["paths"] = cfg.paths;
    j["contraction_factor"] = cfg.contraction_factor;
    j["epsilon"] = cfg.epsilon;
    j["decay_exponent_max"] = cfg.decay_exponent_max;
    j["marginal_check"] = cfg.marginal_check;
    j["marginal_ks_threshold"] = cfg.marginal_ks_threshold;
    j["kernels"] = cfg.kernels;
    j["holder_min_exponent"] = cfg.holder_min_exponent;
    j["ks_threshold"] = cfg.ks_threshold;
    j["correlation"] = cfg.correlation;
    j["corr_b"] = cfg.corr_b;
    j["export_spectra"] = cfg.export_spectra;
    return j;
}

struct ExperimentReport {
    int schema_version = 1;
    ordered_json config;
    std::uint64_t seed = 0;
    ordered_json metrics;
    bool pass = false;

    ordered_json to_json() const {
        ordered_json j;
        j["schema_version"] = schema_version;
        j["config"] = config;
        j["seed"] = seed;
        j["metrics"] = metrics;
        j["pass"] = pass;
        return j;
    }

    std::string to_string() const { return to_json().dump(2) + "\n"; }

    void write(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        out << to_string();
    }
};

inline std::string ensure_out_dir(const std::string& dir) {
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace dbmlab
