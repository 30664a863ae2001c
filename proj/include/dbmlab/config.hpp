#pragma once

// Flat key = value experiment configuration. One document per experiment;
// unknown keys are rejected with their line number so typos fail loudly.

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "dbmlab/errors.hpp"
#include "dbmlab/freeconv.hpp"
#include "dbmlab/potential.hpp"

namespace dbmlab {

struct ExperimentConfig {
    std::string kind; // freeconv | locallaw | rigidity | repulsion | couple | gapstats | holder
    std::size_t n = 0;
    std::optional<double> t;     // DBM time
    std::optional<double> cap_t; // variance form, key "T"

    std::string profile = "uniform"; // uniform | two_atom | rough | goe | file:<path>
    double ell = 0.0;                // 0 = preset default max(1/N, 0.004)
    double g = 0.25;
    double e0 = 0.0;
    bool e0_given = false;
    double half_width = 0.3;
    double rough_scale = 1.0;

    std::size_t samples = 100;
    double q = 0.5;
    std::uint64_t seed = 1;
    std::string out_dir = "out";
    bool plots = false;
    bool export_spectra = false;

    std::size_t grid_points = 2048;
    double eta_floor = 0.0; // 0 = automatic
    double polylog_power = 3.0;

    // locallaw
    std::size_t eta_count = 12;
    std::size_t energy_count = 5;
    double slope_tol = 0.3;

    // repulsion
    double eps_min = 0.05;
    double eps_max = 0.5;
    std::size_t eps_count = 9;
    double exponent_lo = 1.7;
    double exponent_hi = 2.3;

    // couple / holder
    std::size_t window_k = 32; // key "K"
    double dt_micro = 0.02;    // key "dt", microscopic Euler step
    std::size_t paths = 50;
    double contraction_factor = 3.0;
    double epsilon = 1e-12; // pair regularization, macroscopic units
    double decay_exponent_max = -0.8;
    bool marginal_check = false;
    double marginal_ks_threshold = 0.05;
    std::size_t kernels = 20;
    double holder_min_exponent = 0.05;

    // gapstats
    double ks_threshold = 0.1;
    bool correlation = false;
    double corr_b = 0.02;

    TimeParam time_param() const {
        if (t) return TimeParam::from_t(*t);
        return TimeParam::from_T(*cap_t);
    }
};

namespace detail {

struct RawEntry {
    std::string value;
    int line = 0;
    bool used = false;
};

inline std::map<std::string, RawEntry> tokenize_config(const std::string& text) {
    std::map<std::string, RawEntry> out;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            if (b == std::string::npos) return std::string();
            const auto e = s.find_last_not_of(" \t\r");
            return s.substr(b, e - b + 1);
        };
        if (trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigInvalid("line " + std::to_string(lineno),
                                "expected 'key = value', got '" + trim(line) + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ConfigInvalid("line " + std::to_string(lineno), "empty key or value");
        if (out.count(key))
            throw ConfigInvalid(key, "duplicate key at line " + std::to_string(lineno));
        out[key] = {value, lineno, false};
    }
    return out;
}

struct ConfigReader {
    std::map<std::string, RawEntry> raw;

    bool has(const std::string& key) { return raw.count(key) != 0; }

    std::string take(const std::string& key) {
        auto it = raw.find(key);
        it->second.used = true;
        return it->second.value;
    }

    std::string require_string(const std::string& key) {
        if (!has(key)) throw ConfigInvalid(key, "missing required field");
        return take(key);
    }

    double require_double(const std::string& key) { return to_double(key, require_string(key)); }

    double get_double(const std::string& key, double dflt) {
        return has(key) ? to_double(key, take(key)) : dflt;
    }

    std::size_t require_size(const std::string& key) {
        const double v = require_double(key);
        if (v < 0 || v != static_cast<double>(static_cast<std::size_t>(v)))
            throw ConfigInvalid(key, "expected a nonnegative integer");
        return static_cast<std::size_t>(v);
    }

    std::size_t get_size(const std::string& key, std::size_t dflt) {
        return has(key) ? to_size(key, take(key)) : dflt;
    }

    std::uint64_t get_u64(const std::string& key, std::uint64_t dflt) {
        if (!has(key)) return dflt;
        const std::string s = take(key);
        try {
            return std::stoull(s);
        } catch (...) {
            throw ConfigInvalid(key, "expected an unsigned integer, got '" + s + "'");
        }
    }

    bool get_bool(const std::string& key, bool dflt) {
        if (!has(key)) return dflt;
        const std::string s = take(key);
        if (s == "true" || s == "1" || s == "yes") return true;
        if (s == "false" || s == "0" || s == "no") return false;
        throw ConfigInvalid(key, "expected true/false, got '" + s + "'");
    }

    std::string get_string(const std::string& key, const std::string& dflt) {
        return has(key) ? take(key) : dflt;
    }

    double to_double(const std::string& key, const std::string& s) {
        try {
            std::size_t pos = 0;
            const double v = std::stod(s, &pos);
            if (pos != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (...) {
            throw ConfigInvalid(key, "expected a number, got '" + s + "'");
        }
    }

    std::size_t to_size(const std::string& key, const std::string& s) {
        const double v = to_double(key, s);
        if (v < 0 || v != static_cast<double>(static_cast<std::size_t>(v)))
            throw ConfigInvalid(key, "expected a nonnegative integer");
        return static_cast<std::size_t>(v);
    }

    void reject_unknown() const {
        for (const auto& [key, entry] : raw)
            if (!entry.used)
                throw ConfigInvalid(key, "unknown key (line " + std::to_string(entry.line) + ")");
    }
};

} // namespace detail

inline ExperimentConfig validate_config(const std::string& text) {
    detail::ConfigReader rd{detail::tokenize_config(text)};
    ExperimentConfig cfg;

    cfg.kind = rd.require_string("kind");
    const bool known_kind = cfg.kind == "freeconv" || cfg.kind == "locallaw" ||
                            cfg.kind == "rigidity" || cfg.kind == "repulsion" ||
                            cfg.kind == "couple" || cfg.kind == "gapstats" ||
                            cfg.kind == "holder";
    if (!known_kind) throw ConfigInvalid("kind", "unknown experiment kind '" + cfg.kind + "'");

    cfg.n = rd.require_size("N");
    if (cfg.n < 2) throw ConfigInvalid("N", "need N >= 2");

    if (rd.has("t")) cfg.t = rd.require_double("t");
    if (rd.has("T")) cfg.cap_t = rd.require_double("T");
    if (cfg.t && cfg.cap_t) throw ConfigInvalid("t", "give exactly one of t, T");
    if (!cfg.t && !cfg.cap_t) throw ConfigInvalid("t", "missing time parameter (t or T)");
    if (cfg.t && *cfg.t < 0.0) throw ConfigInvalid("t", "t must be >= 0");
    if (cfg.cap_t && (*cfg.cap_t < 0.0 || *cfg.cap_t > 1.0))
        throw ConfigInvalid("T", "T must lie in [0, 1]");

    cfg.profile = rd.get_string("profile", "uniform");
    cfg.ell = rd.get_double("ell", std::max(1.0 / static_cast<double>(cfg.n), 0.004));
    cfg.g = rd.get_double("G", 0.25);
    if (rd.has("E0")) {
        cfg.e0 = rd.require_double("E0");
        cfg.e0_given = true;
    }
    cfg.half_width = rd.get_double("half_width", 0.3);
    cfg.rough_scale = rd.get_double("rough_scale", 1.0);
    if (cfg.profile != "goe" && cfg.g <= cfg.ell)
        throw ConfigInvalid("G", "requires ell < G (regularity separation of the initial data)");

    cfg.samples = rd.get_size("samples", 100);
    cfg.q = rd.get_double("q", 0.5);
    if (cfg.q <= 0.0 || cfg.q >= 1.0) throw ConfigInvalid("q", "q must lie in (0, 1)");
    cfg.seed = rd.get_u64("seed", 1);
    cfg.out_dir = rd.get_string("out", "out");
    cfg.plots = rd.get_bool("plots", false);
    cfg.export_spectra = rd.get_bool("export_spectra", false);

    cfg.grid_points = rd.get_size("grid_points", 2048);
    if (cfg.grid_points < 64) throw ConfigInvalid("grid_points", "need >= 64");
    cfg.eta_floor = rd.get_double("eta_floor", 0.0);
    cfg.polylog_power = rd.get_double("polylog_power", 3.0);

    cfg.eta_count = rd.get_size("eta_count", 12);
    cfg.energy_count = rd.get_size("energy_count", 5);
    cfg.slope_tol = rd.get_double("slope_tol", 0.3);

    cfg.eps_min = rd.get_double("eps_min", 0.05);
    cfg.eps_max = rd.get_double("eps_max", 0.5);
    cfg.eps_count = rd.get_size("eps_count", 9);
    cfg.exponent_lo = rd.get_double("exponent_lo", 1.7);
    cfg.exponent_hi = rd.get_double("exponent_hi", 2.3);
    if (cfg.eps_min <= 0.0 || cfg.eps_max <= cfg.eps_min)
        throw ConfigInvalid("eps_min", "need 0 < eps_min < eps_max");

    cfg.window_k = rd.get_size("K", 32);
    cfg.dt_micro = rd.get_double("dt", 0.02);
    if (cfg.dt_micro <= 0.0) throw ConfigInvalid("dt", "dt must be positive");
    cfg.paths = rd.get_size("paths", 50);
    cfg.contraction_factor = rd.get_double("contraction_factor", 3.0);
    cfg.epsilon = rd.get_double("epsilon", 1e-12);
    if (cfg.epsilon < 0.0) throw ConfigInvalid("epsilon", "epsilon must be >= 0");
    cfg.decay_exponent_max = rd.get_double("decay_exponent_max", -0.8);
    cfg.marginal_check = rd.get_bool("marginal_check", false);
    cfg.marginal_ks_threshold = rd.get_double("marginal_ks_threshold", 0.05);
    cfg.kernels = rd.get_size("kernels", 20);
    cfg.holder_min_exponent = rd.get_double("holder_min_exponent", 0.05);

    cfg.ks_threshold = rd.get_double("ks_threshold", 0.1);
    cfg.correlation = rd.get_bool("correlation", false);
    cfg.corr_b = rd.get_double("corr_b", 0.02);

    if (rd.has("omega_prime")) {
        const double op = rd.require_double("omega_prime");
        if (op <= 0.0) throw ConfigInvalid("omega_prime", "must be positive");
        cfg.window_k = static_cast<std::size_t>(
            std::lround(std::pow(static_cast<double>(cfg.n), op / 2.0)));
    }
    if ((cfg.kind == "couple" || cfg.kind == "holder") &&
        (cfg.window_k < 1 || cfg.window_k > cfg.n / 2))
        throw ConfigInvalid("K", "need 1 <= K <= N/2");

    rd.reject_unknown();
    return cfg;
}

inline PotentialProfile make_profile(const ExperimentConfig& cfg) {
    const double e0_uniform = cfg.e0_given ? cfg.e0 : 0.0;
    const double e0_two_atom = cfg.e0_given ? cfg.e0 : 1.0;
    if (cfg.profile == "uniform")
        return presets::uniform(cfg.n, cfg.ell, cfg.g, e0_uniform);
    if (cfg.profile == "two_atom")
        return presets::two_atom(cfg.n, cfg.ell, cfg.g, e0_two_atom, cfg.half_width);
    if (cfg.profile == "rough")
        return presets::rough(cfg.n, cfg.ell, cfg.g, e0_uniform, cfg.rough_scale);
    if (cfg.profile == "goe") return presets::goe(cfg.n);
    if (cfg.profile.rfind("file:", 0) == 0)
        return load_profile(cfg.profile.substr(5), cfg.ell, cfg.g, e0_uniform);
    throw ConfigInvalid("profile", "unknown profile '" + cfg.profile + "'");
}

} // namespace dbmlab
