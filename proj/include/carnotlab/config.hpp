#pragma once

#include <cstdint>
#include <cstdlib>
#include <istream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "carnotlab/inequalities.hpp"

namespace carnotlab {

// Experiment configuration, parsed from a flat key = value file.
// '#' starts a comment; blank lines are ignored; list values are
// comma-separated. Unknown keys are errors (typos should not pass silently).
//
//   seed = 42
//   chunk_size = 1024
//   n_paths = 100000
//   grid_k = 16
//   substeps = 64
//   beta = 0
//   nu = 0.5, 1, 2
//   c_lsi = 4
//   bridge_c = auto
//   functions = all
//   finite_n = 1, 2, 4, 8
//   t_quadrature = 16
//   threads = 0
//   knn = 0
//   output = reports/out.json
//   carnot_spec = specs/heisenberg.cspec
//
// Environment overrides (and nothing else): CARNOTLAB_SEED replaces seed,
// CARNOTLAB_OUTDIR prepends a directory to the output path.
struct ExperimentConfig {
    std::uint64_t seed = 42;
    std::uint64_t chunk_size = 1024;
    std::size_t n_paths = 100000;
    std::size_t grid_k = 16;
    int substeps = 64;
    double beta = 0.0;
    std::vector<double> nu_list{0.5, 1.0, 2.0};
    double c_lsi = 4.0;
    double bridge_c = 0.0; // 0 = "auto": fit via the bridge lemma
    std::vector<std::string> functions; // empty = the whole suite
    std::vector<std::size_t> finite_n{1, 2, 4, 8};
    int t_quadrature = 16;
    int threads = 0;
    std::size_t knn = 0; // 0 = default rule
    std::string output;  // empty = stdout
    std::string carnot_spec_file;

    LsiRunConfig lsi_run_config() const {
        LsiRunConfig cfg;
        cfg.plan = SeedPlan{seed, chunk_size};
        cfg.n_paths = n_paths;
        cfg.substeps = substeps;
        cfg.t_order = t_quadrature;
        cfg.beta = beta;
        cfg.threads = threads;
        return cfg;
    }
};

class ConfigParseError : public std::runtime_error {
  public:
    ConfigParseError(int line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
    int line() const { return line_; }

  private:
    int line_;
};

namespace detail {
inline std::string strip_ws(std::string s) {
    const auto hash = s.find('#');
    if (hash != std::string::npos) s.erase(hash);
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ',')) {
        const std::string t = strip_ws(item);
        if (!t.empty()) out.push_back(t);
    }
    return out;
}
} // namespace detail

inline ExperimentConfig parse_config(std::istream& in) {
    ExperimentConfig cfg;
    std::string line;
    int lineno = 0;

    auto to_u64 = [&](const std::string& v, const char* key) -> std::uint64_t {
        try {
            if (!v.empty() && v[0] == '-') throw std::invalid_argument("negative");
            return std::stoull(v);
        } catch (const std::exception&) {
            throw ConfigParseError(lineno, std::string("invalid integer for '") + key + "'");
        }
    };
    auto to_double = [&](const std::string& v, const char* key) -> double {
        try {
            return std::stod(v);
        } catch (const std::exception&) {
            throw ConfigParseError(lineno, std::string("invalid number for '") + key + "'");
        }
    };

    while (std::getline(in, line)) {
        ++lineno;
        const std::string s = detail::strip_ws(line);
        if (s.empty()) continue;
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigParseError(lineno, "expected 'key = value'");
        const std::string key = detail::strip_ws(s.substr(0, eq));
        const std::string val = detail::strip_ws(s.substr(eq + 1));
        if (val.empty()) throw ConfigParseError(lineno, "empty value for '" + key + "'");

        if (key == "seed") {
            cfg.seed = to_u64(val, "seed");
        } else if (key == "chunk_size") {
            cfg.chunk_size = to_u64(val, "chunk_size");
            if (cfg.chunk_size == 0) throw ConfigParseError(lineno, "chunk_size must be positive");
        } else if (key == "n_paths") {
            cfg.n_paths = to_u64(val, "n_paths");
            if (cfg.n_paths == 0) throw ConfigParseError(lineno, "n_paths must be positive");
        } else if (key == "grid_k") {
            cfg.grid_k = to_u64(val, "grid_k");
            if (cfg.grid_k == 0) throw ConfigParseError(lineno, "grid_k must be positive");
        } else if (key == "substeps") {
            cfg.substeps = static_cast<int>(to_u64(val, "substeps"));
            if (cfg.substeps <= 0) throw ConfigParseError(lineno, "substeps must be positive");
        } else if (key == "beta") {
            cfg.beta = to_double(val, "beta");
            if (cfg.beta < 0.0) throw ConfigParseError(lineno, "beta must be >= 0");
        } else if (key == "nu") {
            cfg.nu_list.clear();
            for (const auto& item : detail::split_list(val)) {
                const double nu = to_double(item, "nu");
                if (nu <= 0.0) throw ConfigParseError(lineno, "nu entries must be > 0");
                cfg.nu_list.push_back(nu);
            }
            if (cfg.nu_list.empty()) throw ConfigParseError(lineno, "nu list is empty");
        } else if (key == "c_lsi") {
            cfg.c_lsi = to_double(val, "c_lsi");
            if (cfg.c_lsi <= 0.0) throw ConfigParseError(lineno, "c_lsi must be > 0");
        } else if (key == "bridge_c") {
            if (val == "auto") {
                cfg.bridge_c = 0.0;
            } else {
                cfg.bridge_c = to_double(val, "bridge_c");
                if (cfg.bridge_c <= 0.0)
                    throw ConfigParseError(lineno, "bridge_c must be > 0 or 'auto'");
            }
        } else if (key == "functions") {
            cfg.functions.clear();
            if (val != "all") cfg.functions = detail::split_list(val);
        } else if (key == "finite_n") {
            cfg.finite_n.clear();
            for (const auto& item : detail::split_list(val)) {
                const std::uint64_t n = to_u64(item, "finite_n");
                if (n == 0) throw ConfigParseError(lineno, "finite_n entries must be >= 1");
                cfg.finite_n.push_back(n);
            }
        } else if (key == "t_quadrature") {
            cfg.t_quadrature = static_cast<int>(to_u64(val, "t_quadrature"));
            if (cfg.t_quadrature <= 0)
                throw ConfigParseError(lineno, "t_quadrature must be positive");
        } else if (key == "threads") {
            cfg.threads = static_cast<int>(to_u64(val, "threads"));
        } else if (key == "knn") {
            cfg.knn = to_u64(val, "knn");
        } else if (key == "output") {
            cfg.output = val;
        } else if (key == "carnot_spec") {
            cfg.carnot_spec_file = val;
        } else {
            throw ConfigParseError(lineno, "unknown key '" + key + "'");
        }
    }
    return cfg;
}

inline ExperimentConfig parse_config_string(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

inline void apply_env_overrides(ExperimentConfig& cfg) {
    if (const char* seed = std::getenv("CARNOTLAB_SEED")) {
        try {
            cfg.seed = std::stoull(seed);
        } catch (const std::exception&) {
            throw std::invalid_argument("CARNOTLAB_SEED: invalid integer");
        }
    }
    if (const char* outdir = std::getenv("CARNOTLAB_OUTDIR")) {
        if (!cfg.output.empty()) cfg.output = std::string(outdir) + "/" + cfg.output;
    }
}

// Resolve the configured function list against the suite registry.
inline std::vector<NamedTestFunction> resolve_suite(const ExperimentConfig& cfg) {
    if (cfg.functions.empty()) return standard_suite();
    std::vector<NamedTestFunction> out;
    out.reserve(cfg.functions.size());
    for (const auto& name : cfg.functions) out.push_back(resolve_function(name));
    return out;
}

} // namespace carnotlab
