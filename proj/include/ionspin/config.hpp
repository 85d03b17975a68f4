#ifndef IONSPIN_CONFIG_HPP
#define IONSPIN_CONFIG_HPP

#include "ionspin/common.hpp"
#include "ionspin/crystal.hpp"
#include "ionspin/errors.hpp"
#include "ionspin/graphs.hpp"
#include "ionspin/inverse.hpp"
#include "ionspin/io.hpp"

#include "json.hpp"

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

// Run configuration, JSON. Frequencies are in Hz (cycles), converted to rad/s on load.
//
// {
//   "seed": 1,
//   "trap": {"n_ions": 25, "omega_com_hz": 5e6,
//            "axial": "default" | {"omega_z_hz": 4e5} | {"alpha2": ..., "alpha4": ...},
//            "ion_mass_amu": 171, "delta_k_per_m": 3.54e7, "qubit_freq_hz": 12.6e9},
//   "graph": {"generator": "square_lattice_pbc", "rows": 5, "cols": 5, "j0_hz": 1}
//            | {"file": "target.csv"},
//   "f_s": 0.1,
//   "budget_hz": 1e6,                      // omitted: match the target exactly
//   "solver": {"residual_tol": 1e-8, "max_iter": 300, "stage_iter": 15, "n_starts": 8},
//   "epsilon": 1e-5,
//   "sensitivity": {"delta": 1e-3, "trials": 200},   // optional
//   "scaling": {"family": "chain", "n_min": 3, "n_max": 33},  // only for `run --scaling`
//   "outputs": "out/run"
// }
//
// Relative paths resolve against the config file's directory.

namespace ionspin {

struct GraphSpec {
    std::string generator; // empty when loaded from file
    int rows = 0, cols = 0, n = 0;
    bool periodic = false;
    double j0 = 0.0; // rad/s
    std::optional<std::filesystem::path> file;
};

struct SensitivitySpec {
    double delta = 1e-3;
    int trials = 200;
};

struct ScalingSpec {
    ScalingFamily family = ScalingFamily::chain;
    int n_min = 3;
    int n_max = 33;
};

struct RunConfig {
    std::uint64_t seed = 1;
    TrapConfig trap;
    bool default_axial = true;
    GraphSpec graph;
    double f_s = 0.03;
    std::optional<double> budget; // rad/s
    SolveConfig solver;
    double epsilon = default_epsilon;
    std::optional<SensitivitySpec> sensitivity;
    std::optional<ScalingSpec> scaling;
    std::filesystem::path outputs = "out";
    nlohmann::json source; // normalized copy, echoed into the manifest
};

namespace detail {

/// Key-checked view of a JSON object: every key must be consumed, and each read is type-checked.
class ObjectReader {
public:
    ObjectReader(const nlohmann::json& j, std::string where) : j_(j), where_(std::move(where))
    {
        if (!j_.is_object())
            throw ValidationError(where_ + ": expected an object");
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    const nlohmann::json& raw(const std::string& key) { return fetch(key); }

    double number(const std::string& key)
    {
        const auto& v = fetch(key);
        if (!v.is_number())
            throw ValidationError(path(key) + ": expected a number");
        const double d = v.get<double>();
        if (!std::isfinite(d))
            throw ValidationError(path(key) + ": must be finite");
        return d;
    }

    double number(const std::string& key, double fallback) { return has(key) ? number(key) : fallback; }

    long long integer(const std::string& key)
    {
        const auto& v = fetch(key);
        if (!v.is_number_integer())
            throw ValidationError(path(key) + ": expected an integer");
        return v.get<long long>();
    }

    long long integer(const std::string& key, long long fallback) { return has(key) ? integer(key) : fallback; }

    std::string string(const std::string& key)
    {
        const auto& v = fetch(key);
        if (!v.is_string())
            throw ValidationError(path(key) + ": expected a string");
        return v.get<std::string>();
    }

    bool boolean(const std::string& key, bool fallback)
    {
        if (!has(key))
            return fallback;
        const auto& v = fetch(key);
        if (!v.is_boolean())
            throw ValidationError(path(key) + ": expected true or false");
        return v.get<bool>();
    }

    std::string path(const std::string& key) const { return where_ + "." + key; }

    void finish() const
    {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!used_.count(it.key()))
                throw ValidationError(where_ + ": unknown key '" + it.key() + "'");
    }

private:
    const nlohmann::json& fetch(const std::string& key)
    {
        if (!j_.contains(key))
            throw ValidationError(path(key) + ": missing");
        used_.insert(key);
        return j_.at(key);
    }

    const nlohmann::json& j_;
    std::string where_;
    std::set<std::string> used_;
};

/// fallback < 0 makes the key required.
inline int positive_int(ObjectReader& r, const std::string& key, long long fallback, long long lo = 1)
{
    const long long v = fallback < 0 ? r.integer(key) : r.integer(key, fallback);
    if (v < lo || v > 1'000'000)
        throw ValidationError(r.path(key) + ": out of range");
    return static_cast<int>(v);
}

} // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base_dir = ".")
{
    RunConfig cfg;
    detail::ObjectReader top(j, "config");

    const long long seed = top.integer("seed", 1);
    if (seed < 0)
        throw ValidationError("config.seed: must be >= 0");
    cfg.seed = static_cast<std::uint64_t>(seed);

    {
        detail::ObjectReader t(top.raw("trap"), "config.trap");
        cfg.trap.n_ions = detail::positive_int(t, "n_ions", -1);
        cfg.trap.omega_com = hz_to_rad(t.number("omega_com_hz", 5e6));
        cfg.trap.ion_mass = t.number("ion_mass_amu", constants::yb171_mass / constants::atomic_mass_unit) *
                            constants::atomic_mass_unit;
        cfg.trap.delta_k = t.number("delta_k_per_m", constants::default_delta_k);
        if (t.has("qubit_freq_hz"))
            cfg.trap.qubit_freq = hz_to_rad(t.number("qubit_freq_hz"));
        if (t.has("axial")) {
            const auto& a = t.raw("axial");
            if (a.is_string()) {
                if (a.get<std::string>() != "default")
                    throw ValidationError("config.trap.axial: expected \"default\" or an object");
            } else {
                detail::ObjectReader ar(a, "config.trap.axial");
                if (ar.has("omega_z_hz")) {
                    cfg.trap.axial = HarmonicAxial{hz_to_rad(ar.number("omega_z_hz"))};
                } else {
                    cfg.trap.axial = QuarticAxial{ar.number("alpha2"), ar.number("alpha4")};
                }
                ar.finish();
                cfg.default_axial = false;
            }
        }
        t.finish();
        if (cfg.default_axial) {
            require(cfg.trap.omega_com > 0.0 && cfg.trap.ion_mass > 0.0, "config.trap: omega_com and mass must be positive");
            cfg.trap.axial = HarmonicAxial{default_anisotropy_fraction *
                                           critical_axial_frequency(cfg.trap.n_ions, cfg.trap.omega_com, cfg.trap.ion_mass)};
        }
        cfg.trap.validate();
    }

    {
        detail::ObjectReader g(top.raw("graph"), "config.graph");
        if (g.has("file")) {
            std::filesystem::path p = g.string("file");
            if (p.is_relative())
                p = (base_dir / p).lexically_normal();
            if (!std::filesystem::exists(p))
                throw ValidationError("config.graph.file: " + p.string() + " does not exist");
            cfg.graph.file = p;
        } else {
            cfg.graph.generator = g.string("generator");
            cfg.graph.j0 = hz_to_rad(g.number("j0_hz", 1.0));
            const std::string& gen = cfg.graph.generator;
            if (gen == "square_lattice_pbc") {
                cfg.graph.rows = detail::positive_int(g, "rows", -1, 2);
                cfg.graph.cols = detail::positive_int(g, "cols", -1, 2);
            } else if (gen == "kagome_pbc") {
                cfg.graph.rows = detail::positive_int(g, "cells_y", -1, 2);
                cfg.graph.cols = detail::positive_int(g, "cells_x", -1, 2);
            } else if (gen == "chain_nn") {
                cfg.graph.n = detail::positive_int(g, "n", -1, 2);
                cfg.graph.periodic = g.boolean("periodic", false);
            } else if (gen == "uniform_full") {
                cfg.graph.n = detail::positive_int(g, "n", -1, 2);
            } else {
                throw ValidationError("config.graph.generator: unknown generator '" + gen +
                                      "' (square_lattice_pbc, kagome_pbc, chain_nn, uniform_full)");
            }
        }
        g.finish();
    }

    cfg.f_s = top.number("f_s", 0.03);
    if (!(cfg.f_s > 0.0 && cfg.f_s < 1.0))
        throw ValidationError("config.f_s: must lie in (0, 1)");
    if (top.has("budget_hz")) {
        const double b = top.number("budget_hz");
        if (!(b > 0.0))
            throw ValidationError("config.budget_hz: must be positive");
        cfg.budget = hz_to_rad(b);
    }
    if (top.has("solver")) {
        detail::ObjectReader s(top.raw("solver"), "config.solver");
        cfg.solver.residual_tol = s.number("residual_tol", cfg.solver.residual_tol);
        cfg.solver.max_iter = detail::positive_int(s, "max_iter", cfg.solver.max_iter);
        cfg.solver.stage_iter = detail::positive_int(s, "stage_iter", cfg.solver.stage_iter);
        cfg.solver.n_starts = detail::positive_int(s, "n_starts", cfg.solver.n_starts);
        s.finish();
    }
    cfg.solver.rng_seed = cfg.seed;
    if (cfg.budget) {
        cfg.solver.mode = SolveMode::fixed_budget;
        cfg.solver.budget = *cfg.budget;
    }
    try {
        cfg.solver.validate();
    } catch (const ValidationError& e) {
        throw ValidationError(std::string("config.solver: ") + e.what());
    }

    cfg.epsilon = top.number("epsilon", default_epsilon);
    if (cfg.epsilon < 0.0)
        throw ValidationError("config.epsilon: must be >= 0");
    if (top.has("sensitivity")) {
        detail::ObjectReader s(top.raw("sensitivity"), "config.sensitivity");
        SensitivitySpec spec;
        spec.delta = s.number("delta", spec.delta);
        spec.trials = detail::positive_int(s, "trials", spec.trials);
        s.finish();
        if (!(spec.delta >= 0.0 && spec.delta < 1.0))
            throw ValidationError("config.sensitivity.delta: must lie in [0, 1)");
        cfg.sensitivity = spec;
    }
    if (top.has("scaling")) {
        detail::ObjectReader s(top.raw("scaling"), "config.scaling");
        ScalingSpec spec;
        spec.family = parse_family(s.string("family"));
        spec.n_min = detail::positive_int(s, "n_min", spec.n_min, 3);
        spec.n_max = detail::positive_int(s, "n_max", spec.n_max, 3);
        s.finish();
        if (spec.n_min > spec.n_max)
            throw ValidationError("config.scaling: n_min must not exceed n_max");
        cfg.scaling = spec;
    }
    {
        std::filesystem::path out = top.string("outputs");
        if (out.empty())
            throw ValidationError("config.outputs: must not be empty");
        if (out.is_relative())
            out = base_dir / out;
        cfg.outputs = out.lexically_normal();
    }
    top.finish();
    cfg.source = j;
    return cfg;
}

inline RunConfig load_run_config(const std::filesystem::path& path)
{
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(io::read_text(path), nullptr, true, true);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
    return parse_run_config(j, path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

inline TargetGraph build_graph(const GraphSpec& spec)
{
    if (spec.file)
        return io::graph_from_file(*spec.file);
    if (spec.generator == "square_lattice_pbc")
        return square_lattice_pbc(spec.rows, spec.cols, spec.j0);
    if (spec.generator == "kagome_pbc")
        return kagome_pbc(spec.cols, spec.rows, spec.j0);
    if (spec.generator == "chain_nn")
        return chain_nn(spec.n, spec.j0, spec.periodic);
    if (spec.generator == "uniform_full")
        return uniform_full(spec.n, spec.j0);
    throw ValidationError("unknown graph generator '" + spec.generator + "'");
}

} // namespace ionspin

#endif // IONSPIN_CONFIG_HPP
