#ifndef IONSPIN_PIPELINE_HPP
#define IONSPIN_PIPELINE_HPP

#include "ionspin/common.hpp"
#include "ionspin/config.hpp"
#include "ionspin/coupling.hpp"
#include "ionspin/crystal.hpp"
#include "ionspin/errors.hpp"
#include "ionspin/graphs.hpp"
#include "ionspin/inverse.hpp"
#include "ionspin/io.hpp"

#include "json.hpp"

#include <cmath>
#include <filesystem>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace ionspin {

namespace fs = std::filesystem;

/// Runs `fn`, prefixing any library error with the stage name.
template <class Fn>
auto stage(const std::string& name, Fn&& fn) -> decltype(fn())
{
    try {
        return fn();
    } catch (const NumericalError& e) {
        throw NumericalError("stage " + name + ": " + e.what());
    } catch (const ValidationError& e) {
        throw ValidationError("stage " + name + ": " + e.what());
    }
}

/// Chain positions in metres plus the dimensionless coordinates.
inline std::string positions_csv(const IonCrystal& c)
{
    std::ostringstream os;
    os << std::setprecision(io::csv_precision);
    os << "# ion,position_m,position_scaled\n";
    for (int i = 0; i < c.size(); ++i)
        os << i << ',' << c.positions[i] * c.length_scale << ',' << c.positions[i] << '\n';
    return os.str();
}

/// One row per mode: index, frequency (Hz), participation b(i, m) for every ion.
inline std::string modes_csv(const ModeSpectrum& m)
{
    std::ostringstream os;
    os << std::setprecision(io::csv_precision);
    os << "# mode,frequency_hz,b_0..b_{N-1}\n";
    for (int k = 0; k < m.size(); ++k) {
        os << k << ',' << rad_to_hz(m.frequencies[k]);
        for (int i = 0; i < m.size(); ++i)
            os << ',' << m.mode_matrix(i, k);
        os << '\n';
    }
    return os.str();
}

inline std::string lamb_dicke_csv(const ModeSpectrum& m)
{
    std::ostringstream os;
    os << "# eta(ion, mode)\n";
    io::write_matrix_csv(os, m.lamb_dicke);
    return os.str();
}

inline std::string schedule_csv(const DetuningSchedule& s, const ModeSpectrum& m)
{
    std::ostringstream os;
    os << std::setprecision(io::csv_precision);
    os << "# tone,mu_hz,paired_mode_hz,offset_hz\n";
    for (int k = 0; k < s.size(); ++k)
        os << k << ',' << rad_to_hz(s.detunings[k]) << ',' << rad_to_hz(m.frequencies[k]) << ','
           << rad_to_hz(s.detunings[k] - m.frequencies[k]) << '\n';
    return os.str();
}

inline std::string matrix_csv_hz(const Eigen::MatrixXd& m)
{
    std::ostringstream os;
    io::write_matrix_csv(os, m, 1.0 / two_pi);
    return os.str();
}

inline nlohmann::json trap_json(const TrapConfig& t)
{
    nlohmann::json j;
    j["n_ions"] = t.n_ions;
    j["omega_com_hz"] = rad_to_hz(t.omega_com);
    j["ion_mass_kg"] = t.ion_mass;
    j["delta_k_per_m"] = t.delta_k;
    if (const auto* h = std::get_if<HarmonicAxial>(&t.axial)) {
        j["axial"] = {{"omega_z_hz", rad_to_hz(h->omega_z)}};
    } else {
        const auto& q = std::get<QuarticAxial>(t.axial);
        j["axial"] = {{"alpha2", q.alpha2}, {"alpha4", q.alpha4}};
    }
    j["qubit_freq_hz"] = t.qubit_freq ? nlohmann::json(rad_to_hz(*t.qubit_freq)) : nlohmann::json(nullptr);
    return j;
}

struct DesignOutcome {
    TargetGraph graph;
    IonCrystal crystal;
    ModeSpectrum modes;
    DetuningSchedule schedule;
    ResponseTensor response;
    SolveResult solve;
    RoundtripReport roundtrip;
    ValidityReport validity;
    ErrorBudget errors;
    std::vector<std::string> files;
};

/// Full design pipeline. Writes every artifact into cfg.outputs, then throws
/// NumericalError if the solve did not converge.
inline DesignOutcome run_design(const RunConfig& cfg)
{
    DesignOutcome out;
    out.graph = stage("graph", [&] { return build_graph(cfg.graph); });
    if (out.graph.n != cfg.trap.n_ions)
        throw ValidationError("stage graph: graph has " + std::to_string(out.graph.n) + " ions but trap.n_ions is " +
                              std::to_string(cfg.trap.n_ions));
    stage("outputs", [&] {
        std::error_code ec;
        fs::create_directories(cfg.outputs, ec);
        if (ec || !fs::is_directory(cfg.outputs))
            throw ValidationError("cannot create output directory " + cfg.outputs.string());
        return 0;
    });

    out.crystal = stage("crystal", [&] { return equilibrium_positions(cfg.trap); });
    out.modes = stage("modes", [&] { return transverse_modes(cfg.trap, out.crystal); });
    out.schedule = stage("schedule", [&] { return detuning_schedule(out.modes, cfg.f_s); });
    out.response = stage("response", [&] { return response_tensor(out.modes, out.schedule); });
    out.solve = stage("solve", [&] { return solve_rabi(out.graph, out.response, cfg.solver); });
    out.roundtrip = stage("verify", [&] { return verify_roundtrip(out.solve, out.graph, out.response, cfg.solver); });
    out.validity = stage("validity", [&] { return validity_check(out.solve.omega, out.schedule, out.modes); });
    out.errors = stage("errors", [&] {
        ErrorBudget e;
        if (cfg.sensitivity)
            e = trap_sensitivity(out.solve.omega, out.modes, out.schedule, cfg.sensitivity->delta, cfg.sensitivity->trials,
                                 derive_seed(cfg.seed, "run/sensitivity"));
        e.p_ph = phonon_error(out.solve.omega, out.modes, out.schedule);
        e.epsilon = cfg.epsilon;
        e.gamma = spontaneous_rate(out.solve.omega, cfg.epsilon);
        return e;
    });

    stage("write", [&] {
        auto put = [&](const std::string& name, const std::string& text) {
            io::write_text(cfg.outputs / name, text);
            out.files.push_back(name);
        };
        put("positions.csv", positions_csv(out.crystal));
        put("modes.csv", modes_csv(out.modes));
        put("lamb_dicke.csv", lamb_dicke_csv(out.modes));
        put("schedule.csv", schedule_csv(out.schedule, out.modes));
        put("target.csv", matrix_csv_hz(out.graph.j_target));
        put("omega.csv", matrix_csv_hz(out.solve.omega.omega));
        put("j_attained.csv", matrix_csv_hz(out.solve.attained.j));

        std::ostringstream res;
        res.precision(17);
        res << "mode " << (cfg.solver.mode == SolveMode::fixed_budget ? "fixed_budget" : "exact_target") << "\n";
        res << "converged " << (out.solve.converged ? "true" : "false") << "\n";
        res << "solver_relative_residual " << out.solve.relative_residual << "\n";
        res << out.roundtrip.to_text();
        res << "objective_hz " << rad_to_hz(out.solve.objective) << "\n";
        if (cfg.solver.mode == SolveMode::fixed_budget)
            res << "attained_scale_hz " << rad_to_hz(out.solve.attained_scale) << "\n";
        res << "best_start " << out.solve.best_start << "\n";
        res << "iterations " << out.solve.iterations << "\n";
        put("residual.txt", res.str());
        put("validity.txt", out.validity.to_text());
        put("errors.txt", out.errors.to_text());

        nlohmann::json m;
        m["software"] = {{"name", "ionspin"}, {"version", version}};
        m["config"] = cfg.source;
        m["seed"] = cfg.seed;
        m["seeds"] = {{"solve_start_label", "solve_rabi/start"},
                      {"sensitivity", derive_seed(cfg.seed, "run/sensitivity")}};
        nlohmann::json resolved;
        resolved["trap"] = trap_json(cfg.trap);
        resolved["default_axial_rule"] = cfg.default_axial ? nlohmann::json(default_anisotropy_fraction) : nlohmann::json(nullptr);
        resolved["graph"] = io::graph_metadata(out.graph);
        if (cfg.graph.file) {
            resolved["graph"]["file"] = cfg.graph.file->string();
        } else {
            resolved["graph"]["generator"] = cfg.graph.generator;
            resolved["graph"]["j0_hz"] = rad_to_hz(cfg.graph.j0);
        }
        resolved["f_s"] = cfg.f_s;
        resolved["budget_hz"] = cfg.budget ? nlohmann::json(rad_to_hz(*cfg.budget)) : nlohmann::json(nullptr);
        resolved["solver"] = {{"mode", cfg.solver.mode == SolveMode::fixed_budget ? "fixed_budget" : "exact_target"},
                              {"residual_tol", cfg.solver.residual_tol},
                              {"max_iter", cfg.solver.max_iter},
                              {"stage_iter", cfg.solver.stage_iter},
                              {"n_starts", cfg.solver.n_starts},
                              {"rng_seed", cfg.solver.rng_seed}};
        resolved["epsilon"] = cfg.epsilon;
        resolved["sensitivity"] = cfg.sensitivity ? nlohmann::json{{"delta", cfg.sensitivity->delta},
                                                                    {"trials", cfg.sensitivity->trials}}
                                                  : nlohmann::json(nullptr);
        resolved["length_scale_m"] = out.crystal.length_scale;
        resolved["reference_gap_hz"] = rad_to_hz(out.schedule.reference_gap);
        m["resolved"] = resolved;
        m["files"] = out.files;
        io::write_text(cfg.outputs / "manifest.json", m.dump(2) + "\n");
        out.files.push_back("manifest.json");
        return 0;
    });

    if (!out.solve.converged) {
        std::ostringstream os;
        os << "stage solve: no start reached residual " << cfg.solver.residual_tol << " (best "
           << out.solve.relative_residual << ")";
        throw NumericalError(os.str());
    }
    return out;
}

inline std::string scaling_csv(const ScalingResult& r)
{
    std::ostringstream os;
    os << std::setprecision(io::csv_precision);
    os << "n,j_metric_hz,j_metric_reduced_hz,p_ph,gamma_per_s,f_s,budget_hz,converged\n";
    for (const auto& row : r.rows)
        os << row.n << ',' << row.j_metric_hz << ',' << row.j_metric_reduced_hz << ',' << row.p_ph << ',' << row.gamma
           << ',' << row.f_s << ',' << rad_to_hz(row.budget) << ',' << (row.converged ? 1 : 0) << '\n';
    return os.str();
}

inline std::string slope_text(const ScalingResult& r)
{
    std::ostringstream os;
    os.precision(17);
    os << "slope " << (r.slope ? io::format_double(*r.slope) : std::string("none")) << "\n";
    if (r.slope_reduced)
        os << "slope_reduced " << *r.slope_reduced << "\n";
    return os.str();
}

/// Scaling study driven by a run config (trap.omega_com, f_s, budget_hz, solver, seed, scaling).
inline ScalingResult run_scaling(const RunConfig& cfg)
{
    require(cfg.scaling.has_value(), "run_scaling: config has no scaling section");
    require(cfg.budget.has_value(), "run_scaling: config needs budget_hz");
    ScalingOptions opt;
    opt.n_min = cfg.scaling->n_min;
    opt.n_max = cfg.scaling->n_max;
    opt.family = cfg.scaling->family;
    opt.f_s = cfg.f_s;
    opt.budget = *cfg.budget;
    opt.omega_com = cfg.trap.omega_com;
    opt.epsilon = cfg.epsilon;
    opt.solver = cfg.solver;
    const ScalingResult r = stage("scaling", [&] { return scaling_study(opt); });
    stage("write", [&] {
        std::error_code ec;
        fs::create_directories(cfg.outputs, ec);
        io::write_text(cfg.outputs / "scaling.csv", scaling_csv(r));
        io::write_text(cfg.outputs / "slope.txt", slope_text(r));
        nlohmann::json m;
        m["software"] = {{"name", "ionspin"}, {"version", version}};
        m["config"] = cfg.source;
        m["seed"] = cfg.seed;
        m["seeds"] = {{"per_n_label", "scaling/n"}};
        m["files"] = {"scaling.csv", "slope.txt"};
        io::write_text(cfg.outputs / "manifest.json", m.dump(2) + "\n");
        return 0;
    });
    return r;
}

/// Plot-ready bundles derived from run artifacts in `dir`:
/// spectrum.csv (modes and tones), omega_heatmap.csv (long form), j_heatmap.csv,
/// and scaling_loglog.csv when scaling.csv is present.
inline std::vector<std::string> emit_plotdata(const fs::path& dir, const fs::path& out_dir)
{
    const bool design = fs::exists(dir / "modes.csv");
    const bool scaling = fs::exists(dir / "scaling.csv");
    if (!design && !scaling)
        throw ValidationError("plotdata: " + dir.string() + " has neither modes.csv nor scaling.csv");
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    std::vector<std::string> written;

    if (design) {
        for (const char* need : {"schedule.csv", "omega.csv", "j_attained.csv"})
            if (!fs::exists(dir / need))
                throw ValidationError("plotdata: missing " + (dir / need).string());
        const Eigen::MatrixXd modes = io::read_matrix_csv(dir / "modes.csv");
        const Eigen::MatrixXd sched = io::read_matrix_csv(dir / "schedule.csv");
        const Eigen::MatrixXd omega = io::read_square_csv(dir / "omega.csv");
        const Eigen::MatrixXd j = io::read_square_csv(dir / "j_attained.csv");
        require(modes.rows() == omega.rows() && sched.rows() == omega.rows(), "plotdata: artifact sizes disagree");

        std::ostringstream sp;
        sp << std::setprecision(io::csv_precision);
        sp << "index,mode_frequency_hz,tone_frequency_hz,tone_weight_hz\n";
        for (Eigen::Index k = 0; k < modes.rows(); ++k)
            sp << k << ',' << modes(k, 1) << ',' << sched(k, 1) << ',' << omega.col(k).cwiseAbs().sum() << '\n';
        io::write_text(out_dir / "spectrum.csv", sp.str());
        written.push_back("spectrum.csv");

        auto long_form = [](const Eigen::MatrixXd& m, const char* a, const char* b, const char* v) {
            std::ostringstream os;
            os << std::setprecision(io::csv_precision);
            os << a << ',' << b << ',' << v << '\n';
            for (Eigen::Index r = 0; r < m.rows(); ++r)
                for (Eigen::Index c = 0; c < m.cols(); ++c)
                    os << r << ',' << c << ',' << m(r, c) << '\n';
            return os.str();
        };
        io::write_text(out_dir / "omega_heatmap.csv", long_form(omega, "ion", "tone", "omega_hz"));
        io::write_text(out_dir / "j_heatmap.csv", long_form(j, "ion_i", "ion_j", "j_hz"));
        written.push_back("omega_heatmap.csv");
        written.push_back("j_heatmap.csv");
    }
    if (scaling) {
        // skip the header line
        std::string text = io::read_text(dir / "scaling.csv");
        text = text.substr(std::min(text.size(), text.find('\n') + 1));
        const Eigen::MatrixXd s = io::parse_matrix_csv(text, (dir / "scaling.csv").string());
        std::ostringstream os;
        os << std::setprecision(io::csv_precision);
        os << "n,j_metric_hz,log10_n,log10_j_metric,converged\n";
        for (Eigen::Index r = 0; r < s.rows(); ++r) {
            const double n = s(r, 0), y = s(r, 1);
            os << n << ',' << y << ',' << std::log10(n) << ',' << (y > 0.0 ? io::format_double(std::log10(y)) : "nan")
               << ',' << s(r, 7) << '\n';
        }
        io::write_text(out_dir / "scaling_loglog.csv", os.str());
        written.push_back("scaling_loglog.csv");
    }
    return written;
}

} // namespace ionspin

#endif // IONSPIN_PIPELINE_HPP
