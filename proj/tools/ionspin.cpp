// ionspin command-line driver.
//
// Exit status: 0 success, 1 invalid input, 2 numerical failure.

#include "ionspin/config.hpp"
#include "ionspin/coupling.hpp"
#include "ionspin/crystal.hpp"
#include "ionspin/dynamics.hpp"
#include "ionspin/errors.hpp"
#include "ionspin/graphs.hpp"
#include "ionspin/inverse.hpp"
#include "ionspin/io.hpp"
#include "ionspin/pipeline.hpp"

#include "CLI11.hpp"

#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

using namespace ionspin;
namespace fs = std::filesystem;

namespace {

TrapConfig trap_from_flags(int n, double omega_com_hz, std::optional<double> omega_z_hz)
{
    require(n >= 1, "--n must be >= 1");
    if (!omega_z_hz)
        return default_trap(n, hz_to_rad(omega_com_hz));
    TrapConfig t;
    t.n_ions = n;
    t.omega_com = hz_to_rad(omega_com_hz);
    t.axial = HarmonicAxial{hz_to_rad(*omega_z_hz)};
    t.validate();
    return t;
}

std::string config_string(std::uint64_t c, int n)
{
    std::string s;
    for (int i = 0; i < n; ++i)
        s += (c >> i) & 1U ? 'd' : 'u';
    return s;
}

CouplingMatrix coupling_from_file(const std::string& path)
{
    const TargetGraph g = io::graph_from_file(path);
    return {g.j_target};
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Rabi-frequency design for programmable Ising couplings in linear ion chains"};
    app.set_version_flag("--version", std::string(version));
    app.require_subcommand(1);
    std::cout << std::setprecision(io::csv_precision);

    // modes
    int m_n = 10;
    double m_com = 5e6;
    std::optional<double> m_wz;
    std::string m_out;
    auto* modes = app.add_subcommand("modes", "Equilibrium positions and transverse modes");
    modes->add_option("--n", m_n, "Number of ions")->required();
    modes->add_option("--omega-com-hz", m_com, "Transverse COM frequency (Hz)");
    modes->add_option("--omega-z-hz", m_wz, "Axial frequency (Hz); default anisotropy rule when omitted");
    modes->add_option("--out", m_out, "Output directory (positions.csv, modes.csv, lamb_dicke.csv)");

    // graph
    std::string g_type = "chain";
    int g_rows = 0, g_cols = 0, g_n = 0;
    double g_j0 = 1.0;
    bool g_periodic = false;
    std::string g_out;
    auto* graph = app.add_subcommand("graph", "Generate a target coupling graph (CSV in Hz + metadata)");
    graph->add_option("--type", g_type, "square | kagome | chain | uniform")->required();
    graph->add_option("--rows", g_rows, "Rows (square) or cells_y (kagome)");
    graph->add_option("--cols", g_cols, "Columns (square) or cells_x (kagome)");
    graph->add_option("--n", g_n, "Ion count (chain, uniform)");
    graph->add_option("--j0-hz", g_j0, "Edge weight (Hz)");
    graph->add_flag("--periodic", g_periodic, "Close the chain into a ring");
    graph->add_option("--out", g_out, "Output stem; CSV to standard output when omitted");

    // solve / run
    std::string s_config;
    bool s_scaling = false;
    auto* solve = app.add_subcommand("solve", "Run the design pipeline from a config file");
    solve->add_option("--config", s_config, "JSON run config")->required()->check(CLI::ExistingFile);
    auto* run = app.add_subcommand("run", "Run a config: design, or the scaling study with --scaling");
    run->add_option("--config", s_config, "JSON run config")->required()->check(CLI::ExistingFile);
    run->add_flag("--scaling", s_scaling, "Run the config's scaling section");

    // verify
    std::string v_config, v_omega, v_reference;
    double v_tol = 1e-6;
    auto* verify = app.add_subcommand("verify", "Recompute couplings from omega.csv by an independent loop and compare");
    verify->add_option("--config", v_config, "JSON run config used for the design")->required()->check(CLI::ExistingFile);
    verify->add_option("--omega", v_omega, "Rabi matrix CSV (Hz); default <outputs>/omega.csv");
    verify->add_option("--reference", v_reference, "Coupling CSV (Hz); default <outputs>/j_attained.csv");
    verify->add_option("--tol", v_tol, "Relative residual tolerance");

    // scaling
    std::string c_family = "chain", c_out;
    int c_nmin = 3, c_nmax = 33, c_starts = 8;
    double c_fs = 0.03, c_budget = 1e6, c_com = 5e6;
    std::uint64_t c_seed = 1;
    auto* scaling = app.add_subcommand("scaling", "Coupling scale versus ion number");
    scaling->add_option("--family", c_family, "chain | uniform");
    scaling->add_option("--nmin", c_nmin);
    scaling->add_option("--nmax", c_nmax);
    scaling->add_option("--fs", c_fs, "Detuning fraction f_s");
    scaling->add_option("--budget", c_budget, "sum |Omega| (Hz)");
    scaling->add_option("--omega-com-hz", c_com);
    scaling->add_option("--starts", c_starts, "Optimizer starts per N");
    scaling->add_option("--seed", c_seed);
    scaling->add_option("--out", c_out, "Directory for scaling.csv and slope.txt");

    // sensitivity
    std::string e_config, e_omega;
    double e_delta = 1e-3;
    int e_trials = 1000;
    std::uint64_t e_seed = 7;
    auto* sensitivity = app.add_subcommand("sensitivity", "Monte Carlo coupling error under mode-frequency noise");
    sensitivity->add_option("--config", e_config, "JSON run config of the design")->required()->check(CLI::ExistingFile);
    sensitivity->add_option("--omega", e_omega, "Rabi matrix CSV (Hz); default <outputs>/omega.csv");
    sensitivity->add_option("--delta", e_delta, "Fractional frequency noise (std)");
    sensitivity->add_option("--trials", e_trials);
    sensitivity->add_option("--seed", e_seed);

    // dynamics
    std::string d_j, d_jy, d_obs = "zzcorr", d_axis = "x";
    double d_t = 1e-3;
    int d_steps = 100, d_trotter = 0;
    std::uint64_t d_init = 0;
    std::vector<int> d_pair{0, 1};
    auto* dynamics = app.add_subcommand("dynamics", "Exact spin evolution under the Ising Hamiltonian");
    dynamics->add_option("--j", d_j, "Coupling CSV (Hz)")->required()->check(CLI::ExistingFile);
    dynamics->add_option("--axis", d_axis, "Axis of the --j interaction: x | y | z");
    dynamics->add_option("--jy", d_jy, "Second coupling CSV (Hz) applied along y")->check(CLI::ExistingFile);
    dynamics->add_option("--t", d_t, "Final time (s)");
    dynamics->add_option("--steps", d_steps, "Number of output samples after t = 0");
    dynamics->add_option("--trotter", d_trotter, "Use first-order Trotter with this many slices per sample");
    dynamics->add_option("--observable", d_obs, "zzcorr | xxcorr | yycorr | sz");
    dynamics->add_option("--pair", d_pair, "Spin pair (or single spin for sz)")->expected(1, 2);
    dynamics->add_option("--initial", d_init, "Initial z-basis index (bit i set = spin i down)");

    // groundstate
    std::string q_j;
    auto* groundstate = app.add_subcommand("groundstate", "Exhaustive classical ground state");
    groundstate->add_option("--j", q_j, "Coupling CSV (Hz)")->required()->check(CLI::ExistingFile);

    // plotdata
    std::string p_dir, p_out;
    auto* plotdata = app.add_subcommand("plotdata", "Plot-ready CSV bundles from run artifacts");
    plotdata->add_option("--dir", p_dir, "Run output directory")->required()->check(CLI::ExistingDirectory);
    plotdata->add_option("--out", p_out, "Destination (default <dir>/plot)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*modes) {
            const TrapConfig trap = trap_from_flags(m_n, m_com, m_wz);
            const IonCrystal crystal = equilibrium_positions(trap);
            const ModeSpectrum spec = transverse_modes(trap, crystal);
            if (m_out.empty()) {
                std::cout << modes_csv(spec);
            } else {
                fs::create_directories(m_out);
                io::write_text(fs::path(m_out) / "positions.csv", positions_csv(crystal));
                io::write_text(fs::path(m_out) / "modes.csv", modes_csv(spec));
                io::write_text(fs::path(m_out) / "lamb_dicke.csv", lamb_dicke_csv(spec));
            }
            return 0;
        }
        if (*graph) {
            const double j0 = hz_to_rad(g_j0);
            TargetGraph g;
            if (g_type == "square")
                g = square_lattice_pbc(g_rows, g_cols, j0);
            else if (g_type == "kagome")
                g = kagome_pbc(g_cols, g_rows, j0);
            else if (g_type == "chain")
                g = chain_nn(g_n, j0, g_periodic);
            else if (g_type == "uniform")
                g = uniform_full(g_n, j0);
            else
                throw ValidationError("unknown graph type '" + g_type + "'");
            if (g_out.empty())
                io::write_matrix_csv(std::cout, g.j_target, 1.0 / two_pi);
            else
                io::write_graph(g_out, g);
            return 0;
        }
        if (*solve || (*run && !s_scaling)) {
            const RunConfig cfg = load_run_config(s_config);
            const DesignOutcome out = run_design(cfg);
            std::cout << "outputs " << cfg.outputs.string() << "\n";
            std::cout << "relative_residual " << out.roundtrip.relative_residual << "\n";
            if (cfg.solver.mode == SolveMode::fixed_budget)
                std::cout << "attained_scale_hz " << rad_to_hz(out.solve.attained_scale) << "\n";
            std::cout << "validity_max_ratio " << out.validity.max_ratio << "\n";
            return 0;
        }
        if (*run && s_scaling) {
            const RunConfig cfg = load_run_config(s_config);
            const ScalingResult r = run_scaling(cfg);
            std::cout << scaling_csv(r) << slope_text(r);
            return 0;
        }
        if (*verify) {
            const RunConfig cfg = load_run_config(v_config);
            const fs::path omega_path = v_omega.empty() ? cfg.outputs / "omega.csv" : fs::path(v_omega);
            const fs::path ref_path = v_reference.empty() ? cfg.outputs / "j_attained.csv" : fs::path(v_reference);
            const IonCrystal crystal = equilibrium_positions(cfg.trap);
            const ModeSpectrum spec = transverse_modes(cfg.trap, crystal);
            const ResponseTensor f = response_tensor(spec, detuning_schedule(spec, cfg.f_s));
            const RabiMatrix omega{io::read_square_csv(omega_path) * two_pi};
            const Eigen::MatrixXd reference = io::read_square_csv(ref_path) * two_pi;
            const RoundtripReport rep = verify_roundtrip(omega, reference, f);
            std::cout << rep.to_text();
            if (!(rep.relative_residual <= v_tol)) {
                std::cerr << "verify: relative residual " << rep.relative_residual << " exceeds " << v_tol << "\n";
                return 2;
            }
            return 0;
        }
        if (*scaling) {
            ScalingOptions opt;
            opt.family = parse_family(c_family);
            opt.n_min = c_nmin;
            opt.n_max = c_nmax;
            opt.f_s = c_fs;
            opt.budget = hz_to_rad(c_budget);
            opt.omega_com = hz_to_rad(c_com);
            opt.solver.n_starts = c_starts;
            opt.solver.rng_seed = c_seed;
            const ScalingResult r = scaling_study(opt);
            if (!c_out.empty()) {
                fs::create_directories(c_out);
                io::write_text(fs::path(c_out) / "scaling.csv", scaling_csv(r));
                io::write_text(fs::path(c_out) / "slope.txt", slope_text(r));
            }
            std::cout << scaling_csv(r) << slope_text(r);
            return 0;
        }
        if (*sensitivity) {
            const RunConfig cfg = load_run_config(e_config);
            const fs::path omega_path = e_omega.empty() ? cfg.outputs / "omega.csv" : fs::path(e_omega);
            const IonCrystal crystal = equilibrium_positions(cfg.trap);
            const ModeSpectrum spec = transverse_modes(cfg.trap, crystal);
            const DetuningSchedule sched = detuning_schedule(spec, cfg.f_s);
            const RabiMatrix omega{io::read_square_csv(omega_path) * two_pi};
            require(omega.size() == spec.size(), "sensitivity: omega size does not match the trap");
            ErrorBudget e = trap_sensitivity(omega, spec, sched, e_delta, e_trials, e_seed);
            e.p_ph = phonon_error(omega, spec, sched);
            e.epsilon = cfg.epsilon;
            e.gamma = spontaneous_rate(omega, cfg.epsilon);
            std::cout << e.to_text();
            std::cout << "ratio_to_prediction "
                      << (e.sensitivity_pred > 0.0 ? e.sensitivity_mean / e.sensitivity_pred : 0.0) << "\n";
            return 0;
        }
        if (*dynamics) {
            std::vector<InteractionTerm> terms{{parse_axis(d_axis), coupling_from_file(d_j)}};
            if (!d_jy.empty())
                terms.push_back({Axis::Y, coupling_from_file(d_jy)});
            const int n = terms.front().j.size();
            require(d_steps >= 1, "--steps must be >= 1");
            require(d_trotter >= 0, "--trotter must be >= 0");
            const int a = d_pair.at(0);
            const int b = d_pair.size() > 1 ? d_pair[1] : a;
            Axis obs_axis = Axis::Z;
            bool single = false;
            if (d_obs == "zzcorr")
                obs_axis = Axis::Z;
            else if (d_obs == "xxcorr")
                obs_axis = Axis::X;
            else if (d_obs == "yycorr")
                obs_axis = Axis::Y;
            else if (d_obs == "sz")
                single = true;
            else
                throw ValidationError("unknown observable '" + d_obs + "'");
            SpinState state = SpinState::basis(n, d_init);
            const double dt = d_t / d_steps;
            std::cout << "t_s," << d_obs << "\n";
            for (int k = 0; k <= d_steps; ++k) {
                if (k > 0)
                    state = d_trotter > 0 ? trotter_evolve(terms, state, dt, d_trotter) : evolve_exact(terms, state, dt);
                const double v = single ? magnetization(state, Axis::Z, a) : correlation(state, obs_axis, a, b);
                std::cout << io::format_double(dt * k) << ',' << io::format_double(v) << "\n";
            }
            return 0;
        }
        if (*groundstate) {
            const CouplingMatrix j = coupling_from_file(q_j);
            const GroundState gs = ground_state(j);
            std::cout << "energy_hz " << rad_to_hz(gs.energy) << "\n";
            std::cout << "degeneracy " << gs.configurations.size() << "\n";
            std::cout << "# configurations: character i is spin i along the coupling axis (u = +1, d = -1)\n";
            for (auto c : gs.configurations)
                std::cout << config_string(c, j.size()) << "\n";
            return 0;
        }
        if (*plotdata) {
            const fs::path out = p_out.empty() ? fs::path(p_dir) / "plot" : fs::path(p_out);
            for (const auto& f : emit_plotdata(p_dir, out))
                std::cout << (out / f).string() << "\n";
            return 0;
        }
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
