#ifndef IONSPIN_ERRORS_HPP
#define IONSPIN_ERRORS_HPP

#include "ionspin/common.hpp"
#include "ionspin/coupling.hpp"
#include "ionspin/crystal.hpp"
#include "ionspin/graphs.hpp"
#include "ionspin/inverse.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace ionspin {

inline constexpr double default_epsilon = 1e-5;

struct ErrorBudget {
    double p_ph = 0.0;
    double gamma = 0.0; // 1/s
    double epsilon = default_epsilon;
    double delta = 0.0;
    double sensitivity_pred = 0.0; // sqrt(N) delta
    double sensitivity_mean = 0.0;
    double sensitivity_std = 0.0;
    int trials = 0;
    int discarded = 0;

    std::string to_text() const
    {
        std::ostringstream os;
        os.precision(17);
        os << "p_ph " << p_ph << "\n";
        os << "gamma_per_s " << gamma << "\n";
        os << "epsilon " << epsilon << "\n";
        if (trials > 0) {
            os << "delta " << delta << "\n";
            os << "sensitivity_pred " << sensitivity_pred << "\n";
            os << "sensitivity_mc_mean " << sensitivity_mean << "\n";
            os << "sensitivity_mc_std " << sensitivity_std << "\n";
            os << "trials " << trials << "\n";
            os << "discarded " << discarded << "\n";
        }
        return os.str();
    }
};

/// p_ph = sum_{i,m} (eta(i,m) Omega(i,m) / (omega_m - mu_m))^2, column m paired with mode m.
inline double phonon_error(const RabiMatrix& omega, const ModeSpectrum& modes, const DetuningSchedule& sched)
{
    const int n = modes.size();
    require(omega.size() == n && sched.size() == n, "phonon_error: inconsistent sizes");
    double p = 0.0;
    for (int m = 0; m < n; ++m) {
        const double det = modes.frequencies[m] - sched.detunings[m];
        if (det == 0.0)
            throw NumericalError("phonon_error: tone " + std::to_string(m) + " is resonant with its mode");
        for (int i = 0; i < n; ++i) {
            const double r = modes.lamb_dicke(i, m) * omega.omega(i, m) / det;
            p += r * r;
        }
    }
    return p;
}

inline double spontaneous_rate(const RabiMatrix& omega, double epsilon = default_epsilon)
{
    require(epsilon >= 0.0, "spontaneous_rate: epsilon must be >= 0");
    return epsilon * omega.omega.cwiseAbs().sum();
}

/// Monte Carlo over independent Gaussian fractional shifts of every mode frequency
/// (std delta). Detunings, amplitudes, positions and mode vectors stay fixed; eta
/// follows the shifted frequency. Trial t draws from derive_seed(seed, "sensitivity", t).
/// Trials that put a tone on a mode are discarded and counted.
inline ErrorBudget trap_sensitivity(const RabiMatrix& omega, const ModeSpectrum& modes, const DetuningSchedule& sched,
                                    double delta, int trials, std::uint64_t seed)
{
    const int n = modes.size();
    require(omega.size() == n && sched.size() == n, "trap_sensitivity: inconsistent sizes");
    require(delta >= 0.0 && delta < 1.0, "trap_sensitivity: delta must lie in [0, 1)");
    require(trials >= 1, "trap_sensitivity: trials must be >= 1");

    ErrorBudget out;
    out.delta = delta;
    out.sensitivity_pred = std::sqrt(static_cast<double>(n)) * delta;
    const Eigen::MatrixXd j0 = forward_coupling(omega, response_tensor(modes, sched)).j;
    const double norm0 = j0.norm();
    if (norm0 == 0.0) {
        out.trials = trials;
        return out;
    }

    std::vector<double> errors(trials, std::numeric_limits<double>::quiet_NaN());
    for (int t = 0; t < trials; ++t) {
        std::mt19937_64 rng(derive_seed(seed, "sensitivity", static_cast<std::uint64_t>(t)));
        std::normal_distribution<double> noise(0.0, delta);
        ModeSpectrum shifted = modes;
        for (int m = 0; m < n; ++m) {
            const double w = modes.frequencies[m] * (1.0 + noise(rng));
            shifted.lamb_dicke.col(m) *= std::sqrt(modes.frequencies[m] / w);
            shifted.frequencies[m] = w;
        }
        try {
            const Eigen::MatrixXd j = forward_coupling(omega, response_tensor(shifted, sched)).j;
            errors[t] = (j - j0).norm() / norm0;
        } catch (const NumericalError&) {
        }
    }

    double sum = 0.0, sum_sq = 0.0;
    int kept = 0;
    for (double e : errors) {
        if (std::isnan(e))
            continue;
        ++kept;
        sum += e;
        sum_sq += e * e;
    }
    out.trials = kept;
    out.discarded = trials - kept;
    if (kept == 0)
        throw NumericalError("trap_sensitivity: every trial hit a resonance");
    out.sensitivity_mean = sum / kept;
    out.sensitivity_std = kept > 1 ? std::sqrt(std::max(0.0, (sum_sq - sum * sum / kept) / (kept - 1))) : 0.0;
    return out;
}

enum class ScalingFamily { chain, uniform };

inline std::string to_string(ScalingFamily f) { return f == ScalingFamily::chain ? "chain" : "uniform"; }

inline ScalingFamily parse_family(const std::string& s)
{
    if (s == "chain" || s == "chain_nn")
        return ScalingFamily::chain;
    if (s == "uniform" || s == "uniform_full")
        return ScalingFamily::uniform;
    throw ValidationError("unknown scaling family '" + s + "' (expected chain or uniform)");
}

struct ScalingRow {
    int n = 0;
    double j_metric_hz = 0.0;         // chain: nearest-neighbour J; uniform: N mean|J|
    double j_metric_reduced_hz = 0.0; // uniform only: budget scaled by ln N / N
    double p_ph = 0.0;
    double gamma = 0.0;
    double f_s = 0.0;
    double budget = 0.0; // rad/s
    bool converged = false;
};

struct ScalingResult {
    std::vector<ScalingRow> rows;
    std::optional<double> slope;
    std::optional<double> slope_reduced;
};

/// OLS slope of log(y) against log(n). Needs two distinct n.
inline std::optional<double> fit_loglog_slope(const std::vector<double>& n, const std::vector<double>& y)
{
    require(n.size() == y.size(), "fit_loglog_slope: size mismatch");
    const std::size_t k = n.size();
    if (k < 2)
        return std::nullopt;
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        require(n[i] > 0.0 && y[i] > 0.0, "fit_loglog_slope: values must be positive");
        mx += std::log(n[i]);
        my += std::log(y[i]);
    }
    mx /= static_cast<double>(k);
    my /= static_cast<double>(k);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        const double dx = std::log(n[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    if (sxx == 0.0)
        return std::nullopt;
    return sxy / sxx;
}

struct ScalingOptions {
    int n_min = 3;
    int n_max = 33;
    ScalingFamily family = ScalingFamily::chain;
    double f_s = 0.03;
    double budget = two_pi * 1e6; // rad/s
    double omega_com = two_pi * 5e6;
    double epsilon = default_epsilon;
    SolveConfig solver;
};

namespace detail {

inline double uniform_metric(const Eigen::MatrixXd& j)
{
    const int n = static_cast<int>(j.rows());
    double s = 0.0;
    for (int b = 0; b < n; ++b)
        for (int a = b + 1; a < n; ++a)
            s += std::abs(j(a, b));
    return n * s / (0.5 * n * (n - 1));
}

} // namespace detail

/// One row per N with the default trap. Chains are solved under the fixed budget;
/// the uniform family uses one tone at the first scheduled detuning with equal
/// amplitudes. Rows that did not converge are kept but excluded from the fit.
inline ScalingResult scaling_study(const ScalingOptions& opt)
{
    require(opt.n_min >= 3 && opt.n_min <= opt.n_max, "scaling_study: need 3 <= n_min <= n_max");
    require(opt.budget > 0.0, "scaling_study: budget must be positive");
    require(opt.f_s > 0.0 && opt.f_s < 1.0, "scaling_study: f_s must lie in (0, 1)");

    ScalingResult res;
    for (int n = opt.n_min; n <= opt.n_max; ++n) {
        const TrapConfig trap = default_trap(n, opt.omega_com);
        const IonCrystal crystal = equilibrium_positions(trap);
        const ModeSpectrum modes = transverse_modes(trap, crystal);
        const DetuningSchedule sched = detuning_schedule(modes, opt.f_s);

        ScalingRow row;
        row.n = n;
        row.f_s = opt.f_s;
        row.budget = opt.budget;
        if (opt.family == ScalingFamily::chain) {
            SolveConfig sc = opt.solver;
            sc.mode = SolveMode::fixed_budget;
            sc.budget = opt.budget;
            sc.rng_seed = derive_seed(opt.solver.rng_seed, "scaling/n", static_cast<std::uint64_t>(n));
            const ResponseTensor f = response_tensor(modes, sched);
            const SolveResult r = solve_rabi(chain_nn(n, 1.0), f, sc);
            row.converged = r.converged;
            row.j_metric_hz = rad_to_hz(r.attained_scale);
            row.p_ph = phonon_error(r.omega, modes, sched);
            row.gamma = spontaneous_rate(r.omega, opt.epsilon);
        } else {
            const double mu = sched.detunings[0];
            const Eigen::VectorXd amp = Eigen::VectorXd::Constant(n, opt.budget / n);
            row.j_metric_hz = rad_to_hz(detail::uniform_metric(single_tone_coupling(amp, mu, modes).j));
            const double reduced = opt.budget * std::log(static_cast<double>(n)) / n;
            const Eigen::VectorXd amp_r = Eigen::VectorXd::Constant(n, reduced / n);
            row.j_metric_reduced_hz = rad_to_hz(detail::uniform_metric(single_tone_coupling(amp_r, mu, modes).j));
            RabiMatrix omega = RabiMatrix::zero(n);
            omega.omega.col(0) = amp;
            row.p_ph = phonon_error(omega, modes, sched);
            row.gamma = spontaneous_rate(omega, opt.epsilon);
            row.converged = true;
        }
        res.rows.push_back(row);
    }

    std::vector<double> ns, ys, ys_r;
    for (const auto& r : res.rows) {
        if (!r.converged || !(r.j_metric_hz > 0.0))
            continue;
        ns.push_back(r.n);
        ys.push_back(r.j_metric_hz);
        ys_r.push_back(r.j_metric_reduced_hz);
    }
    res.slope = fit_loglog_slope(ns, ys);
    if (opt.family == ScalingFamily::uniform)
        res.slope_reduced = fit_loglog_slope(ns, ys_r);
    return res;
}

} // namespace ionspin

#endif // IONSPIN_ERRORS_HPP
