#ifndef IONSPIN_CRYSTAL_HPP
#define IONSPIN_CRYSTAL_HPP

#include "ionspin/common.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace ionspin {

struct HarmonicAxial {
    double omega_z = 0.0; // rad/s
};

/// V(z) = M (alpha2 z^2 / 2 + alpha4 z^4 / 4); alpha2 may be zero or negative.
struct QuarticAxial {
    double alpha2 = 0.0; // (rad/s)^2
    double alpha4 = 0.0; // (rad/s)^2 / m^2
};

using AxialPotential = std::variant<HarmonicAxial, QuarticAxial>;

/// Physical description of the linear trap, the ions, and the Raman geometry.
///
/// omega_com is the transverse frequency every ion experiences in the absence of
/// Coulomb coupling; it is also the frequency of the transverse centre-of-mass mode.
struct TrapConfig {
    int n_ions = 1;
    double omega_com = hz_to_rad(5e6);
    AxialPotential axial = HarmonicAxial{hz_to_rad(1e6)};
    double ion_mass = constants::yb171_mass;
    double delta_k = constants::default_delta_k;
    std::optional<double> qubit_freq; // metadata only

    bool is_harmonic() const noexcept { return std::holds_alternative<HarmonicAxial>(axial); }

    void validate() const
    {
        require(n_ions >= 1, "trap: n_ions must be >= 1");
        require(std::isfinite(omega_com) && omega_com > 0.0, "trap: omega_com must be positive");
        require(std::isfinite(ion_mass) && ion_mass > 0.0, "trap: ion_mass must be positive");
        require(std::isfinite(delta_k) && delta_k > 0.0, "trap: delta_k must be positive");
        if (const auto* h = std::get_if<HarmonicAxial>(&axial)) {
            require(std::isfinite(h->omega_z) && h->omega_z > 0.0, "trap: omega_z must be positive");
            require(h->omega_z < omega_com, "trap: omega_z must be below omega_com for a linear chain");
        } else {
            const auto& q = std::get<QuarticAxial>(axial);
            require(std::isfinite(q.alpha2) && std::isfinite(q.alpha4), "trap: quartic coefficients must be finite");
        }
    }
};

/// Coefficients of the dimensionless axial potential a2 u^2/2 + a4 u^4/4.
struct AxialCoefficients {
    double a2 = 1.0;
    double a4 = 0.0;
};

/// Axial equilibrium of the chain.
///
/// positions are in units of length_scale. frequency_scale is the angular frequency
/// sqrt(k_e / (M l^3)) that sets the Coulomb curvature; for a harmonic trap it equals
/// omega_z and length_scale is the usual (k_e / (M omega_z^2))^(1/3).
struct IonCrystal {
    std::vector<double> positions;
    double length_scale = 0.0;    // m
    double frequency_scale = 0.0; // rad/s
    AxialCoefficients coefficients;
    double potential_residual = 0.0;
    int iterations = 0;
    std::string scale_note;

    int size() const noexcept { return static_cast<int>(positions.size()); }
};

/// Transverse normal modes, sorted by descending frequency (index 0 is the COM mode).
struct ModeSpectrum {
    Eigen::VectorXd frequencies; // rad/s
    Eigen::MatrixXd mode_matrix; // b(i, m): ion i, mode m
    Eigen::MatrixXd lamb_dicke;  // eta(i, m)

    int size() const noexcept { return static_cast<int>(frequencies.size()); }
};

struct LinearityReport {
    bool linear = false;
    double margin = 0.0; // smallest transverse Hessian eigenvalue / omega_com^2
};

namespace detail {

inline AxialCoefficients scaled_coefficients(const TrapConfig& cfg, double& length_scale,
                                             double& frequency_scale, std::string& note)
{
    const double k = constants::coulomb_constant;
    const double m = cfg.ion_mass;
    if (const auto* h = std::get_if<HarmonicAxial>(&cfg.axial)) {
        length_scale = std::cbrt(k / (m * h->omega_z * h->omega_z));
        frequency_scale = h->omega_z;
        note = "harmonic: l = (k_e/(M omega_z^2))^(1/3)";
        return {1.0, 0.0};
    }
    const auto& q = std::get<QuarticAxial>(cfg.axial);
    if (q.alpha4 < 0.0 || (q.alpha4 == 0.0 && q.alpha2 <= 0.0))
        throw NumericalError("crystal: quartic axial potential has no bound minimum");
    if (q.alpha2 > 0.0) {
        length_scale = std::cbrt(k / (m * q.alpha2));
        frequency_scale = std::sqrt(q.alpha2);
        note = "quartic: l = (k_e/(M alpha2))^(1/3)";
        return {1.0, q.alpha4 * length_scale * length_scale / q.alpha2};
    }
    length_scale = std::pow(k / (m * q.alpha4), 0.2);
    frequency_scale = std::sqrt(q.alpha4) * length_scale;
    note = "quartic: l = (k_e/(M alpha4))^(1/5)";
    return {q.alpha2 / (frequency_scale * frequency_scale), 1.0};
}

inline bool strictly_increasing(const Eigen::VectorXd& u)
{
    for (Eigen::Index i = 1; i < u.size(); ++i)
        if (!(u[i] > u[i - 1]))
            return false;
    return true;
}

} // namespace detail

/// Dimensionless potential energy sum(a2 u^2/2 + a4 u^4/4) + sum_{i<j} 1/|u_i - u_j|.
inline double axial_energy(const AxialCoefficients& c, const Eigen::VectorXd& u)
{
    double e = 0.0;
    const Eigen::Index n = u.size();
    for (Eigen::Index i = 0; i < n; ++i) {
        const double x2 = u[i] * u[i];
        e += 0.5 * c.a2 * x2 + 0.25 * c.a4 * x2 * x2;
        for (Eigen::Index j = i + 1; j < n; ++j)
            e += 1.0 / std::abs(u[j] - u[i]);
    }
    return e;
}

inline Eigen::VectorXd axial_gradient(const AxialCoefficients& c, const Eigen::VectorXd& u)
{
    const Eigen::Index n = u.size();
    Eigen::VectorXd g(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double gi = c.a2 * u[i] + c.a4 * u[i] * u[i] * u[i];
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j == i)
                continue;
            const double d = u[i] - u[j];
            gi -= std::copysign(1.0 / (d * d), d);
        }
        g[i] = gi;
    }
    return g;
}

inline Eigen::MatrixXd axial_hessian(const AxialCoefficients& c, const Eigen::VectorXd& u)
{
    const Eigen::Index n = u.size();
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        h(i, i) = c.a2 + 3.0 * c.a4 * u[i] * u[i];
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j == i)
                continue;
            const double w = 2.0 / std::pow(std::abs(u[i] - u[j]), 3);
            h(i, i) += w;
            h(i, j) = -w;
        }
    }
    return h;
}

/// Axial equilibrium by damped Newton iteration on the dimensionless potential.
inline IonCrystal equilibrium_positions(const TrapConfig& cfg, double tol = 1e-12, int max_iter = 500)
{
    cfg.validate();
    require(tol > 0.0, "equilibrium_positions: tol must be positive");
    IonCrystal out;
    out.coefficients = detail::scaled_coefficients(cfg, out.length_scale, out.frequency_scale, out.scale_note);
    const auto& coef = out.coefficients;
    const int n = cfg.n_ions;

    // Uniform guess spanning roughly the equilibrium extent of a harmonic chain.
    Eigen::VectorXd u(n);
    const double spacing = 2.0 * std::pow(static_cast<double>(n), -0.56) / std::cbrt(std::max(coef.a2, 1e-3) + coef.a4);
    for (int i = 0; i < n; ++i)
        u[i] = (i - 0.5 * (n - 1)) * spacing;

    Eigen::VectorXd g = axial_gradient(coef, u);
    double energy = axial_energy(coef, u);
    int iter = 0;
    for (; iter < max_iter && g.cwiseAbs().maxCoeff() > tol; ++iter) {
        Eigen::MatrixXd h = axial_hessian(coef, u);
        Eigen::LLT<Eigen::MatrixXd> llt(h);
        double shift = 0.0;
        while (llt.info() != Eigen::Success) {
            shift = shift == 0.0 ? 1e-3 * (1.0 + h.diagonal().cwiseAbs().maxCoeff()) : 4.0 * shift;
            llt.compute(h + shift * Eigen::MatrixXd::Identity(n, n));
        }
        const Eigen::VectorXd step = -llt.solve(g);
        const double slope = g.dot(step);
        const double gnorm = g.cwiseAbs().maxCoeff();

        bool accepted = false;
        for (double t = 1.0; t > 1e-14; t *= 0.5) {
            Eigen::VectorXd trial = u + t * step;
            if (!detail::strictly_increasing(trial))
                continue;
            const double e = axial_energy(coef, trial);
            Eigen::VectorXd gt = axial_gradient(coef, trial);
            // Near the minimum energy differences drop below rounding; fall back to the gradient.
            if (e <= energy + 1e-4 * t * slope || gt.cwiseAbs().maxCoeff() < gnorm) {
                u = std::move(trial);
                g = std::move(gt);
                energy = e;
                accepted = true;
                break;
            }
        }
        if (!accepted)
            throw NumericalError("equilibrium_positions: line search failed at iteration " + std::to_string(iter));
    }
    out.potential_residual = g.cwiseAbs().maxCoeff();
    out.iterations = iter;
    if (out.potential_residual > tol)
        throw NumericalError("equilibrium_positions: no convergence after " + std::to_string(max_iter) +
                             " iterations (residual " + std::to_string(out.potential_residual) + ")");
    if (n > 1) {
        Eigen::LLT<Eigen::MatrixXd> check(axial_hessian(coef, u));
        if (check.info() != Eigen::Success)
            throw NumericalError("equilibrium_positions: converged to a saddle point of the axial potential");
    } else if (coef.a2 < 0.0) {
        throw NumericalError("equilibrium_positions: single ion sits on a potential maximum (alpha2 < 0)");
    }
    out.positions.assign(u.data(), u.data() + n);
    return out;
}

/// Transverse (X) force-constant matrix divided by M, in rad^2/s^2.
inline Eigen::MatrixXd transverse_hessian(const TrapConfig& cfg, const IonCrystal& crystal)
{
    const int n = crystal.size();
    require(n == cfg.n_ions, "transverse_hessian: crystal size does not match trap");
    const double w0sq = crystal.frequency_scale * crystal.frequency_scale;
    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        k(i, i) = cfg.omega_com * cfg.omega_com;
        for (int j = 0; j < n; ++j) {
            if (j == i)
                continue;
            const double c = w0sq / std::pow(std::abs(crystal.positions[i] - crystal.positions[j]), 3);
            k(i, i) -= c;
            k(i, j) = c;
        }
    }
    return k;
}

inline LinearityReport linearity_check(const TrapConfig& cfg, const IonCrystal& crystal)
{
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(transverse_hessian(cfg, crystal), Eigen::EigenvaluesOnly);
    const double smallest = es.eigenvalues().minCoeff();
    return {smallest > 0.0, smallest / (cfg.omega_com * cfg.omega_com)};
}

/// eta(i, m) = b(i, m) * delta_k * sqrt(hbar / (2 M omega_m)).
inline Eigen::MatrixXd lamb_dicke(const TrapConfig& cfg, const ModeSpectrum& modes)
{
    const int n = modes.size();
    Eigen::MatrixXd eta(n, n);
    for (int m = 0; m < n; ++m) {
        const double scale = cfg.delta_k * std::sqrt(constants::hbar / (2.0 * cfg.ion_mass * modes.frequencies[m]));
        for (int i = 0; i < n; ++i)
            eta(i, m) = modes.mode_matrix(i, m) * scale;
    }
    return eta;
}

/// Eigen-decomposes the transverse Hessian. Column signs are fixed so that the first
/// entry with magnitude above 1e-8 is positive; the COM column is then all positive.
inline ModeSpectrum transverse_modes(const TrapConfig& cfg, const IonCrystal& crystal)
{
    const int n = crystal.size();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(transverse_hessian(cfg, crystal));
    if (es.info() != Eigen::Success)
        throw NumericalError("transverse_modes: eigensolver failed");
    if (es.eigenvalues()[0] <= 0.0)
        throw NumericalError("transverse_modes: negative transverse eigenvalue (zigzag instability)");

    ModeSpectrum modes;
    modes.frequencies.resize(n);
    modes.mode_matrix.resize(n, n);
    for (int m = 0; m < n; ++m) {
        const int src = n - 1 - m;
        modes.frequencies[m] = std::sqrt(es.eigenvalues()[src]);
        Eigen::VectorXd col = es.eigenvectors().col(src);
        for (int i = 0; i < n; ++i) {
            if (std::abs(col[i]) > 1e-8) {
                if (col[i] < 0.0)
                    col = -col;
                break;
            }
        }
        modes.mode_matrix.col(m) = col;
    }
    modes.lamb_dicke = lamb_dicke(cfg, modes);
    return modes;
}

/// Largest harmonic omega_z that keeps an n-ion chain linear, found by bisection on
/// linearity_check.
inline double critical_axial_frequency(int n_ions, double omega_com, double ion_mass = constants::yb171_mass)
{
    require(n_ions >= 1 && omega_com > 0.0, "critical_axial_frequency: invalid arguments");
    if (n_ions == 1)
        return omega_com;
    TrapConfig cfg;
    cfg.n_ions = n_ions;
    cfg.omega_com = omega_com;
    cfg.ion_mass = ion_mass;
    auto linear_at = [&](double omega_z) {
        cfg.axial = HarmonicAxial{omega_z};
        return linearity_check(cfg, equilibrium_positions(cfg)).linear;
    };
    double lo = 0.0;
    double hi = omega_com * (1.0 - 1e-12);
    if (linear_at(hi))
        return hi;
    while (hi - lo > 1e-13 * omega_com) {
        const double mid = 0.5 * (lo + hi);
        (linear_at(mid) ? lo : hi) = mid;
    }
    return lo;
}

/// Ratio omega_z / omega_crit used when the axial frequency is not given.
inline constexpr double default_anisotropy_fraction = 0.9;

/// 171Yb+ chain with counter-propagating 355 nm Raman beams and the default
/// anisotropy rule omega_z = 0.9 omega_crit(N).
inline TrapConfig default_trap(int n_ions, double omega_com = hz_to_rad(5e6))
{
    TrapConfig cfg;
    cfg.n_ions = n_ions;
    cfg.omega_com = omega_com;
    cfg.axial = HarmonicAxial{default_anisotropy_fraction * critical_axial_frequency(n_ions, omega_com)};
    return cfg;
}

} // namespace ionspin

#endif // IONSPIN_CRYSTAL_HPP
