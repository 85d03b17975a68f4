#ifndef IONSPIN_DYNAMICS_HPP
#define IONSPIN_DYNAMICS_HPP

#include "ionspin/common.hpp"
#include "ionspin/coupling.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

// State vectors live in the z basis. Bit i of a basis index is spin i, bit value 0
// meaning spin up (sz = +1). sx flips a bit.

namespace ionspin {

inline constexpr int max_state_spins = 14;
inline constexpr int max_enumeration_spins = 24;

using cplx = std::complex<double>;

struct SpinState {
    int n = 0;
    Eigen::VectorXcd amplitudes;

    /// Product state with the given z configuration (bit i set = spin i down).
    static SpinState basis(int n, std::uint64_t index = 0)
    {
        require(n >= 1 && n <= max_state_spins, "SpinState: n must lie in [1, " + std::to_string(max_state_spins) + "]");
        require(index < (std::uint64_t{1} << n), "SpinState: basis index out of range");
        SpinState s;
        s.n = n;
        s.amplitudes = Eigen::VectorXcd::Zero(Eigen::Index{1} << n);
        s.amplitudes[static_cast<Eigen::Index>(index)] = 1.0;
        return s;
    }

    double norm() const { return amplitudes.norm(); }
};

enum class Axis { X, Y, Z };

inline Axis parse_axis(const std::string& s)
{
    if (s == "x" || s == "X")
        return Axis::X;
    if (s == "y" || s == "Y")
        return Axis::Y;
    if (s == "z" || s == "Z")
        return Axis::Z;
    throw ValidationError("unknown axis '" + s + "'");
}

/// H = sum_{i<j} J(i, j) s_i s_j with s the Pauli matrix along `axis`.
struct InteractionTerm {
    Axis axis = Axis::X;
    CouplingMatrix j;
};

namespace detail {

inline void check_couplings(const Eigen::MatrixXd& j)
{
    require(j.rows() == j.cols(), "coupling matrix must be square");
    const double scale = std::max(1.0, j.cwiseAbs().maxCoeff());
    for (Eigen::Index a = 0; a < j.rows(); ++a) {
        require(j(a, a) == 0.0, "coupling matrix must have zero diagonal");
        for (Eigen::Index b = a + 1; b < j.rows(); ++b)
            require(std::abs(j(a, b) - j(b, a)) <= 1e-9 * scale, "coupling matrix must be symmetric");
    }
}

inline void check_terms(const std::vector<InteractionTerm>& terms, const SpinState& s)
{
    require(s.n >= 1 && s.n <= max_state_spins, "state size exceeds " + std::to_string(max_state_spins) + " spins");
    require(s.amplitudes.size() == (Eigen::Index{1} << s.n), "state vector length does not match n");
    for (const auto& t : terms) {
        require(t.j.size() == s.n, "interaction term size does not match the state");
        check_couplings(t.j.j);
    }
}

/// Diagonal energies sum_{i<j} J_ij z_i z_j over all basis indices.
inline Eigen::VectorXd diagonal_energies(const Eigen::MatrixXd& j)
{
    const int n = static_cast<int>(j.rows());
    const std::uint64_t dim = std::uint64_t{1} << n;
    Eigen::VectorXd e(static_cast<Eigen::Index>(dim));
    for (std::uint64_t x = 0; x < dim; ++x) {
        double acc = 0.0;
        for (int a = 0; a < n; ++a) {
            const double za = (x >> a) & 1U ? -1.0 : 1.0;
            for (int b = a + 1; b < n; ++b) {
                const double zb = (x >> b) & 1U ? -1.0 : 1.0;
                acc += j(a, b) * za * zb;
            }
        }
        e[static_cast<Eigen::Index>(x)] = acc;
    }
    return e;
}

inline void hadamard_all(Eigen::VectorXcd& v, int n)
{
    const Eigen::Index dim = v.size();
    const double r = 1.0 / std::sqrt(2.0);
    for (int q = 0; q < n; ++q) {
        const Eigen::Index bit = Eigen::Index{1} << q;
        for (Eigen::Index x = 0; x < dim; ++x) {
            if (x & bit)
                continue;
            const cplx a = v[x], b = v[x | bit];
            v[x] = r * (a + b);
            v[x | bit] = r * (a - b);
        }
    }
}

/// Applies diag(phase^(sign)) per qubit: S on every qubit when sign = +1, S^dagger when -1.
inline void phase_all(Eigen::VectorXcd& v, int n, int sign)
{
    const cplx i_unit(0.0, static_cast<double>(sign));
    for (Eigen::Index x = 0; x < v.size(); ++x) {
        int ones = 0;
        for (int q = 0; q < n; ++q)
            ones += (x >> q) & 1;
        static const cplx unit(1.0, 0.0);
        cplx f = unit;
        for (int k = 0; k < (ones & 3); ++k)
            f *= i_unit;
        v[x] *= f;
    }
}

/// Rotates the state into the frame where `axis` reads as z, or back.
/// X: H. Y: H S^dagger (so that S H Z H S^dagger = Y).
inline void to_z_frame(Eigen::VectorXcd& v, int n, Axis axis)
{
    if (axis == Axis::X) {
        hadamard_all(v, n);
    } else if (axis == Axis::Y) {
        phase_all(v, n, -1);
        hadamard_all(v, n);
    }
}

inline void from_z_frame(Eigen::VectorXcd& v, int n, Axis axis)
{
    if (axis == Axis::X) {
        hadamard_all(v, n);
    } else if (axis == Axis::Y) {
        hadamard_all(v, n);
        phase_all(v, n, +1);
    }
}

/// exp(-i H t) for a single term, exact: rotate, apply diagonal phases, rotate back.
inline void apply_term(Eigen::VectorXcd& v, int n, const InteractionTerm& term, double t)
{
    const Eigen::VectorXd e = diagonal_energies(term.j.j);
    to_z_frame(v, n, term.axis);
    for (Eigen::Index x = 0; x < v.size(); ++x)
        v[x] *= std::polar(1.0, -e[x] * t);
    from_z_frame(v, n, term.axis);
}

/// H v for a sum of terms.
inline Eigen::VectorXcd apply_hamiltonian(const std::vector<InteractionTerm>& terms, const std::vector<Eigen::VectorXd>& energies,
                                          const Eigen::VectorXcd& v, int n)
{
    Eigen::VectorXcd out = Eigen::VectorXcd::Zero(v.size());
    for (std::size_t k = 0; k < terms.size(); ++k) {
        Eigen::VectorXcd w = v;
        to_z_frame(w, n, terms[k].axis);
        w = w.cwiseProduct(energies[k].cast<cplx>());
        from_z_frame(w, n, terms[k].axis);
        out += w;
    }
    return out;
}

} // namespace detail

/// Classical energy sum_{i<j} J_ij s_i s_j; bit i of `config` set means s_i = -1.
inline double ising_energy(const CouplingMatrix& j, std::uint64_t config)
{
    const int n = j.size();
    require(n <= 30, "ising_energy: at most 30 spins");
    double e = 0.0;
    for (int a = 0; a < n; ++a) {
        const double sa = (config >> a) & 1U ? -1.0 : 1.0;
        for (int b = a + 1; b < n; ++b)
            e += j.j(a, b) * sa * ((config >> b) & 1U ? -1.0 : 1.0);
    }
    return e;
}

struct GroundState {
    double energy = 0.0;
    std::vector<std::uint64_t> configurations; // every minimizer, both members of each flip pair
};

/// Exhaustive search over 2^(N-1) configurations with spin N-1 fixed up; the
/// global flip partners are added afterwards. Energies within `tol` (relative to
/// the coupling scale) of the minimum count as degenerate.
inline GroundState ground_state(const CouplingMatrix& j, double tol = 1e-9)
{
    const int n = j.size();
    require(n >= 1 && n <= max_enumeration_spins,
            "ground_state: N must lie in [1, " + std::to_string(max_enumeration_spins) + "]");
    detail::check_couplings(j.j);
    const double scale = std::max(j.j.cwiseAbs().sum() * 0.5, std::numeric_limits<double>::min());
    const double band = tol * scale;

    // Gray-code walk: flipping spin q changes the energy by -2 s_q sum_k J_qk s_k.
    const std::uint64_t count = std::uint64_t{1} << (n - 1);
    std::vector<double> s(n, 1.0);
    Eigen::VectorXd field = j.j.rowwise().sum(); // sum_k J_qk s_k
    double e = ising_energy(j, 0);
    std::uint64_t config = 0;
    GroundState gs;
    gs.energy = std::numeric_limits<double>::infinity();
    std::vector<std::uint64_t> best;
    for (std::uint64_t k = 0; k < count; ++k) {
        if (k > 0) {
            int q = 0;
            while (((k >> q) & 1U) == 0)
                ++q;
            e -= 2.0 * s[q] * field[q];
            for (int r = 0; r < n; ++r)
                field[r] -= 2.0 * j.j(r, q) * s[q];
            s[q] = -s[q];
            config ^= std::uint64_t{1} << q;
        }
        if (e < gs.energy - band) {
            gs.energy = e;
            best.clear();
            best.push_back(config);
        } else if (e <= gs.energy + band) {
            best.push_back(config);
            gs.energy = std::min(gs.energy, e);
        }
    }
    // recheck the band against the final minimum and recompute energies exactly
    const std::uint64_t all = (n == 64) ? ~std::uint64_t{0} : ((std::uint64_t{1} << n) - 1);
    for (auto c : best) {
        if (ising_energy(j, c) <= gs.energy + band) {
            gs.configurations.push_back(c);
            gs.configurations.push_back(c ^ all);
        }
    }
    if (n == 1)
        gs.configurations.resize(1);
    std::sort(gs.configurations.begin(), gs.configurations.end());
    gs.configurations.erase(std::unique(gs.configurations.begin(), gs.configurations.end()), gs.configurations.end());
    return gs;
}

/// exp(-i (sum_k H_k) t) applied to the state. A single term, or terms sharing one
/// axis, are applied exactly through diagonal phases. Mixed axes use a Taylor series
/// of H on substeps short enough that |H| dt <= 0.5, summed until the terms fall
/// below machine precision.
inline SpinState evolve_exact(const std::vector<InteractionTerm>& terms, const SpinState& state, double t)
{
    detail::check_terms(terms, state);
    SpinState out = state;
    if (terms.empty() || t == 0.0)
        return out;
    bool same_axis = true;
    for (const auto& term : terms)
        same_axis = same_axis && term.axis == terms.front().axis;
    if (same_axis) {
        InteractionTerm sum{terms.front().axis, CouplingMatrix::zero(state.n)};
        for (const auto& term : terms)
            sum.j.j += term.j.j;
        detail::apply_term(out.amplitudes, state.n, sum, t);
        return out;
    }

    std::vector<Eigen::VectorXd> energies;
    double bound = 0.0; // upper bound on the spectral radius of H
    for (const auto& term : terms) {
        energies.push_back(detail::diagonal_energies(term.j.j));
        bound += energies.back().cwiseAbs().maxCoeff();
    }
    const int steps = std::max(1, static_cast<int>(std::ceil(std::abs(t) * bound / 0.5)));
    const double dt = t / steps;
    const cplx minus_i_dt(0.0, -dt);
    for (int s = 0; s < steps; ++s) {
        Eigen::VectorXcd term_v = out.amplitudes;
        Eigen::VectorXcd acc = term_v;
        for (int k = 1; k < 60; ++k) {
            term_v = detail::apply_hamiltonian(terms, energies, term_v, state.n) * (minus_i_dt / static_cast<double>(k));
            acc += term_v;
            if (term_v.norm() <= 1e-17 * acc.norm())
                break;
        }
        out.amplitudes = acc;
    }
    return out;
}

/// First-order product formula: (prod_k exp(-i H_k t / steps))^steps, terms in list order.
inline SpinState trotter_evolve(const std::vector<InteractionTerm>& terms, const SpinState& state, double t, int n_steps)
{
    detail::check_terms(terms, state);
    require(n_steps >= 1, "trotter_evolve: n_steps must be >= 1");
    SpinState out = state;
    const double dt = t / n_steps;
    for (int s = 0; s < n_steps; ++s)
        for (const auto& term : terms)
            detail::apply_term(out.amplitudes, state.n, term, dt);
    return out;
}

/// <s_a s_b> with s the Pauli matrix along `axis`.
inline double correlation(const SpinState& s, Axis axis, int a, int b)
{
    require(a >= 0 && b >= 0 && a < s.n && b < s.n, "correlation: spin index out of range");
    Eigen::VectorXcd v = s.amplitudes;
    detail::to_z_frame(v, s.n, axis);
    double acc = 0.0;
    for (Eigen::Index x = 0; x < v.size(); ++x) {
        const double za = (x >> a) & 1 ? -1.0 : 1.0;
        const double zb = (x >> b) & 1 ? -1.0 : 1.0;
        acc += std::norm(v[x]) * (a == b ? 1.0 : za * zb);
    }
    return acc;
}

/// <s_a> with s the Pauli matrix along `axis`.
inline double magnetization(const SpinState& s, Axis axis, int a)
{
    require(a >= 0 && a < s.n, "magnetization: spin index out of range");
    Eigen::VectorXcd v = s.amplitudes;
    detail::to_z_frame(v, s.n, axis);
    double acc = 0.0;
    for (Eigen::Index x = 0; x < v.size(); ++x)
        acc += std::norm(v[x]) * ((x >> a) & 1 ? -1.0 : 1.0);
    return acc;
}

} // namespace ionspin

#endif // IONSPIN_DYNAMICS_HPP
