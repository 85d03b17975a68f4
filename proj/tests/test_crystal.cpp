#include "ionspin/crystal.hpp"

#include "oracles.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>

using namespace ionspin;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

TrapConfig harmonic(int n, double wz_hz, double wx_hz = 5e6)
{
    TrapConfig t;
    t.n_ions = n;
    t.omega_com = hz_to_rad(wx_hz);
    t.axial = HarmonicAxial{hz_to_rad(wz_hz)};
    return t;
}

Eigen::VectorXd as_vector(const IonCrystal& c) { return Eigen::Map<const Eigen::VectorXd>(c.positions.data(), c.size()); }

} // namespace

TEST_CASE("two and three ion equilibria match the closed forms", "[crystal]")
{
    const IonCrystal two = equilibrium_positions(harmonic(2, 1e6));
    const double d2 = std::cbrt(0.25);
    CHECK_THAT(two.positions[0], WithinAbs(-d2, 1e-10));
    CHECK_THAT(two.positions[1], WithinAbs(d2, 1e-10));

    const IonCrystal three = equilibrium_positions(harmonic(3, 1e6));
    const double d3 = std::cbrt(1.25);
    CHECK_THAT(three.positions[0], WithinAbs(-d3, 1e-10));
    CHECK_THAT(three.positions[1], WithinAbs(0.0, 1e-10));
    CHECK_THAT(three.positions[2], WithinAbs(d3, 1e-10));

    // length scale (k_e / (M omega_z^2))^(1/3)
    const double l = std::cbrt(constants::coulomb_constant / (constants::yb171_mass * std::pow(hz_to_rad(1e6), 2)));
    CHECK_THAT(two.length_scale, WithinRel(l, 1e-14));
}

TEST_CASE("single ion sits at the origin with eta = dk sqrt(hbar/2M omega)", "[crystal]")
{
    const TrapConfig t = harmonic(1, 1e6);
    const IonCrystal c = equilibrium_positions(t);
    REQUIRE(c.size() == 1);
    CHECK(c.positions[0] == 0.0);
    const ModeSpectrum m = transverse_modes(t, c);
    CHECK_THAT(m.frequencies[0], WithinRel(t.omega_com, 1e-15));
    const double eta = constants::default_delta_k * std::sqrt(constants::hbar / (2.0 * constants::yb171_mass * t.omega_com));
    CHECK_THAT(m.lamb_dicke(0, 0), WithinRel(eta, 1e-14));
    CHECK_THAT(eta, WithinAbs(0.0861, 5e-4));
}

TEST_CASE("mode matrices are orthonormal for N up to 40", "[crystal][property]")
{
    for (int n : {2, 5, 12, 25, 40}) {
        const TrapConfig t = default_trap(n);
        const ModeSpectrum m = transverse_modes(t, equilibrium_positions(t));
        const Eigen::MatrixXd b = m.mode_matrix;
        CHECK((b.transpose() * b - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff() <= 1e-10);
        CHECK((b * b.transpose() - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff() <= 1e-10);
    }
}

TEST_CASE("COM mode is the highest, uniform, and at omega_com", "[crystal]")
{
    const TrapConfig t = harmonic(10, 600e3);
    const ModeSpectrum m = transverse_modes(t, equilibrium_positions(t));
    CHECK_THAT(m.frequencies[0], WithinRel(t.omega_com, 1e-12));
    for (int i = 0; i < 10; ++i)
        CHECK_THAT(m.mode_matrix(i, 0), WithinAbs(1.0 / std::sqrt(10.0), 1e-10));
    for (int k = 1; k < 10; ++k)
        CHECK(m.frequencies[k] < m.frequencies[k - 1]);
}

TEST_CASE("mode frequencies follow omega_com^2 - omega_z^2 eig(A)", "[crystal]")
{
    const TrapConfig t = harmonic(7, 800e3);
    const IonCrystal c = equilibrium_positions(t);
    const Eigen::MatrixXd a = oracle::coulomb_matrix(as_vector(c));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
    const double wz = std::get<HarmonicAxial>(t.axial).omega_z;
    const ModeSpectrum m = transverse_modes(t, c);
    for (int k = 0; k < 7; ++k) {
        const double expect = std::sqrt(t.omega_com * t.omega_com - wz * wz * es.eigenvalues()[k]);
        CHECK_THAT(m.frequencies[k], WithinRel(expect, 1e-12));
    }
}

TEST_CASE("column signs: first significant entry positive", "[crystal]")
{
    const TrapConfig t = default_trap(9);
    const ModeSpectrum m = transverse_modes(t, equilibrium_positions(t));
    for (int k = 0; k < 9; ++k) {
        int i = 0;
        while (std::abs(m.mode_matrix(i, k)) <= 1e-8)
            ++i;
        CHECK(m.mode_matrix(i, k) > 0.0);
    }
}

TEST_CASE("critical axial frequency agrees with the Coulomb-matrix bound", "[crystal]")
{
    // Positions in scaled units do not depend on omega_z, so omega_crit = omega_com / sqrt(lambda_max(A)).
    for (int n : {3, 10, 25}) {
        const double wx = hz_to_rad(5e6);
        const IonCrystal c = equilibrium_positions(harmonic(n, 1e5));
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(oracle::coulomb_matrix(as_vector(c)));
        const double expect = wx / std::sqrt(es.eigenvalues().maxCoeff());
        CHECK_THAT(critical_axial_frequency(n, wx), WithinRel(expect, 1e-9));
    }
    const TrapConfig t = default_trap(25);
    CHECK(linearity_check(t, equilibrium_positions(t)).linear);
    TrapConfig zig = t;
    zig.axial = HarmonicAxial{1.05 * critical_axial_frequency(25, t.omega_com)};
    CHECK_FALSE(linearity_check(zig, equilibrium_positions(zig)).linear);
    CHECK_THROWS_AS(transverse_modes(zig, equilibrium_positions(zig)), NumericalError);
}

TEST_CASE("quartic trap: symmetric chain, more uniform spacing than harmonic", "[crystal]")
{
    TrapConfig t;
    t.n_ions = 12;
    t.omega_com = hz_to_rad(5e6);
    t.axial = QuarticAxial{-std::pow(hz_to_rad(50e3), 2), 4e12 * std::pow(two_pi, 2) * 1e6};
    const IonCrystal c = equilibrium_positions(t);
    CHECK(c.potential_residual <= 1e-12);
    for (int i = 0; i < 6; ++i)
        CHECK_THAT(c.positions[i], WithinAbs(-c.positions[11 - i], 1e-9));
    auto spread = [](const IonCrystal& x) {
        double lo = 1e300, hi = 0.0;
        for (int i = 1; i < x.size(); ++i) {
            const double d = x.positions[i] - x.positions[i - 1];
            lo = std::min(lo, d);
            hi = std::max(hi, d);
        }
        return hi / lo;
    };
    const double harmonic_spread = spread(equilibrium_positions(harmonic(12, 500e3)));
    CHECK(spread(c) < harmonic_spread);
    const ModeSpectrum m = transverse_modes(t, c);
    CHECK_THAT(m.frequencies[0], WithinRel(t.omega_com, 1e-12));
}

TEST_CASE("invalid traps are rejected", "[crystal]")
{
    CHECK_THROWS_AS(equilibrium_positions(harmonic(0, 1e6)), ValidationError);
    CHECK_THROWS_AS(equilibrium_positions(harmonic(3, 6e6)), ValidationError);
    TrapConfig t = harmonic(3, 1e6);
    t.ion_mass = -1.0;
    CHECK_THROWS_AS(equilibrium_positions(t), ValidationError);
    TrapConfig q;
    q.n_ions = 4;
    q.axial = QuarticAxial{1.0, -1.0};
    CHECK_THROWS_AS(equilibrium_positions(q), NumericalError);
    q.axial = QuarticAxial{-1.0, 0.0};
    CHECK_THROWS_AS(equilibrium_positions(q), NumericalError);
}
