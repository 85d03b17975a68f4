#include "ionspin/coupling.hpp"
#include "ionspin/crystal.hpp"
#include "ionspin/graphs.hpp"
#include "ionspin/inverse.hpp"

#include "oracles.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>

using namespace ionspin;
using Catch::Matchers::WithinRel;

namespace {

struct Problem {
    ModeSpectrum modes;
    DetuningSchedule sched;
    ResponseTensor f;
};

Problem make(int n, double f_s)
{
    Problem p;
    const TrapConfig t = default_trap(n);
    p.modes = transverse_modes(t, equilibrium_positions(t));
    p.sched = detuning_schedule(p.modes, f_s);
    p.f = response_tensor(p.modes, p.sched);
    return p;
}

double offdiag_rel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b)
{
    Eigen::MatrixXd d = a - b, r = b;
    d.diagonal().setZero();
    r.diagonal().setZero();
    return d.norm() / r.norm();
}

} // namespace

TEST_CASE("exact-target solves reproduce graphs to round-off", "[inverse]")
{
    struct Case {
        TargetGraph g;
        double f_s;
    };
    std::vector<Case> cases{{chain_nn(10, hz_to_rad(200.0)), 0.03},
                            {square_lattice_pbc(3, 3, hz_to_rad(50.0)), 0.1},
                            {graph_from_matrix(oracle::random_symmetric(8, 11, hz_to_rad(100.0)), "random8"), 0.1}};
    for (const auto& c : cases) {
        const Problem p = make(c.g.n, c.f_s);
        SolveConfig cfg;
        cfg.n_starts = 4;
        const SolveResult r = solve_rabi(c.g, p.f, cfg);
        INFO(c.g.name);
        CHECK(r.converged);
        CHECK(r.relative_residual <= 1e-6);
        // independent forward map straight from eta, omega, mu
        const Eigen::MatrixXd j =
            oracle::coupling(r.omega.omega, p.modes.lamb_dicke, p.modes.frequencies, p.sched.detunings);
        CHECK(offdiag_rel(j, c.g.j_target) <= 1e-6);
        const RoundtripReport rep = verify_roundtrip(r, c.g, p.f, cfg);
        CHECK(rep.relative_residual <= 1e-6);
        CHECK_THAT(r.objective, WithinRel(r.omega.omega.cwiseAbs().sum(), 1e-14));
    }
}

TEST_CASE("fixed budget spends exactly the budget", "[inverse]")
{
    const Problem p = make(6, 0.05);
    const TargetGraph g = chain_nn(6, 1.0);
    SolveConfig cfg;
    cfg.mode = SolveMode::fixed_budget;
    cfg.budget = hz_to_rad(1e6);
    cfg.n_starts = 3;
    const SolveResult r = solve_rabi(g, p.f, cfg);
    REQUIRE(r.converged);
    CHECK_THAT(r.omega.omega.cwiseAbs().sum(), WithinRel(cfg.budget, 1e-12));
    CHECK(r.attained_scale > 0.0);
    CHECK_THAT(r.attained.j(0, 1), WithinRel(r.attained_scale, 1e-8));
    CHECK(std::abs(r.attained.j(0, 2)) <= 1e-8 * r.attained_scale);
    // doubling the budget quadruples the coupling
    SolveConfig twice = cfg;
    twice.budget *= 2.0;
    CHECK_THAT(solve_rabi(g, p.f, twice).attained_scale, WithinRel(4.0 * r.attained_scale, 1e-12));
}

TEST_CASE("solves are deterministic for a fixed seed", "[inverse]")
{
    const Problem p = make(7, 0.1);
    const TargetGraph g = graph_from_matrix(oracle::random_symmetric(7, 2, hz_to_rad(10.0)));
    SolveConfig cfg;
    cfg.n_starts = 2;
    cfg.rng_seed = 42;
    const SolveResult a = solve_rabi(g, p.f, cfg);
    const SolveResult b = solve_rabi(g, p.f, cfg);
    CHECK((a.omega.omega - b.omega.omega).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.best_start == b.best_start);
}

TEST_CASE("more starts never give a larger objective", "[inverse]")
{
    const Problem p = make(8, 0.1);
    const TargetGraph g = chain_nn(8, 1.0);
    SolveConfig one;
    one.mode = SolveMode::fixed_budget;
    one.budget = 1.0;
    one.n_starts = 1;
    SolveConfig four = one;
    four.n_starts = 4;
    // start 0 is shared, so the best of four is at least as good
    CHECK(solve_rabi(g, p.f, four).attained_scale >= solve_rabi(g, p.f, one).attained_scale);
}

TEST_CASE("zero target gives a zero design", "[inverse]")
{
    const Problem p = make(5, 0.1);
    const TargetGraph g = graph_from_matrix(Eigen::MatrixXd::Zero(5, 5));
    const SolveResult r = solve_rabi(g, p.f, SolveConfig{});
    CHECK(r.converged);
    CHECK(r.omega.omega.cwiseAbs().maxCoeff() == 0.0);
    CHECK(r.relative_residual == 0.0);
}

TEST_CASE("canonical signs make the first nonzero entry of each column positive", "[inverse]")
{
    Eigen::MatrixXd m(3, 3);
    m << 0, -1, 2, -3, 4, 0, 5, 0, -6;
    const RabiMatrix c = canonical_signs({m});
    CHECK(c.omega(1, 0) == 3.0);
    CHECK(c.omega(0, 1) == 1.0);
    CHECK(c.omega(0, 2) == 2.0);
}

TEST_CASE("solver config validation", "[inverse]")
{
    const Problem p = make(3, 0.1);
    SolveConfig cfg;
    cfg.n_starts = 0;
    CHECK_THROWS_AS(solve_rabi(chain_nn(3, 1.0), p.f, cfg), ValidationError);
    cfg = SolveConfig{};
    cfg.mode = SolveMode::fixed_budget;
    cfg.budget = -1.0;
    CHECK_THROWS_AS(solve_rabi(chain_nn(3, 1.0), p.f, cfg), ValidationError);
    CHECK_THROWS_AS(solve_rabi(chain_nn(4, 1.0), p.f, SolveConfig{}), ValidationError);
}
