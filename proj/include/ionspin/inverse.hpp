#ifndef IONSPIN_INVERSE_HPP
#define IONSPIN_INVERSE_HPP

#include "ionspin/common.hpp"
#include "ionspin/coupling.hpp"
#include "ionspin/graphs.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace ionspin {

enum class SolveMode { exact_target, fixed_budget };

struct SolveConfig {
    double residual_tol = 1e-8;
    int max_iter = 300;       // reweighting iterations per start
    int stage_iter = 15;      // iterations before the smoothing width is forced down
    int n_starts = 8;
    std::uint64_t rng_seed = 1;
    SolveMode mode = SolveMode::exact_target;
    double budget = 0.0; // sum |Omega| in rad/s, fixed_budget mode only

    void validate() const
    {
        require(residual_tol > 0.0, "solve: residual_tol must be positive");
        require(max_iter >= 1 && stage_iter >= 1, "solve: iteration limits must be positive");
        require(n_starts >= 1, "solve: n_starts must be >= 1");
        if (mode == SolveMode::fixed_budget)
            require(std::isfinite(budget) && budget > 0.0, "solve: fixed_budget mode needs a positive budget");
    }
};

struct SolveResult {
    RabiMatrix omega;
    CouplingMatrix attained;
    double relative_residual = 0.0;
    double objective = 0.0;       // sum |Omega|, rad/s
    double attained_scale = 0.0;  // fixed_budget: coupling reached by a unit pattern entry, rad/s
    int iterations = 0;
    bool converged = false;
    int best_start = -1;
    std::vector<double> start_objectives; // rad/s, NaN for starts that did not converge
    std::vector<double> start_residuals;
};

/// sqrt(sum (J - T)^2) / sqrt(sum T^2) over off-diagonal entries; absolute norm when T = 0.
inline double relative_residual(const Eigen::MatrixXd& attained, const Eigen::MatrixXd& target)
{
    double num = 0.0, den = 0.0;
    for (Eigen::Index b = 0; b < target.cols(); ++b)
        for (Eigen::Index a = 0; a < target.rows(); ++a) {
            if (a == b)
                continue;
            const double d = attained(a, b) - target(a, b);
            num += d * d;
            den += target(a, b) * target(a, b);
        }
    return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

namespace detail {

/// Constraint map c(x) = J(x) - T over the upper triangle, with the Jacobian
/// products needed by Gauss-Newton restoration and the augmented Lagrangian.
/// Variables are the N x N matrix x stored column-major (column = spectral component).
class BilinearProblem {
public:
    BilinearProblem(const ResponseTensor& f, double f_scale, Eigen::MatrixXd target)
        : n_(f.size()), target_(std::move(target))
    {
        slices_.reserve(n_);
        for (const auto& s : f.slices())
            slices_.push_back(s * f_scale);
        for (int j = 0; j < n_; ++j)
            for (int i = 0; i < j; ++i)
                pairs_.push_back({i, j});
        pair_index_ = Eigen::MatrixXi::Constant(n_, n_, -1);
        for (int r = 0; r < static_cast<int>(pairs_.size()); ++r) {
            pair_index_(pairs_[r].first, pairs_[r].second) = r;
            pair_index_(pairs_[r].second, pairs_[r].first) = r;
        }
    }

    int n() const noexcept { return n_; }
    const Eigen::MatrixXd& slice(int k) const { return slices_[k]; }
    int constraint_count() const noexcept { return static_cast<int>(pairs_.size()); }
    const Eigen::MatrixXd& target() const noexcept { return target_; }
    void rescale(double factor)
    {
        for (auto& s : slices_)
            s *= factor;
    }

    Eigen::MatrixXd coupling(const Eigen::MatrixXd& x) const
    {
        Eigen::MatrixXd j = Eigen::MatrixXd::Zero(n_, n_);
        for (int k = 0; k < n_; ++k)
            j.noalias() += slices_[k].cwiseProduct(x.col(k) * x.col(k).transpose());
        return j;
    }

    Eigen::VectorXd constraints(const Eigen::MatrixXd& x) const { return pack(coupling(x) - target_); }

    Eigen::VectorXd pack(const Eigen::MatrixXd& m) const
    {
        Eigen::VectorXd v(pairs_.size());
        for (std::size_t r = 0; r < pairs_.size(); ++r)
            v[static_cast<Eigen::Index>(r)] = m(pairs_[r].first, pairs_[r].second);
        return v;
    }

    Eigen::MatrixXd unpack(const Eigen::VectorXd& v) const
    {
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n_, n_);
        for (std::size_t r = 0; r < pairs_.size(); ++r) {
            m(pairs_[r].first, pairs_[r].second) = v[static_cast<Eigen::Index>(r)];
            m(pairs_[r].second, pairs_[r].first) = v[static_cast<Eigen::Index>(r)];
        }
        return m;
    }

    /// A^T y with y given as a symmetric zero-diagonal weight matrix.
    Eigen::MatrixXd apply_transpose(const Eigen::MatrixXd& x, const Eigen::MatrixXd& weights) const
    {
        Eigen::MatrixXd g(n_, n_);
        for (int k = 0; k < n_; ++k)
            g.col(k).noalias() = weights.cwiseProduct(slices_[k]) * x.col(k);
        return g;
    }

    /// A A^T, built ion by ion from the rows that touch each ion.
    Eigen::MatrixXd normal_matrix(const Eigen::MatrixXd& x) const { return normal_matrix(x, nullptr); }

    /// A D A^T with D = diag(weights(p, k)) over the variables.
    Eigen::MatrixXd normal_matrix(const Eigen::MatrixXd& x, const Eigen::MatrixXd* weights) const
    {
        const int m = constraint_count();
        Eigen::MatrixXd b = Eigen::MatrixXd::Zero(m, m);
        Eigen::MatrixXd gp(n_ - 1, n_);
        std::vector<int> rows(n_ - 1);
        for (int p = 0; p < n_; ++p) {
            int r = 0;
            for (int q = 0; q < n_; ++q) {
                if (q == p)
                    continue;
                rows[r] = pair_index_(p, q);
                for (int k = 0; k < n_; ++k)
                    gp(r, k) = slices_[k](p, q) * x(q, k);
                ++r;
            }
            const Eigen::MatrixXd block = weights ? Eigen::MatrixXd(gp * weights->row(p).asDiagonal() * gp.transpose())
                                                  : Eigen::MatrixXd(gp * gp.transpose());
            for (int a = 0; a < n_ - 1; ++a)
                for (int c = 0; c < n_ - 1; ++c)
                    b(rows[a], rows[c]) += block(a, c);
        }
        return b;
    }

    /// Minimum-norm Levenberg-Marquardt iterations on c(x) = 0 until max|c| <= tol.
    /// Returns the final max|c|.
    double restore(Eigen::MatrixXd& x, double tol, int max_iter) const
    {
        Eigen::VectorXd c = constraints(x);
        double cn = c.cwiseAbs().maxCoeff();
        double lambda = -1.0;
        for (int it = 0; it < max_iter && cn > tol; ++it) {
            const Eigen::MatrixXd b = normal_matrix(x);
            if (lambda < 0.0)
                lambda = 1e-6 * b.trace() / std::max(1, constraint_count());
            bool improved = false;
            for (int attempt = 0; attempt < 30 && !improved; ++attempt) {
                Eigen::MatrixXd shifted = b;
                shifted.diagonal().array() += lambda;
                const Eigen::LDLT<Eigen::MatrixXd> ldlt(shifted);
                const Eigen::VectorXd y = ldlt.solve(-c);
                Eigen::MatrixXd trial = x + apply_transpose(x, unpack(y));
                Eigen::VectorXd ct = constraints(trial);
                const double ctn = ct.cwiseAbs().maxCoeff();
                if (std::isfinite(ctn) && ct.squaredNorm() < c.squaredNorm()) {
                    x = std::move(trial);
                    c = std::move(ct);
                    cn = ctn;
                    lambda = std::max(lambda / 5.0, 1e-18 * b.trace());
                    improved = true;
                } else {
                    lambda *= 8.0;
                }
            }
            if (!improved)
                break;
        }
        return cn;
    }

private:
    int n_;
    std::vector<Eigen::MatrixXd> slices_;
    Eigen::MatrixXd target_;
    std::vector<std::pair<int, int>> pairs_;
    Eigen::MatrixXi pair_index_;
};

inline Eigen::VectorXd flatten(const Eigen::MatrixXd& m) { return Eigen::Map<const Eigen::VectorXd>(m.data(), m.size()); }

inline Eigen::MatrixXd unflatten(const Eigen::VectorXd& v, int n) { return Eigen::Map<const Eigen::MatrixXd>(v.data(), n, n); }

struct StartOutcome {
    Eigen::MatrixXd x; // normalized units of the shared problem
    double objective = std::numeric_limits<double>::infinity();
    double residual = std::numeric_limits<double>::infinity();
    int iterations = 0;
};

/// One start: random sign pattern scaled to the target and restored onto the
/// constraint set, then majorize-minimize iterations on the smoothed L1 objective
/// sum sqrt(x^2 + eps^2) with the constraints linearized at each iterate
/// (reweighted minimum-norm steps), each followed by a short restoration. The
/// smoothing width shrinks whenever the iterates settle.
inline StartOutcome run_start(const BilinearProblem& base, const SolveConfig& cfg, std::uint64_t seed)
{
    const int n = base.n();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> mag(0.5, 1.0);
    std::bernoulli_distribution sign(0.5);

    StartOutcome out;
    Eigen::MatrixXd x(n, n);
    double cn = std::numeric_limits<double>::infinity();
    // A draw whose restoration stalls near a singular point of the map is redrawn
    // from the same stream.
    for (int draw = 0; draw < 6 && cn > 1e-9; ++draw) {
        for (int k = 0; k < n; ++k)
            for (int i = 0; i < n; ++i)
                x(i, k) = (sign(rng) ? 1.0 : -1.0) * mag(rng);
        const Eigen::VectorXd j0 = base.pack(base.coupling(x));
        const double proj = std::abs(j0.dot(base.pack(base.target())));
        if (proj > 0.0)
            x *= std::sqrt(proj / j0.squaredNorm());
        cn = base.restore(x, 1e-9, 60);
    }
    if (cn > 1e-9) {
        out.residual = relative_residual(base.coupling(x), base.target());
        out.x = x;
        return out;
    }

    const Eigen::VectorXd t = base.pack(base.target());
    const double scale = std::sqrt(x.squaredNorm() / x.size());
    double eps = 0.1 * scale;
    const double eps_min = 1e-6 * scale;
    double objective = x.cwiseAbs().sum();
    Eigen::MatrixXd best = x;
    double best_objective = objective;
    int stage = 0;

    for (int it = 0; it < cfg.max_iter; ++it) {
        ++out.iterations;
        const Eigen::MatrixXd d = (x.array().square() + eps * eps).sqrt().matrix(); // inverse MM weights
        Eigen::MatrixXd b = base.normal_matrix(x, &d);
        b.diagonal().array() += 1e-13 * b.trace() / std::max(1, base.constraint_count());
        // A x = 2 J(x) for the bilinear map, so the linearized constraint reads A x' = J(x) + T.
        const Eigen::VectorXd rhs = base.pack(base.coupling(x)) + t;
        const Eigen::VectorXd mu = b.ldlt().solve(rhs);
        Eigen::MatrixXd next = d.cwiseProduct(base.apply_transpose(x, base.unpack(mu)));
        if (!next.allFinite())
            break;
        const double c_next = base.restore(next, 1e-9, 8);
        const double obj_next = next.cwiseAbs().sum();
        const double change = (next - x).norm() / std::max(x.norm(), 1e-300);
        x = std::move(next);
        if (c_next <= 1e-9 && obj_next < best_objective) {
            best = x;
            best_objective = obj_next;
        }
        objective = obj_next;
        ++stage;
        if (change < std::sqrt(eps / scale) * 1e-2 || stage >= cfg.stage_iter) {
            stage = 0;
            if (eps <= eps_min)
                break;
            eps = std::max(0.1 * eps, eps_min);
        }
    }

    x = best;
    base.restore(x, 1e-13, 100);
    out.x = x;
    out.objective = x.cwiseAbs().sum();
    out.residual = relative_residual(base.coupling(x), base.target());
    return out;
}

} // namespace detail

/// Finds Omega(i, n) with forward_coupling(Omega, F) = target while minimizing
/// sum |Omega(i, n)|. Best of cfg.n_starts seeded starts; ties go to the lowest index.
inline SolveResult solve_rabi(const TargetGraph& target, const ResponseTensor& f, const SolveConfig& cfg)
{
    cfg.validate();
    const int n = f.size();
    require(target.n == n && target.j_target.rows() == n && target.j_target.cols() == n,
            "solve_rabi: target size does not match the response tensor");

    SolveResult result;
    const double t_max = [&] {
        double v = 0.0;
        for (int b = 0; b < n; ++b)
            for (int a = 0; a < n; ++a)
                if (a != b)
                    v = std::max(v, std::abs(target.j_target(a, b)));
        return v;
    }();
    if (t_max == 0.0 || n < 2) {
        result.omega = RabiMatrix::zero(n);
        result.attained = CouplingMatrix::zero(n);
        result.converged = true;
        result.best_start = 0;
        return result;
    }
    const double f_max = f.max_abs_offdiagonal();
    if (!(f_max > 0.0))
        throw NumericalError("solve_rabi: response tensor has no off-diagonal weight");

    // Normalized problem: F / f_max, T / t_max. Physical Omega = x sqrt(t_max / f_max).
    const Eigen::MatrixXd unit_target = target.j_target / t_max;
    const detail::BilinearProblem prob(f, 1.0 / f_max, unit_target);

    std::vector<detail::StartOutcome> outcomes(cfg.n_starts);
    for (int k = 0; k < cfg.n_starts; ++k)
        outcomes[k] = detail::run_start(prob, cfg, derive_seed(cfg.rng_seed, "solve_rabi/start", static_cast<std::uint64_t>(k)));

    int best = -1;
    for (int k = 0; k < cfg.n_starts; ++k) {
        const auto& o = outcomes[k];
        const bool ok = o.residual <= cfg.residual_tol;
        result.start_objectives.push_back(ok ? o.objective : std::numeric_limits<double>::quiet_NaN());
        result.start_residuals.push_back(o.residual);
        result.iterations += o.iterations;
        if (!ok)
            continue;
        if (best < 0 || o.objective < outcomes[best].objective)
            best = k;
    }
    bool converged = best >= 0;
    if (!converged) {
        for (int k = 0; k < cfg.n_starts; ++k)
            if (best < 0 || outcomes[k].residual < outcomes[best].residual)
                best = k;
    }
    result.best_start = best;

    const double amp = std::sqrt(t_max / f_max);
    for (auto& v : result.start_objectives)
        v *= amp;
    Eigen::MatrixXd omega = outcomes[best].x * amp;
    Eigen::MatrixXd reference = target.j_target;

    if (cfg.mode == SolveMode::fixed_budget) {
        // Solve the unit-weight pattern, then use J(c Omega) = c^2 J(Omega).
        omega /= std::sqrt(t_max);
        const double unit_objective = omega.cwiseAbs().sum();
        const double c = cfg.budget / unit_objective;
        omega *= c;
        result.attained_scale = c * c;
        reference = unit_target * result.attained_scale;
        for (auto& v : result.start_objectives)
            v /= std::sqrt(t_max); // objective of the unit pattern
    }

    result.omega = RabiMatrix{omega};
    result.attained = forward_coupling(result.omega, f);
    result.objective = omega.cwiseAbs().sum();
    result.relative_residual = relative_residual(result.attained.j, reference);
    result.converged = converged && result.relative_residual <= cfg.residual_tol;
    return result;
}

struct RoundtripReport {
    double max_abs_deviation = 0.0; // rad/s
    double relative_residual = 0.0;
    RabiMatrix canonical;

    std::string to_text() const
    {
        std::ostringstream os;
        os.precision(17);
        os << "max_abs_deviation_hz " << rad_to_hz(max_abs_deviation) << "\n";
        os << "relative_residual " << relative_residual << "\n";
        return os.str();
    }
};

/// Column-sign canonical form: the first nonzero entry of every column is positive.
inline RabiMatrix canonical_signs(const RabiMatrix& omega)
{
    RabiMatrix out = omega;
    for (Eigen::Index k = 0; k < out.omega.cols(); ++k) {
        for (Eigen::Index i = 0; i < out.omega.rows(); ++i) {
            if (out.omega(i, k) != 0.0) {
                if (out.omega(i, k) < 0.0)
                    out.omega.col(k) = -out.omega.col(k);
                break;
            }
        }
    }
    return out;
}

/// Deviation of the couplings produced by `omega` from `reference`, with the forward
/// map evaluated by plain nested loops over the tensor entries.
inline RoundtripReport verify_roundtrip(const RabiMatrix& omega, const Eigen::MatrixXd& reference, const ResponseTensor& f)
{
    const int n = f.size();
    require(omega.size() == n && reference.rows() == n, "verify_roundtrip: size mismatch");
    Eigen::MatrixXd j = Eigen::MatrixXd::Zero(n, n);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            if (a == b)
                continue;
            double acc = 0.0;
            for (int k = 0; k < n; ++k)
                acc += omega.omega(a, k) * omega.omega(b, k) * f(a, b, k);
            j(a, b) = acc;
        }
    RoundtripReport rep;
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            if (a != b)
                rep.max_abs_deviation = std::max(rep.max_abs_deviation, std::abs(j(a, b) - reference(a, b)));
    rep.relative_residual = relative_residual(j, reference);
    rep.canonical = canonical_signs(omega);
    return rep;
}

/// Reference couplings a solve was aiming for: the target itself, or the
/// unit pattern times attained_scale in fixed_budget mode.
inline Eigen::MatrixXd solve_reference(const SolveResult& result, const TargetGraph& target, const SolveConfig& cfg)
{
    if (cfg.mode != SolveMode::fixed_budget)
        return target.j_target;
    const double t_max = target.j_target.cwiseAbs().maxCoeff();
    if (t_max == 0.0)
        return target.j_target;
    return target.j_target / t_max * result.attained_scale;
}

inline RoundtripReport verify_roundtrip(const SolveResult& result, const TargetGraph& target, const ResponseTensor& f,
                                        const SolveConfig& cfg = {})
{
    return verify_roundtrip(result.omega, solve_reference(result, target, cfg), f);
}

} // namespace ionspin

#endif // IONSPIN_INVERSE_HPP
