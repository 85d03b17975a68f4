#ifndef IONSPIN_COUPLING_HPP
#define IONSPIN_COUPLING_HPP

#include "ionspin/common.hpp"
#include "ionspin/crystal.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

namespace ionspin {

/// Beatnote detunings mu_n, tone n paired with mode n (descending frequency order).
struct DetuningSchedule {
    Eigen::VectorXd detunings; // rad/s
    double f_s = 0.0;
    double reference_gap = 0.0; // omega_1 - omega_2, rad/s

    int size() const noexcept { return static_cast<int>(detunings.size()); }
};

/// Signed spectral amplitudes Omega(i, n): ion i, spectral component n (rad/s).
struct RabiMatrix {
    Eigen::MatrixXd omega;

    int size() const noexcept { return static_cast<int>(omega.rows()); }
    static RabiMatrix zero(int n) { return {Eigen::MatrixXd::Zero(n, n)}; }
};

/// Symmetric Ising couplings J(i, j) in rad/s, zero diagonal.
struct CouplingMatrix {
    Eigen::MatrixXd j;

    int size() const noexcept { return static_cast<int>(j.rows()); }
    static CouplingMatrix zero(int n) { return {Eigen::MatrixXd::Zero(n, n)}; }
};

/// F(i, j, n) = sum_m eta(i,m) eta(j,m) omega_m / (mu_n^2 - omega_m^2).
///
/// Stored as one symmetric N x N slice per spectral component.
class ResponseTensor {
public:
    ResponseTensor() = default;
    explicit ResponseTensor(std::vector<Eigen::MatrixXd> slices) : slices_(std::move(slices)) {}

    int size() const noexcept { return static_cast<int>(slices_.size()); }
    double operator()(int i, int j, int n) const { return slices_[n](i, j); }
    const Eigen::MatrixXd& slice(int n) const { return slices_[n]; }
    const std::vector<Eigen::MatrixXd>& slices() const noexcept { return slices_; }

    /// Largest |F| entry over the off-diagonal (i != j) elements.
    double max_abs_offdiagonal() const
    {
        double m = 0.0;
        for (const auto& s : slices_)
            for (int j = 0; j < s.cols(); ++j)
                for (int i = 0; i < s.rows(); ++i)
                    if (i != j)
                        m = std::max(m, std::abs(s(i, j)));
        return m;
    }

private:
    std::vector<Eigen::MatrixXd> slices_;
};

/// Minimum allowed |mu_n - omega_m| for unpaired (n, m), as a fraction of omega_1.
inline constexpr double schedule_guard_band = 1e-6;

inline DetuningSchedule detuning_schedule(const ModeSpectrum& modes, double f_s)
{
    require(f_s > 0.0 && f_s < 1.0, "detuning_schedule: f_s must lie in (0, 1)");
    const int n = modes.size();
    require(n >= 1, "detuning_schedule: empty mode spectrum");
    DetuningSchedule s;
    s.f_s = f_s;
    s.detunings.resize(n);
    const double w1 = modes.frequencies[0];
    if (n == 1) {
        s.reference_gap = 0.0;
        s.detunings[0] = w1 * (1.0 + 0.01 * f_s);
        return s;
    }
    s.reference_gap = w1 - modes.frequencies[1];
    for (int m = 0; m < n; ++m)
        s.detunings[m] = modes.frequencies[m] + f_s * s.reference_gap;

    for (int k = 0; k < n; ++k) {
        for (int m = 0; m < n; ++m) {
            const double gap = std::abs(s.detunings[k] - modes.frequencies[m]);
            if ((k != m && gap < schedule_guard_band * w1) || gap == 0.0) {
                std::ostringstream os;
                os << "detuning_schedule: tone " << k << " collides with mode " << m << " (|mu - omega| = "
                   << gap << " rad/s)";
                throw NumericalError(os.str());
            }
        }
    }
    return s;
}

inline ResponseTensor response_tensor(const ModeSpectrum& modes, const DetuningSchedule& sched)
{
    const int n = modes.size();
    require(sched.size() == n, "response_tensor: schedule and mode spectrum sizes differ");
    const Eigen::MatrixXd& eta = modes.lamb_dicke;

    // Per-(n, m) weights first so resonances are reported before any work.
    Eigen::MatrixXd weight(n, n);
    for (int k = 0; k < n; ++k) {
        const double mu = sched.detunings[k];
        for (int m = 0; m < n; ++m) {
            const double w = modes.frequencies[m];
            const double denom = mu * mu - w * w;
            if (denom == 0.0 || !std::isfinite(denom)) {
                std::ostringstream os;
                os << "response_tensor: tone " << k << " is resonant with mode " << m;
                throw NumericalError(os.str());
            }
            weight(k, m) = w / denom;
        }
    }

    std::vector<Eigen::MatrixXd> slices(n, Eigen::MatrixXd::Zero(n, n));
    for (int k = 0; k < n; ++k) {
        Eigen::MatrixXd& f = slices[k];
        for (int j = 0; j < n; ++j) {
            for (int i = 0; i <= j; ++i) {
                double acc = 0.0;
                for (int m = 0; m < n; ++m)
                    acc += eta(i, m) * eta(j, m) * weight(k, m);
                f(i, j) = acc;
                f(j, i) = acc;
            }
        }
    }
    return ResponseTensor(std::move(slices));
}

/// J(i, j) = sum_n Omega(i, n) Omega(j, n) F(i, j, n) for i != j; zero diagonal.
inline CouplingMatrix forward_coupling(const RabiMatrix& omega, const ResponseTensor& f)
{
    const int n = f.size();
    require(omega.omega.rows() == n && omega.omega.cols() == n, "forward_coupling: Rabi matrix shape mismatch");
    Eigen::MatrixXd j = Eigen::MatrixXd::Zero(n, n);
    for (int k = 0; k < n; ++k) {
        const auto col = omega.omega.col(k);
        j.noalias() += f.slice(k).cwiseProduct(col * col.transpose());
    }
    for (int b = 0; b < n; ++b) {
        j(b, b) = 0.0;
        for (int a = b + 1; a < n; ++a)
            j(b, a) = j(a, b);
    }
    return {std::move(j)};
}

/// Coupling produced by a single beatnote mu applied with per-ion amplitudes.
inline CouplingMatrix single_tone_coupling(const Eigen::VectorXd& amplitudes, double mu, const ModeSpectrum& modes)
{
    const int n = modes.size();
    require(amplitudes.size() == n, "single_tone_coupling: amplitude vector size mismatch");
    Eigen::VectorXd weight(n);
    for (int m = 0; m < n; ++m) {
        const double w = modes.frequencies[m];
        const double denom = mu * mu - w * w;
        if (denom == 0.0)
            throw NumericalError("single_tone_coupling: tone is resonant with mode " + std::to_string(m));
        weight[m] = w / denom;
    }
    Eigen::MatrixXd j = Eigen::MatrixXd::Zero(n, n);
    for (int b = 0; b < n; ++b) {
        for (int a = b + 1; a < n; ++a) {
            double acc = 0.0;
            for (int m = 0; m < n; ++m)
                acc += modes.lamb_dicke(a, m) * modes.lamb_dicke(b, m) * weight[m];
            j(a, b) = j(b, a) = amplitudes[a] * amplitudes[b] * acc;
        }
    }
    return {std::move(j)};
}

struct ValidityViolation {
    int ion = 0;
    int mode = 0;
    int tone = 0;
    double ratio = 0.0;
};

struct ValidityReport {
    double threshold = 0.1;
    double max_ratio = 0.0;
    std::vector<ValidityViolation> violations;

    bool ok() const noexcept { return violations.empty(); }

    std::string to_text() const
    {
        std::ostringstream os;
        os.precision(17);
        os << "# adiabatic elimination check: ratio = eta(i,m) |Omega(i,n)| / |omega_m - mu_n|\n";
        os << "threshold " << threshold << "\n";
        os << "max_ratio " << max_ratio << "\n";
        os << "violations " << violations.size() << "\n";
        os << "ion,mode,tone,ratio\n";
        for (const auto& v : violations)
            os << v.ion << ',' << v.mode << ',' << v.tone << ',' << v.ratio << '\n';
        return os.str();
    }
};

inline ValidityReport validity_check(const RabiMatrix& omega, const DetuningSchedule& sched, const ModeSpectrum& modes,
                                     double threshold = 0.1)
{
    const int n = modes.size();
    require(omega.size() == n && sched.size() == n, "validity_check: inconsistent sizes");
    ValidityReport report;
    report.threshold = threshold;
    for (int i = 0; i < n; ++i) {
        for (int m = 0; m < n; ++m) {
            for (int k = 0; k < n; ++k) {
                const double num = std::abs(modes.lamb_dicke(i, m) * omega.omega(i, k));
                const double den = std::abs(modes.frequencies[m] - sched.detunings[k]);
                const double r = num == 0.0 ? 0.0 : num / den;
                report.max_ratio = std::max(report.max_ratio, r);
                if (r > threshold)
                    report.violations.push_back({i, m, k, r});
            }
        }
    }
    return report;
}

} // namespace ionspin

#endif // IONSPIN_COUPLING_HPP
