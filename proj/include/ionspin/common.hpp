#ifndef IONSPIN_COMMON_HPP
#define IONSPIN_COMMON_HPP

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ionspin {

inline constexpr const char* version = "0.3.0";

/// Base class for all library failures. The kind maps onto CLI exit codes.
class Error : public std::runtime_error {
public:
    enum class Kind { validation = 1, numerical = 2 };

    Error(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    Kind kind() const noexcept { return kind_; }
    int exit_code() const noexcept { return static_cast<int>(kind_); }

private:
    Kind kind_;
};

/// Bad input: malformed config, out-of-range parameter, inconsistent shapes.
class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& what) : Error(Kind::validation, what) {}
};

/// A computation that cannot proceed: resonance, non-convergence, instability.
class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what) : Error(Kind::numerical, what) {}
};

inline void require(bool ok, const std::string& message)
{
    if (!ok)
        throw ValidationError(message);
}

namespace constants {
// CODATA 2018
inline constexpr double hbar = 1.054571817e-34;          // J s
inline constexpr double atomic_mass_unit = 1.66053906660e-27; // kg
inline constexpr double elementary_charge = 1.602176634e-19;  // C
inline constexpr double vacuum_permittivity = 8.8541878128e-12; // F/m
inline constexpr double coulomb_constant =
    elementary_charge * elementary_charge / (4.0 * std::numbers::pi * vacuum_permittivity);

inline constexpr double yb171_mass = 171.0 * atomic_mass_unit;
inline constexpr double raman_wavelength_355nm = 355e-9;
/// Counter-propagating Raman beams at 355 nm.
inline constexpr double default_delta_k = 2.0 * (2.0 * std::numbers::pi / raman_wavelength_355nm);
} // namespace constants

inline constexpr double two_pi = 2.0 * std::numbers::pi;

constexpr double hz_to_rad(double hz) noexcept { return two_pi * hz; }
constexpr double rad_to_hz(double rad_per_s) noexcept { return rad_per_s / two_pi; }

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept
{
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Derives an independent stream seed from a root seed, a stream label and an index.
///
/// child = mix64(mix64(root ^ fnv1a(label)) + index). Every random consumer in the
/// library draws its seed through this function so that concurrent design points
/// never share a stream and reruns reproduce bit-for-bit.
constexpr std::uint64_t derive_seed(std::uint64_t root, std::string_view label, std::uint64_t index = 0) noexcept
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : label) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return mix64(mix64(root ^ h) + index);
}

} // namespace ionspin

#endif // IONSPIN_COMMON_HPP
