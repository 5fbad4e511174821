#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>

namespace dicke {

using complex = std::complex<double>;

inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// Raised when a finite Bloch parameter is requested at the north pole (z -> infinity).
class PoleError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

/// Raised when an integration leaves its energy-conservation budget.
class DriftError : public std::runtime_error {
public:
  DriftError(const std::string& what, double t, double drift)
      : std::runtime_error(what), time(t), relative_drift(drift) {}
  double time;
  double relative_drift;
};

/// Raised when the adaptive step size collapses below machine resolution.
class StepUnderflowError : public std::runtime_error {
public:
  StepUnderflowError(const std::string& what, double t) : std::runtime_error(what), time(t) {}
  double time;
};

/// Root selector on the p = 0 energy surface; plus is the algebraically larger root.
enum class Branch { plus, minus };

inline std::string_view to_string(Branch b) { return b == Branch::plus ? "plus" : "minus"; }

inline Branch branch_from_string(std::string_view s) {
  if (s == "plus" || s == "+" || s == "q+") return Branch::plus;
  if (s == "minus" || s == "-" || s == "q-") return Branch::minus;
  throw std::invalid_argument("unknown branch '" + std::string(s) + "' (expected plus|minus)");
}

/// Dicke model parameters. Energies are in the same (arbitrary) unit; j is a half-integer.
class DickeParams {
public:
  DickeParams() = default;

  static DickeParams make(double omega, double omega0, double gamma, double j) {
    if (!(omega > 0.0)) throw std::invalid_argument("DickeParams: omega must be > 0");
    if (!(omega0 >= 0.0)) throw std::invalid_argument("DickeParams: omega0 must be >= 0");
    if (!(gamma >= 0.0)) throw std::invalid_argument("DickeParams: gamma must be >= 0");
    if (!(j > 0.0)) throw std::invalid_argument("DickeParams: j must be > 0");
    const double twice = 2.0 * j;
    if (std::abs(twice - std::round(twice)) > 1e-12)
      throw std::invalid_argument("DickeParams: j must be a half-integer");
    DickeParams p;
    p.omega_ = omega;
    p.omega0_ = omega0;
    p.gamma_ = gamma;
    p.two_j_ = static_cast<int>(std::lround(twice));
    return p;
  }

  /// Coupling given as a multiple of the critical coupling sqrt(omega*omega0)/2.
  static DickeParams with_ratio(double omega, double omega0, double gamma_over_gc, double j) {
    return make(omega, omega0, gamma_over_gc * std::sqrt(omega * omega0) / 2.0, j);
  }

  DickeParams with_j(double j) const { return make(omega_, omega0_, gamma_, j); }
  DickeParams with_gamma(double gamma) const {
    return make(omega_, omega0_, gamma, j());
  }

  double omega() const { return omega_; }
  double omega0() const { return omega0_; }
  double gamma() const { return gamma_; }
  double j() const { return 0.5 * two_j_; }
  int two_j() const { return two_j_; }
  int n_atoms() const { return two_j_; }

  bool operator==(const DickeParams&) const = default;

private:
  double omega_ = 1.0;
  double omega0_ = 1.0;
  double gamma_ = 0.0;
  int two_j_ = 1;
};

inline double canonical_angle(double phi) {
  double r = std::fmod(phi, two_pi);
  if (r < 0.0) r += two_pi;
  if (r >= two_pi) r = 0.0;
  return r;
}

/// Classical phase-space point in the (q, p, jz/j, phi) chart.
struct PhasePoint {
  double q = 0.0;
  double p = 0.0;
  double jz_tilde = -1.0;
  double phi = 0.0;

  static PhasePoint make(double q, double p, double jz_tilde, double phi) {
    if (!std::isfinite(q) || !std::isfinite(p) || !std::isfinite(jz_tilde) || !std::isfinite(phi))
      throw std::invalid_argument("PhasePoint: non-finite coordinate");
    if (std::abs(jz_tilde) > 1.0 + 1e-12)
      throw std::invalid_argument("PhasePoint: |jz_tilde| must be <= 1");
    return PhasePoint{q, p, std::clamp(jz_tilde, -1.0, 1.0), canonical_angle(phi)};
  }
};

/// Pole-free canonical chart: atomic pair (Qa, Pa) with jz_tilde = (Qa^2 + Pa^2)/2 - 1.
struct RegularizedPoint {
  double q = 0.0;
  double p = 0.0;
  double Qa = 0.0;
  double Pa = 0.0;

  double jz_tilde() const { return 0.5 * (Qa * Qa + Pa * Pa) - 1.0; }
};

inline RegularizedPoint to_regularized(const PhasePoint& x) {
  const double rho = std::sqrt(std::max(0.0, 2.0 * (1.0 + x.jz_tilde)));
  return {x.q, x.p, rho * std::cos(x.phi), -rho * std::sin(x.phi)};
}

inline PhasePoint to_phase_point(const RegularizedPoint& r) {
  const double jz = std::clamp(r.jz_tilde(), -1.0, 1.0);
  const double phi = (r.Qa == 0.0 && r.Pa == 0.0) ? 0.0 : canonical_angle(std::atan2(-r.Pa, r.Qa));
  return {r.q, r.p, jz, phi};
}

/// A point of the p = 0 energy surface, identified by (energy, jz, phi, branch).
struct EnergySurfacePoint {
  double epsilon = 0.0;
  double jz_tilde = 0.0;
  double phi = 0.0;
  Branch branch = Branch::plus;
};

}  // namespace dicke
