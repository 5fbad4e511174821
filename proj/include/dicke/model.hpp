#pragma once

// Classical Dicke Hamiltonian, its critical energies and the coherent-state map.

#include <cmath>
#include <optional>
#include <utility>

#include "dicke/types.hpp"

namespace dicke {

inline double critical_coupling(const DickeParams& params) {
  return std::sqrt(params.omega() * params.omega0()) / 2.0;
}

/// Energy per particle h = <alpha,z|H|alpha,z>/j.
inline double classical_energy(const DickeParams& params, const PhasePoint& x) {
  const double w = params.omega(), w0 = params.omega0(), g = params.gamma();
  const double sin_theta = std::sqrt(std::max(0.0, 1.0 - x.jz_tilde * x.jz_tilde));
  return w0 * x.jz_tilde + 0.5 * w * (x.q * x.q + x.p * x.p) + 2.0 * g * sin_theta * x.q * std::cos(x.phi);
}

/// Same Hamiltonian in the regularized chart, where sqrt(1-jz^2) cos(phi) = Qa sqrt(1 - r^2/4).
inline double classical_energy(const DickeParams& params, const RegularizedPoint& x) {
  const double w = params.omega(), w0 = params.omega0(), g = params.gamma();
  const double r2 = x.Qa * x.Qa + x.Pa * x.Pa;
  const double s = std::sqrt(std::max(0.0, 1.0 - 0.25 * r2));
  return w0 * (0.5 * r2 - 1.0) + 0.5 * w * (x.q * x.q + x.p * x.p) + 2.0 * g * x.q * x.Qa * s;
}

inline double ground_state_energy(const DickeParams& params) {
  const double gc = critical_coupling(params);
  const double g = params.gamma();
  if (g <= gc) return -params.omega0();
  // -(w0/2)(gc^2/g^2 + g^2/gc^2) written without dividing by gc, so omega0 = 0 is finite
  const double w = params.omega(), w0 = params.omega0();
  return -w * w0 * w0 / (8.0 * g * g) - 2.0 * g * g / w;
}

/// Classical minimum of the energy surface. Below the critical coupling this is the
/// south pole; above it one of the two symmetric superradiant minima (the one with q < 0, phi = 0).
inline PhasePoint ground_state_point(const DickeParams& params) {
  const double gc = critical_coupling(params);
  const double g = params.gamma();
  if (g <= gc || params.omega0() == 0.0) {
    if (params.omega0() == 0.0 && g > 0.0) {
      // degenerate atoms: minimum at jz = 0, q = -2g/omega
      return PhasePoint{-2.0 * g / params.omega(), 0.0, 0.0, 0.0};
    }
    return PhasePoint{0.0, 0.0, -1.0, 0.0};
  }
  const double jz = -(gc * gc) / (g * g);
  const double q = -(2.0 * g / params.omega()) * std::sqrt(1.0 - jz * jz);
  return PhasePoint{q, 0.0, jz, 0.0};
}

struct EsqptEnergies {
  double dynamical;  ///< lobes of the energy surface join; meaningful above the critical coupling
  double static_;    ///< the full Bloch sphere becomes accessible
  bool dynamical_present = false;
};

inline EsqptEnergies esqpt_energies(const DickeParams& params) {
  return {-params.omega0(), params.omega0(), params.gamma() > critical_coupling(params)};
}

/// Discriminant of the quadratic for q on the p = 0 surface, normalized so that
/// q_pm = -b +- sqrt(discriminant).
inline double surface_discriminant(const DickeParams& params, double epsilon, double jz_tilde,
                                   double phi) {
  const double w = params.omega();
  const double b = (2.0 * params.gamma() / w) * std::sqrt(std::max(0.0, 1.0 - jz_tilde * jz_tilde)) *
                   std::cos(phi);
  return b * b + (2.0 / w) * (epsilon - params.omega0() * jz_tilde);
}

struct QRoots {
  double plus;
  double minus;
};

/// Roots q+ >= q- of h(q, p=0, jz, phi) = epsilon; empty when the point is off the shell.
inline std::optional<QRoots> q_branches(const DickeParams& params, double epsilon, double jz_tilde,
                                        double phi) {
  if (std::isnan(epsilon) || std::isnan(jz_tilde) || std::isnan(phi))
    throw std::invalid_argument("q_branches: NaN input");
  if (std::abs(jz_tilde) > 1.0 + 1e-12) throw std::invalid_argument("q_branches: |jz_tilde| > 1");
  jz_tilde = std::clamp(jz_tilde, -1.0, 1.0);
  const double w = params.omega();
  const double b = (2.0 * params.gamma() / w) * std::sqrt(std::max(0.0, 1.0 - jz_tilde * jz_tilde)) *
                   std::cos(phi);
  const double c = (2.0 / w) * (params.omega0() * jz_tilde - epsilon);  // product of the roots
  const double disc = b * b - c;
  if (disc < 0.0) return std::nullopt;
  const double sq = std::sqrt(disc);
  // Vieta on the smaller-magnitude root avoids cancellation.
  if (b >= 0.0) {
    const double qm = -b - sq;
    const double qp = (qm != 0.0) ? c / qm : 0.0;
    return QRoots{qp, qm};
  }
  const double qp = -b + sq;
  const double qm = (qp != 0.0) ? c / qp : 0.0;
  return QRoots{qp, qm};
}

inline std::optional<PhasePoint> surface_point(const DickeParams& params,
                                               const EnergySurfacePoint& s) {
  auto roots = q_branches(params, s.epsilon, s.jz_tilde, s.phi);
  if (!roots) return std::nullopt;
  const double q = s.branch == Branch::plus ? roots->plus : roots->minus;
  return PhasePoint{q, 0.0, std::clamp(s.jz_tilde, -1.0, 1.0), canonical_angle(s.phi)};
}

/// Closed jz interval on which the p = 0 surface at fixed phi is non-empty. The
/// discriminant is concave in jz, so the admissible set is a single interval.
inline std::optional<std::pair<double, double>> shell_interval(const DickeParams& params,
                                                               double epsilon, double phi) {
  const double w = params.omega(), w0 = params.omega0();
  const double k = 4.0 * params.gamma() * params.gamma() / (w * w) * std::cos(phi) * std::cos(phi);
  // disc(jz) = -k jz^2 - (2 w0/w) jz + (k + 2 eps / w)
  const double a = -k, b = -2.0 * w0 / w, c = k + 2.0 * epsilon / w;
  auto disc = [&](double x) { return a * x * x + b * x + c; };
  double lo, hi;
  if (a == 0.0) {
    if (b == 0.0) {
      if (c < 0.0) return std::nullopt;
      return std::make_pair(-1.0, 1.0);
    }
    const double root = -c / b;  // b < 0: admissible for x <= root
    lo = -1.0;
    hi = std::min(1.0, root);
  } else {
    const double d = b * b - 4.0 * a * c;
    if (d < 0.0) return std::nullopt;
    const double sq = std::sqrt(d);
    double r1 = (-b + sq) / (2.0 * a), r2 = (-b - sq) / (2.0 * a);
    if (r1 > r2) std::swap(r1, r2);
    lo = std::max(-1.0, r1);
    hi = std::min(1.0, r2);
  }
  if (lo > hi) return std::nullopt;
  // pull the end points inside by rounding so q_branches accepts them
  auto on_shell = [&](double x) { return disc(x) >= 0.0 && q_branches(params, epsilon, x, phi).has_value(); };
  for (double step = 1e-16; !on_shell(lo) && lo < hi; step *= 2.0) lo = std::min(hi, lo + step);
  for (double step = 1e-16; !on_shell(hi) && hi > lo; step *= 2.0) hi = std::max(lo, hi - step);
  if (!on_shell(lo) || !on_shell(hi)) return std::nullopt;
  return std::make_pair(lo, hi);
}

/// Bloch coherent-state label. Stored through its normalized spin-1/2 spinor
/// (u_down, u_up) = (1, z)/sqrt(1+|z|^2) so the north pole (z -> infinity) is representable.
class BlochPoint {
public:
  static BlochPoint from_angles(double jz_tilde, double phi) {
    jz_tilde = std::clamp(jz_tilde, -1.0, 1.0);
    BlochPoint b;
    b.down_ = std::sqrt(0.5 * (1.0 - jz_tilde));
    b.up_ = std::polar(std::sqrt(0.5 * (1.0 + jz_tilde)), phi);
    b.jz_ = jz_tilde;
    b.phi_ = canonical_angle(phi);
    return b;
  }

  static BlochPoint from_z(complex z) {
    const double r2 = std::norm(z);
    const double jz = (r2 - 1.0) / (r2 + 1.0);
    return from_angles(jz, r2 == 0.0 ? 0.0 : std::arg(z));
  }

  static BlochPoint north_pole() { return from_angles(1.0, 0.0); }

  bool is_north_pole() const { return down_ == 0.0; }

  /// Finite stereographic parameter; throws PoleError at the north pole.
  complex value() const {
    if (is_north_pole()) throw PoleError("Bloch parameter z is infinite at the north pole");
    return up_ / down_;
  }

  double spinor_down() const { return down_; }
  complex spinor_up() const { return up_; }
  double jz_tilde() const { return jz_; }
  double phi() const { return phi_; }

private:
  double down_ = 1.0;
  complex up_ = 0.0;
  double jz_ = -1.0;
  double phi_ = 0.0;
};

struct CoherentParameters {
  complex alpha;
  BlochPoint z;
};

/// alpha = sqrt(j/2)(q + i p), z = sqrt((1+jz)/(1-jz)) e^{i phi}.
inline CoherentParameters to_coherent_parameters(const PhasePoint& x, double j) {
  if (!(j > 0.0)) throw std::invalid_argument("to_coherent_parameters: j must be > 0");
  return {std::sqrt(0.5 * j) * complex(x.q, x.p), BlochPoint::from_angles(x.jz_tilde, x.phi)};
}

inline PhasePoint from_coherent_parameters(const CoherentParameters& c, double j) {
  const double s = std::sqrt(0.5 * j);
  return {c.alpha.real() / s, c.alpha.imag() / s, c.z.jz_tilde(), c.z.phi()};
}

}  // namespace dicke
