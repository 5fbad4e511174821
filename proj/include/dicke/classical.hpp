#pragma once

// Classical Dicke dynamics in the pole-free chart: trajectories, Lyapunov exponents,
// SALI, Poincare sections and the shell-averaged chaos map.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <limits>
#include <numeric>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "dicke/model.hpp"
#include "dicke/ode.hpp"
#include "dicke/parallel.hpp"

namespace dicke {

inline constexpr double lyapunov_threshold = 0.004;

struct TrajectoryConfig {
  double t_max = 2.0e4;
  double dt_init = 0.01;
  double rel_tol = 1e-13;
  double abs_tol = 1e-13;
  double renorm_interval = 1.0;
  double energy_drift_max = 1e-8;
  double h_max = 0.5;
  double sample_interval = 1.0;  ///< spacing of stored samples in integrate()

  void validate() const {
    if (!(t_max > 0.0)) throw std::invalid_argument("TrajectoryConfig: t_max must be > 0");
    if (!(dt_init > 0.0)) throw std::invalid_argument("TrajectoryConfig: dt_init must be > 0");
    if (!(rel_tol > 0.0) || !(abs_tol > 0.0))
      throw std::invalid_argument("TrajectoryConfig: tolerances must be > 0");
    if (!(renorm_interval > 0.0))
      throw std::invalid_argument("TrajectoryConfig: renorm_interval must be > 0");
    if (!(energy_drift_max > 0.0))
      throw std::invalid_argument("TrajectoryConfig: energy_drift_max must be > 0");
    if (!(h_max > 0.0)) throw std::invalid_argument("TrajectoryConfig: h_max must be > 0");
    if (!(sample_interval > 0.0))
      throw std::invalid_argument("TrajectoryConfig: sample_interval must be > 0");
  }

  ode::Tolerances tolerances() const { return {rel_tol, abs_tol, dt_init, h_max, 100'000'000}; }
};

using State4 = std::array<double, 4>;
using Matrix4 = std::array<std::array<double, 4>, 4>;

inline State4 to_state(const RegularizedPoint& x) { return {x.q, x.p, x.Qa, x.Pa}; }
inline RegularizedPoint to_point(const State4& y) { return {y[0], y[1], y[2], y[3]}; }

namespace detail {

// sqrt(1 - r^2/4); the chart ends at r = 2 (jz = +1), which no orbit below the
// static ESQPT energy reaches.
inline double chart_s(double Q, double P) {
  const double s2 = 1.0 - 0.25 * (Q * Q + P * P);
  return std::sqrt(std::max(s2, 1e-300));
}

}  // namespace detail

inline State4 equations_of_motion(const DickeParams& params, const RegularizedPoint& x) {
  const double w = params.omega(), w0 = params.omega0(), g = params.gamma();
  const double s = detail::chart_s(x.Qa, x.Pa);
  return {w * x.p, -w * x.q - 2.0 * g * x.Qa * s,
          w0 * x.Pa - g * x.q * x.Qa * x.Pa / (2.0 * s),
          -w0 * x.Qa - 2.0 * g * x.q * (s - x.Qa * x.Qa / (4.0 * s))};
}

/// d(equations_of_motion)/d(q, p, Qa, Pa).
inline Matrix4 jacobian(const DickeParams& params, const RegularizedPoint& x) {
  const double w = params.omega(), w0 = params.omega0(), g = params.gamma();
  const double q = x.q, Q = x.Qa, P = x.Pa;
  const double s = detail::chart_s(Q, P);
  const double s3 = s * s * s;
  const double A = s - Q * Q / (4.0 * s);
  Matrix4 J{};
  J[0] = {0.0, w, 0.0, 0.0};
  J[1] = {-w, 0.0, -2.0 * g * A, g * Q * P / (2.0 * s)};
  J[2] = {-g * Q * P / (2.0 * s), 0.0, -0.5 * g * q * (P / s + Q * Q * P / (4.0 * s3)),
          w0 - 0.5 * g * q * (Q / s + Q * P * P / (4.0 * s3))};
  J[3] = {-2.0 * g * A, 0.0, -w0 + 2.0 * g * q * (3.0 * Q / (4.0 * s) + Q * Q * Q / (16.0 * s3)),
          2.0 * g * q * (P / (4.0 * s) + Q * Q * P / (16.0 * s3))};
  return J;
}

/// Phase point plus `K` tangent vectors, flattened as [x, v1, ..., vK].
template <std::size_t K>
struct TangentSystem {
  static constexpr std::size_t size = 4 * (K + 1);
  using State = std::array<double, size>;
  const DickeParams* params;

  void operator()(double, const State& y, State& dy) const {
    const RegularizedPoint x{y[0], y[1], y[2], y[3]};
    const State4 f = equations_of_motion(*params, x);
    for (std::size_t i = 0; i < 4; ++i) dy[i] = f[i];
    if constexpr (K > 0) {
      const Matrix4 J = jacobian(*params, x);
      for (std::size_t k = 1; k <= K; ++k)
        for (std::size_t i = 0; i < 4; ++i) {
          double acc = 0.0;
          for (std::size_t l = 0; l < 4; ++l) acc += J[i][l] * y[4 * k + l];
          dy[4 * k + i] = acc;
        }
    }
  }
};

namespace detail {

inline void require_chart(const DickeParams& params, double energy) {
  if (energy >= params.omega0())
    throw std::domain_error("classical integration: energy " + std::to_string(energy) +
                            " reaches the north pole, outside the regularized chart");
}

/// Drift measured against max(|E0|, omega0) so shells near E = 0 stay meaningful.
inline double energy_scale(const DickeParams& params, double e0) {
  return std::max({std::abs(e0), params.omega0(), 1e-300});
}

inline void check_drift(const DickeParams& params, double e0, const RegularizedPoint& x, double t,
                        double limit, double& max_drift) {
  const double drift = std::abs(classical_energy(params, x) - e0) / energy_scale(params, e0);
  max_drift = std::max(max_drift, drift);
  if (drift > limit)
  {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "energy drift %.3g exceeds limit %.3g at t=%.6g", drift, limit, t);
    throw DriftError(buf, t, drift);
  }
}

template <std::size_t N>
double norm4(const std::array<double, N>& y, std::size_t offset) {
  double s = 0.0;
  for (std::size_t i = 0; i < 4; ++i) s += y[offset + i] * y[offset + i];
  return std::sqrt(s);
}

}  // namespace detail

struct Trajectory {
  std::vector<double> times;
  std::vector<RegularizedPoint> points;
  double max_relative_drift = 0.0;
  std::size_t steps = 0;
};

/// Samples the orbit every config.sample_interval from t = 0 to config.t_max.
inline Trajectory integrate(const DickeParams& params, const RegularizedPoint& initial,
                            const TrajectoryConfig& config) {
  config.validate();
  const double e0 = classical_energy(params, initial);
  detail::require_chart(params, e0);
  TangentSystem<0> rhs{&params};
  ode::Dop853<4> solver(config.tolerances());
  Trajectory out;
  State4 y = to_state(initial);
  double t = 0.0;
  out.times.push_back(0.0);
  out.points.push_back(initial);
  auto observer = [&](double, const State4&, double tn, const State4& yn) {
    detail::check_drift(params, e0, to_point(yn), tn, config.energy_drift_max, out.max_relative_drift);
    return true;
  };
  const auto n_samples = static_cast<std::size_t>(std::ceil(config.t_max / config.sample_interval - 1e-9));
  for (std::size_t k = 1; k <= n_samples; ++k) {
    const double target = std::min(config.t_max, static_cast<double>(k) * config.sample_interval);
    solver.integrate(rhs, t, y, target, observer);
    out.times.push_back(t);
    out.points.push_back(to_point(y));
  }
  out.steps = solver.accepted_steps();
  return out;
}

/// Final state after evolving for time t_end (negative values run backwards).
inline RegularizedPoint integrate_to(const DickeParams& params, const RegularizedPoint& initial,
                                     double t_end, const TrajectoryConfig& config) {
  config.validate();
  const double e0 = classical_energy(params, initial);
  detail::require_chart(params, e0);
  TangentSystem<0> rhs{&params};
  ode::Dop853<4> solver(config.tolerances());
  State4 y = to_state(initial);
  double t = 0.0;
  double max_drift = 0.0;
  solver.integrate(rhs, t, y, t_end, [&](double, const State4&, double tn, const State4& yn) {
    detail::check_drift(params, e0, to_point(yn), tn, config.energy_drift_max, max_drift);
    return true;
  });
  return to_point(y);
}

inline int classify_binary_lyapunov(double lambda) {
  if (!std::isfinite(lambda)) throw std::invalid_argument("classify_binary_lyapunov: non-finite input");
  return lambda > lyapunov_threshold ? 1 : 0;
}

struct LyapunovResult {
  double lambda = 0.0;
  std::vector<double> lambda_history;  ///< running estimate after each renormalization
  bool converged = false;
  int binary = 0;
  double max_relative_drift = 0.0;
};

/// Plateau test: the last 20% of the history stays within 10% of its final value.
inline bool history_converged(const std::vector<double>& history) {
  if (history.size() < 10) return false;
  const double last = history.back();
  if (!(std::abs(last) > 0.0)) return false;
  const std::size_t start = history.size() - history.size() / 5;
  for (std::size_t i = start; i < history.size(); ++i)
    if (std::abs(history[i] - last) > 0.1 * std::abs(last)) return false;
  return true;
}

inline LyapunovResult lyapunov_exponent(const DickeParams& params, const RegularizedPoint& initial,
                                        const TrajectoryConfig& config) {
  config.validate();
  const double e0 = classical_energy(params, initial);
  detail::require_chart(params, e0);
  using System = TangentSystem<1>;
  System rhs{&params};
  ode::Dop853<System::size> solver(config.tolerances());
  System::State y{};
  const State4 x0 = to_state(initial);
  for (std::size_t i = 0; i < 4; ++i) y[i] = x0[i];
  // fixed generic unit vector, so the estimate is deterministic
  const std::array<double, 4> v0{std::sqrt(7.0 / 58.0), std::sqrt(11.0 / 58.0), std::sqrt(17.0 / 58.0),
                                 std::sqrt(23.0 / 58.0)};
  for (std::size_t i = 0; i < 4; ++i) y[4 + i] = v0[i];

  LyapunovResult res;
  double t = 0.0, log_sum = 0.0;
  const auto n_renorm = static_cast<std::size_t>(std::ceil(config.t_max / config.renorm_interval - 1e-9));
  res.lambda_history.reserve(n_renorm);
  for (std::size_t k = 1; k <= n_renorm; ++k) {
    const double target = std::min(config.t_max, static_cast<double>(k) * config.renorm_interval);
    solver.integrate(rhs, t, y, target);
    detail::check_drift(params, e0, {y[0], y[1], y[2], y[3]}, t, config.energy_drift_max,
                        res.max_relative_drift);
    const double n = detail::norm4(y, 4);
    if (!(n > 0.0) || !std::isfinite(n))
      throw std::runtime_error("lyapunov_exponent: tangent vector degenerated");
    log_sum += std::log(n);
    for (std::size_t i = 4; i < 8; ++i) y[i] /= n;
    res.lambda_history.push_back(log_sum / t);
  }
  res.lambda = res.lambda_history.back();
  res.converged = history_converged(res.lambda_history);
  res.binary = classify_binary_lyapunov(res.lambda);
  return res;
}

enum class SaliClass { regular, chaotic };

inline std::string_view to_string(SaliClass c) { return c == SaliClass::regular ? "regular" : "chaotic"; }

struct SaliResult {
  double sali_final = std::sqrt(2.0);
  double decay_rate = 0.0;  ///< slope of -ln(SALI) against t
  SaliClass classification = SaliClass::regular;
  double t_final = 0.0;
  std::vector<double> times;
  std::vector<double> history;
};

inline constexpr double sali_threshold = 1e-8;

inline SaliResult sali(const DickeParams& params, const RegularizedPoint& initial,
                       const TrajectoryConfig& config) {
  config.validate();
  const double e0 = classical_energy(params, initial);
  detail::require_chart(params, e0);
  using System = TangentSystem<2>;
  System rhs{&params};
  ode::Dop853<System::size> solver(config.tolerances());
  System::State y{};
  const State4 x0 = to_state(initial);
  for (std::size_t i = 0; i < 4; ++i) y[i] = x0[i];
  // two orthonormal starting vectors
  const double a = 0.5;
  const std::array<double, 4> v1{a, a, a, a}, v2{a, -a, a, -a};
  for (std::size_t i = 0; i < 4; ++i) {
    y[4 + i] = v1[i];
    y[8 + i] = v2[i];
  }
  SaliResult res;
  double t = 0.0, max_drift = 0.0;
  const auto n_renorm = static_cast<std::size_t>(std::ceil(config.t_max / config.renorm_interval - 1e-9));
  for (std::size_t k = 1; k <= n_renorm; ++k) {
    const double target = std::min(config.t_max, static_cast<double>(k) * config.renorm_interval);
    solver.integrate(rhs, t, y, target);
    detail::check_drift(params, e0, {y[0], y[1], y[2], y[3]}, t, config.energy_drift_max, max_drift);
    const double n1 = detail::norm4(y, 4), n2 = detail::norm4(y, 8);
    if (!(n1 > 0.0) || !(n2 > 0.0) || !std::isfinite(n1 * n2))
      throw std::runtime_error("sali: tangent vector degenerated");
    double plus = 0.0, minus = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
      y[4 + i] /= n1;
      y[8 + i] /= n2;
      plus += (y[4 + i] + y[8 + i]) * (y[4 + i] + y[8 + i]);
      minus += (y[4 + i] - y[8 + i]) * (y[4 + i] - y[8 + i]);
    }
    const double value = std::sqrt(std::min(plus, minus));
    res.times.push_back(t);
    res.history.push_back(value);
    if (value < sali_threshold) {
      res.classification = SaliClass::chaotic;
      break;
    }
  }
  res.sali_final = res.history.empty() ? std::sqrt(2.0) : res.history.back();
  res.t_final = t;
  // least-squares slope of -ln SALI over the second half of the record
  const std::size_t n = res.history.size(), start = n / 2;
  if (n - start >= 2) {
    double st = 0.0, sl = 0.0, stt = 0.0, stl = 0.0;
    const double m = static_cast<double>(n - start);
    for (std::size_t i = start; i < n; ++i) {
      const double l = -std::log(std::max(res.history[i], 1e-300));
      st += res.times[i];
      sl += l;
      stt += res.times[i] * res.times[i];
      stl += res.times[i] * l;
    }
    const double den = m * stt - st * st;
    if (den > 0.0) res.decay_rate = (m * stl - st * sl) / den;
  }
  return res;
}

/// Initial condition on the p = 0 surface.
inline RegularizedPoint shell_point(const DickeParams& params, double epsilon, double jz_tilde,
                                    double phi, Branch branch) {
  auto pt = surface_point(params, {epsilon, jz_tilde, phi, branch});
  if (!pt) throw std::domain_error("shell_point: (jz, phi) lies outside the energy shell");
  return to_regularized(*pt);
}

/// Sign of dp/dt at p = 0 on a branch: q+ lies right of the parabola vertex, so the
/// restoring force is negative there, and positive on q-.
inline double crossing_direction(Branch branch) { return branch == Branch::plus ? -1.0 : 1.0; }

struct Crossing {
  double jz_tilde;
  double phi;
  RegularizedPoint point;
  double time;
};

struct PoincareSection {
  double epsilon = 0.0;
  Branch branch = Branch::plus;
  std::vector<Crossing> crossings;
  std::vector<std::size_t> orbit_ids;
  std::size_t drift_failures = 0;
};

inline constexpr double crossing_tolerance = 1e-10;

namespace detail {

/// Refines a p sign change inside the accepted step (t0, y0) -> (t1, ..) by bisection on
/// single eighth-order steps taken from y0.
inline Crossing refine_crossing(const DickeParams& params, const ode::Dop853<4>& solver,
                                const TangentSystem<0>& rhs, double t0, const State4& y0, double t1) {
  double lo = 0.0, hi = t1 - t0;
  const double p0 = y0[1];
  State4 y = y0;
  double h = hi;
  for (int it = 0; it < 200; ++it) {
    h = 0.5 * (lo + hi);
    y = solver.fixed_step(rhs, t0, y0, h);
    if (std::abs(y[1]) < crossing_tolerance && hi - lo < 1e-9) break;
    if ((y[1] > 0.0) == (p0 > 0.0) && y[1] != 0.0)
      lo = h;
    else
      hi = h;
    if (hi - lo < 1e-15) break;
  }
  const RegularizedPoint r = to_point(y);
  const PhasePoint pp = to_phase_point(r);
  (void)params;
  return {pp.jz_tilde, pp.phi, r, t0 + h};
}

}  // namespace detail

/// Integrates `initial` for config.t_max and returns its p = 0 crossings in the
/// branch's direction, at most max_crossings of them (0 = unlimited).
inline std::vector<Crossing> section_crossings(const DickeParams& params, const RegularizedPoint& initial,
                                               Branch branch, const TrajectoryConfig& config,
                                               std::size_t max_crossings = 0) {
  config.validate();
  const double e0 = classical_energy(params, initial);
  detail::require_chart(params, e0);
  TangentSystem<0> rhs{&params};
  ode::Dop853<4> solver(config.tolerances());
  State4 y = to_state(initial);
  double t = 0.0, max_drift = 0.0;
  const double dir = crossing_direction(branch);
  std::vector<Crossing> out;
  solver.integrate(rhs, t, y, config.t_max, [&](double t0, const State4& y0, double t1, const State4& y1) {
    detail::check_drift(params, e0, to_point(y1), t1, config.energy_drift_max, max_drift);
    const bool crossed = dir < 0.0 ? (y0[1] > 0.0 && y1[1] <= 0.0) : (y0[1] < 0.0 && y1[1] >= 0.0);
    if (crossed) {
      out.push_back(detail::refine_crossing(params, solver, rhs, t0, y0, t1));
      if (max_crossings != 0 && out.size() >= max_crossings) return false;
    }
    return true;
  });
  return out;
}

/// Seeds n_orbits initial conditions evenly along the phi = 0 line of the shell (alternating
/// with phi = pi when the line is short) and collects their crossings.
inline PoincareSection poincare_section(const DickeParams& params, double epsilon, Branch branch,
                                        std::size_t n_orbits, const TrajectoryConfig& config,
                                        unsigned threads = 0) {
  if (epsilon < ground_state_energy(params) - 1e-12)
    throw std::domain_error("poincare_section: energy below the ground state, empty shell");
  if (n_orbits == 0) throw std::invalid_argument("poincare_section: n_orbits must be >= 1");
  std::vector<RegularizedPoint> seeds;
  for (double phi : {0.0, std::numbers::pi}) {
    auto iv = shell_interval(params, epsilon, phi);
    if (!iv) continue;
    const double lo = iv->first, hi = iv->second;
    const std::size_t n = (phi == 0.0) ? (n_orbits + 1) / 2 : n_orbits / 2;
    for (std::size_t i = 0; i < n; ++i) {
      const double jz = lo + (hi - lo) * (static_cast<double>(i) + 0.5) / static_cast<double>(n);
      seeds.push_back(shell_point(params, epsilon, jz, phi, branch));
    }
  }
  if (seeds.empty()) throw std::domain_error("poincare_section: no seed points on the shell");
  std::vector<std::vector<Crossing>> per_orbit(seeds.size());
  std::vector<char> failed(seeds.size(), 0);
  parallel_for(
      seeds.size(),
      [&](std::size_t i) {
        try {
          per_orbit[i] = section_crossings(params, seeds[i], branch, config);
        } catch (const DriftError&) {
          failed[i] = 1;
        }
      },
      threads);
  PoincareSection sec;
  sec.epsilon = epsilon;
  sec.branch = branch;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    sec.drift_failures += failed[i];
    for (const auto& c : per_orbit[i]) {
      sec.crossings.push_back(c);
      sec.orbit_ids.push_back(i);
    }
  }
  return sec;
}

/// First return of a section point (given by jz, phi on the branch) to the same section.
inline std::optional<Crossing> return_map(const DickeParams& params, double epsilon, double jz_tilde,
                                          double phi, Branch branch, const TrajectoryConfig& config) {
  auto pt = surface_point(params, {epsilon, jz_tilde, phi, branch});
  if (!pt) return std::nullopt;
  auto c = section_crossings(params, to_regularized(*pt), branch, config, 1);
  if (c.empty()) return std::nullopt;
  return c.front();
}

struct PeriodicOrbit {
  double jz_tilde;
  double phi;
  double period;
  double residual;
};

/// Newton iteration on the section coordinates (Qa, Pa) for a fixed point of the return
/// map, with a finite-difference Jacobian. Returns nothing when the iteration fails.
inline std::optional<PeriodicOrbit> find_periodic_orbit(const DickeParams& params, double epsilon,
                                                        Branch branch, double jz_guess, double phi_guess,
                                                        const TrajectoryConfig& config, int max_iter = 30) {
  auto to_xy = [](double jz, double phi) {
    const double rho = std::sqrt(std::max(0.0, 2.0 * (1.0 + jz)));
    return std::array<double, 2>{rho * std::cos(phi), -rho * std::sin(phi)};
  };
  auto from_xy = [](const std::array<double, 2>& v) {
    const PhasePoint p = to_phase_point({0.0, 0.0, v[0], v[1]});
    return std::array<double, 2>{p.jz_tilde, p.phi};
  };
  auto F = [&](const std::array<double, 2>& v) -> std::optional<std::array<double, 3>> {
    const auto a = from_xy(v);
    auto c = return_map(params, epsilon, a[0], a[1], branch, config);
    if (!c) return std::nullopt;
    return std::array<double, 3>{c->point.Qa - v[0], c->point.Pa - v[1], c->time};
  };
  std::array<double, 2> v = to_xy(jz_guess, phi_guess);
  for (int it = 0; it < max_iter; ++it) {
    auto f = F(v);
    if (!f) return std::nullopt;
    const double res = std::hypot((*f)[0], (*f)[1]);
    if (res < 1e-10) {
      const auto a = from_xy(v);
      return PeriodicOrbit{a[0], a[1], (*f)[2], res};
    }
    const double d = 1e-7;
    std::array<std::array<double, 2>, 2> J{};
    for (int k = 0; k < 2; ++k) {
      auto vp = v, vm = v;
      vp[k] += d;
      vm[k] -= d;
      auto fp = F(vp), fm = F(vm);
      if (!fp || !fm) return std::nullopt;
      J[0][k] = ((*fp)[0] - (*fm)[0]) / (2 * d);
      J[1][k] = ((*fp)[1] - (*fm)[1]) / (2 * d);
    }
    const double det = J[0][0] * J[1][1] - J[0][1] * J[1][0];
    if (std::abs(det) < 1e-14) return std::nullopt;
    v[0] -= (J[1][1] * (*f)[0] - J[0][1] * (*f)[1]) / det;
    v[1] -= (-J[1][0] * (*f)[0] + J[0][0] * (*f)[1]) / det;
  }
  return std::nullopt;
}

struct ChaosMapGrid {
  std::vector<double> gamma_axis;
  std::vector<double> epsilon_axis;
  std::vector<double> mean_lambda;        ///< row-major [gamma][epsilon]; NaN for empty cells
  std::vector<std::size_t> n_accepted;    ///< trajectories that entered the mean
  std::vector<std::size_t> drift_failures;
  std::vector<char> empty;
  std::size_t n_samples = 0;
  std::uint64_t seed = 0;

  std::size_t index(std::size_t ig, std::size_t ie) const { return ig * epsilon_axis.size() + ie; }
};

/// Uniform (jz, phi, branch) sample on the p = 0 shell by accept-reject.
inline std::optional<RegularizedPoint> sample_shell_point(const DickeParams& params, double epsilon,
                                                          std::mt19937_64& rng,
                                                          std::size_t max_attempts = 200000) {
  for (std::size_t a = 0; a < max_attempts; ++a) {
    const double jz = -1.0 + 2.0 * uniform01(rng);
    const double phi = two_pi * uniform01(rng);
    const Branch b = uniform01(rng) < 0.5 ? Branch::plus : Branch::minus;
    auto pt = surface_point(params, {epsilon, jz, phi, b});
    if (pt) return to_regularized(*pt);
  }
  return std::nullopt;
}

inline ChaosMapGrid chaos_map(const DickeParams& base, const std::vector<double>& gamma_axis,
                              const std::vector<double>& epsilon_axis, std::size_t n_samples,
                              const TrajectoryConfig& config, std::uint64_t seed, unsigned threads = 0) {
  if (n_samples == 0) throw std::invalid_argument("chaos_map: n_samples must be >= 1");
  auto sorted = [](const std::vector<double>& v) {
    return !v.empty() && std::is_sorted(v.begin(), v.end());
  };
  if (!sorted(gamma_axis) || !sorted(epsilon_axis))
    throw std::invalid_argument("chaos_map: axes must be non-empty and ascending");
  config.validate();
  ChaosMapGrid grid;
  grid.gamma_axis = gamma_axis;
  grid.epsilon_axis = epsilon_axis;
  grid.n_samples = n_samples;
  grid.seed = seed;
  const std::size_t cells = gamma_axis.size() * epsilon_axis.size();
  grid.mean_lambda.assign(cells, std::numeric_limits<double>::quiet_NaN());
  grid.n_accepted.assign(cells, 0);
  grid.drift_failures.assign(cells, 0);
  grid.empty.assign(cells, 0);
  parallel_for(
      cells,
      [&](std::size_t cell) {
        const std::size_t ig = cell / epsilon_axis.size(), ie = cell % epsilon_axis.size();
        const DickeParams params = base.with_gamma(gamma_axis[ig]);
        const double eps = epsilon_axis[ie];
        if (eps < ground_state_energy(params)) {
          grid.empty[cell] = 1;
          return;
        }
        auto rng = stream_for(seed, cell);
        double sum = 0.0;
        std::size_t used = 0;
        for (std::size_t s = 0; s < n_samples; ++s) {
          auto x = sample_shell_point(params, eps, rng);
          if (!x) break;
          try {
            sum += lyapunov_exponent(params, *x, config).lambda;
            ++used;
          } catch (const DriftError&) {
            ++grid.drift_failures[cell];
          }
        }
        if (used == 0) {
          grid.empty[cell] = 1;
          return;
        }
        grid.n_accepted[cell] = used;
        grid.mean_lambda[cell] = sum / static_cast<double>(used);
      },
      threads);
  return grid;
}

}  // namespace dicke
