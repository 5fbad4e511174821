#pragma once

// Glauber (x) Bloch coherent states on a converged ECB spectrum: Husimi values,
// participation ratios and P_R sections along lines of the p = 0 surface.

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "dicke/model.hpp"
#include "dicke/parallel.hpp"
#include "dicke/spectrum.hpp"

namespace dicke {

/// Log-magnitude / phase pair, so binomials of order ~1000 and large Glauber
/// amplitudes never overflow before the final exponentiation.
struct LogComplex {
  double log_abs = -std::numeric_limits<double>::infinity();
  double arg = 0.0;

  complex value() const { return std::isinf(log_abs) ? complex(0.0) : std::polar(std::exp(log_abs), arg); }
};

namespace detail {

inline double log_binomial_sqrt(int n, int k) {
  return 0.5 * (std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0));
}

inline LogComplex log_power(complex base, int k) {
  if (k == 0) return {0.0, 0.0};
  if (base == complex(0.0)) return {};
  return {k * std::log(std::abs(base)), k * std::arg(base)};
}

}  // namespace detail

/// <j, m|z> for the Bloch state with spinor (u_down, u_up), m = -j + k:
/// sqrt(C(2j, k)) u_up^k u_down^(2j-k).
inline std::vector<LogComplex> bloch_coefficients(int two_j, complex u_down, complex u_up) {
  std::vector<LogComplex> out(two_j + 1);
  for (int k = 0; k <= two_j; ++k) {
    const LogComplex a = detail::log_power(u_up, k), b = detail::log_power(u_down, two_j - k);
    out[k] = {detail::log_binomial_sqrt(two_j, k) + a.log_abs + b.log_abs, a.arg + b.arg};
  }
  return out;
}

inline std::vector<LogComplex> bloch_coefficients(int two_j, const BlochPoint& z) {
  return bloch_coefficients(two_j, complex(z.spinor_down()), z.spinor_up());
}

/// Components of |alpha> (x) |z> on the ECB, indexed like ECBasisSpec::index.
/// The spin part is expressed in the J_x eigenbasis by rotating the spinor, and the
/// boson part is <N|D(-alpha_m)|alpha> = e^{-|d|^2/2} d^N / sqrt(N!) e^{i alpha_m Im alpha},
/// d = alpha - alpha_m.
inline Eigen::VectorXcd coherent_ecb_components(const DickeParams& params, const ECBasisSpec& spec,
                                                complex alpha, const BlochPoint& z) {
  const double r = std::sqrt(0.5);
  const complex ud(z.spinor_down()), uu = z.spinor_up();
  const auto S = bloch_coefficients(spec.two_j, r * (ud - uu), r * (ud + uu));
  const double c = detail::ecb_shift(params);
  Eigen::VectorXcd out(spec.dimension());
  for (int mi = 0; mi <= spec.two_j; ++mi) {
    const double alpha_m = -c * spec.m_of(mi);
    const complex d = alpha - alpha_m;
    const double base = S[mi].log_abs - 0.5 * std::norm(d);
    const double phase = S[mi].arg + alpha_m * alpha.imag();
    const double log_d = std::log(std::abs(d));
    const double arg_d = std::arg(d);
    for (int N = 0; N <= spec.n_max; ++N) {
      double la;
      if (d == complex(0.0))
        la = (N == 0) ? base : -std::numeric_limits<double>::infinity();
      else
        la = base + N * log_d - 0.5 * std::lgamma(N + 1.0);
      out[spec.index(N, mi)] = std::isinf(la) ? complex(0.0) : std::polar(std::exp(la), phase + N * arg_d);
    }
  }
  return out;
}

struct CoherentExpansion {
  complex alpha;
  BlochPoint z;
  Eigen::VectorXcd coefficients;  ///< <E_k|alpha, z> for k < converged_count
  double captured_norm = 0.0;
};

class UnconvergedSpectrumError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline CoherentExpansion coherent_in_ecb(complex alpha, const BlochPoint& z, const Spectrum& spectrum) {
  if (spectrum.converged_count == 0)
    throw UnconvergedSpectrumError("coherent_in_ecb: spectrum has no converged states");
  const Eigen::VectorXcd full = coherent_ecb_components(spectrum.params, spectrum.spec, alpha, z);
  std::vector<Eigen::VectorXcd> per_sector;
  for (int s = 0; s < static_cast<int>(spectrum.sectors.size()); ++s) {
    const SectorBasis basis = spectrum.sector_basis(s);
    const Eigen::VectorXcd proj = basis.project(full);
    const auto& V = spectrum.sectors[s].vectors;
    // V is real: contract real and imaginary parts separately
    Eigen::VectorXd re = V.transpose() * proj.real();
    Eigen::VectorXd im = V.transpose() * proj.imag();
    Eigen::VectorXcd ov(re.size());
    ov.real() = re;
    ov.imag() = im;
    per_sector.push_back(std::move(ov));
  }
  CoherentExpansion e;
  e.alpha = alpha;
  e.z = z;
  e.coefficients.resize(spectrum.converged_count);
  for (Index k = 0; k < spectrum.converged_count; ++k) {
    const StateRef r = spectrum.order[k];
    e.coefficients[k] = per_sector[r.sector][r.local];
  }
  e.captured_norm = e.coefficients.squaredNorm();
  return e;
}

inline CoherentExpansion coherent_in_ecb(const PhasePoint& x, const Spectrum& spectrum) {
  const CoherentParameters cp = to_coherent_parameters(x, spectrum.params.j());
  return coherent_in_ecb(cp.alpha, cp.z, spectrum);
}

/// Energy spread sqrt(<H^2> - <H>^2) of |alpha, z> at phase point x (raw energy units).
/// The mean is exactly j times the classical energy.
inline double coherent_energy_width(const DickeParams& params, const PhasePoint& x) {
  const double j = params.j(), w = params.omega(), w0 = params.omega0();
  const double kappa = 2.0 * params.gamma() / std::sqrt(2.0 * j);
  const complex alpha = std::sqrt(0.5 * j) * complex(x.q, x.p);
  const double xbar = 2.0 * alpha.real();
  const double nz = x.jz_tilde, nx = std::sqrt(std::max(0.0, 1.0 - nz * nz)) * std::cos(x.phi);
  const double jx = j * nx, var_jx = 0.5 * j * (1.0 - nx * nx), var_jz = 0.5 * j * (1.0 - nz * nz);
  const double var = w * w * std::norm(alpha) + w0 * w0 * var_jz +
                     kappa * kappa * (jx * jx + (xbar * xbar + 1.0) * var_jx) + 2.0 * w * kappa * alpha.real() * jx -
                     w0 * kappa * xbar * j * nz * nx;
  return std::sqrt(std::max(var, 0.0));
}

inline double husimi(const Spectrum& spectrum, Index k, complex alpha, const BlochPoint& z) {
  if (k < 0 || k >= spectrum.converged_count)
    throw std::out_of_range("husimi: state index outside the converged range");
  return std::norm(coherent_in_ecb(alpha, z, spectrum).coefficients[k]);
}

inline int classify_binary_pr(double pr, double n_atoms) {
  if (!std::isfinite(pr) || !std::isfinite(n_atoms) || !(n_atoms > 0.0))
    throw std::invalid_argument("classify_binary_pr: non-finite input");
  return pr / n_atoms > 1.0 ? 1 : 0;
}

struct PRResult {
  double pr = 1.0;
  double pr_over_n = 0.0;
  int binary = 0;
  double captured_norm = 0.0;
  bool norm_deficit = false;  ///< captured_norm < 1 - norm_tol; the value is reported but flagged
};

inline constexpr double default_norm_tol = 1e-4;

/// P_R = (sum Q)^2 / sum Q^2, i.e. 1/sum Q^2 after renormalizing the captured weights.
template <class Weights>
PRResult participation_ratio_from_weights(const Weights& q, double n_atoms, double norm_tol = default_norm_tol) {
  double s1 = 0.0, s2 = 0.0;
  for (Index k = 0; k < static_cast<Index>(q.size()); ++k) {
    s1 += q[k];
    s2 += q[k] * q[k];
  }
  PRResult r;
  r.captured_norm = s1;
  r.norm_deficit = s1 < 1.0 - norm_tol;
  r.pr = s2 > 0.0 ? s1 * s1 / s2 : 0.0;
  r.pr_over_n = r.pr / n_atoms;
  r.binary = classify_binary_pr(r.pr, n_atoms);
  return r;
}

inline PRResult participation_ratio(const CoherentExpansion& e, double n_atoms,
                                    double norm_tol = default_norm_tol) {
  return participation_ratio_from_weights(e.coefficients.cwiseAbs2().eval(), n_atoms, norm_tol);
}

struct PRSectionPoint {
  double jz_tilde;
  bool valid = false;  ///< false when (jz, phi) is off the shell on this branch
  PRResult result;
};

inline std::vector<double> uniform_grid(double lo, double hi, std::size_t n) {
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i)
    g[i] = n == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  if (n > 1) g.back() = hi;
  return g;
}

/// P_R of the coherent states centred on (q_branch(eps, jz, phi), p = 0, jz, phi).
/// `epsilon` is the raw energy per particle E/j.
inline std::vector<PRSectionPoint> pr_section(const DickeParams& params, const Spectrum& spectrum, double epsilon,
                                              double phi, Branch branch, const std::vector<double>& jz_grid,
                                              double norm_tol = default_norm_tol, unsigned threads = 0) {
  if (!(spectrum.params == params)) throw std::invalid_argument("pr_section: spectrum built for other params");
  std::vector<PRSectionPoint> out(jz_grid.size());
  parallel_for(
      jz_grid.size(),
      [&](std::size_t i) {
        out[i].jz_tilde = jz_grid[i];
        auto pt = surface_point(params, {epsilon, jz_grid[i], phi, branch});
        if (!pt) return;
        out[i].valid = true;
        out[i].result = participation_ratio(coherent_in_ecb(*pt, spectrum), params.n_atoms(), norm_tol);
      },
      threads);
  return out;
}

/// Default section grid: n points spread uniformly over the shell interval at phi.
inline std::vector<double> section_grid(const DickeParams& params, double epsilon, double phi, std::size_t n = 201) {
  auto iv = shell_interval(params, epsilon, phi);
  if (!iv) return {};
  return uniform_grid(iv->first, iv->second, n);
}

}  // namespace dicke
