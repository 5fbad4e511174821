#pragma once

// Lipkin-Meshkov-Glick control model H = J_z + (gamma_x J_x^2 + gamma_y J_y^2)/(2J - 1):
// exact spectra, classical energy surface, critical energies and coherent-state P_R.

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <utility>
#include <vector>

#include "dicke/coherent.hpp"
#include "dicke/linalg.hpp"
#include "dicke/scaling.hpp"

namespace dicke {

struct LMGParams {
  double gamma_x = -3.0;
  double gamma_y = -5.0;
  int two_J = 200;

  static LMGParams make(double gamma_x, double gamma_y, double J) {
    if (!std::isfinite(gamma_x) || !std::isfinite(gamma_y))
      throw std::invalid_argument("LMGParams: couplings must be finite");
    if (!(J >= 1.0) || std::abs(2.0 * J - std::round(2.0 * J)) > 1e-12)
      throw std::invalid_argument("LMGParams: J must be a half-integer >= 1");
    return {gamma_x, gamma_y, static_cast<int>(std::lround(2.0 * J))};
  }

  double J() const { return 0.5 * two_J; }
  Index dimension() const { return two_J + 1; }
  LMGParams with_J(double J) const { return make(gamma_x, gamma_y, J); }
};

/// Matrix in the J_z basis, row k <-> m = -J + k.
inline Eigen::MatrixXd build_lmg_hamiltonian(const LMGParams& p) {
  const double J = p.J(), s = 1.0 / (2.0 * J - 1.0);
  const Index d = p.dimension();
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(d, d);
  for (Index k = 0; k < d; ++k) {
    const double m = -J + static_cast<double>(k);
    // J_x^2 + J_y^2 = J^2 - J_z^2 on the diagonal, J_x^2 - J_y^2 = (J+^2 + J-^2)/2 off it
    H(k, k) = m + 0.5 * s * (p.gamma_x + p.gamma_y) * (J * (J + 1.0) - m * m);
    if (k + 2 < d) {
      const double v = 0.25 * s * (p.gamma_x - p.gamma_y) * std::sqrt(J * (J + 1.0) - m * (m + 1.0)) *
                       std::sqrt(J * (J + 1.0) - (m + 1.0) * (m + 2.0));
      H(k + 2, k) = H(k, k + 2) = v;
    }
  }
  return H;
}

/// Leading-order <z|H|z>/J; the exact expectation adds O(1/J) terms that are dropped.
inline double lmg_classical_energy(const LMGParams& p, double jz_tilde, double phi) {
  if (std::abs(jz_tilde) > 1.0 + 1e-12) throw std::invalid_argument("lmg_classical_energy: |jz_tilde| > 1");
  const double c = std::cos(phi), s = std::sin(phi);
  return jz_tilde + 0.5 * (1.0 - jz_tilde * jz_tilde) * (p.gamma_x * c * c + p.gamma_y * s * s);
}

struct LMGCriticalEnergies {
  double e_min;
  double e_cr;
  double e_join;
  double jz_min;  ///< location of the minima (phi = +-pi/2)
  double jz_cr;   ///< location of the saddles (phi = 0, pi)
};

/// Stationary energies per particle of the classical surface for gamma_x, gamma_y < -1.
inline LMGCriticalEnergies lmg_critical_energies(const LMGParams& p) {
  if (!(p.gamma_x < -1.0) || !(p.gamma_y < -1.0))
    throw std::domain_error("lmg_critical_energies: requires gamma_x, gamma_y < -1");
  // along a fixed phi, h = jz + g (1 - jz^2)/2 is stationary at jz = 1/g with value (g + 1/g)/2
  auto stationary = [](double g) { return std::make_pair(1.0 / g, 0.5 * (g + 1.0 / g)); };
  const auto [jy, ey] = stationary(p.gamma_y);
  const auto [jx, ex] = stationary(p.gamma_x);
  LMGCriticalEnergies e{std::min(ey, ex), std::max(ey, ex), -1.0, jy, jx};
  if (ex < ey) std::swap(e.jz_min, e.jz_cr);
  return e;
}

struct LMGSpectrum {
  LMGParams params;
  EigenSystem eig;
};

inline LMGSpectrum solve_lmg(const LMGParams& p) { return {p, symmetric_eigen(build_lmg_hamiltonian(p))}; }

inline PRResult lmg_participation_ratio(const LMGSpectrum& s, double jz_tilde, double phi) {
  const BlochPoint z = BlochPoint::from_angles(jz_tilde, phi);
  const auto logc = bloch_coefficients(s.params.two_J, complex(z.spinor_down()), z.spinor_up());
  Eigen::VectorXd re(s.params.dimension()), im(s.params.dimension());
  for (Index k = 0; k < s.params.dimension(); ++k) {
    const complex v = logc[k].value();
    re[k] = v.real();
    im[k] = v.imag();
  }
  const Eigen::VectorXd a = s.eig.vectors.transpose() * re;
  const Eigen::VectorXd b = s.eig.vectors.transpose() * im;
  const Eigen::VectorXd q = a.cwiseAbs2() + b.cwiseAbs2();
  return participation_ratio_from_weights(q, static_cast<double>(s.params.two_J));
}

struct LMGPRMap {
  std::vector<double> jz_grid;
  std::vector<double> phi_grid;
  std::vector<double> pr;  ///< row-major [jz][phi]

  double at(std::size_t i, std::size_t k) const { return pr[i * phi_grid.size() + k]; }
};

inline LMGPRMap lmg_pr_map(const LMGParams& p, const std::vector<double>& jz_grid,
                           const std::vector<double>& phi_grid, unsigned threads = 0) {
  const LMGSpectrum s = solve_lmg(p);
  LMGPRMap m{jz_grid, phi_grid, std::vector<double>(jz_grid.size() * phi_grid.size())};
  parallel_for(
      jz_grid.size(),
      [&](std::size_t i) {
        for (std::size_t k = 0; k < phi_grid.size(); ++k)
          m.pr[i * phi_grid.size() + k] = lmg_participation_ratio(s, jz_grid[i], phi_grid[k]).pr;
      },
      threads);
  return m;
}

struct LMGScalingPoint {
  double jz_tilde;
  std::vector<double> pr;  ///< one value per J
  ScalingFit fit;
  bool flat = false;  ///< ground-state doublet region: P_R stays near 2
};

/// P_R(J) along a fixed-phi line with a + b J^c fits. A point whose P_R at the
/// smallest J lies within 1 of the doublet value 2 is flagged as the flat region.
inline std::vector<LMGScalingPoint> lmg_pr_scaling(const LMGParams& base, double phi,
                                                   const std::vector<double>& jz_grid,
                                                   const std::vector<double>& J_list, unsigned threads = 0) {
  if (J_list.size() < 4) throw std::invalid_argument("lmg_pr_scaling: need at least 4 values of J");
  for (std::size_t i = 1; i < J_list.size(); ++i)
    if (!(J_list[i] > J_list[i - 1])) throw std::invalid_argument("lmg_pr_scaling: J_list must ascend");
  std::vector<LMGScalingPoint> out(jz_grid.size());
  for (std::size_t i = 0; i < jz_grid.size(); ++i) out[i].jz_tilde = jz_grid[i];
  for (double J : J_list) {
    const LMGSpectrum s = solve_lmg(base.with_J(J));
    parallel_for(
        jz_grid.size(), [&](std::size_t i) { out[i].pr.push_back(lmg_participation_ratio(s, jz_grid[i], phi).pr); },
        threads);
  }
  for (auto& pt : out) {
    std::vector<std::pair<double, double>> pts;
    for (std::size_t k = 0; k < J_list.size(); ++k) pts.emplace_back(J_list[k], pt.pr[k]);
    pt.fit = scaling_fit(pts, ScalingModel::power_offset);
    pt.flat = std::abs(pt.pr.front() - 2.0) < 1.0;
  }
  return out;
}

}  // namespace dicke
