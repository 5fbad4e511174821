#pragma once

// Dicke Hamiltonian in the efficient coherent basis |N; m_x> = D(alpha_m)|N> (x) |j, m_x>,
// where alpha_m = -2 gamma m_x / (omega sqrt(2j)) makes the omega0 = 0 problem diagonal,
// plus the plain Fock-basis matrix used as an oracle.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dicke/linalg.hpp"
#include "dicke/model.hpp"

namespace dicke {

using Index = Eigen::Index;

struct ECBasisSpec {
  int two_j = 1;
  int n_max = 0;

  static ECBasisSpec make(double j, int n_max) {
    if (!(j > 0.0) || std::abs(2.0 * j - std::round(2.0 * j)) > 1e-12)
      throw std::invalid_argument("ECBasisSpec: j must be a positive half-integer");
    if (n_max < 0) throw std::invalid_argument("ECBasisSpec: n_max must be >= 0");
    return {static_cast<int>(std::lround(2.0 * j)), n_max};
  }

  double j() const { return 0.5 * two_j; }
  Index shells() const { return n_max + 1; }
  Index spin_states() const { return two_j + 1; }
  Index dimension() const { return shells() * spin_states(); }
  /// m_index = m_x + j in [0, 2j]
  Index index(int N, int m_index) const { return static_cast<Index>(m_index) * shells() + N; }
  double m_of(int m_index) const { return m_index - 0.5 * two_j; }

  bool operator==(const ECBasisSpec&) const = default;
};

struct FockBasisSpec {
  int two_j = 1;
  int n_max_photons = 0;

  static FockBasisSpec make(double j, int n_max_photons) {
    if (!(j > 0.0) || std::abs(2.0 * j - std::round(2.0 * j)) > 1e-12)
      throw std::invalid_argument("FockBasisSpec: j must be a positive half-integer");
    if (n_max_photons < 0) throw std::invalid_argument("FockBasisSpec: n_max_photons must be >= 0");
    return {static_cast<int>(std::lround(2.0 * j)), n_max_photons};
  }

  double j() const { return 0.5 * two_j; }
  Index shells() const { return n_max_photons + 1; }
  Index dimension() const { return shells() * (two_j + 1); }
  Index index(int n, int m_index) const { return static_cast<Index>(m_index) * shells() + n; }
};

enum class BasisTag { ecb, fock };

struct HamiltonianMatrix {
  Eigen::MatrixXd entries;
  BasisTag basis = BasisTag::ecb;
  int parity = 0;  ///< +1 / -1 for a parity block of the ECB, 0 for the full space

  Index dimension() const { return entries.rows(); }
};

/// <N'|D(beta)|N> for real beta and N, N' <= n_max. Generalized Laguerre values are
/// generated by their three-term recurrence in N at fixed order k = N' - N, scaled by
/// sqrt(N!/N'!) beta^k e^{-beta^2/2} so no factorial is ever formed.
inline Eigen::MatrixXd displaced_fock_overlaps(double beta, int n_max) {
  if (n_max < 0) throw std::invalid_argument("displaced_fock_overlaps: n_max must be >= 0");
  if (!std::isfinite(beta)) throw std::invalid_argument("displaced_fock_overlaps: beta not finite");
  const int n = n_max + 1;
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
  const double x = beta * beta;
  for (int k = 0; k < n; ++k) {
    // f_N = <N+k|D(beta)|N>, N = 0 .. n_max - k
    double f0;
    if (beta == 0.0) {
      f0 = (k == 0) ? 1.0 : 0.0;
    } else {
      const double logmag = k * std::log(std::abs(beta)) - 0.5 * x - 0.5 * std::lgamma(k + 1.0);
      f0 = std::exp(logmag) * ((beta < 0.0 && (k % 2 == 1)) ? -1.0 : 1.0);
    }
    const int len = n - k;
    double fm1 = 0.0, f = f0;
    for (int N = 0; N < len; ++N) {
      M(N + k, N) = f;
      if (k > 0) M(N, N + k) = (k % 2 == 0) ? f : -f;
      double next;
      if (N == 0) {
        next = f0 * std::sqrt(1.0 / (1.0 + k)) * (1.0 + k - x);
      } else {
        const double Nd = N, kd = k;
        next = std::sqrt((Nd + 1.0) / (Nd + kd + 1.0)) / (Nd + 1.0) * (2.0 * Nd + 1.0 + kd - x) * f -
               (Nd + kd) / (Nd + 1.0) * std::sqrt((Nd + 1.0) * Nd / ((Nd + kd + 1.0) * (Nd + kd))) * fm1;
      }
      fm1 = f;
      f = next;
    }
  }
  return M;
}

namespace detail {

inline double ecb_shift(const DickeParams& params) {
  return 2.0 * params.gamma() / (params.omega() * std::sqrt(static_cast<double>(params.two_j())));
}

/// Matrix element of omega0 J_z between J_x eigenstates m and m' = m +- 1.
inline double jz_coupling(double j, double m, double mp) {
  return -0.5 * std::sqrt(std::max(0.0, j * (j + 1.0) - m * mp));
}

inline void require_same_j(const DickeParams& params, int two_j) {
  if (params.two_j() != two_j) throw std::invalid_argument("basis j does not match params.j");
}

}  // namespace detail

/// Parity-adapted subspace of the ECB. Parity acts as |N; m> -> (-1)^N |N; -m>, so
/// the sector-p basis is (|N, m> + p (-1)^N |N, -m>)/sqrt(2) for m > 0, together with the
/// |N, 0> states whose (-1)^N equals p. parity = 0 denotes the unreduced basis.
struct SectorBasis {
  int parity = 0;
  ECBasisSpec spec;
  std::vector<Index> first, second;       ///< full-basis components per sector state (second = -1 if none)
  std::vector<double> first_c, second_c;  ///< their coefficients
  std::vector<int> shell;                 ///< N of each sector state
  std::vector<Index> row_of;              ///< full index -> sector index, -1 if absent
  std::vector<double> row_c;              ///< <sector state|full state>

  Index dimension() const { return static_cast<Index>(first.size()); }

  static SectorBasis make(const ECBasisSpec& spec, int parity) {
    if (parity != 0 && parity != 1 && parity != -1) throw std::invalid_argument("SectorBasis: parity must be 0, +1 or -1");
    SectorBasis b;
    b.parity = parity;
    b.spec = spec;
    const Index D = spec.dimension();
    b.row_of.assign(D, -1);
    b.row_c.assign(D, 0.0);
    const double r = std::sqrt(0.5);
    for (int mi = 0; mi <= spec.two_j; ++mi) {
      for (int N = 0; N <= spec.n_max; ++N) {
        const Index full = spec.index(N, mi);
        const int mirror = spec.two_j - mi;
        const double sign = (N % 2 == 0) ? 1.0 : -1.0;
        if (parity == 0) {
          b.row_of[full] = b.dimension();
          b.row_c[full] = 1.0;
          b.first.push_back(full);
          b.first_c.push_back(1.0);
          b.second.push_back(-1);
          b.second_c.push_back(0.0);
          b.shell.push_back(N);
        } else if (mi == mirror) {
          if (sign != parity) continue;
          b.row_of[full] = b.dimension();
          b.row_c[full] = 1.0;
          b.first.push_back(full);
          b.first_c.push_back(1.0);
          b.second.push_back(-1);
          b.second_c.push_back(0.0);
          b.shell.push_back(N);
        } else if (mi > mirror) {
          const Index other = spec.index(N, mirror);
          const Index row = b.dimension();
          b.row_of[full] = row;
          b.row_c[full] = r;
          b.row_of[other] = row;
          b.row_c[other] = parity * sign * r;
          b.first.push_back(full);
          b.first_c.push_back(r);
          b.second.push_back(other);
          b.second_c.push_back(parity * sign * r);
          b.shell.push_back(N);
        }
      }
    }
    return b;
  }

  /// Sector coordinates -> full ECB coordinates.
  template <class Vec>
  Eigen::VectorXd embed(const Vec& v) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(spec.dimension());
    for (Index s = 0; s < dimension(); ++s) {
      out[first[s]] += first_c[s] * v[s];
      if (second[s] >= 0) out[second[s]] += second_c[s] * v[s];
    }
    return out;
  }

  /// Full ECB coordinates -> sector coordinates (orthogonal projection).
  Eigen::VectorXcd project(const Eigen::VectorXcd& full) const {
    Eigen::VectorXcd out(dimension());
    for (Index s = 0; s < dimension(); ++s) {
      complex acc = first_c[s] * full[first[s]];
      if (second[s] >= 0) acc += second_c[s] * full[second[s]];
      out[s] = acc;
    }
    return out;
  }
};

/// ECB Hamiltonian restricted to a sector (the whole space when basis.parity == 0).
inline HamiltonianMatrix build_ecb_sector(const DickeParams& params, const SectorBasis& basis) {
  const ECBasisSpec& spec = basis.spec;
  detail::require_same_j(params, spec.two_j);
  const double w = params.omega(), w0 = params.omega0(), g = params.gamma(), j = spec.j();
  const double c = detail::ecb_shift(params);
  const Index D = basis.dimension();
  HamiltonianMatrix H;
  H.basis = BasisTag::ecb;
  H.parity = basis.parity;
  H.entries = Eigen::MatrixXd::Zero(D, D);
  // m' = m + 1 has beta = c, m' = m - 1 has beta = -c, and D(-c) = D(c)^T
  const Eigen::MatrixXd up = displaced_fock_overlaps(c, spec.n_max);
  auto& E = H.entries;
  auto scatter = [&](Index col, Index full, double coef) {
    const int mi = static_cast<int>(full / spec.shells());
    const int N = static_cast<int>(full % spec.shells());
    const double m = spec.m_of(mi);
    const Index row = basis.row_of[full];
    if (row >= 0) E(row, col) += coef * basis.row_c[full] * (w * N - 2.0 * g * g / (w * j) * m * m);
    if (w0 == 0.0) return;
    for (int dm : {+1, -1}) {
      const int mpi = mi + dm;
      if (mpi < 0 || mpi > spec.two_j) continue;
      const double amp = coef * w0 * detail::jz_coupling(j, m, spec.m_of(mpi));
      for (int Np = 0; Np <= spec.n_max; ++Np) {
        const Index f = spec.index(Np, mpi);
        const Index r = basis.row_of[f];
        if (r < 0) continue;
        const double ov = dm > 0 ? up(Np, N) : up(N, Np);
        E(r, col) += amp * basis.row_c[f] * ov;
      }
    }
  };
  for (Index s = 0; s < D; ++s) {
    scatter(s, basis.first[s], basis.first_c[s]);
    if (basis.second[s] >= 0) scatter(s, basis.second[s], basis.second_c[s]);
  }
  // the assembled matrix is symmetric up to rounding; make it exact
  const double scale = std::max(1.0, E.cwiseAbs().maxCoeff());
  for (Index a = 0; a < D; ++a)
    for (Index b = a + 1; b < D; ++b) {
      const double x = E(a, b), y = E(b, a);
      if (std::abs(x - y) > 1e-12 * scale)
        throw std::logic_error("build_ecb_hamiltonian: symmetry check failed");
      E(a, b) = E(b, a) = 0.5 * (x + y);
    }
  return H;
}

inline HamiltonianMatrix build_ecb_hamiltonian(const DickeParams& params, const ECBasisSpec& spec) {
  return build_ecb_sector(params, SectorBasis::make(spec, 0));
}

inline HamiltonianMatrix build_fock_hamiltonian(const DickeParams& params, const FockBasisSpec& spec) {
  detail::require_same_j(params, spec.two_j);
  const double w = params.omega(), w0 = params.omega0(), g = params.gamma(), j = spec.j();
  const double coupling = 2.0 * g / std::sqrt(static_cast<double>(params.two_j()));
  const Index D = spec.dimension();
  HamiltonianMatrix H;
  H.basis = BasisTag::fock;
  H.entries = Eigen::MatrixXd::Zero(D, D);
  auto& E = H.entries;
  for (int mi = 0; mi <= spec.two_j; ++mi) {
    const double m = mi - j;
    for (int n = 0; n <= spec.n_max_photons; ++n) {
      const Index a = spec.index(n, mi);
      E(a, a) = w * n + w0 * m;
      if (mi == spec.two_j || n == spec.n_max_photons) continue;
      // (a + a^dag)(J+ + J-)/2 between (n, m) and (n+1, m+1), (n+1, m-1) and mirrors
      const double amp = coupling * std::sqrt(n + 1.0) * 0.5 * std::sqrt(j * (j + 1.0) - m * (m + 1.0));
      const Index b = spec.index(n + 1, mi + 1);
      E(a, b) = E(b, a) = amp;
      const Index c = spec.index(n, mi + 1), d = spec.index(n + 1, mi);
      E(c, d) = E(d, c) = amp;
    }
  }
  return H;
}

inline EigenSystem diagonalize(const HamiltonianMatrix& matrix) { return symmetric_eigen(matrix.entries); }

/// Cutoff heuristic for the ECB: enough displaced quanta to hold states up to
/// epsilon_max (energy per particle) with a margin.
inline int suggested_cutoff(const DickeParams& params, double epsilon_max) {
  const double floor = std::min(-2.0 * params.gamma() * params.gamma() / params.omega(), -params.omega0());
  const double span = std::max(0.0, epsilon_max - floor);
  return static_cast<int>(std::ceil(1.1 * params.j() * span / params.omega() + 18.0));
}

}  // namespace dicke
