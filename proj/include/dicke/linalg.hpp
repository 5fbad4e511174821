#pragma once

// Dense real-symmetric eigensolver on LAPACK: Householder tridiagonalization, MRRR
// eigenvectors for the requested part of the spectrum, back-transformation.

#include <Eigen/Dense>
#include <lapacke.h>

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace dicke {

struct EigenSystem {
  Eigen::VectorXd values;   ///< ascending
  Eigen::MatrixXd vectors;  ///< one column per value; empty when only values were requested
};

class SolverError : public std::runtime_error {
public:
  SolverError(const std::string& routine, lapack_int info, Eigen::Index dimension)
      : std::runtime_error(routine + " failed with info=" + std::to_string(info) +
                           " on a matrix of dimension " + std::to_string(dimension)),
        info(info),
        dimension(dimension) {}
  lapack_int info;
  Eigen::Index dimension;
};

/// Eigenpairs of the symmetric matrix `a` (lower triangle is read). With `upper`
/// set, only eigenvalues <= *upper are returned. `a` is consumed as workspace.
inline EigenSystem symmetric_eigen(Eigen::MatrixXd&& a, std::optional<double> upper = std::nullopt,
                                   bool want_vectors = true) {
  const lapack_int n = static_cast<lapack_int>(a.rows());
  if (a.cols() != a.rows()) throw std::invalid_argument("symmetric_eigen: matrix is not square");
  EigenSystem out;
  if (n == 0) return out;
  for (Eigen::Index i = 0; i < a.size(); ++i)
    if (!std::isfinite(a.data()[i])) throw std::invalid_argument("symmetric_eigen: non-finite entry");

  Eigen::VectorXd d(n), e(std::max<lapack_int>(n - 1, 1)), tau(std::max<lapack_int>(n - 1, 1));
  lapack_int info = LAPACKE_dsytrd(LAPACK_COL_MAJOR, 'L', n, a.data(), n, d.data(), e.data(), tau.data());
  if (info != 0) throw SolverError("dsytrd", info, n);

  // eigenvalues in the window by bisection; this also fixes how many vectors to allocate
  lapack_int m = 0, nsplit = 0;
  Eigen::VectorXd w(n);
  std::vector<lapack_int> iblock(n), isplit(n);
  const double vu = upper.value_or(0.0);
  double vl = 0.0;
  if (upper) {
    // Gershgorin lower bound of the tridiagonal matrix
    vl = std::numeric_limits<double>::max();
    for (lapack_int i = 0; i < n; ++i) {
      double r = 0.0;
      if (i > 0) r += std::abs(e[i - 1]);
      if (i < n - 1) r += std::abs(e[i]);
      vl = std::min(vl, d[i] - r);
    }
    vl -= 1.0 + 1e-8 * std::abs(vl);
    if (vu <= vl) return out;
  }
  info = LAPACKE_dstebz(upper ? 'V' : 'A', 'E', n, vl, vu, 0, 0, 0.0, d.data(), e.data(), &m, &nsplit,
                        w.data(), iblock.data(), isplit.data());
  if (info != 0) throw SolverError("dstebz", info, n);
  if (m == 0) return out;
  if (!want_vectors) {
    out.values = w.head(m);
    return out;
  }

  Eigen::MatrixXd z(n, m);
  std::vector<lapack_int> isuppz(2 * static_cast<std::size_t>(m));
  lapack_logical tryrac = 1;
  lapack_int m_found = 0;
  Eigen::VectorXd d2 = d, e2(n);
  e2.head(n - 1) = e.head(n - 1);
  e2[n - 1] = 0.0;
  info = LAPACKE_dstemr(LAPACK_COL_MAJOR, 'V', 'I', n, d2.data(), e2.data(), 0.0, 0.0, 1, m, &m_found,
                        w.data(), z.data(), n, m, isuppz.data(), &tryrac);
  if (info != 0) throw SolverError("dstemr", info, n);
  if (m_found != m) throw SolverError("dstemr (count mismatch)", m_found - m, n);
  info = LAPACKE_dormtr(LAPACK_COL_MAJOR, 'L', 'L', 'N', n, m, a.data(), n, tau.data(), z.data(), n);
  if (info != 0) throw SolverError("dormtr", info, n);
  out.values = w.head(m);
  out.vectors = std::move(z);
  return out;
}

/// All eigenpairs of a symmetric matrix, leaving the argument intact.
inline EigenSystem symmetric_eigen(const Eigen::MatrixXd& a) {
  Eigen::MatrixXd copy = a;
  return symmetric_eigen(std::move(copy));
}

}  // namespace dicke
