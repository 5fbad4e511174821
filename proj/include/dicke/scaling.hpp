#pragma once

// Power-law fits of P_R against system size: log-log least squares for b N^alpha and
// Levenberg-Marquardt on log residuals for a + b N^c.

#include <Eigen/Dense>
#include <unsupported/Eigen/LevenbergMarquardt>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string_view>
#include <utility>
#include <vector>

namespace dicke {

using Index = Eigen::Index;

enum class ScalingModel { pure_power, power_offset };

inline std::string_view to_string(ScalingModel m) {
  return m == ScalingModel::pure_power ? "pure_power" : "power_offset";
}

struct ScalingFit {
  ScalingModel model = ScalingModel::pure_power;
  double a = 0.0;      ///< offset (power_offset only)
  double b = 0.0;      ///< prefactor
  double c = 0.0;      ///< exponent (alpha for pure_power)
  double residual_rms = 0.0;  ///< RMS of log(model) - log(data)
  std::size_t n_points = 0;
  bool degenerate = false;
  bool converged = true;

  double exponent() const { return c; }
  double operator()(double n) const { return a + b * std::pow(n, c); }
};

namespace detail {

inline void validate_scaling_input(const std::vector<std::pair<double, double>>& pts) {
  if (pts.size() < 4) throw std::invalid_argument("scaling_fit: need at least 4 points");
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (!(pts[i].first > 0.0) || !(pts[i].second > 0.0) || !std::isfinite(pts[i].first) ||
        !std::isfinite(pts[i].second))
      throw std::invalid_argument("scaling_fit: sizes and values must be positive and finite");
    if (i > 0 && !(pts[i].first > pts[i - 1].first))
      throw std::invalid_argument("scaling_fit: sizes must be strictly increasing");
  }
}

struct OffsetPowerResidual : Eigen::DenseFunctor<double> {
  const std::vector<std::pair<double, double>>* pts;

  OffsetPowerResidual(const std::vector<std::pair<double, double>>& p)
      : Eigen::DenseFunctor<double>(3, static_cast<int>(p.size())), pts(&p) {}

  static double model(const InputType& x, double n) { return x[0] + x[1] * std::pow(n, x[2]); }

  int operator()(const InputType& x, ValueType& f) const {
    for (std::size_t i = 0; i < pts->size(); ++i) {
      const double m = std::max(model(x, (*pts)[i].first), 1e-300);
      f[static_cast<Index>(i)] = std::log(m) - std::log((*pts)[i].second);
    }
    return 0;
  }

  int df(const InputType& x, JacobianType& J) const {
    for (std::size_t i = 0; i < pts->size(); ++i) {
      const double n = (*pts)[i].first;
      const double nc = std::pow(n, x[2]);
      const double m = std::max(x[0] + x[1] * nc, 1e-300);
      const auto r = static_cast<Index>(i);
      J(r, 0) = 1.0 / m;
      J(r, 1) = nc / m;
      J(r, 2) = x[1] * nc * std::log(n) / m;
    }
    return 0;
  }
};

}  // namespace detail

/// Fits (N, P_R) pairs; see ScalingModel. Constant data yields a zero exponent with the
/// degeneracy flag set.
inline ScalingFit scaling_fit(const std::vector<std::pair<double, double>>& pts, ScalingModel model) {
  detail::validate_scaling_input(pts);
  ScalingFit fit;
  fit.model = model;
  fit.n_points = pts.size();
  const auto n = static_cast<Index>(pts.size());
  Eigen::VectorXd lx(n), ly(n);
  for (Index i = 0; i < n; ++i) {
    lx[i] = std::log(pts[i].first);
    ly[i] = std::log(pts[i].second);
  }
  const double spread = ly.maxCoeff() - ly.minCoeff();
  if (spread <= 1e-14 * std::max(1.0, ly.cwiseAbs().maxCoeff())) {
    fit.degenerate = true;
    fit.b = std::exp(ly.mean());
    fit.c = 0.0;
    return fit;
  }
  Eigen::MatrixXd A(n, 2);
  A.col(0).setOnes();
  A.col(1) = lx;
  const Eigen::Vector2d sol = A.colPivHouseholderQr().solve(ly);
  fit.b = std::exp(sol[0]);
  fit.c = sol[1];
  fit.residual_rms = std::sqrt((A * sol - ly).squaredNorm() / static_cast<double>(n));
  if (model == ScalingModel::pure_power) return fit;

  detail::OffsetPowerResidual functor(pts);
  Eigen::LevenbergMarquardt<detail::OffsetPowerResidual> lm(functor);
  lm.setMaxfev(2000);
  Eigen::VectorXd x(3);
  x << 0.0, fit.b, fit.c;
  const auto status = lm.minimize(x);
  Eigen::VectorXd f(n);
  functor(x, f);
  const double rms = std::sqrt(f.squaredNorm() / static_cast<double>(n));
  fit.converged = status != Eigen::LevenbergMarquardtSpace::ImproperInputParameters && x.allFinite();
  if (fit.converged && rms <= fit.residual_rms * (1.0 + 1e-12)) {
    fit.a = x[0];
    fit.b = x[1];
    fit.c = x[2];
    fit.residual_rms = rms;
  }
  return fit;
}

}  // namespace dicke
