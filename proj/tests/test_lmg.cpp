#include <gtest/gtest.h>

#include <numbers>

#include "dicke/lmg.hpp"

using namespace dicke;

namespace {

const LMGParams paper_regime = LMGParams::make(-3.0, -5.0, 100.0);

}  // namespace

TEST(LMGHamiltonian, Diagonal) {
  const auto p = LMGParams::make(0.0, 0.0, 3.0);
  const auto H = build_lmg_hamiltonian(p);
  EXPECT_EQ(H, Eigen::MatrixXd(Eigen::VectorXd::LinSpaced(7, -3, 3).asDiagonal()));
  const double g = -1.7, J = 4.5;
  const auto es = symmetric_eigen(build_lmg_hamiltonian(LMGParams::make(g, g, J)));
  std::vector<double> ref;
  for (double m = -J; m <= J + 1e-9; m += 1) ref.push_back(m + g * (J * (J + 1) - m * m) / (2 * J - 1));
  std::sort(ref.begin(), ref.end());
  for (std::size_t k = 0; k < ref.size(); ++k) EXPECT_NEAR(es.values[k], ref[k], 1e-12);
}

TEST(LMGHamiltonian, SpinOneOracle) {
  // J = 1 in the basis m = -1, 0, 1 with J_x and J_y written out by hand
  const double r = 1.0 / std::sqrt(2.0);
  Eigen::Matrix3d Jx, Jz;
  Eigen::Matrix3cd Jy;
  Jx << 0, r, 0, r, 0, r, 0, r, 0;
  Jz << -1, 0, 0, 0, 0, 0, 0, 0, 1;
  const complex i(0, 1);
  // J_y = (J+ - J-)/(2i), with J+ raising m
  Jy << 0, i * r, 0, -i * r, 0, i * r, 0, -i * r, 0;
  const Eigen::Matrix3cd H = Jz.cast<complex>() + (-3.0) * (Jx * Jx).cast<complex>() + (-5.0) * Jy * Jy;
  EXPECT_LT(H.imag().cwiseAbs().maxCoeff(), 1e-15);
  const auto built = build_lmg_hamiltonian(LMGParams::make(-3.0, -5.0, 1.0));
  EXPECT_LT((built - H.real()).cwiseAbs().maxCoeff(), 1e-14);
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> ref(H.real());
  const auto es = symmetric_eigen(built);
  EXPECT_LT((es.values - ref.eigenvalues()).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(LMGHamiltonian, ExactResiduals) {
  const auto s = solve_lmg(paper_regime);
  const auto H = build_lmg_hamiltonian(paper_regime);
  const double norm = H.cwiseAbs().rowwise().sum().maxCoeff();
  EXPECT_LT((H * s.eig.vectors - s.eig.vectors * s.eig.values.asDiagonal()).colwise().norm().maxCoeff(), 1e-10 * norm);
}

TEST(LMGClassical, EnergySurface) {
  for (double phi : {0.0, 1.0, 2.5}) EXPECT_DOUBLE_EQ(lmg_classical_energy(paper_regime, -1.0, phi), -1.0);
  const double half_pi = std::numbers::pi / 2;
  // stationary along phi = pi/2 at jz = 1/gamma_y
  const double h = 1e-6;
  const double d = (lmg_classical_energy(paper_regime, -0.2 + h, half_pi) -
                    lmg_classical_energy(paper_regime, -0.2 - h, half_pi)) / (2 * h);
  EXPECT_NEAR(d, 0.0, 1e-9);
  EXPECT_NEAR(lmg_classical_energy(paper_regime, -0.2, half_pi), -2.6, 1e-14);
  EXPECT_THROW(lmg_classical_energy(paper_regime, 1.5, 0.0), std::invalid_argument);
}

TEST(LMGClassical, CriticalEnergies) {
  const auto e = lmg_critical_energies(paper_regime);
  EXPECT_NEAR(e.e_min, -2.6, 1e-14);
  EXPECT_NEAR(e.e_cr, -5.0 / 3.0, 1e-14);
  EXPECT_EQ(e.e_join, -1.0);
  EXPECT_NEAR(e.jz_min, -0.2, 1e-15);
  EXPECT_NEAR(e.jz_cr, -1.0 / 3.0, 1e-15);
  EXPECT_LE(e.e_min, e.e_cr);
  EXPECT_LE(e.e_cr, e.e_join);
  // brute-force minimum of the surface
  double best = 1e300;
  for (int i = 0; i <= 2000; ++i)
    for (int k = 0; k <= 200; ++k)
      best = std::min(best, lmg_classical_energy(paper_regime, -1 + i / 1000.0, two_pi * k / 200.0));
  EXPECT_NEAR(best, e.e_min, 1e-6);
  EXPECT_THROW(lmg_critical_energies(LMGParams::make(-0.5, -5.0, 10.0)), std::domain_error);
}

TEST(LMGCoherent, DecoupledClosedForm) {
  // eigenstates are |m>, so Q_k are the binomial weights of |z>
  const auto s = solve_lmg(LMGParams::make(0.0, 0.0, 1.0));
  const double jz = 0.3, p = 0.5 * (1 + jz);
  const double w0 = (1 - p) * (1 - p), w1 = 2 * p * (1 - p), w2 = p * p;
  const auto r = lmg_participation_ratio(s, jz, 0.7);
  EXPECT_NEAR(r.pr, 1.0 / (w0 * w0 + w1 * w1 + w2 * w2), 1e-12);
  EXPECT_NEAR(r.captured_norm, 1.0, 1e-12);
}

TEST(LMGCoherent, GroundStateDoublet) {
  const auto s = solve_lmg(paper_regime);
  const auto r = lmg_participation_ratio(s, -0.2, std::numbers::pi / 2);
  EXPECT_NEAR(r.pr, 2.0, 0.3);
}

TEST(LMGCoherent, BoundsAndReflections) {
  const auto s = solve_lmg(LMGParams::make(-3.0, -5.0, 40.0));
  for (double jz : {-0.9, -0.5, 0.0, 0.6})
    for (double phi : {0.2, 1.1, 2.0}) {
      const double a = lmg_participation_ratio(s, jz, phi).pr;
      EXPECT_GE(a, 1.0 - 1e-12);
      EXPECT_LE(a, 81.0);
      EXPECT_NEAR(lmg_participation_ratio(s, jz, -phi).pr, a, 1e-8 * a);
      EXPECT_NEAR(lmg_participation_ratio(s, jz, std::numbers::pi - phi).pr, a, 1e-8 * a);
    }
}

TEST(LMGCoherent, MapLayout) {
  const auto m = lmg_pr_map(LMGParams::make(-3.0, -5.0, 10.0), {-0.5, 0.0}, {0.0, 1.0, 2.0}, 1);
  ASSERT_EQ(m.pr.size(), 6u);
  const auto s = solve_lmg(LMGParams::make(-3.0, -5.0, 10.0));
  EXPECT_EQ(m.at(1, 2), lmg_participation_ratio(s, 0.0, 2.0).pr);
}

TEST(LMGScaling, FlatGroundStateAndSublinearGrowth) {
  const std::vector<double> Js{20, 40, 80, 160};
  const auto pts = lmg_pr_scaling(LMGParams::make(-3.0, -5.0, 20.0), std::numbers::pi / 2, {-0.2, 0.1, 0.5}, Js, 1);
  ASSERT_EQ(pts.size(), 3u);
  EXPECT_TRUE(pts[0].flat);
  for (double v : pts[0].pr) EXPECT_NEAR(v, 2.0, 0.3);
  for (std::size_t i = 1; i < pts.size(); ++i) {
    EXPECT_FALSE(pts[i].flat);
    EXPECT_LT(pts[i].fit.c, 1.0);
    EXPECT_EQ(pts[i].pr.size(), Js.size());
  }
  EXPECT_THROW(lmg_pr_scaling(paper_regime, 0.0, {0.0}, {10, 20, 30}), std::invalid_argument);
}
