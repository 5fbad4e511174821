#include <gtest/gtest.h>

#include <unsupported/Eigen/KroneckerProduct>

#include <random>

#include "dicke/coherent.hpp"

using namespace dicke;

namespace {

const DickeParams P2 = DickeParams::with_ratio(1.0, 1.0, 2.0, 2.0);

// |alpha> (x) |z> in the Fock basis (index m_index * (n_cut + 1) + n), built from power series
Eigen::VectorXcd fock_coherent(double j, int n_cut, complex alpha, const BlochPoint& z) {
  const int two_j = static_cast<int>(std::lround(2 * j));
  Eigen::VectorXcd spin(two_j + 1), boson(n_cut + 1);
  for (int k = 0; k <= two_j; ++k) {
    const double binom = std::tgamma(two_j + 1.0) / (std::tgamma(k + 1.0) * std::tgamma(two_j - k + 1.0));
    spin[k] = std::sqrt(binom) * std::pow(z.spinor_up(), k) * std::pow(z.spinor_down(), two_j - k);
  }
  complex term = std::exp(-0.5 * std::norm(alpha));
  for (int n = 0; n <= n_cut; ++n) {
    boson[n] = term;
    term *= alpha / std::sqrt(n + 1.0);
  }
  return Eigen::kroneckerProduct(spin, boson);
}

struct FockReference {
  EigenSystem eig;
  int n_cut;
};

FockReference fock_reference(const DickeParams& P, int n_cut) {
  return {diagonalize(build_fock_hamiltonian(P, FockBasisSpec::make(P.j(), n_cut))), n_cut};
}

Spectrum ecb_spectrum(const DickeParams& P, int n_max, bool blocks = false) {
  SolveOptions o;
  o.parity_blocks = blocks;
  return solve_spectrum(P, ECBasisSpec::make(P.j(), n_max), o);
}

}  // namespace

TEST(Coherent, DecoupledVacuumIsGroundState) {
  const auto P = DickeParams::make(1.0, 1.0, 0.0, 3.0);
  const auto s = ecb_spectrum(P, 10);
  const auto e = coherent_in_ecb(complex(0.0), BlochPoint::from_z(0.0), s);
  EXPECT_NEAR(std::norm(e.coefficients[0]), 1.0, 1e-12);
  EXPECT_NEAR(e.captured_norm, 1.0, 1e-12);
  EXPECT_NEAR(husimi(s, 0, complex(0.0), BlochPoint::from_z(0.0)), 1.0, 1e-12);
  EXPECT_NEAR(participation_ratio(e, 6).pr, 1.0, 1e-12);
}

TEST(Coherent, HusimiMatchesFockOracle) {
  const auto s = ecb_spectrum(P2, 40);
  const auto ref = fock_reference(P2, 160);
  std::mt19937_64 rng(4);
  for (int t = 0; t < 6; ++t) {
    const double eps = -2.0 + 0.3 * t;
    std::optional<PhasePoint> x;
    while (!x)
      x = surface_point(P2, {eps, 2 * uniform01(rng) - 1, two_pi * uniform01(rng),
                             uniform01(rng) < 0.5 ? Branch::plus : Branch::minus});
    const auto cp = to_coherent_parameters(*x, P2.j());
    const auto e = coherent_in_ecb(cp.alpha, cp.z, s);
    const Eigen::VectorXcd psi = fock_coherent(P2.j(), ref.n_cut, cp.alpha, cp.z);
    const Eigen::VectorXcd c = ref.eig.vectors.transpose().cast<complex>() * psi;
    for (Index k = 0; k < 20; ++k) EXPECT_NEAR(std::norm(e.coefficients[k]), std::norm(c[k]), 1e-10) << t << " " << k;
    // P_R over the converged ECB window equals the Fock-basis value on the same states, up to the
    // tail tolerance that admits the top states
    const Index K = s.converged_count;
    const double pr_ecb = participation_ratio(e, 4).pr;
    const double pr_fock = participation_ratio_from_weights(c.head(K).cwiseAbs2().eval(), 4).pr;
    EXPECT_NEAR(pr_ecb, pr_fock, 1e-8 * pr_fock);
  }
}

TEST(Coherent, ComponentsAreNormalizedCoherentState) {
  const auto spec = ECBasisSpec::make(2.0, 60);
  const PhasePoint x{0.9, -0.4, 0.3, 2.0};
  const auto cp = to_coherent_parameters(x, 2.0);
  const Eigen::VectorXcd v = coherent_ecb_components(P2, spec, cp.alpha, cp.z);
  EXPECT_NEAR(v.squaredNorm(), 1.0, 1e-12);
  // the ECB components reproduce the classical energy as a quadratic form
  const auto H = build_ecb_hamiltonian(P2, spec);
  const double e = (v.adjoint() * H.entries.cast<complex>() * v)(0, 0).real();
  EXPECT_NEAR(e / 2.0, classical_energy(P2, x), 1e-9);
  const double e2 = (H.entries.cast<complex>() * v).squaredNorm();
  EXPECT_NEAR(std::sqrt(e2 - e * e), coherent_energy_width(P2, x), 1e-8);
}

TEST(Coherent, NorthPoleLimit) {
  const auto spec = ECBasisSpec::make(2.0, 40);
  const Eigen::VectorXcd v = coherent_ecb_components(P2, spec, complex(0.3), BlochPoint::north_pole());
  EXPECT_NEAR(v.squaredNorm(), 1.0, 1e-12);
  const Eigen::VectorXcd w = coherent_ecb_components(P2, spec, complex(0.3), BlochPoint::from_angles(1.0 - 1e-14, 0.0));
  EXPECT_LT((v.cwiseAbs() - w.cwiseAbs()).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Coherent, CompletenessOnLowShells) {
  const auto P = P2.with_j(10.0);
  const auto s = ecb_spectrum(P, 70, true);
  std::mt19937_64 rng(8);
  for (double eps : {-1.8, -1.5}) {
    for (int t = 0; t < 5; ++t) {
      std::optional<PhasePoint> x;
      while (!x) x = surface_point(P, {eps, 2 * uniform01(rng) - 1, two_pi * uniform01(rng), Branch::plus});
      const auto e = coherent_in_ecb(*x, s);
      EXPECT_GE(e.captured_norm, 1.0 - 1e-6) << eps;
      EXPECT_LE(e.captured_norm, 1.0 + 1e-10);
    }
  }
}

TEST(ParticipationRatio, Basics) {
  Eigen::VectorXd one = Eigen::VectorXd::Zero(7);
  one[3] = 1.0;
  EXPECT_EQ(participation_ratio_from_weights(one, 10).pr, 1.0);
  for (int M : {1, 5, 40}) {
    const Eigen::VectorXd flat = Eigen::VectorXd::Constant(M, 1.0 / M);
    EXPECT_NEAR(participation_ratio_from_weights(flat, 10).pr, M, 1e-12);
  }
  // renormalized on the captured weight, deficit flagged
  const Eigen::VectorXd part = Eigen::VectorXd::Constant(4, 0.2);
  const auto r = participation_ratio_from_weights(part, 2);
  EXPECT_NEAR(r.pr, 4.0, 1e-12);
  EXPECT_TRUE(r.norm_deficit);
  EXPECT_NEAR(r.captured_norm, 0.8, 1e-15);
  EXPECT_EQ(r.binary, classify_binary_pr(r.pr, 2));
  EXPECT_EQ(classify_binary_pr(161, 160), 1);
  EXPECT_EQ(classify_binary_pr(2, 160), 0);
  EXPECT_EQ(classify_binary_pr(160, 160), 0);
  EXPECT_THROW(classify_binary_pr(std::nan(""), 160), std::invalid_argument);
}

TEST(ParticipationRatio, ParityImageAndBounds) {
  const auto P = P2.with_j(6.0);
  const auto s = ecb_spectrum(P, 50, true);
  std::mt19937_64 rng(12);
  for (int t = 0; t < 10; ++t) {
    std::optional<PhasePoint> x;
    while (!x) x = surface_point(P, {-1.9 + 0.1 * t, 2 * uniform01(rng) - 1, two_pi * uniform01(rng), Branch::plus});
    const PhasePoint y{-x->q, x->p, x->jz_tilde, x->phi + std::numbers::pi};
    const auto a = participation_ratio(coherent_in_ecb(*x, s), P.n_atoms());
    const auto b = participation_ratio(coherent_in_ecb(y, s), P.n_atoms());
    EXPECT_NEAR(a.pr, b.pr, 1e-6 * a.pr);
    EXPECT_GE(a.pr, 1.0 - 1e-12);
    EXPECT_LE(a.pr, static_cast<double>(s.converged_count));
    EXPECT_LE(a.captured_norm, 1.0 + 1e-10);
    // Husimi of parity-definite states is invariant under the image point
    const auto ex = coherent_in_ecb(*x, s), ey = coherent_in_ecb(y, s);
    for (Index k = 0; k < 30; ++k) EXPECT_NEAR(std::norm(ex.coefficients[k]), std::norm(ey.coefficients[k]), 1e-10);
    double sum = 0.0;
    for (Index k = 0; k < s.converged_count; ++k) sum += std::norm(ex.coefficients[k]);
    EXPECT_NEAR(sum, ex.captured_norm, 1e-12);
  }
}

TEST(ParticipationRatio, UnconvergedSpectrumIsAnError) {
  SolveOptions o;
  const auto s = solve_spectrum(P2.with_j(8.0), ECBasisSpec::make(8.0, 1), o);
  ASSERT_EQ(s.converged_count, 0);
  EXPECT_THROW(coherent_in_ecb(complex(0.0), BlochPoint::from_z(0.0), s), UnconvergedSpectrumError);
  const auto ok = ecb_spectrum(P2, 30);
  EXPECT_THROW(husimi(ok, ok.converged_count, complex(0.0), BlochPoint::from_z(0.0)), std::out_of_range);
}

TEST(PRSection, MarksPointsOffTheShell) {
  const auto P = P2.with_j(5.0);
  const auto s = ecb_spectrum(P, 50, true);
  const auto grid = uniform_grid(-1.0, 1.0, 21);
  const auto sec = pr_section(P, s, -1.8, 0.0, Branch::plus, grid, default_norm_tol, 1);
  ASSERT_EQ(sec.size(), grid.size());
  const auto iv = shell_interval(P, -1.8, 0.0);
  ASSERT_TRUE(iv);
  for (const auto& pt : sec) {
    const bool inside = pt.jz_tilde >= iv->first && pt.jz_tilde <= iv->second;
    EXPECT_EQ(pt.valid, inside) << pt.jz_tilde;
    if (pt.valid) EXPECT_GE(pt.result.pr, 1.0);
  }
  EXPECT_EQ(section_grid(P, -1.8, 0.0, 5).front(), iv->first);
  EXPECT_THROW(pr_section(P2, s, -1.8, 0.0, Branch::plus, grid), std::invalid_argument);
}
