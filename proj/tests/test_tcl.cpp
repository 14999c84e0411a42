#include <gtest/gtest.h>

#include "tclp/tcl.hpp"
#include "test_helpers.hpp"

using namespace tclp;

namespace {

PropagationOptions grid_of(std::size_t points) {
  PropagationOptions o;
  o.grid_points = points;
  return o;
}

/// Oblique constant projector of rank 2 on the 4-dimensional qubit operator space
/// that keeps the trace functional: P = vec(ρ₀) vec(I)ᵀ + vec(B) (vec(σ_zᵀ) − z₀ vec(I))ᵀ.
SuperOperator constant_kg_projector() {
  const Pauli s = pauli();
  std::shared_ptr<LinearAnsatz> a = std::make_shared<LinearAnsatz>(
      0.5 * s.identity + 0.1 * s.x, std::vector<CMatrix>{0.5 * s.z + 0.2 * s.y}, RelevantObservables({s.z}));
  return kg_parametric(*a, RVec::Zero(1));
}

double factorial(int k) { return k <= 1 ? 1.0 : k * factorial(k - 1); }

}  // namespace

TEST(Compositions, Enumeration) {
  const auto c1 = compositions(1);
  ASSERT_EQ(c1.size(), 1u);
  EXPECT_EQ(c1[0].parts, std::vector<int>{1});
  const auto c3 = compositions(3);
  ASSERT_EQ(c3.size(), 4u);
  EXPECT_EQ(c3[0].parts, std::vector<int>({3}));
  EXPECT_EQ(c3[1].parts, std::vector<int>({1, 2}));
  EXPECT_EQ(c3[2].parts, std::vector<int>({2, 1}));
  EXPECT_EQ(c3[3].parts, std::vector<int>({1, 1, 1}));
  EXPECT_EQ(c3[0].sign, 1);
  EXPECT_EQ(c3[1].sign, -1);
  EXPECT_EQ(c3[3].sign, 1);
}

TEST(Compositions, CountIsPowerOfTwo) {
  // brute force: subsets of the n−1 cut points
  for (int n = 1; n <= 10; ++n) {
    const auto c = compositions(n);
    EXPECT_EQ(c.size(), std::size_t{1} << (n - 1));
    for (const auto& comp : c) {
      int sum = 0;
      for (int k : comp.parts) sum += k;
      EXPECT_EQ(sum, n);
    }
  }
}

TEST(ExpansionTerms, ThirdOrder) {
  EXPECT_EQ(expansion_terms(3), std::vector<std::string>({"+Mc3", "-Mc1*M2", "-Mc2*M1", "+Mc1*M1*M1"}));
  EXPECT_EQ(expansion_terms(2, true), std::vector<std::string>({"+Mct2", "-Mc1*Mt1"}));
}

TEST(ExactCoefficients, FullProjector) {
  std::mt19937_64 rng(61);
  const auto l = interaction_picture(random_gksl(2, rng), random_gksl(2, rng));
  const double lambda = 0.3;
  const auto c = exact_coefficients(l, lambda, constant_projector(SuperOperator::identity(2)),
                                    uniform_grid(0.0, 1.0, 9), grid_of(9));
  for (std::size_t i = 0; i < c.times.size(); ++i) {
    EXPECT_LE(max_abs((c.K[i] - lambda * l(c.times[i])).matrix()), 1e-12);
    EXPECT_LE(c.I[i].norm(), 1e-12);
  }
}

TEST(ExactCoefficients, ZeroCoupling) {
  const auto rf = resonance_fluorescence({});
  const auto c = exact_coefficients(rf.generator, 0.0, constant_projector(constant_kg_projector()),
                                    uniform_grid(0.0, 1.0, 5), grid_of(5));
  for (std::size_t i = 0; i < c.times.size(); ++i) {
    EXPECT_LE(c.K[i].norm(), 0.0);
    EXPECT_LE(c.I[i].norm(), 0.0);
  }
}

TEST(ExactCoefficients, SmallCouplingLeadingOrder) {
  std::mt19937_64 rng(62);
  const SuperOperator p = constant_kg_projector();
  const auto l = interaction_picture(random_gksl(2, rng), random_gksl(2, rng));
  const double lambda = 1e-3, t = 0.8;
  const auto c = exact_coefficients(l, lambda, constant_projector(p), uniform_grid(0.0, t, 9), grid_of(9));
  const SuperOperator lead = lambda * (p * l(t) * p);
  EXPECT_LE((c.K.back() - lead).norm(), 10 * lambda * lambda * std::max(1.0, l(t).norm() * l(t).norm()));
}

TEST(ExactCoefficients, SingularOnRangeCarriesTime) {
  // a strong generator rotating range(P) out of itself
  const Pauli s = pauli();
  const SuperOperator l = commutator_generator(s.x, -kI);
  std::shared_ptr<LinearAnsatz> a = std::make_shared<LinearAnsatz>(
      0.5 * s.identity, std::vector<CMatrix>{0.5 * s.z}, RelevantObservables({s.z}));
  const SuperOperator p = kg_parametric(*a, RVec::Zero(1));
  try {
    // Tr(σ_z e^{−i t σ_x} σ_z e^{i t σ_x}) = 2 cos 2t vanishes at t = π/4
    exact_coefficients(constant_generator(l), 1.0, constant_projector(p), uniform_grid(0.0, M_PI / 4, 9), grid_of(9));
    FAIL() << "expected SingularOnRange";
  } catch (const SingularOnRange& e) {
    EXPECT_NEAR(e.time(), M_PI / 4, 1e-12);
  }
}

TEST(MTerms, ConstantGeneratorConstantProjector) {
  std::mt19937_64 rng(63);
  const SuperOperator l = random_gksl(2, rng), p = constant_kg_projector();
  const auto fam = constant_projector(p);
  const auto g = dyson_terms(constant_generator(l), 3, 0.0, 1.0, grid_of(17));
  const double t = 1.0;
  const MTerms m = m_terms(constant_generator(l), fam, g, t);
  SuperOperator power = l;
  for (int k = 1; k <= 3; ++k) {
    EXPECT_LE(max_abs((m.m[k] - std::pow(t, k) / factorial(k) * (p * power * p)).matrix()), 1e-9);
    power = power * l;
  }
  // first-order checked term reduces to P L P
  EXPECT_LE(max_abs((m.m_check[1] - p * l * p).matrix()), 1e-12);
}

TEST(MTerms, FullProjectorKillsTilde) {
  const auto rf = resonance_fluorescence({});
  const auto g = dyson_terms(rf.generator, 2, 0.0, 1.0, grid_of(9));
  const MTerms m = m_terms(rf.generator, constant_projector(SuperOperator::identity(2)), g, 1.0);
  for (int k = 1; k <= 2; ++k) {
    EXPECT_LE(m.m_tilde[k].norm(), 0.0);
    EXPECT_LE(m.m_check_tilde[k].norm(), 0.0);
  }
}

TEST(MTerms, RobertsonDropsProjectorDerivative) {
  const auto a = TwoLevelAnsatz::sqrt_family(0.4);
  const auto rf = resonance_fluorescence({});
  const auto u = propagate(rf.generator, 0.1, 0.0, 2.0, grid_of(65));
  const auto fam = kg_time_dependent(a, trajectory_from(u, a->eval(RVec::Constant(1, 0.25))));
  const auto g = dyson_terms(rf.generator, 2, 0.0, 2.0, grid_of(65));
  const double t = 1.5;
  const MTerms rob = m_terms(rf.generator, fam, g, t, true);
  const SuperOperator p = fam(t);
  EXPECT_LE(max_abs((rob.m_check[1] - p * rf.generator(t) * p).matrix()), 1e-13);
  EXPECT_LE(max_abs((rob.m_check_tilde[1] - p * rf.generator(t) * fam.complement(t)).matrix()), 1e-13);
}

TEST(ExactCoefficients, RobertsonFormGivesSameRightHandSide) {
  const auto a = TwoLevelAnsatz::sqrt_family(0.4);
  const auto rf = resonance_fluorescence({});
  const auto u = propagate(rf.generator, 0.1, 0.0, 3.0, grid_of(65));
  const CMatrix rho0 = a->eval(RVec::Constant(1, 0.25));
  const auto fam = kg_time_dependent(a, trajectory_from(u, rho0));
  ExactOptions rob;
  rob.robertson = true;
  const auto full = exact_coefficients(u, fam);
  const auto dropped = exact_coefficients(u, fam, rob);
  double worst = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double t = u.times()[i];
    const CMatrix prho = fam(t).apply(u[i].apply(rho0));
    const CMatrix qrho0 = fam.complement(t).apply(rho0);
    const CMatrix rhs_full = full.K[i].apply(prho) + full.I[i].apply(qrho0);
    const CMatrix rhs_rob = dropped.K[i].apply(prho) + dropped.I[i].apply(qrho0);
    worst = std::max(worst, max_abs(rhs_full - rhs_rob));
    scale = std::max(scale, max_abs((full.K[i] - dropped.K[i]).matrix()));
  }
  EXPECT_LE(worst, 1e-6);
  EXPECT_GT(scale, 1e-4);  // the Ṗ terms themselves are not negligible
}

TEST(PerturbativeK, LowOrderFormulas) {
  std::mt19937_64 rng(64);
  const auto l = interaction_picture(random_gksl(2, rng), random_gksl(2, rng));
  const auto g = dyson_terms(l, 3, 0.0, 0.7, grid_of(9));
  const auto fam = constant_projector(constant_kg_projector());
  const MTerms m = m_terms(l, fam, g, 0.7);
  EXPECT_LE(max_abs((perturbative_K(1, m) - m.m_check[1]).matrix()), 0.0);
  EXPECT_LE(max_abs((perturbative_K(2, m) - (m.m_check[2] - m.m_check[1] * m.m[1])).matrix()), 1e-14);
  const SuperOperator k3 =
      m.m_check[3] - m.m_check[1] * m.m[2] - m.m_check[2] * m.m[1] + m.m_check[1] * m.m[1] * m.m[1];
  EXPECT_LE(max_abs((perturbative_K(3, m) - k3).matrix()), 1e-14);
  EXPECT_LE(max_abs((perturbative_I(1, m) - m.m_check_tilde[1]).matrix()), 0.0);
  EXPECT_LE(max_abs((perturbative_I(2, m) - (m.m_check_tilde[2] - m.m_check[1] * m.m_tilde[1])).matrix()), 1e-14);
}

TEST(SeriesVsExact, OrderSlopes) {
  std::mt19937_64 rng(65);
  const auto l = interaction_picture(random_gksl(2, rng, 2, 0.3), random_gksl(2, rng, 2, 0.3));
  const auto fam = constant_projector(constant_kg_projector());
  const auto times = uniform_grid(0.0, 1.0, 9);
  const std::vector<double> lambdas = geometric_grid(0.05, 0.2, 5);
  for (int n = 1; n <= 3; ++n) {
    const auto r = series_vs_exact(l, lambdas, fam, times, n, grid_of(9));
    EXPECT_NEAR(r.min_slope, n + 1, 0.2) << n;
    EXPECT_NEAR(r.max_slope, n + 1, 0.2) << n;
  }
}

TEST(SeriesVsExact, ZeroCouplingExact) {
  const auto rf = resonance_fluorescence({});
  const auto fam = constant_projector(constant_kg_projector());
  const auto times = uniform_grid(0.0, 1.0, 5);
  const auto g = dyson_terms(rf.generator, 2, 0.0, 1.0, grid_of(5));
  const auto exact = exact_coefficients(rf.generator, 0.0, fam, times, grid_of(5));
  const auto series = perturbative_coefficients(rf.generator, fam, g, 0.0, 2);
  for (std::size_t i = 0; i < times.size(); ++i) EXPECT_EQ((exact.K[i] - series.K[i]).norm(), 0.0);
}

TEST(TheoremIdentity, ConstantProjectorAndConsistentStart) {
  const auto rf = resonance_fluorescence({});
  const SuperOperator p = constant_kg_projector();
  const auto fam = constant_projector(p);
  const auto u = propagate(rf.generator, 0.1, 0.0, 3.0, grid_of(257));
  const auto c = exact_coefficients(u, fam);
  std::mt19937_64 rng(66);
  const CMatrix rho0 = tclp::testing::random_density(2, rng);
  EXPECT_LE(theorem_identity_residual(c, u, fam, rho0).max, 1e-7);
  // P ρ₀ = ρ₀ kills the inhomogeneity
  const CMatrix consistent = p.apply(rho0);
  double worst = 0.0;
  for (std::size_t i = 0; i < c.times.size(); ++i)
    worst = std::max(worst, max_abs(c.I[i].apply(fam.complement(c.times[i]).apply(consistent))));
  EXPECT_LE(worst, 1e-10);
}

TEST(TheoremIdentity, KawasakiGuntonProjector) {
  const auto a = TwoLevelAnsatz::sqrt_family(0.4);
  const auto rf = resonance_fluorescence({});
  const auto u = propagate(rf.generator, 0.1, 0.0, 3.0, grid_of(257));
  const CMatrix consistent = a->eval(RVec::Constant(1, 0.25));
  const CMatrix off = 0.5 * (CMatrix::Identity(2, 2) + 0.5 * pauli().z + 0.3 * pauli().y);
  for (const CMatrix& rho0 : {consistent, off}) {
    const auto fam = kg_time_dependent(a, trajectory_from(u, rho0));
    const auto c = exact_coefficients(u, fam);
    EXPECT_LE(theorem_identity_residual(c, u, fam, rho0).max, 1e-7);
  }
}

TEST(CoefficientTable, Layout) {
  const auto rf = resonance_fluorescence({});
  const auto c = exact_coefficients(rf.generator, 0.1, constant_projector(SuperOperator::identity(2)),
                                    uniform_grid(0.0, 1.0, 3), grid_of(3));
  const auto table = coefficient_table(c);
  EXPECT_EQ(table.header().size(), 1u + 2u * 16u + 1u);
  EXPECT_EQ(table.rows(), 3u);
  EXPECT_EQ(table.str().substr(0, 12), "t,re_0_0,im_");
}
