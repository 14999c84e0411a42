#include <gtest/gtest.h>

#include "tclp/projectors.hpp"
#include "test_helpers.hpp"

using namespace tclp;
using tclp::testing::random_matrix;

namespace {

RVec scalar(double x) { return RVec::Constant(1, x); }

std::shared_ptr<LinearAnsatz> linear_qubit() {
  const Pauli s = pauli();
  return std::make_shared<LinearAnsatz>(0.5 * s.identity, std::vector<CMatrix>{0.5 * s.x, 0.5 * s.z},
                                        RelevantObservables({s.x, s.z}));
}

CMatrix small_bloch_state(std::mt19937_64& rng, double radius) {
  const Pauli s = pauli();
  const double x = tclp::testing::uniform(rng, -radius, radius), y = tclp::testing::uniform(rng, -radius, radius),
               z = tclp::testing::uniform(rng, -radius, radius);
  return 0.5 * (s.identity + x * s.x + y * s.y + z * s.z);
}

}  // namespace

TEST(KgParametric, ActionOnAnsatzStates) {
  std::mt19937_64 rng(51);
  GibbsAnsatz a(RelevantObservables({pauli().x, pauli().z}));
  for (int k = 0; k < 10; ++k) {
    const RVec e = random_domain_point(a.domain(), rng), e2 = random_domain_point(a.domain(), rng);
    const auto g = a.grad(e);
    CMatrix expected = a.eval(e);
    for (Eigen::Index m = 0; m < 2; ++m) expected += (e2(m) - e(m)) * g[static_cast<std::size_t>(m)];
    EXPECT_LE(max_abs(kg_parametric(a, e).apply(a.eval(e2)) - expected), 1e-10);
  }
}

TEST(KgParametric, LinearQubitFormula) {
  std::mt19937_64 rng(52);
  const auto a = linear_qubit();
  const Pauli s = pauli();
  for (int k = 0; k < 5; ++k) {
    const CMatrix x = random_matrix(2, rng);
    const CMatrix expected = 0.5 * (x.trace() * s.identity + s.x * (s.x * x).trace() + s.z * (s.z * x).trace());
    const RVec e = random_domain_point(a->domain(), rng);
    EXPECT_LE(max_abs(kg_parametric(*a, e).apply(x) - expected), 1e-14);
  }
}

TEST(KgParametric, TracelessInput) {
  std::mt19937_64 rng(53);
  const auto a = TwoLevelAnsatz::sqrt_family(0.4);
  CMatrix x = random_matrix(2, rng);
  x -= 0.5 * x.trace() * CMatrix::Identity(2, 2);
  const RVec e = scalar(0.3);
  const CMatrix expected = (pauli().z * x).trace() * a->grad(e)[0];
  EXPECT_LE(max_abs(kg_parametric(*a, e).apply(x) - expected), 1e-14);
}

TEST(KgNonlinear, MapsStatesToAnsatz) {
  std::mt19937_64 rng(54);
  GibbsAnsatz a(RelevantObservables({pauli().x, pauli().z}));
  for (int k = 0; k < 20; ++k) {
    const CMatrix rho = small_bloch_state(rng, 0.5);
    const CMatrix expected = a.eval(a.observables().averages(rho));
    EXPECT_LE(max_abs(kg_nonlinear(a, rho).apply(rho) - expected), 1e-9);
  }
}

TEST(KgNonlinear, FixedPoint) {
  const auto a = TwoLevelAnsatz::sqrt_family(0.4);
  const CMatrix rho = a->eval(scalar(0.3));
  EXPECT_LE(max_abs(kg_nonlinear(*a, rho).apply(rho) - rho), 1e-14);
}

TEST(KgNonlinear, FullPauliSetIsIdentity) {
  std::mt19937_64 rng(55);
  const Pauli s = pauli();
  GibbsAnsatz a(RelevantObservables({s.x, s.y, s.z}));
  for (int k = 0; k < 10; ++k) {
    const CMatrix rho = small_bloch_state(rng, 0.45);
    const SuperOperator p = kg_nonlinear(a, rho);
    EXPECT_LE(max_abs(p.apply(rho) - rho), 1e-10);
    EXPECT_LE(max_abs((p - SuperOperator::identity(2)).matrix()), 1e-9);
  }
}

TEST(KgTimeDependent, ConstantStateHasZeroDerivative) {
  const auto a = TwoLevelAnsatz::sqrt_family(0.4);
  const CMatrix rho = a->eval(scalar(0.3));
  const auto fam = kg_time_dependent(a, {[rho](double) { return rho; }, [](double) { return CMatrix::Zero(2, 2); }});
  EXPECT_LE(fam.derivative(0.7).norm(), 0.0);
}

TEST(KgTimeDependent, LinearAnsatzIsConstant) {
  const auto a = linear_qubit();
  const auto rf = resonance_fluorescence({});
  PropagationOptions o;
  o.grid_points = 65;
  const auto u = propagate(rf.generator, 0.2, 0.0, 3.0, o);
  const auto fam = kg_time_dependent(a, trajectory_from(u, a->eval(RVec::Zero(2))));
  for (double t : {0.5, 1.5, 2.9}) {
    EXPECT_LE(max_abs((fam(t) - fam(0.0)).matrix()), 1e-14);
    EXPECT_LE(max_abs(fam.derivative(t).matrix()), 1e-9);
  }
}

TEST(KgTimeDependent, RobertsonAlongTrueTrajectory) {
  const auto a = TwoLevelAnsatz::sqrt_family(0.4);
  const auto rf = resonance_fluorescence({});
  PropagationOptions o;
  o.grid_points = 129;
  const auto u = propagate(rf.generator, 0.1, 0.0, 3.0, o);
  const auto traj = trajectory_from(u, a->eval(scalar(0.25)));
  const auto fam = kg_time_dependent(a, traj);
  for (double t : uniform_grid(0.0, 3.0, 20)) EXPECT_LE(max_abs(fam.derivative(t).apply(traj.state(t))), 1e-6);
}

TEST(KgTimeDependent, DerivativeMatchesDifferences) {
  const AnsatzPtr a = TwoLevelAnsatz::sqrt_family(0.4);
  const auto rf = resonance_fluorescence({});
  PropagationOptions o;
  o.grid_points = 257;
  const auto u = propagate(rf.generator, 0.3, 0.0, 2.0, o);
  const auto fam = kg_time_dependent(a, trajectory_from(u, a->eval(scalar(0.25))));
  const double t = 1.0;
  std::vector<double> errs;
  for (double h : {0.0625, 0.03125}) {  // multiples of the storage spacing
    const SuperOperator fd = (1.0 / (2 * h)) * (fam(t + h) - fam(t - h));
    errs.push_back(max_abs((fd - fam.derivative(t)).matrix()));
  }
  ASSERT_GT(max_abs(fam.derivative(t).matrix()), 1e-3);
  // second order in h
  EXPECT_NEAR(errs[0] / errs[1], 4.0, 0.6);
}

TEST(ArgyresKelley, PartialTraceOfProduct) {
  std::mt19937_64 rng(56);
  const CMatrix a = random_matrix(2, rng), b = random_matrix(3, rng);
  const CMatrix x = Eigen::kroneckerProduct(a, b).eval();
  EXPECT_LE(max_abs(partial_trace_B(x, 2, 3) - a * b.trace()), 1e-13);
}

TEST(ArgyresKelley, LawsAndFixedPoint) {
  std::mt19937_64 rng(57);
  const CMatrix r0 = tclp::testing::random_density(2, rng), r1 = tclp::testing::random_density(2, rng);
  auto rho_b = [r0, r1](double t) { return CMatrix(std::cos(t) * std::cos(t) * r0 + std::sin(t) * std::sin(t) * r1); };
  const auto fam = argyres_kelley(rho_b, 2, 2);
  const CMatrix rs = tclp::testing::random_density(2, rng);
  const CMatrix x = Eigen::kroneckerProduct(rs, rho_b(0.4)).eval();
  EXPECT_LE(max_abs(fam(0.4).apply(x) - x), 1e-14);
  const auto report = check_projector_laws(fam, {0.0, 0.4, 1.1, 2.5});
  EXPECT_LE(report.idempotency, 1e-12);
  EXPECT_LE(report.composition, 1e-12);
  EXPECT_LE(report.trace, 1e-12);
  // analytic ρ̇_B
  const CMatrix rdot = std::sin(2 * 0.4) * (r1 - r0);
  const CMatrix img = fam.derivative(0.4).apply(x);
  EXPECT_LE(max_abs(img - CMatrix(Eigen::kroneckerProduct(partial_trace_B(x, 2, 2), rdot))), 1e-8);
}

TEST(ArgyresKelley, RejectsBadReservoir) {
  const auto fam = argyres_kelley([](double) { return CMatrix::Identity(2, 2); }, 2, 2);
  EXPECT_THROW(fam(0.0), ValidationError);
}

TEST(ProjectorLaws, LinearAnsatzExact) {
  std::mt19937_64 rng(58);
  const auto a = linear_qubit();
  std::vector<std::pair<RVec, RVec>> pairs;
  for (int k = 0; k < 20; ++k)
    pairs.emplace_back(random_domain_point(a->domain(), rng), random_domain_point(a->domain(), rng));
  EXPECT_LE(check_projector_laws(*a, pairs).worst(), 1e-12);
}

TEST(ProjectorLaws, SqrtFamily) {
  std::mt19937_64 rng(59);
  const auto a = TwoLevelAnsatz::sqrt_family(0.4);
  std::vector<std::pair<RVec, RVec>> pairs;
  for (int k = 0; k < 50; ++k)
    pairs.emplace_back(random_domain_point(a->domain(), rng), random_domain_point(a->domain(), rng));
  const auto r = check_projector_laws(*a, pairs);
  EXPECT_EQ(r.samples, 50u);
  EXPECT_LE(r.worst(), 1e-8);
}

TEST(ProjectorLaws, EqualPairIsIdempotency) {
  const auto a = TwoLevelAnsatz::sqrt_family(0.4);
  const auto r = check_projector_laws(*a, {{scalar(0.3), scalar(0.3)}});
  EXPECT_DOUBLE_EQ(r.idempotency, r.composition);
}

TEST(ConstantProjector, ZeroDerivative) {
  const auto fam = constant_projector(SuperOperator::identity(2));
  EXPECT_EQ(fam.kind(), ProjectorKind::constant);
  EXPECT_LE(fam.derivative(1.0).norm(), 0.0);
  EXPECT_LE(fam.complement(1.0).norm(), 0.0);
}
