#include <gtest/gtest.h>

#include "tclp/propagator.hpp"
#include "test_helpers.hpp"

using namespace tclp;
using tclp::testing::random_matrix;

namespace {

double factorial(int k) { return k <= 1 ? 1.0 : k * factorial(k - 1); }

PropagationOptions small_grid(std::size_t points = 33) {
  PropagationOptions o;
  o.grid_points = points;
  return o;
}

}  // namespace

TEST(Propagate, ZeroCouplingIsIdentity) {
  const auto rf = resonance_fluorescence({});
  const auto u = propagate(rf.generator, 0.0, 0.0, 2.0, small_grid());
  for (const auto& v : u.values()) EXPECT_LE(max_abs((v - SuperOperator::identity(2)).matrix()), 1e-14);
}

TEST(Propagate, ConstantGeneratorMatchesExponential) {
  std::mt19937_64 rng(31);
  const SuperOperator l = commutator_generator(tclp::testing::random_hermitian(3, rng), -kI);
  const double lambda = 0.7;
  const auto u = propagate(constant_generator(l), lambda, 0.5, 2.5, small_grid());
  for (std::size_t i = 0; i < u.size(); i += 8)
    EXPECT_LE(max_abs((u[i] - expm(lambda * (u.times()[i] - 0.5) * l)).matrix()), 1e-9);
}

TEST(Propagate, PreservesTraceAndHermiticity) {
  std::mt19937_64 rng(32);
  const auto rf = resonance_fluorescence({});
  const auto u = propagate(rf.generator, 0.3, 0.0, 3.0, small_grid());
  for (int k = 0; k < 10; ++k) {
    const CMatrix x = random_matrix(2, rng);
    const auto& v = u[static_cast<std::size_t>(k * 3)];
    EXPECT_LE(std::abs(v.apply(x).trace() - x.trace()), 1e-10);
    EXPECT_LE(max_abs(v.apply(x.adjoint()) - v.apply(x).adjoint()), 1e-10);
  }
}

TEST(Propagate, Cocycle) {
  std::mt19937_64 rng(33);
  const auto ip = interaction_picture(random_gksl(2, rng), random_gksl(2, rng));
  const double lambda = 0.5;
  const auto full = propagate(ip, lambda, 0.0, 1.0, small_grid(17));
  const auto tail = propagate(ip, lambda, 0.5, 1.0, small_grid(9));
  const SuperOperator composed = tail.at(1.0) * full.at(0.5);
  // 10 x the relative tolerance, measured against the size of U
  const double scale = std::max(1.0, max_abs(full.at(1.0).matrix()));
  EXPECT_LE(max_abs((composed - full.at(1.0)).matrix()) / scale, 10 * full.tol()) << "scale " << scale;
}

TEST(Propagate, InterpolationBetweenNodes) {
  std::mt19937_64 rng(34);
  const SuperOperator l = random_gksl(2, rng);
  const auto u = propagate(constant_generator(l), 1.0, 0.0, 1.0, small_grid(65));
  for (double t : {0.013, 0.4217, 0.991}) EXPECT_LE(max_abs((u.at(t) - expm(t * l)).matrix()), 1e-7);
  EXPECT_THROW(u.at(1.5), Error);
}

TEST(DysonTerms, ConstantGeneratorClosedForm) {
  std::mt19937_64 rng(35);
  const SuperOperator l = random_gksl(2, rng);
  const auto g = dyson_terms(constant_generator(l), 4, 0.0, 1.0, small_grid());
  for (std::size_t i = 0; i < g.times().size(); i += 8) {
    const double t = g.times()[i];
    SuperOperator power = SuperOperator::identity(2);
    for (int k = 0; k <= 4; ++k) {
      EXPECT_LE(max_abs((g.at_index(k, i) - std::pow(t, k) / factorial(k) * power).matrix()), 1e-9);
      power = power * l;
    }
  }
}

TEST(DysonTerms, ZeroOrderIsIdentity) {
  const auto rf = resonance_fluorescence({});
  const auto g = dyson_terms(rf.generator, 1, 0.0, 1.0, small_grid(5));
  EXPECT_LE(max_abs((g.at(0, 0.37) - SuperOperator::identity(2)).matrix()), 0.0);
  EXPECT_THROW(dyson_terms(rf.generator, 0, 0.0, 1.0), Error);
}

TEST(DysonTerms, TruncationOrder) {
  const auto rf = resonance_fluorescence({});
  const double t = 2.0;
  const auto g = dyson_terms(rf.generator, 3, 0.0, t, small_grid(9));
  for (int k_trunc = 1; k_trunc <= 3; ++k_trunc) {
    std::vector<double> xs, ys;
    for (double lambda : {0.05, 0.075, 0.1, 0.15, 0.2}) {
      const auto u = propagate(rf.generator, lambda, 0.0, t, small_grid(9));
      SuperOperator sum = SuperOperator::zero(2);
      for (int k = 0; k <= k_trunc; ++k) sum += std::pow(lambda, k) * g.at(k, t);
      xs.push_back(std::log(lambda));
      ys.push_back(std::log((sum - u.at(t)).norm()));
    }
    const double slope = (ys.back() - ys.front()) / (xs.back() - xs.front());
    EXPECT_NEAR(slope, k_trunc + 1, 0.2) << "order " << k_trunc;
  }
}

TEST(DerivativeU, Identities) {
  const auto rf = resonance_fluorescence({});
  const double lambda = 0.4;
  const auto u = propagate(rf.generator, lambda, 0.0, 2.0, small_grid(129));
  EXPECT_LE(max_abs((derivative_U(u, 0.0) - lambda * rf.generator(0.0)).matrix()), 1e-15);
  const auto u0 = propagate(rf.generator, 0.0, 0.0, 2.0, small_grid(5));
  EXPECT_LE(derivative_U(u0, 1.0).norm(), 0.0);
  EXPECT_THROW(derivative_U(u, 3.0), Error);
}

TEST(DerivativeU, MatchesFiniteDifferences) {
  const auto rf = resonance_fluorescence({});
  const double lambda = 0.4, h = 1e-4, t = 1.0;
  const auto direct = [&](double s) { return propagate(rf.generator, lambda, 0.0, s, small_grid(2)).at(s); };
  const SuperOperator fd = (1.0 / (2 * h)) * (direct(t + h) - direct(t - h));
  const auto u = propagate(rf.generator, lambda, 0.0, 2.0, small_grid(3));
  EXPECT_LE(max_abs((derivative_U(u, t) - fd).matrix()), 1e-6);
}
