#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "tclp/experiments.hpp"

using namespace tclp;

namespace {

std::vector<double> grid(double t_max, std::size_t n) { return uniform_grid(0.0, t_max, n); }

double sup_diff(const ExactTrajectory& a, const ExactTrajectory& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.E.size(); ++i) m = std::max(m, (a.E[i] - b.E[i]).cwiseAbs().maxCoeff());
  return m;
}

const RelevantObservables& xz() {
  static const RelevantObservables obs({pauli().x, pauli().z});
  return obs;
}

}  // namespace

TEST(RotatingFrame, MatchesModelAssembly) {
  for (bool high : {false, true}) {
    const ResonanceFluorescenceParams p{1.3, 0.7, 0.4, high};
    const auto rf = resonance_fluorescence(p);
    const double lambda = 0.37;
    const SuperOperator expected = rf.free + lambda * rf.drive;
    EXPECT_LT((rotating_frame_generator(p, lambda).matrix() - expected.matrix()).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LT((free_generator(p).matrix() - rf.free.matrix()).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(ExactOracle, SelfConvergence) {
  const ResonanceFluorescenceParams p{1.0, 1.0, 0.0, false};
  const auto times = grid(3.0, 61);
  const CMatrix rho0 = bloch_state(0.3, 0.0, 0.5);
  const auto loose = exact_oracle(p, 0.2, rho0, xz(), times, 1e-10);
  const auto tight = exact_oracle(p, 0.2, rho0, xz(), times, 1e-12);
  EXPECT_LE(sup_diff(loose, tight), 1e-9);
}

TEST(ExactOracle, ZeroCouplingIsStationaryInInteractionPicture) {
  // mapping back by e^{−L₀t} amplifies the integration error by up to e^{γt} ≈ 400
  const ResonanceFluorescenceParams p{1.0, 1.0, 0.5, false};
  const auto times = grid(3.0, 31);
  const auto tr = exact_oracle(p, 0.0, bloch_state(0.3, 0.0, 0.5), xz(), times);
  for (const auto& e : tr.E) {
    EXPECT_NEAR(e(0), 0.3, 1e-9);
    EXPECT_NEAR(e(1), 0.5, 1e-9);
  }
}

TEST(ExactOracle, ZeroDriveIsStationary) {
  const ResonanceFluorescenceParams p{0.0, 1.0, 0.0, false};
  const auto tr = exact_oracle(p, 0.5, bloch_state(0.3, 0.0, 0.5), xz(), grid(3.0, 31));
  for (const auto& e : tr.E) {
    EXPECT_NEAR(e(0), 0.3, 1e-10);
    EXPECT_NEAR(e(1), 0.5, 1e-10);
  }
}

TEST(ExactOracle, AgreesWithIndependentPropagation) {
  const ResonanceFluorescenceParams p{1.0, 1.0, 0.3, false};
  const double lambda = 0.3;
  const auto rf = resonance_fluorescence(p);
  const CMatrix rho0 = bloch_state(0.3, 0.0, 0.5);
  const auto times = grid(2.0, 21);
  const auto tr = exact_oracle(p, lambda, rho0, xz(), times);
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double t = times[i];
    const CMatrix full = expm(CMatrix((rf.free + lambda * rf.drive).matrix() * t));
    const CMatrix back = expm(CMatrix(-t * rf.free.matrix()));
    const CMatrix rho = devectorize(CVector(back * full * vectorize(rho0)), 2);
    EXPECT_LT((xz().averages(rho) - tr.E[i]).cwiseAbs().maxCoeff(), 1e-10) << "t = " << t;
  }
}

TEST(ExactOracle, StabilizedMatchesDense) {
  for (double g0 : {1.0, -1.0}) {
    const ResonanceFluorescenceParams p{1.0, g0, 0.0, false};
    const CMatrix rho0 = bloch_state(0.3, 0.0, 0.5);
    const auto times = grid(4.0, 41);
    const auto dense = exact_oracle(p, 0.2, rho0, xz(), times);
    const auto stable = exact_oracle_stabilized(p, 0.2, rho0, times);
    EXPECT_LT(sup_diff(dense, stable), 1e-9) << "gamma0 = " << g0;
  }
}

TEST(ExactOracle, StabilizedStaysFiniteAtLongScaledTimes) {
  const ResonanceFluorescenceParams p{1.0, -1.0, 0.0, false};
  const double lambda = 0.02;
  const auto tr = exact_oracle_stabilized(p, lambda, bloch_state(0.3, 0.0, 0.5), {0.0, 3.0 / (lambda * lambda)});
  for (const auto& e : tr.E) EXPECT_TRUE(e.allFinite());
  EXPECT_NEAR(tr.E.back()(0), 0.3, 1e-10);
}

TEST(ClosedForm, BranchesStartAtInitialValue) {
  for (int sign : {-1, 1}) {
    EXPECT_DOUBLE_EQ(closed_form::first_order_branch(0.0, 0.1, 0.4, 1.0, 1.0, 0.25, sign), 0.25);
    EXPECT_DOUBLE_EQ(closed_form::second_order_branch(0.0, 0.1, 0.4, 1.0, 1.0, 0.25, sign), 0.25);
  }
}

TEST(ClosedForm, SecondOrderBranchSolvesItsEquation) {
  const double lambda = 0.15, alpha = 0.4, w = 1.0, g = 1.0, e0 = 0.25, h = 1e-4;
  for (double t : {0.3, 1.0, 2.5}) {
    auto e = [&](double s) { return closed_form::second_order_branch(s, lambda, alpha, w, g, e0, -1); };
    const double lhs = (e(t - 2 * h) - 8 * e(t - h) + 8 * e(t + h) - e(t + 2 * h)) / (12 * h);
    const double rhs = -lambda * alpha * std::sqrt(e(t)) * w * std::exp(0.5 * g * t) -
                       2 * lambda * lambda * (w * w / g) * (std::exp(0.5 * g * t) - 1) * e(t);
    EXPECT_NEAR(lhs, rhs, 1e-9) << "t = " << t;
  }
}

TEST(ClosedForm, ZeroAlphaBranchIsExponential) {
  const double lambda = 0.2, w = 1.0, g = 1.0, e0 = 0.25;
  for (double t : {0.5, 2.0}) {
    const double expected =
        e0 * std::exp(-4 * lambda * lambda * w * w / (g * g) * (std::exp(0.5 * g * t) - 1 - 0.5 * g * t));
    EXPECT_NEAR(closed_form::second_order_branch(t, lambda, 0.0, w, g, e0, -1), expected, 1e-14);
  }
}

TEST(ClosedForm, ErrorCoefficientsVanishAtStart) {
  EXPECT_NEAR(closed_form::linear_error_coefficient(0.0, 1.0, 1.0, 0.5), 0.0, 1e-13);
  EXPECT_NEAR(closed_form::alpha_zero_error_coefficient(0.0, 1.0, 0.25), 0.0, 1e-13);
}

TEST(ClosedForm, WickLimitSolvesItsEquation) {
  const double w = 1.0, g = -1.0, g0 = -1.0, eps0 = 0.5, h = 1e-4, t = 0.7;
  auto e = [&](double s) { return closed_form::wick_limit(s, w, g, g0, eps0); };
  EXPECT_DOUBLE_EQ(e(0.0), eps0);
  const double lhs = (e(t + h) - e(t - h)) / (2 * h);
  EXPECT_NEAR(lhs, 2 * (w * w / g) * e(t) + 2 * g0 * w * w / (g * g), 1e-7);
  // the scaled right-hand side tends to the limit one once e^{γτ/2λ²} has decayed
  EXPECT_NEAR(closed_form::wick_scaled_rhs(t, e(t), 1e-3, w, g, g0), lhs, 1e-7);
}

TEST(ErrorScaling, ReportPassesAtDefaults) {
  ErrorScalingParams p;
  const auto r = run_error_scaling(p);
  EXPECT_TRUE(r.passed()) << r.summary().str();
  EXPECT_NEAR(r.metric("ez_slope").value, 4.0, 0.2);
}

TEST(ErrorScaling, WritesCsvFiles) {
  const auto dir = std::filesystem::temp_directory_path() / "tclp_test_error_scaling";
  std::filesystem::remove_all(dir);
  ErrorScalingParams p;
  p.grid_points = 41;
  ExperimentOptions o{dir.string(), "demo_", 2};
  const auto r = run_error_scaling(p, o);
  ASSERT_EQ(r.files.size(), 2u);
  for (const auto& f : r.files) EXPECT_TRUE(std::filesystem::exists(f)) << f;
  EXPECT_TRUE(std::filesystem::exists(dir / "demo_error_scaling_sweep.csv"));
  std::filesystem::remove_all(dir);
}

TEST(ErrorScaling, RejectsShortSweep) {
  ErrorScalingParams p;
  p.lambdas = {0.1, 0.05};
  EXPECT_THROW(run_error_scaling(p), ValidationError);
}

TEST(WickRotation, RefusesPositiveGamma) {
  WickParams p;
  p.model.gamma0 = 1.0;
  EXPECT_THROW(run_wick_rotation(p), ExponentialOverflow);
}

TEST(WickRotation, ScaledGapShrinksAndExactGapIsSecondOrder) {
  const auto r = run_wick_rotation(WickParams{});
  EXPECT_TRUE(r.metric("scaled_gap_max_increase").passed());
  EXPECT_TRUE(r.metric("exact_gap_slope").passed()) << r.metric("exact_gap_slope").value;
  EXPECT_TRUE(r.metric("exact_x_drift").passed());
  EXPECT_TRUE(r.metric("limit_steady_state_residual").passed());
}

TEST(NonlinearExample, ReportPasses) {
  NonlinearParams p;
  p.lambdas = geometric_grid(0.02, 0.2, 5);
  p.grid_points = 61;
  const auto r = run_nonlinear_example(p, {"", "", 4});
  EXPECT_TRUE(r.passed()) << r.summary().str();
}

// With α ≠ 0 the gradient product of the displayed form vanishes while the
// composed form keeps a λ²α² term; only the latter removes the O(λ²) error.
TEST(NonlinearExample, ComposedCorrectionImprovesOrder) {
  const ResonanceFluorescenceParams model{1.0, 1.0, 0.0, true};
  const auto rf = resonance_fluorescence(model);
  const auto a = TwoLevelAnsatz::sqrt_family(0.4);
  const RVec e0 = RVec::Constant(1, 0.25);
  const auto times = grid(2.0, 41);
  const RelevantObservables obs({pauli().z});
  const std::vector<double> lambdas = geometric_grid(0.01, 0.05, 5);
  std::vector<double> displayed, composed;
  for (double lambda : lambdas) {
    const auto exact = exact_oracle(model, lambda, a->eval(e0), obs, times).component(0);
    MeanOptions d, c;
    c.correction = CorrectionForm::composed;
    displayed.push_back(detail::sup_abs_diff(solve_mean(a, rf.generator, lambda, e0, times, d).component(0), exact));
    composed.push_back(detail::sup_abs_diff(solve_mean(a, rf.generator, lambda, e0, times, c).component(0), exact));
  }
  EXPECT_NEAR(fit_loglog(lambdas, displayed).slope, 2.0, 0.2);
  EXPECT_GT(fit_loglog(lambdas, composed).slope, 2.8);
}

TEST(Experiments, ParallelMapKeepsOrderAndRethrows) {
  const auto v = detail::parallel_map(20, 4, [](std::size_t i) { return static_cast<int>(i * i); });
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(v[i], static_cast<int>(i * i));
  EXPECT_THROW(detail::parallel_map(5, 3,
                                    [](std::size_t i) {
                                      if (i == 3) throw Error("boom");
                                      return 0;
                                    }),
               Error);
}

TEST(Experiments, SupDiffPropagatesNonFinite) {
  EXPECT_TRUE(std::isnan(detail::sup_abs_diff({0.0, std::nan("")}, {0.0, 0.0})));
  EXPECT_DOUBLE_EQ(detail::sup_abs_diff({1.0, 2.0}, {1.5, 2.0}), 0.5);
}

TEST(Experiments, PointwiseGapFloorsNearZeroCrossings) {
  const std::vector<double> coef{1.0, 1e-6, -1.0};
  const std::vector<double> scaled{1.01, 2e-6, -1.02};
  EXPECT_NEAR(detail::pointwise_relative_gap(scaled, coef), 0.02, 1e-12);
}
