#pragma once

// Time-dependent generators: Hamiltonian commutators, GKSL dissipators and the
// interaction-picture conjugation of a drive by a free generator.

#include <functional>
#include <random>

#include "tclp/linalg.hpp"

namespace tclp {

/// t ↦ L(t). The coupling λ is never part of the evaluated superoperator.
class GeneratorFunction {
 public:
  using Eval = std::function<SuperOperator(double)>;

  GeneratorFunction() = default;
  GeneratorFunction(Eigen::Index dim, Eval eval, bool time_independent = false)
      : dim_(dim), eval_(std::move(eval)), time_independent_(time_independent) {}

  Eigen::Index dim() const { return dim_; }
  bool time_independent() const { return time_independent_; }
  SuperOperator operator()(double t) const { return eval_(t); }

 private:
  Eigen::Index dim_ = 0;
  Eval eval_;
  bool time_independent_ = false;
};

inline GeneratorFunction constant_generator(SuperOperator l) {
  const auto dim = l.dim();
  return GeneratorFunction(dim, [l = std::move(l)](double) { return l; }, true);
}

/// X ↦ prefactor·(H X − X H).
inline SuperOperator commutator_generator(const CMatrix& h, Complex prefactor, bool require_hermitian = true) {
  if (h.rows() != h.cols()) throw DimensionMismatch("commutator_generator: H must be square");
  if (require_hermitian && !is_hermitian(h, 1e-12)) throw NotHermitian("commutator_generator: H is not Hermitian");
  return prefactor * (left_multiplication(h) - right_multiplication(h));
}

/// X ↦ rate·(A X A† − ½{A†A, X}). Negative rates are allowed (formal regime).
inline SuperOperator gksl_dissipator(const CMatrix& a, double rate) {
  if (a.rows() != a.cols()) throw DimensionMismatch("gksl_dissipator: A must be square");
  const CMatrix ada = a.adjoint() * a;
  return rate * (sandwich(a, a.adjoint()) - 0.5 * left_multiplication(ada) - 0.5 * right_multiplication(ada));
}

struct InteractionPictureOptions {
  /// Largest admissible ‖L₀‖·|t| before evaluation refuses (exp overflow guard).
  double max_exponent = 300.0;
};

/// L(t) = e^{−L₀ t} L₁ e^{L₀ t}, with dense exponentials.
inline GeneratorFunction interaction_picture(const SuperOperator& free, const SuperOperator& drive,
                                             InteractionPictureOptions opts = {}) {
  if (free.dim() != drive.dim()) throw DimensionMismatch("interaction_picture: dimension mismatch");
  const double free_norm = free.matrix().cwiseAbs().colwise().sum().maxCoeff();
  return GeneratorFunction(free.dim(), [free, drive, free_norm, opts](double t) {
    if (free_norm * std::abs(t) > opts.max_exponent)
      throw ExponentialOverflow("interaction_picture: |L0| t = " + std::to_string(free_norm * std::abs(t)) +
                                " exceeds the configured bound");
    if (t == 0.0) return drive;
    const CMatrix fwd = (free.matrix() * t).exp();
    const CMatrix bwd = (free.matrix() * (-t)).exp();
    return SuperOperator(free.dim(), bwd * drive.matrix() * fwd);
  });
}

struct ResonanceFluorescenceParams {
  double omega = 1.0;
  double gamma0 = 1.0;
  double n_thermal = 0.0;
  /// Replace both decay and excitation rates by γ/2.
  bool high_temperature = false;

  double gamma() const { return gamma0 * (2.0 * n_thermal + 1.0); }
};

struct ResonanceFluorescence {
  ResonanceFluorescenceParams params;
  double gamma = 0.0;
  /// Dissipative part L₀ (rotating frame).
  SuperOperator free;
  /// Drive L₁ = (iΩ/2)[σ₊ + σ₋, ·].
  SuperOperator drive;
  /// Interaction-picture generator e^{−L₀t} L₁ e^{L₀t}.
  GeneratorFunction generator;
};

/// Two-level atom driven on resonance, in the rotating frame, with thermal
/// GKSL damping; the generator is returned in the interaction picture of the
/// damping.
inline ResonanceFluorescence resonance_fluorescence(const ResonanceFluorescenceParams& p,
                                                    InteractionPictureOptions opts = {}) {
  const Pauli s = pauli();
  ResonanceFluorescence out;
  out.params = p;
  out.gamma = p.gamma();
  const double down = p.high_temperature ? out.gamma / 2.0 : p.gamma0 * (p.n_thermal + 1.0);
  const double up = p.high_temperature ? out.gamma / 2.0 : p.gamma0 * p.n_thermal;
  out.free = gksl_dissipator(s.minus, down) + gksl_dissipator(s.plus, up);
  out.drive = commutator_generator(s.plus + s.minus, kI * (p.omega / 2.0));
  out.generator = interaction_picture(out.free, out.drive, opts);
  return out;
}

/// Random GKSL generator −i[H, ·] + Σ D[A_k] with Gaussian H and jump operators.
inline SuperOperator random_gksl(Eigen::Index d, std::mt19937_64& rng, int jumps = 2, double scale = 1.0) {
  std::normal_distribution<double> n01(0.0, 1.0);
  auto gaussian = [&](Eigen::Index r, Eigen::Index c) {
    CMatrix m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < c; ++j) m(i, j) = Complex(n01(rng), n01(rng));
    return m;
  };
  CMatrix h = gaussian(d, d);
  h = 0.5 * (h + h.adjoint()).eval();
  SuperOperator l = commutator_generator(h, -kI * scale);
  for (int k = 0; k < jumps; ++k) l += gksl_dissipator(gaussian(d, d) * std::sqrt(0.5 * scale), 1.0);
  return l;
}

}  // namespace tclp
