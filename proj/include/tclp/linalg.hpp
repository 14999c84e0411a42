#pragma once

// Dense complex matrices, superoperators on the column-stacked vectorized
// space, matrix exponentials and the oblique restricted inverse.

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <complex>
#include <limits>
#include <string>
#include <vector>

#include "tclp/errors.hpp"

namespace tclp {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVec = Eigen::VectorXd;

inline constexpr Complex kI{0.0, 1.0};

inline bool all_finite(const CMatrix& x) { return x.allFinite(); }

inline bool is_hermitian(const CMatrix& x, double tol = 1e-12) {
  return x.rows() == x.cols() && (x - x.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

inline double max_abs(const CMatrix& x) { return x.size() == 0 ? 0.0 : x.cwiseAbs().maxCoeff(); }

/// Hilbert–Schmidt inner product Tr(A† B).
inline Complex hs_inner(const CMatrix& a, const CMatrix& b) { return (a.adjoint() * b).trace(); }

/// Column-major stacking: vec(X)[i + d*j] = X(i, j).
inline CVector vectorize(const CMatrix& x) {
  if (x.rows() != x.cols()) throw DimensionMismatch("vectorize: matrix must be square");
  return Eigen::Map<const CVector>(x.data(), x.size());
}

inline CMatrix devectorize(const CVector& v, Eigen::Index dim) {
  if (dim < 1 || v.size() != dim * dim) throw DimensionMismatch("devectorize: length is not dim^2");
  return Eigen::Map<const CMatrix>(v.data(), dim, dim);
}

/// Linear map on d×d matrices stored as its d²×d² matrix on vectorized space.
class SuperOperator {
 public:
  SuperOperator() = default;

  SuperOperator(Eigen::Index dim, CMatrix matrix) : dim_(dim), m_(std::move(matrix)) {
    if (dim_ < 1 || m_.rows() != dim_ * dim_ || m_.cols() != dim_ * dim_)
      throw DimensionMismatch("SuperOperator: representation must be dim^2 x dim^2");
  }

  static SuperOperator identity(Eigen::Index dim) {
    return SuperOperator(dim, CMatrix::Identity(dim * dim, dim * dim));
  }
  static SuperOperator zero(Eigen::Index dim) {
    return SuperOperator(dim, CMatrix::Zero(dim * dim, dim * dim));
  }

  Eigen::Index dim() const { return dim_; }
  const CMatrix& matrix() const { return m_; }
  bool empty() const { return dim_ == 0; }

  CMatrix apply(const CMatrix& x) const {
    if (x.rows() != dim_ || x.cols() != dim_) throw DimensionMismatch("SuperOperator::apply: dimension mismatch");
    return devectorize(m_ * vectorize(x), dim_);
  }
  CVector apply_vec(const CVector& v) const {
    if (v.size() != m_.cols()) throw DimensionMismatch("SuperOperator::apply_vec: dimension mismatch");
    return m_ * v;
  }

  /// Frobenius norm of the representation.
  double norm() const { return m_.norm(); }

  SuperOperator& operator+=(const SuperOperator& o) {
    check(o);
    m_ += o.m_;
    return *this;
  }
  SuperOperator& operator-=(const SuperOperator& o) {
    check(o);
    m_ -= o.m_;
    return *this;
  }
  SuperOperator& operator*=(Complex s) {
    m_ *= s;
    return *this;
  }

  friend SuperOperator operator+(SuperOperator a, const SuperOperator& b) { return a += b; }
  friend SuperOperator operator-(SuperOperator a, const SuperOperator& b) { return a -= b; }
  friend SuperOperator operator-(const SuperOperator& a) { return SuperOperator(a.dim_, -a.m_); }
  friend SuperOperator operator*(Complex s, SuperOperator a) { return a *= s; }
  friend SuperOperator operator*(SuperOperator a, Complex s) { return a *= s; }
  friend SuperOperator operator*(double s, SuperOperator a) { return a *= Complex(s, 0.0); }

  /// Composition: (a*b)(X) = a(b(X)).
  friend SuperOperator operator*(const SuperOperator& a, const SuperOperator& b) {
    a.check(b);
    return SuperOperator(a.dim_, a.m_ * b.m_);
  }

 private:
  void check(const SuperOperator& o) const {
    if (o.dim_ != dim_) throw DimensionMismatch("SuperOperator: dimension mismatch");
  }

  Eigen::Index dim_ = 0;
  CMatrix m_;
};

inline SuperOperator compose(const SuperOperator& a, const SuperOperator& b) { return a * b; }
inline CMatrix apply(const SuperOperator& a, const CMatrix& x) { return a.apply(x); }

/// X ↦ A X B, i.e. (Bᵀ ⊗ A) on column-stacked vectors.
inline SuperOperator sandwich(const CMatrix& a, const CMatrix& b) {
  if (a.rows() != a.cols() || b.rows() != b.cols() || a.rows() != b.rows())
    throw DimensionMismatch("sandwich: dimension mismatch");
  return SuperOperator(a.rows(), Eigen::kroneckerProduct(b.transpose(), a).eval());
}

/// X ↦ A X
inline SuperOperator left_multiplication(const CMatrix& a) {
  return sandwich(a, CMatrix::Identity(a.rows(), a.cols()));
}

/// X ↦ X B
inline SuperOperator right_multiplication(const CMatrix& b) {
  return sandwich(CMatrix::Identity(b.rows(), b.cols()), b);
}

/// Row vector t with t · vec(X) = Tr X.
inline Eigen::RowVectorXcd trace_row(Eigen::Index dim) {
  return vectorize(CMatrix::Identity(dim, dim)).transpose();
}

/// Row vector r with r · vec(X) = Tr(P X).
inline Eigen::RowVectorXcd expectation_row(const CMatrix& p) { return vectorize(p.transpose()).transpose(); }

inline CMatrix expm(const CMatrix& a) { return a.exp(); }

inline SuperOperator expm(const SuperOperator& a) { return SuperOperator(a.dim(), a.matrix().exp()); }

/// Fréchet derivative of exp at `a` in direction `e`, read off the upper-right
/// block of exp([[a, e], [0, a]]).
inline CMatrix expm_frechet(const CMatrix& a, const CMatrix& e) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n || e.rows() != n || e.cols() != n) throw DimensionMismatch("expm_frechet: dimension mismatch");
  CMatrix block = CMatrix::Zero(2 * n, 2 * n);
  block.topLeftCorner(n, n) = a;
  block.bottomRightCorner(n, n) = a;
  block.topRightCorner(n, n) = e;
  const CMatrix x = block.exp();
  return x.topRightCorner(n, n);
}

/// Orthonormal basis for the column space, with relative rank cutoff.
inline CMatrix range_basis(const CMatrix& a, double rel_tol = 1e-10) {
  Eigen::JacobiSVD<CMatrix> svd(a, Eigen::ComputeFullU);
  const auto& s = svd.singularValues();
  Eigen::Index rank = 0;
  const double cutoff = s.size() > 0 ? rel_tol * s(0) : 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > cutoff) ++rank;
  return svd.matrixU().leftCols(rank);
}

struct RestrictedInverseOptions {
  double rank_rel_tol = 1e-10;
  /// Smallest admissible singular value of the restricted block.
  double abs_tol = 1e-12;
  /// Largest admissible condition number of the restricted block.
  double max_condition = 1e8;
  /// Tolerance on ‖P² − P‖ for accepting the projector.
  double idempotency_tol = 1e-8;
};

struct RestrictedInverse {
  SuperOperator inverse;
  double smallest_singular_value = 0.0;
  double condition = 1.0;
};

/// Inverse of A restricted to range(P), extended by zero on range(I − P).
///
/// The change of basis T = [basis(range P) | basis(range(I−P))] block-diagonalizes
/// P as diag(I_r, 0); the r×r block of T⁻¹ A T is inverted and mapped back.
/// The result B satisfies B·A = P and B·(I−P) = (I−P)·B = 0 whenever A maps
/// range(P) into itself and vanishes on range(I−P), for oblique P as well.
inline RestrictedInverse restricted_inverse_diagnostics(const SuperOperator& a, const SuperOperator& p,
                                                        const RestrictedInverseOptions& opts = {}) {
  if (a.dim() != p.dim()) throw DimensionMismatch("restricted_inverse: dimension mismatch");
  const Eigen::Index n = p.matrix().rows();
  const CMatrix& pm = p.matrix();
  const CMatrix qm = CMatrix::Identity(n, n) - pm;
  const double scale = std::max(1.0, pm.norm());
  if ((pm * pm - pm).norm() > opts.idempotency_tol * scale)
    throw Error("restricted_inverse: P is not idempotent within tolerance");

  const CMatrix vp = range_basis(pm, opts.rank_rel_tol);
  const CMatrix vq = range_basis(qm, opts.rank_rel_tol);
  const Eigen::Index r = vp.cols();
  if (r + vq.cols() != n) throw Error("restricted_inverse: ranks of P and I-P do not add up");

  RestrictedInverse out;
  if (r == 0) {
    out.inverse = SuperOperator::zero(p.dim());
    return out;
  }
  CMatrix t(n, n);
  t << vp, vq;
  Eigen::PartialPivLU<CMatrix> lu(t);
  const CMatrix a_adapted = lu.solve(a.matrix() * t);
  const CMatrix block = a_adapted.topLeftCorner(r, r);

  Eigen::JacobiSVD<CMatrix> svd(block);
  const auto& s = svd.singularValues();
  out.smallest_singular_value = s(r - 1);
  out.condition = s(r - 1) > 0.0 ? s(0) / s(r - 1) : std::numeric_limits<double>::infinity();
  if (out.smallest_singular_value < opts.abs_tol || out.condition > opts.max_condition)
    throw SingularOnRange("restricted_inverse: restricted block is singular or ill-conditioned (cond " +
                              std::to_string(out.condition) + ")",
                          0.0, out.smallest_singular_value);

  CMatrix b_adapted = CMatrix::Zero(n, n);
  b_adapted.topLeftCorner(r, r) = block.partialPivLu().inverse();
  out.inverse = SuperOperator(p.dim(), t * b_adapted * lu.inverse());
  return out;
}

inline SuperOperator restricted_inverse(const SuperOperator& a, const SuperOperator& p,
                                        const RestrictedInverseOptions& opts = {}) {
  return restricted_inverse_diagnostics(a, p, opts).inverse;
}

/// Identity/√d followed by the generalized Gell-Mann matrices (symmetric,
/// antisymmetric, diagonal), all normalized so that Tr(bᵢ bⱼ) = δᵢⱼ.
inline std::vector<CMatrix> gell_mann_basis(Eigen::Index d) {
  if (d < 2) throw DimensionMismatch("gell_mann_basis: d must be at least 2");
  std::vector<CMatrix> out;
  out.reserve(static_cast<std::size_t>(d * d));
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  out.push_back(CMatrix::Identity(d, d) / std::sqrt(static_cast<double>(d)));
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index k = j + 1; k < d; ++k) {
      CMatrix m = CMatrix::Zero(d, d);
      m(j, k) = m(k, j) = inv_sqrt2;
      out.push_back(m);
    }
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index k = j + 1; k < d; ++k) {
      CMatrix m = CMatrix::Zero(d, d);
      m(j, k) = -kI * inv_sqrt2;
      m(k, j) = kI * inv_sqrt2;
      out.push_back(m);
    }
  for (Eigen::Index l = 1; l < d; ++l) {
    CMatrix m = CMatrix::Zero(d, d);
    const double c = 1.0 / std::sqrt(static_cast<double>(l * (l + 1)));
    for (Eigen::Index j = 0; j < l; ++j) m(j, j) = c;
    m(l, l) = -static_cast<double>(l) * c;
    out.push_back(m);
  }
  return out;
}

/// Pauli matrices in the basis (|e⟩, |g⟩): σ_z = diag(1, −1), σ₊ = |e⟩⟨g|.
struct Pauli {
  CMatrix identity, x, y, z, plus, minus;
};

inline Pauli pauli() {
  Pauli p;
  p.identity = CMatrix::Identity(2, 2);
  p.x = CMatrix::Zero(2, 2);
  p.x(0, 1) = p.x(1, 0) = 1.0;
  p.y = CMatrix::Zero(2, 2);
  p.y(0, 1) = -kI;
  p.y(1, 0) = kI;
  p.z = CMatrix::Zero(2, 2);
  p.z(0, 0) = 1.0;
  p.z(1, 1) = -1.0;
  p.plus = CMatrix::Zero(2, 2);
  p.plus(0, 1) = 1.0;
  p.minus = p.plus.transpose();
  return p;
}

/// Matrix of a superoperator in an orthonormal operator basis:
/// M_ij = Tr(bᵢ† S(bⱼ)).
inline CMatrix in_basis(const SuperOperator& s, const std::vector<CMatrix>& basis) {
  const auto n = static_cast<Eigen::Index>(basis.size());
  CMatrix out(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const CMatrix img = s.apply(basis[static_cast<std::size_t>(j)]);
    for (Eigen::Index i = 0; i < n; ++i) out(i, j) = hs_inner(basis[static_cast<std::size_t>(i)], img);
  }
  return out;
}

}  // namespace tclp
