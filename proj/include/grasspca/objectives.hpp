#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>

#include "grasspca/errors.hpp"
#include "grasspca/linalg.hpp"
#include "grasspca/matrix.hpp"

namespace grasspca {

// One client's local subproblem for a single communication round. S is the
// precomputed scatter X·Xᵀ; Y and T are the consensus / orthonormality duals;
// Z is the consensus iterate being tracked. Immutable during a solve.
struct LocalProblem {
  DenseMatrix S;  // d×d, symmetric PSD
  DenseMatrix Y;  // d×k
  DenseMatrix T;  // k×k (unused by the manifold variant)
  DenseMatrix Z;  // d×k
  double rho = 1.0;
  double eta = 0.01;
  std::size_t local_iters = 10;
};

inline constexpr double kOrthonormalityTolerance = 1e-6;
inline constexpr double kDivergenceGuard = 1e6;

namespace detail {
inline void require_shapes(const DenseMatrix& s, const DenseMatrix& u, const char* where) {
  if (s.rows() != s.cols() || s.rows() != u.rows())
    throw DimensionMismatch(std::string(where) + ": S is " + s.shape_string() + ", U is " +
                            u.shape_string());
}

inline void require_orthonormal(const DenseMatrix& u, const char* where) {
  const double defect = Basis(u).orthonormality_defect();
  if (defect > kOrthonormalityTolerance)
    throw NotOrthonormal(std::string(where) + ": ||UᵀU - I||_F = " + std::to_string(defect));
}

// max(0, UᵀU − I) componentwise; shared by the surrogate value and gradients.
inline DenseMatrix positive_part_gram_defect(const DenseMatrix& u) {
  DenseMatrix m = matmul_at_b(u, u);
  for (std::size_t i = 0; i < m.rows(); ++i) m(i, i) -= 1.0;
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) = std::max(0.0, m(i, j));
  return m;
}
}  // namespace detail

// Reconstruction objective ‖(I − UUᵀ)X‖_F² expressed through S = X·Xᵀ:
// tr(S) − 2·tr(UᵀSU) + tr(UᵀSU · UᵀU). Valid for any U, orthonormal or not.
inline double f_value(const DenseMatrix& s, const DenseMatrix& u) {
  detail::require_shapes(s, u, "f_value");
  DenseMatrix su = s * u;
  DenseMatrix utsu = matmul_at_b(u, su);
  DenseMatrix utu = matmul_at_b(u, u);
  return trace(s) - 2.0 * trace(utsu) + trace_of_product(utsu, utu);
}

// Euclidean gradient of f_value: −4SU + 2SU(UᵀU) + 2U(UᵀSU).
inline DenseMatrix f_gradient(const DenseMatrix& s, const DenseMatrix& u) {
  detail::require_shapes(s, u, "f_gradient");
  DenseMatrix su = s * u;
  DenseMatrix utsu = matmul_at_b(u, su);
  DenseMatrix utu = matmul_at_b(u, u);
  DenseMatrix g = -4.0 * su;
  g += 2.0 * (su * utu);
  g += 2.0 * (u * utsu);
  return g;
}

// Surrogate orthonormality constraint: max(0, UᵀU − I)², componentwise.
inline DenseMatrix h_constraint(const DenseMatrix& u) {
  DenseMatrix m = detail::positive_part_gram_defect(u);
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) *= m(i, j);
  return m;
}

// Local objective for the Euclidean variant:
// f(U) + <Y, U−Z> + <T, h(U)> + (ρ/2)‖U−Z‖² + (ρ/2)‖h(U)‖².
inline double fedpe_local_value(const LocalProblem& p, const DenseMatrix& u) {
  u.require_same_shape(p.Y, "fedpe_local_value: U vs Y");
  DenseMatrix diff = u - p.Z;
  DenseMatrix h = h_constraint(u);
  const double dn = frobenius_norm(diff);
  const double hn = frobenius_norm(h);
  return f_value(p.S, u) + frobenius_inner(p.Y, diff) + frobenius_inner(p.T, h) +
         0.5 * p.rho * dn * dn + 0.5 * p.rho * hn * hn;
}

// Analytic gradient of fedpe_local_value. With M = UᵀU − I (positive part P):
//   ∇f + Y + ρ(U − Z) + U(A + Aᵀ) + U(B + Bᵀ),
//   A = 2·T∘P, B = 2ρ·P³ (componentwise).
inline DenseMatrix fedpe_local_grad(const LocalProblem& p, const DenseMatrix& u) {
  u.require_same_shape(p.Y, "fedpe_local_grad: U vs Y");
  DenseMatrix g = f_gradient(p.S, u);
  g += p.Y;
  g += p.rho * (u - p.Z);

  DenseMatrix pos = detail::positive_part_gram_defect(u);
  const std::size_t k = pos.rows();
  DenseMatrix a(k, k), b(k, k);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      a(i, j) = 2.0 * p.T(i, j) * pos(i, j);
      b(i, j) = 2.0 * p.rho * pos(i, j) * pos(i, j) * pos(i, j);
    }
  g += u * (a + transpose(a));
  g += u * (b + transpose(b));
  return g;
}

// Local objective for the manifold variant; the h-terms vanish on the
// manifold, so only the consensus coupling remains.
inline double fedpg_local_value(const LocalProblem& p, const DenseMatrix& u) {
  u.require_same_shape(p.Y, "fedpg_local_value: U vs Y");
  detail::require_orthonormal(u, "fedpg_local_value");
  DenseMatrix diff = u - p.Z;
  const double dn = frobenius_norm(diff);
  return f_value(p.S, u) + frobenius_inner(p.Y, diff) + 0.5 * p.rho * dn * dn;
}

// Euclidean gradient of the manifold objective in its orthonormal-substituted
// form tr(S) − tr(UᵀSU) + <Y, U−Z> + (ρ/2)‖U−Z‖²: −2SU + Y + ρ(U − Z).
inline DenseMatrix fedpg_euclidean_grad(const LocalProblem& p, const DenseMatrix& u) {
  u.require_same_shape(p.Y, "fedpg_euclidean_grad: U vs Y");
  detail::require_orthonormal(u, "fedpg_euclidean_grad");
  DenseMatrix g = -2.0 * (p.S * u);
  g += p.Y;
  g += p.rho * (u - p.Z);
  return g;
}

// Orthogonal projection onto the tangent space at U: (I − UUᵀ)G.
inline DenseMatrix project_tangent(const Basis& u, const DenseMatrix& g) {
  if (u.d() != g.rows() || u.k() != g.cols())
    throw DimensionMismatch("project_tangent: basis " + u.matrix().shape_string() + " vs " +
                            g.shape_string());
  detail::require_orthonormal(u.matrix(), "project_tangent");
  DenseMatrix utg = matmul_at_b(u.matrix(), g);
  return g - u.matrix() * utg;
}

// Tangent projection for the constraint set {U: UᵀU = I}: G − U·sym(UᵀG).
// Unlike the subspace-horizontal projector above, this keeps the within-span
// rotation directions, so a proximal pull toward a consensus matrix can align
// the representative and not just the span. The local solver needs that:
// matrix-level consensus U_i = Z is unreachable through purely horizontal
// steps.
inline DenseMatrix project_tangent_orthogonality(const Basis& u, const DenseMatrix& g) {
  if (u.d() != g.rows() || u.k() != g.cols())
    throw DimensionMismatch("project_tangent_orthogonality: basis " +
                            u.matrix().shape_string() + " vs " + g.shape_string());
  detail::require_orthonormal(u.matrix(), "project_tangent_orthogonality");
  DenseMatrix utg = matmul_at_b(u.matrix(), g);
  DenseMatrix sym(utg.rows(), utg.cols());
  for (std::size_t i = 0; i < utg.rows(); ++i)
    for (std::size_t j = 0; j < utg.cols(); ++j) sym(i, j) = 0.5 * (utg(i, j) + utg(j, i));
  return g - u.matrix() * sym;
}

// QR retraction: the Q factor of U + step.
inline Basis retract(const Basis& u, const DenseMatrix& step) {
  if (u.d() != step.rows() || u.k() != step.cols())
    throw DimensionMismatch("retract: basis " + u.matrix().shape_string() + " vs step " +
                            step.shape_string());
  return qr_thin(u.matrix() + step).q;
}

// C steps of projected gradient descent with QR retraction; every iterate
// stays on the manifold.
inline Basis solve_local_fedpg(const LocalProblem& p, const Basis& u0) {
  Basis u = u0;
  for (std::size_t c = 0; c < p.local_iters; ++c) {
    DenseMatrix direction = project_tangent_orthogonality(u, fedpg_euclidean_grad(p, u.matrix()));
    u = retract(u, (-p.eta) * std::move(direction));
  }
  return u;
}

// C steps of plain gradient descent on the penalized objective; the iterate
// is free to leave the manifold (the h-penalty steers it back).
inline DenseMatrix solve_local_fedpe(const LocalProblem& p, const DenseMatrix& u0) {
  DenseMatrix u = u0;
  for (std::size_t c = 0; c < p.local_iters; ++c) {
    u -= p.eta * fedpe_local_grad(p, u);
    if (frobenius_norm(u) > kDivergenceGuard)
      throw Divergence("solve_local_fedpe: iterate norm exceeded " +
                       std::to_string(kDivergenceGuard) + " at local step " + std::to_string(c) +
                       "; step size too large");
  }
  return u;
}

}  // namespace grasspca
