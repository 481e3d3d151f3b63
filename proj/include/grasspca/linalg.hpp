#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <utility>
#include <vector>

#include "grasspca/errors.hpp"
#include "grasspca/matrix.hpp"
#include "grasspca/rng.hpp"

namespace grasspca {

// d×k matrix whose columns span a rank-k subspace of R^d. Columns are
// orthonormal whenever the Basis came out of qr_thin/top_k_eig; use
// orthonormality_defect() where a contract requires it.
class Basis {
 public:
  Basis() = default;
  explicit Basis(DenseMatrix m) : m_(std::move(m)) {
    if (m_.cols() > m_.rows())
      throw DimensionMismatch("Basis: k > d (" + m_.shape_string() + ")");
  }

  std::size_t d() const { return m_.rows(); }
  std::size_t k() const { return m_.cols(); }
  const DenseMatrix& matrix() const { return m_; }

  // ‖MᵀM − I_k‖_F
  double orthonormality_defect() const {
    DenseMatrix g = matmul_at_b(m_, m_);
    for (std::size_t i = 0; i < g.rows(); ++i) g(i, i) -= 1.0;
    return frobenius_norm(g);
  }

 private:
  DenseMatrix m_;
};

struct QrResult {
  Basis q;
  DenseMatrix r;  // k×k upper-triangular, nonnegative diagonal
};

inline constexpr double kRankTolerance = 1e-12;

// Thin QR by Householder reflections. Deterministic: fixed reflector order,
// diagonal of R forced nonnegative by sign flips on (row of R, column of Q).
inline QrResult qr_thin(const DenseMatrix& a) {
  const std::size_t d = a.rows();
  const std::size_t k = a.cols();
  if (d < k) throw DimensionMismatch("qr_thin: need rows >= cols, got " + a.shape_string());
  if (k == 0) throw DimensionMismatch("qr_thin: empty matrix");

  DenseMatrix work = a;
  std::vector<std::vector<double>> reflectors(k);
  for (std::size_t j = 0; j < k; ++j) {
    double norm_x = 0.0;
    for (std::size_t i = j; i < d; ++i) norm_x += work(i, j) * work(i, j);
    norm_x = std::sqrt(norm_x);

    std::vector<double>& v = reflectors[j];
    v.assign(d, 0.0);
    if (norm_x > 0.0) {
      for (std::size_t i = j; i < d; ++i) v[i] = work(i, j);
      v[j] += std::copysign(norm_x, work(j, j));
      double norm_v = 0.0;
      for (std::size_t i = j; i < d; ++i) norm_v += v[i] * v[i];
      norm_v = std::sqrt(norm_v);
      if (norm_v > 0.0)
        for (std::size_t i = j; i < d; ++i) v[i] /= norm_v;
      for (std::size_t c = j; c < k; ++c) {
        double dot = 0.0;
        for (std::size_t i = j; i < d; ++i) dot += v[i] * work(i, c);
        for (std::size_t i = j; i < d; ++i) work(i, c) -= 2.0 * dot * v[i];
      }
    }
  }

  for (std::size_t j = 0; j < k; ++j)
    if (std::abs(work(j, j)) <= kRankTolerance)
      throw RankDeficient(j, "qr_thin: column " + std::to_string(j) +
                                 " is numerically rank-deficient (|R_jj| = " +
                                 std::to_string(std::abs(work(j, j))) + ")");

  // Q = H_0 · H_1 · ... · H_{k-1} applied to the first k columns of I_d.
  DenseMatrix q(d, k);
  for (std::size_t j = 0; j < k; ++j) q(j, j) = 1.0;
  for (std::size_t jj = k; jj-- > 0;) {
    const std::vector<double>& v = reflectors[jj];
    for (std::size_t c = 0; c < k; ++c) {
      double dot = 0.0;
      for (std::size_t i = jj; i < d; ++i) dot += v[i] * q(i, c);
      for (std::size_t i = jj; i < d; ++i) q(i, c) -= 2.0 * dot * v[i];
    }
  }

  DenseMatrix r(k, k);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i; j < k; ++j) r(i, j) = work(i, j);
  for (std::size_t j = 0; j < k; ++j) {
    if (r(j, j) < 0.0) {
      for (std::size_t c = j; c < k; ++c) r(j, c) = -r(j, c);
      for (std::size_t i = 0; i < d; ++i) q(i, j) = -q(i, j);
    }
  }
  return {Basis(std::move(q)), std::move(r)};
}

// qr_thin, but a rank-deficient column is replaced by a fresh seeded Gaussian
// draw and the factorization is retried. Keeps long optimization runs alive
// through degenerate steps.
inline Basis orthonormalize_with_recovery(DenseMatrix m, std::uint64_t seed) {
  for (std::uint64_t attempt = 0; attempt < 32; ++attempt) {
    try {
      return qr_thin(m).q;
    } catch (const RankDeficient& e) {
      CounterRng rng(rng_key(seed, streams::kColumnRecovery, attempt, e.column));
      for (std::size_t i = 0; i < m.rows(); ++i) m(i, e.column) = rng.gaussian();
    }
  }
  return qr_thin(m).q;  // out of retries; let the failure surface
}

namespace detail {

// Cyclic Jacobi eigendecomposition for small symmetric matrices. Returns
// eigenvalues in descending order; `vecs` columns are the matching
// eigenvectors. Column signs are canonicalized (largest-|entry| positive).
inline void jacobi_sym_eig(DenseMatrix b, std::vector<double>& vals, DenseMatrix& vecs) {
  const std::size_t n = b.rows();
  vecs = DenseMatrix::identity(n);
  const double scale = std::max(1.0, frobenius_norm(b));
  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += b(p, q) * b(p, q);
    if (std::sqrt(off) <= 1e-15 * scale) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = b(p, q);
        if (std::abs(apq) <= 1e-300) continue;
        const double tau = (b(q, q) - b(p, p)) / (2.0 * apq);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (std::size_t i = 0; i < n; ++i) {
          const double bip = b(i, p), biq = b(i, q);
          b(i, p) = c * bip - s * biq;
          b(i, q) = s * bip + c * biq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double bpi = b(p, i), bqi = b(q, i);
          b(p, i) = c * bpi - s * bqi;
          b(q, i) = s * bpi + c * bqi;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double vip = vecs(i, p), viq = vecs(i, q);
          vecs(i, p) = c * vip - s * viq;
          vecs(i, q) = s * vip + c * viq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return b(i, i) > b(j, j); });
  vals.resize(n);
  DenseMatrix sorted(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    vals[j] = b(order[j], order[j]);
    for (std::size_t i = 0; i < n; ++i) sorted(i, j) = vecs(i, order[j]);
  }
  for (std::size_t j = 0; j < n; ++j) {
    std::size_t arg = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (std::abs(sorted(i, j)) > best) {
        best = std::abs(sorted(i, j));
        arg = i;
      }
    }
    if (sorted(arg, j) < 0.0)
      for (std::size_t i = 0; i < n; ++i) sorted(i, j) = -sorted(i, j);
  }
  vecs = std::move(sorted);
}

}  // namespace detail

struct EigResult {
  Basis v;                     // d×k, orthonormal
  std::vector<double> lambdas; // descending
};

// Top-k eigenpairs of a symmetric PSD matrix by blocked subspace iteration:
// oversampled block, QR re-orthonormalization each step, Rayleigh-Ritz
// extraction at the end. A small positive diagonal shift keeps the iterated
// block full-rank when S itself is rank-deficient; Ritz values are computed
// against the unshifted matrix. Residual tolerance 1e-10, cap 10·d steps.
inline EigResult top_k_eig(const DenseMatrix& s, std::size_t k) {
  const std::size_t d = s.rows();
  if (s.cols() != d) throw DimensionMismatch("top_k_eig: matrix not square: " + s.shape_string());
  if (k == 0 || k > d)
    throw InvalidArgument("top_k_eig: k = " + std::to_string(k) + " out of range for d = " +
                          std::to_string(d));
  double asym = 0.0;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i + 1; j < d; ++j) asym = std::max(asym, std::abs(s(i, j) - s(j, i)));
  if (asym > 1e-10 * std::max(1.0, max_abs(s)))
    throw InvalidArgument("top_k_eig: input is not symmetric (max asymmetry " +
                          std::to_string(asym) + ")");

  DenseMatrix a(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) a(i, j) = 0.5 * (s(i, j) + s(j, i));

  const std::size_t block = std::min(d, k + 4);
  const double shift = 1e-3 * (1.0 + trace(a) / static_cast<double>(d));
  CounterRng rng(rng_key(0x70B5ACE5EEDULL, streams::kEigInit, d, block));
  DenseMatrix v = orthonormalize_with_recovery(DenseMatrix::gaussian(d, block, rng),
                                               0x70B5ACE5EEDULL)
                      .matrix();

  // Rayleigh-Ritz each step; convergence is judged on the residual of the
  // top-k Ritz pairs only. The oversampled tail columns are accelerators and
  // are allowed to keep churning inside clustered noise spectra.
  const std::size_t max_iter = 10 * d;
  double residual = 0.0;
  for (std::size_t iter = 0; iter <= max_iter; ++iter) {
    DenseMatrix w = a * v;
    DenseMatrix rayleigh = matmul_at_b(v, w);
    std::vector<double> ritz_vals;
    DenseMatrix ritz_vecs;
    detail::jacobi_sym_eig(rayleigh, ritz_vals, ritz_vecs);
    DenseMatrix top_rot(block, k);
    for (std::size_t i = 0; i < block; ++i)
      for (std::size_t j = 0; j < k; ++j) top_rot(i, j) = ritz_vecs(i, j);
    DenseMatrix ritz = v * top_rot;    // top-k Ritz vectors
    DenseMatrix a_ritz = w * top_rot;  // A · (top-k Ritz vectors)
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < k; ++j) a_ritz(i, j) -= ritz_vals[j] * ritz(i, j);
    residual = frobenius_norm(a_ritz);
    if (residual <= 1e-10 * std::max(1.0, ritz_vals[0])) {
      ritz_vals.resize(k);
      return {Basis(std::move(ritz)), std::move(ritz_vals)};
    }
    if (iter == max_iter) break;
    w += shift * v;
    v = qr_thin(w).q.matrix();
  }
  throw NoConvergence(max_iter, residual,
                      "top_k_eig: subspace iteration did not reach tolerance in " +
                          std::to_string(max_iter) + " steps (residual " +
                          std::to_string(residual) + "); spectrum likely clustered at the cut");
}

// sqrt(max(0, k − ‖UᵀV‖_F²)); zero iff the two spans coincide. Evaluated as
// ‖UUᵀ − VVᵀ‖_F/√2 (the same quantity for orthonormal inputs), which stays
// accurate when the spans nearly coincide and the direct form cancels.
inline double chordal_distance(const Basis& u, const Basis& v) {
  if (u.d() != v.d() || u.k() != v.k())
    throw DimensionMismatch("chordal_distance: " + u.matrix().shape_string() + " vs " +
                            v.matrix().shape_string());
  const std::size_t d = u.d();
  const std::size_t k = u.k();
  double sum = 0.0;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) {
      double pu = 0.0, pv = 0.0;
      for (std::size_t c = 0; c < k; ++c) {
        pu += u.matrix()(i, c) * u.matrix()(j, c);
        pv += v.matrix()(i, c) * v.matrix()(j, c);
      }
      const double diff = pu - pv;
      sum += (i == j ? 1.0 : 2.0) * diff * diff;
    }
  return std::sqrt(0.5 * sum);
}

}  // namespace grasspca
