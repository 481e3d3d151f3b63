#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "grasspca/data.hpp"
#include "grasspca/errors.hpp"
#include "grasspca/linalg.hpp"
#include "grasspca/matrix.hpp"

namespace grasspca {

struct PcaModel {
  Basis basis;  // d×k, orthonormal

  std::size_t d() const { return basis.d(); }
  std::size_t k() const { return basis.k(); }
};

// Centralized PCA reference: top-k eigenvectors of the scatter matrix X·Xᵀ.
// The scatter form is used (not the n×n dual) because d is small here. Data
// is not centered; z-scoring happens upstream in the detection pipeline.
inline PcaModel fit_centralized(const DenseMatrix& x, std::size_t k) {
  if (x.cols() == 0) throw InvalidArgument("fit_centralized: empty dataset");
  if (k > x.rows())
    throw InvalidArgument("fit_centralized: k = " + std::to_string(k) + " exceeds d = " +
                          std::to_string(x.rows()));
  if (!x.all_finite()) throw InvalidArgument("fit_centralized: non-finite input");
  return {top_k_eig(gram(x), k).v};
}

// ‖(I − UUᵀ)x‖²: squared norm of the component of x outside span(U).
inline double reconstruction_error(const Basis& basis, std::span<const double> x) {
  const std::size_t d = basis.d();
  const std::size_t k = basis.k();
  if (x.size() != d)
    throw DimensionMismatch("reconstruction_error: vector length " + std::to_string(x.size()) +
                            " vs basis dimension " + std::to_string(d));
  std::vector<double> proj(k, 0.0);
  for (std::size_t j = 0; j < k; ++j)
    for (std::size_t i = 0; i < d; ++i) proj[j] += basis.matrix()(i, j) * x[i];
  double err = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    double rebuilt = 0.0;
    for (std::size_t j = 0; j < k; ++j) rebuilt += basis.matrix()(i, j) * proj[j];
    const double r = x[i] - rebuilt;
    err += r * r;
  }
  return err;
}

inline double reconstruction_error(const PcaModel& model, std::span<const double> x) {
  return reconstruction_error(model.basis, x);
}

// Per-client stand-alone PCA, no communication: the self-learning baseline.
// Output order follows client ids.
inline std::vector<PcaModel> self_learning_pca(const std::vector<ClientDataset>& clients,
                                               std::size_t k) {
  std::vector<PcaModel> models;
  models.reserve(clients.size());
  for (const ClientDataset& c : clients) {
    const std::string tag = "self_learning_pca: client " + std::to_string(c.id) + ": ";
    try {
      models.push_back(fit_centralized(c.features, k));
    } catch (const NoConvergence& e) {
      throw NoConvergence(e.iterations, e.residual, tag + e.what());
    } catch (const Error& e) {
      throw InvalidArgument(tag + e.what());
    }
  }
  return models;
}

}  // namespace grasspca
