#include "grasspca/pca.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "grasspca/data.hpp"
#include "support.hpp"

using namespace grasspca;
using testsupport::random_matrix;
using testsupport::random_orthonormal;

TEST(FitCentralized, ExactRankOneData) {
  // X = u·vᵀ with unit u
  const std::size_t d = 5, n = 7;
  DenseMatrix u = random_orthonormal(d, 1, 2).matrix();
  DenseMatrix v = random_matrix(n, 1, 3);
  DenseMatrix x(d, n);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < n; ++j) x(i, j) = u(i, 0) * v(j, 0);
  PcaModel model = fit_centralized(x, 1);
  EXPECT_LE(chordal_distance(model.basis, Basis(u)), 1e-8);
}

TEST(FitCentralized, TwoByTwoDiagonal) {
  DenseMatrix x(2, 2);
  x(0, 0) = 3.0;
  x(1, 1) = 1.0;
  PcaModel model = fit_centralized(x, 1);
  EXPECT_NEAR(std::abs(model.basis.matrix()(0, 0)), 1.0, 1e-10);
  EXPECT_NEAR(model.basis.matrix()(1, 0), 0.0, 1e-10);
}

TEST(FitCentralized, RecoversPlantedSubspace) {
  SyntheticData synth = synth_generate(20, 3, 200, 1, 1e-3, 0.0, 0.0, 77);
  PcaModel model = fit_centralized(synth.train_clients[0].features, 3);
  EXPECT_LE(chordal_distance(model.basis, synth.planted), 0.05);
}

TEST(FitCentralized, BeatsRandomBasesOfSameRank) {
  SyntheticData synth = synth_generate(10, 2, 120, 1, 0.05, 0.0, 0.0, 5);
  const DenseMatrix& x = synth.train_clients[0].features;
  PcaModel model = fit_centralized(x, 2);

  auto total_error = [&](const Basis& b) {
    double total = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j)
      total += reconstruction_error(b, x.column(j));
    return total;
  };
  const double fitted = total_error(model.basis);
  for (std::uint64_t seed = 0; seed < 50; ++seed)
    EXPECT_LE(fitted, total_error(random_orthonormal(10, 2, 500 + seed)) + 1e-9) << seed;
}

TEST(FitCentralized, EnergyDecomposition) {
  // total reconstruction error = ‖X‖_F² − ‖UᵀX‖_F²
  DenseMatrix x = random_matrix(8, 40, 9);
  PcaModel model = fit_centralized(x, 3);
  double total = 0.0;
  for (std::size_t j = 0; j < x.cols(); ++j) total += reconstruction_error(model, x.column(j));
  const double captured = frobenius_norm(matmul_at_b(model.basis.matrix(), x));
  const double full = frobenius_norm(x);
  const double expected = full * full - captured * captured;
  EXPECT_NEAR(total, expected, 1e-8 * std::max(1.0, expected));
}

TEST(ReconstructionError, InSpanIsZero) {
  Basis u = random_orthonormal(6, 2, 4);
  // x = U·c lies in span(U)
  std::vector<double> x(6, 0.0);
  for (std::size_t i = 0; i < 6; ++i) x[i] = 2.0 * u.matrix()(i, 0) - 0.7 * u.matrix()(i, 1);
  EXPECT_NEAR(reconstruction_error(u, x), 0.0, 1e-12);
}

TEST(ReconstructionError, RejectedComponentSquared) {
  DenseMatrix e1(2, 1);
  e1(0, 0) = 1.0;
  std::vector<double> x = {0.0, 2.0};
  EXPECT_DOUBLE_EQ(reconstruction_error(Basis(e1), x), 4.0);
}

TEST(ReconstructionError, InvariantUnderBasisRotation) {
  Basis u = random_orthonormal(7, 3, 12);
  Basis rot = random_orthonormal(3, 3, 13);
  Basis rotated(u.matrix() * rot.matrix());
  std::vector<double> x = random_matrix(7, 1, 14).column(0);
  EXPECT_NEAR(reconstruction_error(u, x), reconstruction_error(rotated, x), 1e-9);
}

TEST(ReconstructionError, DimensionMismatchRejected) {
  Basis u = random_orthonormal(6, 2, 4);
  std::vector<double> x(5, 1.0);
  EXPECT_THROW(reconstruction_error(u, x), DimensionMismatch);
}

TEST(SelfLearningPca, SingleClientMatchesCentralized) {
  SyntheticData synth = synth_generate(8, 2, 60, 1, 0.01, 0.0, 0.0, 21);
  auto models = self_learning_pca(synth.train_clients, 2);
  ASSERT_EQ(models.size(), 1u);
  PcaModel central = fit_centralized(synth.train_clients[0].features, 2);
  EXPECT_LE(chordal_distance(models[0].basis, central.basis), 1e-10);
}

TEST(SelfLearningPca, OrthogonalPlantedSubspacesStayApart) {
  // two clients with data in orthogonal 2-dim subspaces of R^8
  const std::size_t d = 8, k = 2, n = 100;
  Basis span_a = random_orthonormal(d, 2 * k, 31);
  DenseMatrix basis_a(d, k), basis_b(d, k);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      basis_a(i, j) = span_a.matrix()(i, j);
      basis_b(i, j) = span_a.matrix()(i, j + k);
    }
  auto make_client = [&](std::size_t id, const DenseMatrix& planted) {
    CounterRng rng(rng_key(40 + id));
    ClientDataset c;
    c.id = id;
    c.features = planted * DenseMatrix::gaussian(k, n, rng);
    return c;
  };
  std::vector<ClientDataset> clients = {make_client(0, basis_a), make_client(1, basis_b)};
  auto models = self_learning_pca(clients, k);
  EXPECT_NEAR(chordal_distance(models[0].basis, models[1].basis), std::sqrt(2.0), 1e-6);
}

TEST(SelfLearningPca, ManyClientsOverSharedSubspace) {
  SyntheticData synth = synth_generate(12, 3, 80, 100, 1e-3, 0.0, 0.0, 55);
  auto models = self_learning_pca(synth.train_clients, 3);
  ASSERT_EQ(models.size(), 100u);
  for (const PcaModel& m : models) EXPECT_LE(chordal_distance(m.basis, synth.planted), 0.1);
}
