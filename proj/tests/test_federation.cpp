#include "grasspca/federation.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <numeric>

#include "grasspca/pca.hpp"
#include "support.hpp"

using namespace grasspca;
using testsupport::random_matrix;
using testsupport::random_orthonormal;

namespace {

bool bits_equal(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  return std::memcmp(a.data().data(), b.data().data(), a.data().size() * sizeof(double)) == 0;
}

std::vector<ClientDataset> scaled_planted_clients(std::size_t d, std::size_t k, std::size_t n,
                                                  std::size_t n_clients, double scale,
                                                  std::uint64_t seed) {
  SyntheticData synth = synth_generate(d, k, n, n_clients, 1e-3, 0.0, 0.0, seed);
  for (auto& c : synth.train_clients) c.features *= scale;
  return synth.train_clients;
}

// penalty-dominant regime: near-exact local solves, textbook ADMM behavior
Hyperparams convergent_hp(std::size_t k, std::uint64_t seed) {
  Hyperparams hp;
  hp.k = k;
  hp.rho = 10.0;
  hp.eta = 0.02;
  hp.local_iters = 20;
  hp.rounds = 200;
  hp.sample_fraction = 1.0;
  hp.seed = seed;
  hp.algorithm = Algorithm::fedpg;
  return hp;
}

}  // namespace

TEST(SampleClients, FullFractionReturnsEveryone) {
  auto ids = sample_clients(7, 1.0, 42, 3);
  std::vector<std::size_t> expected(7);
  std::iota(expected.begin(), expected.end(), std::size_t{0});
  EXPECT_EQ(ids, expected);
}

TEST(SampleClients, TenPercentOfHundred) {
  auto ids = sample_clients(100, 0.1, 9, 0);
  ASSERT_EQ(ids.size(), 10u);
  EXPECT_TRUE(std::is_sorted(ids.begin(), ids.end()));
  EXPECT_EQ(std::adjacent_find(ids.begin(), ids.end()), ids.end());
  for (std::size_t id : ids) EXPECT_LT(id, 100u);
}

TEST(SampleClients, DeterministicGivenSeedAndRound) {
  EXPECT_EQ(sample_clients(50, 0.2, 77, 12), sample_clients(50, 0.2, 77, 12));
  EXPECT_NE(sample_clients(50, 0.2, 77, 12), sample_clients(50, 0.2, 77, 13));
  EXPECT_NE(sample_clients(50, 0.2, 77, 12), sample_clients(50, 0.2, 78, 12));
}

TEST(SampleClients, AtLeastOneClient) {
  EXPECT_EQ(sample_clients(5, 0.01, 1, 0).size(), 1u);
  EXPECT_THROW(sample_clients(5, 0.0, 1, 0), InvalidArgument);
  EXPECT_THROW(sample_clients(5, 1.5, 1, 0), InvalidArgument);
}

namespace {
ClientState make_client(std::size_t id, DenseMatrix u, DenseMatrix y, double rho) {
  ClientState c;
  c.id = id;
  c.U = std::move(u);
  c.Y = std::move(y);
  c.T = DenseMatrix(c.U.cols(), c.U.cols());
  c.S = DenseMatrix::identity(c.U.rows());
  c.rho = rho;
  return c;
}
}  // namespace

TEST(ConsensusUpdate, SingleClientZeroDual) {
  std::vector<ClientState> clients;
  clients.push_back(make_client(0, random_orthonormal(4, 2, 1).matrix(), DenseMatrix(4, 2), 1.0));
  DenseMatrix z = consensus_update(clients, {0});
  EXPECT_TRUE(bits_equal(z, clients[0].U));
}

TEST(ConsensusUpdate, HandAverage) {
  DenseMatrix e1(2, 1), e2(2, 1);
  e1(0, 0) = 1.0;
  e2(1, 0) = 1.0;
  std::vector<ClientState> clients;
  clients.push_back(make_client(0, e1, DenseMatrix(2, 1), 1.0));
  clients.push_back(make_client(1, e2, DenseMatrix(2, 1), 1.0));
  DenseMatrix z = consensus_update(clients, {0, 1});
  EXPECT_DOUBLE_EQ(z(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(z(1, 0), 0.5);
}

TEST(ConsensusUpdate, EmptySampleRejected) {
  std::vector<ClientState> clients;
  clients.push_back(make_client(0, DenseMatrix(2, 1), DenseMatrix(2, 1), 1.0));
  EXPECT_THROW(consensus_update(clients, {}), EmptySample);
}

TEST(DualUpdate, NoChangeAtConsensus) {
  ClientState c = make_client(0, random_orthonormal(3, 2, 5).matrix(), random_matrix(3, 2, 6), 2.0);
  DenseMatrix y_before = c.Y;
  dual_update(c, c.U, Algorithm::fedpg, 4);
  EXPECT_TRUE(bits_equal(c.Y, y_before));
  EXPECT_EQ(c.last_updated_round, 4);
}

TEST(DualUpdate, HandCase) {
  DenseMatrix u(2, 1), z(2, 1);
  u(0, 0) = 1.0;
  z(0, 0) = 0.5;
  z(1, 0) = 0.5;
  ClientState c = make_client(0, u, DenseMatrix(2, 1), 2.0);
  dual_update(c, z, Algorithm::fedpg, 0);
  EXPECT_DOUBLE_EQ(c.Y(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(c.Y(1, 0), -1.0);
}

TEST(DualUpdate, OrthonormalPrimalLeavesTUntouched) {
  DenseMatrix u(4, 2);
  u(0, 0) = 1.0;
  u(1, 1) = 1.0;  // exactly orthonormal -> h(U) is exactly zero
  ClientState c = make_client(0, u, DenseMatrix(4, 2), 1.5);
  c.T = random_matrix(2, 2, 9);
  DenseMatrix t_before = c.T;
  dual_update(c, random_matrix(4, 2, 10), Algorithm::fedpe, 1);
  EXPECT_TRUE(bits_equal(c.T, t_before));
}

TEST(AugmentedLagrangian, ConsensusPointEqualsObjectiveSum) {
  std::vector<ClientDataset> data = scaled_planted_clients(6, 2, 30, 3, 0.3, 81);
  Hyperparams hp = convergent_hp(2, 81);
  auto clients = init_clients(data, hp);
  DenseMatrix z = random_orthonormal(6, 2, 82).matrix();
  double expected = 0.0;
  for (auto& c : clients) {
    c.U = z;
    c.Y = DenseMatrix(6, 2);
    c.T = DenseMatrix(2, 2);
    expected += f_value(c.S, z);
  }
  EXPECT_NEAR(augmented_lagrangian(clients, z, Algorithm::fedpg), expected, 1e-12);
  EXPECT_NEAR(augmented_lagrangian(clients, z, Algorithm::fedpe), expected, 1e-12);
}

TEST(AugmentedLagrangian, SingleClientMatchesLocalValue) {
  std::vector<ClientDataset> data = scaled_planted_clients(5, 2, 20, 1, 0.4, 83);
  Hyperparams hp = convergent_hp(2, 83);
  auto clients = init_clients(data, hp);
  clients[0].Y = random_matrix(5, 2, 84);
  DenseMatrix z = random_orthonormal(5, 2, 85).matrix();
  LocalProblem p;
  p.S = clients[0].S;
  p.Y = clients[0].Y;
  p.T = clients[0].T;
  p.Z = z;
  p.rho = clients[0].rho;
  EXPECT_NEAR(augmented_lagrangian(clients, z, Algorithm::fedpg),
              fedpg_local_value(p, clients[0].U), 1e-12);
}

TEST(AugmentedLagrangian, MonotoneDecreaseUnderLargePenalty) {
  std::vector<ClientDataset> data = scaled_planted_clients(10, 2, 50, 3, 0.14, 13);
  Hyperparams hp = convergent_hp(2, 3);
  hp.local_iters = 50;
  auto clients = init_clients(data, hp);
  ServerState server = init_server(10, hp);
  double prev = 0.0;
  for (std::size_t r = 0; r < 150; ++r) {
    RoundRecord rec = run_round(server, clients, hp, r);
    if (r >= 3) {
      EXPECT_LE(rec.lagrangian, prev + 1e-9) << "round " << r;
    }
    prev = rec.lagrangian;
  }
}

TEST(StationarityGap, ZeroAtStationaryPoint) {
  // coordinate columns are exact top-k eigenvectors of a diagonal scatter, so
  // f's gradient vanishes identically and zero duals absorb the rest
  DenseMatrix s(4, 4);
  s(0, 0) = 5;
  s(1, 1) = 3;
  s(2, 2) = 1;
  s(3, 3) = 0.5;
  DenseMatrix u(4, 2);
  u(0, 0) = 1.0;
  u(1, 1) = 1.0;
  std::vector<ClientState> clients;
  clients.push_back(make_client(0, u, DenseMatrix(4, 2), 1.0));
  clients[0].S = s;
  EXPECT_LE(stationarity_gap(clients, u, Algorithm::fedpe), 1e-10);
  EXPECT_LE(stationarity_gap(clients, u, Algorithm::fedpg), 1e-10);

  // non-stationary primal, dual chosen to absorb the full gradient
  DenseMatrix s2 = testsupport::random_psd(4, 91);
  ClientState c2 = make_client(0, u, DenseMatrix(4, 2), 1.0);
  c2.S = s2;
  c2.Y = -1.0 * f_gradient(s2, u);
  std::vector<ClientState> v2;
  v2.push_back(std::move(c2));
  EXPECT_LE(stationarity_gap(v2, u, Algorithm::fedpe), 1e-10);
}

TEST(StationarityGap, SingleClientReducesToGradientNorm) {
  DenseMatrix s = testsupport::random_psd(5, 93);
  DenseMatrix u = random_orthonormal(5, 2, 94).matrix();
  std::vector<ClientState> clients;
  clients.push_back(make_client(0, u, DenseMatrix(5, 2), 1.0));
  clients[0].S = s;
  const double g = frobenius_norm(f_gradient(s, u));
  EXPECT_NEAR(stationarity_gap(clients, u, Algorithm::fedpe), g * g, 1e-9 * std::max(1.0, g * g));
}

TEST(RunRound, SingleClientCompositionMatchesManualSteps) {
  std::vector<ClientDataset> data = scaled_planted_clients(6, 2, 40, 1, 0.3, 51);
  Hyperparams hp = convergent_hp(2, 7);
  auto clients = init_clients(data, hp);
  ServerState server = init_server(6, hp);

  // manual replication with the public operations
  LocalProblem p;
  p.S = clients[0].S;
  p.Y = clients[0].Y;
  p.T = clients[0].T;
  p.Z = server.Z;
  p.rho = clients[0].rho;
  p.eta = hp.eta;
  p.local_iters = hp.local_iters;
  DenseMatrix u_expected = solve_local_fedpg(p, Basis(clients[0].U)).matrix();
  std::vector<ClientState> manual;
  manual.push_back(make_client(0, u_expected, clients[0].Y, clients[0].rho));
  DenseMatrix z_expected = consensus_update(manual, {0});
  dual_update(manual[0], z_expected, Algorithm::fedpg, 0);

  run_round(server, clients, hp, 0);
  EXPECT_TRUE(bits_equal(clients[0].U, u_expected));
  EXPECT_TRUE(bits_equal(server.Z, z_expected));
  EXPECT_TRUE(bits_equal(clients[0].Y, manual[0].Y));
}

TEST(RunRound, UnsampledClientsBitIdentical) {
  std::vector<ClientDataset> data = scaled_planted_clients(6, 2, 20, 10, 0.3, 53);
  Hyperparams hp = convergent_hp(2, 15);
  hp.sample_fraction = 0.1;  // exactly one client per round
  auto clients = init_clients(data, hp);
  ServerState server = init_server(6, hp);
  std::vector<ClientState> before = clients;
  RoundRecord rec = run_round(server, clients, hp, 0);
  ASSERT_EQ(rec.sampled.size(), 1u);
  for (std::size_t i = 0; i < clients.size(); ++i) {
    if (i == rec.sampled[0]) continue;
    EXPECT_TRUE(bits_equal(clients[i].U, before[i].U)) << i;
    EXPECT_TRUE(bits_equal(clients[i].Y, before[i].Y)) << i;
    EXPECT_TRUE(bits_equal(clients[i].T, before[i].T)) << i;
    EXPECT_EQ(clients[i].last_updated_round, before[i].last_updated_round) << i;
  }
  EXPECT_EQ(clients[rec.sampled[0]].last_updated_round, 0);
}

TEST(RunRound, FullParticipationDualSumVanishes) {
  std::vector<ClientDataset> data = scaled_planted_clients(8, 2, 30, 4, 0.25, 57);
  Hyperparams hp = convergent_hp(2, 19);
  auto clients = init_clients(data, hp);
  ServerState server = init_server(8, hp);
  for (std::size_t r = 0; r < 3; ++r) {
    run_round(server, clients, hp, r);
    DenseMatrix y_sum(8, 2);
    double y_scale = 0.0;
    for (const auto& c : clients) {
      y_sum += c.Y;
      y_scale += frobenius_norm(c.Y);
    }
    EXPECT_LE(frobenius_norm(y_sum), 1e-8 * std::max(1.0, y_scale)) << "round " << r;
  }
  // with duals summing to zero, the next consensus equals the plain mean of
  // the updated primals
  run_round(server, clients, hp, 3);
  DenseMatrix mean_u(8, 2);
  for (const auto& c : clients) mean_u += c.U;
  mean_u *= 1.0 / static_cast<double>(clients.size());
  EXPECT_LE(frobenius_norm(server.Z - mean_u), 1e-8);
}

TEST(RunTraining, DeterministicAcrossRunsAndThreadCounts) {
  std::vector<ClientDataset> data = scaled_planted_clients(8, 2, 30, 6, 0.25, 61);
  Hyperparams hp = convergent_hp(2, 31);
  hp.rounds = 25;
  hp.sample_fraction = 0.5;

  TrainingResult a = run_training(data, hp);
  TrainingResult b = run_training(data, hp);
  Hyperparams hp_par = hp;
  hp_par.threads = 8;
  TrainingResult c = run_training(data, hp_par);

  ASSERT_EQ(a.history.size(), b.history.size());
  ASSERT_EQ(a.history.size(), c.history.size());
  EXPECT_TRUE(bits_equal(a.consensus.matrix(), b.consensus.matrix()));
  EXPECT_TRUE(bits_equal(a.consensus.matrix(), c.consensus.matrix()));
  for (std::size_t r = 0; r < a.history.size(); ++r) {
    EXPECT_EQ(a.history[r].sampled, b.history[r].sampled);
    EXPECT_EQ(a.history[r].sampled, c.history[r].sampled);
    EXPECT_EQ(a.history[r].lagrangian, b.history[r].lagrangian);
    EXPECT_EQ(a.history[r].lagrangian, c.history[r].lagrangian);
    EXPECT_EQ(a.history[r].consensus_residual, c.history[r].consensus_residual);
    EXPECT_EQ(a.history[r].stationarity_gap, c.history[r].stationarity_gap);
  }
}

TEST(RunTraining, SingleClientMatchesCentralizedOracle) {
  std::vector<ClientDataset> data = scaled_planted_clients(8, 2, 100, 1, 0.2, 63);
  Hyperparams hp;
  hp.k = 2;
  hp.rho = 1.0;
  hp.eta = 0.01;
  hp.local_iters = 10;
  hp.rounds = 150;
  hp.sample_fraction = 1.0;
  hp.seed = 33;
  hp.algorithm = Algorithm::fedpg;
  TrainingResult res = run_training(data, hp);
  PcaModel oracle = fit_centralized(data[0].features, 2);
  EXPECT_LE(chordal_distance(res.consensus, oracle.basis), 1e-2);
}

TEST(RunTraining, ConsensusResidualConvergesOnSharedSubspace) {
  std::vector<ClientDataset> data = scaled_planted_clients(10, 2, 60, 3, 0.15, 67);
  Hyperparams hp = convergent_hp(2, 37);
  TrainingResult res = run_training(data, hp);
  const auto& h = res.history;
  EXPECT_LT(h.back().consensus_residual, 1e-4);
  EXPECT_LT(h.back().stationarity_gap, 1e-4);
  for (std::size_t r = 30; r < h.size(); ++r)
    EXPECT_LE(h[r].consensus_residual, h[r - 20].consensus_residual + 1e-12) << "round " << r;
}

TEST(RunTraining, FedpeAlsoConvergesAndIsOrthonormalized) {
  std::vector<ClientDataset> data = scaled_planted_clients(8, 2, 40, 3, 0.2, 69);
  Hyperparams hp = convergent_hp(2, 41);
  hp.algorithm = Algorithm::fedpe;
  hp.eta = 5e-3;
  hp.local_iters = 50;
  hp.rounds = 300;
  TrainingResult res = run_training(data, hp);
  EXPECT_LE(res.consensus.orthonormality_defect(), 1e-10);
  EXPECT_LT(res.history.back().consensus_residual, 1e-2);
}

TEST(RunTraining, Lemma1DualDifferenceBound) {
  // near-exact local solves (large C); the dual-step bound then holds with a
  // slack proportional to the residual local gradient
  std::vector<ClientDataset> data = scaled_planted_clients(12, 2, 100, 3, 0.15, 71);
  Hyperparams hp = convergent_hp(2, 23);
  hp.local_iters = 200;
  auto clients = init_clients(data, hp);
  ServerState server = init_server(12, hp);
  std::vector<LipschitzEstimator> lip(clients.size());
  std::vector<DenseMatrix> prev_u, prev_y;
  for (const auto& c : clients) {
    prev_u.push_back(c.U);
    prev_y.push_back(c.Y);
  }
  for (std::size_t r = 0; r < 60; ++r) {
    run_round(server, clients, hp, r);
    for (std::size_t i = 0; i < clients.size(); ++i) {
      lip[i].observe(clients[i].U, f_gradient(clients[i].S, clients[i].U));
      const double dy = frobenius_norm(clients[i].Y - prev_y[i]);
      const double du = frobenius_norm(clients[i].U - prev_u[i]);
      LocalProblem p;
      p.S = clients[i].S;
      p.Y = clients[i].Y;
      p.T = clients[i].T;
      p.Z = server.Z;
      p.rho = clients[i].rho;
      const double local_grad = frobenius_norm(project_tangent_orthogonality(
          Basis(clients[i].U), fedpg_euclidean_grad(p, clients[i].U)));
      if (r >= 3) {
        EXPECT_LE(dy, lip[i].value() * du + 100.0 * local_grad + 1e-9)
            << "round " << r << " client " << i;
      }
      prev_u[i] = clients[i].U;
      prev_y[i] = clients[i].Y;
    }
  }
}

TEST(Hyperparams, ValidationCatchesBadValues) {
  Hyperparams hp;
  hp.rho = -1.0;
  EXPECT_THROW(hp.validate(), InvalidArgument);
  hp = Hyperparams{};
  hp.sample_fraction = 0.0;
  EXPECT_THROW(hp.validate(), InvalidArgument);
  hp = Hyperparams{};
  hp.rounds = 0;
  EXPECT_THROW(hp.validate(), InvalidArgument);
  EXPECT_NO_THROW(Hyperparams{}.validate());
}

TEST(InitClients, RejectsBadInputs) {
  Hyperparams hp = convergent_hp(5, 1);
  std::vector<ClientDataset> empty;
  EXPECT_THROW(init_clients(empty, hp), InvalidArgument);

  std::vector<ClientDataset> data = scaled_planted_clients(3, 1, 10, 1, 1.0, 73);
  EXPECT_THROW(init_clients(data, hp), InvalidArgument);  // k=5 > d=3
}
