#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "grasspca/data.hpp"
#include "grasspca/errors.hpp"
#include "grasspca/linalg.hpp"
#include "grasspca/matrix.hpp"
#include "grasspca/objectives.hpp"
#include "grasspca/rng.hpp"

namespace grasspca {

enum class Algorithm { fedpe, fedpg };

inline std::string to_string(Algorithm a) { return a == Algorithm::fedpe ? "fedpe" : "fedpg"; }

struct Hyperparams {
  std::size_t k = 5;
  double rho = 1.0;
  double eta = 0.01;
  std::size_t local_iters = 10;   // C
  std::size_t rounds = 300;       // T
  double sample_fraction = 0.1;
  std::uint64_t seed = 1;
  Algorithm algorithm = Algorithm::fedpg;
  std::size_t threads = 1;        // intra-round parallelism for local solves

  void validate() const {
    if (rho <= 0.0) throw InvalidArgument("hyperparams: rho must be > 0");
    if (eta <= 0.0) throw InvalidArgument("hyperparams: eta must be > 0");
    if (local_iters == 0) throw InvalidArgument("hyperparams: local_iters must be >= 1");
    if (rounds == 0) throw InvalidArgument("hyperparams: rounds must be >= 1");
    if (!(sample_fraction > 0.0 && sample_fraction <= 1.0))
      throw InvalidArgument("hyperparams: sample_fraction must be in (0, 1]");
    if (k == 0) throw InvalidArgument("hyperparams: k must be >= 1");
  }
};

struct ClientState {
  std::size_t id = 0;
  ClientDataset data;
  DenseMatrix S;  // scatter X·Xᵀ, computed once
  DenseMatrix U;  // d×k primal
  DenseMatrix Y;  // d×k consensus dual
  DenseMatrix T;  // k×k orthonormality dual (Euclidean variant only)
  double rho = 1.0;
  std::int64_t last_updated_round = -1;
};

struct ServerState {
  DenseMatrix Z;
  std::size_t round = 0;
};

struct RoundRecord {
  std::size_t round = 0;
  std::vector<std::size_t> sampled;
  double lagrangian = 0.0;
  double consensus_residual = 0.0;  // Σ_i ‖U_i − Z‖_F²
  double stationarity_gap = 0.0;
  double wall_time = 0.0;           // seconds, physical measurement
};

// max(1, round(fraction·n)) distinct ids, uniform without replacement, fully
// determined by (seed, round); sorted ascending.
inline std::vector<std::size_t> sample_clients(std::size_t n_clients, double fraction,
                                               std::uint64_t seed, std::size_t round) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw InvalidArgument("sample_clients: fraction must be in (0, 1]");
  if (n_clients == 0) throw InvalidArgument("sample_clients: no clients");
  std::size_t m = static_cast<std::size_t>(
      std::llround(fraction * static_cast<double>(n_clients)));
  m = std::clamp<std::size_t>(m, 1, n_clients);

  CounterRng rng(rng_key(seed, streams::kClientSampling, round));
  std::vector<std::size_t> ids(n_clients);
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t j = i + rng.next_below(n_clients - i);
    std::swap(ids[i], ids[j]);
  }
  ids.resize(m);
  std::sort(ids.begin(), ids.end());
  return ids;
}

// Z = (1/|S|)·Σ_{i∈S} (U_i + Y_i/ρ_i), accumulated in ascending client-id
// order for bitwise-reproducible sums.
inline DenseMatrix consensus_update(const std::vector<ClientState>& clients,
                                    const std::vector<std::size_t>& sampled) {
  if (sampled.empty()) throw EmptySample("consensus_update: empty sample");
  std::vector<std::size_t> order = sampled;
  std::sort(order.begin(), order.end());
  DenseMatrix z(clients[order[0]].U.rows(), clients[order[0]].U.cols());
  for (std::size_t id : order) {
    const ClientState& c = clients[id];
    z += c.U;
    z += (1.0 / c.rho) * c.Y;
  }
  z *= 1.0 / static_cast<double>(order.size());
  return z;
}

// Y ← Y + ρ(U − Z); the Euclidean variant additionally runs the
// orthonormality dual T ← T + ρ·h(U).
inline void dual_update(ClientState& client, const DenseMatrix& z, Algorithm algorithm,
                        std::int64_t round) {
  client.Y += client.rho * (client.U - z);
  if (algorithm == Algorithm::fedpe) client.T += client.rho * h_constraint(client.U);
  client.last_updated_round = round;
}

namespace detail {
inline LocalProblem make_local_problem(const ClientState& c, const DenseMatrix& z,
                                       const Hyperparams& hp) {
  LocalProblem p;
  p.S = c.S;
  p.Y = c.Y;
  p.T = c.T;
  p.Z = z;
  p.rho = c.rho;
  p.eta = hp.eta;
  p.local_iters = hp.local_iters;
  return p;
}
}  // namespace detail

// Full augmented Lagrangian over ALL clients at the given consensus point.
inline double augmented_lagrangian(const std::vector<ClientState>& clients, const DenseMatrix& z,
                                   Algorithm algorithm) {
  double total = 0.0;
  for (const ClientState& c : clients) {
    DenseMatrix diff = c.U - z;
    const double dn = frobenius_norm(diff);
    total += f_value(c.S, c.U) + frobenius_inner(c.Y, diff) + 0.5 * c.rho * dn * dn;
    if (algorithm == Algorithm::fedpe) {
      DenseMatrix h = h_constraint(c.U);
      const double hn = frobenius_norm(h);
      total += frobenius_inner(c.T, h) + 0.5 * c.rho * hn * hn;
    }
  }
  return total;
}

// Progress measure P: consensus residual plus the squared norm of the stacked
// per-client Lagrangian gradients. For the manifold variant the per-client
// gradient is measured in the tangent space at U_i, the space the local
// solver actually works in.
inline double stationarity_gap(const std::vector<ClientState>& clients, const DenseMatrix& z,
                               Algorithm algorithm) {
  double total = 0.0;
  for (const ClientState& c : clients) {
    const double dn = frobenius_norm(c.U - z);
    total += dn * dn;
    LocalProblem p;
    p.S = c.S;
    p.Y = c.Y;
    p.T = c.T;
    p.Z = z;
    p.rho = c.rho;
    double gn;
    if (algorithm == Algorithm::fedpe) {
      gn = frobenius_norm(fedpe_local_grad(p, c.U));
    } else {
      gn = frobenius_norm(
          project_tangent_orthogonality(Basis(c.U), fedpg_euclidean_grad(p, c.U)));
    }
    total += gn * gn;
  }
  return total;
}

inline double consensus_residual(const std::vector<ClientState>& clients, const DenseMatrix& z) {
  double total = 0.0;
  for (const ClientState& c : clients) {
    const double dn = frobenius_norm(c.U - z);
    total += dn * dn;
  }
  return total;
}

// Running estimate L̂ = max ‖∇f(U) − ∇f(U')‖/‖U − U'‖ over observed iterate
// pairs; diagnostics only, never control flow.
class LipschitzEstimator {
 public:
  void observe(const DenseMatrix& u, const DenseMatrix& grad) {
    if (has_prev_) {
      const double du = frobenius_norm(u - prev_u_);
      if (du > 1e-12) estimate_ = std::max(estimate_, frobenius_norm(grad - prev_grad_) / du);
    }
    prev_u_ = u;
    prev_grad_ = grad;
    has_prev_ = true;
  }
  double value() const { return estimate_; }

 private:
  DenseMatrix prev_u_, prev_grad_;
  double estimate_ = 0.0;
  bool has_prev_ = false;
};

// One communication round: sample, solve local problems (possibly in
// parallel; results are schedule-independent), recompute the consensus from
// the sampled set, run dual updates on the sampled clients, leave everyone
// else untouched.
inline RoundRecord run_round(ServerState& server, std::vector<ClientState>& clients,
                             const Hyperparams& hp, std::size_t round) {
  const auto started = std::chrono::steady_clock::now();
  const std::vector<std::size_t> sampled =
      sample_clients(clients.size(), hp.sample_fraction, hp.seed, round);

  std::vector<DenseMatrix> solved(sampled.size());
  std::vector<std::string> failures(sampled.size());
  auto solve_one = [&](std::size_t slot) {
    const ClientState& c = clients[sampled[slot]];
    LocalProblem p = detail::make_local_problem(c, server.Z, hp);
    try {
      if (hp.algorithm == Algorithm::fedpg)
        solved[slot] = solve_local_fedpg(p, Basis(c.U)).matrix();
      else
        solved[slot] = solve_local_fedpe(p, c.U);
    } catch (const Error& e) {
      failures[slot] = e.what();
    }
  };

  const std::size_t workers = std::min<std::size_t>(std::max<std::size_t>(hp.threads, 1),
                                                    sampled.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < sampled.size(); ++i) solve_one(i);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::atomic<std::size_t> next{0};
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < sampled.size(); i = next.fetch_add(1))
          solve_one(i);
      });
    for (std::thread& t : pool) t.join();
  }
  for (std::size_t i = 0; i < sampled.size(); ++i)
    if (!failures[i].empty())
      throw Divergence("round " + std::to_string(round) + ", client " +
                       std::to_string(sampled[i]) + ": " + failures[i]);

  for (std::size_t i = 0; i < sampled.size(); ++i) clients[sampled[i]].U = std::move(solved[i]);

  server.Z = consensus_update(clients, sampled);
  server.round = round;
  for (std::size_t id : sampled)
    dual_update(clients[id], server.Z, hp.algorithm, static_cast<std::int64_t>(round));

  RoundRecord rec;
  rec.round = round;
  rec.sampled = sampled;
  rec.lagrangian = augmented_lagrangian(clients, server.Z, hp.algorithm);
  rec.consensus_residual = consensus_residual(clients, server.Z);
  rec.stationarity_gap = stationarity_gap(clients, server.Z, hp.algorithm);
  rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return rec;
}

// Seeded Gaussian inits orthonormalized by QR; duals start at zero so the
// first consensus average is already meaningful.
inline std::vector<ClientState> init_clients(const std::vector<ClientDataset>& datasets,
                                             const Hyperparams& hp) {
  if (datasets.empty()) throw InvalidArgument("init_clients: no client datasets");
  const std::size_t d = datasets[0].features.rows();
  if (hp.k > d)
    throw InvalidArgument("init_clients: k = " + std::to_string(hp.k) + " exceeds d = " +
                          std::to_string(d));
  std::vector<ClientState> clients;
  clients.reserve(datasets.size());
  for (const ClientDataset& ds : datasets) {
    if (ds.features.cols() == 0)
      throw TooFewSamples("init_clients: client " + std::to_string(ds.id) + " is empty");
    if (ds.features.rows() != d)
      throw DimensionMismatch("init_clients: client " + std::to_string(ds.id) +
                              " has mismatched feature dimension");
    ClientState c;
    c.id = ds.id;
    c.data = ds;
    c.S = gram(ds.features);
    CounterRng rng(rng_key(hp.seed, streams::kInitClient, ds.id));
    c.U = orthonormalize_with_recovery(DenseMatrix::gaussian(d, hp.k, rng), hp.seed).matrix();
    c.Y = DenseMatrix(d, hp.k);
    c.T = DenseMatrix(hp.k, hp.k);
    c.rho = hp.rho;
    clients.push_back(std::move(c));
  }
  return clients;
}

inline ServerState init_server(std::size_t d, const Hyperparams& hp) {
  CounterRng rng(rng_key(hp.seed, streams::kInitConsensus));
  ServerState s;
  s.Z = orthonormalize_with_recovery(DenseMatrix::gaussian(d, hp.k, rng), hp.seed).matrix();
  return s;
}

struct TrainingResult {
  Basis consensus;  // orthonormalized final Z
  std::vector<RoundRecord> history;
};

inline TrainingResult run_training(const std::vector<ClientDataset>& datasets,
                                   const Hyperparams& hp) {
  hp.validate();
  std::vector<ClientState> clients = init_clients(datasets, hp);
  ServerState server = init_server(datasets[0].features.rows(), hp);
  TrainingResult result;
  result.history.reserve(hp.rounds);
  for (std::size_t round = 0; round < hp.rounds; ++round)
    result.history.push_back(run_round(server, clients, hp, round));
  // The Euclidean variant's consensus is only approximately orthonormal;
  // reconstruction scoring needs a true projector, so orthonormalize here.
  result.consensus = orthonormalize_with_recovery(server.Z, hp.seed);
  return result;
}

}  // namespace grasspca
