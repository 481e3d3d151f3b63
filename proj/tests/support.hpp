#pragma once

// Shared test fixtures and independent oracles. Everything here is
// deliberately implemented without touching the library code paths it is
// used to check.

#include <unistd.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "grasspca/linalg.hpp"
#include "grasspca/matrix.hpp"
#include "grasspca/rng.hpp"

namespace testsupport {

class TempDir {
 public:
  TempDir() {
    path_ = std::filesystem::temp_directory_path() /
            ("grasspca_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter_++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }
  std::string path() const { return path_.string(); }

 private:
  static inline int counter_ = 0;
  std::filesystem::path path_;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return content;
}

using grasspca::Basis;
using grasspca::CounterRng;
using grasspca::DenseMatrix;

inline DenseMatrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  CounterRng rng(grasspca::rng_key(seed));
  return DenseMatrix::gaussian(rows, cols, rng);
}

inline DenseMatrix random_psd(std::size_t n, std::uint64_t seed) {
  DenseMatrix g = random_matrix(n, n + 2, seed);
  return grasspca::gram(g);
}

inline Basis random_orthonormal(std::size_t d, std::size_t k, std::uint64_t seed) {
  return grasspca::qr_thin(random_matrix(d, k, seed)).q;
}

// Full symmetric eigendecomposition oracle: repeated power iteration with
// deflation, independent of the library's subspace-iteration path.
inline std::pair<std::vector<double>, DenseMatrix> deflation_eig(DenseMatrix work) {
  const std::size_t n = work.rows();
  std::vector<double> vals(n);
  DenseMatrix vecs(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    CounterRng rng(grasspca::rng_key(0xDEF1A7E, j));
    std::vector<double> v(n);
    for (double& x : v) x = rng.gaussian();
    double lambda = 0.0;
    for (int it = 0; it < 200000; ++it) {
      // power step on work + I so the dominant remaining eigenvalue stays positive
      std::vector<double> w(n, 0.0);
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) w[r] += work(r, c) * v[c];
      for (std::size_t r = 0; r < n; ++r) w[r] += v[r];
      double norm = 0.0;
      for (double x : w) norm += x * x;
      norm = std::sqrt(norm);
      for (std::size_t r = 0; r < n; ++r) v[r] = w[r] / norm;
      double ray = 0.0;
      std::vector<double> sv(n, 0.0);
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) sv[r] += work(r, c) * v[c];
      for (std::size_t r = 0; r < n; ++r) ray += v[r] * sv[r];
      double resid = 0.0;
      for (std::size_t r = 0; r < n; ++r) resid += (sv[r] - ray * v[r]) * (sv[r] - ray * v[r]);
      lambda = ray;
      if (std::sqrt(resid) <= 1e-13 * std::max(1.0, std::abs(ray))) break;
    }
    vals[j] = lambda;
    for (std::size_t r = 0; r < n; ++r) vecs(r, j) = v[r];
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < n; ++c) work(r, c) -= lambda * v[r] * v[c];
  }
  return {std::move(vals), std::move(vecs)};
}

// Central finite-difference gradient of a scalar function of a matrix.
inline DenseMatrix finite_difference_gradient(const std::function<double(const DenseMatrix&)>& f,
                                              const DenseMatrix& u, double step = 1e-6) {
  DenseMatrix g(u.rows(), u.cols());
  DenseMatrix probe = u;
  for (std::size_t i = 0; i < u.rows(); ++i) {
    for (std::size_t j = 0; j < u.cols(); ++j) {
      const double orig = probe(i, j);
      probe(i, j) = orig + step;
      const double fp = f(probe);
      probe(i, j) = orig - step;
      const double fm = f(probe);
      probe(i, j) = orig;
      g(i, j) = (fp - fm) / (2.0 * step);
    }
  }
  return g;
}

// AUC oracle: exhaustive pair counting, Pr(pos > neg) + 0.5·Pr(pos == neg).
inline double pair_count_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  double wins = 0.0;
  std::size_t pos = 0, neg = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    ++pos;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      if (scores[i] > scores[j])
        wins += 1.0;
      else if (scores[i] == scores[j])
        wins += 0.5;
    }
  }
  for (int l : labels) neg += (l == 0);
  return wins / (static_cast<double>(pos) * static_cast<double>(neg));
}

// Average-precision oracle: brute-force sweep over every distinct score,
// confusion counts recomputed from scratch at each threshold.
inline double brute_force_ap(const std::vector<double>& scores, const std::vector<int>& labels) {
  std::vector<double> distinct = scores;
  std::sort(distinct.begin(), distinct.end(), std::greater<>());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  std::size_t total_pos = 0;
  for (int l : labels) total_pos += (l == 1);
  double ap = 0.0;
  double prev_recall = 0.0;
  for (double t : distinct) {
    // predict anomaly iff score >= t (include the group at t)
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores[i] >= t) {
        if (labels[i] == 1)
          ++tp;
        else
          ++fp;
      }
    }
    const double recall = static_cast<double>(tp) / static_cast<double>(total_pos);
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return ap;
}

}  // namespace testsupport
