#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "grasspca/errors.hpp"
#include "grasspca/linalg.hpp"
#include "grasspca/matrix.hpp"
#include "grasspca/rng.hpp"

namespace grasspca {

// Samples are matrix COLUMNS: features is d×n for n samples of d features.
struct Dataset {
  DenseMatrix features;
  std::optional<std::vector<int>> labels;  // 0 normal, 1 anomaly
  std::vector<std::string> feature_names;

  std::size_t n_samples() const { return features.cols(); }
  std::size_t n_features() const { return features.rows(); }
};

struct LoadSummary {
  std::size_t rows_kept = 0;
  std::size_t rows_dropped = 0;
};

struct ClientDataset {
  std::size_t id = 0;
  DenseMatrix features;  // d×n_i
};

enum class PartitionStrategy { grouped_quantile, uniform_shards };

struct PartitionSpec {
  std::size_t n_clients = 1;
  std::string group_feature;  // required for grouped_quantile
  PartitionStrategy strategy = PartitionStrategy::uniform_shards;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline bool parse_double(const std::string& cell, double& out) {
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
  while (end > begin && (end[-1] == ' ' || end[-1] == '\t' || end[-1] == '\r')) --end;
  if (begin == end) return false;
  auto [ptr, ec] = std::from_chars(begin, end, out);
  if (ec != std::errc() || ptr != end) return false;
  return std::isfinite(out);
}

inline void format_double(char* buf, std::size_t n, double v) {
  std::snprintf(buf, n, "%.17g", v);
}

}  // namespace detail

// Comma-separated, header row, one sample per row. Rows with any
// non-finite or unparseable cell are dropped and counted in the summary;
// label cells must be exactly 0 or 1.
inline Dataset load_csv(const std::string& path,
                        const std::optional<std::string>& label_column = std::nullopt,
                        LoadSummary* summary = nullptr) {
  std::ifstream in(path);
  if (!in) throw MissingFile("load_csv: cannot open " + path);

  std::string line;
  if (!std::getline(in, line) || line.empty())
    throw HeaderMismatch("load_csv: " + path + " has no header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> header = detail::split_csv_line(line);

  std::size_t label_index = header.size();
  if (label_column) {
    auto it = std::find(header.begin(), header.end(), *label_column);
    if (it == header.end())
      throw HeaderMismatch("load_csv: label column '" + *label_column + "' not found in " + path);
    label_index = static_cast<std::size_t>(it - header.begin());
  }

  std::vector<std::string> feature_names;
  for (std::size_t c = 0; c < header.size(); ++c)
    if (c != label_index) feature_names.push_back(header[c]);
  const std::size_t d = feature_names.size();
  if (d == 0) throw HeaderMismatch("load_csv: " + path + " has no feature columns");

  std::vector<double> values;  // kept samples, d values each
  std::vector<int> labels;
  std::size_t dropped = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells = detail::split_csv_line(line);
    if (cells.size() != header.size()) {
      ++dropped;
      continue;
    }
    std::vector<double> row(d);
    int label = 0;
    bool ok = true;
    std::size_t f = 0;
    for (std::size_t c = 0; c < cells.size() && ok; ++c) {
      double v;
      if (!detail::parse_double(cells[c], v)) {
        ok = false;
        break;
      }
      if (c == label_index) {
        if (v != 0.0 && v != 1.0) {
          ok = false;
          break;
        }
        label = static_cast<int>(v);
      } else {
        row[f++] = v;
      }
    }
    if (!ok) {
      ++dropped;
      continue;
    }
    values.insert(values.end(), row.begin(), row.end());
    if (label_column) labels.push_back(label);
  }

  const std::size_t n = values.size() / d;
  if (n == 0) throw EmptyAfterFiltering("load_csv: no usable rows in " + path);
  if (summary) {
    summary->rows_kept = n;
    summary->rows_dropped = dropped;
  }

  Dataset ds;
  ds.features = DenseMatrix(d, n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < d; ++i) ds.features(i, j) = values[j * d + i];
  if (label_column) ds.labels = std::move(labels);
  ds.feature_names = std::move(feature_names);
  return ds;
}

// Inverse of load_csv: 17 significant digits, so finite doubles round-trip
// bit-exactly.
inline void save_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw MissingFile("save_csv: cannot open " + path + " for writing");
  for (std::size_t c = 0; c < ds.feature_names.size(); ++c) {
    if (c) out << ',';
    out << ds.feature_names[c];
  }
  if (ds.labels) out << (ds.feature_names.empty() ? "" : ",") << "label";
  out << '\n';
  char buf[64];
  for (std::size_t j = 0; j < ds.n_samples(); ++j) {
    for (std::size_t i = 0; i < ds.n_features(); ++i) {
      if (i) out << ',';
      detail::format_double(buf, sizeof buf, ds.features(i, j));
      out << buf;
    }
    if (ds.labels) out << ',' << (*ds.labels)[j];
    out << '\n';
  }
}

// Splits a training set into per-client datasets. grouped_quantile sorts by
// the grouping feature and cuts contiguous blocks (non-i.i.d. by
// construction); uniform_shards is a seeded shuffle then an equal split.
// Either way the result is a disjoint cover with sizes differing by at most
// one.
inline std::vector<ClientDataset> partition(const Dataset& ds, const PartitionSpec& spec,
                                            std::uint64_t seed) {
  const std::size_t n = ds.n_samples();
  if (spec.n_clients == 0) throw InvalidArgument("partition: n_clients must be >= 1");
  if (n < spec.n_clients)
    throw TooFewSamples("partition: " + std::to_string(n) + " samples cannot cover " +
                        std::to_string(spec.n_clients) + " clients");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (spec.strategy == PartitionStrategy::grouped_quantile) {
    auto it = std::find(ds.feature_names.begin(), ds.feature_names.end(), spec.group_feature);
    if (it == ds.feature_names.end())
      throw HeaderMismatch("partition: group feature '" + spec.group_feature + "' not present");
    const std::size_t g = static_cast<std::size_t>(it - ds.feature_names.begin());
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return ds.features(g, a) < ds.features(g, b);
    });
  } else {
    CounterRng rng(rng_key(seed, streams::kShuffle));
    for (std::size_t i = n - 1; i > 0; --i) {
      const std::size_t j = rng.next_below(i + 1);
      std::swap(order[i], order[j]);
    }
  }

  const std::size_t base = n / spec.n_clients;
  const std::size_t extra = n % spec.n_clients;
  std::vector<ClientDataset> clients;
  clients.reserve(spec.n_clients);
  std::size_t cursor = 0;
  for (std::size_t c = 0; c < spec.n_clients; ++c) {
    const std::size_t size = base + (c < extra ? 1 : 0);
    ClientDataset cd;
    cd.id = c;
    cd.features = DenseMatrix(ds.n_features(), size);
    for (std::size_t j = 0; j < size; ++j) {
      const std::size_t src = order[cursor + j];
      for (std::size_t i = 0; i < ds.n_features(); ++i) cd.features(i, j) = ds.features(i, src);
    }
    cursor += size;
    clients.push_back(std::move(cd));
  }
  return clients;
}

struct SyntheticData {
  std::vector<ClientDataset> train_clients;
  Dataset test;  // labeled
  Basis planted;
};

// Desk-scale generator with a planted k-dimensional subspace. Normals are
// planted·g + σ·ε; anomalies additionally move anomaly_scale along a unit
// direction orthogonal to the planted subspace. The planted basis is returned
// as an oracle. Test set has one client's worth of samples.
inline SyntheticData synth_generate(std::size_t d, std::size_t k, std::size_t n_per_client,
                                    std::size_t n_clients, double noise_sigma,
                                    double anomaly_fraction, double anomaly_scale,
                                    std::uint64_t seed) {
  if (k >= d) throw InvalidArgument("synth_generate: need k < d");
  if (!(anomaly_fraction >= 0.0 && anomaly_fraction < 1.0))
    throw InvalidArgument("synth_generate: anomaly_fraction must be in [0, 1)");

  CounterRng planted_rng(rng_key(seed, streams::kSynthPlanted));
  Basis planted = orthonormalize_with_recovery(DenseMatrix::gaussian(d, k, planted_rng), seed);

  auto draw_normal_sample = [&](CounterRng& rng, std::vector<double>& x) {
    std::vector<double> g(k);
    for (double& v : g) v = rng.gaussian();
    for (std::size_t i = 0; i < d; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < k; ++j) acc += planted.matrix()(i, j) * g[j];
      x[i] = acc + noise_sigma * rng.gaussian();
    }
  };

  SyntheticData out;
  out.planted = planted;
  out.train_clients.reserve(n_clients);
  std::vector<double> x(d);
  for (std::size_t c = 0; c < n_clients; ++c) {
    CounterRng rng(rng_key(seed, streams::kSynthTrain, c));
    ClientDataset cd;
    cd.id = c;
    cd.features = DenseMatrix(d, n_per_client);
    for (std::size_t j = 0; j < n_per_client; ++j) {
      draw_normal_sample(rng, x);
      cd.features.set_column(j, x);
    }
    out.train_clients.push_back(std::move(cd));
  }

  const std::size_t n_test = n_per_client;
  const std::size_t n_anom = static_cast<std::size_t>(
      std::llround(anomaly_fraction * static_cast<double>(n_test)));
  CounterRng rng(rng_key(seed, streams::kSynthTest));
  out.test.features = DenseMatrix(d, n_test);
  out.test.labels = std::vector<int>(n_test, 0);
  out.test.feature_names.resize(d);
  for (std::size_t i = 0; i < d; ++i) out.test.feature_names[i] = "f" + std::to_string(i);
  for (std::size_t j = 0; j < n_test; ++j) {
    draw_normal_sample(rng, x);
    if (j < n_anom) {
      // unit direction with the planted-subspace component projected out
      std::vector<double> w(d);
      for (double& v : w) v = rng.gaussian();
      std::vector<double> coeff(k, 0.0);
      for (std::size_t jj = 0; jj < k; ++jj)
        for (std::size_t i = 0; i < d; ++i) coeff[jj] += planted.matrix()(i, jj) * w[i];
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t jj = 0; jj < k; ++jj) w[i] -= planted.matrix()(i, jj) * coeff[jj];
      double norm = 0.0;
      for (double v : w) norm += v * v;
      norm = std::sqrt(norm);
      for (std::size_t i = 0; i < d; ++i) x[i] += anomaly_scale * w[i] / norm;
      (*out.test.labels)[j] = 1;
    }
    out.test.features.set_column(j, x);
  }
  return out;
}

}  // namespace grasspca
