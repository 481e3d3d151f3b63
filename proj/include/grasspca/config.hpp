#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "grasspca/data.hpp"
#include "grasspca/errors.hpp"
#include "grasspca/federation.hpp"

namespace grasspca {

struct ExperimentConfig {
  std::string train_path;
  std::string test_path;
  std::string label_column = "label";
  Hyperparams hp;
  PartitionSpec part;
  std::optional<double> fixed_threshold;  // overrides ROC-driven selection
  double holdout = 0.0;                   // >0: select threshold on a carve-out
  std::string out_dir;
};

// Command-line values that take precedence over the config file.
struct ConfigOverrides {
  std::optional<std::string> train, test, label_column;
  std::optional<double> rho, eta, sample_fraction, holdout, threshold;
  std::optional<std::int64_t> k, local_iters, rounds, n_clients, threads;
  std::optional<std::int64_t> seed;
  std::optional<std::string> algorithm, strategy, group_feature;
};

namespace detail {

inline const std::set<std::string>& known_config_keys() {
  static const std::set<std::string> keys = {
      "train",      "test",          "label_column", "k",
      "rho",        "eta",           "local_iters",  "rounds",
      "sample_fraction", "seed",     "algorithm",    "threads",
      "n_clients",  "group_feature", "strategy",     "threshold",
      "holdout"};
  return keys;
}

}  // namespace detail

// Builds a validated config from an optional JSON file plus flag overrides
// (flags win). Defaults: rho 1.0, sample_fraction 0.1, local_iters 10,
// algorithm fedpg, eta 0.01, k 5, rounds 300, 100 clients. Every offending
// field is collected and reported in a single ValidationError.
inline ExperimentConfig parse_config(const std::optional<std::string>& path,
                                     const ConfigOverrides& flags = {}) {
  ExperimentConfig cfg;
  cfg.hp.k = 5;
  cfg.hp.rho = 1.0;
  cfg.hp.eta = 0.01;
  cfg.hp.local_iters = 10;
  cfg.hp.rounds = 300;
  cfg.hp.sample_fraction = 0.1;
  cfg.hp.seed = 1;
  cfg.hp.algorithm = Algorithm::fedpg;
  cfg.hp.threads = 1;
  cfg.part.n_clients = 100;
  cfg.part.strategy = PartitionStrategy::uniform_shards;

  std::vector<std::string> bad;
  auto flag_bad = [&](const std::string& field) {
    if (std::find(bad.begin(), bad.end(), field) == bad.end()) bad.push_back(field);
  };

  // raw values gathered before range checks so all problems surface together
  double rho = cfg.hp.rho, eta = cfg.hp.eta, sample_fraction = cfg.hp.sample_fraction;
  double holdout = 0.0;
  std::int64_t k = 5, local_iters = 10, rounds = 300, n_clients = 100, threads = 1, seed = 1;
  std::string algorithm = "fedpg", strategy;
  std::optional<double> threshold;
  bool strategy_given = false;

  if (path) {
    std::ifstream in(*path);
    if (!in) throw MissingFile("parse_config: cannot open " + *path);
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object())
      throw ParseError(0, "parse_config: " + *path + " is not a JSON object");
    for (const auto& [key, value] : j.items()) {
      if (!detail::known_config_keys().count(key)) {
        flag_bad(key);
        continue;
      }
      try {
        if (key == "train")
          cfg.train_path = value.get<std::string>();
        else if (key == "test")
          cfg.test_path = value.get<std::string>();
        else if (key == "label_column")
          cfg.label_column = value.get<std::string>();
        else if (key == "k")
          k = value.get<std::int64_t>();
        else if (key == "rho")
          rho = value.get<double>();
        else if (key == "eta")
          eta = value.get<double>();
        else if (key == "local_iters")
          local_iters = value.get<std::int64_t>();
        else if (key == "rounds")
          rounds = value.get<std::int64_t>();
        else if (key == "sample_fraction")
          sample_fraction = value.get<double>();
        else if (key == "seed")
          seed = value.get<std::int64_t>();
        else if (key == "algorithm")
          algorithm = value.get<std::string>();
        else if (key == "threads")
          threads = value.get<std::int64_t>();
        else if (key == "n_clients")
          n_clients = value.get<std::int64_t>();
        else if (key == "group_feature")
          cfg.part.group_feature = value.get<std::string>();
        else if (key == "strategy") {
          strategy = value.get<std::string>();
          strategy_given = true;
        } else if (key == "threshold") {
          if (!value.is_null()) threshold = value.get<double>();
        } else if (key == "holdout")
          holdout = value.get<double>();
      } catch (const nlohmann::json::exception&) {
        flag_bad(key);
      }
    }
  }

  if (flags.train) cfg.train_path = *flags.train;
  if (flags.test) cfg.test_path = *flags.test;
  if (flags.label_column) cfg.label_column = *flags.label_column;
  if (flags.rho) rho = *flags.rho;
  if (flags.eta) eta = *flags.eta;
  if (flags.sample_fraction) sample_fraction = *flags.sample_fraction;
  if (flags.holdout) holdout = *flags.holdout;
  if (flags.threshold) threshold = *flags.threshold;
  if (flags.k) k = *flags.k;
  if (flags.local_iters) local_iters = *flags.local_iters;
  if (flags.rounds) rounds = *flags.rounds;
  if (flags.n_clients) n_clients = *flags.n_clients;
  if (flags.threads) threads = *flags.threads;
  if (flags.seed) seed = *flags.seed;
  if (flags.algorithm) algorithm = *flags.algorithm;
  if (flags.group_feature) cfg.part.group_feature = *flags.group_feature;
  if (flags.strategy) {
    strategy = *flags.strategy;
    strategy_given = true;
  }

  if (!(rho > 0.0)) flag_bad("rho");
  if (!(eta > 0.0)) flag_bad("eta");
  if (!(sample_fraction > 0.0 && sample_fraction <= 1.0)) flag_bad("sample_fraction");
  if (!(holdout >= 0.0 && holdout < 1.0)) flag_bad("holdout");
  if (k < 1) flag_bad("k");
  if (local_iters < 1) flag_bad("local_iters");
  if (rounds < 1) flag_bad("rounds");
  if (n_clients < 1) flag_bad("n_clients");
  if (threads < 1) flag_bad("threads");
  if (algorithm != "fedpe" && algorithm != "fedpg") flag_bad("algorithm");
  if (strategy_given && strategy != "grouped_quantile" && strategy != "uniform_shards")
    flag_bad("strategy");
  if (strategy_given && strategy == "grouped_quantile" && cfg.part.group_feature.empty())
    flag_bad("group_feature");

  if (!bad.empty()) {
    std::string msg = "parse_config: invalid or unknown fields:";
    for (const std::string& f : bad) msg += " " + f;
    throw ValidationError(bad, msg);
  }

  cfg.hp.rho = rho;
  cfg.hp.eta = eta;
  cfg.hp.sample_fraction = sample_fraction;
  cfg.hp.k = static_cast<std::size_t>(k);
  cfg.hp.local_iters = static_cast<std::size_t>(local_iters);
  cfg.hp.rounds = static_cast<std::size_t>(rounds);
  cfg.hp.seed = static_cast<std::uint64_t>(seed);
  cfg.hp.threads = static_cast<std::size_t>(threads);
  cfg.hp.algorithm = algorithm == "fedpe" ? Algorithm::fedpe : Algorithm::fedpg;
  cfg.part.n_clients = static_cast<std::size_t>(n_clients);
  if (strategy_given)
    cfg.part.strategy = strategy == "grouped_quantile" ? PartitionStrategy::grouped_quantile
                                                       : PartitionStrategy::uniform_shards;
  else if (!cfg.part.group_feature.empty())
    cfg.part.strategy = PartitionStrategy::grouped_quantile;
  cfg.fixed_threshold = threshold;
  cfg.holdout = holdout;
  return cfg;
}

inline nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg) {
  nlohmann::ordered_json j;
  j["train"] = cfg.train_path;
  j["test"] = cfg.test_path;
  j["label_column"] = cfg.label_column;
  j["k"] = cfg.hp.k;
  j["rho"] = cfg.hp.rho;
  j["eta"] = cfg.hp.eta;
  j["local_iters"] = cfg.hp.local_iters;
  j["rounds"] = cfg.hp.rounds;
  j["sample_fraction"] = cfg.hp.sample_fraction;
  j["seed"] = cfg.hp.seed;
  j["algorithm"] = to_string(cfg.hp.algorithm);
  j["threads"] = cfg.hp.threads;
  j["n_clients"] = cfg.part.n_clients;
  j["group_feature"] = cfg.part.group_feature;
  j["strategy"] = cfg.part.strategy == PartitionStrategy::grouped_quantile ? "grouped_quantile"
                                                                           : "uniform_shards";
  if (cfg.fixed_threshold)
    j["threshold"] = *cfg.fixed_threshold;
  else
    j["threshold"] = nullptr;
  j["holdout"] = cfg.holdout;
  return j;
}

}  // namespace grasspca
