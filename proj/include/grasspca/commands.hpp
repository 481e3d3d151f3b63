#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "grasspca/config.hpp"
#include "grasspca/data.hpp"
#include "grasspca/detection.hpp"
#include "grasspca/errors.hpp"
#include "grasspca/federation.hpp"
#include "grasspca/io.hpp"

namespace grasspca {

namespace detail {

inline void require_file(const std::string& path, const std::string& field) {
  if (path.empty() || !std::filesystem::exists(path))
    throw ValidationError({field}, field + ": file not found: '" + path + "'");
}

inline void ensure_out_dir(const std::string& dir) {
  if (dir.empty()) throw ValidationError({"out"}, "out: output directory not given");
  std::filesystem::create_directories(dir);
}

inline std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

inline int fail_with(const Error& e, const std::string& command) {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["error"] = e.what();
  if (const auto* v = dynamic_cast<const ValidationError*>(&e)) j["fields"] = v->fields;
  if (dynamic_cast<const SingleClass*>(&e))
    j["hint"] =
        "the evaluation split contains one class only; provide a labeled test set with both "
        "classes, lower --holdout, or pass an explicit threshold in the config";
  std::cerr << j.dump() << std::endl;
  return 1;
}

inline void write_manifest(const ExperimentConfig& cfg, const std::string& command,
                           double wall_seconds, const std::vector<std::string>& outputs) {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["config"] = config_to_json(cfg);
  j["seed"] = cfg.hp.seed;
  j["wall_time_seconds"] = wall_seconds;
  j["outputs"] = outputs;
  write_text(join_path(cfg.out_dir, "manifest.json"), j.dump(2) + "\n");
}

}  // namespace detail

// partition: split the (raw) training CSV into per-client CSVs plus a summary.
inline int cmd_partition(const ExperimentConfig& cfg) {
  try {
    detail::require_file(cfg.train_path, "train");
    detail::ensure_out_dir(cfg.out_dir);
    LoadSummary summary;
    Dataset train = load_csv(cfg.train_path, std::nullopt, &summary);
    std::vector<ClientDataset> clients = partition(train, cfg.part, cfg.hp.seed);

    std::vector<std::string> outputs;
    for (const ClientDataset& c : clients) {
      char name[32];
      std::snprintf(name, sizeof name, "client_%03zu.csv", c.id);
      Dataset piece;
      piece.features = c.features;
      piece.feature_names = train.feature_names;
      save_csv(piece, detail::join_path(cfg.out_dir, name));
      outputs.emplace_back(name);
    }
    nlohmann::ordered_json j;
    j["rows_kept"] = summary.rows_kept;
    j["rows_dropped"] = summary.rows_dropped;
    j["n_clients"] = clients.size();
    nlohmann::ordered_json sizes = nlohmann::ordered_json::array();
    for (const ClientDataset& c : clients) sizes.push_back(c.features.cols());
    j["client_sizes"] = std::move(sizes);
    write_text(detail::join_path(cfg.out_dir, "partition.json"), j.dump(2) + "\n");
    std::cout << j.dump() << std::endl;
    return 0;
  } catch (const Error& e) {
    return detail::fail_with(e, "partition");
  }
}

// train: z-score the training set, partition, run federated training, emit
// basis.csv + history.jsonl + manifest.json.
inline int cmd_train(const ExperimentConfig& cfg) {
  try {
    const auto started = std::chrono::steady_clock::now();
    detail::require_file(cfg.train_path, "train");
    detail::ensure_out_dir(cfg.out_dir);
    cfg.hp.validate();

    LoadSummary summary;
    Dataset train = load_csv(cfg.train_path, std::nullopt, &summary);
    nlohmann::ordered_json load_json;
    load_json["rows_kept"] = summary.rows_kept;
    load_json["rows_dropped"] = summary.rows_dropped;
    std::cout << load_json.dump() << std::endl;

    Normalizer norm = fit_normalizer(train.features);
    Dataset normalized;
    normalized.features = norm.apply(train.features);
    normalized.feature_names = train.feature_names;

    std::vector<ClientDataset> clients = partition(normalized, cfg.part, cfg.hp.seed);
    TrainingResult result = run_training(clients, cfg.hp);

    write_matrix_csv(result.consensus.matrix(), detail::join_path(cfg.out_dir, "basis.csv"));
    write_history_jsonl(result.history, detail::join_path(cfg.out_dir, "history.jsonl"));
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    detail::write_manifest(cfg, "train", wall, {"basis.csv", "history.jsonl"});
    return 0;
  } catch (const Error& e) {
    return detail::fail_with(e, "train");
  }
}

namespace detail {

// seeded carve-out for leakage-free threshold selection
struct HoldoutSplit {
  std::vector<std::size_t> select;  // indices used to pick the threshold
  std::vector<std::size_t> report;  // indices the metrics are computed on
};

inline HoldoutSplit holdout_split(std::size_t n, double fraction, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  CounterRng rng(rng_key(seed, streams::kHoldout));
  for (std::size_t i = n - 1; i > 0; --i) {
    const std::size_t j = rng.next_below(i + 1);
    std::swap(order[i], order[j]);
  }
  const std::size_t carve = std::max<std::size_t>(1, static_cast<std::size_t>(
                                                          fraction * static_cast<double>(n)));
  HoldoutSplit split;
  split.select.assign(order.begin(), order.begin() + carve);
  split.report.assign(order.begin() + carve, order.end());
  return split;
}

}  // namespace detail

// evaluate: score the labeled test set with a trained basis (normalizer is
// refitted from the training CSV), select or accept a threshold, and emit
// report.json + roc.csv + pr.csv. Prints the scalar metric row.
inline int cmd_evaluate(const ExperimentConfig& cfg, const std::string& basis_path) {
  try {
    detail::require_file(cfg.train_path, "train");
    detail::require_file(cfg.test_path, "test");
    detail::require_file(basis_path, "basis");
    detail::ensure_out_dir(cfg.out_dir);

    Basis basis(read_matrix_csv(basis_path));
    if (basis.orthonormality_defect() > 1e-6)
      throw NotOrthonormal("cmd_evaluate: basis file " + basis_path +
                           " does not hold orthonormal columns");

    Dataset train = load_csv(cfg.train_path);
    Normalizer norm = fit_normalizer(train.features);

    Dataset test = load_csv(cfg.test_path, cfg.label_column);
    if (!test.labels) throw HeaderMismatch("cmd_evaluate: test set has no labels");
    DenseMatrix scored_features = norm.apply(test.features);
    std::vector<double> scores = score_dataset(basis, scored_features);
    const std::vector<int>& labels = *test.labels;

    DetectionReport report;
    if (cfg.holdout > 0.0 && !cfg.fixed_threshold) {
      detail::HoldoutSplit split = detail::holdout_split(scores.size(), cfg.holdout, cfg.hp.seed);
      std::vector<double> sel_scores, rep_scores;
      std::vector<int> sel_labels, rep_labels;
      for (std::size_t i : split.select) {
        sel_scores.push_back(scores[i]);
        sel_labels.push_back(labels[i]);
      }
      for (std::size_t i : split.report) {
        rep_scores.push_back(scores[i]);
        rep_labels.push_back(labels[i]);
      }
      const double threshold = select_threshold(roc_curve(sel_scores, sel_labels));
      report = evaluate_detection(rep_scores, rep_labels, threshold);
    } else {
      report = evaluate_detection(scores, labels, cfg.fixed_threshold);
    }

    write_text(detail::join_path(cfg.out_dir, "report.json"), report_to_json(report).dump(2) + "\n");
    write_points_csv(report.roc, "fpr,tpr", detail::join_path(cfg.out_dir, "roc.csv"));
    write_points_csv(report.pr, "recall,precision", detail::join_path(cfg.out_dir, "pr.csv"));

    char row[256];
    std::snprintf(row, sizeof row,
                  "Acc %.2f  Pre %.2f  Rec %.2f  F1 %.2f  FNR %.2f  AUC-ROC %.4f  AP %.4f",
                  100.0 * report.accuracy, 100.0 * report.precision, 100.0 * report.recall,
                  100.0 * report.f1, 100.0 * report.fnr, report.auc_roc,
                  report.average_precision);
    std::cout << row << std::endl;
    return 0;
  } catch (const Error& e) {
    return detail::fail_with(e, "evaluate");
  }
}

// report: flatten a round-history JSONL into a per-round CSV; optionally
// assert the Lagrangian column is non-increasing after round 2.
inline int cmd_report(const std::string& history_path, const std::string& out_dir,
                      std::optional<double> assert_monotone_tol) {
  try {
    detail::require_file(history_path, "history");
    detail::ensure_out_dir(out_dir);
    std::vector<RoundRecord> history = read_history_jsonl(history_path);

    std::string csv = "round,lagrangian,consensus_residual,stationarity_gap,wall_time\n";
    char buf[64];
    for (const RoundRecord& r : history) {
      csv += std::to_string(r.round);
      csv += ',';
      detail::format_double(buf, sizeof buf, r.lagrangian);
      csv += buf;
      csv += ',';
      detail::format_double(buf, sizeof buf, r.consensus_residual);
      csv += buf;
      csv += ',';
      detail::format_double(buf, sizeof buf, r.stationarity_gap);
      csv += buf;
      csv += ',';
      detail::format_double(buf, sizeof buf, r.wall_time);
      csv += buf;
      csv += '\n';
    }
    write_text(detail::join_path(out_dir, "rounds.csv"), csv);

    if (assert_monotone_tol) {
      for (std::size_t i = 1; i < history.size(); ++i) {
        if (history[i].round < 2) continue;
        if (history[i].lagrangian > history[i - 1].lagrangian + *assert_monotone_tol) {
          nlohmann::ordered_json j;
          j["command"] = "report";
          j["error"] = "lagrangian increased at round " + std::to_string(history[i].round);
          j["previous"] = history[i - 1].lagrangian;
          j["current"] = history[i].lagrangian;
          j["tolerance"] = *assert_monotone_tol;
          std::cerr << j.dump() << std::endl;
          return 1;
        }
      }
    }
    std::cout << "wrote rounds.csv (" << history.size() << " rounds)" << std::endl;
    return 0;
  } catch (const Error& e) {
    return detail::fail_with(e, "report");
  }
}

}  // namespace grasspca
