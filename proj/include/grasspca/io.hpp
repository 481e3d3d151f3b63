#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "grasspca/data.hpp"
#include "grasspca/detection.hpp"
#include "grasspca/errors.hpp"
#include "grasspca/federation.hpp"
#include "grasspca/matrix.hpp"

namespace grasspca {

// Plain numeric CSV, no header; 17 significant digits so values round-trip
// bit-exactly.
inline void write_matrix_csv(const DenseMatrix& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw MissingFile("write_matrix_csv: cannot open " + path + " for writing");
  char buf[64];
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      detail::format_double(buf, sizeof buf, m(i, j));
      out << buf;
    }
    out << '\n';
  }
}

inline DenseMatrix read_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingFile("read_matrix_csv: cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    for (const std::string& cell : detail::split_csv_line(line)) {
      double v;
      if (!detail::parse_double(cell, v))
        throw ParseError(lineno, "read_matrix_csv: bad cell '" + cell + "' at " + path + ":" +
                                     std::to_string(lineno));
      row.push_back(v);
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw ParseError(lineno, "read_matrix_csv: ragged row at " + path + ":" +
                                   std::to_string(lineno));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError(0, "read_matrix_csv: " + path + " is empty");
  DenseMatrix m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) = rows[i][j];
  return m;
}

inline nlohmann::ordered_json round_record_to_json(const RoundRecord& r) {
  nlohmann::ordered_json j;
  j["round"] = r.round;
  j["sampled"] = r.sampled;
  j["lagrangian"] = r.lagrangian;
  j["consensus_residual"] = r.consensus_residual;
  j["stationarity_gap"] = r.stationarity_gap;
  j["wall_time"] = r.wall_time;
  return j;
}

// One RoundRecord per line, JSON Lines.
inline void write_history_jsonl(const std::vector<RoundRecord>& history, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw MissingFile("write_history_jsonl: cannot open " + path + " for writing");
  for (const RoundRecord& r : history) out << round_record_to_json(r).dump() << '\n';
}

inline std::vector<RoundRecord> read_history_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingFile("read_history_jsonl: cannot open " + path);
  std::vector<RoundRecord> history;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw ParseError(lineno, "read_history_jsonl: invalid JSON at " + path + ":" +
                                   std::to_string(lineno));
    try {
      RoundRecord r;
      r.round = j.at("round").get<std::size_t>();
      r.sampled = j.at("sampled").get<std::vector<std::size_t>>();
      r.lagrangian = j.at("lagrangian").get<double>();
      r.consensus_residual = j.at("consensus_residual").get<double>();
      r.stationarity_gap = j.at("stationarity_gap").get<double>();
      r.wall_time = j.value("wall_time", 0.0);
      history.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(lineno, "read_history_jsonl: " + std::string(e.what()) + " at " + path +
                                   ":" + std::to_string(lineno));
    }
  }
  if (history.empty()) throw ParseError(0, "read_history_jsonl: " + path + " has no records");
  return history;
}

inline nlohmann::ordered_json report_to_json(const DetectionReport& r) {
  nlohmann::ordered_json j;
  j["threshold"] = r.threshold;
  j["tp"] = r.tp;
  j["fp"] = r.fp;
  j["tn"] = r.tn;
  j["fn"] = r.fn;
  j["accuracy"] = r.accuracy;
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["f1"] = r.f1;
  j["fnr"] = r.fnr;
  j["auc_roc"] = r.auc_roc;
  j["average_precision"] = r.average_precision;
  nlohmann::ordered_json roc = nlohmann::ordered_json::array();
  for (const auto& [fpr, tpr] : r.roc) roc.push_back({fpr, tpr});
  j["roc"] = std::move(roc);
  nlohmann::ordered_json pr = nlohmann::ordered_json::array();
  for (const auto& [recall, precision] : r.pr) pr.push_back({recall, precision});
  j["pr"] = std::move(pr);
  return j;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw MissingFile("write_text: cannot open " + path + " for writing");
  out << text;
}

// Two-column CSV with a header, for plotting curves.
inline void write_points_csv(const std::vector<std::pair<double, double>>& points,
                             const std::string& header, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw MissingFile("write_points_csv: cannot open " + path + " for writing");
  out << header << '\n';
  char buf[64];
  for (const auto& [x, y] : points) {
    detail::format_double(buf, sizeof buf, x);
    out << buf << ',';
    detail::format_double(buf, sizeof buf, y);
    out << buf << '\n';
  }
}

}  // namespace grasspca
