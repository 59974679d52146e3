#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "spmu/metrics/metrics.hpp"

namespace spmu {

/// Gap metrics of one unlearning method against the oracle.
struct MethodReport {
  std::string method;
  double seconds = 0.0;
  SplitGaps gaps;
  Claim1 test;                   // PG and bound chain on the test set
  std::optional<Claim1> retain;  // same on the retained training rows, when requested
  std::optional<double> grid_pg_h;
};

/// Generative unlearning summary for one deleted class.
struct GenReport {
  std::size_t deleted = 0;
  std::size_t replacement = 0;
  double ua_base = 0.0;
  double ua_deletion = 0.0;
  double ua_oracle = 0.0;
  double mmd_base_oracle = 0.0;
  double mmd_deletion_oracle = 0.0;
  double mmd_deletion_deleted_data = 0.0;
  double mmd_deletion_replacement_data = 0.0;
};

nlohmann::json to_json(const SplitGaps& g);
nlohmann::json to_json(const Claim1& c);
nlohmann::json to_json(const MethodReport& r);
nlohmann::json to_json(const GenReport& r);

/// One line of the results table.
struct TableRow {
  std::string method;
  std::string seed;
  std::optional<double> pg_h, pg_s, delta_ua, delta_ra, delta_ta, time_mu;
};

inline const std::vector<std::string> kTableColumns = {"method", "seed",     "pg_h",     "pg_s",
                                                       "delta_ua", "delta_ra", "delta_ta", "time_mu"};

/// Rows of every run/method in a report; throws ValidationError if malformed.
std::vector<TableRow> table_rows(const nlohmann::json& report);

/// Per method, in first-seen order: a "mean" row and a "std" row over seeds.
/// A column absent from every row of the method stays empty.
std::vector<TableRow> aggregate_rows(const std::vector<TableRow>& rows);

std::string csv_line(const TableRow& row);

}  // namespace spmu
