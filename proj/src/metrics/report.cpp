#include "spmu/metrics/report.hpp"

#include <algorithm>
#include <cstdio>
#include <map>

#include "spmu/numeric/errors.hpp"

namespace spmu {

using nlohmann::json;

namespace {

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> read_opt(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  if (!j.at(key).is_number()) throw ValidationError(key, "expected a number");
  return j.at(key).get<double>();
}

std::string fmt(const std::optional<double>& v) {
  if (!v) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", *v);
  return buf;
}

}  // namespace

json to_json(const SplitGaps& g) {
  return json{{"delta", {{"ua", opt(g.ua)}, {"ra", opt(g.ra)}, {"ta", opt(g.ta)}}},
              {"acc", {{"forget", opt(g.acc_u)}, {"retain", opt(g.acc_r)}, {"test", opt(g.acc_t)}}}};
}

json to_json(const Claim1& c) {
  return json{{"delta_acc", c.delta_acc}, {"pg_h", c.pg_h},           {"pg_s", c.pg_s},
              {"bound", c.bound},         {"gamma_min", c.gamma_min}, {"applicable", c.applicable},
              {"holds", c.holds}};
}

json to_json(const MethodReport& r) {
  json j = to_json(r.gaps);
  j["method"] = r.method;
  j["seconds"] = r.seconds;
  j["pg_h"] = r.test.pg_h;
  j["pg_s"] = r.test.pg_s;
  j["gamma_min"] = r.test.gamma_min;
  j["bound_chain"] = to_json(r.test);
  if (r.retain) j["retain_bound_chain"] = to_json(*r.retain);
  if (r.grid_pg_h) j["grid_pg_h"] = *r.grid_pg_h;
  return j;
}

json to_json(const GenReport& r) {
  return json{{"deleted_class", r.deleted},
              {"replacement_class", r.replacement},
              {"ua", {{"base", r.ua_base}, {"deletion", r.ua_deletion}, {"oracle", r.ua_oracle}}},
              {"mmd",
               {{"base_vs_oracle", r.mmd_base_oracle},
                {"deletion_vs_oracle", r.mmd_deletion_oracle},
                {"deletion_vs_deleted_data", r.mmd_deletion_deleted_data},
                {"deletion_vs_replacement_data", r.mmd_deletion_replacement_data}}}};
}

std::vector<TableRow> table_rows(const json& report) {
  if (!report.is_object() || !report.contains("runs") || !report.at("runs").is_array()) {
    throw ValidationError("runs", "report has no runs array");
  }
  std::vector<TableRow> rows;
  for (const json& run : report.at("runs")) {
    if (!run.is_object() || !run.contains("seed") || !run.contains("methods")) {
      throw ValidationError("runs", "run entry lacks seed or methods");
    }
    const std::string seed = run.at("seed").dump();
    for (const json& m : run.at("methods")) {
      if (!m.is_object() || !m.contains("method") || !m.at("method").is_string()) {
        throw ValidationError("methods", "method entry lacks a name");
      }
      TableRow row;
      row.method = m.at("method").get<std::string>();
      row.seed = seed;
      row.pg_h = read_opt(m, "pg_h");
      row.pg_s = read_opt(m, "pg_s");
      row.time_mu = read_opt(m, "seconds");
      if (m.contains("delta") && m.at("delta").is_object()) {
        row.delta_ua = read_opt(m.at("delta"), "ua");
        row.delta_ra = read_opt(m.at("delta"), "ra");
        row.delta_ta = read_opt(m.at("delta"), "ta");
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::vector<TableRow> aggregate_rows(const std::vector<TableRow>& rows) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<const TableRow*>> by_method;
  for (const TableRow& r : rows) {
    if (!by_method.contains(r.method)) order.push_back(r.method);
    by_method[r.method].push_back(&r);
  }
  using Field = std::optional<double> TableRow::*;
  const Field fields[] = {&TableRow::pg_h,     &TableRow::pg_s,     &TableRow::delta_ua,
                          &TableRow::delta_ra, &TableRow::delta_ta, &TableRow::time_mu};
  std::vector<TableRow> out;
  for (const std::string& method : order) {
    TableRow mean_row, std_row;
    mean_row.method = std_row.method = method;
    mean_row.seed = "mean";
    std_row.seed = "std";
    for (Field f : fields) {
      std::vector<double> vals;
      for (const TableRow* r : by_method[method])
        if (r->*f) vals.push_back(*(r->*f));
      if (vals.empty()) continue;
      const MeanStd ms = mean_std(vals);
      mean_row.*f = ms.mean;
      std_row.*f = ms.std;
    }
    out.push_back(std::move(mean_row));
    out.push_back(std::move(std_row));
  }
  return out;
}

std::string csv_line(const TableRow& row) {
  return row.method + "," + row.seed + "," + fmt(row.pg_h) + "," + fmt(row.pg_s) + "," + fmt(row.delta_ua) + "," +
         fmt(row.delta_ra) + "," + fmt(row.delta_ta) + "," + fmt(row.time_mu);
}

}  // namespace spmu
