#include "spmu/data/csv.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

#include "spmu/numeric/errors.hpp"

namespace spmu {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, ',')) fields.push_back(item);
  return fields;
}

double parse_double(const std::string& s) {
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw DomainError("csv: malformed number '" + s + "'");
  return v;
}

}  // namespace

void write_dataset_csv(const LabeledDataset& ds, std::ostream& out) {
  for (std::size_t d = 0; d < ds.dim(); ++d) out << 'x' << d << ',';
  out << "y\n";
  out << std::setprecision(17);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t d = 0; d < ds.dim(); ++d) out << ds.x(i, d) << ',';
    out << ds.y[i] << '\n';
  }
}

void write_dataset_csv(const LabeledDataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  write_dataset_csv(ds, out);
}

LabeledDataset read_dataset_csv(std::istream& in, std::size_t num_classes) {
  std::string line;
  if (!std::getline(in, line)) throw DomainError("csv: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_fields(line);
  if (header.size() < 2 || header.back() != "y") throw DomainError("csv: header must be x0,...,y");
  const std::size_t dim = header.size() - 1;
  for (std::size_t d = 0; d < dim; ++d) {
    if (header[d] != "x" + std::to_string(d)) throw DomainError("csv: unexpected column " + header[d]);
  }
  std::vector<double> values;
  std::vector<std::size_t> labels;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) throw DomainError("csv: row has wrong field count");
    for (std::size_t d = 0; d < dim; ++d) values.push_back(parse_double(fields[d]));
    const double label = parse_double(fields.back());
    if (label < 0.0 || label != std::floor(label)) throw DomainError("csv: label must be a non-negative integer");
    labels.push_back(static_cast<std::size_t>(label));
  }
  LabeledDataset ds;
  ds.x = Mat(labels.size(), dim, std::move(values));
  ds.y = std::move(labels);
  const std::size_t seen = ds.y.empty() ? 0 : *std::max_element(ds.y.begin(), ds.y.end()) + 1;
  ds.num_classes = std::max(seen, num_classes);
  ds.validate();
  return ds;
}

LabeledDataset read_dataset_csv(const std::filesystem::path& path, std::size_t num_classes) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return read_dataset_csv(in, num_classes);
}

}  // namespace spmu
