#pragma once

#include <filesystem>
#include <iosfwd>

#include "spmu/data/dataset.hpp"

namespace spmu {

// Header row `x0,x1,...,y`, one sample per line.
void write_dataset_csv(const LabeledDataset& ds, std::ostream& out);
void write_dataset_csv(const LabeledDataset& ds, const std::filesystem::path& path);

/// num_classes is max(y) + 1 unless a larger value is given.
LabeledDataset read_dataset_csv(std::istream& in, std::size_t num_classes = 0);
LabeledDataset read_dataset_csv(const std::filesystem::path& path, std::size_t num_classes = 0);

}  // namespace spmu
