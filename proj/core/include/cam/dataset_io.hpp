// Apache License, Version 2.0, refer to LICENSE.txt

#ifndef CAM_DATASET_IO_HPP
#define CAM_DATASET_IO_HPP

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "cam/model.hpp"
#include "cam/scenarios.hpp"

namespace cam {

using Header = std::vector<std::pair<std::string, std::string>>;

/// Long-format dataset: `# key=value` comment lines, then the columns
/// unit,index,value and, with a covariate, x. The header always carries kind.
void write_dataset(const std::filesystem::path& path, const Dataset& data, const Header& header = {});

struct DatasetFile {
  Dataset data;
  Header header;
};

/// Reads a file written by write_dataset; the kind comes from the header
/// (continuous when absent). Comma or tab delimited.
DatasetFile read_dataset(const std::filesystem::path& path);

/// Truth file with columns unit,index,dc,oc (one-based labels).
void write_truth(const std::filesystem::path& path, const Truth& truth, const Header& header = {});
Truth read_truth(const std::filesystem::path& path);

/// Rectangular count table, rows = items and columns = subjects, comma or tab
/// delimited, with optional header row and optional leading name column.
/// Every subject becomes one unit holding the item counts in row order.
Dataset load_abundance_table(const std::filesystem::path& path);

/// Convenience lookup in a header; empty string when missing.
std::string header_value(const Header& header, const std::string& key);

}  // namespace cam

#endif  // CAM_DATASET_IO_HPP
