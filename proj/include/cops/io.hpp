#pragma once

// Text formats: dataset CSV (header x0..x{d-1}[,y], extra columns allowed),
// 17-significant-digit number formatting, and atomic file writes.

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cops/model.hpp"

namespace cops::io {

/// Malformed input file; the message carries file and line.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// %.17g, round-trip exact for doubles.
std::string format_double(double value);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> lines;  // 1-based source line of each row

  /// Column index by name, or nullopt.
  std::optional<std::size_t> column(const std::string& name) const;
};

CsvTable read_csv(const std::filesystem::path& path);

struct LoadedDataset {
  Dataset data;
  std::vector<double> weights;  // filled when a weights column was requested
};

struct DatasetOptions {
  bool require_labels = true;
  bool read_labels = true;             // false ignores any y column
  std::optional<int> classes;          // default: largest label (at least 1)
  std::optional<std::string> weights_column;
};

LoadedDataset read_dataset(const std::filesystem::path& path, const DatasetOptions& options = {});

std::string dataset_to_csv(const Dataset& data);

/// Writes to a sibling temporary file and renames it over `path`.
void write_atomic(const std::filesystem::path& path, const std::string& content);

std::string read_text(const std::filesystem::path& path);

/// 1-based line of byte offset `offset` in `text`.
std::size_t line_of_offset(const std::string& text, std::size_t offset);

}  // namespace cops::io
