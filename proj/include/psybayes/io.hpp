#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "psybayes/models.hpp"

namespace psybayes {

/// Delimited text table. The delimiter (tab or comma) is taken from the
/// header row.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line;  // 1-based source line of each row

  std::size_t column(std::string_view name) const;
  bool has(std::string_view name) const;
  std::vector<double> numeric(std::string_view name) const;
  std::vector<int> integer(std::string_view name) const;
  /// Rows whose `name` cell equals `value`.
  Table filter(std::string_view name, std::string_view value) const;
  /// 1 where the cell equals `value`, else 0.
  std::vector<double> binarize(std::string_view name, std::string_view value) const;
};

Table parse_table(std::string_view text);
Table read_table(const std::string& path);

/// "col=value" as used by --filter and --binarize.
std::pair<std::string, std::string> parse_assignment(std::string_view text);

/// Order-preserving compaction of ids to 1..n (smallest id becomes 1).
std::vector<int> remap_subjects(const std::vector<int>& ids);

std::string read_file(const std::string& path);
/// Writes through a temporary file in the same directory and renames it.
void write_file_atomic(const std::string& path, std::string_view content);

std::string save_fit_text(const Fit& fit);
Fit load_fit_text(std::string_view text);
void save_fit(const Fit& fit, const std::string& path);
Fit load_fit(const std::string& path);

}  // namespace psybayes
