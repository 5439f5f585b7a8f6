#pragma once

#include "elfuse/types.hpp"

#include <string>
#include <vector>

namespace elfuse {

/// A numeric table with a header row.
struct NumericTable {
  std::vector<std::string> header;
  Matrix values;

  /// Index of `name` in the header, or -1.
  Index column(const std::string& name) const;
};

/// Parses comma-separated text with one header line. Blank lines are skipped.
/// Malformed cells raise ValidationError citing the 1-based line and the
/// column name. `source` names the input in messages.
NumericTable parse_numeric_csv(const std::string& text, const std::string& source);

NumericTable read_numeric_csv(const std::string& path);

/// Shortest decimal text that reads back to the same double.
std::string format_double(double value);

std::string to_csv(const NumericTable& table);

/// Writes `contents` to `path` through a temporary file and rename.
void write_file_atomic(const std::string& path, const std::string& contents);

std::string read_file(const std::string& path);

}  // namespace elfuse
