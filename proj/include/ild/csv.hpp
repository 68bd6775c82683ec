#pragma once

#include <string>

#include "ild/dataset.hpp"

namespace ild {

// CSV with a header row; label_col selects the label column by name, or by
// zero-based index if the string parses as an integer and no column has that
// name. Remaining columns must be numeric. Labels are remapped to contiguous
// 0..M-1 (numeric label sets sort numerically, otherwise lexicographically);
// original spellings are kept in Dataset::label_names.
Dataset read_csv_dataset(const std::string& path, const std::string& label_col);

// label column is written last under label_name
void write_csv_dataset(const Dataset& ds, const std::string& path,
                       const std::string& label_name = "label");

// write via a temp file in the same directory followed by an atomic rename
void atomic_write_text(const std::string& path, const std::string& content);

}  // namespace ild
