#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <string>
#include <vector>

namespace vinestress {

//! Factor changes and portfolio losses on a common date index.
struct Dataset {
  std::vector<std::string> dates;
  //! One per factor column.
  std::vector<std::string> names;
  Eigen::MatrixXd factors;
  Eigen::VectorXd losses;

  std::size_t size() const { return dates.size(); }
  int dim() const { return static_cast<int>(factors.cols()); }
};

//! Throws InputError on unequal lengths, non-finite values, malformed or
//! non-increasing dates (YYYY-MM-DD prefix).
void validate(const Dataset& d);

//! Numeric CSV with a header row and a leading label column.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::string> labels;
  Eigen::MatrixXd values;
};

//! Throws InputError naming the line of any malformed or missing cell.
CsvTable read_csv_table(std::istream& in, const std::string& source = "input");
CsvTable read_csv_table_file(const std::string& path);

//! Dataset CSV: header "date,<factor names...>,loss".
Dataset read_dataset(std::istream& in, const std::string& source = "input");
Dataset load_dataset(const std::string& path);
void write_dataset(std::ostream& out, const Dataset& d);
void save_dataset(const std::string& path, const Dataset& d);

//! Relative changes (s_t - s_{t-1}) / s_{t-1} of the rate columns and losses
//! -(V_t - V_{t-1}) of the single value column; the first date is dropped.
//! Dates of both tables must agree row by row.
Dataset ingest(const CsvTable& rates, const CsvTable& values);

} // namespace vinestress
