#include "vinestress/dataset.hpp"

#include "vinestress/errors.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <regex>
#include <sstream>

namespace vinestress {

namespace {

std::string trim(const std::string& s)
{
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos)
    return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_line(const std::string& line)
{
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ','))
    out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',')
    out.emplace_back();
  return out;
}

double parse_number(const std::string& s, const std::string& where)
{
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (!s.empty() && *first == '+')
    ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (s.empty() || ec != std::errc() || ptr != last || !std::isfinite(v))
    throw InputError(where + ": '" + s + "' is not a finite number");
  return v;
}

bool iso_date(const std::string& s)
{
  static const std::regex re(R"(\d{4}-\d{2}-\d{2}([T ].*)?)");
  return std::regex_match(s, re);
}

} // namespace

void validate(const Dataset& d)
{
  const auto n = d.dates.size();
  if (n == 0)
    throw InputError("dataset is empty");
  if (static_cast<std::size_t>(d.factors.rows()) != n ||
      static_cast<std::size_t>(d.losses.size()) != n)
    throw InputError("dataset columns have unequal lengths");
  if (static_cast<int>(d.names.size()) != d.factors.cols())
    throw InputError("dataset needs one name per factor column");
  if (!d.factors.allFinite() || !d.losses.allFinite())
    throw InputError("dataset contains missing or non-finite values");
  for (std::size_t i = 0; i < n; ++i) {
    if (!iso_date(d.dates[i]))
      throw InputError("row " + std::to_string(i + 1) + ": '" + d.dates[i] +
                       "' is not an ISO date");
    if (i > 0 && !(d.dates[i - 1] < d.dates[i]))
      throw InputError("dates must be strictly increasing: '" + d.dates[i - 1] + "' then '" +
                       d.dates[i] + "'");
  }
}

CsvTable read_csv_table(std::istream& in, const std::string& source)
{
  CsvTable t;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0)
      line.erase(0, 3);
    if (trim(line).empty())
      continue;
    t.header = split_line(line);
    break;
  }
  if (t.header.size() < 2)
    throw InputError(source + ": header needs a label column and at least one value column");
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty())
      continue;
    const auto cells = split_line(line);
    const std::string where = source + ": line " + std::to_string(line_no);
    if (cells.size() != t.header.size())
      throw InputError(where + ": expected " + std::to_string(t.header.size()) + " cells, got " +
                       std::to_string(cells.size()));
    t.labels.push_back(cells[0]);
    std::vector<double> r;
    for (std::size_t j = 1; j < cells.size(); ++j)
      r.push_back(parse_number(cells[j], where + " column '" + t.header[j] + "'"));
    rows.push_back(std::move(r));
  }
  t.values.resize(static_cast<Eigen::Index>(rows.size()),
                  static_cast<Eigen::Index>(t.header.size() - 1));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      t.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return t;
}

CsvTable read_csv_table_file(const std::string& path)
{
  std::ifstream in(path);
  if (!in)
    throw InputError("cannot open '" + path + "'");
  return read_csv_table(in, path);
}

Dataset read_dataset(std::istream& in, const std::string& source)
{
  const auto t = read_csv_table(in, source);
  if (t.header.size() < 3)
    throw InputError(source + ": expected columns date, factors..., loss");
  if (t.header.back() != "loss")
    throw InputError(source + ": last column must be 'loss', found '" + t.header.back() + "'");
  Dataset d;
  d.dates = t.labels;
  d.names.assign(t.header.begin() + 1, t.header.end() - 1);
  const auto k = t.values.cols();
  d.factors = t.values.leftCols(k - 1);
  d.losses = t.values.col(k - 1);
  validate(d);
  return d;
}

Dataset load_dataset(const std::string& path)
{
  std::ifstream in(path);
  if (!in)
    throw InputError("cannot open '" + path + "'");
  return read_dataset(in, path);
}

void write_dataset(std::ostream& out, const Dataset& d)
{
  validate(d);
  out << "date";
  for (const auto& n : d.names)
    out << ',' << n;
  out << ",loss\n";
  const auto old = out.precision(17);
  for (std::size_t i = 0; i < d.size(); ++i) {
    out << d.dates[i];
    for (Eigen::Index j = 0; j < d.factors.cols(); ++j)
      out << ',' << d.factors(static_cast<Eigen::Index>(i), j);
    out << ',' << d.losses(static_cast<Eigen::Index>(i)) << '\n';
  }
  out.precision(old);
}

void save_dataset(const std::string& path, const Dataset& d)
{
  std::ofstream out(path);
  if (!out)
    throw InputError("cannot write '" + path + "'");
  write_dataset(out, d);
}

Dataset ingest(const CsvTable& rates, const CsvTable& values)
{
  if (values.values.cols() != 1)
    throw InputError("portfolio values file must have exactly one value column");
  const auto n = rates.labels.size();
  if (n < 2)
    throw InputError("rates file needs at least two dates");
  std::vector<std::string> bad;
  if (values.labels.size() != n)
    bad.push_back("rates have " + std::to_string(n) + " rows, values have " +
                  std::to_string(values.labels.size()));
  for (std::size_t i = 0; i < std::min(n, values.labels.size()); ++i)
    if (rates.labels[i] != values.labels[i])
      bad.push_back("row " + std::to_string(i + 1) + ": rates date '" + rates.labels[i] +
                    "' vs values date '" + values.labels[i] + "'");
  if (!bad.empty()) {
    std::string msg = "misaligned dates";
    for (std::size_t i = 0; i < std::min<std::size_t>(bad.size(), 10); ++i)
      msg += "; " + bad[i];
    if (bad.size() > 10)
      msg += "; ... (" + std::to_string(bad.size()) + " rows)";
    throw InputError(msg);
  }
  Dataset d;
  d.names.assign(rates.header.begin() + 1, rates.header.end());
  d.dates.assign(rates.labels.begin() + 1, rates.labels.end());
  const auto m = static_cast<Eigen::Index>(n - 1);
  d.factors.resize(m, rates.values.cols());
  d.losses.resize(m);
  for (Eigen::Index t = 1; t <= m; ++t) {
    for (Eigen::Index j = 0; j < rates.values.cols(); ++j) {
      const double prev = rates.values(t - 1, j);
      if (prev == 0.0)
        throw InputError("zero rate for '" + d.names[j] + "' on " + rates.labels[t - 1]);
      d.factors(t - 1, j) = (rates.values(t, j) - prev) / prev;
    }
    d.losses(t - 1) = -(values.values(t, 0) - values.values(t - 1, 0));
  }
  validate(d);
  return d;
}

} // namespace vinestress
