#include "tube/data.hpp"

#include "tube/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>

namespace tube {

namespace {

constexpr double kLevelTol = 1e-9;

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\"");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\"");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    cells.push_back(trim(std::string_view(line).substr(
        start, pos == std::string::npos ? std::string::npos : pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return cells;
}

double parse_number(const std::string& cell, std::size_t row,
                    const std::string& column) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size() ||
      !std::isfinite(v)) {
    throw ParseError("row " + std::to_string(row) + ", column '" + column +
                     "': cannot parse '" + cell + "' as a number");
  }
  return v;
}

std::vector<std::string> detect_columns(const std::vector<std::string>& header,
                                        char prefix) {
  const std::regex re(std::string(1, prefix) + "([0-9]+)");
  std::vector<std::pair<long, std::string>> found;
  for (const auto& h : header) {
    std::smatch m;
    if (std::regex_match(h, m, re)) found.emplace_back(std::stol(m[1]), h);
  }
  std::sort(found.begin(), found.end());
  std::vector<std::string> names;
  for (auto& [idx, name] : found) names.push_back(name);
  return names;
}

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

int infer_label_granularity(std::span<const double> values, int max_k) {
  for (int k = 1; k <= max_k; ++k) {
    bool ok = std::all_of(values.begin(), values.end(), [k](double v) {
      double scaled = v * k;
      return std::abs(scaled - std::round(scaled)) < kLevelTol * k;
    });
    if (ok) return k;
  }
  throw ValidationError("label values are not multiples of 1/K for any K <= " +
                        std::to_string(max_k));
}

Dataset::Dataset(const std::vector<ObservedRecord>& records,
                 std::optional<int> k) {
  if (records.empty()) throw ValidationError("dataset has no records");
  const auto p = static_cast<Eigen::Index>(records.front().x.size());
  const auto q = static_cast<Eigen::Index>(records.front().g.size());
  x_.resize(static_cast<Eigen::Index>(records.size()), p);
  g_.resize(static_cast<Eigen::Index>(records.size()), q);
  y_star_.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (static_cast<Eigen::Index>(r.x.size()) != p ||
        static_cast<Eigen::Index>(r.g.size()) != q) {
      throw SchemaError("record " + std::to_string(i) +
                        " has inconsistent x/g length");
    }
    for (Eigen::Index j = 0; j < p; ++j) x_(i, j) = r.x[j];
    for (Eigen::Index j = 0; j < q; ++j) g_(i, j) = r.g[j];
    y_star_.push_back(r.y_star);
  }
  validate_and_index(k);
}

Dataset::Dataset(Eigen::MatrixXd x, Eigen::MatrixXd g,
                 std::vector<std::optional<double>> y_star,
                 std::optional<int> k)
    : x_(std::move(x)), g_(std::move(g)), y_star_(std::move(y_star)) {
  if (x_.rows() != g_.rows() ||
      x_.rows() != static_cast<Eigen::Index>(y_star_.size())) {
    throw SchemaError("x, g and y_star row counts differ");
  }
  if (x_.rows() == 0) throw ValidationError("dataset has no records");
  validate_and_index(k);
}

void Dataset::validate_and_index(std::optional<int> k) {
  if (!x_.allFinite() || !g_.allFinite()) {
    throw ValidationError("x and g must be finite and fully observed");
  }
  std::vector<double> observed;
  labeled_rows_.clear();
  for (std::size_t i = 0; i < y_star_.size(); ++i) {
    if (!y_star_[i]) continue;
    double v = *y_star_[i];
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      throw ValidationError("row " + std::to_string(i) + ": y_star " +
                            format_double(v) + " outside [0, 1]");
    }
    observed.push_back(v);
    labeled_rows_.push_back(static_cast<Eigen::Index>(i));
  }
  if (labeled_rows_.empty()) {
    throw ValidationError("dataset has no labeled records (n = 0)");
  }
  if (k) {
    if (*k < 1) throw ValidationError("K must be >= 1");
    for (double v : observed) {
      double scaled = v * *k;
      if (std::abs(scaled - std::round(scaled)) > kLevelTol * *k) {
        throw ValidationError("y_star " + format_double(v) +
                              " is not a multiple of 1/" + std::to_string(*k));
      }
    }
    k_ = *k;
  } else {
    k_ = infer_label_granularity(observed);
  }
  level_.assign(y_star_.size(), -1);
  for (auto i : labeled_rows_) {
    level_[i] = static_cast<int>(std::lround(*y_star_[i] * k_));
  }
  if (x_names.empty()) {
    for (Eigen::Index j = 0; j < x_.cols(); ++j)
      x_names.push_back("x" + std::to_string(j + 1));
  }
  if (g_names.empty()) {
    for (Eigen::Index j = 0; j < g_.cols(); ++j)
      g_names.push_back("g" + std::to_string(j + 1));
  }
}

ObservedRecord Dataset::record(Eigen::Index i) const {
  ObservedRecord r;
  r.y_star = y_star_[i];
  r.x.assign(x_.row(i).begin(), x_.row(i).end());
  r.g.assign(g_.row(i).begin(), g_.row(i).end());
  return r;
}

Dataset Dataset::subset(std::span<const Eigen::Index> rows) const {
  Eigen::MatrixXd xs(static_cast<Eigen::Index>(rows.size()), x_.cols());
  Eigen::MatrixXd gs(static_cast<Eigen::Index>(rows.size()), g_.cols());
  std::vector<std::optional<double>> ys;
  ys.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    xs.row(static_cast<Eigen::Index>(r)) = x_.row(rows[r]);
    gs.row(static_cast<Eigen::Index>(r)) = g_.row(rows[r]);
    ys.push_back(y_star_[rows[r]]);
  }
  Dataset out(std::move(xs), std::move(gs), std::move(ys), k_);
  out.x_names = x_names;
  out.g_names = g_names;
  return out;
}

Eigen::MatrixXd Dataset::risk_design() const {
  Eigen::MatrixXd d(g_.rows(), g_.cols() + 1);
  d.col(0).setOnes();
  d.rightCols(g_.cols()) = g_;
  return d;
}

Dataset parse_csv(const std::string& text, const CsvSchema& schema) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("CSV is empty (no header)");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0)
    line.erase(0, 3);
  const auto header = split_line(line);
  std::map<std::string, std::size_t> index;
  for (std::size_t c = 0; c < header.size(); ++c) index[header[c]] = c;

  auto x_cols = schema.x_columns.empty() ? detect_columns(header, 'x')
                                         : schema.x_columns;
  auto g_cols = schema.g_columns.empty() ? detect_columns(header, 'g')
                                         : schema.g_columns;
  auto locate = [&](const std::string& name) {
    auto it = index.find(name);
    if (it == index.end())
      throw SchemaError("CSV header lacks column '" + name + "'");
    return it->second;
  };
  const std::size_t y_col = locate(schema.y_star_column);
  std::vector<std::size_t> x_idx, g_idx;
  for (auto& n : x_cols) x_idx.push_back(locate(n));
  for (auto& n : g_cols) g_idx.push_back(locate(n));
  if (x_idx.empty()) throw SchemaError("no surrogate (x) columns found");
  if (g_idx.empty()) throw SchemaError("no risk-factor (g) columns found");

  std::vector<std::vector<double>> xs, gs;
  std::vector<std::optional<double>> ys;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    auto cells = split_line(line);
    if (cells.size() != header.size()) {
      throw SchemaError("row " + std::to_string(row) + " has " +
                        std::to_string(cells.size()) + " cells, header has " +
                        std::to_string(header.size()));
    }
    std::optional<double> y;
    if (!cells[y_col].empty() && cells[y_col] != "NA") {
      y = parse_number(cells[y_col], row, schema.y_star_column);
      if (*y < 0.0 || *y > 1.0) {
        throw ValidationError("row " + std::to_string(row) + ": y_star " +
                              cells[y_col] + " outside [0, 1]");
      }
    }
    std::vector<double> xr, gr;
    for (std::size_t j = 0; j < x_idx.size(); ++j)
      xr.push_back(parse_number(cells[x_idx[j]], row, x_cols[j]));
    for (std::size_t j = 0; j < g_idx.size(); ++j)
      gr.push_back(parse_number(cells[g_idx[j]], row, g_cols[j]));
    xs.push_back(std::move(xr));
    gs.push_back(std::move(gr));
    ys.push_back(y);
  }
  if (xs.empty()) throw ValidationError("CSV has no data rows");
  Eigen::MatrixXd x(static_cast<Eigen::Index>(xs.size()),
                    static_cast<Eigen::Index>(x_idx.size()));
  Eigen::MatrixXd g(static_cast<Eigen::Index>(gs.size()),
                    static_cast<Eigen::Index>(g_idx.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) {
    for (std::size_t j = 0; j < x_idx.size(); ++j) x(i, j) = xs[i][j];
    for (std::size_t j = 0; j < g_idx.size(); ++j) g(i, j) = gs[i][j];
  }
  Dataset d(std::move(x), std::move(g), std::move(ys), schema.k);
  d.x_names = x_cols;
  d.g_names = g_cols;
  return d;
}

Dataset load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open data file '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_csv(ss.str(), schema);
}

std::string to_csv(
    const Dataset& data,
    const std::vector<std::pair<std::string, Eigen::VectorXd>>& extra) {
  std::ostringstream out;
  out << "y_star";
  for (auto& n : data.x_names) out << ',' << n;
  for (auto& n : data.g_names) out << ',' << n;
  for (auto& [n, v] : extra) out << ',' << n;
  out << '\n';
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    if (data.labeled(i)) out << format_double(*data.y_star(i));
    for (Eigen::Index j = 0; j < data.p(); ++j)
      out << ',' << format_double(data.x()(i, j));
    for (Eigen::Index j = 0; j < data.q(); ++j)
      out << ',' << format_double(data.g()(i, j));
    for (auto& [n, v] : extra) out << ',' << format_double(v[i]);
    out << '\n';
  }
  return out.str();
}

void write_csv(
    const std::string& path, const Dataset& data,
    const std::vector<std::pair<std::string, Eigen::VectorXd>>& extra) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write '" + path + "'");
  f << to_csv(data, extra);
}

}  // namespace tube
