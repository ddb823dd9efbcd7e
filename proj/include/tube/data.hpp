#pragma once

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tube {

/// One cohort member: chart-review grade (if reviewed), surrogates x, risk
/// factors g.
struct ObservedRecord {
  std::optional<double> y_star;
  std::vector<double> x;
  std::vector<double> g;

  bool delta() const { return y_star.has_value(); }
};

/// Immutable cohort. Storage is columnar; records can be materialized on
/// demand. Labeled rows may appear anywhere.
class Dataset {
 public:
  /// Validates every record. `k` overrides label-granularity inference.
  explicit Dataset(const std::vector<ObservedRecord>& records,
                   std::optional<int> k = std::nullopt);
  Dataset(Eigen::MatrixXd x, Eigen::MatrixXd g,
          std::vector<std::optional<double>> y_star,
          std::optional<int> k = std::nullopt);

  Eigen::Index size() const { return x_.rows(); }  // N
  Eigen::Index n_labeled() const {
    return static_cast<Eigen::Index>(labeled_rows_.size());
  }
  int K() const { return k_; }
  Eigen::Index p() const { return x_.cols(); }
  Eigen::Index q() const { return g_.cols(); }

  const Eigen::MatrixXd& x() const { return x_; }
  const Eigen::MatrixXd& g() const { return g_; }
  bool labeled(Eigen::Index i) const { return y_star_[i].has_value(); }
  const std::optional<double>& y_star(Eigen::Index i) const {
    return y_star_[i];
  }
  /// k such that Y* = k/K; -1 for unlabeled rows.
  int label_level(Eigen::Index i) const { return level_[i]; }
  const std::vector<Eigen::Index>& labeled_rows() const {
    return labeled_rows_;
  }
  const std::vector<std::optional<double>>& y_star_column() const {
    return y_star_;
  }

  ObservedRecord record(Eigen::Index i) const;

  /// Rows in the given order (duplicates allowed, as in resampling).
  Dataset subset(std::span<const Eigen::Index> rows) const;

  /// (1, G) design used by the parametric risk model.
  Eigen::MatrixXd risk_design() const;

  std::vector<std::string> x_names;
  std::vector<std::string> g_names;

 private:
  void validate_and_index(std::optional<int> k);

  Eigen::MatrixXd x_;
  Eigen::MatrixXd g_;
  std::vector<std::optional<double>> y_star_;
  std::vector<int> level_;
  std::vector<Eigen::Index> labeled_rows_;
  int k_ = 2;
};

/// Least K making every value an integer multiple of 1/K (capped search).
int infer_label_granularity(std::span<const double> values, int max_k = 1000);

struct CsvSchema {
  std::string y_star_column = "y_star";
  /// Empty: auto-detect columns named x<digits> / g<digits>, numeric order.
  std::vector<std::string> x_columns;
  std::vector<std::string> g_columns;
  std::optional<int> k;
};

Dataset load_csv(const std::string& path, const CsvSchema& schema = {});
Dataset parse_csv(const std::string& text, const CsvSchema& schema = {});

/// Header y_star,x1..xp,g1..gq; empty y_star for unlabeled rows. `extra`
/// columns are appended verbatim (e.g. hidden simulation truth).
std::string to_csv(const Dataset& data,
                   const std::vector<std::pair<std::string, Eigen::VectorXd>>&
                       extra = {});
void write_csv(const std::string& path, const Dataset& data,
               const std::vector<std::pair<std::string, Eigen::VectorXd>>&
                   extra = {});

}  // namespace tube
