#pragma once

#include <Eigen/Dense>

#include <optional>
#include <vector>

namespace tube {

enum class BasisKind { natural_spline, dummy, snp_category, linear };

/// Sieve expansion of one column (or, for snp_category, a column set).
///
/// A spec is "resolved" once its data-dependent pieces (spline knots, dummy
/// levels, SNP combinations) are filled in; resolved specs evaluate new data
/// without looking at the training sample again.
struct BasisSpec {
  BasisKind kind = BasisKind::linear;
  /// natural_spline: number of columns including the intercept (df - 2
  /// interior knots). dummy / snp_category: number of indicator columns.
  int df = 0;
  /// Boundary and interior knots, sorted (natural_spline).
  std::vector<double> knots;
  /// Sorted distinct levels; levels[0] is the reference (dummy).
  std::vector<double> levels;
  /// Observed dosage combinations; combos[0] is the reference
  /// (snp_category).
  std::vector<std::vector<int>> combos;

  bool resolved() const;
  /// Column count of the evaluated design, intercept included.
  Eigen::Index dimension() const;
};

using DesignMatrix = Eigen::MatrixXd;

/// Natural cubic spline with intercept. Resolves knots from `x` when
/// `spec.knots` is empty: boundaries at min/max, df - 2 interior knots at
/// equally spaced quantiles, duplicates collapsed.
DesignMatrix natural_spline_basis(const Eigen::VectorXd& x,
                                  const BasisSpec& spec);
BasisSpec resolve_natural_spline(const Eigen::VectorXd& x, int df);

/// Intercept plus one indicator per non-reference level.
DesignMatrix dummy_basis(const Eigen::VectorXd& x, const BasisSpec& spec);
BasisSpec resolve_dummy(const Eigen::VectorXd& x);

/// Intercept plus one indicator per observed non-reference dosage
/// combination; the most frequent combination is the reference.
DesignMatrix snp_category_basis(const Eigen::MatrixXd& g,
                                const BasisSpec& spec,
                                long max_combinations = 729);
BasisSpec resolve_snp_category(const Eigen::MatrixXd& g,
                               long max_combinations = 729);

/// Intercept and the raw column.
DesignMatrix linear_basis(const Eigen::VectorXd& x);

/// Sieve dimension ceil(N^{1/3}); lies in [N^{1/4}, N^{1/2}] for N >= 16.
int choose_dimension(long n);

/// Resolve (if needed) and evaluate a spec on the given columns.
DesignMatrix evaluate_basis(const Eigen::MatrixXd& columns,
                            const BasisSpec& spec);
BasisSpec resolve_basis(const Eigen::MatrixXd& columns, const BasisSpec& spec);

/// A basis applied to a set of dataset columns.
struct BasisTerm {
  std::vector<Eigen::Index> columns;
  BasisSpec spec;
};

/// psi(G): one global intercept followed by each term's non-intercept
/// columns.
DesignMatrix concatenate_terms(const Eigen::MatrixXd& data,
                               const std::vector<BasisTerm>& terms);

/// Requested layout of every sieve expansion in a fit. Specs may be
/// unresolved; `df <= 0` on a spline means "choose automatically".
struct BasisConfig {
  /// One spec per surrogate column; empty selects automatic specs.
  std::vector<BasisSpec> x_specs;
  /// Terms over risk-factor columns; empty selects automatic terms.
  std::vector<BasisTerm> g_terms;
  /// Force every expansion to kind=linear (parametric degeneration).
  bool force_linear = false;
  /// Spline df used where not given explicitly; <= 0 means
  /// max(4, choose_dimension(N)).
  int default_df = 0;
};

/// Fully resolved bases for a dataset: psi over G, one phi per surrogate.
struct SieveBases {
  std::vector<BasisSpec> x_specs;
  std::vector<BasisTerm> g_terms;
  DesignMatrix psi;
  std::vector<DesignMatrix> phi;
};

SieveBases prepare_bases(const Eigen::MatrixXd& x, const Eigen::MatrixXd& g,
                         const BasisConfig& config);
/// Re-evaluate already resolved specs on new data.
SieveBases evaluate_bases(const Eigen::MatrixXd& x, const Eigen::MatrixXd& g,
                          const std::vector<BasisSpec>& x_specs,
                          const std::vector<BasisTerm>& g_terms);

const char* to_string(BasisKind kind);
BasisKind basis_kind_from_string(const std::string& name);

}  // namespace tube
