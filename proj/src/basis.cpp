#include "tube/basis.hpp"

#include "tube/error.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>

namespace tube {

namespace {

// Columns with at most this many distinct values are treated as discrete by
// the automatic spec selection.
constexpr std::size_t kDiscreteLevels = 5;

double quantile_sorted(const std::vector<double>& sorted, double prob) {
  // Linear interpolation between order statistics (Hyndman-Fan type 7).
  const double h = prob * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::vector<double> distinct_values(const Eigen::VectorXd& x) {
  std::vector<double> v(x.begin(), x.end());
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

bool is_dosage_column(const Eigen::VectorXd& x) {
  return std::all_of(x.begin(), x.end(),
                     [](double v) { return v == 0.0 || v == 1.0 || v == 2.0; });
}

double cube_plus(double v) { return v > 0.0 ? v * v * v : 0.0; }

}  // namespace

bool BasisSpec::resolved() const {
  switch (kind) {
    case BasisKind::natural_spline: return knots.size() >= 2;
    case BasisKind::dummy: return levels.size() >= 2;
    case BasisKind::snp_category: return !combos.empty();
    case BasisKind::linear: return true;
  }
  return false;
}

Eigen::Index BasisSpec::dimension() const {
  switch (kind) {
    case BasisKind::natural_spline:
      return resolved() ? static_cast<Eigen::Index>(knots.size()) : df;
    case BasisKind::dummy:
    case BasisKind::snp_category: return df + 1;
    case BasisKind::linear: return 2;
  }
  return 0;
}

const char* to_string(BasisKind kind) {
  switch (kind) {
    case BasisKind::natural_spline: return "natural_spline";
    case BasisKind::dummy: return "dummy";
    case BasisKind::snp_category: return "snp_category";
    case BasisKind::linear: return "linear";
  }
  return "?";
}

BasisKind basis_kind_from_string(const std::string& name) {
  if (name == "natural_spline") return BasisKind::natural_spline;
  if (name == "dummy") return BasisKind::dummy;
  if (name == "snp_category") return BasisKind::snp_category;
  if (name == "linear") return BasisKind::linear;
  throw ConfigError("unknown basis kind '" + name + "'");
}

int choose_dimension(long n) {
  if (n < 1) return 1;
  auto j = static_cast<long>(std::ceil(std::cbrt(static_cast<double>(n))));
  // Exact integer correction around cbrt rounding.
  while (j > 1 && (j - 1) * (j - 1) * (j - 1) >= n) --j;
  while (j * j * j < n) ++j;
  return static_cast<int>(j);
}

BasisSpec resolve_natural_spline(const Eigen::VectorXd& x, int df) {
  if (df < 2) throw ConfigError("natural spline needs df >= 2");
  std::vector<double> sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end());
  if (sorted.empty() || sorted.front() == sorted.back()) {
    throw DegenerateInputError(
        "natural spline needs at least 2 distinct values");
  }
  const double lo = sorted.front();
  const double hi = sorted.back();
  std::vector<double> knots{lo};
  const int interior = df - 2;
  for (int k = 1; k <= interior; ++k) {
    double q = quantile_sorted(sorted, static_cast<double>(k) / (interior + 1));
    if (q > knots.back() && q < hi) knots.push_back(q);
  }
  knots.push_back(hi);
  BasisSpec spec;
  spec.kind = BasisKind::natural_spline;
  spec.df = static_cast<int>(knots.size());
  spec.knots = std::move(knots);
  if (spec.df < df) {
    spdlog::warn("natural spline: tied quantiles collapsed, df {} -> {}", df,
                 spec.df);
  }
  return spec;
}

DesignMatrix natural_spline_basis(const Eigen::VectorXd& x,
                                  const BasisSpec& spec) {
  if (spec.kind != BasisKind::natural_spline)
    throw ConfigError("natural_spline_basis called with a non-spline spec");
  const BasisSpec r =
      spec.knots.empty() ? resolve_natural_spline(x, spec.df) : spec;
  if (!std::is_sorted(r.knots.begin(), r.knots.end()) || r.knots.size() < 2 ||
      std::adjacent_find(r.knots.begin(), r.knots.end()) != r.knots.end()) {
    throw ConfigError("spline knots must be strictly increasing (>= 2)");
  }
  const auto nk = static_cast<Eigen::Index>(r.knots.size());
  const double lo = r.knots.front();
  const double width = r.knots.back() - lo;
  std::vector<double> t(r.knots.size());
  for (std::size_t k = 0; k < t.size(); ++k) t[k] = (r.knots[k] - lo) / width;
  const double t_last = t.back();

  // Truncated-power form of the natural cubic spline on the unit-scaled
  // variable: 1, u, d_k(u) - d_{K-2}(u).
  auto d = [&](std::size_t k, double u) {
    return (cube_plus(u - t[k]) - cube_plus(u - t_last)) / (t_last - t[k]);
  };
  DesignMatrix out(x.size(), nk);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double u = (x[i] - lo) / width;
    out(i, 0) = 1.0;
    out(i, 1) = u;
    if (nk > 2) {
      const double d_ref = d(static_cast<std::size_t>(nk - 2), u);
      for (Eigen::Index k = 0; k + 2 < nk; ++k) {
        out(i, k + 2) = d(static_cast<std::size_t>(k), u) - d_ref;
      }
    }
  }
  return out;
}

BasisSpec resolve_dummy(const Eigen::VectorXd& x) {
  auto levels = distinct_values(x);
  if (levels.size() < 2)
    throw DegenerateInputError("dummy basis needs at least 2 levels");
  BasisSpec spec;
  spec.kind = BasisKind::dummy;
  spec.df = static_cast<int>(levels.size()) - 1;
  spec.levels = std::move(levels);
  return spec;
}

DesignMatrix dummy_basis(const Eigen::VectorXd& x, const BasisSpec& spec) {
  if (spec.kind != BasisKind::dummy)
    throw ConfigError("dummy_basis called with a non-dummy spec");
  const BasisSpec r = spec.levels.empty() ? resolve_dummy(x) : spec;
  DesignMatrix out = DesignMatrix::Zero(x.size(), r.dimension());
  out.col(0).setOnes();
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    auto it = std::find(r.levels.begin(), r.levels.end(), x[i]);
    if (it == r.levels.end()) {
      throw ValidationError("dummy basis: level " + std::to_string(x[i]) +
                            " was not seen when the basis was built");
    }
    auto idx = it - r.levels.begin();
    if (idx > 0) out(i, idx) = 1.0;
  }
  return out;
}

BasisSpec resolve_snp_category(const Eigen::MatrixXd& g,
                               long max_combinations) {
  double cap = std::pow(3.0, static_cast<double>(g.cols()));
  if (cap > static_cast<double>(max_combinations)) {
    throw ConfigError("snp_category: 3^" + std::to_string(g.cols()) +
                      " combinations exceed the cap of " +
                      std::to_string(max_combinations));
  }
  std::map<std::vector<int>, long> counts;
  for (Eigen::Index i = 0; i < g.rows(); ++i) {
    std::vector<int> combo(static_cast<std::size_t>(g.cols()));
    for (Eigen::Index j = 0; j < g.cols(); ++j) {
      double v = g(i, j);
      if (v != 0.0 && v != 1.0 && v != 2.0)
        throw ValidationError("snp_category: dosage must be 0, 1 or 2");
      combo[static_cast<std::size_t>(j)] = static_cast<int>(v);
    }
    ++counts[combo];
  }
  if (counts.size() < 2)
    throw DegenerateInputError("snp_category needs at least 2 combinations");
  // Reference: most frequent; ties resolved by lexicographic order.
  auto ref = counts.begin();
  for (auto it = counts.begin(); it != counts.end(); ++it)
    if (it->second > ref->second) ref = it;
  BasisSpec spec;
  spec.kind = BasisKind::snp_category;
  spec.combos.push_back(ref->first);
  for (auto& [combo, c] : counts)
    if (combo != ref->first) spec.combos.push_back(combo);
  spec.df = static_cast<int>(spec.combos.size()) - 1;
  return spec;
}

DesignMatrix snp_category_basis(const Eigen::MatrixXd& g,
                                const BasisSpec& spec, long max_combinations) {
  if (spec.kind != BasisKind::snp_category)
    throw ConfigError("snp_category_basis called with a non-SNP spec");
  const BasisSpec r =
      spec.combos.empty() ? resolve_snp_category(g, max_combinations) : spec;
  DesignMatrix out = DesignMatrix::Zero(g.rows(), r.dimension());
  out.col(0).setOnes();
  std::vector<int> combo(static_cast<std::size_t>(g.cols()));
  for (Eigen::Index i = 0; i < g.rows(); ++i) {
    for (Eigen::Index j = 0; j < g.cols(); ++j)
      combo[static_cast<std::size_t>(j)] = static_cast<int>(g(i, j));
    auto it = std::find(r.combos.begin(), r.combos.end(), combo);
    if (it == r.combos.end()) {
      throw ValidationError(
          "snp_category: dosage combination unseen when the basis was built");
    }
    auto idx = it - r.combos.begin();
    if (idx > 0) out(i, idx) = 1.0;
  }
  return out;
}

DesignMatrix linear_basis(const Eigen::VectorXd& x) {
  DesignMatrix out(x.size(), 2);
  out.col(0).setOnes();
  out.col(1) = x;
  return out;
}

BasisSpec resolve_basis(const Eigen::MatrixXd& columns, const BasisSpec& spec) {
  if (spec.resolved()) return spec;
  switch (spec.kind) {
    case BasisKind::natural_spline:
      return resolve_natural_spline(columns.col(0), spec.df);
    case BasisKind::dummy: return resolve_dummy(columns.col(0));
    case BasisKind::snp_category: return resolve_snp_category(columns);
    case BasisKind::linear: return spec;
  }
  return spec;
}

DesignMatrix evaluate_basis(const Eigen::MatrixXd& columns,
                            const BasisSpec& spec) {
  if (spec.kind != BasisKind::snp_category && columns.cols() != 1)
    throw ConfigError(std::string(to_string(spec.kind)) +
                      " basis expects exactly one column");
  switch (spec.kind) {
    case BasisKind::natural_spline:
      return natural_spline_basis(columns.col(0), spec);
    case BasisKind::dummy: return dummy_basis(columns.col(0), spec);
    case BasisKind::snp_category: return snp_category_basis(columns, spec);
    case BasisKind::linear: return linear_basis(columns.col(0));
  }
  return {};
}

DesignMatrix concatenate_terms(const Eigen::MatrixXd& data,
                               const std::vector<BasisTerm>& terms) {
  std::vector<DesignMatrix> parts;
  Eigen::Index cols = 1;
  for (const auto& term : terms) {
    Eigen::MatrixXd sub(data.rows(),
                        static_cast<Eigen::Index>(term.columns.size()));
    for (std::size_t c = 0; c < term.columns.size(); ++c) {
      if (term.columns[c] < 0 || term.columns[c] >= data.cols())
        throw ConfigError("basis term references a missing column");
      sub.col(static_cast<Eigen::Index>(c)) = data.col(term.columns[c]);
    }
    parts.push_back(evaluate_basis(sub, term.spec));
    cols += parts.back().cols() - 1;
  }
  DesignMatrix out(data.rows(), cols);
  out.col(0).setOnes();
  Eigen::Index at = 1;
  for (const auto& part : parts) {
    out.middleCols(at, part.cols() - 1) = part.rightCols(part.cols() - 1);
    at += part.cols() - 1;
  }
  return out;
}

namespace {

BasisSpec auto_spec(const Eigen::VectorXd& col, int df, bool dosage_linear) {
  BasisSpec spec;
  if (dosage_linear && is_dosage_column(col)) {
    spec.kind = BasisKind::linear;
  } else if (distinct_values(col).size() <= kDiscreteLevels) {
    spec.kind = BasisKind::dummy;
  } else {
    spec.kind = BasisKind::natural_spline;
    spec.df = df;
  }
  return spec;
}

}  // namespace

SieveBases prepare_bases(const Eigen::MatrixXd& x, const Eigen::MatrixXd& g,
                         const BasisConfig& config) {
  const int df = config.default_df > 0
                     ? config.default_df
                     : std::max(4, choose_dimension(static_cast<long>(x.rows())));
  std::vector<BasisSpec> x_specs = config.x_specs;
  if (x_specs.empty()) {
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      x_specs.push_back(auto_spec(x.col(j), df, false));
  }
  if (static_cast<Eigen::Index>(x_specs.size()) != x.cols())
    throw ConfigError("need one surrogate basis spec per x column");
  std::vector<BasisTerm> g_terms = config.g_terms;
  if (g_terms.empty()) {
    for (Eigen::Index j = 0; j < g.cols(); ++j)
      g_terms.push_back({{j}, auto_spec(g.col(j), df, true)});
  }
  auto fill = [&](BasisSpec& spec) {
    if (config.force_linear) {
      spec = BasisSpec{};
      spec.kind = BasisKind::linear;
    } else if (spec.kind == BasisKind::natural_spline && spec.df <= 0 &&
               spec.knots.empty()) {
      spec.df = df;
    }
  };
  for (auto& s : x_specs) {
    fill(s);
  }
  std::vector<BasisTerm> expanded;
  for (auto& t : g_terms) {
    if (config.force_linear && t.columns.size() > 1) {
      for (auto c : t.columns) expanded.push_back({{c}, {}});
    } else {
      expanded.push_back(t);
    }
  }
  for (auto& t : expanded) fill(t.spec);

  for (Eigen::Index j = 0; j < x.cols(); ++j)
    x_specs[j] = resolve_basis(x.col(j), x_specs[j]);
  for (auto& t : expanded) {
    Eigen::MatrixXd sub(g.rows(), static_cast<Eigen::Index>(t.columns.size()));
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
      if (t.columns[c] < 0 || t.columns[c] >= g.cols())
        throw ConfigError("basis term references a missing g column");
      sub.col(static_cast<Eigen::Index>(c)) = g.col(t.columns[c]);
    }
    t.spec = resolve_basis(sub, t.spec);
  }
  return evaluate_bases(x, g, x_specs, expanded);
}

SieveBases evaluate_bases(const Eigen::MatrixXd& x, const Eigen::MatrixXd& g,
                          const std::vector<BasisSpec>& x_specs,
                          const std::vector<BasisTerm>& g_terms) {
  SieveBases out;
  out.x_specs = x_specs;
  out.g_terms = g_terms;
  out.psi = concatenate_terms(g, g_terms);
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    out.phi.push_back(evaluate_basis(x.col(j), x_specs[j]));
  return out;
}

}  // namespace tube
