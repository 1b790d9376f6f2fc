#pragma once

// Reference computations for the tests. Everything here is written from the
// textbook definitions and deliberately shares no code path with src/.

#include "gpdv/kernel.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace oracle {

inline double se(double r, double ell, double var) {
  return var * std::exp(-(r * r) / (2.0 * ell * ell));
}

inline double matern32(double r, double ell, double var) {
  const double a = std::sqrt(3.0) * r / ell;
  return var * (1.0 + a) * std::exp(-a);
}

inline double matern52(double r, double ell, double var) {
  const double a = std::sqrt(5.0) * r / ell;
  return var * (1.0 + a + 5.0 * r * r / (3.0 * ell * ell)) * std::exp(-a);
}

inline double kernel(const gpdv::KernelSpec& k, const Eigen::RowVectorXd& x,
                     const Eigen::RowVectorXd& y) {
  double r2 = 0.0;
  for (Eigen::Index c = 0; c < x.size(); ++c) r2 += (x(c) - y(c)) * (x(c) - y(c));
  const double r = std::sqrt(r2);
  switch (k.family) {
    case gpdv::KernelFamily::SquaredExponential: return se(r, k.lengthscale, k.variance);
    case gpdv::KernelFamily::Matern32: return matern32(r, k.lengthscale, k.variance);
    case gpdv::KernelFamily::Matern52: return matern52(r, k.lengthscale, k.variance);
  }
  return 0.0;
}

inline Eigen::VectorXd basis(const gpdv::TrendBasis& t, const Eigen::RowVectorXd& x) {
  if (t.family == gpdv::TrendFamily::Simple) return Eigen::VectorXd(0);
  if (t.family == gpdv::TrendFamily::Ordinary) return Eigen::VectorXd::Ones(1);
  Eigen::VectorXd f(1 + x.size());
  f(0) = 1.0;
  for (Eigen::Index c = 0; c < x.size(); ++c) f(1 + c) = x(c);
  return f;
}

/// Dense bordered matrix [[K + nugget I, F], [F^T, 0]] on `idx`, with the
/// border dropped when |idx| < p.
inline Eigen::MatrixXd bordered(const gpdv::KernelSpec& k, const gpdv::TrendBasis& t,
                                const gpdv::PointSet& pts, const std::vector<Eigen::Index>& idx) {
  const Eigen::Index m = static_cast<Eigen::Index>(idx.size());
  const Eigen::Index p = m >= t.size() ? t.size() : 0;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m + p, m + p);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      a(i, j) = kernel(k, pts.row(idx[i]), pts.row(idx[j])) + (i == j ? k.nugget : 0.0);
    }
    const Eigen::VectorXd f = basis(t, pts.row(idx[i]));
    for (Eigen::Index c = 0; c < p; ++c) {
      a(i, m + c) = f(c);
      a(m + c, i) = f(c);
    }
  }
  return a;
}

inline Eigen::MatrixXd inverse(const Eigen::MatrixXd& a) { return a.fullPivLu().inverse(); }

/// Residual variance k(x,x) - v^T A^-1 v with a generic LU solve.
inline double residual_variance(const gpdv::KernelSpec& k, const gpdv::TrendBasis& t,
                                const gpdv::PointSet& pts, const std::vector<Eigen::Index>& idx,
                                const Eigen::RowVectorXd& x) {
  if (idx.empty()) return kernel(k, x, x);
  const Eigen::MatrixXd a = bordered(k, t, pts, idx);
  const Eigen::Index m = static_cast<Eigen::Index>(idx.size());
  Eigen::VectorXd v(a.rows());
  for (Eigen::Index i = 0; i < m; ++i) v(i) = kernel(k, pts.row(idx[i]), x);
  if (a.rows() > m) v.tail(a.rows() - m) = basis(t, x);
  return kernel(k, x, x) - v.dot(a.fullPivLu().solve(v));
}

/// Integrated residual variance over weighted nodes.
inline double iv(const gpdv::KernelSpec& k, const gpdv::TrendBasis& t, const gpdv::PointSet& pts,
                 const std::vector<Eigen::Index>& idx, const gpdv::PointSet& nodes,
                 const Eigen::VectorXd& w) {
  double total = 0.0;
  for (Eigen::Index q = 0; q < nodes.rows(); ++q) {
    total += w(q) * residual_variance(k, t, pts, idx, nodes.row(q));
  }
  return total;
}

/// Shapley values by averaging marginals over all n! orderings, with values
/// reported as reductions phi(before) - phi(after).
inline std::vector<double> shapley_by_permutations(
    int n, const std::function<double(const std::vector<Eigen::Index>&)>& phi) {
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<double> total(static_cast<std::size_t>(n), 0.0);
  double count = 0.0;
  do {
    std::vector<Eigen::Index> prefix;
    double before = phi(prefix);
    for (Eigen::Index i : perm) {
      prefix.push_back(i);
      std::vector<Eigen::Index> sorted = prefix;
      std::sort(sorted.begin(), sorted.end());
      const double after = phi(sorted);
      total[static_cast<std::size_t>(i)] += before - after;
      before = after;
    }
    count += 1.0;
  } while (std::next_permutation(perm.begin(), perm.end()));
  for (double& v : total) v /= count;
  return total;
}

inline gpdv::PointSet random_points(std::mt19937_64& rng, Eigen::Index n, Eigen::Index d,
                                    double spread = 1.0) {
  std::normal_distribution<double> g(0.0, spread);
  gpdv::PointSet p(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index c = 0; c < d; ++c) p(i, c) = g(rng);
  }
  return p;
}

// Random regression problem within n <= 200, d <= 10, nugget >= 1e-4.
struct FidelityProblem {
  gpdv::KernelSpec kernel;
  gpdv::TrendBasis trend;
  gpdv::PointSet points;
};

inline FidelityProblem fidelity_problem(std::mt19937_64& rng) {
  std::uniform_int_distribution<Eigen::Index> size(10, 200), dim(1, 10);
  std::uniform_int_distribution<int> family(0, 2), trend(0, 2);
  std::uniform_real_distribution<double> scale(0.3, 1.0), log_nugget(-4.0, -2.0);
  const Eigen::Index n = size(rng);
  const Eigen::Index d = dim(rng);
  FidelityProblem out;
  out.kernel = {static_cast<gpdv::KernelFamily>(family(rng)),
                scale(rng) * std::sqrt(static_cast<double>(d)), 1.0,
                std::pow(10.0, log_nugget(rng))};
  out.trend = {static_cast<gpdv::TrendFamily>(trend(rng)), d};
  out.points = random_points(rng, n, d);
  return out;
}

// Table shaped like the Boston housing data: 13 features and the target medv.
inline std::string boston_shaped_csv(Eigen::Index rows, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::ostringstream out;
  for (int c = 0; c < 13; ++c) out << "f" << c << ',';
  out << "medv\n";
  for (Eigen::Index i = 0; i < rows; ++i) {
    double y = 22.0;
    for (int c = 0; c < 13; ++c) {
      const double v = 3.0 * c + g(rng);
      y += 0.1 * v;
      out << v << ',';
    }
    out << y << '\n';
  }
  return out.str();
}

inline double max_abs_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace oracle
