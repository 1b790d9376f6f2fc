#include "gpdv/kernel.hpp"

#include "gpdv/errors.hpp"

#include <cmath>
#include <fmt/format.h>

namespace gpdv {

void KernelSpec::validate() const {
  if (!(lengthscale > 0.0) || !std::isfinite(lengthscale)) {
    throw InputError(fmt::format("kernel lengthscale must be > 0, got {}", lengthscale));
  }
  if (!(variance > 0.0) || !std::isfinite(variance)) {
    throw InputError(fmt::format("kernel variance must be > 0, got {}", variance));
  }
  if (!(nugget >= 0.0) || !std::isfinite(nugget)) {
    throw InputError(fmt::format("kernel nugget must be >= 0, got {}", nugget));
  }
}

double kernel_of_distance(const KernelSpec& spec, double r) {
  const double u = r / spec.lengthscale;
  switch (spec.family) {
    case KernelFamily::SquaredExponential:
      return spec.variance * std::exp(-0.5 * u * u);
    case KernelFamily::Matern32: {
      const double a = std::sqrt(3.0) * u;
      return spec.variance * (1.0 + a) * std::exp(-a);
    }
    case KernelFamily::Matern52: {
      const double a = std::sqrt(5.0) * u;
      return spec.variance * (1.0 + a + a * a / 3.0) * std::exp(-a);
    }
  }
  return 0.0;
}

double eval_kernel(const KernelSpec& spec, PointRef x, PointRef y) {
  if (x.size() != y.size()) {
    throw InputError(fmt::format("kernel inputs differ in dimension ({} vs {})",
                                 x.size(), y.size()));
  }
  return kernel_of_distance(spec, (x - y).norm());
}

Eigen::MatrixXd gram(const KernelSpec& spec, const PointSet& points) {
  const Eigen::Index n = points.rows();
  if (n < 1) throw InputError("gram requires at least one point");
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    k(j, j) = spec.variance + spec.nugget;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double value = kernel_of_distance(spec, (points.row(i) - points.row(j)).norm());
      k(i, j) = value;
      k(j, i) = value;
    }
  }
  return k;
}

Eigen::MatrixXd cross_covariance(const KernelSpec& spec, const PointSet& a,
                                 const PointSet& b) {
  if (a.cols() != b.cols()) {
    throw InputError(fmt::format("point sets differ in dimension ({} vs {})",
                                 a.cols(), b.cols()));
  }
  Eigen::MatrixXd k(a.rows(), b.rows());
  for (Eigen::Index j = 0; j < b.rows(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      k(i, j) = kernel_of_distance(spec, (a.row(i) - b.row(j)).norm());
    }
  }
  return k;
}

Eigen::Index TrendBasis::size() const {
  switch (family) {
    case TrendFamily::Simple: return 0;
    case TrendFamily::Ordinary: return 1;
    case TrendFamily::Linear: return 1 + input_dim;
  }
  return 0;
}

Eigen::VectorXd eval_basis(const TrendBasis& trend, PointRef x) {
  if (x.size() != trend.input_dim) {
    throw InputError(fmt::format("trend expects {}-dimensional inputs, got {}",
                                 trend.input_dim, x.size()));
  }
  Eigen::VectorXd f(trend.size());
  if (trend.family != TrendFamily::Simple) f(0) = 1.0;
  if (trend.family == TrendFamily::Linear) f.tail(x.size()) = x.transpose();
  return f;
}

Eigen::MatrixXd basis_matrix(const TrendBasis& trend, const PointSet& points) {
  if (points.rows() > 0 && points.cols() != trend.input_dim) {
    throw InputError(fmt::format("trend expects {}-dimensional inputs, got {}",
                                 trend.input_dim, points.cols()));
  }
  Eigen::MatrixXd f(points.rows(), trend.size());
  if (trend.family != TrendFamily::Simple) f.col(0).setOnes();
  if (trend.family == TrendFamily::Linear) f.rightCols(points.cols()) = points;
  return f;
}

std::string basis_column_name(const TrendBasis& trend, Eigen::Index j) {
  if (trend.family == TrendFamily::Linear && j > 0) return fmt::format("x_{}", j);
  return "constant";
}

std::string_view to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::SquaredExponential: return "squared-exponential";
    case KernelFamily::Matern32: return "matern-3/2";
    case KernelFamily::Matern52: return "matern-5/2";
  }
  return "?";
}

std::string_view to_string(TrendFamily family) {
  switch (family) {
    case TrendFamily::Simple: return "simple";
    case TrendFamily::Ordinary: return "ordinary";
    case TrendFamily::Linear: return "linear";
  }
  return "?";
}

KernelFamily parse_kernel_family(std::string_view name) {
  if (name == "squared-exponential" || name == "se" || name == "gaussian") {
    return KernelFamily::SquaredExponential;
  }
  if (name == "matern-3/2" || name == "matern32") return KernelFamily::Matern32;
  if (name == "matern-5/2" || name == "matern52") return KernelFamily::Matern52;
  throw InputError(fmt::format("unknown kernel family '{}'", name));
}

TrendFamily parse_trend_family(std::string_view name) {
  if (name == "simple") return TrendFamily::Simple;
  if (name == "ordinary") return TrendFamily::Ordinary;
  if (name == "linear") return TrendFamily::Linear;
  throw InputError(fmt::format("unknown trend family '{}'", name));
}

}  // namespace gpdv
