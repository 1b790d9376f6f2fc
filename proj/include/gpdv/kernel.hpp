#pragma once

#include <Eigen/Dense>

#include <string>
#include <string_view>

namespace gpdv {

/// Points are stored one per row; rows of a row-major matrix are contiguous.
using PointSet =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using PointRef = Eigen::Ref<const Eigen::RowVectorXd>;

enum class KernelFamily { SquaredExponential, Matern32, Matern52 };

/// Stationary isotropic covariance. The nugget is observation-noise variance
/// and is added by training index in gram(), never inside eval_kernel().
struct KernelSpec {
  KernelFamily family = KernelFamily::SquaredExponential;
  double lengthscale = 1.0;
  double variance = 1.0;
  double nugget = 0.0;

  /// Throws InputError unless lengthscale > 0, variance > 0, nugget >= 0.
  void validate() const;
};

/// Covariance as a function of the Euclidean distance r >= 0.
double kernel_of_distance(const KernelSpec& spec, double r);

double eval_kernel(const KernelSpec& spec, PointRef x, PointRef y);

/// n x n covariance of `points` with `nugget` on the diagonal.
Eigen::MatrixXd gram(const KernelSpec& spec, const PointSet& points);

/// rows(a) x rows(b) noise-free cross covariance.
Eigen::MatrixXd cross_covariance(const KernelSpec& spec, const PointSet& a,
                                 const PointSet& b);

enum class TrendFamily { Simple, Ordinary, Linear };

/// Deterministic trend: zero (simple), constant (ordinary) or affine (linear)
/// in the inputs.
struct TrendBasis {
  TrendFamily family = TrendFamily::Simple;
  Eigen::Index input_dim = 1;

  Eigen::Index size() const;
};

Eigen::VectorXd eval_basis(const TrendBasis& trend, PointRef x);

/// rows(points) x p matrix whose row j is f(x_j).
Eigen::MatrixXd basis_matrix(const TrendBasis& trend, const PointSet& points);

/// Human-readable name of basis column `j`, e.g. "constant" or "x_2".
std::string basis_column_name(const TrendBasis& trend, Eigen::Index j);

std::string_view to_string(KernelFamily family);
std::string_view to_string(TrendFamily family);
KernelFamily parse_kernel_family(std::string_view name);
TrendFamily parse_trend_family(std::string_view name);

}  // namespace gpdv
