#pragma once

#include "gpdv/kernel.hpp"

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace gpdv {

using Index = Eigen::Index;

/// Precomputed covariance blocks between a training set and a fixed set of
/// evaluation points (quadrature nodes or held-out inputs). Every coalition
/// model reads sub-blocks of these matrices instead of re-evaluating kernels.
class CovarianceCache {
 public:
  CovarianceCache(KernelSpec kernel, TrendBasis trend, PointSet train,
                  Eigen::VectorXd targets, PointSet eval);

  const KernelSpec& kernel() const { return kernel_; }
  const TrendBasis& trend() const { return trend_; }
  const PointSet& train_points() const { return train_; }
  const PointSet& eval_points() const { return eval_; }
  /// Empty when the cache serves variance-only computations.
  const Eigen::VectorXd& targets() const { return targets_; }

  Index train_size() const { return train_.rows(); }
  Index eval_size() const { return eval_.rows(); }
  Index basis_size() const { return trend_.size(); }

  /// Training gram with the nugget on the diagonal.
  const Eigen::MatrixXd& train_gram() const { return gram_; }
  const Eigen::MatrixXd& train_basis() const { return basis_train_; }
  /// train_size x eval_size, noise free.
  const Eigen::MatrixXd& cross() const { return cross_; }
  /// eval_size x train_size; column j is k(x_eval, x_j).
  const Eigen::MatrixXd& cross_t() const { return cross_t_; }
  const Eigen::MatrixXd& eval_basis() const { return basis_eval_; }
  /// k(x, x) at each evaluation point.
  const Eigen::VectorXd& prior_variance() const { return prior_; }

 private:
  KernelSpec kernel_;
  TrendBasis trend_;
  PointSet train_;
  Eigen::VectorXd targets_;
  PointSet eval_;
  Eigen::MatrixXd gram_;
  Eigen::MatrixXd basis_train_;
  Eigen::MatrixXd cross_;
  Eigen::MatrixXd cross_t_;
  Eigen::MatrixXd basis_eval_;
  Eigen::VectorXd prior_;
};

/// The Universal-Kriging system [[K_A, F_A], [F_A^T, 0]] of an active set A
/// and its inverse. Data rows come first in `active` order, the trend border
/// trails. When |A| < p the border is dropped and the system is the
/// simple-Kriging covariance K_A alone.
class BorderedSystem {
 public:
  BorderedSystem(KernelSpec kernel, TrendBasis trend, std::vector<Index> active,
                 PointSet active_points, Eigen::MatrixXd matrix,
                 Eigen::MatrixXd inverse);

  const KernelSpec& kernel() const { return kernel_; }
  const TrendBasis& trend() const { return trend_; }
  const std::vector<Index>& active() const { return active_; }
  const PointSet& active_points() const { return points_; }
  const Eigen::MatrixXd& matrix() const { return matrix_; }
  const Eigen::MatrixXd& inverse() const { return inverse_; }

  Index data_size() const { return static_cast<Index>(active_.size()); }
  /// Number of trend rows actually present (0 in the simple fallback).
  Index border_size() const { return matrix_.rows() - data_size(); }
  Index size() const { return matrix_.rows(); }

 private:
  KernelSpec kernel_;
  TrendBasis trend_;
  std::vector<Index> active_;
  PointSet points_;
  Eigen::MatrixXd matrix_;
  Eigen::MatrixXd inverse_;
};

struct Prediction {
  double mean = 0.0;
  Eigen::VectorXd weights;
  /// Trailing block of the bordered solution (Lagrange multipliers of the
  /// unbiasedness constraints), not the GLS trend coefficients.
  Eigen::VectorXd trend_multipliers;
  double residual_variance = 0.0;
};

/// Border size used for a coalition of `coalition_size` points.
Index effective_border(const TrendBasis& trend, Index coalition_size);

/// Throws AssemblyError naming the first trend column that is linearly
/// dependent on the preceding ones.
void require_full_column_rank(const TrendBasis& trend, const Eigen::MatrixXd& basis);

/// Direct blockwise construction: Cholesky of K_A, then the p x p Schur
/// complement -F^T K_A^{-1} F, then the block inverse.
BorderedSystem assemble(const KernelSpec& kernel, const TrendBasis& trend,
                        const PointSet& points, std::span<const Index> indices);
BorderedSystem assemble(const CovarianceCache& cache, std::span<const Index> indices);

/// Right-hand side [k(x_A, x); f(x)] of the bordered solve at `x`.
Eigen::VectorXd bordered_rhs(const BorderedSystem& system, PointRef x);

Prediction predict(const BorderedSystem& system, const Eigen::VectorXd& observations,
                   PointRef x);

/// Clamps variances in [-tol, 0) to zero and throws NumericalBreakdown below.
double clamp_variance(double value, double prior_scale);

/// The system on active \ {i}, obtained from the parent inverse by the
/// partitioned-inverse deletion identity.
BorderedSystem loo_residual_system(const BorderedSystem& system, Index i);

/// Pivot below which a Schur update or deletion is declared broken down.
inline constexpr double kPivotFloor = 1e-12;

struct PosteriorSummary {
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;
};

/// Posterior mean and residual variance at the cache's evaluation points for
/// a coalition, computed from a Cholesky factorization of K_A and the GLS
/// trend (no bordered inverse involved). The empty coalition yields the
/// prior: mean 0 and variance k(x, x).
PosteriorSummary kriging_posterior(const CovarianceCache& cache,
                                   std::span<const Index> indices);

/// Residual variance at each evaluation point from an explicit bordered
/// inverse, k(x,x) - v^T inverse v.
Eigen::VectorXd residual_variances(const CovarianceCache& cache,
                                   const BorderedSystem& system);

/// Bordered-system predictive means at each evaluation point.
Eigen::VectorXd predictive_means(const CovarianceCache& cache,
                                 const BorderedSystem& system);

}  // namespace gpdv
