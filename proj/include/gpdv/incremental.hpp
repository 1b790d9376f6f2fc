#pragma once

#include "gpdv/gp_core.hpp"

#include <Eigen/Dense>

#include <limits>
#include <memory>
#include <vector>

namespace gpdv {

/// Discrete measure over the input space: nodes plus non-negative weights
/// summing to one.
struct QuadratureSet {
  PointSet points;
  Eigen::VectorXd weights;

  void validate() const;

  /// M equally spaced nodes on [lo, hi] (1-D), uniform weights.
  static QuadratureSet uniform_grid(double lo, double hi, Index count);
  /// Uniform weights over the given nodes (held-out inputs for tabular data).
  static QuadratureSet uniform_over(PointSet points);
};

/// Integrated residual variance of a bordered system, evaluated point by
/// point with predict().
double integrated_variance(const BorderedSystem& system, const QuadratureSet& quadrature);

/// Integrated prior variance, the value for the empty coalition.
double prior_integrated_variance(const KernelSpec& kernel, const QuadratureSet& quadrature);

/// When a chained Schur update is discarded in favour of a direct rebuild.
struct ResetPolicy {
  double max_condition = 1e10;
  int max_chained_updates = 64;
  /// Largest plausible |IV(A + i) - IV(A)|. Infinite by default: legitimate
  /// steps can be as large as the prior IV, so only explicit thresholds or
  /// impossible steps (IV increase, negative variance) fire.
  double max_abs_iv_step = std::numeric_limits<double>::infinity();
  /// Rebuild when one update shrinks the largest inverse entry by more than
  /// this factor; the chained result then carries the parent's rounding.
  double max_inverse_shrink = 1e2;

  void validate() const;
};

struct IncrementalDiagnostics {
  long long policy_resets = 0;
  long long transition_rebuilds = 0;
  long long breakdown_retries = 0;
};

/// A growing coalition with its bordered inverse, the residual variance (and
/// predictive mean, when targets are cached) at every evaluation node, and
/// their integral. Single owner; copyable.
class IncrementalState {
 public:
  IncrementalState(std::shared_ptr<const CovarianceCache> cache, Eigen::VectorXd weights,
                   ResetPolicy policy = {});

  /// Appends training point i to the coalition via the Schur block update.
  /// Throws NumericalBreakdown when the pivot stays below kPivotFloor after
  /// one full rebuild.
  void add_point(Index i);

  /// add_point followed by the updated integrated variance.
  double iv_step(Index i);

  /// Drops the coalition back to the empty set without releasing buffers.
  void clear();

  double integrated_variance() const { return iv_; }
  /// Weighted squared error of the predictive means against `truth`.
  double weighted_squared_error(const Eigen::VectorXd& truth) const;

  /// Integrated variance of the current coalition from a fresh Cholesky solve.
  double recompute_integrated_variance() const;

  /// ||K~||_1 * ||K~^-1||_1 of the maintained system; 1 for the empty set.
  double condition_estimate() const { return condition_; }

  const std::vector<Index>& active() const { return active_; }
  bool contains(Index i) const { return member_[static_cast<std::size_t>(i)]; }
  Index size() const { return static_cast<Index>(active_.size()); }
  Index border_size() const { return border_; }
  int updates_since_reset() const { return updates_since_reset_; }
  const IncrementalDiagnostics& diagnostics() const { return diagnostics_; }
  const ResetPolicy& policy() const { return policy_; }
  const CovarianceCache& cache() const { return *cache_; }
  const Eigen::VectorXd& weights() const { return weights_; }

  const Eigen::VectorXd& variances() const { return variance_; }
  /// Zero when the cache holds no targets.
  const Eigen::VectorXd& means() const { return mean_; }

  /// Snapshot of the maintained system. Throws on the empty coalition.
  BorderedSystem system() const;

  /// Replaces the maintained inverse and node caches by a direct rebuild.
  void rebuild();

 private:
  Index order() const { return static_cast<Index>(active_.size()) + border_; }
  bool schur_append(Index i);
  void refresh_condition();
  static void shift_border(Eigen::MatrixXd& m, Index data, Index border);
  bool step_is_implausible(double step) const;

  std::shared_ptr<const CovarianceCache> cache_;
  Eigen::VectorXd weights_;
  ResetPolicy policy_;

  std::vector<Index> active_;
  std::vector<bool> member_;
  Index border_ = 0;
  // Bordered matrix and its maintained inverse, both in the top-left
  // order() x order() block with the same row layout.
  Eigen::MatrixXd matrix_;
  Eigen::MatrixXd inverse_;
  // Column j holds k(x_eval, x_{active[j]}).
  Eigen::MatrixXd active_cross_;

  Eigen::VectorXd variance_;
  Eigen::VectorXd mean_;
  double iv_ = 0.0;
  double condition_ = 1.0;
  int updates_since_reset_ = 0;
  IncrementalDiagnostics diagnostics_;
};

}  // namespace gpdv
