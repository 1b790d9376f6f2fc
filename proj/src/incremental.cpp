#include "gpdv/incremental.hpp"

#include "gpdv/errors.hpp"

#include <cmath>
#include <fmt/format.h>

namespace gpdv {

void QuadratureSet::validate() const {
  if (points.rows() < 1) throw InputError("quadrature needs at least one node");
  if (weights.size() != points.rows()) {
    throw InputError(fmt::format("{} quadrature weights for {} nodes", weights.size(),
                                 points.rows()));
  }
  if ((weights.array() < 0.0).any()) throw InputError("quadrature weights must be >= 0");
  if (std::abs(weights.sum() - 1.0) > 1e-12) {
    throw InputError(fmt::format("quadrature weights sum to {}, not 1", weights.sum()));
  }
}

QuadratureSet QuadratureSet::uniform_grid(double lo, double hi, Index count) {
  if (count < 1 || !(hi >= lo)) throw InputError("invalid quadrature grid");
  QuadratureSet q;
  q.points.resize(count, 1);
  for (Index m = 0; m < count; ++m) {
    q.points(m, 0) = count == 1 ? 0.5 * (lo + hi)
                                : lo + (hi - lo) * static_cast<double>(m) /
                                           static_cast<double>(count - 1);
  }
  q.weights = Eigen::VectorXd::Constant(count, 1.0 / static_cast<double>(count));
  return q;
}

QuadratureSet QuadratureSet::uniform_over(PointSet points) {
  if (points.rows() < 1) throw InputError("quadrature needs at least one node");
  QuadratureSet q;
  const Index count = points.rows();
  q.points = std::move(points);
  q.weights = Eigen::VectorXd::Constant(count, 1.0 / static_cast<double>(count));
  return q;
}

double integrated_variance(const BorderedSystem& system, const QuadratureSet& quadrature) {
  quadrature.validate();
  const Eigen::VectorXd none = Eigen::VectorXd::Zero(system.data_size());
  double total = 0.0;
  for (Index m = 0; m < quadrature.points.rows(); ++m) {
    total += quadrature.weights(m) *
             predict(system, none, quadrature.points.row(m)).residual_variance;
  }
  return total;
}

double prior_integrated_variance(const KernelSpec& kernel, const QuadratureSet& quadrature) {
  quadrature.validate();
  double total = 0.0;
  for (Index m = 0; m < quadrature.points.rows(); ++m) {
    total += quadrature.weights(m) *
             eval_kernel(kernel, quadrature.points.row(m), quadrature.points.row(m));
  }
  return total;
}

void ResetPolicy::validate() const {
  if (!(max_condition > 0.0)) throw InputError("reset max_condition must be > 0");
  if (max_chained_updates < 0) throw InputError("reset max_chained_updates must be >= 0");
  if (!(max_abs_iv_step > 0.0)) throw InputError("reset max_abs_iv_step must be > 0");
  if (!(max_inverse_shrink >= 1.0)) throw InputError("reset max_inverse_shrink must be >= 1");
}

IncrementalState::IncrementalState(std::shared_ptr<const CovarianceCache> cache,
                                   Eigen::VectorXd weights, ResetPolicy policy)
    : cache_(std::move(cache)), weights_(std::move(weights)), policy_(policy) {
  if (!cache_) throw InputError("incremental state needs a covariance cache");
  policy_.validate();
  if (weights_.size() != cache_->eval_size()) {
    throw InputError(fmt::format("{} weights for {} evaluation nodes", weights_.size(),
                                 cache_->eval_size()));
  }
  const Index n = cache_->train_size();
  const Index capacity = n + cache_->basis_size();
  member_.assign(static_cast<std::size_t>(n), false);
  active_.reserve(static_cast<std::size_t>(n));
  matrix_.resize(capacity, capacity);
  inverse_.resize(capacity, capacity);
  active_cross_.resize(cache_->eval_size(), n);
  clear();
}

void IncrementalState::clear() {
  for (Index i : active_) member_[static_cast<std::size_t>(i)] = false;
  active_.clear();
  border_ = 0;
  variance_ = cache_->prior_variance();
  mean_ = Eigen::VectorXd::Zero(cache_->eval_size());
  iv_ = weights_.dot(variance_);
  condition_ = 1.0;
  updates_since_reset_ = 0;
}

double IncrementalState::weighted_squared_error(const Eigen::VectorXd& truth) const {
  if (truth.size() != mean_.size()) throw InputError("truth length differs from node count");
  return weights_.dot((mean_ - truth).array().square().matrix());
}

double IncrementalState::recompute_integrated_variance() const {
  return weights_.dot(kriging_posterior(*cache_, active_).variance);
}

BorderedSystem IncrementalState::system() const {
  if (active_.empty()) throw InputError("the empty coalition has no bordered system");
  const Index m = size();
  const auto& c = *cache_;
  PointSet points(m, c.train_points().cols());
  for (Index j = 0; j < m; ++j) points.row(j) = c.train_points().row(active_[j]);
  return BorderedSystem(c.kernel(), c.trend(), active_, std::move(points),
                        matrix_.topLeftCorner(order(), order()),
                        inverse_.topLeftCorner(order(), order()));
}

void IncrementalState::rebuild() {
  if (active_.empty()) {
    clear();
    return;
  }
  const BorderedSystem sys = assemble(*cache_, active_);
  border_ = sys.border_size();
  matrix_.topLeftCorner(sys.size(), sys.size()) = sys.matrix();
  inverse_.topLeftCorner(sys.size(), sys.size()) = sys.inverse();
  const PosteriorSummary post = kriging_posterior(*cache_, active_);
  variance_ = post.variance;
  mean_ = post.mean;
  iv_ = weights_.dot(variance_);
  updates_since_reset_ = 0;
  refresh_condition();
}

void IncrementalState::refresh_condition() {
  const Index q = order();
  if (q == 0) {
    condition_ = 1.0;
    return;
  }
  const double norm = matrix_.topLeftCorner(q, q).cwiseAbs().colwise().sum().maxCoeff();
  const double inv_norm = inverse_.topLeftCorner(q, q).cwiseAbs().colwise().sum().maxCoeff();
  condition_ = std::max(1.0, norm * inv_norm);
}

void IncrementalState::shift_border(Eigen::MatrixXd& a, Index data, Index border) {
  if (border == 0) return;
  a.block(data + 1, data + 1, border, border) = a.block(data, data, border, border).eval();
  a.block(0, data + 1, data, border) = a.block(0, data, data, border).eval();
  a.block(data + 1, 0, border, data) = a.block(data, 0, border, data).eval();
}

bool IncrementalState::schur_append(Index i) {
  const auto& c = *cache_;
  const Index m = size();
  const Index b = border_;
  const Index q = m + b;

  // w = [k(x_A, x_i); f(x_i)], bv = K~_A^-1 w, delta = Schur pivot of the new row.
  Eigen::VectorXd w(q);
  for (Index j = 0; j < m; ++j) w(j) = c.train_gram()(active_[j], i);
  if (b > 0) w.tail(b) = c.train_basis().row(i).head(b).transpose();
  Eigen::VectorXd bv(q);
  if (q > 0) {
    const auto inv = inverse_.topLeftCorner(q, q);
    bv.noalias() = inv * w;
    // One refinement step against the exact bordered matrix keeps the new
    // row accurate even when the maintained inverse has drifted.
    const Eigen::VectorXd residual = w - matrix_.topLeftCorner(q, q) * bv;
    bv.noalias() += inv * residual;
  }
  const double delta = c.train_gram()(i, i) - w.dot(bv);
  if (!(delta > kPivotFloor)) return false;

  // Posterior covariance between every node and x_i under the old coalition.
  Eigen::VectorXd r = c.cross_t().col(i);
  if (m > 0) r.noalias() -= active_cross_.leftCols(m) * bv.head(m);
  if (b > 0) r.noalias() -= c.eval_basis().leftCols(b) * bv.tail(b);
  variance_.array() -= r.array().square() / delta;
  if (c.targets().size() > 0) {
    double fitted = 0.0;
    for (Index j = 0; j < m; ++j) fitted += bv(j) * c.targets()(active_[j]);
    mean_ += r * ((c.targets()(i) - fitted) / delta);
  }

  // New row goes last among the data rows, so the trend block shifts by one.
  shift_border(matrix_, m, b);
  shift_border(inverse_, m, b);
  Eigen::VectorXd shifted(q + 1);
  shifted.head(m) = bv.head(m);
  shifted(m) = 0.0;
  shifted.tail(b) = bv.tail(b);
  inverse_.topLeftCorner(q + 1, q + 1).noalias() += (shifted / delta) * shifted.transpose();
  inverse_.col(m).head(q + 1) = -shifted / delta;
  inverse_.row(m).head(q + 1) = -shifted.transpose() / delta;
  inverse_(m, m) = 1.0 / delta;

  Eigen::VectorXd border_col(q + 1);
  border_col.head(m) = w.head(m);
  border_col(m) = c.train_gram()(i, i);
  border_col.tail(b) = w.tail(b);
  matrix_.col(m).head(q + 1) = border_col;
  matrix_.row(m).head(q + 1) = border_col.transpose();

  active_cross_.col(m) = c.cross_t().col(i);
  active_.push_back(i);
  member_[static_cast<std::size_t>(i)] = true;
  return true;
}

bool IncrementalState::step_is_implausible(double step) const {
  const double scale = std::max(1.0, cache_->kernel().variance);
  if (!std::isfinite(step) || step > 1e-10 * scale) return true;
  if (std::abs(step) > policy_.max_abs_iv_step) return true;
  return variance_.minCoeff() < -1e-10 * scale;
}

void IncrementalState::add_point(Index i) {
  if (i < 0 || i >= cache_->train_size()) {
    throw InputError(fmt::format("training index {} out of range [0, {})", i,
                                 cache_->train_size()));
  }
  if (contains(i)) throw InputError(fmt::format("index {} is already in the coalition", i));

  const double iv_before = iv_;
  if (effective_border(cache_->trend(), size() + 1) != border_) {
    active_.push_back(i);
    member_[static_cast<std::size_t>(i)] = true;
    active_cross_.col(size() - 1) = cache_->cross_t().col(i);
    rebuild();
    ++diagnostics_.transition_rebuilds;
    return;
  }

  const auto inverse_scale = [this] {
    return order() > 0 ? inverse_.topLeftCorner(order(), order()).cwiseAbs().maxCoeff() : 0.0;
  };
  const double parent_scale = inverse_scale();
  if (!schur_append(i)) {
    ++diagnostics_.breakdown_retries;
    rebuild();
    if (!schur_append(i)) {
      throw NumericalBreakdown(fmt::format(
          "Schur pivot for index {} stays below {:.1e} after a rebuild", i, kPivotFloor));
    }
  }
  ++updates_since_reset_;
  iv_ = weights_.dot(variance_);
  refresh_condition();

  if (condition_ > policy_.max_condition ||
      updates_since_reset_ > policy_.max_chained_updates ||
      parent_scale > policy_.max_inverse_shrink * inverse_scale() ||
      step_is_implausible(iv_ - iv_before)) {
    rebuild();
    ++diagnostics_.policy_resets;
  } else {
    for (Index q = 0; q < variance_.size(); ++q) {
      if (variance_(q) < 0.0) variance_(q) = 0.0;
    }
    iv_ = weights_.dot(variance_);
  }
}

double IncrementalState::iv_step(Index i) {
  add_point(i);
  return iv_;
}

}  // namespace gpdv
