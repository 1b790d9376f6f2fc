#include "gpdv/gp_core.hpp"

#include "gpdv/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

namespace gpdv {

namespace {

Eigen::MatrixXd gather(const Eigen::MatrixXd& m, std::span<const Index> rows,
                       std::span<const Index> cols) {
  Eigen::MatrixXd out(rows.size(), cols.size());
  for (Index j = 0; j < static_cast<Index>(cols.size()); ++j) {
    for (Index i = 0; i < static_cast<Index>(rows.size()); ++i) {
      out(i, j) = m(rows[i], cols[j]);
    }
  }
  return out;
}

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& m, std::span<const Index> rows) {
  Eigen::MatrixXd out(rows.size(), m.cols());
  for (Index i = 0; i < static_cast<Index>(rows.size()); ++i) out.row(i) = m.row(rows[i]);
  return out;
}

void check_indices(std::span<const Index> indices, Index n) {
  for (Index i : indices) {
    if (i < 0 || i >= n) {
      throw InputError(fmt::format("training index {} out of range [0, {})", i, n));
    }
  }
}

// Cholesky of an SPD block with an explicit pivot floor: Eigen's LLT only
// reports non-positive pivots, not vanishing ones.
Eigen::LLT<Eigen::MatrixXd> factor_covariance(const Eigen::MatrixXd& k) {
  Eigen::LLT<Eigen::MatrixXd> llt(k);
  const double scale = std::max(1.0, k.diagonal().maxCoeff());
  if (llt.info() != Eigen::Success) {
    throw FactorizationError("covariance matrix is not positive definite "
                             "(duplicate inputs without nugget?)");
  }
  const Eigen::VectorXd diag = Eigen::MatrixXd(llt.matrixL()).diagonal();
  const double min_pivot = diag.array().square().minCoeff();
  if (!(min_pivot > kPivotFloor * scale)) {
    throw FactorizationError(fmt::format(
        "covariance matrix is numerically singular (pivot {:.3e})", min_pivot));
  }
  return llt;
}

}  // namespace

CovarianceCache::CovarianceCache(KernelSpec kernel, TrendBasis trend, PointSet train,
                                 Eigen::VectorXd targets, PointSet eval)
    : kernel_(kernel),
      trend_(trend),
      train_(std::move(train)),
      targets_(std::move(targets)),
      eval_(std::move(eval)) {
  kernel_.validate();
  if (targets_.size() != 0 && targets_.size() != train_.rows()) {
    throw InputError(fmt::format("{} targets for {} training points", targets_.size(),
                                 train_.rows()));
  }
  if (train_.rows() > 0 && eval_.rows() > 0 && train_.cols() != eval_.cols()) {
    throw InputError("training and evaluation points differ in dimension");
  }
  gram_ = train_.rows() > 0 ? gram(kernel_, train_) : Eigen::MatrixXd(0, 0);
  basis_train_ = basis_matrix(trend_, train_);
  cross_ = cross_covariance(kernel_, train_, eval_);
  cross_t_ = cross_.transpose();
  basis_eval_ = basis_matrix(trend_, eval_);
  prior_ = Eigen::VectorXd::Constant(eval_.rows(), kernel_.variance);
}

BorderedSystem::BorderedSystem(KernelSpec kernel, TrendBasis trend,
                               std::vector<Index> active, PointSet active_points,
                               Eigen::MatrixXd matrix, Eigen::MatrixXd inverse)
    : kernel_(kernel),
      trend_(trend),
      active_(std::move(active)),
      points_(std::move(active_points)),
      matrix_(std::move(matrix)),
      inverse_(std::move(inverse)) {}

Index effective_border(const TrendBasis& trend, Index coalition_size) {
  return coalition_size >= trend.size() ? trend.size() : 0;
}

void require_full_column_rank(const TrendBasis& trend, const Eigen::MatrixXd& basis) {
  const Index p = basis.cols();
  if (p == 0) return;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(basis);
  qr.setThreshold(1e-10);
  if (qr.rank() == p) return;
  for (Index j = 1; j <= p; ++j) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> partial(basis.leftCols(j));
    partial.setThreshold(1e-10);
    if (partial.rank() < j) {
      throw AssemblyError(fmt::format(
          "{} trend basis is rank deficient on the active set: column '{}' is "
          "linearly dependent on the preceding columns",
          to_string(trend.family), basis_column_name(trend, j - 1)));
    }
  }
  throw AssemblyError("trend basis is rank deficient on the active set");
}

BorderedSystem assemble(const CovarianceCache& cache, std::span<const Index> indices) {
  if (indices.empty()) throw InputError("cannot assemble a system on an empty active set");
  check_indices(indices, cache.train_size());
  const Index m = static_cast<Index>(indices.size());
  const Index b = effective_border(cache.trend(), m);

  const Eigen::MatrixXd k = gather(cache.train_gram(), indices, indices);
  const Eigen::MatrixXd f = gather_rows(cache.train_basis(), indices).leftCols(b);
  if (b > 0) require_full_column_rank(cache.trend(), f);

  const auto llt = factor_covariance(k);
  const Eigen::MatrixXd k_inv = llt.solve(Eigen::MatrixXd::Identity(m, m));

  Eigen::MatrixXd matrix = Eigen::MatrixXd::Zero(m + b, m + b);
  Eigen::MatrixXd inverse(m + b, m + b);
  matrix.topLeftCorner(m, m) = k;
  if (b == 0) {
    inverse = k_inv;
  } else {
    matrix.topRightCorner(m, b) = f;
    matrix.bottomLeftCorner(b, m) = f.transpose();
    // H = F^T K^-1 F is minus the Schur complement of K in the bordered matrix.
    const Eigen::MatrixXd g = k_inv * f;
    const Eigen::MatrixXd h = f.transpose() * g;
    Eigen::LLT<Eigen::MatrixXd> h_llt(h);
    if (h_llt.info() != Eigen::Success) {
      throw FactorizationError("trend Schur complement is not definite");
    }
    const Eigen::MatrixXd h_inv = h_llt.solve(Eigen::MatrixXd::Identity(b, b));
    const Eigen::MatrixXd g_h = g * h_inv;
    inverse.topLeftCorner(m, m) = k_inv - g_h * g.transpose();
    inverse.topRightCorner(m, b) = g_h;
    inverse.bottomLeftCorner(b, m) = g_h.transpose();
    inverse.bottomRightCorner(b, b) = -h_inv;
  }
  inverse = 0.5 * (inverse + inverse.transpose()).eval();

  PointSet points(m, cache.train_points().cols());
  for (Index i = 0; i < m; ++i) points.row(i) = cache.train_points().row(indices[i]);
  return BorderedSystem(cache.kernel(), cache.trend(),
                        std::vector<Index>(indices.begin(), indices.end()), std::move(points),
                        std::move(matrix), std::move(inverse));
}

BorderedSystem assemble(const KernelSpec& kernel, const TrendBasis& trend,
                        const PointSet& points, std::span<const Index> indices) {
  check_indices(indices, points.rows());
  PointSet active(indices.size(), points.cols());
  for (Index i = 0; i < static_cast<Index>(indices.size()); ++i) {
    active.row(i) = points.row(indices[i]);
  }
  // Build on the active subset only so the gram is |A| x |A|.
  CovarianceCache cache(kernel, trend, std::move(active), Eigen::VectorXd(),
                        PointSet(0, points.cols()));
  std::vector<Index> local(indices.size());
  for (Index i = 0; i < static_cast<Index>(local.size()); ++i) local[i] = i;
  const BorderedSystem sub = assemble(cache, local);
  return BorderedSystem(kernel, trend, std::vector<Index>(indices.begin(), indices.end()),
                        sub.active_points(), sub.matrix(), sub.inverse());
}

Eigen::VectorXd bordered_rhs(const BorderedSystem& system, PointRef x) {
  const Index m = system.data_size();
  const Index b = system.border_size();
  if (x.size() != system.active_points().cols()) {
    throw InputError(fmt::format("prediction point has dimension {}, system has {}",
                                 x.size(), system.active_points().cols()));
  }
  Eigen::VectorXd v(m + b);
  for (Index j = 0; j < m; ++j) {
    v(j) = kernel_of_distance(system.kernel(), (system.active_points().row(j) - x).norm());
  }
  if (b > 0) v.tail(b) = eval_basis(system.trend(), x);
  return v;
}

double clamp_variance(double value, double prior_scale) {
  const double tol = 1e-10 * std::max(1.0, prior_scale);
  if (value >= 0.0) return value;
  if (value >= -tol) return 0.0;
  throw NumericalBreakdown(fmt::format("negative residual variance {:.3e}", value));
}

Prediction predict(const BorderedSystem& system, const Eigen::VectorXd& observations,
                   PointRef x) {
  const Index m = system.data_size();
  if (observations.size() != m) {
    throw InputError(fmt::format("{} observations for {} active points",
                                 observations.size(), m));
  }
  const Eigen::VectorXd v = bordered_rhs(system, x);
  const Eigen::VectorXd sol = system.inverse() * v;
  Prediction out;
  out.weights = sol.head(m);
  out.trend_multipliers = sol.tail(system.border_size());
  out.mean = out.weights.dot(observations);
  out.residual_variance =
      clamp_variance(system.kernel().variance - v.dot(sol), system.kernel().variance);
  return out;
}

BorderedSystem loo_residual_system(const BorderedSystem& system, Index i) {
  const auto& active = system.active();
  const auto it = std::find(active.begin(), active.end(), i);
  if (it == active.end()) {
    throw InputError(fmt::format("index {} is not in the active set", i));
  }
  const Index m = system.data_size();
  const Index b = system.border_size();
  if (m - 1 < std::max<Index>(b, 1)) {
    throw InputError(fmt::format(
        "cannot delete from a system of {} points with a {}-column border", m, b));
  }
  const Index r = static_cast<Index>(it - active.begin());
  const double pivot = system.inverse()(r, r);
  if (!(std::abs(pivot) >= kPivotFloor)) {
    throw NumericalBreakdown(
        fmt::format("deletion pivot {:.3e} for index {} is below the floor", pivot, i));
  }

  std::vector<Index> keep;
  keep.reserve(system.size() - 1);
  for (Index j = 0; j < system.size(); ++j) {
    if (j != r) keep.push_back(j);
  }
  const Eigen::VectorXd c = system.inverse()(keep, r);
  Eigen::MatrixXd inverse = system.inverse()(keep, keep);
  inverse.noalias() -= (c / pivot) * c.transpose();
  Eigen::MatrixXd matrix = system.matrix()(keep, keep);

  std::vector<Index> rest(active);
  rest.erase(rest.begin() + r);
  PointSet points(m - 1, system.active_points().cols());
  for (Index j = 0, k = 0; j < m; ++j) {
    if (j != r) points.row(k++) = system.active_points().row(j);
  }
  return BorderedSystem(system.kernel(), system.trend(), std::move(rest), std::move(points),
                        std::move(matrix), std::move(inverse));
}

namespace {

Eigen::MatrixXd eval_rhs(const CovarianceCache& cache, const BorderedSystem& system) {
  const Index m = system.data_size();
  const Index b = system.border_size();
  Eigen::MatrixXd v(m + b, cache.eval_size());
  for (Index j = 0; j < m; ++j) v.row(j) = cache.cross().row(system.active()[j]);
  if (b > 0) v.bottomRows(b) = cache.eval_basis().transpose();
  return v;
}

}  // namespace

Eigen::VectorXd residual_variances(const CovarianceCache& cache,
                                   const BorderedSystem& system) {
  const Eigen::MatrixXd v = eval_rhs(cache, system);
  const Eigen::MatrixXd sol = system.inverse() * v;
  Eigen::VectorXd s = cache.prior_variance() - v.cwiseProduct(sol).colwise().sum().transpose();
  for (Index q = 0; q < s.size(); ++q) s(q) = clamp_variance(s(q), cache.kernel().variance);
  return s;
}

Eigen::VectorXd predictive_means(const CovarianceCache& cache,
                                 const BorderedSystem& system) {
  if (cache.targets().size() == 0) throw InputError("cache holds no targets");
  const Index m = system.data_size();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(system.size());
  for (Index j = 0; j < m; ++j) rhs(j) = cache.targets()(system.active()[j]);
  const Eigen::VectorXd alpha = system.inverse() * rhs;
  return eval_rhs(cache, system).transpose() * alpha;
}

PosteriorSummary kriging_posterior(const CovarianceCache& cache,
                                   std::span<const Index> indices) {
  check_indices(indices, cache.train_size());
  const Index n_eval = cache.eval_size();
  const Index m = static_cast<Index>(indices.size());
  const bool with_mean = cache.targets().size() > 0;
  PosteriorSummary out;
  out.mean = Eigen::VectorXd::Zero(n_eval);
  out.variance = cache.prior_variance();
  if (m == 0) return out;

  const Index b = effective_border(cache.trend(), m);
  const Eigen::MatrixXd k = gather(cache.train_gram(), indices, indices);
  const auto llt = factor_covariance(k);
  const auto lower = llt.matrixL();

  // Lk = L^-1 k(x_A, x) for every evaluation point.
  const Eigen::MatrixXd lk = lower.solve(gather_rows(cache.cross(), indices));
  out.variance -= lk.colwise().squaredNorm().transpose();

  Eigen::VectorXd lz;
  if (with_mean) {
    Eigen::VectorXd z(m);
    for (Index j = 0; j < m; ++j) z(j) = cache.targets()(indices[j]);
    lz = lower.solve(z);
    out.mean = lk.transpose() * lz;
  }

  if (b > 0) {
    const Eigen::MatrixXd f = gather_rows(cache.train_basis(), indices);
    require_full_column_rank(cache.trend(), f);
    const Eigen::MatrixXd w = lower.solve(f);
    Eigen::LLT<Eigen::MatrixXd> h_llt(w.transpose() * w);
    if (h_llt.info() != Eigen::Success) {
      throw FactorizationError("trend Schur complement is not definite");
    }
    // u(x) = f(x) - F^T K^-1 k(x): the part of the trend the data cannot explain.
    const Eigen::MatrixXd u = cache.eval_basis().transpose() - w.transpose() * lk;
    const Eigen::MatrixXd h_u = h_llt.solve(u);
    out.variance += u.cwiseProduct(h_u).colwise().sum().transpose();
    if (with_mean) {
      const Eigen::VectorXd beta = h_llt.solve(w.transpose() * lz);
      out.mean += u.transpose() * beta;
    }
  }
  for (Index q = 0; q < n_eval; ++q) {
    out.variance(q) = clamp_variance(out.variance(q), cache.kernel().variance);
  }
  return out;
}

}  // namespace gpdv
