#pragma once

#include "gpdv/gp_core.hpp"
#include "gpdv/incremental.hpp"

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gpdv {

enum class UtilityKind { IntegratedVariance, TestMse };

/// Coalition utility Phi(A) of a GP trained on A. Both kinds are
/// lower-is-better; valuations report reductions.
class Utility {
 public:
  /// Integrated residual variance against a quadrature measure.
  static Utility integrated_variance(const KernelSpec& kernel, const TrendBasis& trend,
                                     PointSet train, const QuadratureSet& quadrature);
  /// Mean squared error on a held-out set. The empty coalition (and any
  /// coalition smaller than the trend) predicts with a zero prior mean.
  static Utility test_mse(const KernelSpec& kernel, const TrendBasis& trend, PointSet train,
                          Eigen::VectorXd train_targets, PointSet test,
                          Eigen::VectorXd test_targets);

  UtilityKind kind() const { return kind_; }
  Index size() const { return cache_->train_size(); }
  const CovarianceCache& cache() const { return *cache_; }
  const Eigen::VectorXd& weights() const { return weights_; }

  /// Direct Cholesky evaluation of Phi(coalition); the coalition may be empty.
  double evaluate(std::span<const Index> coalition) const;
  /// Phi on an explicit bordered system (bordered-inverse route).
  double evaluate(const BorderedSystem& system) const;
  /// Phi of the coalition currently held by an incremental walker.
  double evaluate(const IncrementalState& state) const;

  double empty_value() const;
  double full_value() const;

  IncrementalState start(const ResetPolicy& policy) const;

 private:
  Utility(UtilityKind kind, std::shared_ptr<const CovarianceCache> cache,
          Eigen::VectorXd weights, Eigen::VectorXd truth);

  UtilityKind kind_;
  std::shared_ptr<const CovarianceCache> cache_;
  Eigen::VectorXd weights_;
  Eigen::VectorXd truth_;
};

enum class Method { Loo, LooSchur, ShapleyExact, ShapleyMc };
enum class LooBackend { Naive, Schur };

struct ValuationConfig {
  long long budget = 100;
  double tolerance = 0.0;
  long long burn_in = 0;
  std::uint64_t seed = 0;
  int threads = 1;
  ResetPolicy reset;

  /// Throws InputError unless budget >= 1, tolerance >= 0, 0 <= burn_in < n.
  void validate(Index n) const;
};

struct ValuationDiagnostics {
  long long discarded_permutations = 0;
  long long policy_resets = 0;
  long long transition_rebuilds = 0;
  long long breakdown_retries = 0;
  /// Data whose Schur downdate broke down and were valued naively.
  std::vector<Index> naive_fallbacks;
};

/// Per-datum values as reductions of the utility (positive = beneficial).
struct ValuationReport {
  Method method = Method::Loo;
  UtilityKind utility = UtilityKind::IntegratedVariance;
  std::vector<double> values;
  std::vector<double> std_errors;
  std::vector<long long> samples;
  /// Phi(empty) - Phi(full).
  double total_utility_gap = 0.0;
  ValuationConfig config;
  ValuationDiagnostics diagnostics;

  std::size_t size() const { return values.size(); }
};

/// value_i = Phi(D \ {i}) - Phi(D).
ValuationReport loo_values(const Utility& utility, LooBackend backend, int threads = 1);

inline constexpr Index kExactShapleyLimit = 12;

/// Exact Shapley over all 2^n coalitions; refuses n > n_limit.
ValuationReport shapley_exact(const Utility& utility, Index n_limit = kExactShapleyLimit,
                              int threads = 1);

/// Permutation-sampling Shapley with Schur-updated coalition utilities,
/// burn-in and truncation. Reproducible for a fixed seed at any thread count.
ValuationReport shapley_mc(const Utility& utility, const ValuationConfig& config);

/// Random permutation number `index` of the stream defined by `seed`.
std::vector<Index> draw_permutation(Index n, std::uint64_t seed, long long index,
                                    int attempt = 0);

/// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> a, std::span<const double> b);

/// Average (1-based) ranks, ties sharing the mean of their positions.
std::vector<double> average_ranks(std::span<const double> values);

/// Values divided by their sum; refuses a zero sum.
std::vector<double> normalize(std::span<const double> values);
std::vector<double> normalize(const ValuationReport& report);

std::string_view to_string(Method method);
std::string_view to_string(UtilityKind kind);
Method parse_method(std::string_view name);
UtilityKind parse_utility_kind(std::string_view name);

/// CSV with header `index,value,std_error,samples,method`.
void write_valuation_csv(std::ostream& out, const ValuationReport& report);

struct ValuationRow {
  Index index = 0;
  double value = 0.0;
  double std_error = 0.0;
  long long samples = 0;
  std::string method;
};

/// Reads files written by write_valuation_csv; throws InputError on schema
/// mismatch or an empty body.
std::vector<ValuationRow> read_valuation_csv(std::istream& in);

}  // namespace gpdv
