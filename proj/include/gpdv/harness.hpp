#pragma once

#include "gpdv/incremental.hpp"
#include "gpdv/kernel.hpp"
#include "gpdv/valuation.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace gpdv {

/// Tabular regression data. Features are stored standardized; `feature_mean`
/// and `feature_scale` map them back (raw = standardized * scale + mean).
struct Dataset {
  PointSet features;
  Eigen::VectorXd targets;
  std::vector<std::string> feature_names;
  std::string target_name = "z";
  std::string provenance;
  Eigen::RowVectorXd feature_mean;
  Eigen::RowVectorXd feature_scale;
  /// Row of each datum in the dataset this one was split from.
  std::vector<Index> source_rows;

  Index size() const { return features.rows(); }
  Index dimension() const { return features.cols(); }
  PointSet raw_features() const;
  /// Rows `rows` of this dataset, standardization kept.
  Dataset subset(std::span<const Index> rows) const;
};

/// 1-D sine data z = sin(x) + noise with an optional tight cluster and an
/// optional isolated point. Fractions are relative to the domain width.
struct SinusSpec {
  Index n = 20;
  double lo = 0.0;
  double hi = 10.0;
  double noise_sd = 0.0;
  std::uint64_t seed = 0;
  Index cluster_size = 0;
  double cluster_center = 0.25;
  /// Cluster members fall within +-cluster_half_width of the center.
  double cluster_half_width = 0.02;
  bool isolated = false;
  double isolated_at = 0.9;
  /// No other point lies within this distance of the isolated point.
  double isolation_radius = 0.3;
};

/// Index of the isolated point (last row) when spec.isolated; cluster members
/// occupy rows [0, cluster_size).
Dataset gen_synthetic_sinus(const SinusSpec& spec);

/// Reads a headed numeric CSV; `target_column` names the response. Rows with
/// missing or non-numeric cells are rejected with their line number.
Dataset ingest_csv(const std::filesystem::path& path, const std::string& target_column);
Dataset ingest_csv(std::istream& in, const std::string& target_column,
                   const std::string& provenance = "stream");

void write_dataset_csv(std::ostream& out, const Dataset& dataset);

/// Seeded shuffle, then the first round(test_fraction * n) rows go to test.
std::pair<Dataset, Dataset> split(const Dataset& dataset, double test_fraction,
                                  std::uint64_t seed);

struct RemovalCurve {
  std::string method;
  std::vector<double> retention;
  /// NaN where the retained subset is smaller than the trend dimension.
  std::vector<double> metric;
  std::vector<double> metric_std;
  std::vector<long long> seed_count;
};

struct RemovalBenchmarkSpec {
  KernelSpec kernel;
  TrendBasis trend;
  UtilityKind utility = UtilityKind::IntegratedVariance;
  /// Measure for IV valuations and the IV-vs-retention curve.
  QuadratureSet quadrature;
  std::vector<Method> methods;
  std::vector<double> retention;
  std::vector<std::uint64_t> random_seeds;
  ValuationConfig valuation;
};

struct RemovalBenchmarkResult {
  std::vector<RemovalCurve> mse_curves;
  std::vector<RemovalCurve> iv_curves;
  std::vector<ValuationReport> valuations;
};

/// Builds the valuation utility the benchmark (and the CLI) use for `kind`.
Utility make_utility(UtilityKind kind, const KernelSpec& kernel, const TrendBasis& trend,
                     const Dataset& train, const Dataset& test,
                     const QuadratureSet& quadrature);

ValuationReport run_method(Method method, const Utility& utility,
                           const ValuationConfig& config);

/// Values the training data with each method, keeps the top fraction,
/// refits directly on the retained subset and records test MSE and IV. A
/// random-removal baseline averaged over `random_seeds` is appended.
RemovalBenchmarkResult removal_benchmark(const Dataset& train, const Dataset& test,
                                         const RemovalBenchmarkSpec& spec);

/// Training indices ordered from most to least valuable (ties by index).
std::vector<Index> rank_by_value(std::span<const double> values);

/// Number of points kept at retention fraction `f` out of `n`.
Index retained_count(double f, Index n);

/// IV along the prefixes of one ordering of the training data.
struct IvTracePoint {
  Index step = 0;
  Index index = 0;
  double iv = 0.0;
  double condition = 0.0;
  long long resets = 0;
};

std::vector<IvTracePoint> iv_trace(const Utility& utility, std::span<const Index> order,
                                   const ResetPolicy& policy);

/// Header `step,index,iv,condition,resets`; step 0 is the empty coalition.
void write_iv_trace_csv(std::ostream& out, const std::vector<IvTracePoint>& trace);
std::vector<IvTracePoint> read_iv_trace_csv(std::istream& in);

/// Header `method,retention,metric,metric_std,seed_count`.
void write_removal_csv(std::ostream& out, const std::vector<RemovalCurve>& curves);
std::vector<RemovalCurve> read_removal_csv(std::istream& in);

}  // namespace gpdv
