#include "gpdv/harness.hpp"

#include "gpdv/csv.hpp"
#include "gpdv/errors.hpp"
#include "gpdv/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <map>
#include <numeric>
#include <random>

namespace gpdv {

PointSet Dataset::raw_features() const {
  PointSet raw = features;
  for (Index i = 0; i < raw.rows(); ++i) {
    raw.row(i) = raw.row(i).cwiseProduct(feature_scale) + feature_mean;
  }
  return raw;
}

Dataset Dataset::subset(std::span<const Index> rows) const {
  Dataset out;
  out.features.resize(static_cast<Index>(rows.size()), dimension());
  out.targets.resize(static_cast<Index>(rows.size()));
  for (Index k = 0; k < static_cast<Index>(rows.size()); ++k) {
    out.features.row(k) = features.row(rows[k]);
    out.targets(k) = targets(rows[k]);
    out.source_rows.push_back(source_rows.empty() ? rows[k] : source_rows[rows[k]]);
  }
  out.feature_names = feature_names;
  out.target_name = target_name;
  out.provenance = provenance;
  out.feature_mean = feature_mean;
  out.feature_scale = feature_scale;
  return out;
}

Dataset gen_synthetic_sinus(const SinusSpec& spec) {
  if (spec.n < 2) throw InputError("synthetic dataset needs n >= 2");
  if (!(spec.hi > spec.lo)) throw InputError("synthetic domain must have hi > lo");
  const Index special = spec.cluster_size + (spec.isolated ? 1 : 0);
  if (spec.cluster_size < 0 || special > spec.n) {
    throw InputError("cluster and isolated point do not fit in n");
  }
  const double width = spec.hi - spec.lo;
  const double iso = spec.lo + spec.isolated_at * width;
  const double radius = spec.isolation_radius * width;
  const double center = spec.lo + spec.cluster_center * width;
  const double half = spec.cluster_half_width * width;
  if (spec.isolated && spec.cluster_size > 0 && std::abs(center - iso) < radius + half) {
    throw InputError("cluster overlaps the isolated point's exclusion zone");
  }

  // Free points avoid (iso - radius, iso + radius) when an isolated point exists.
  const double gap_lo = spec.isolated ? std::max(spec.lo, iso - radius) : spec.hi;
  const double gap_hi = spec.isolated ? std::min(spec.hi, iso + radius) : spec.hi;
  const double free_length = width - (gap_hi - gap_lo);
  const Index free_count = spec.n - special;
  if (free_count > 0 && !(free_length > 0.0)) {
    throw InputError("isolation radius leaves no room for the remaining points");
  }

  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);

  Eigen::VectorXd x(spec.n);
  Index row = 0;
  for (Index k = 0; k < spec.cluster_size; ++k) x(row++) = center + half * (2.0 * unit(rng) - 1.0);
  for (Index k = 0; k < free_count; ++k) {
    double u = spec.lo + free_length * unit(rng);
    if (u >= gap_lo) u += gap_hi - gap_lo;
    x(row++) = std::min(u, spec.hi);
  }
  if (spec.isolated) x(row++) = iso;

  Dataset out;
  out.features = x;
  out.targets.resize(spec.n);
  for (Index i = 0; i < spec.n; ++i) {
    out.targets(i) = std::sin(x(i)) + (spec.noise_sd > 0.0 ? spec.noise_sd * noise(rng) : 0.0);
  }
  out.feature_names = {"x"};
  out.target_name = "z";
  out.provenance = fmt::format("synthetic-sinus(n={}, seed={})", spec.n, spec.seed);
  // Inputs stay in domain units so quadrature grids and lengthscales share them.
  out.feature_mean = Eigen::RowVectorXd::Zero(1);
  out.feature_scale = Eigen::RowVectorXd::Ones(1);
  return out;
}

Dataset ingest_csv(std::istream& in, const std::string& target_column,
                   const std::string& provenance) {
  std::string line;
  long long line_number = 0;
  if (!csv::next_record(in, line, line_number)) {
    throw InputError(fmt::format("{}: file is empty (header row required)", provenance));
  }
  const auto header = csv::split_line(line);
  const auto target_it = std::find(header.begin(), header.end(), target_column);
  if (target_it == header.end()) {
    throw InputError(fmt::format("{}: target column '{}' not found in header", provenance,
                                 target_column));
  }
  const auto target_pos = static_cast<std::size_t>(target_it - header.begin());

  std::vector<std::vector<double>> rows;
  while (csv::next_record(in, line, line_number)) {
    const auto fields = csv::split_line(line);
    if (fields.size() != header.size()) {
      throw InputError(fmt::format("{}: line {} has {} fields, header has {}", provenance,
                                   line_number, fields.size(), header.size()));
    }
    std::vector<double> values(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c) {
      if (fields[c].empty()) {
        throw InputError(fmt::format("{}: line {} has a missing value in column '{}'",
                                     provenance, line_number, header[c]));
      }
      if (!csv::parse_double(fields[c], values[c]) || !std::isfinite(values[c])) {
        throw InputError(fmt::format("{}: line {} column '{}' is not numeric ('{}')",
                                     provenance, line_number, header[c], fields[c]));
      }
    }
    rows.push_back(std::move(values));
  }
  if (rows.size() < 2) {
    throw InputError(fmt::format("{}: need at least 2 data rows, found {}", provenance,
                                 rows.size()));
  }

  const Index n = static_cast<Index>(rows.size());
  const Index d = static_cast<Index>(header.size()) - 1;
  Dataset out;
  out.features.resize(n, d);
  out.targets.resize(n);
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c != target_pos) out.feature_names.push_back(header[c]);
  }
  for (Index i = 0; i < n; ++i) {
    Index col = 0;
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c == target_pos) {
        out.targets(i) = rows[static_cast<std::size_t>(i)][c];
      } else {
        out.features(i, col++) = rows[static_cast<std::size_t>(i)][c];
      }
    }
  }
  out.target_name = target_column;
  out.provenance = provenance;
  out.feature_mean = out.features.colwise().mean();
  out.feature_scale.resize(d);
  for (Index c = 0; c < d; ++c) {
    const double sd = std::sqrt(
        (out.features.col(c).array() - out.feature_mean(c)).square().sum() / static_cast<double>(n));
    out.feature_scale(c) = sd > 0.0 ? sd : 1.0;
  }
  for (Index i = 0; i < n; ++i) {
    out.features.row(i) =
        (out.features.row(i) - out.feature_mean).cwiseQuotient(out.feature_scale);
  }
  return out;
}

Dataset ingest_csv(const std::filesystem::path& path, const std::string& target_column) {
  std::ifstream in(path);
  if (!in) throw InputError(fmt::format("cannot open dataset '{}'", path.string()));
  return ingest_csv(in, target_column, path.string());
}

void write_dataset_csv(std::ostream& out, const Dataset& dataset) {
  const PointSet raw = dataset.raw_features();
  for (const auto& name : dataset.feature_names) out << name << ',';
  out << dataset.target_name << '\n';
  for (Index i = 0; i < dataset.size(); ++i) {
    for (Index c = 0; c < raw.cols(); ++c) out << csv::format_double(raw(i, c)) << ',';
    out << csv::format_double(dataset.targets(i)) << '\n';
  }
}

std::pair<Dataset, Dataset> split(const Dataset& dataset, double test_fraction,
                                  std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw InputError(fmt::format("test fraction {} must lie in (0, 1)", test_fraction));
  }
  const Index n = dataset.size();
  const auto test_count = static_cast<Index>(std::llround(test_fraction * static_cast<double>(n)));
  if (test_count < 1 || test_count > n - 1) {
    throw InputError(fmt::format("test fraction {} on {} rows leaves an empty side",
                                 test_fraction, n));
  }
  const auto perm = draw_permutation(n, seed, 0);
  std::vector<Index> test(perm.begin(), perm.begin() + test_count);
  std::vector<Index> train(perm.begin() + test_count, perm.end());
  std::sort(test.begin(), test.end());
  std::sort(train.begin(), train.end());
  return {dataset.subset(train), dataset.subset(test)};
}

Utility make_utility(UtilityKind kind, const KernelSpec& kernel, const TrendBasis& trend,
                     const Dataset& train, const Dataset& test,
                     const QuadratureSet& quadrature) {
  if (kind == UtilityKind::IntegratedVariance) {
    return Utility::integrated_variance(kernel, trend, train.features, quadrature);
  }
  return Utility::test_mse(kernel, trend, train.features, train.targets, test.features,
                           test.targets);
}

ValuationReport run_method(Method method, const Utility& utility,
                           const ValuationConfig& config) {
  switch (method) {
    case Method::Loo: return loo_values(utility, LooBackend::Naive, config.threads);
    case Method::LooSchur: return loo_values(utility, LooBackend::Schur, config.threads);
    case Method::ShapleyExact:
      return shapley_exact(utility, kExactShapleyLimit, config.threads);
    case Method::ShapleyMc: return shapley_mc(utility, config);
  }
  throw InputError("unknown method");
}

std::vector<Index> rank_by_value(std::span<const double> values) {
  std::vector<Index> order(values.size());
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    return values[static_cast<std::size_t>(a)] > values[static_cast<std::size_t>(b)];
  });
  return order;
}

Index retained_count(double f, Index n) {
  return std::clamp<Index>(static_cast<Index>(std::llround(f * static_cast<double>(n))), 1, n);
}

namespace {

std::vector<double> checked_grid(std::vector<double> grid) {
  if (grid.empty()) throw InputError("retention grid is empty");
  for (double f : grid) {
    if (!(f > 0.0 && f <= 1.0)) {
      throw InputError(fmt::format("retention fraction {} outside (0, 1]", f));
    }
  }
  std::sort(grid.begin(), grid.end(), std::greater<>());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

struct RefitOutcome {
  double mse = std::nan("");
  double iv = std::nan("");
};

}  // namespace

RemovalBenchmarkResult removal_benchmark(const Dataset& train, const Dataset& test,
                                         const RemovalBenchmarkSpec& spec) {
  if (spec.methods.empty()) throw InputError("removal benchmark needs at least one method");
  const std::vector<double> grid = checked_grid(spec.retention);
  const Index n = train.size();
  const Index p = spec.trend.size();

  // Refits score against the held-out set (MSE) and the quadrature (IV).
  const CovarianceCache mse_cache(spec.kernel, spec.trend, train.features, train.targets,
                                  test.features);
  const CovarianceCache iv_cache(spec.kernel, spec.trend, train.features, Eigen::VectorXd(),
                                 spec.quadrature.points);
  auto refit = [&](std::vector<Index> keep) {
    RefitOutcome out;
    if (static_cast<Index>(keep.size()) < std::max<Index>(p, 1)) return out;
    std::sort(keep.begin(), keep.end());
    const auto post = kriging_posterior(mse_cache, keep);
    out.mse = (post.mean - test.targets).squaredNorm() / static_cast<double>(test.size());
    out.iv = spec.quadrature.weights.dot(kriging_posterior(iv_cache, keep).variance);
    return out;
  };

  const Utility utility =
      make_utility(spec.utility, spec.kernel, spec.trend, train, test, spec.quadrature);
  RemovalBenchmarkResult result;
  for (Method method : spec.methods) {
    result.valuations.push_back(run_method(method, utility, spec.valuation));
  }

  // One cell per (series, grid point, seed); slots make the reduction order fixed.
  const std::size_t series = spec.methods.size() + (spec.random_seeds.empty() ? 0 : 1);
  const std::size_t seeds = std::max<std::size_t>(1, spec.random_seeds.size());
  std::vector<std::vector<Index>> orders;
  for (const auto& report : result.valuations) orders.push_back(rank_by_value(report.values));
  for (std::uint64_t seed : spec.random_seeds) orders.push_back(draw_permutation(n, seed, 0));

  std::vector<RefitOutcome> cells(series * grid.size() * seeds);
  auto cell_index = [&](std::size_t s, std::size_t g, std::size_t r) {
    return (s * grid.size() + g) * seeds + r;
  };
  std::vector<std::size_t> work;
  for (std::size_t s = 0; s < series; ++s) {
    const bool random = s == spec.methods.size();
    for (std::size_t g = 0; g < grid.size(); ++g) {
      for (std::size_t r = 0; r < (random ? spec.random_seeds.size() : 1); ++r) {
        work.push_back(cell_index(s, g, r));
      }
    }
  }
  parallel_for(static_cast<std::ptrdiff_t>(work.size()), spec.valuation.threads,
               [&](std::ptrdiff_t w) {
                 const std::size_t cell = work[static_cast<std::size_t>(w)];
                 const std::size_t r = cell % seeds;
                 const std::size_t g = (cell / seeds) % grid.size();
                 const std::size_t s = cell / seeds / grid.size();
                 const auto& order = orders[s == spec.methods.size() ? spec.methods.size() + r : s];
                 const Index k = retained_count(grid[g], n);
                 cells[cell] = refit(std::vector<Index>(order.begin(), order.begin() + k));
               });

  for (std::size_t s = 0; s < series; ++s) {
    const bool random = s == spec.methods.size();
    const std::size_t reps = random ? spec.random_seeds.size() : 1;
    RemovalCurve mse_curve, iv_curve;
    mse_curve.method = random ? "random" : std::string(to_string(spec.methods[s]));
    iv_curve.method = mse_curve.method;
    for (std::size_t g = 0; g < grid.size(); ++g) {
      for (auto [curve, pick] :
           {std::pair{&mse_curve, &RefitOutcome::mse}, std::pair{&iv_curve, &RefitOutcome::iv}}) {
        double mean = 0.0;
        for (std::size_t r = 0; r < reps; ++r) mean += cells[cell_index(s, g, r)].*pick;
        mean /= static_cast<double>(reps);
        double var = 0.0;
        for (std::size_t r = 0; r < reps; ++r) {
          const double dev = cells[cell_index(s, g, r)].*pick - mean;
          var += dev * dev;
        }
        curve->retention.push_back(grid[g]);
        curve->metric.push_back(mean);
        curve->metric_std.push_back(reps > 1 ? std::sqrt(var / static_cast<double>(reps - 1)) : 0.0);
        curve->seed_count.push_back(static_cast<long long>(reps));
      }
    }
    result.mse_curves.push_back(std::move(mse_curve));
    result.iv_curves.push_back(std::move(iv_curve));
  }
  return result;
}

void write_removal_csv(std::ostream& out, const std::vector<RemovalCurve>& curves) {
  out << "method,retention,metric,metric_std,seed_count\n";
  for (const auto& curve : curves) {
    for (std::size_t g = 0; g < curve.retention.size(); ++g) {
      out << curve.method << ',' << csv::format_double(curve.retention[g]) << ','
          << csv::format_double(curve.metric[g]) << ','
          << csv::format_double(curve.metric_std[g]) << ',' << curve.seed_count[g] << '\n';
    }
  }
}

std::vector<RemovalCurve> read_removal_csv(std::istream& in) {
  std::string line;
  long long line_number = 0;
  if (!csv::next_record(in, line, line_number)) throw InputError("removal CSV is empty");
  const std::vector<std::string> expected{"method", "retention", "metric", "metric_std",
                                          "seed_count"};
  if (csv::split_line(line) != expected) {
    throw InputError(
        "removal CSV header must be 'method,retention,metric,metric_std,seed_count'");
  }
  std::vector<RemovalCurve> curves;
  std::map<std::string, std::size_t> slot;
  while (csv::next_record(in, line, line_number)) {
    const auto fields = csv::split_line(line);
    double retention = 0.0, metric = 0.0, sd = 0.0, count = 0.0;
    if (fields.size() != 5 || fields[0].empty() || !csv::parse_double(fields[1], retention) ||
        !csv::parse_double(fields[2], metric) || !csv::parse_double(fields[3], sd) ||
        !csv::parse_double(fields[4], count)) {
      throw InputError(fmt::format("removal CSV line {} is malformed", line_number));
    }
    auto [it, inserted] = slot.try_emplace(fields[0], curves.size());
    if (inserted) curves.push_back(RemovalCurve{fields[0], {}, {}, {}, {}});
    auto& curve = curves[it->second];
    curve.retention.push_back(retention);
    curve.metric.push_back(metric);
    curve.metric_std.push_back(sd);
    curve.seed_count.push_back(static_cast<long long>(count));
  }
  if (curves.empty()) throw InputError("removal CSV has no data rows");
  return curves;
}

std::vector<IvTracePoint> iv_trace(const Utility& utility, std::span<const Index> order,
                                   const ResetPolicy& policy) {
  IncrementalState state = utility.start(policy);
  std::vector<IvTracePoint> trace;
  trace.push_back({0, -1, state.integrated_variance(), std::nan(""), 0});
  for (Index step = 0; step < static_cast<Index>(order.size()); ++step) {
    state.add_point(order[static_cast<std::size_t>(step)]);
    trace.push_back({step + 1, order[static_cast<std::size_t>(step)], state.integrated_variance(),
                     state.condition_estimate(),
                     state.diagnostics().policy_resets + state.diagnostics().transition_rebuilds});
  }
  return trace;
}

void write_iv_trace_csv(std::ostream& out, const std::vector<IvTracePoint>& trace) {
  out << "step,index,iv,condition,resets\n";
  for (const auto& p : trace) {
    out << p.step << ',' << p.index << ',' << csv::format_double(p.iv) << ','
        << csv::format_double(p.condition) << ',' << p.resets << '\n';
  }
}

std::vector<IvTracePoint> read_iv_trace_csv(std::istream& in) {
  std::string line;
  long long line_number = 0;
  if (!csv::next_record(in, line, line_number)) throw InputError("IV trace CSV is empty");
  const std::vector<std::string> expected{"step", "index", "iv", "condition", "resets"};
  if (csv::split_line(line) != expected) {
    throw InputError("IV trace CSV header must be 'step,index,iv,condition,resets'");
  }
  std::vector<IvTracePoint> trace;
  while (csv::next_record(in, line, line_number)) {
    const auto fields = csv::split_line(line);
    double step = 0.0, index = 0.0, resets = 0.0;
    IvTracePoint p;
    if (fields.size() != 5 || !csv::parse_double(fields[0], step) ||
        !csv::parse_double(fields[1], index) || !csv::parse_double(fields[2], p.iv) ||
        !csv::parse_double(fields[3], p.condition) || !csv::parse_double(fields[4], resets)) {
      throw InputError(fmt::format("IV trace CSV line {} is malformed", line_number));
    }
    p.step = static_cast<Index>(step);
    p.index = static_cast<Index>(index);
    p.resets = static_cast<long long>(resets);
    trace.push_back(p);
  }
  if (trace.empty()) throw InputError("IV trace CSV has no data rows");
  return trace;
}

}  // namespace gpdv
