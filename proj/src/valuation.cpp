#include "gpdv/valuation.hpp"

#include "gpdv/csv.hpp"
#include "gpdv/errors.hpp"
#include "gpdv/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>

namespace gpdv {

Utility::Utility(UtilityKind kind, std::shared_ptr<const CovarianceCache> cache,
                 Eigen::VectorXd weights, Eigen::VectorXd truth)
    : kind_(kind), cache_(std::move(cache)), weights_(std::move(weights)),
      truth_(std::move(truth)) {}

Utility Utility::integrated_variance(const KernelSpec& kernel, const TrendBasis& trend,
                                     PointSet train, const QuadratureSet& quadrature) {
  quadrature.validate();
  auto cache = std::make_shared<const CovarianceCache>(kernel, trend, std::move(train),
                                                       Eigen::VectorXd(), quadrature.points);
  return Utility(UtilityKind::IntegratedVariance, std::move(cache), quadrature.weights,
                 Eigen::VectorXd());
}

Utility Utility::test_mse(const KernelSpec& kernel, const TrendBasis& trend, PointSet train,
                          Eigen::VectorXd train_targets, PointSet test,
                          Eigen::VectorXd test_targets) {
  if (test.rows() < 1) throw InputError("test-mse utility needs a non-empty held-out set");
  if (test_targets.size() != test.rows()) {
    throw InputError("held-out targets do not match held-out inputs");
  }
  if (train_targets.size() != train.rows()) {
    throw InputError("training targets do not match training inputs");
  }
  const Index count = test.rows();
  auto cache = std::make_shared<const CovarianceCache>(
      kernel, trend, std::move(train), std::move(train_targets), std::move(test));
  return Utility(UtilityKind::TestMse, std::move(cache),
                 Eigen::VectorXd::Constant(count, 1.0 / static_cast<double>(count)),
                 std::move(test_targets));
}

double Utility::evaluate(std::span<const Index> coalition) const {
  const PosteriorSummary post = kriging_posterior(*cache_, coalition);
  if (kind_ == UtilityKind::IntegratedVariance) return weights_.dot(post.variance);
  return weights_.dot((post.mean - truth_).array().square().matrix());
}

double Utility::evaluate(const BorderedSystem& system) const {
  if (kind_ == UtilityKind::IntegratedVariance) {
    return weights_.dot(residual_variances(*cache_, system));
  }
  return weights_.dot((predictive_means(*cache_, system) - truth_).array().square().matrix());
}

double Utility::evaluate(const IncrementalState& state) const {
  if (kind_ == UtilityKind::IntegratedVariance) return state.integrated_variance();
  return state.weighted_squared_error(truth_);
}

double Utility::empty_value() const { return evaluate(std::span<const Index>{}); }

double Utility::full_value() const {
  std::vector<Index> all(static_cast<std::size_t>(size()));
  std::iota(all.begin(), all.end(), Index{0});
  return evaluate(all);
}

IncrementalState Utility::start(const ResetPolicy& policy) const {
  return IncrementalState(cache_, weights_, policy);
}

void ValuationConfig::validate(Index n) const {
  if (budget < 1) throw InputError("valuation budget must be >= 1");
  if (!(tolerance >= 0.0)) throw InputError("valuation tolerance must be >= 0");
  if (burn_in < 0 || burn_in >= n) {
    throw InputError(fmt::format("burn-in {} must lie in [0, {})", burn_in, n));
  }
  if (threads < 1) throw InputError("thread count must be >= 1");
  reset.validate();
}

namespace {

std::vector<Index> all_but(Index n, Index skip) {
  std::vector<Index> out;
  out.reserve(static_cast<std::size_t>(n));
  for (Index j = 0; j < n; ++j) {
    if (j != skip) out.push_back(j);
  }
  return out;
}

ValuationReport blank_report(Method method, const Utility& utility) {
  ValuationReport report;
  report.method = method;
  report.utility = utility.kind();
  const auto n = static_cast<std::size_t>(utility.size());
  report.values.assign(n, 0.0);
  report.std_errors.assign(n, 0.0);
  report.samples.assign(n, 0);
  return report;
}

}  // namespace

ValuationReport loo_values(const Utility& utility, LooBackend backend, int threads) {
  const Index n = utility.size();
  const Index p = utility.cache().basis_size();
  if (n < p + 1 || n < 1) {
    throw InputError(fmt::format("leave-one-out needs at least {} training points", p + 1));
  }
  ValuationReport report =
      blank_report(backend == LooBackend::Naive ? Method::Loo : Method::LooSchur, utility);
  const double full = utility.full_value();
  report.total_utility_gap = utility.empty_value() - full;

  std::optional<BorderedSystem> full_system;
  if (backend == LooBackend::Schur) {
    std::vector<Index> all(static_cast<std::size_t>(n));
    std::iota(all.begin(), all.end(), Index{0});
    full_system.emplace(assemble(utility.cache(), all));
  }
  std::vector<char> fell_back(static_cast<std::size_t>(n), 0);
  parallel_for(n, threads, [&](std::ptrdiff_t i) {
    double reduced = 0.0;
    if (backend == LooBackend::Schur && n > 1) {
      try {
        reduced = utility.evaluate(loo_residual_system(*full_system, i));
      } catch (const NumericalBreakdown&) {
        fell_back[static_cast<std::size_t>(i)] = 1;
        reduced = utility.evaluate(all_but(n, i));
      }
    } else {
      reduced = utility.evaluate(all_but(n, i));
    }
    report.values[static_cast<std::size_t>(i)] = reduced - full;
    report.samples[static_cast<std::size_t>(i)] = 1;
  });
  for (Index i = 0; i < n; ++i) {
    if (fell_back[static_cast<std::size_t>(i)]) report.diagnostics.naive_fallbacks.push_back(i);
  }
  return report;
}

ValuationReport shapley_exact(const Utility& utility, Index n_limit, int threads) {
  const Index n = utility.size();
  if (n > n_limit) {
    throw InputError(fmt::format(
        "exact Shapley enumerates 2^n coalitions; n = {} exceeds the limit of {}", n, n_limit));
  }
  if (n < 1) throw InputError("exact Shapley needs at least one datum");
  const std::size_t coalitions = std::size_t{1} << n;
  std::vector<double> phi(coalitions);
  parallel_for(static_cast<std::ptrdiff_t>(coalitions), threads, [&](std::ptrdiff_t mask) {
    std::vector<Index> members;
    for (Index j = 0; j < n; ++j) {
      if (mask & (std::ptrdiff_t{1} << j)) members.push_back(j);
    }
    phi[static_cast<std::size_t>(mask)] = utility.evaluate(members);
  });

  // |S|! (n - |S| - 1)! / n!
  std::vector<double> weight(static_cast<std::size_t>(n));
  for (Index s = 0; s < n; ++s) {
    weight[static_cast<std::size_t>(s)] =
        std::exp(std::lgamma(s + 1.0) + std::lgamma(static_cast<double>(n - s)) -
                 std::lgamma(n + 1.0));
  }

  ValuationReport report = blank_report(Method::ShapleyExact, utility);
  for (Index i = 0; i < n; ++i) {
    const std::size_t bit = std::size_t{1} << i;
    double total = 0.0;
    for (std::size_t mask = 0; mask < coalitions; ++mask) {
      if (mask & bit) continue;
      const auto s = static_cast<std::size_t>(__builtin_popcountll(mask));
      total += weight[s] * (phi[mask] - phi[mask | bit]);
    }
    report.values[static_cast<std::size_t>(i)] = total;
    report.samples[static_cast<std::size_t>(i)] = static_cast<long long>(coalitions / 2);
  }
  report.total_utility_gap = phi.front() - phi.back();
  return report;
}

std::vector<Index> draw_permutation(Index n, std::uint64_t seed, long long index, int attempt) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(static_cast<std::uint64_t>(index) >> 32),
                    static_cast<std::uint32_t>(attempt)};
  std::mt19937_64 rng(seq);
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  // Fisher-Yates with a fixed reduction so the stream is library independent.
  for (std::size_t k = perm.size(); k > 1; --k) {
    const std::size_t j = static_cast<std::size_t>(rng() % k);
    std::swap(perm[k - 1], perm[j]);
  }
  return perm;
}

namespace {

constexpr int kMaxPermutationAttempts = 8;
constexpr long long kPermutationsPerWorkerChunk = 16;

// Running mean and M2 per datum, merged strictly in permutation order.
struct Welford {
  long long count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++count;
    const double delta = x - mean;
    mean += delta / static_cast<double>(count);
    m2 += delta * (x - mean);
  }
};

}  // namespace

ValuationReport shapley_mc(const Utility& utility, const ValuationConfig& config) {
  const Index n = utility.size();
  if (n < 1) throw InputError("Monte-Carlo Shapley needs at least one datum");
  config.validate(n);

  ValuationReport report = blank_report(Method::ShapleyMc, utility);
  report.config = config;
  const double empty = utility.empty_value();
  const double full = utility.full_value();
  report.total_utility_gap = empty - full;

  const int workers = static_cast<int>(std::min<long long>(config.threads, config.budget));
  std::vector<IncrementalState> states;
  states.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) states.push_back(utility.start(config.reset));
  std::vector<long long> discarded(static_cast<std::size_t>(workers), 0);

  const long long chunk = kPermutationsPerWorkerChunk * workers;
  const double unattributed = std::nan("");
  std::vector<double> marginals(static_cast<std::size_t>(chunk * n));
  std::vector<Welford> stats(static_cast<std::size_t>(n));

  for (long long first = 0; first < config.budget; first += chunk) {
    const long long count = std::min(chunk, config.budget - first);
    parallel_slices(count, workers, [&](int w, std::ptrdiff_t begin, std::ptrdiff_t end) {
      IncrementalState& state = states[static_cast<std::size_t>(w)];
      for (std::ptrdiff_t slot = begin; slot < end; ++slot) {
        double* row = marginals.data() + slot * n;
        for (int attempt = 0;; ++attempt) {
          const auto perm = draw_permutation(n, config.seed, first + slot, attempt);
          std::fill(row, row + n, unattributed);
          try {
            state.clear();
            double previous = empty;
            bool truncated = false;
            for (Index j = 0; j < n; ++j) {
              const Index datum = perm[static_cast<std::size_t>(j)];
              const bool attributed = j + 1 > config.burn_in;
              if (!truncated && std::abs(previous - full) < config.tolerance) truncated = true;
              if (truncated) {
                if (attributed) row[datum] = 0.0;
                continue;
              }
              state.add_point(datum);
              const double current = utility.evaluate(state);
              if (attributed) row[datum] = previous - current;
              previous = current;
            }
            break;
          } catch (const NumericalBreakdown&) {
            ++discarded[static_cast<std::size_t>(w)];
            if (attempt + 1 >= kMaxPermutationAttempts) throw;
          }
        }
      }
    });
    for (long long slot = 0; slot < count; ++slot) {
      const double* row = marginals.data() + slot * n;
      for (Index i = 0; i < n; ++i) {
        if (!std::isnan(row[i])) stats[static_cast<std::size_t>(i)].add(row[i]);
      }
    }
  }

  for (Index i = 0; i < n; ++i) {
    const auto& s = stats[static_cast<std::size_t>(i)];
    const auto k = static_cast<std::size_t>(i);
    report.values[k] = s.mean;
    report.samples[k] = s.count;
    report.std_errors[k] =
        s.count > 1 ? std::sqrt(s.m2 / static_cast<double>(s.count - 1) /
                                static_cast<double>(s.count))
                    : 0.0;
  }
  for (int w = 0; w < workers; ++w) {
    const auto& d = states[static_cast<std::size_t>(w)].diagnostics();
    report.diagnostics.policy_resets += d.policy_resets;
    report.diagnostics.transition_rebuilds += d.transition_rebuilds;
    report.diagnostics.breakdown_retries += d.breakdown_retries;
    report.diagnostics.discarded_permutations += discarded[static_cast<std::size_t>(w)];
  }
  return report;
}

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  for (std::size_t k = 0; k < n;) {
    std::size_t e = k + 1;
    while (e < n && values[order[e]] == values[order[k]]) ++e;
    const double rank = 0.5 * static_cast<double>(k + 1 + e);
    for (std::size_t t = k; t < e; ++t) ranks[order[t]] = rank;
    k = e;
  }
  return ranks;
}

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InputError("spearman inputs differ in length");
  if (a.size() < 2) throw InputError("spearman needs at least two values");
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  const double mean = 0.5 * (n + 1.0);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t k = 0; k < ra.size(); ++k) {
    sab += (ra[k] - mean) * (rb[k] - mean);
    saa += (ra[k] - mean) * (ra[k] - mean);
    sbb += (rb[k] - mean) * (rb[k] - mean);
  }
  if (saa == 0.0 || sbb == 0.0) {
    throw InputError("spearman correlation is undefined for a constant input");
  }
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

std::vector<double> normalize(std::span<const double> values) {
  const double total = std::accumulate(values.begin(), values.end(), 0.0);
  if (total == 0.0 || !std::isfinite(total)) {
    throw InputError("cannot normalize valuations whose sum is zero");
  }
  std::vector<double> out(values.begin(), values.end());
  for (double& v : out) v /= total;
  return out;
}

std::vector<double> normalize(const ValuationReport& report) { return normalize(report.values); }

std::string_view to_string(Method method) {
  switch (method) {
    case Method::Loo: return "loo";
    case Method::LooSchur: return "loo-schur";
    case Method::ShapleyExact: return "shapley-exact";
    case Method::ShapleyMc: return "shapley-mc";
  }
  return "?";
}

std::string_view to_string(UtilityKind kind) {
  return kind == UtilityKind::IntegratedVariance ? "integrated-variance" : "test-mse";
}

Method parse_method(std::string_view name) {
  for (Method m : {Method::Loo, Method::LooSchur, Method::ShapleyExact, Method::ShapleyMc}) {
    if (name == to_string(m)) return m;
  }
  throw InputError(fmt::format("unknown valuation method '{}'", name));
}

UtilityKind parse_utility_kind(std::string_view name) {
  if (name == "integrated-variance" || name == "iv") return UtilityKind::IntegratedVariance;
  if (name == "test-mse" || name == "mse") return UtilityKind::TestMse;
  throw InputError(fmt::format("unknown utility kind '{}'", name));
}

void write_valuation_csv(std::ostream& out, const ValuationReport& report) {
  out << "index,value,std_error,samples,method\n";
  for (std::size_t i = 0; i < report.size(); ++i) {
    out << i << ',' << csv::format_double(report.values[i]) << ','
        << csv::format_double(report.std_errors[i]) << ',' << report.samples[i] << ','
        << to_string(report.method) << '\n';
  }
}

std::vector<ValuationRow> read_valuation_csv(std::istream& in) {
  std::string line;
  long long line_number = 0;
  if (!csv::next_record(in, line, line_number)) throw InputError("valuation CSV is empty");
  const std::vector<std::string> expected{"index", "value", "std_error", "samples", "method"};
  if (csv::split_line(line) != expected) {
    throw InputError("valuation CSV header must be 'index,value,std_error,samples,method'");
  }
  std::vector<ValuationRow> rows;
  while (csv::next_record(in, line, line_number)) {
    const auto fields = csv::split_line(line);
    ValuationRow row;
    double index = 0.0, samples = 0.0;
    if (fields.size() != 5 || !csv::parse_double(fields[0], index) ||
        !csv::parse_double(fields[1], row.value) ||
        !csv::parse_double(fields[2], row.std_error) ||
        !csv::parse_double(fields[3], samples) || fields[4].empty()) {
      throw InputError(fmt::format("valuation CSV line {} is malformed", line_number));
    }
    row.index = static_cast<Index>(index);
    row.samples = static_cast<long long>(samples);
    row.method = fields[4];
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw InputError("valuation CSV has no data rows");
  return rows;
}

}  // namespace gpdv
