#pragma once

#include "gpdv/harness.hpp"
#include "gpdv/kernel.hpp"
#include "gpdv/valuation.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gpdv {

enum class DataSource { Synthetic, Csv };
enum class QuadratureKind { Auto, Grid, Test };

struct DataConfig {
  DataSource source = DataSource::Synthetic;
  std::filesystem::path path;
  std::string target;
  double test_fraction = 0.2;
  std::uint64_t split_seed = 0;
  SinusSpec synthetic;
};

struct QuadratureConfig {
  /// Auto: a grid over the synthetic domain, held-out inputs for CSV data.
  QuadratureKind kind = QuadratureKind::Auto;
  Index count = 256;
};

/// Everything a CLI run needs. Loaded from a JSON document whose sections
/// mirror the members; unknown keys are rejected.
struct RunConfig {
  DataConfig data;
  KernelSpec kernel{KernelFamily::SquaredExponential, 1.0, 1.0, 0.01};
  TrendFamily trend = TrendFamily::Ordinary;
  UtilityKind utility = UtilityKind::IntegratedVariance;
  QuadratureConfig quadrature;
  std::vector<Method> methods{Method::Loo, Method::ShapleyMc};
  ValuationConfig valuation;
  std::vector<double> retention{1.0, 0.8, 0.6, 0.4, 0.2};
  std::vector<std::uint64_t> random_seeds{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::filesystem::path output = "gpdv-out";

  /// Throws InputError for any inconsistent field.
  void validate() const;
};

/// Flag values that take precedence over the file.
struct ConfigOverrides {
  std::optional<std::filesystem::path> output;
  std::optional<int> threads;
  std::optional<std::uint64_t> seed;
};

RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);
void apply_overrides(RunConfig& config, const ConfigOverrides& overrides);

/// Canonical JSON echo of a resolved configuration.
std::string config_to_json(const RunConfig& config);

std::string_view to_string(DataSource source);
std::string_view to_string(QuadratureKind kind);

}  // namespace gpdv
