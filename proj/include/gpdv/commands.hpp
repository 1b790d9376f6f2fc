#pragma once

#include "gpdv/config.hpp"

#include <filesystem>
#include <optional>
#include <string_view>

namespace gpdv {

enum class Command { Value, RemovalBench, SyntheticDemo, Plot };

/// Defaults used when no --config is given.
RunConfig default_config(Command command);

/// Writes valuations.csv (all methods), valuations_<method>.csv, ranking.csv,
/// summary.json and config.json into config.output.
void cmd_value(const RunConfig& config);

/// Writes removal_curve.csv (test MSE), removal_iv_curve.csv, valuations.csv,
/// removal_curve.svg and config.json.
void cmd_removal_bench(const RunConfig& config);

/// Values a synthetic sine dataset and writes dataset.csv, valuations.csv,
/// iv_trace.csv, their SVG renderings and config.json.
void cmd_synthetic_demo(const RunConfig& config);

enum class PlotKind { ValuationBars, RemovalCurves, IvTrace };
PlotKind parse_plot_kind(std::string_view name);

/// Renders `input` as SVG. Returns the written path: `output` when given
/// (a directory receives <stem>.svg), otherwise the input with .svg.
std::filesystem::path cmd_plot(PlotKind kind, const std::filesystem::path& input,
                               const std::optional<std::filesystem::path>& output);

}  // namespace gpdv
