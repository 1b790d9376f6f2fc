#pragma once

#include "gpdv/harness.hpp"
#include "gpdv/valuation.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace gpdv::svg {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct Labels {
  std::string title;
  std::string x_axis;
  std::string y_axis;
};

/// One polyline per series; NaN points break the line.
std::string line_chart(const std::vector<Series>& series, const Labels& labels);

/// Grouped bars: one group per category, one bar per series inside it.
std::string bar_chart(const std::vector<std::string>& categories,
                      const std::vector<Series>& series, const Labels& labels);

std::string valuation_bars(const std::vector<ValuationRow>& rows);
std::string removal_curves(const std::vector<RemovalCurve>& curves, std::string_view metric);
std::string iv_trace(const std::vector<IvTracePoint>& trace);

}  // namespace gpdv::svg
