#include "gpdv/svg.hpp"

#include "gpdv/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <limits>
#include <map>

namespace gpdv::svg {

namespace {

constexpr double kWidth = 820.0;
constexpr double kHeight = 520.0;
constexpr double kLeft = 80.0;
constexpr double kRight = 190.0;
constexpr double kTop = 50.0;
constexpr double kBottom = 60.0;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string escape(std::string_view text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

const char* color(std::size_t k) { return kPalette[k % std::size(kPalette)]; }

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }

  void settle() {
    if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
    if (hi - lo < 1e-300) {
      const double pad = lo == 0.0 ? 1.0 : 0.1 * std::abs(lo);
      lo -= pad;
      hi += pad;
    }
  }
};

std::vector<double> ticks(const Range& r, int target = 5) {
  const double raw = (r.hi - r.lo) / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    step = m * mag;
    if (step >= raw) break;
  }
  std::vector<double> out;
  for (double t = std::ceil(r.lo / step) * step; t <= r.hi + 1e-9 * step; t += step) {
    out.push_back(std::abs(t) < 1e-12 * step ? 0.0 : t);
  }
  return out;
}

class Canvas {
 public:
  Canvas(const Labels& labels, Range x, Range y) : x_(x), y_(y) {
    x_.settle();
    y_.settle();
    body_ += fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" "
        "viewBox=\"0 0 {0} {1}\" font-family=\"sans-serif\" font-size=\"12\">\n"
        "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
        kWidth, kHeight);
    body_ += fmt::format("<text x=\"{}\" y=\"28\" text-anchor=\"middle\" font-size=\"16\">{}</text>\n",
                         kLeft + plot_width() / 2, escape(labels.title));
    body_ += fmt::format(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", kLeft + plot_width() / 2,
        kHeight - 15, escape(labels.x_axis));
    body_ += fmt::format(
        "<text transform=\"translate(20 {}) rotate(-90)\" text-anchor=\"middle\">{}</text>\n",
        kTop + plot_height() / 2, escape(labels.y_axis));
  }

  double plot_width() const { return kWidth - kLeft - kRight; }
  double plot_height() const { return kHeight - kTop - kBottom; }
  double px(double x) const { return kLeft + (x - x_.lo) / (x_.hi - x_.lo) * plot_width(); }
  double py(double y) const { return kTop + (y_.hi - y) / (y_.hi - y_.lo) * plot_height(); }
  const Range& x_range() const { return x_; }
  const Range& y_range() const { return y_; }

  void axes(bool x_ticks) {
    body_ += "<g class=\"axes\" stroke=\"black\" fill=\"none\">\n";
    body_ += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\"/>\n", kLeft,
                         kTop + plot_height(), kLeft + plot_width());
    body_ += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\"/>\n", kLeft, kTop,
                         kTop + plot_height());
    body_ += "</g>\n<g class=\"ticks\">\n";
    for (double t : ticks(y_)) {
      body_ += fmt::format(
          "<line x1=\"{0}\" y1=\"{1:.2f}\" x2=\"{2}\" y2=\"{1:.2f}\" stroke=\"#ddd\"/>"
          "<text x=\"{3}\" y=\"{4:.2f}\" text-anchor=\"end\">{5:.4g}</text>\n",
          kLeft, py(t), kLeft + plot_width(), kLeft - 6, py(t) + 4, t);
    }
    if (x_ticks) {
      for (double t : ticks(x_)) {
        body_ += fmt::format(
            "<line x1=\"{0:.2f}\" y1=\"{1}\" x2=\"{0:.2f}\" y2=\"{2}\" stroke=\"black\"/>"
            "<text x=\"{0:.2f}\" y=\"{3}\" text-anchor=\"middle\">{4:.4g}</text>\n",
            px(t), kTop + plot_height(), kTop + plot_height() + 5, kTop + plot_height() + 20, t);
      }
    }
    body_ += "</g>\n";
  }

  void legend(const std::vector<Series>& series) {
    body_ += "<g class=\"legend\">\n";
    for (std::size_t k = 0; k < series.size(); ++k) {
      const double y = kTop + 10 + 20.0 * static_cast<double>(k);
      body_ += fmt::format(
          "<rect x=\"{0}\" y=\"{1}\" width=\"14\" height=\"10\" fill=\"{2}\"/>"
          "<text x=\"{3}\" y=\"{4}\">{5}</text>\n",
          kWidth - kRight + 20, y, color(k), kWidth - kRight + 40, y + 10,
          escape(series[k].name));
    }
    body_ += "</g>\n";
  }

  void raw(const std::string& text) { body_ += text; }
  std::string finish() { return body_ + "</svg>\n"; }

 private:
  Range x_, y_;
  std::string body_;
};

}  // namespace

std::string line_chart(const std::vector<Series>& series, const Labels& labels) {
  if (series.empty()) throw InputError("nothing to plot");
  Range x, y;
  for (const auto& s : series) {
    for (double v : s.x) x.add(v);
    for (double v : s.y) y.add(v);
  }
  Canvas canvas(labels, x, y);
  canvas.axes(true);
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    std::string points;
    std::vector<std::string> runs;
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) {
        if (!points.empty()) runs.push_back(std::move(points));
        points.clear();
        continue;
      }
      if (!points.empty()) points += ' ';
      points += fmt::format("{:.2f},{:.2f}", canvas.px(s.x[i]), canvas.py(s.y[i]));
    }
    if (!points.empty()) runs.push_back(std::move(points));
    for (const auto& run : runs) {
      canvas.raw(fmt::format(
          "<polyline class=\"series\" data-series=\"{}\" fill=\"none\" stroke=\"{}\" "
          "stroke-width=\"2\" points=\"{}\"/>\n",
          escape(s.name), color(k), run));
    }
  }
  canvas.legend(series);
  return canvas.finish();
}

std::string bar_chart(const std::vector<std::string>& categories,
                      const std::vector<Series>& series, const Labels& labels) {
  if (categories.empty() || series.empty()) throw InputError("nothing to plot");
  Range x, y;
  x.add(0.0);
  x.add(static_cast<double>(categories.size()));
  y.add(0.0);
  for (const auto& s : series) {
    for (double v : s.y) y.add(v);
  }
  Canvas canvas(labels, x, y);
  canvas.axes(false);
  const double slot = canvas.plot_width() / static_cast<double>(categories.size());
  const double bar = 0.8 * slot / static_cast<double>(series.size());
  const double zero = canvas.py(0.0);
  for (std::size_t c = 0; c < categories.size(); ++c) {
    const double left = canvas.px(static_cast<double>(c)) + 0.1 * slot;
    for (std::size_t k = 0; k < series.size(); ++k) {
      const double v = c < series[k].y.size() ? series[k].y[c] : std::nan("");
      if (!std::isfinite(v)) continue;
      const double top = canvas.py(v);
      canvas.raw(fmt::format(
          "<rect class=\"bar\" data-series=\"{}\" data-category=\"{}\" x=\"{:.2f}\" "
          "y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"{}\"/>\n",
          escape(series[k].name), escape(categories[c]),
          left + bar * static_cast<double>(k), std::min(top, zero), bar,
          std::abs(zero - top), color(k)));
    }
    if (categories.size() <= 40 || c % (categories.size() / 20 + 1) == 0) {
      canvas.raw(fmt::format(
          "<text x=\"{:.2f}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", left + 0.4 * slot,
          kTop + canvas.plot_height() + 18, escape(categories[c])));
    }
  }
  canvas.legend(series);
  return canvas.finish();
}

std::string valuation_bars(const std::vector<ValuationRow>& rows) {
  if (rows.empty()) throw InputError("valuation file has no rows");
  std::vector<std::string> methods;
  std::map<std::string, std::map<Index, double>> values;
  Index max_index = 0;
  for (const auto& r : rows) {
    if (r.index < 0) throw InputError(fmt::format("negative datum index {}", r.index));
    if (!values.count(r.method)) methods.push_back(r.method);
    values[r.method][r.index] = r.value;
    max_index = std::max(max_index, r.index);
  }
  std::vector<std::string> categories;
  for (Index i = 0; i <= max_index; ++i) categories.push_back(std::to_string(i));
  std::vector<Series> series;
  for (const auto& m : methods) {
    Series s{m, {}, {}};
    for (Index i = 0; i <= max_index; ++i) {
      const auto it = values[m].find(i);
      s.y.push_back(it == values[m].end() ? std::nan("") : it->second);
    }
    series.push_back(std::move(s));
  }
  return bar_chart(categories, series, {"Data values", "datum index", "value"});
}

std::string removal_curves(const std::vector<RemovalCurve>& curves, std::string_view metric) {
  std::vector<Series> series;
  for (const auto& c : curves) {
    Series s{c.method, {}, c.metric};
    for (double f : c.retention) s.x.push_back(100.0 * f);
    series.push_back(std::move(s));
  }
  return line_chart(series, {fmt::format("{} after removal", metric), "% of training data kept",
                             std::string(metric)});
}

std::string iv_trace(const std::vector<IvTracePoint>& trace) {
  Series s{"integrated variance", {}, {}};
  for (const auto& p : trace) {
    s.x.push_back(static_cast<double>(p.step));
    s.y.push_back(p.iv);
  }
  return line_chart({s}, {"Integrated variance along a data ordering", "points added",
                          "integrated variance"});
}

}  // namespace gpdv::svg
