#include "gpdv/commands.hpp"

#include "gpdv/csv.hpp"
#include "gpdv/errors.hpp"
#include "gpdv/harness.hpp"
#include "gpdv/svg.hpp"

#include <fmt/format.h>
#include <fstream>
#include <json.hpp>
#include <numeric>
#include <spdlog/spdlog.h>
#include <sstream>

namespace gpdv {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Workload {
  Dataset train;
  Dataset test;
  bool has_test = false;
  TrendBasis trend;
  QuadratureSet quadrature;
};

Dataset load_dataset(const RunConfig& config) {
  if (config.data.source == DataSource::Csv) {
    return ingest_csv(config.data.path, config.data.target);
  }
  return gen_synthetic_sinus(config.data.synthetic);
}

bool quadrature_uses_test(const RunConfig& config) {
  return config.quadrature.kind == QuadratureKind::Test ||
         (config.quadrature.kind == QuadratureKind::Auto && config.data.source == DataSource::Csv);
}

Workload prepare(const RunConfig& config, bool need_test) {
  const Dataset all = load_dataset(config);
  Workload w;
  need_test = need_test || config.utility == UtilityKind::TestMse || quadrature_uses_test(config);
  if (need_test) {
    auto [train, test] = split(all, config.data.test_fraction, config.data.split_seed);
    w.train = std::move(train);
    w.test = std::move(test);
    w.has_test = true;
  } else {
    w.train = all;
  }
  w.trend = TrendBasis{config.trend, w.train.dimension()};
  if (quadrature_uses_test(config)) {
    w.quadrature = QuadratureSet::uniform_over(w.test.features);
  } else {
    if (w.train.dimension() != 1) {
      throw InputError("grid quadrature needs 1-D inputs; use quadrature.kind = \"test\"");
    }
    w.quadrature = QuadratureSet::uniform_grid(config.data.synthetic.lo, config.data.synthetic.hi,
                                               config.quadrature.count);
  }
  spdlog::info("data: {} ({} training rows, {} held out, d = {})", w.train.provenance,
               w.train.size(), w.has_test ? w.test.size() : 0, w.train.dimension());
  return w;
}

Utility utility_for(const RunConfig& config, const Workload& w) {
  return make_utility(config.utility, config.kernel, w.trend, w.train, w.test, w.quadrature);
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError(fmt::format("cannot write '{}'", path.string()));
  out << text;
  if (!out) throw InputError(fmt::format("failed writing '{}'", path.string()));
  spdlog::debug("wrote {}", path.string());
}

fs::path output_dir(const RunConfig& config) {
  std::error_code ec;
  fs::create_directories(config.output, ec);
  if (ec) {
    throw InputError(fmt::format("cannot create output directory '{}': {}",
                                 config.output.string(), ec.message()));
  }
  return config.output;
}

std::string valuations_text(const std::vector<ValuationReport>& reports) {
  std::ostringstream out;
  for (std::size_t k = 0; k < reports.size(); ++k) {
    std::ostringstream one;
    write_valuation_csv(one, reports[k]);
    const std::string text = one.str();
    out << (k == 0 ? text : text.substr(text.find('\n') + 1));
  }
  return out.str();
}

std::vector<ValuationReport> run_all(const RunConfig& config, const Utility& utility) {
  std::vector<ValuationReport> reports;
  for (Method m : config.methods) {
    spdlog::info("valuing {} data with {}", utility.size(), to_string(m));
    reports.push_back(run_method(m, utility, config.valuation));
    const auto& d = reports.back().diagnostics;
    if (d.policy_resets || d.discarded_permutations || !d.naive_fallbacks.empty()) {
      spdlog::info("{}: {} resets, {} discarded permutations, {} naive fallbacks", to_string(m),
                   d.policy_resets, d.discarded_permutations, d.naive_fallbacks.size());
    }
  }
  return reports;
}

json report_summary(const ValuationReport& r) {
  const double sum = std::accumulate(r.values.begin(), r.values.end(), 0.0);
  json naive = json::array();
  for (Index i : r.diagnostics.naive_fallbacks) naive.push_back(i);
  return {{"total_utility_gap", r.total_utility_gap},
          {"sum_of_values", sum},
          {"discarded_permutations", r.diagnostics.discarded_permutations},
          {"policy_resets", r.diagnostics.policy_resets},
          {"transition_rebuilds", r.diagnostics.transition_rebuilds},
          {"breakdown_retries", r.diagnostics.breakdown_retries},
          {"naive_fallbacks", naive}};
}

}  // namespace

RunConfig default_config(Command command) {
  RunConfig c;
  auto& s = c.data.synthetic;
  s.noise_sd = 0.1;
  switch (command) {
    case Command::Value:
      s.n = 20;
      c.methods = {Method::Loo, Method::LooSchur, Method::ShapleyMc};
      c.valuation.budget = 200;
      break;
    case Command::RemovalBench:
      s.n = 60;
      c.methods = {Method::ShapleyMc, Method::Loo};
      c.valuation.budget = 1000;
      break;
    case Command::SyntheticDemo:
      s.n = 10;
      s.noise_sd = 0.0;
      s.cluster_size = 5;
      s.isolated = true;
      c.methods = {Method::ShapleyExact, Method::Loo, Method::ShapleyMc};
      c.valuation.budget = 500;
      break;
    case Command::Plot: break;
  }
  return c;
}

void cmd_value(const RunConfig& config) {
  config.validate();
  const Workload w = prepare(config, false);
  const Utility utility = utility_for(config, w);
  const auto reports = run_all(config, utility);
  const fs::path dir = output_dir(config);

  write_file(dir / "valuations.csv", valuations_text(reports));
  for (const auto& r : reports) {
    std::ostringstream one;
    write_valuation_csv(one, r);
    write_file(dir / fmt::format("valuations_{}.csv", to_string(r.method)), one.str());
  }

  // Rank 1 is the most valuable datum.
  std::vector<std::vector<Index>> ranks;
  for (const auto& r : reports) {
    const auto order = rank_by_value(r.values);
    std::vector<Index> rank(order.size());
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
      rank[static_cast<std::size_t>(order[pos])] = static_cast<Index>(pos + 1);
    }
    ranks.push_back(std::move(rank));
  }
  std::ostringstream ranking;
  ranking << "index";
  for (const auto& r : reports) ranking << ',' << to_string(r.method);
  ranking << '\n';
  for (Index i = 0; i < utility.size(); ++i) {
    ranking << i;
    for (const auto& rank : ranks) ranking << ',' << rank[static_cast<std::size_t>(i)];
    ranking << '\n';
  }
  write_file(dir / "ranking.csv", ranking.str());

  json methods = json::object();
  for (const auto& r : reports) methods[std::string(to_string(r.method))] = report_summary(r);
  json pairs = json::array();
  for (std::size_t a = 0; a < reports.size(); ++a) {
    for (std::size_t b = a + 1; b < reports.size(); ++b) {
      json value = nullptr;
      if (utility.size() >= 2) {
        try {
          value = spearman(reports[a].values, reports[b].values);
        } catch (const InputError&) {
        }
      }
      pairs.push_back({{"a", to_string(reports[a].method)},
                       {"b", to_string(reports[b].method)},
                       {"spearman", value}});
    }
  }
  const json summary{{"n", utility.size()},
                     {"utility", to_string(config.utility)},
                     {"empty_utility", utility.empty_value()},
                     {"full_utility", utility.full_value()},
                     {"methods", methods},
                     {"spearman", pairs}};
  write_file(dir / "summary.json", summary.dump(2) + "\n");
  write_file(dir / "config.json", config_to_json(config));
  for (const auto& p : pairs) {
    spdlog::info("spearman({}, {}) = {}", p["a"].get<std::string>(), p["b"].get<std::string>(),
                 p["spearman"].dump());
  }
}

void cmd_removal_bench(const RunConfig& config) {
  config.validate();
  const Workload w = prepare(config, true);
  RemovalBenchmarkSpec spec;
  spec.kernel = config.kernel;
  spec.trend = w.trend;
  spec.utility = config.utility;
  spec.quadrature = w.quadrature;
  spec.methods = config.methods;
  spec.retention = config.retention;
  spec.random_seeds = config.random_seeds;
  spec.valuation = config.valuation;
  spdlog::info("removal benchmark: {} methods, {} grid points, {} random seeds",
               spec.methods.size(), spec.retention.size(), spec.random_seeds.size());
  const auto result = removal_benchmark(w.train, w.test, spec);
  const fs::path dir = output_dir(config);

  std::ostringstream mse, iv;
  write_removal_csv(mse, result.mse_curves);
  write_removal_csv(iv, result.iv_curves);
  write_file(dir / "removal_curve.csv", mse.str());
  write_file(dir / "removal_iv_curve.csv", iv.str());
  write_file(dir / "valuations.csv", valuations_text(result.valuations));
  write_file(dir / "removal_curve.svg", svg::removal_curves(result.mse_curves, "test MSE"));
  write_file(dir / "removal_iv_curve.svg",
             svg::removal_curves(result.iv_curves, "integrated variance"));
  write_file(dir / "config.json", config_to_json(config));
}

void cmd_synthetic_demo(const RunConfig& config) {
  config.validate();
  if (config.data.source != DataSource::Synthetic) {
    throw InputError("synthetic-demo needs data.source = \"synthetic\"");
  }
  const Workload w = prepare(config, false);
  const Utility utility = utility_for(config, w);
  const auto reports = run_all(config, utility);
  const auto order = draw_permutation(w.train.size(), config.valuation.seed, 0);
  const auto trace = iv_trace(utility, order, config.valuation.reset);
  const fs::path dir = output_dir(config);

  std::ostringstream data, trace_csv;
  write_dataset_csv(data, w.train);
  write_iv_trace_csv(trace_csv, trace);
  const std::string valuations = valuations_text(reports);
  write_file(dir / "dataset.csv", data.str());
  write_file(dir / "valuations.csv", valuations);
  write_file(dir / "iv_trace.csv", trace_csv.str());
  std::istringstream rows(valuations);
  write_file(dir / "valuations.svg", svg::valuation_bars(read_valuation_csv(rows)));
  write_file(dir / "iv_trace.svg", svg::iv_trace(trace));
  write_file(dir / "config.json", config_to_json(config));
}

PlotKind parse_plot_kind(std::string_view name) {
  if (name == "valuation-bars") return PlotKind::ValuationBars;
  if (name == "removal-curves") return PlotKind::RemovalCurves;
  if (name == "iv-trace") return PlotKind::IvTrace;
  throw InputError(fmt::format(
      "unknown plot kind '{}' (expected valuation-bars, removal-curves or iv-trace)", name));
}

fs::path cmd_plot(PlotKind kind, const fs::path& input, const std::optional<fs::path>& output) {
  std::ifstream in(input);
  if (!in) throw InputError(fmt::format("cannot open '{}'", input.string()));
  std::string svg_text;
  try {
    switch (kind) {
      case PlotKind::ValuationBars: svg_text = svg::valuation_bars(read_valuation_csv(in)); break;
      case PlotKind::RemovalCurves:
        svg_text = svg::removal_curves(read_removal_csv(in), "metric");
        break;
      case PlotKind::IvTrace: svg_text = svg::iv_trace(read_iv_trace_csv(in)); break;
    }
  } catch (const InputError& e) {
    throw InputError(fmt::format("{}: {}", input.string(), e.what()));
  }
  fs::path target = fs::path(input).replace_extension(".svg");
  if (output) {
    std::error_code ec;
    if (fs::is_directory(*output, ec) || output->extension() != ".svg") {
      fs::create_directories(*output, ec);
      target = *output / input.filename().replace_extension(".svg");
    } else {
      target = *output;
    }
  }
  write_file(target, svg_text);
  return target;
}

}  // namespace gpdv
