#include "gpdv/commands.hpp"
#include "gpdv/errors.hpp"

#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;

void configure_logging() {
  auto logger = spdlog::stderr_color_mt("gpdv");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* level = std::getenv("GPDV_LOG")) {
    const auto parsed = spdlog::level::from_str(level);
    if (parsed == spdlog::level::off && std::string_view(level) != "off") {
      spdlog::warn("GPDV_LOG='{}' is not a log level; using warn", level);
    } else {
      spdlog::set_level(parsed);
    }
  }
}

struct RunFlags {
  std::string config_path;
  std::string out;
  int threads = 0;
  std::uint64_t seed = 0;
};

void add_run_flags(CLI::App* sub, RunFlags& flags) {
  sub->add_option("--config", flags.config_path, "JSON run configuration");
  sub->add_option("--out", flags.out, "output directory (overrides the config)");
  sub->add_option("--threads", flags.threads, "worker threads (overrides the config)")
      ->check(CLI::PositiveNumber);
  sub->add_option("--seed", flags.seed, "valuation seed (overrides the config)");
}

gpdv::RunConfig resolve(gpdv::Command command, const RunFlags& flags, const CLI::App* sub) {
  gpdv::RunConfig config = flags.config_path.empty() ? gpdv::default_config(command)
                                                     : gpdv::load_config(flags.config_path);
  gpdv::ConfigOverrides overrides;
  if (sub->count("--out")) overrides.output = flags.out;
  if (sub->count("--threads")) overrides.threads = flags.threads;
  if (sub->count("--seed")) overrides.seed = flags.seed;
  gpdv::apply_overrides(config, overrides);
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  CLI::App app{"Gaussian-process data valuation"};
  app.require_subcommand(1);

  RunFlags value_flags, bench_flags, demo_flags;
  auto* value = app.add_subcommand("value", "value training data with the configured methods");
  add_run_flags(value, value_flags);
  auto* bench = app.add_subcommand("removal-bench", "data-removal benchmark against random removal");
  add_run_flags(bench, bench_flags);
  auto* demo = app.add_subcommand("synthetic-demo", "value a synthetic sine dataset");
  add_run_flags(demo, demo_flags);

  std::string plot_kind, plot_input, plot_out;
  auto* plot = app.add_subcommand("plot", "render a CSV produced by another command as SVG");
  plot->add_option("kind", plot_kind, "valuation-bars | removal-curves | iv-trace")->required();
  plot->add_option("input", plot_input, "input CSV")->required();
  plot->add_option("--out", plot_out, "output .svg file or directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (*value) {
      gpdv::cmd_value(resolve(gpdv::Command::Value, value_flags, value));
    } else if (*bench) {
      gpdv::cmd_removal_bench(resolve(gpdv::Command::RemovalBench, bench_flags, bench));
    } else if (*demo) {
      gpdv::cmd_synthetic_demo(resolve(gpdv::Command::SyntheticDemo, demo_flags, demo));
    } else if (*plot) {
      std::optional<std::filesystem::path> out;
      if (plot->count("--out")) out = plot_out;
      const auto written = gpdv::cmd_plot(gpdv::parse_plot_kind(plot_kind), plot_input, out);
      spdlog::info("wrote {}", written.string());
    }
  } catch (const gpdv::NumericalBreakdown& e) {
    std::cerr << "gpdv: numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const gpdv::InputError& e) {
    std::cerr << "gpdv: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "gpdv: unexpected error: " << e.what() << '\n';
    return 1;
  }
  return kExitOk;
}
