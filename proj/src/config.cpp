#include "gpdv/config.hpp"

#include "gpdv/errors.hpp"

#include <fmt/format.h>
#include <fstream>
#include <limits>
#include <json.hpp>
#include <set>
#include <sstream>

namespace gpdv {

using nlohmann::json;

namespace {

// Reads the members of one JSON object and rejects whatever is left over.
class Section {
 public:
  Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw InputError(fmt::format("config: '{}' must be an object", path_));
  }

  const json* find(const std::string& key) {
    seen_.insert(key);
    const auto it = node_.find(key);
    return it == node_.end() ? nullptr : &*it;
  }

  Section child(const std::string& key) {
    const json* v = find(key);
    static const json empty = json::object();
    return Section(v ? *v : empty, name(key));
  }

  void number(const std::string& key, double& out) {
    if (const json* v = find(key)) {
      if (v->is_number()) {
        out = v->get<double>();
      } else if (v->is_string() && (*v == "inf" || *v == "infinity")) {
        out = std::numeric_limits<double>::infinity();
      } else {
        throw type_error(key, "a number");
      }
    }
  }

  template <class Int>
  void integer(const std::string& key, Int& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) throw type_error(key, "an integer");
      if constexpr (std::is_unsigned_v<Int>) {
        if (v->is_number_unsigned()) {
          out = static_cast<Int>(v->get<std::uint64_t>());
          return;
        }
        const auto value = v->get<long long>();
        if (value < 0) throw type_error(key, "a non-negative integer");
        out = static_cast<Int>(value);
      } else {
        out = static_cast<Int>(v->get<long long>());
      }
    }
  }

  void boolean(const std::string& key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) throw type_error(key, "true or false");
      out = v->get<bool>();
    }
  }

  std::optional<std::string> text(const std::string& key) {
    const json* v = find(key);
    if (!v) return std::nullopt;
    if (!v->is_string()) throw type_error(key, "a string");
    return v->get<std::string>();
  }

  template <class T>
  std::optional<std::vector<T>> list(const std::string& key) {
    const json* v = find(key);
    if (!v) return std::nullopt;
    if (!v->is_array()) throw type_error(key, "an array");
    std::vector<T> out;
    for (const auto& item : *v) {
      if constexpr (std::is_same_v<T, std::string>) {
        if (!item.is_string()) throw type_error(key, "an array of strings");
      } else if constexpr (std::is_integral_v<T>) {
        if (!item.is_number_integer() || (std::is_unsigned_v<T> && item.get<long long>() < 0)) {
          throw type_error(key, "an array of non-negative integers");
        }
      } else {
        if (!item.is_number()) throw type_error(key, "an array of numbers");
      }
      out.push_back(item.get<T>());
    }
    return out;
  }

  void finish() const {
    for (auto it = node_.begin(); it != node_.end(); ++it) {
      if (!seen_.count(it.key())) {
        throw InputError(fmt::format("config: unknown key '{}'", name(it.key())));
      }
    }
  }

  std::string name(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

 private:
  InputError type_error(const std::string& key, std::string_view expected) const {
    return InputError(fmt::format("config: '{}' must be {}", name(key), expected));
  }

  const json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

DataSource parse_source(std::string_view name) {
  if (name == "synthetic") return DataSource::Synthetic;
  if (name == "csv") return DataSource::Csv;
  throw InputError(fmt::format("config: unknown data source '{}'", name));
}

QuadratureKind parse_quadrature(std::string_view name) {
  if (name == "auto") return QuadratureKind::Auto;
  if (name == "grid") return QuadratureKind::Grid;
  if (name == "test") return QuadratureKind::Test;
  throw InputError(fmt::format("config: unknown quadrature kind '{}'", name));
}

json number_or_inf(double v) {
  if (std::isinf(v)) return "inf";
  return v;
}

}  // namespace

std::string_view to_string(DataSource source) {
  return source == DataSource::Synthetic ? "synthetic" : "csv";
}

std::string_view to_string(QuadratureKind kind) {
  switch (kind) {
    case QuadratureKind::Auto: return "auto";
    case QuadratureKind::Grid: return "grid";
    case QuadratureKind::Test: return "test";
  }
  return "?";
}

void RunConfig::validate() const {
  kernel.validate();
  if (data.source == DataSource::Csv) {
    if (data.path.empty()) throw InputError("config: data.path is required for csv data");
    if (data.target.empty()) throw InputError("config: data.target is required for csv data");
  } else {
    if (data.synthetic.n < 2) throw InputError("config: data.synthetic.n must be >= 2");
    if (!(data.synthetic.hi > data.synthetic.lo)) {
      throw InputError("config: data.synthetic needs hi > lo");
    }
    if (data.synthetic.noise_sd < 0.0) throw InputError("config: noise_sd must be >= 0");
  }
  if (!(data.test_fraction > 0.0 && data.test_fraction < 1.0)) {
    throw InputError("config: data.test_fraction must lie in (0, 1)");
  }
  if (quadrature.count < 1) throw InputError("config: quadrature.count must be >= 1");
  if (quadrature.kind == QuadratureKind::Grid && data.source == DataSource::Csv) {
    throw InputError("config: grid quadrature is only available for 1-D synthetic data");
  }
  if (methods.empty()) throw InputError("config: methods must list at least one method");
  if (valuation.budget < 1) throw InputError("config: valuation.budget must be >= 1");
  if (!(valuation.tolerance >= 0.0)) throw InputError("config: valuation.tolerance must be >= 0");
  if (valuation.burn_in < 0) throw InputError("config: valuation.burn_in must be >= 0");
  if (valuation.threads < 1) throw InputError("config: threads must be >= 1");
  valuation.reset.validate();
  if (retention.empty()) throw InputError("config: benchmark.retention must not be empty");
  for (double f : retention) {
    if (!(f > 0.0 && f <= 1.0)) {
      throw InputError(fmt::format("config: retention fraction {} outside (0, 1]", f));
    }
  }
}

RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end(), nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw InputError(fmt::format("config: invalid JSON: {}", e.what()));
  }
  RunConfig c;
  Section root(doc, "");

  {
    Section data = root.child("data");
    if (auto s = data.text("source")) c.data.source = parse_source(*s);
    if (auto p = data.text("path")) {
      c.data.path = *p;
      if (c.data.path.is_relative() && !base_dir.empty()) c.data.path = base_dir / c.data.path;
    }
    if (auto t = data.text("target")) c.data.target = *t;
    data.number("test_fraction", c.data.test_fraction);
    data.integer("split_seed", c.data.split_seed);
    Section syn = data.child("synthetic");
    auto& s = c.data.synthetic;
    syn.integer("n", s.n);
    syn.number("lo", s.lo);
    syn.number("hi", s.hi);
    syn.number("noise_sd", s.noise_sd);
    syn.integer("seed", s.seed);
    syn.integer("cluster_size", s.cluster_size);
    syn.number("cluster_center", s.cluster_center);
    syn.number("cluster_half_width", s.cluster_half_width);
    syn.boolean("isolated", s.isolated);
    syn.number("isolated_at", s.isolated_at);
    syn.number("isolation_radius", s.isolation_radius);
    syn.finish();
    data.finish();
  }
  {
    Section k = root.child("kernel");
    if (auto f = k.text("family")) c.kernel.family = parse_kernel_family(*f);
    k.number("lengthscale", c.kernel.lengthscale);
    k.number("variance", c.kernel.variance);
    k.number("nugget", c.kernel.nugget);
    k.finish();
  }
  if (auto t = root.text("trend")) c.trend = parse_trend_family(*t);
  if (auto u = root.text("utility")) c.utility = parse_utility_kind(*u);
  {
    Section q = root.child("quadrature");
    if (auto kind = q.text("kind")) c.quadrature.kind = parse_quadrature(*kind);
    q.integer("count", c.quadrature.count);
    q.finish();
  }
  if (auto m = root.list<std::string>("methods")) {
    c.methods.clear();
    for (const auto& name : *m) c.methods.push_back(parse_method(name));
  }
  {
    Section v = root.child("valuation");
    v.integer("budget", c.valuation.budget);
    v.number("tolerance", c.valuation.tolerance);
    v.integer("burn_in", c.valuation.burn_in);
    v.integer("seed", c.valuation.seed);
    v.integer("threads", c.valuation.threads);
    v.finish();
  }
  {
    Section r = root.child("reset");
    r.number("max_condition", c.valuation.reset.max_condition);
    r.integer("max_chained_updates", c.valuation.reset.max_chained_updates);
    r.number("max_abs_iv_step", c.valuation.reset.max_abs_iv_step);
    r.number("max_inverse_shrink", c.valuation.reset.max_inverse_shrink);
    r.finish();
  }
  {
    Section b = root.child("benchmark");
    if (auto g = b.list<double>("retention")) c.retention = *g;
    if (auto s = b.list<std::uint64_t>("random_seeds")) c.random_seeds = *s;
    b.finish();
  }
  if (auto out = root.text("output")) {
    c.output = *out;
    if (c.output.is_relative() && !base_dir.empty()) c.output = base_dir / c.output;
  }
  root.finish();
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError(fmt::format("cannot open config '{}'", path.string()));
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path.parent_path());
}

void apply_overrides(RunConfig& config, const ConfigOverrides& overrides) {
  if (overrides.output) config.output = *overrides.output;
  if (overrides.threads) config.valuation.threads = *overrides.threads;
  if (overrides.seed) config.valuation.seed = *overrides.seed;
  config.validate();
}

std::string config_to_json(const RunConfig& c) {
  const auto& s = c.data.synthetic;
  json data{{"source", to_string(c.data.source)},
            {"test_fraction", c.data.test_fraction},
            {"split_seed", c.data.split_seed}};
  if (c.data.source == DataSource::Csv) {
    data["path"] = c.data.path.string();
    data["target"] = c.data.target;
  } else {
    data["synthetic"] = {{"n", s.n},
                         {"lo", s.lo},
                         {"hi", s.hi},
                         {"noise_sd", s.noise_sd},
                         {"seed", s.seed},
                         {"cluster_size", s.cluster_size},
                         {"cluster_center", s.cluster_center},
                         {"cluster_half_width", s.cluster_half_width},
                         {"isolated", s.isolated},
                         {"isolated_at", s.isolated_at},
                         {"isolation_radius", s.isolation_radius}};
  }
  json methods = json::array();
  for (Method m : c.methods) methods.push_back(to_string(m));
  json doc{
      {"data", data},
      {"kernel",
       {{"family", to_string(c.kernel.family)},
        {"lengthscale", c.kernel.lengthscale},
        {"variance", c.kernel.variance},
        {"nugget", c.kernel.nugget}}},
      {"trend", to_string(c.trend)},
      {"utility", to_string(c.utility)},
      {"quadrature", {{"kind", to_string(c.quadrature.kind)}, {"count", c.quadrature.count}}},
      {"methods", methods},
      {"valuation",
       {{"budget", c.valuation.budget},
        {"tolerance", c.valuation.tolerance},
        {"burn_in", c.valuation.burn_in},
        {"seed", c.valuation.seed},
        {"threads", c.valuation.threads}}},
      {"reset",
       {{"max_condition", number_or_inf(c.valuation.reset.max_condition)},
        {"max_chained_updates", c.valuation.reset.max_chained_updates},
        {"max_abs_iv_step", number_or_inf(c.valuation.reset.max_abs_iv_step)},
        {"max_inverse_shrink", number_or_inf(c.valuation.reset.max_inverse_shrink)}}},
      {"benchmark", {{"retention", c.retention}, {"random_seeds", c.random_seeds}}},
      {"output", c.output.string()}};
  return doc.dump(2) + "\n";
}

}  // namespace gpdv
