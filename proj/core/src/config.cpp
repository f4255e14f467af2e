#include "asiplab/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace asiplab {

using nlohmann::json;

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(BaseSection, weights, metric_window)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(FiberSection, branch_count, nonlinearity, potential_t,
                                   potential_amp, observable_offset, observable_amplitude,
                                   observable_phase, observable_kind, observable_scale,
                                   observable_constant, coboundary_amp)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(HolderSection, alpha, eta, xi, h_tilde)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(NumericsSection, n_points, interp, depth, depth_max,
                                   duality_tol, eps0, sigma2_floor, tail_tol, mean_window,
                                   sampler_memory)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(StatisticsSection, seed, trials, n, n_base_samples,
                                   mean_samples)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ThermoExperiment, x_samples, u_samples, regularity_pairs,
                                   regularity_n_list, beta_candidates, residual_tol, mass_tol)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(GapExperiment, instances, n_max, test_functions, min_r2)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(BoundsExperiment, x_samples, r_grid, n_max, max_slope,
                                   uniform_x_samples, uniform_n_max, cone_instances, cone_n_max,
                                   cone_s)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(EncodingExperiment, draws, n_max, r_max, mc_samples)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ConditionHExperiment, n, m, boundaries, r, k_list)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(Assumption6Experiment, n_list, draws, pairs, r_max, beta,
                                   max_spread)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(DecayBaseExperiment, n_list, samples, max_z)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(Sigma2Experiment, M_max)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(CltExperiment, p_min, scale_check, scale_tol)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(LilExperiment, n_max, trials, median_lo, median_hi)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(CoboundaryExperiment, n_list, trials, c, k_amp, sigma2_max)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ExperimentSection, thermo, gap, bounds, encoding, condition_h,
                                   assumption6, decay_base, sigma2, clt, lil, coboundary)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ExperimentConfig, base, fiber, holder, numerics, statistics,
                                   experiment)

namespace {

const char* kind_name(const json& v) {
  if (v.is_boolean()) return "boolean";
  if (v.is_number_integer()) return "integer";
  if (v.is_number()) return "number";
  if (v.is_string()) return "string";
  if (v.is_array()) return "array";
  if (v.is_object()) return "object";
  return "null";
}

// Whether `value` may replace a default of the same shape as `reference`.
bool compatible(const json& reference, const json& value) {
  if (reference.is_number_float()) return value.is_number();
  if (reference.is_number_unsigned()) return value.is_number_unsigned();
  if (reference.is_number_integer()) return value.is_number_integer();
  if (reference.is_array()) {
    if (!value.is_array()) return false;
    if (reference.empty()) return true;
    for (const auto& item : value) {
      if (!compatible(reference.front(), item)) return false;
    }
    return true;
  }
  return reference.type() == value.type();
}

void merge(json& target, const json& patch, const std::string& path) {
  if (!patch.is_object()) {
    throw ConfigError("'" + (path.empty() ? std::string("<root>") : path) + "' must be an object");
  }
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    auto slot = target.find(it.key());
    if (slot == target.end()) throw ConfigError("unknown key '" + key + "'");
    if (slot->is_object()) {
      merge(*slot, it.value(), key);
    } else if (!compatible(*slot, it.value())) {
      throw ConfigError("key '" + key + "' expects " + kind_name(*slot) + ", got " +
                        kind_name(it.value()));
    } else {
      *slot = it.value();
    }
  }
}

ExperimentConfig merged(const ExperimentConfig& base, const json& patch) {
  json tree = base;
  merge(tree, patch, "");
  try {
    return tree.get<ExperimentConfig>();
  } catch (const json::exception& e) {
    throw ConfigError(e.what());
  }
}

std::string line_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t column = 1;
  for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(column);
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("malformed config at " + line_column(text, e.byte) + ": " + e.what());
  }
  return merged(ExperimentConfig{}, doc);
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void apply_override(ExperimentConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' is not KEY=VALUE");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json patch = value;
  std::size_t end = key.size();
  while (true) {
    const auto dot = key.rfind('.', end - 1);
    const std::size_t begin = dot == std::string::npos ? 0 : dot + 1;
    const std::string part = key.substr(begin, end - begin);
    if (part.empty()) throw ConfigError("override key '" + key + "' has an empty component");
    json level = json::object();
    level[part] = std::move(patch);
    patch = std::move(level);
    if (dot == std::string::npos) break;
    end = dot;
  }
  config = merged(config, patch);
}

std::string to_json_text(const ExperimentConfig& config) {
  return json(config).dump(2);
}

std::string config_hash(const ExperimentConfig& config) {
  const std::string text = json(config).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

SystemSpec make_system(const ExperimentConfig& config) {
  SystemSpec::Params p;
  p.base = BaseMeasureSpec(config.base.weights);
  p.branch_count = config.fiber.branch_count;
  p.nonlinearity = config.fiber.nonlinearity;
  p.potential.t = config.fiber.potential_t;
  p.potential.amp = config.fiber.potential_amp;
  p.observable.offset = config.fiber.observable_offset;
  p.observable.amplitude = config.fiber.observable_amplitude;
  p.observable.phase = config.fiber.observable_phase;
  p.alpha = config.holder.alpha;
  p.eta = config.holder.eta;
  p.xi = config.holder.xi;
  p.h_tilde = config.holder.h_tilde;
  return SystemSpec(std::move(p));
}

FiberObservable make_observable(const ExperimentConfig& config) {
  const auto& f = config.fiber;
  FiberObservable g;
  if (f.observable_kind == "harmonic") {
    g = FiberObservable::harmonic(f.observable_scale);
  } else if (f.observable_kind == "coboundary") {
    g = FiberObservable::coboundary(f.observable_constant, f.coboundary_amp);
    g.scale = f.observable_scale;
  } else if (f.observable_kind == "constant") {
    g = FiberObservable::constant_value(f.observable_constant);
    g.scale = f.observable_scale;
  } else {
    throw ConfigError("fiber.observable_kind must be harmonic, coboundary or constant");
  }
  return g;
}

ThermoNumerics make_thermo_numerics(const ExperimentConfig& config) {
  ThermoNumerics n;
  n.depth = config.numerics.depth;
  n.depth_max = config.numerics.depth_max;
  n.duality_tol = config.numerics.duality_tol;
  return n;
}

LimitsNumerics make_limits_numerics(const ExperimentConfig& config) {
  LimitsNumerics n;
  n.eps0 = config.numerics.eps0;
  n.sigma2_floor = config.numerics.sigma2_floor;
  n.tail_tol = config.numerics.tail_tol;
  n.mean_window = config.numerics.mean_window;
  n.sampler_memory = config.numerics.sampler_memory;
  return n;
}

}  // namespace asiplab
