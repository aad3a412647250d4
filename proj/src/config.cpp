#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>

#include "d2dcache/error.hpp"
#include "d2dcache/harness.hpp"
#include "json.hpp"

namespace d2dcache {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Design names

std::string DesignSpec::name() const {
  switch (base) {
    case DesignBase::selfish: return "selfish";
    case DesignBase::proposed: return objective.name();
    case DesignBase::global: return "global:" + objective.name();
    case DesignBase::homogeneous: return "homogeneous:" + objective.name();
  }
  return "?";
}

DesignSpec parse_design(std::string_view text) {
  if (text == "selfish") return {DesignBase::selfish, {}};
  DesignSpec spec;
  const auto colon = text.find(':');
  if (colon != std::string_view::npos) {
    const auto base = text.substr(0, colon);
    if (base == "proposed") spec.base = DesignBase::proposed;
    else if (base == "global") spec.base = DesignBase::global;
    else if (base == "homogeneous") spec.base = DesignBase::homogeneous;
    else
      throw ParameterError("unknown design base '" + std::string(base) +
                           "' (expected proposed | global | homogeneous)");
    text = text.substr(colon + 1);
  }
  spec.objective = parse_objective(text);
  return spec;
}

// ---------------------------------------------------------------------------
// Key registry

namespace {

struct BadValue {
  std::string message;
};

double to_double(const json& j) {
  if (!j.is_number()) throw BadValue{"expected a number"};
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw BadValue{"expected a finite number"};
  return v;
}

std::uint64_t to_u64(const json& j) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer() && j.get<std::int64_t>() >= 0)
    return static_cast<std::uint64_t>(j.get<std::int64_t>());
  throw BadValue{"expected a nonnegative integer"};
}

std::size_t to_size(const json& j) { return static_cast<std::size_t>(to_u64(j)); }

bool to_bool(const json& j) {
  if (!j.is_boolean()) throw BadValue{"expected true or false"};
  return j.get<bool>();
}

std::string to_string(const json& j) {
  if (!j.is_string()) throw BadValue{"expected a string"};
  return j.get<std::string>();
}

DesignSpec to_design(const json& j) {
  try {
    return parse_design(to_string(j));
  } catch (const ParameterError& e) {
    throw BadValue{e.what()};
  }
}

struct Key {
  std::function<void(ExperimentConfig&, const json&)> set;
  std::function<json(const ExperimentConfig&)> get;
};

using Registry = std::map<std::string, Key, std::less<>>;

template <class Access>
Key number_key(Access access) {
  return {[access](ExperimentConfig& c, const json& j) { access(c) = to_double(j); },
          [access](const ExperimentConfig& c) { return json(access(c)); }};
}

template <class Access>
Key size_key(Access access) {
  return {[access](ExperimentConfig& c, const json& j) { access(c) = to_size(j); },
          [access](const ExperimentConfig& c) { return json(access(c)); }};
}

template <class Access>
Key bool_key(Access access) {
  return {[access](ExperimentConfig& c, const json& j) { access(c) = to_bool(j); },
          [access](const ExperimentConfig& c) { return json(access(c)); }};
}

template <class Access>
Key string_key(Access access) {
  return {[access](ExperimentConfig& c, const json& j) { access(c) = to_string(j); },
          [access](const ExperimentConfig& c) { return json(access(c)); }};
}

template <class Access>
Key design_key(Access access) {
  return {[access](ExperimentConfig& c, const json& j) { access(c) = to_design(j); },
          [access](const ExperimentConfig& c) { return json(access(c).name()); }};
}

const Registry& registry() {
  static const Registry keys = [] {
    Registry r;
    using C = ExperimentConfig;
    r["seed"] = {[](C& c, const json& j) { c.seed = to_u64(j); },
                 [](const C& c) { return json(c.seed); }};
    r["jobs"] = size_key([](auto& c) -> auto& { return c.jobs; });

    r["sweep.variable"] = {
        [](C& c, const json& j) {
          const std::string v = to_string(j);
          if (v == "active_users") c.sweep_variable = SweepVariable::active_users;
          else if (v == "cluster_size") c.sweep_variable = SweepVariable::cluster_size;
          else throw BadValue{"expected active_users or cluster_size"};
        },
        [](const C& c) {
          return json(c.sweep_variable == SweepVariable::active_users ? "active_users"
                                                                      : "cluster_size");
        }};
    r["sweep.values"] = {[](C& c, const json& j) {
                           if (!j.is_array()) throw BadValue{"expected a list of numbers"};
                           std::vector<double> v;
                           for (const auto& x : j) v.push_back(to_double(x));
                           c.sweep_values = std::move(v);
                         },
                         [](const C& c) { return json(c.sweep_values); }};
    r["designs"] = {[](C& c, const json& j) {
                      if (!j.is_array()) throw BadValue{"expected a list of design names"};
                      std::vector<DesignSpec> v;
                      for (const auto& x : j) v.push_back(to_design(x));
                      c.designs = std::move(v);
                    },
                    [](const C& c) {
                      json a = json::array();
                      for (const auto& d : c.designs) a.push_back(d.name());
                      return a;
                    }};

    r["scenario.side_m"] = number_key([](auto& c) -> auto& { return c.scenario.side_m; });
    r["scenario.active_users"] = size_key([](auto& c) -> auto& { return c.active_users; });
    r["scenario.inactive_users"] = size_key([](auto& c) -> auto& { return c.inactive_users; });
    r["scenario.lambda_active"] =
        number_key([](auto& c) -> auto& { return c.scenario.lambda_active; });
    r["scenario.lambda_inactive"] =
        number_key([](auto& c) -> auto& { return c.scenario.lambda_inactive; });
    r["scenario.counts"] = string_key([](auto& c) -> auto& { return c.counts; });
    r["scenario.reuse_factor"] = number_key([](auto& c) -> auto& { return c.scenario.reuse_factor; });
    r["scenario.link_model"] = {
        [](C& c, const json& j) {
          try {
            c.scenario.link_model = parse_link_model(to_string(j));
          } catch (const ParameterError& e) {
            throw BadValue{e.what()};
          }
        },
        [](const C& c) { return json(link_model_name(c.scenario.link_model)); }};
    r["scenario.scheduler"] = {
        [](C& c, const json& j) {
          try {
            c.scenario.scheduler = parse_scheduler(to_string(j));
          } catch (const ParameterError& e) {
            throw BadValue{e.what()};
          }
        },
        [](const C& c) { return json(scheduler_name(c.scenario.scheduler)); }};

    r["radio.carrier_freq_hz"] = number_key([](auto& c) -> auto& { return c.scenario.rp.carrier_freq_hz; });
    r["radio.breakpoint_d0_m"] = number_key([](auto& c) -> auto& { return c.scenario.rp.breakpoint_d0_m; });
    r["radio.pathloss_exponent_alpha"] =
        number_key([](auto& c) -> auto& { return c.scenario.rp.pathloss_exponent_alpha; });
    r["radio.shadow_mu_db"] = number_key([](auto& c) -> auto& { return c.scenario.rp.shadow_mu_db; });
    r["radio.shadow_sigma_db"] = number_key([](auto& c) -> auto& { return c.scenario.rp.shadow_sigma_db; });
    r["radio.noise_psd_dbm_hz"] = number_key([](auto& c) -> auto& { return c.scenario.rp.noise_psd_dbm_hz; });
    r["radio.d2d_bandwidth_hz"] = number_key([](auto& c) -> auto& { return c.scenario.rp.d2d_bandwidth_hz; });
    r["radio.bs_bandwidth_hz"] = number_key([](auto& c) -> auto& { return c.scenario.rp.bs_bandwidth_hz; });
    r["radio.d2d_tx_power_dbm"] = number_key([](auto& c) -> auto& { return c.scenario.rp.d2d_tx_power_dbm; });
    r["radio.bs_tx_power_dbm"] = number_key([](auto& c) -> auto& { return c.scenario.rp.bs_tx_power_dbm; });
    r["radio.min_snr_db"] = number_key([](auto& c) -> auto& { return c.scenario.rp.min_snr_db; });

    r["metrics.self_factor"] = number_key([](auto& c) -> auto& { return c.self_factor; });

    r["preferences.pool_users"] = size_key([](auto& c) -> auto& { return c.pool_users; });
    r["preferences.files"] = size_key([](auto& c) -> auto& { return c.files; });
    r["preferences.zipf_exponent"] = number_key([](auto& c) -> auto& { return c.generator.zipf_exponent; });
    r["preferences.mixing_weight"] = number_key([](auto& c) -> auto& { return c.generator.mixing_weight; });
    r["preferences.rank_permutation_strength"] =
        number_key([](auto& c) -> auto& { return c.generator.rank_permutation_strength; });
    r["preferences.seed"] = {[](C& c, const json& j) { c.generator.seed = to_u64(j); },
                             [](const C& c) { return json(c.generator.seed); }};

    r["cache.size"] = size_key([](auto& c) -> auto& { return c.cache_size; });

    r["optimizer.init"] = {[](C& c, const json& j) {
                             const std::string v = to_string(j);
                             if (v == "zeros") c.design_settings.init = InitKind::zeros;
                             else if (v == "selfish") c.design_settings.init = InitKind::selfish;
                             else throw BadValue{"expected zeros or selfish"};
                           },
                           [](const C& c) {
                             return json(c.design_settings.init == InitKind::zeros ? "zeros"
                                                                                   : "selfish");
                           }};
    r["optimizer.max_rounds"] = size_key([](auto& c) -> auto& { return c.design_settings.max_rounds; });
    r["optimizer.ee_tolerance"] =
        number_key([](auto& c) -> auto& { return c.design_settings.ee_tolerance; });

    r["experiment.instances"] = size_key([](auto& c) -> auto& { return c.instances; });
    r["experiment.simulate"] = bool_key([](auto& c) -> auto& { return c.simulate; });
    r["experiment.draws_per_instance"] = size_key([](auto& c) -> auto& { return c.draws_per_instance; });
    r["output.dump_instances"] = bool_key([](auto& c) -> auto& { return c.dump_instances; });

    r["optimize.design"] = design_key([](auto& c) -> auto& { return c.optimize_design; });
    r["simulate.policy_csv"] = string_key([](auto& c) -> auto& { return c.simulate_policy_csv; });
    r["simulate.design"] = design_key([](auto& c) -> auto& { return c.simulate_design; });
    r["simulate.mode"] = string_key([](auto& c) -> auto& { return c.simulate_mode; });
    r["simulate.realizations"] = size_key([](auto& c) -> auto& { return c.simulate_realizations; });
    r["simulate.records"] = bool_key([](auto& c) -> auto& { return c.simulate_records; });

    r["validate.instances"] = size_key([](auto& c) -> auto& { return c.validate_instances; });
    r["validate.realizations"] = size_key([](auto& c) -> auto& { return c.validate_realizations; });
    return r;
  }();
  return keys;
}

// Arrays and scalars are leaves; objects contribute their dotted paths.
void flatten(const json& j, const std::string& prefix, std::vector<std::pair<std::string, json>>& out) {
  for (const auto& [k, v] : j.items()) {
    std::string path = prefix.empty() ? k : prefix + "." + k;
    if (v.is_object()) flatten(v, path, out);
    else out.emplace_back(std::move(path), v);
  }
}

std::string join(const std::vector<std::string>& items) {
  std::string s;
  for (const auto& x : items) {
    if (!s.empty()) s += "; ";
    s += x;
  }
  return s;
}

}  // namespace

void ExperimentConfig::validate() const {
  std::vector<std::string> errs;
  auto check = [&](bool ok, const std::string& what) {
    if (!ok) errs.push_back(what);
  };
  check(jobs >= 1, "jobs: must be >= 1");
  check(!sweep_values.empty(), "sweep.values: must not be empty");
  for (double v : sweep_values) {
    if (sweep_variable == SweepVariable::active_users)
      check(v >= 0.0 && v == std::floor(v), "sweep.values: active user counts must be integers >= 0");
    else
      check(v > 0.0, "sweep.values: cluster sizes must be > 0");
  }
  check(!designs.empty(), "designs: must not be empty");
  check(counts.empty() || counts == "fixed" || counts == "poisson",
        "scenario.counts: expected fixed or poisson");
  check(simulate_mode == "cluster" || simulate_mode == "scenario",
        "simulate.mode: expected cluster or scenario");
  check(self_factor >= 1.0, "metrics.self_factor: must be >= 1");
  check(pool_users >= 1, "preferences.pool_users: must be >= 1");
  check(files >= 2, "preferences.files: must be >= 2");
  check(cache_size >= 1 && cache_size < files, "cache.size: must satisfy 1 <= S < files");
  check(design_settings.ee_tolerance > 0.0, "optimizer.ee_tolerance: must be > 0");
  check(instances >= 1, "experiment.instances: must be >= 1");
  check(draws_per_instance >= 1, "experiment.draws_per_instance: must be >= 1");
  check(simulate_realizations >= 1, "simulate.realizations: must be >= 1");
  check(validate_instances >= 1, "validate.instances: must be >= 1");
  check(validate_realizations >= 2, "validate.realizations: must be >= 2");
  try {
    ScenarioParams sp = scenario;
    sp.validate();
  } catch (const Error& e) {
    errs.push_back(std::string("scenario/radio: ") + e.what());
  }
  try {
    generator.validate();
  } catch (const Error& e) {
    errs.push_back(std::string("preferences: ") + e.what());
  }
  if (!errs.empty()) throw ConfigError("invalid config: " + join(errs));
}

ExperimentConfig parse_config(std::string_view json_text) {
  json root;
  try {
    root = json::parse(json_text.begin(), json_text.end());
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config must be a JSON object");
  std::vector<std::pair<std::string, json>> entries;
  flatten(root, "", entries);

  ExperimentConfig cfg;
  std::vector<std::string> errs;
  const auto& keys = registry();
  for (const auto& [key, value] : entries) {
    auto it = keys.find(key);
    if (it == keys.end()) {
      errs.push_back("unknown key '" + key + "'");
      continue;
    }
    try {
      it->second.set(cfg, value);
    } catch (const BadValue& e) {
      errs.push_back(key + ": " + e.message);
    }
  }
  if (!errs.empty()) throw ConfigError("invalid config: " + join(errs));
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(std::istream& in) {
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  return load_config(in);
}

std::string config_to_json(const ExperimentConfig& cfg) {
  json j = json::object();
  for (const auto& [key, k] : registry()) j[key] = k.get(cfg);
  return j.dump(2);
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& [key, k] : registry()) out.push_back(key);
  return out;
}

}  // namespace d2dcache
