#pragma once

#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "pfbt/cost.hpp"
#include "pfbt/errors.hpp"
#include "pfbt/groundtruth.hpp"
#include "pfbt/measures.hpp"
#include "pfbt/solvers.hpp"

namespace pfbt {

using Json = nlohmann::json;

namespace detail {

inline void reject_unknown(const Json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) throw ConfigError(where + ": unknown key '" + it.key() + "'");
}

inline double get_number(const Json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + ": missing '" + key + "'");
  if (!j.at(key).is_number()) throw ConfigError(where + ": '" + key + "' must be a number");
  return j.at(key).get<double>();
}

inline double get_number_or(const Json& j, const std::string& key, double fallback,
                            const std::string& where) {
  return j.contains(key) ? get_number(j, key, where) : fallback;
}

inline int get_int_or(const Json& j, const std::string& key, int fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number_integer()) throw ConfigError(where + ": '" + key + "' must be an integer");
  return j.at(key).get<int>();
}

inline Vec2 get_point(const Json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw ConfigError(where + ": expected [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace detail

/// {"alpha0": number | "inf", "segments": [[alpha, beta], ...], "p": number}
inline CostSpec parse_cost(const Json& j) {
  const std::string where = "cost";
  if (!j.is_object()) throw ConfigError("cost: expected an object");
  detail::reject_unknown(j, {"alpha0", "segments", "p"}, where);
  if (!j.contains("segments") || !j["segments"].is_array())
    throw ConfigError("cost: 'segments' must be a list of [alpha, beta] pairs");
  std::vector<Segment> segs;
  for (const auto& s : j["segments"]) {
    if (!s.is_array() || s.size() != 2 || !s[0].is_number() || !s[1].is_number())
      throw ConfigError("cost: each segment must be [alpha, beta]");
    segs.push_back({s[0].get<double>(), s[1].get<double>()});
  }
  const double p = detail::get_number_or(j, "p", 2.0, where);
  CostSpec c;
  const Json a0 = j.value("alpha0", Json("inf"));
  if (a0.is_string()) {
    const auto v = a0.get<std::string>();
    if (v != "inf" && v != "infinity") throw ConfigError("cost: alpha0 must be a number or \"inf\"");
    c = CostSpec::infinite(std::move(segs), p);
  } else if (a0.is_number()) {
    c = CostSpec::finite(a0.get<double>(), std::move(segs), p);
  } else {
    throw ConfigError("cost: alpha0 must be a number or \"inf\"");
  }
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

inline Json cost_to_json(const CostSpec& c) {
  Json j;
  if (c.diffuse_allowed())
    j["alpha0"] = c.alpha0;
  else
    j["alpha0"] = "inf";
  j["segments"] = Json::array();
  for (const auto& s : c.segments) j["segments"].push_back({s.alpha, s.beta});
  j["p"] = c.p;
  return j;
}

/// {"atoms": [[x, y, mass], ...]} or
/// {"density": {"preset": "uniform_annulus", "center": [x, y], "r_inner": r0, "r_outer": r1}} or
/// {"density": {"preset": "uniform_disk_complement", "center": [x, y], "radius": r, "margin": d}}
inline MeasureSpec parse_measure(const Json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  detail::reject_unknown(j, {"atoms", "density"}, where);
  if (j.contains("atoms") == j.contains("density"))
    throw ConfigError(where + ": give exactly one of 'atoms' or 'density'");
  try {
    if (j.contains("atoms")) {
      if (!j["atoms"].is_array() || j["atoms"].empty())
        throw ConfigError(where + ": 'atoms' must be a nonempty list of [x, y, mass]");
      std::vector<Atom> atoms;
      for (const auto& a : j["atoms"]) {
        if (!a.is_array() || a.size() != 3 || !a[0].is_number() || !a[1].is_number() ||
            !a[2].is_number())
          throw ConfigError(where + ": each atom must be [x, y, mass]");
        atoms.push_back({Vec2(a[0].get<double>(), a[1].get<double>()), a[2].get<double>()});
      }
      return MeasureSpec::from_atoms(std::move(atoms));
    }
    const Json& d = j["density"];
    if (!d.is_object() || !d.contains("preset") || !d["preset"].is_string())
      throw ConfigError(where + ": density needs a 'preset' name");
    DensityPreset p;
    const auto name = d["preset"].get<std::string>();
    const std::string dw = where + ".density";
    p.center = d.contains("center") ? detail::get_point(d["center"], dw + ".center") : Vec2(0.5, 0.5);
    if (name == "uniform_annulus") {
      detail::reject_unknown(d, {"preset", "center", "r_inner", "r_outer"}, dw);
      p.kind = DensityPreset::Kind::kUniformAnnulus;
      p.r_inner = detail::get_number(d, "r_inner", dw);
      p.r_outer = detail::get_number(d, "r_outer", dw);
    } else if (name == "uniform_disk_complement") {
      detail::reject_unknown(d, {"preset", "center", "radius", "margin"}, dw);
      p.kind = DensityPreset::Kind::kUniformDiskComplement;
      p.r_inner = detail::get_number(d, "radius", dw);
      p.margin = detail::get_number(d, "margin", dw);
      if (!(p.r_inner > 0.0) || !(p.margin > 0.0) ||
          p.center.x() - p.r_inner < p.margin || p.center.x() + p.r_inner > 1.0 - p.margin ||
          p.center.y() - p.r_inner < p.margin || p.center.y() + p.r_inner > 1.0 - p.margin)
        throw ConfigError(dw + ": the excluded disk must lie inside the margin box");
    } else {
      throw ConfigError(dw + ": unknown preset '" + name + "'");
    }
    return MeasureSpec::from_density(p);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

inline Json measure_to_json(const MeasureSpec& m) {
  Json j;
  if (m.density) {
    const auto& d = *m.density;
    Json dj;
    dj["preset"] = DensityPreset::name(d.kind);
    dj["center"] = {d.center.x(), d.center.y()};
    if (d.kind == DensityPreset::Kind::kUniformAnnulus) {
      dj["r_inner"] = d.r_inner;
      dj["r_outer"] = d.r_outer;
    } else {
      dj["radius"] = d.r_inner;
      dj["margin"] = d.margin;
    }
    j["density"] = dj;
  } else {
    j["atoms"] = Json::array();
    for (const auto& a : m.atoms) j["atoms"].push_back({a.x.x(), a.x.y(), a.mass});
  }
  return j;
}

/// Everything a config file can carry; run-specific parts are optional so the
/// same file format serves run, groundtruth, profile1d and compare.
struct AppConfig {
  std::optional<RunConfig> run;
  std::optional<CostSpec> cost;
  std::vector<Terminal> terminals;  // explicit, or derived from atomic measures
  std::string output_dir;
  // profile1d parameters
  std::optional<double> profile_mass, profile_alpha, profile_beta, profile_eps;
  Json raw;
};

inline const std::set<std::string>& run_keys() {
  static const std::set<std::string> keys{
      "n",          "eps_start",      "eps_end",          "n_iter",         "cost",
      "mu_plus",    "mu_minus",       "init_radius_factor", "newton_damping", "solver_tolerance",
      "seed",       "rescaled",       "warm_start_fit"};
  return keys;
}

inline RunConfig parse_run_config(const Json& j) {
  RunConfig c;
  const std::string w = "config";
  c.n = detail::get_int_or(j, "n", c.n, w);
  c.eps_end = detail::get_number(j, "eps_end", w);
  c.eps_start = detail::get_number_or(j, "eps_start", c.eps_end, w);
  c.n_iter = detail::get_int_or(j, "n_iter", c.n_iter, w);
  if (!j.contains("cost")) throw ConfigError("config: missing 'cost'");
  c.cost = parse_cost(j["cost"]);
  if (!j.contains("mu_plus") || !j.contains("mu_minus"))
    throw ConfigError("config: 'mu_plus' and 'mu_minus' are required");
  c.mu_plus = parse_measure(j["mu_plus"], "mu_plus");
  c.mu_minus = parse_measure(j["mu_minus"], "mu_minus");
  c.init_radius_factor = detail::get_number_or(j, "init_radius_factor", c.init_radius_factor, w);
  c.newton_damping = detail::get_number_or(j, "newton_damping", c.newton_damping, w);
  c.solver_tolerance = detail::get_number_or(j, "solver_tolerance", c.solver_tolerance, w);
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned() && !(j["seed"].is_number_integer() && j["seed"].get<long long>() >= 0))
      throw ConfigError("config: 'seed' must be a nonnegative integer");
    c.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("rescaled")) {
    if (!j["rescaled"].is_boolean()) throw ConfigError("config: 'rescaled' must be true or false");
    c.rescaled = j["rescaled"].get<bool>();
  }
  if (j.contains("warm_start_fit")) {
    if (!j["warm_start_fit"].is_boolean())
      throw ConfigError("config: 'warm_start_fit' must be true or false");
    c.warm_start_fit = j["warm_start_fit"].get<bool>();
  }
  c.validate();
  return c;
}

inline Json run_config_to_json(const RunConfig& c) {
  Json j;
  j["n"] = c.n;
  j["eps_start"] = c.eps_start;
  j["eps_end"] = c.eps_end;
  j["n_iter"] = c.n_iter;
  j["cost"] = cost_to_json(c.cost);
  j["mu_plus"] = measure_to_json(c.mu_plus);
  j["mu_minus"] = measure_to_json(c.mu_minus);
  j["init_radius_factor"] = c.init_radius_factor;
  j["newton_damping"] = c.newton_damping;
  j["solver_tolerance"] = c.solver_tolerance;
  j["seed"] = c.seed;
  j["rescaled"] = c.use_rescaled();
  j["warm_start_fit"] = c.warm_start_fit;
  return j;
}

/// Terminals [[x, y, demand], ...]; demand > 0 for sources.
inline std::vector<Terminal> parse_terminals(const Json& j) {
  if (!j.is_array()) throw ConfigError("terminals: expected a list of [x, y, demand]");
  std::vector<Terminal> t;
  for (const auto& e : j) {
    if (!e.is_array() || e.size() != 3 || !e[0].is_number() || !e[1].is_number() || !e[2].is_number())
      throw ConfigError("terminals: each entry must be [x, y, demand]");
    t.push_back({Vec2(e[0].get<double>(), e[1].get<double>()), e[2].get<double>()});
  }
  if (t.size() < 2 || t.size() > 5) throw ConfigError("terminals: between 2 and 5 are supported");
  try {
    return balanced_terminals(std::move(t));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

inline std::vector<Terminal> terminals_from_measures(const MeasureSpec& plus, const MeasureSpec& minus) {
  std::vector<Terminal> t;
  for (const auto& a : plus.atoms) t.push_back({a.x, a.mass});
  for (const auto& a : minus.atoms) t.push_back({a.x, -a.mass});
  return t;
}

inline AppConfig parse_app_config(const Json& j) {
  if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
  std::set<std::string> allowed = run_keys();
  allowed.insert({"description", "output_dir", "terminals", "profile1d"});
  detail::reject_unknown(j, allowed, "config");
  AppConfig a;
  a.raw = j;
  if (j.contains("output_dir")) {
    if (!j["output_dir"].is_string()) throw ConfigError("config: 'output_dir' must be a string");
    a.output_dir = j["output_dir"].get<std::string>();
  }
  if (j.contains("mu_plus") || j.contains("mu_minus") || j.contains("eps_end")) {
    a.run = parse_run_config(j);
    a.cost = a.run->cost;
  } else if (j.contains("cost")) {
    a.cost = parse_cost(j["cost"]);
  }
  if (j.contains("terminals")) {
    a.terminals = parse_terminals(j["terminals"]);
  } else if (a.run && a.run->mu_plus.is_atomic() && a.run->mu_minus.is_atomic()) {
    const auto t = terminals_from_measures(a.run->mu_plus, a.run->mu_minus);
    if (t.size() <= 5) a.terminals = t;
  }
  if (j.contains("profile1d")) {
    const Json& p = j["profile1d"];
    if (!p.is_object()) throw ConfigError("profile1d: expected an object");
    detail::reject_unknown(p, {"m", "alpha", "beta", "eps"}, "profile1d");
    a.profile_mass = detail::get_number(p, "m", "profile1d");
    a.profile_alpha = detail::get_number(p, "alpha", "profile1d");
    a.profile_beta = detail::get_number(p, "beta", "profile1d");
    a.profile_eps = detail::get_number(p, "eps", "profile1d");
  }
  return a;
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
}

}  // namespace pfbt
