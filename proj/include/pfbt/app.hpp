#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "pfbt/analysis.hpp"
#include "pfbt/config.hpp"
#include "pfbt/errors.hpp"
#include "pfbt/groundtruth.hpp"
#include "pfbt/profile1d.hpp"
#include "pfbt/solvers.hpp"

namespace pfbt::app {

enum ExitCode : int { kOk = 0, kUsage = 1, kConfig = 2, kNumerical = 3 };

struct CliOptions {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  // profile1d overrides
  std::optional<double> m, alpha, beta, eps;
};

/// Round-trip exact, locale independent number formatting for CSV output.
inline std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace fs = std::filesystem;

inline void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << s;
}

inline void write_json(const fs::path& p, const Json& j) { write_text(p, j.dump(2) + "\n"); }

/// Streams iteration rows as CSV while the solver runs, so a failed run keeps
/// its partial log.
class IterationWriter {
 public:
  IterationWriter(const fs::path& main, const fs::path& warm, std::size_t num_phases)
      : main_path_(main), warm_path_(warm), phases_(num_phases) {}

  void operator()(const IterationRow& r, Stage stage) {
    std::ofstream& out = stage == Stage::kMain ? main_ : warm_;
    if (!out.is_open()) {
      out.open(stage == Stage::kMain ? main_path_ : warm_path_, std::ios::binary);
      if (!out) throw std::runtime_error("cannot write iteration log");
      out << header(stage == Stage::kMain ? phases_ : 1) << '\n';
    }
    out << r.iteration << ',' << num(r.eps) << ',' << num(r.energy.total) << ','
        << num(r.energy.flux_term);
    for (double p : r.energy.phase_terms) out << ',' << num(p);
    out << ',' << num(r.energy_after_phi) << ',' << num(r.energy.divergence_residual) << ','
        << num(r.newton_residual) << ',' << (r.newton_accepted ? 1 : 0) << ',' << r.region_changes
        << ',' << r.diffuse_triangles << '\n';
    out.flush();
  }

  static std::string header(std::size_t phases) {
    std::string h = "iteration,eps,energy_total,flux_term";
    for (std::size_t i = 1; i <= phases; ++i) h += ",phase_term_" + std::to_string(i);
    return h + ",energy_after_phi,divergence_residual,newton_residual,newton_accepted,"
               "region_changes,diffuse_triangles";
  }

 private:
  fs::path main_path_, warm_path_;
  std::size_t phases_;
  std::ofstream main_, warm_;
};

inline void write_fields(const fs::path& dir, const TriMesh& mesh, const PhaseState& st) {
  std::ostringstream f;
  f << "x,y,sigma_x,sigma_y,sigma_norm,label\n";
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto ti = static_cast<Eigen::Index>(t);
    const Vec2 s = st.sigma.at(ti);
    f << num(mesh.centroids[t].x()) << ',' << num(mesh.centroids[t].y()) << ',' << num(s.x()) << ','
      << num(s.y()) << ',' << num(st.sigma.norm_at(ti)) << ',' << st.regions[t] << '\n';
  }
  write_text(dir / "fields.csv", f.str());
  for (std::size_t k = 0; k < st.phis.size(); ++k) {
    std::ostringstream p;
    p << "x,y,phi\n";
    for (std::size_t v = 0; v < mesh.num_nodes(); ++v)
      p << num(mesh.nodes[v].x()) << ',' << num(mesh.nodes[v].y()) << ','
        << num(st.phis[k][static_cast<Eigen::Index>(v)]) << '\n';
    write_text(dir / ("phi_" + std::to_string(k + 1) + ".csv"), p.str());
  }
}

inline Json energy_to_json(const EnergyBreakdown& e) {
  Json j;
  j["flux_term"] = e.flux_term;
  j["phase_terms"] = e.phase_terms;
  j["total"] = e.total;
  j["divergence_residual"] = e.divergence_residual;
  return j;
}

inline Json network_to_json(const PolyhedralNetwork& net, const CostSpec& cost) {
  Json j;
  j["vertices"] = Json::array();
  for (const auto& v : net.vertices)
    j["vertices"].push_back(
        {{"x", v.x.x()}, {"y", v.x.y()}, {"demand", v.demand}, {"terminal", v.terminal}});
  j["edges"] = Json::array();
  for (const auto& e : net.edges)
    j["edges"].push_back(
        {{"from", e.from}, {"to", e.to}, {"mass", e.mass}, {"length", net.edge_length(e)}});
  j["num_steiner"] = net.num_steiner();
  j["cost"] = network_cost(net, cost);
  return j;
}

inline Json summarize(const Problem& prob, const RunConfig& cfg, const RunResult& res) {
  Json j;
  j["schema_version"] = 1;
  j["algorithm"] = res.algorithm;
  j["config"] = run_config_to_json(cfg);
  j["mesh"] = {{"n", prob.mesh.n},
               {"h", prob.mesh.h},
               {"num_nodes", prob.mesh.num_nodes()},
               {"num_triangles", prob.mesh.num_triangles()}};
  j["rescaled"] = res.rescaled;
  j["energy"] = energy_to_json(res.final_energy);
  const double fn = prob.F.norm();
  j["load_norm"] = fn;
  j["relative_divergence_residual"] = fn > 0.0 ? res.final_energy.divergence_residual / fn : 0.0;
  j["iterations"] = res.log.size();
  j["warm_start_iterations"] = res.warm_start_log.size();
  int rejected = 0;
  for (const auto& r : res.log) rejected += r.newton_accepted ? 0 : 1;
  Json newton;
  newton["rejected_steps"] = rejected;
  newton["final_residual"] = prob.cost.diffuse_allowed() ? Json(res.log.back().newton_residual) : Json();
  j["newton"] = newton;
  std::vector<int> counts(prob.cost.num_phases() + 1, 0);
  for (int l : res.state.regions) ++counts.at(static_cast<std::size_t>(l));
  j["label_counts"] = counts;
  return j;
}

struct RunOutput {
  Problem problem;
  RunConfig config;
  RunResult result;
  Json summary;
};

inline AppConfig load_config(const CliOptions& o) {
  if (o.config_path.empty()) throw ConfigError("--config is required");
  AppConfig a = parse_app_config(read_json_file(o.config_path));
  if (o.seed && a.run) a.run->seed = *o.seed;
  return a;
}

inline fs::path output_dir(const CliOptions& o, const AppConfig& a) {
  fs::path dir = !o.out_dir.empty() ? fs::path(o.out_dir)
                                    : (!a.output_dir.empty() ? fs::path(a.output_dir) : fs::path("out"));
  fs::create_directories(dir);
  return dir;
}

inline RunOutput execute_run(const RunConfig& cfg, const fs::path& dir) {
  RunOutput out{Problem::from_config(cfg), cfg, {}, {}};
  IterationWriter writer(dir / "iterations.csv", dir / "warmstart_iterations.csv",
                         cfg.cost.num_phases());
  out.result = run_solver(out.problem, cfg, std::ref(writer));
  write_fields(dir, out.problem.mesh, out.result.state);
  out.summary = summarize(out.problem, cfg, out.result);
  return out;
}

struct GroundTruthComparison {
  Json json;
};

/// Relative energy gap and junction distance between a run and the best network.
inline Json compare_with_network(const RunOutput& run, const BestNetwork& gt, const CostSpec& cost) {
  Json j;
  j["network"] = network_to_json(gt.network, cost);
  j["cost"] = gt.cost;
  j["relative_gap"] = (run.result.final_energy.total - gt.cost) / gt.cost;
  const TriMesh& mesh = run.problem.mesh;
  std::vector<Vec2> terminals, steiner;
  for (const auto& v : gt.network.vertices) (v.terminal ? terminals : steiner).push_back(v.x);
  if (!steiner.empty()) {
    const auto support = flux_support(run.result.state.sigma, mesh);
    const double r = junction_radius(mesh, run.config.eps_end);
    const auto junc = find_junction(support, r, mesh, terminals);
    if (junc) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& s : steiner) best = std::min(best, (s - junc->position).norm());
      j["junction"] = {{"x", junc->position.x()},
                       {"y", junc->position.y()},
                       {"candidates", junc->candidates},
                       {"distance_to_steiner", best},
                       {"distance_in_cells", best / mesh.h}};
    } else {
      j["junction"] = nullptr;
    }
  }
  return j;
}

inline int cmd_run(const CliOptions& o, std::ostream& log) {
  const AppConfig a = load_config(o);
  if (!a.run) throw ConfigError("run: config needs eps_end, cost, mu_plus and mu_minus");
  const fs::path dir = output_dir(o, a);
  RunOutput r = execute_run(*a.run, dir);
  write_json(dir / "summary.json", r.summary);
  log << r.result.algorithm << ": final energy " << num(r.result.final_energy.total) << " -> "
      << dir.string() << '\n';
  return kOk;
}

inline OptimizerOptions optimizer_options(const AppConfig& a, const CliOptions& o) {
  OptimizerOptions opt;
  if (a.run) opt.seed = a.run->seed;
  if (o.seed) opt.seed = *o.seed;
  return opt;
}

inline BestNetwork ground_truth(const AppConfig& a, const CliOptions& o) {
  if (!a.cost) throw ConfigError("groundtruth: config needs a 'cost'");
  if (a.terminals.empty())
    throw ConfigError("groundtruth: config needs 'terminals' or at most 5 atoms in mu_plus/mu_minus");
  return best_network(a.terminals, *a.cost, optimizer_options(a, o));
}

inline int cmd_groundtruth(const CliOptions& o, std::ostream& log) {
  const AppConfig a = load_config(o);
  const BestNetwork gt = ground_truth(a, o);
  const fs::path dir = output_dir(o, a);
  Json j = network_to_json(gt.network, *a.cost);
  j["cost_spec"] = cost_to_json(*a.cost);
  j["candidate_costs"] = gt.candidate_costs;
  write_json(dir / "network.json", j);
  log << "groundtruth: cost " << num(gt.cost) << ", " << gt.network.num_steiner()
      << " Steiner vertices -> " << dir.string() << '\n';
  return kOk;
}

inline int cmd_profile1d(const CliOptions& o, std::ostream& log) {
  AppConfig a;
  if (!o.config_path.empty()) a = load_config(o);
  const double m = o.m.value_or(a.profile_mass.value_or(2.0));
  const double alpha = o.alpha.value_or(a.profile_alpha.value_or(1.0));
  const double beta = o.beta.value_or(a.profile_beta.value_or(1.0));
  const double eps = o.eps.value_or(a.profile_eps.value_or(0.1));
  if (!(m > 0 && alpha > 0 && beta > 0 && eps > 0))
    throw ConfigError("profile1d: m, alpha, beta and eps must be positive");
  const fs::path dir = output_dir(o, a);
  const Profile1d p = solve_profile1d(m, alpha, beta, eps);
  std::ostringstream csv;
  csv << "d,sigma_analytic,phi_analytic,sigma_numeric,phi_numeric\n";
  for (std::size_t k = 0; k < p.nodes.size(); ++k) {
    const double d = p.nodes[k];
    if (d < -1e-14 * eps || d > 10.0 * eps * (1.0 + 1e-14)) continue;
    const double dd = std::max(d, 0.0);
    csv << num(dd) << ',' << num(p.analytic.sigma(dd)) << ',' << num(p.analytic.phi(dd)) << ','
        << num(p.sigma_at_node(k)) << ',' << num(p.phi[k]) << '\n';
  }
  write_text(dir / "profile1d.csv", csv.str());
  Json j;
  j["m"] = m;
  j["alpha"] = alpha;
  j["beta"] = beta;
  j["eps"] = eps;
  j["half_width"] = p.analytic.half_width;
  j["plateau"] = p.analytic.plateau;
  j["numeric_mass"] = p.mass;
  j["numeric_energy"] = p.energy;
  j["analytic_energy_per_length"] = alpha * m + beta;
  j["iterations"] = p.iterations;
  j["cell_width"] = p.cell_width();
  write_json(dir / "profile1d.json", j);
  log << "profile1d: width " << num(p.analytic.half_width) << ", plateau " << num(p.analytic.plateau)
      << ", numeric mass " << num(p.mass) << " -> " << dir.string() << '\n';
  return kOk;
}

inline int cmd_compare(const CliOptions& o, std::ostream& log) {
  const AppConfig a = load_config(o);
  if (!a.run) throw ConfigError("compare: config needs eps_end, cost, mu_plus and mu_minus");
  const BestNetwork gt = ground_truth(a, o);
  const fs::path dir = output_dir(o, a);
  RunOutput r = execute_run(*a.run, dir);
  r.summary["groundtruth"] = compare_with_network(r, gt, *a.cost);
  write_json(dir / "summary.json", r.summary);
  Json net = network_to_json(gt.network, *a.cost);
  net["cost_spec"] = cost_to_json(*a.cost);
  net["candidate_costs"] = gt.candidate_costs;
  write_json(dir / "network.json", net);
  log << "compare: energy " << num(r.result.final_energy.total) << ", network " << num(gt.cost)
      << ", gap " << num(r.summary["groundtruth"]["relative_gap"].get<double>()) << '\n';
  return kOk;
}

/// Maps exceptions to the exit code contract: 2 for configuration problems,
/// 3 for numerical failures.
template <class Fn>
int guarded(Fn&& fn, std::ostream& err) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kNumerical;
  }
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  CLI::App cli{"Phase field solver for branched transport"};
  cli.require_subcommand(1);
  CliOptions o;
  std::uint64_t seed = 0;
  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* c = sub->add_option("--config", o.config_path, "JSON configuration file");
    if (config_required) c->required();
    sub->add_option("--out", o.out_dir, "output directory");
    sub->add_option("--seed", seed, "random seed");
  };
  auto* run = cli.add_subcommand("run", "solve the phase field problem and write a bundle");
  add_common(run, true);
  auto* gt = cli.add_subcommand("groundtruth", "optimize the best straight-edge network");
  add_common(gt, true);
  auto* cmp = cli.add_subcommand("compare", "run and groundtruth, with the relative energy gap");
  add_common(cmp, true);
  auto* prof = cli.add_subcommand("profile1d", "analytic and numerical 1D branch profile");
  add_common(prof, false);
  double m = 0, alpha = 0, beta = 0, eps = 0;
  auto* om = prof->add_option("--m", m, "branch mass");
  auto* oa = prof->add_option("--alpha", alpha, "segment slope");
  auto* ob = prof->add_option("--beta", beta, "segment offset");
  auto* oe = prof->add_option("--eps", eps, "phase field width");
  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = cli.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }
  for (auto* sub : {run, gt, cmp, prof})
    if (sub->parsed() && sub->count("--seed")) o.seed = seed;
  if (om->count()) o.m = m;
  if (oa->count()) o.alpha = alpha;
  if (ob->count()) o.beta = beta;
  if (oe->count()) o.eps = eps;
  return guarded(
      [&] {
        if (run->parsed()) return cmd_run(o, out);
        if (gt->parsed()) return cmd_groundtruth(o, out);
        if (cmp->parsed()) return cmd_compare(o, out);
        return cmd_profile1d(o, out);
      },
      err);
}

}  // namespace pfbt::app
