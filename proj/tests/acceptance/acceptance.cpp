// Acceptance report: one PASS/FAIL line per criterion, followed by indented
// detail lines. The process exits 0 whenever the report completes; the
// verdicts are in the report.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "common/descent_suite.hpp"
#include "oracles/oracles.hpp"
#include "pfbt/app.hpp"

using namespace pfbt;
namespace fs = std::filesystem;

namespace {

class Report {
 public:
  explicit Report(const std::string& path) {
    if (!path.empty()) file_.open(path);
  }
  void line(const std::string& s) {
    std::cout << s << std::endl;
    if (file_.is_open()) file_ << s << '\n' << std::flush;
  }
  void verdict(int id, bool pass, const std::string& title, const std::vector<std::string>& details) {
    line(std::string(pass ? "PASS" : "FAIL") + " C" + std::to_string(id) + " " + title);
    for (const auto& d : details) line("    " + d);
    ++(pass ? passed_ : failed_);
  }
  int passed() const { return passed_; }
  int failed() const { return failed_; }

 private:
  std::ofstream file_;
  int passed_ = 0, failed_ = 0;
};

std::string fmt(double v, int prec = 6) {
  std::ostringstream s;
  s.precision(prec);
  s << v;
  return s.str();
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

AppConfig sample(const std::string& name) {
  return parse_app_config(read_json_file(std::string(PFBT_SOURCE_DIR) + "/configs/" + name + ".json"));
}

app::RunOutput run_into(const RunConfig& cfg, const fs::path& dir) {
  fs::create_directories(dir);
  app::RunOutput r = app::execute_run(cfg, dir);
  app::write_json(dir / "summary.json", r.summary);
  return r;
}

void single_segment_limit(Report& rep, const fs::path& work) {
  std::vector<std::string> d;
  RunConfig cfg = *sample("two_point").run;
  Stopwatch sw;
  const auto main = run_into(cfg, work / "c1_eps0.01");
  const double secs = sw.seconds();
  const double e = main.result.final_energy.total;
  const bool in_range = e >= 0.90 && e <= 1.15;
  const bool fast = secs <= 300.0;
  d.push_back("energy at eps 0.01 (n 256, 100 iterations): " + fmt(e) + ", required in [0.90, 1.15]");
  d.push_back("runtime " + fmt(secs, 3) + " s, limit 300 s");

  std::vector<double> energies;
  for (double eps : {0.04, 0.02}) {
    RunConfig c = cfg;
    c.eps_end = eps;
    c.eps_start = 2.0 * eps;
    energies.push_back(run_into(c, work / ("c1_eps" + fmt(eps))).result.final_energy.total);
  }
  energies.push_back(e);
  bool monotone = true;
  for (std::size_t k = 1; k < energies.size(); ++k)
    monotone = monotone && std::abs(energies[k] - 1.0) < std::abs(energies[k - 1] - 1.0);
  d.push_back("energies at eps 0.04, 0.02, 0.01: " + fmt(energies[0]) + ", " + fmt(energies[1]) +
              ", " + fmt(energies[2]) + "; |E - 1| decreasing: " + (monotone ? "yes" : "no"));
  rep.verdict(1, in_range && fast && monotone, "single-segment limit energy", d);
}

void profile_oracle(Report& rep, const fs::path& work) {
  std::vector<std::string> d;
  Stopwatch sw;
  const Profile1d p = solve_profile1d(2.0, 1.0, 1.0, 0.1);
  const double secs = sw.seconds();
  const auto& a = p.analytic;
  const bool width = std::abs(a.half_width - 0.1) <= 1e-12;
  const bool plateau = std::abs(a.plateau - 10.0) <= 1e-9;
  double linf = 0.0, at = 0.0;
  for (std::size_t k = 0; k < p.nodes.size(); ++k) {
    const double dist = std::abs(p.nodes[k]);
    if (std::abs(dist - a.half_width) <= p.cell_width() * (1 + 1e-9)) continue;
    const double err = std::abs(p.phi[k] - a.phi(dist));
    if (err > linf) {
      linf = err;
      at = p.nodes[k];
    }
  }
  const bool phi_ok = linf <= 0.05;
  const bool mass_ok = std::abs(p.mass - 2.0) <= 0.04;
  const bool fast = secs < 1.0;
  d.push_back("half width " + fmt(a.half_width, 12) + " (0.1), plateau " + fmt(a.plateau, 12) + " (10)");
  d.push_back("phi L-inf error outside one cell of the kink: " + fmt(linf) + " at d = " + fmt(at) +
              ", limit 0.05");
  d.push_back("numerical mass " + fmt(p.mass, 12) + ", required 2 within 2%");
  d.push_back("runtime " + fmt(secs, 3) + " s, limit 1 s");
  fs::create_directories(work / "c2_profile1d");
  std::ostringstream csv;
  csv << "d,phi_analytic,phi_numeric\n";
  for (std::size_t k = 0; k < p.nodes.size(); ++k)
    csv << app::num(p.nodes[k]) << ',' << app::num(a.phi(p.nodes[k])) << ',' << app::num(p.phi[k]) << '\n';
  app::write_text(work / "c2_profile1d" / "profile.csv", csv.str());
  rep.verdict(2, width && plateau && phi_ok && mass_ok && fast, "1D profile oracle", d);
}

void ground_truth_gap(Report& rep, const fs::path& work) {
  std::vector<std::string> d;
  const AppConfig a = sample("three_terminal");
  Stopwatch sw;
  const BestNetwork gt = best_network(a.terminals, *a.cost);
  const auto run = run_into(*a.run, work / "c3_three_terminal");
  const double secs = sw.seconds();
  const Json cmp = app::compare_with_network(run, gt, *a.cost);
  app::write_json(work / "c3_three_terminal" / "comparison.json", cmp);
  const double gap = cmp["relative_gap"].get<double>();
  const bool gap_ok = std::abs(gap) <= 0.10;
  bool junction_ok = false;
  d.push_back("phase field energy " + fmt(run.result.final_energy.total) + ", network cost " +
              fmt(gt.cost) + ", relative gap " + fmt(gap) + ", limit 10%");
  if (cmp["junction"].is_null()) {
    d.push_back("no junction found in the flux support");
  } else {
    const double cells = cmp["junction"]["distance_in_cells"].get<double>();
    junction_ok = cells <= 5.0;
    d.push_back("junction at (" + fmt(cmp["junction"]["x"].get<double>()) + ", " +
                fmt(cmp["junction"]["y"].get<double>()) + "), " + fmt(cells, 4) +
                " cells from the Steiner vertex, limit 5");
  }
  for (const auto& v : gt.network.vertices)
    if (!v.terminal) d.push_back("Steiner vertex (" + fmt(v.x.x()) + ", " + fmt(v.x.y()) + ")");
  d.push_back("runtime " + fmt(secs, 4) + " s, limit 900 s");
  rep.verdict(3, gap_ok && junction_ok && secs <= 900.0, "ground-truth gap and junction", d);
}

void descent(Report& rep) {
  std::vector<std::string> d;
  Stopwatch sw;
  const suite::DescentReport r = suite::run_descent_suite(50);
  d.push_back(std::to_string(r.configs) + " configurations, " +
              std::to_string(r.monotonicity_violations) + " energy increases above 1e-9 relative, " +
              std::to_string(r.residual_violations) + " residuals above 1e-8 ||F||");
  d.push_back("worst relative increase " + fmt(r.worst_relative_increase) + ", worst relative residual " +
              fmt(r.worst_relative_residual));
  for (std::size_t k = 0; k < std::min<std::size_t>(r.failures.size(), 5); ++k) d.push_back(r.failures[k]);
  d.push_back("runtime " + fmt(sw.seconds(), 3) + " s");
  rep.verdict(4, r.configs == 50 && r.monotonicity_violations == 0 && r.residual_violations == 0,
              "fixed-eps descent suite", d);
}

Eigen::VectorXd random_vector(Eigen::Index n, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::VectorXd v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

void oracle_equivalence(Report& rep) {
  std::vector<std::string> d;
  std::mt19937_64 rng(5);
  double worst_k = 0.0, worst_b = 0.0, worst_m = 0.0, worst_phi = 0.0;
  for (int n : {1, 2}) {
    const TriMesh m = build_mesh(n);
    const auto om = oracle::unit_square(n);
    const Eigen::Index nt = 2 * n * n;
    const Eigen::VectorXd w = random_vector(nt, 0.1, 3.0, rng);
    worst_k = std::max(worst_k, (Eigen::MatrixXd(assemble_weighted_stiffness(P0ScalarField(w), m)) -
                                 oracle::stiffness(om, w)).cwiseAbs().maxCoeff());
    worst_b = std::max(worst_b, (Eigen::MatrixXd(assemble_B(m)) - oracle::divergence_pairing(om))
                                    .cwiseAbs()
                                    .maxCoeff());
    worst_m = std::max(worst_m, (Eigen::MatrixXd(assemble_M(P0ScalarField(w), m)) - oracle::p0_mass(om, w))
                                    .cwiseAbs()
                                    .maxCoeff());
    // Phase field system: interior rows after eliminating the boundary.
    const P0VecField sig(random_vector(2 * nt, -2, 2, rng));
    std::vector<char> mask(static_cast<std::size_t>(nt));
    for (std::size_t t = 0; t < mask.size(); ++t) mask[t] = t % 3 != 0;
    const double ef = 0.2, ep = 0.3, beta = 1.7;
    const LinearSystem sys = assemble_phi_system({&sig, &mask, ef, ep, beta}, m);
    Eigen::VectorXd coeff(nt);
    for (Eigen::Index t = 0; t < nt; ++t)
      coeff[t] = mask[static_cast<std::size_t>(t)] ? sig.at(t).squaredNorm() / ef : 0.0;
    const auto [K, r] = oracle::phi_system(om, coeff, beta, ep);
    const Eigen::MatrixXd A(sys.matrix);
    for (std::size_t i = 0; i < m.num_nodes(); ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      if (m.is_boundary[i]) {
        worst_phi = std::max(worst_phi, std::abs(A(ii, ii) - 1.0) + std::abs(sys.rhs[ii] - 1.0));
        continue;
      }
      double rhs = r[ii];
      for (std::size_t j = 0; j < m.num_nodes(); ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        if (m.is_boundary[j]) {
          rhs -= K(ii, jj);
          worst_phi = std::max(worst_phi, std::abs(A(ii, jj)));
        } else {
          worst_phi = std::max(worst_phi, std::abs(A(ii, jj) - K(ii, jj)));
        }
      }
      worst_phi = std::max(worst_phi, std::abs(sys.rhs[ii] - rhs));
    }
  }
  const bool assembly_ok = std::max({worst_k, worst_b, worst_m, worst_phi}) <= 1e-13;
  d.push_back("max entry error on n = 1, 2: stiffness " + fmt(worst_k) + ", B " + fmt(worst_b) + ", M " +
              fmt(worst_m) + ", phase system " + fmt(worst_phi) + "; limit 1e-13");

  // Step relative to s keeps roundoff below truncation for large omega.
  // Central differences lose an order where omega is C^1 but not C^2, so
  // samples next to the kink s = alpha0 / g are skipped.
  double worst_xi = 0.0;
  int xi_points = 0;
  const double eps = 0.05, fd_rel = 1e-5;
  for (const CostSpec& c : {CostSpec::finite(1.2, {{0.5, 1}}), CostSpec::finite(4.0, {{1.5, 0.3}, {0.7, 0.9}}),
                            CostSpec::infinite({{1, 1}})}) {
    for (double g : {0.01, 1.0, 6.0, 40.0})
      for (int k = 0; k <= 60; ++k) {
        const double s = 1e-3 * std::pow(10.0, k / 15.0);  // 1e-3 .. 10
        const double fd_step = fd_rel * s;
        if (c.diffuse_allowed() && std::abs(s - c.alpha0 / g) < 1e3 * fd_step) continue;
        const double fd =
            oracle::derivative([&](double v) { return omega_eps(c, g, v, eps); }, s, fd_step);
        worst_xi = std::max(worst_xi, std::abs(xi(c, s, g, eps) * s - fd));
        ++xi_points;
      }
  }
  const bool xi_ok = worst_xi <= 1e-6;
  d.push_back("max |xi s - d omega / ds| over " + std::to_string(xi_points) +
              " samples (central differences): " + fmt(worst_xi) + ", limit 1e-6");

  const CostSpec c = CostSpec::finite(4.0, {{1.5, 0.3}, {0.7, 0.9}, {0.1, 2.0}});
  std::uniform_real_distribution<double> um(0.0, 5.0), ul(0.0, 1.0);
  int violations = 0;
  for (int k = 0; k < 10000; ++k) {
    const double a = um(rng), b = um(rng), l = ul(rng);
    if (tau(a + b, c) > tau(a, c) + tau(b, c) + 1e-12) ++violations;
    if (tau(l * a + (1 - l) * b, c) < l * tau(a, c) + (1 - l) * tau(b, c) - 1e-12) ++violations;
  }
  d.push_back("tau subadditivity and concavity over 10^4 random pairs: " + std::to_string(violations) +
              " violations");
  rep.verdict(5, assembly_ok && xi_ok && violations == 0, "oracle equivalence", d);
}

void diffuse_consistency(Report& rep, const fs::path& work) {
  std::vector<std::string> d;
  Stopwatch s1;
  const auto ref = run_into(*sample("four_to_four").run, work / "c6_mpfs");
  const double t1 = s1.seconds();
  Stopwatch s2;
  const auto off = run_into(*sample("four_to_four_offroad").run, work / "c6_mpfsd_1e6");
  const double t2 = s2.seconds();
  const double e_ref = ref.result.final_energy.total, e_off = off.result.final_energy.total;
  const double rel = std::abs(e_off - e_ref) / e_ref;
  int rows_with_diffuse = 0;
  for (const auto* log : {&off.result.log, &off.result.warm_start_log})
    for (const auto& row : *log) rows_with_diffuse += row.diffuse_triangles > 0 ? 1 : 0;
  const bool match = rel <= 0.01 && rows_with_diffuse == 0;
  d.push_back(ref.result.algorithm + " energy " + fmt(e_ref, 8) + " (" + fmt(t1, 3) + " s), " +
              off.result.algorithm + " with alpha0 = 1e6 energy " + fmt(e_off, 8) + " (" + fmt(t2, 3) +
              " s); relative difference " + fmt(rel) + ", limit 1%");
  d.push_back("logged iterations with label 0: " + std::to_string(rows_with_diffuse) + " of " +
              std::to_string(off.result.log.size()));

  Stopwatch s3;
  const auto dif = run_into(*sample("diffuse_sink").run, work / "c6_diffuse_sink");
  const double t3 = s3.seconds();
  const auto& labels = dif.result.state.regions;
  const auto zero = std::count(labels.begin(), labels.end(), 0);
  const double frac = static_cast<double>(zero) / static_cast<double>(labels.size());
  d.push_back("alpha0 = 3 with annular sink: " + std::to_string(zero) + " of " +
              std::to_string(labels.size()) + " triangles carry label 0 (" + fmt(100 * frac, 4) +
              "%), required at least 5%; energy " + fmt(dif.result.final_energy.total) + " (" +
              fmt(t3, 3) + " s)");
  const bool times = t1 <= 1200 && t2 <= 1200 && t3 <= 1200;
  d.push_back(std::string("each run within 1200 s: ") + (times ? "yes" : "no"));
  rep.verdict(6, match && frac >= 0.05 && times, "diffuse-transport consistency", d);
}

void topology_counts(Report& rep) {
  std::vector<std::string> d;
  bool ok = true;
  std::string counts;
  for (int k = 2; k <= 5; ++k) {
    const long got = static_cast<long>(enumerate_topologies(k).size());
    const long want = oracle::double_factorial_count(k);
    ok = ok && got == want;
    counts += (k > 2 ? ", " : "") + std::string("k=") + std::to_string(k) + ": " + std::to_string(got) +
              " (" + std::to_string(want) + ")";
  }
  d.push_back(counts);
  rep.verdict(7, ok, "full topology counts", d);
}

}  // namespace

int main(int argc, char** argv) {
  std::string report_path;
  fs::path work = "acceptance_runs";
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--report" && i + 1 < argc) {
      report_path = argv[++i];
    } else if (a == "--work" && i + 1 < argc) {
      work = argv[++i];
    } else if (a == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      std::string tok;
      while (std::getline(ss, tok, ',')) only.insert(std::stoi(tok));
    } else {
      std::cerr << "usage: pfbt_acceptance [--report FILE] [--work DIR] [--only 1,2,...]\n";
      return 1;
    }
  }
  fs::create_directories(work);
  Report rep(report_path);
  Stopwatch total;
  const std::vector<std::pair<int, std::function<void()>>> criteria{
      {1, [&] { single_segment_limit(rep, work); }},
      {2, [&] { profile_oracle(rep, work); }},
      {3, [&] { ground_truth_gap(rep, work); }},
      {4, [&] { descent(rep); }},
      {5, [&] { oracle_equivalence(rep); }},
      {6, [&] { diffuse_consistency(rep, work); }},
      {7, [&] { topology_counts(rep); }},
  };
  for (const auto& [id, fn] : criteria) {
    if (!only.empty() && !only.count(id)) continue;
    try {
      fn();
    } catch (const std::exception& e) {
      rep.verdict(id, false, "aborted", {e.what()});
    }
  }
  rep.line(std::to_string(rep.passed()) + " passed, " + std::to_string(rep.failed()) + " failed, " +
           fmt(total.seconds(), 4) + " s");
  rep.line("acceptance report complete");
  return 0;
}
