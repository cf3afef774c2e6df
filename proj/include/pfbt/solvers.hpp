#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Dense>

#include "pfbt/assembly.hpp"
#include "pfbt/cost.hpp"
#include "pfbt/energy.hpp"
#include "pfbt/errors.hpp"
#include "pfbt/linear_solve.hpp"
#include "pfbt/measures.hpp"
#include "pfbt/mesh.hpp"

namespace pfbt {

// ---------------------------------------------------------------------------
// Configuration and logs

struct RunConfig {
  int n = 128;
  double eps_start = 0.05;
  double eps_end = 0.01;
  int n_iter = 200;
  CostSpec cost;
  MeasureSpec mu_plus;
  MeasureSpec mu_minus;
  double init_radius_factor = 3.0;
  double newton_damping = 1.0;
  double solver_tolerance = 1e-10;
  std::uint64_t seed = 0;
  /// Rescaled phase field cost; defaults to on for N > 1 and off for N = 1.
  std::optional<bool> rescaled;
  /// Warm start with a least-squares affine fit of tau instead of segment 1.
  bool warm_start_fit = false;

  bool use_rescaled() const { return rescaled.value_or(cost.num_phases() > 1); }

  void validate() const {
    if (n < 1) throw ConfigError("n must be >= 1");
    if (!(eps_end > 0.0)) throw ConfigError("eps_end must be positive");
    if (!(eps_start >= eps_end)) throw ConfigError("eps_start must be >= eps_end");
    if (n_iter < 2) throw ConfigError("n_iter must be >= 2");
    if (1.0 / n > eps_end)
      throw ConfigError("mesh does not resolve eps_end: h = " + std::to_string(1.0 / n) +
                        " > eps_end = " + std::to_string(eps_end));
    if (!(init_radius_factor > 0.0)) throw ConfigError("init_radius_factor must be positive");
    if (!(newton_damping > 0.0 && newton_damping <= 1.0))
      throw ConfigError("newton_damping must lie in (0, 1]");
    if (!(solver_tolerance > 0.0)) throw ConfigError("solver_tolerance must be positive");
    try {
      cost.validate();
      mu_plus.validate(eps_end);
      mu_minus.validate(eps_end);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    if (!cost.diffuse_allowed() && (!mu_plus.is_atomic() || !mu_minus.is_atomic()))
      throw ConfigError("densities require a finite alpha0; with alpha0 = inf the source and "
                        "sink must be finite combinations of Dirac masses");
  }
};

struct IterationRow {
  int iteration = 0;
  double eps = 0.0;
  EnergyBreakdown energy;             // after the flux update
  double energy_after_phi = 0.0;      // total after the phase field update
  double newton_residual = std::numeric_limits<double>::quiet_NaN();
  bool newton_accepted = true;
  int region_changes = 0;
  int diffuse_triangles = 0;
};

using IterationLog = std::vector<IterationRow>;

/// Stage of a logged row: the single phase warm start of the multi phase
/// algorithms, or the main loop.
enum class Stage { kWarmStart, kMain };

/// Called after every outer iteration, before the row is appended to the log.
using IterationCallback = std::function<void(const IterationRow&, Stage)>;

struct RunResult {
  PhaseState state;
  IterationLog log;
  IterationLog warm_start_log;
  EnergyBreakdown final_energy;
  bool rescaled = false;
  std::string algorithm;
};

/// Discretized data shared by all algorithms: mesh, cost, smoothed source and
/// load vector.
struct Problem {
  TriMesh mesh;
  CostSpec cost;
  P0ScalarField f_eps;
  Eigen::VectorXd F;
  bool rescaled = false;
  double tol = 1e-10;

  static Problem from_config(const RunConfig& cfg) {
    cfg.validate();
    Problem p;
    p.mesh = build_mesh(cfg.n);
    p.cost = cfg.cost;
    p.f_eps = smooth_source(cfg.mu_plus, cfg.mu_minus, cfg.eps_end, p.mesh);
    p.F = assemble_F(p.f_eps, p.mesh);
    p.rescaled = cfg.use_rescaled();
    p.tol = cfg.solver_tolerance;
    return p;
  }
};

/// Linear continuation eps_j, j = 1..n_iter.
inline double eps_schedule(double eps_start, double eps_end, int n_iter, int j) {
  if (n_iter < 1 || j < 1 || j > n_iter)
    throw std::out_of_range("eps_schedule: j = " + std::to_string(j) + " outside 1.." +
                            std::to_string(n_iter));
  if (j == n_iter) return eps_end;
  return eps_start - (j - 1) * (eps_start - eps_end) / (n_iter - 1);
}

// ---------------------------------------------------------------------------
// Flux subproblem at fixed gamma

struct LambdaResult {
  P1Field lambda;
  P0VecField sigma;
  double divergence_residual = 0.0;
};

/// Minimizes int gamma/eps |sigma|^2 / 2 under the weak divergence constraint
/// through the dual problem int eps/gamma grad(lambda).grad(mu) = -int mu f;
/// then sigma = eps grad(lambda) / gamma. Keeps the symbolic factorization
/// across calls.
class LambdaSolver {
 public:
  LambdaResult solve(const P0ScalarField& gamma, const Eigen::VectorXd& F, double eps,
                     const TriMesh& mesh, double tol) {
    check_size(gamma, mesh, "solve_lambda");
    if (static_cast<std::size_t>(F.size()) != mesh.num_nodes())
      throw std::invalid_argument("solve_lambda: load vector size mismatch");
    P0ScalarField w(eps * gamma.values.cwiseInverse());
    const SparseMatrix A = assemble_weighted_stiffness(w, mesh);
    LambdaResult r;
    r.lambda = P1Field(solver_.solve(A, -F, tol));
    r.sigma = P0VecField::zero(mesh);
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
      const auto ti = static_cast<Eigen::Index>(t);
      r.sigma.set(ti, w[ti] * gradient_on(r.lambda, mesh, t));
    }
    r.divergence_residual = divergence_residual(r.sigma, F, mesh).norm();
    if (!std::isfinite(r.divergence_residual))
      throw NumericalError("solve_lambda: non-finite flux");
    return r;
  }

 private:
  SingularSpdSolver solver_;
};

inline LambdaResult solve_lambda(const P0ScalarField& gamma, const Eigen::VectorXd& F, double eps,
                                 const TriMesh& mesh, double tol = 1e-10) {
  LambdaSolver s;
  return s.solve(gamma, F, eps, mesh, tol);
}

// ---------------------------------------------------------------------------
// Phase field subproblems at fixed flux

class PhiSolver {
 public:
  P1Field solve(const PhiSystemInput& in, const TriMesh& mesh, double tol) {
    LinearSystem sys = assemble_phi_system(in, mesh);
    return P1Field(solver_.solve(sys.matrix, sys.rhs, tol));
  }

 private:
  SpdSolver solver_;
};

/// Phase field of segment i (1-based) minimizing its masked energy at fixed
/// sigma; mask == nullptr couples it to the flux everywhere.
inline P1Field solve_phi(PhiSolver& solver, std::size_t i, const P0VecField& sigma,
                         const std::vector<char>* mask, double eps, const CostSpec& cost,
                         bool rescaled, const TriMesh& mesh, double tol) {
  PhiSystemInput in;
  in.sigma = &sigma;
  in.mask = mask;
  in.eps_flux = eps;
  in.eps_phase = phase_eps(i, eps, cost, rescaled);
  in.beta = cost.segment(i).beta;
  return solver.solve(in, mesh, tol);
}

/// Single phase field update (N = 1).
inline P1Field solve_phi_single(const P0VecField& sigma, double eps, const CostSpec& cost,
                                const TriMesh& mesh, bool rescaled = false, double tol = 1e-10) {
  if (cost.num_phases() != 1) throw std::invalid_argument("solve_phi_single: needs N = 1");
  PhiSolver s;
  return solve_phi(s, 1, sigma, nullptr, eps, cost, rescaled, mesh, tol);
}

// ---------------------------------------------------------------------------
// Active regions

/// m(x) = (chi_{B_r} * |sigma|)(x) / (2r) evaluated at triangle centroids with
/// midpoint quadrature; approximates the mass carried by a nearby branch once
/// r exceeds the branch width.
inline P0ScalarField estimate_branch_mass(const P0VecField& sigma, double r, const TriMesh& mesh) {
  check_size(sigma, mesh, "estimate_branch_mass");
  if (!(r >= mesh.h))
    throw std::invalid_argument("init_regions: radius " + std::to_string(r) +
                                " is smaller than one cell");
  P0ScalarField m = P0ScalarField::constant(mesh, 0.0);
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    double s = 0.0;
    detail::for_triangles_near(mesh, mesh.centroids[t], r, [&](std::size_t u) {
      s += mesh.areas[u] * sigma.norm_at(static_cast<Eigen::Index>(u));
    });
    m[static_cast<Eigen::Index>(t)] = s / (2.0 * r);
  }
  return m;
}

/// Initial labels from the mass estimate: label = argmin_i alpha_i m + beta_i
/// (index 0 only competes when alpha0 is finite).
inline std::vector<int> init_regions(const P0VecField& sigma0, double r, const CostSpec& cost,
                                     const TriMesh& mesh) {
  const P0ScalarField m = estimate_branch_mass(sigma0, r, mesh);
  std::vector<int> labels(mesh.num_triangles());
  for (std::size_t t = 0; t < labels.size(); ++t)
    labels[t] = active_index(m[static_cast<Eigen::Index>(t)], cost);
  return labels;
}

/// Labels from the current phase fields: argmin of phi_i^2 + offset_i (ties to
/// the smallest i), then label 0 where |sigma| > alpha0 / (gamma / eps).
inline std::vector<int> update_regions(const std::vector<P1Field>& phis, const P0VecField& sigma,
                                       double eps, const CostSpec& cost, bool rescaled,
                                       const TriMesh& mesh, P0ScalarField* gamma_out = nullptr) {
  std::vector<int> labels;
  P0ScalarField g = gamma_field(phis, eps, cost, rescaled, mesh, &labels);
  if (cost.diffuse_allowed()) {
    check_size(sigma, mesh, "update_regions");
    for (std::size_t t = 0; t < labels.size(); ++t) {
      const auto ti = static_cast<Eigen::Index>(t);
      if (sigma.norm_at(ti) > cost.alpha0 * eps / g[ti]) labels[t] = 0;
    }
  }
  if (gamma_out) *gamma_out = std::move(g);
  return labels;
}

inline std::vector<char> region_mask(const std::vector<int>& labels, int i) {
  std::vector<char> m(labels.size());
  for (std::size_t t = 0; t < labels.size(); ++t) m[t] = labels[t] == i ? 1 : 0;
  return m;
}

inline int count_changes(const std::vector<int>& a, const std::vector<int>& b) {
  int c = 0;
  for (std::size_t t = 0; t < a.size(); ++t) c += a[t] != b[t];
  return c;
}

inline int count_label(const std::vector<int>& labels, int label) {
  int c = 0;
  for (int l : labels) c += l == label;
  return c;
}

// ---------------------------------------------------------------------------
// Semismooth Newton step for the flux with diffuse transport

/// Residual of the optimality system
///   R1_T = area_T (xi(|sigma_T|) sigma_T - grad lambda_T)   (= M[xi] sigma - B lambda)
///   R2   = B^T sigma + F.
/// lambda is the multiplier with sigma = grad(lambda) / xi on the quadratic branch.
struct NewtonSystem {
  const TriMesh* mesh = nullptr;
  const CostSpec* cost = nullptr;
  const P0ScalarField* gamma = nullptr;
  const Eigen::VectorXd* F = nullptr;
  double eps = 0.0;

  Eigen::VectorXd residual_flux(const P0VecField& sigma, const P1Field& lambda) const {
    Eigen::VectorXd r(sigma.data.size());
    for (std::size_t t = 0; t < mesh->num_triangles(); ++t) {
      const auto ti = static_cast<Eigen::Index>(t);
      const Vec2 s = sigma.at(ti);
      const double x = xi(*cost, s.norm(), (*gamma)[ti] / eps, eps);
      const Vec2 v = mesh->areas[t] * (x * s - gradient_on(lambda, *mesh, t));
      r[2 * ti] = v.x();
      r[2 * ti + 1] = v.y();
    }
    return r;
  }

  /// Flux part of the energy at fixed gamma, sum_T area_T omega(|sigma_T|).
  double flux_energy(const P0VecField& sigma) const {
    double e = 0.0;
    for (std::size_t t = 0; t < mesh->num_triangles(); ++t) {
      const auto ti = static_cast<Eigen::Index>(t);
      e += mesh->areas[t] * omega_eps(*cost, (*gamma)[ti] / eps, sigma.norm_at(ti), eps);
    }
    return e;
  }

  double residual_norm(const P0VecField& sigma, const P1Field& lambda) const {
    const double a = residual_flux(sigma, lambda).squaredNorm();
    const double b = divergence_residual(sigma, *F, *mesh).squaredNorm();
    return std::sqrt(a + b);
  }

  /// Per-triangle Jacobian block of sigma -> xi(|sigma|) sigma (without area).
  Eigen::Matrix2d flux_jacobian(const Vec2& s, double g) const {
    const double n = s.norm();
    Eigen::Matrix2d J = xi(*cost, n, g, eps) * Eigen::Matrix2d::Identity();
    const double dx = n > 0.0 ? xi_derivative(*cost, n, g) : 0.0;
    if (dx != 0.0) J += (dx / n) * (s * s.transpose());
    return J;
  }
};

struct NewtonResult {
  P0VecField sigma;
  P1Field lambda;
  double residual_before = 0.0;
  double residual_after = 0.0;
  double step_length = 0.0;
  bool accepted = false;
};

class NewtonSolver {
 public:
  /// One damped Newton step on R(sigma, lambda) = 0. The saddle point system
  /// is reduced to the Schur complement S = B^T H^-1 B (H block diagonal),
  /// a weighted Laplacian with constant nullspace. Backtracking halves the
  /// step, at most 20 times, until ||R|| does not increase. From a feasible
  /// start every step stays feasible, and then the flux energy must not
  /// increase either: on the diffuse branch xi sigma saturates at alpha0 and
  /// ||R|| cannot see divergence free loops growing.
  NewtonResult step(const P0VecField& sigma, const P1Field& lambda, const P0ScalarField& gamma,
                    const Eigen::VectorXd& F, double eps, const CostSpec& cost,
                    const TriMesh& mesh, double damping, double tol) {
    check_size(sigma, mesh, "newton_step");
    check_size(lambda, mesh, "newton_step");
    check_size(gamma, mesh, "newton_step");
    NewtonSystem sys{&mesh, &cost, &gamma, &F, eps};
    const Eigen::VectorXd r1 = sys.residual_flux(sigma, lambda);
    const Eigen::VectorXd r2 = divergence_residual(sigma, F, mesh);
    NewtonResult out;
    out.sigma = sigma;
    out.lambda = lambda;
    out.residual_before = std::sqrt(r1.squaredNorm() + r2.squaredNorm());
    out.residual_after = out.residual_before;
    if (out.residual_before == 0.0) {
      out.accepted = true;
      return out;
    }

    const std::size_t nt = mesh.num_triangles();
    std::vector<Eigen::Matrix2d> hinv(nt);
    std::vector<Triplet> trip;
    trip.reserve(9 * nt);
    Eigen::VectorXd rhs = -r2;
    for (std::size_t t = 0; t < nt; ++t) {
      const auto ti = static_cast<Eigen::Index>(t);
      const double area = mesh.areas[t];
      hinv[t] = (area * sys.flux_jacobian(sigma.at(ti), gamma[ti] / eps)).inverse();
      const auto& tri = mesh.triangles[t];
      const auto& g = mesh.basis_gradients[t];
      const Vec2 hr = hinv[t] * Vec2(r1[2 * ti], r1[2 * ti + 1]);
      for (int a = 0; a < 3; ++a) {
        const Vec2 ba = area * g[a];
        rhs[tri[a]] += ba.dot(hr);
        const Vec2 hb = hinv[t] * ba;
        for (int b = 0; b < 3; ++b) trip.emplace_back(tri[a], tri[b], (area * g[b]).dot(hb));
      }
    }
    const auto nn = static_cast<Eigen::Index>(mesh.num_nodes());
    SparseMatrix S(nn, nn);
    S.setFromTriplets(trip.begin(), trip.end());
    // Symmetrize exactly; the two triangle products above differ by rounding.
    SparseMatrix St = S.transpose();
    S = 0.5 * (S + St);
    const Eigen::VectorXd dl = schur_.solve(S, rhs, tol);

    Eigen::VectorXd ds(sigma.data.size());
    for (std::size_t t = 0; t < nt; ++t) {
      const auto ti = static_cast<Eigen::Index>(t);
      const auto& tri = mesh.triangles[t];
      const auto& g = mesh.basis_gradients[t];
      const Vec2 grad_dl = dl[tri[0]] * g[0] + dl[tri[1]] * g[1] + dl[tri[2]] * g[2];
      const Vec2 v = hinv[t] * (mesh.areas[t] * grad_dl - Vec2(r1[2 * ti], r1[2 * ti + 1]));
      ds[2 * ti] = v.x();
      ds[2 * ti + 1] = v.y();
    }

    const bool feasible = r2.norm() <= kFeasibleTol * F.norm();
    const double e0 = feasible ? sys.flux_energy(sigma) : 0.0;
    const double e_slack = 1e-12 * std::abs(e0);
    double step = damping;
    for (int halving = 0; halving <= kMaxHalvings; ++halving, step *= 0.5) {
      P0VecField s_new(sigma.data + step * ds);
      P1Field l_new(lambda.values + step * dl);
      const double rn = sys.residual_norm(s_new, l_new);
      if (rn <= out.residual_before && (!feasible || sys.flux_energy(s_new) <= e0 + e_slack)) {
        out.sigma = std::move(s_new);
        out.lambda = std::move(l_new);
        out.residual_after = rn;
        out.step_length = step;
        out.accepted = true;
        return out;
      }
    }
    return out;
  }

  static constexpr int kMaxHalvings = 20;
  static constexpr double kFeasibleTol = 1e-8;

 private:
  SingularSpdSolver schur_;
};

inline NewtonResult newton_step(const P0VecField& sigma, const P1Field& lambda,
                                const P0ScalarField& gamma, const Eigen::VectorXd& F, double eps,
                                const CostSpec& cost, const TriMesh& mesh, double damping = 1.0,
                                double tol = 1e-10) {
  NewtonSolver s;
  return s.step(sigma, lambda, gamma, F, eps, cost, mesh, damping, tol);
}

// ---------------------------------------------------------------------------
// Outer algorithms

namespace detail {

inline RunConfig single_segment_config(const RunConfig& cfg) {
  RunConfig c = cfg;
  Segment seg = cfg.cost.segments.front();
  if (cfg.warm_start_fit && cfg.cost.num_phases() > 1) {
    // Least-squares line through tau over the masses a branch can carry.
    constexpr int kSamples = 200;
    double sm = 0, st = 0, smm = 0, smt = 0;
    for (int k = 1; k <= kSamples; ++k) {
      const double m = static_cast<double>(k) / kSamples;
      const double t = tau(m, cfg.cost);
      sm += m;
      st += t;
      smm += m * m;
      smt += m * t;
    }
    const double alpha = (kSamples * smt - sm * st) / (kSamples * smm - sm * sm);
    const double beta = (st - alpha * sm) / kSamples;
    if (alpha > 0.0 && beta > 0.0) seg = {alpha, beta};
  }
  c.cost = CostSpec::infinite({seg}, cfg.cost.p);
  c.rescaled = cfg.use_rescaled();
  return c;
}

inline double init_radius(const RunConfig& cfg, const Segment& seg, const TriMesh& mesh) {
  const CostSpec one = CostSpec::infinite({seg}, cfg.cost.p);
  const double eps1 = phase_eps(1, cfg.eps_end, one, cfg.use_rescaled());
  // Widest band: a branch carrying the whole unit mass; the discrete band is
  // never narrower than two cells.
  const double width = 2.0 * analytic_profile(1.0, seg.alpha, seg.beta, eps1).half_width;
  return cfg.init_radius_factor * std::max(width, 2.0 * mesh.h);
}

}  // namespace detail

/// Alternating minimization for a single phase field without diffuse flux.
/// `initial` optionally warm starts sigma (and the phase field).
inline RunResult spfs(const Problem& prob, const RunConfig& cfg,
                      const PhaseState* initial = nullptr, const IterationCallback& on_iteration = {},
                      Stage stage = Stage::kMain) {
  const CostSpec& cost = prob.cost;
  if (cost.num_phases() != 1 || cost.diffuse_allowed())
    throw std::invalid_argument("spfs: requires N = 1 and alpha0 = inf");
  const TriMesh& mesh = prob.mesh;
  RunResult res;
  res.algorithm = "spfs";
  res.rescaled = prob.rescaled;
  res.state = initial ? *initial : PhaseState::initial(mesh, 1, cfg.eps_start);
  res.state.regions.assign(mesh.num_triangles(), 1);
  PhiSolver phi_solver;
  LambdaSolver lambda_solver;
  for (int j = 1; j <= cfg.n_iter; ++j) {
    IterationRow row;
    row.iteration = j;
    row.eps = eps_schedule(cfg.eps_start, cfg.eps_end, cfg.n_iter, j);
    PhaseState& st = res.state;
    st.eps = row.eps;
    st.phis[0] = solve_phi(phi_solver, 1, st.sigma, nullptr, row.eps, cost, prob.rescaled, mesh,
                           prob.tol);
    row.energy_after_phi = eval_energy(st, mesh, cost, prob.F, prob.rescaled).total;
    const P0ScalarField g = gamma_field(st.phis, row.eps, cost, prob.rescaled, mesh);
    LambdaResult lr = lambda_solver.solve(g, prob.F, row.eps, mesh, prob.tol);
    st.lambda = std::move(lr.lambda);
    st.sigma = std::move(lr.sigma);
    row.energy = eval_energy(st, mesh, cost, prob.F, prob.rescaled);
    if (on_iteration) on_iteration(row, stage);
    res.log.push_back(std::move(row));
  }
  res.final_energy = res.log.back().energy;
  return res;
}

/// Shared loop of the multi phase algorithms. With a finite alpha0 the flux
/// update is one Newton step, otherwise an exact quadratic solve.
inline RunResult multiphase_loop(const Problem& prob, const RunConfig& cfg, RunResult warm,
                                 const char* name, const IterationCallback& on_iteration) {
  const CostSpec& cost = prob.cost;
  const TriMesh& mesh = prob.mesh;
  const std::size_t nph = cost.num_phases();
  const bool diffuse = cost.diffuse_allowed();

  RunResult res;
  res.algorithm = name;
  res.rescaled = prob.rescaled;
  res.warm_start_log = std::move(warm.log);
  PhaseState& st = res.state;
  st = PhaseState::initial(mesh, nph, cfg.eps_start);
  st.sigma = std::move(warm.state.sigma);
  st.lambda = std::move(warm.state.lambda);
  const double r = detail::init_radius(cfg, detail::single_segment_config(cfg).cost.segments[0],
                                       mesh);
  st.regions = init_regions(st.sigma, r, cost, mesh);

  PhiSolver phi_solver;
  LambdaSolver lambda_solver;
  NewtonSolver newton;
  for (int j = 1; j <= cfg.n_iter; ++j) {
    IterationRow row;
    row.iteration = j;
    row.eps = eps_schedule(cfg.eps_start, cfg.eps_end, cfg.n_iter, j);
    st.eps = row.eps;
    for (std::size_t i = 1; i <= nph; ++i) {
      const std::vector<char> mask = region_mask(st.regions, static_cast<int>(i));
      st.phis[i - 1] = solve_phi(phi_solver, i, st.sigma, &mask, row.eps, cost, prob.rescaled,
                                 mesh, prob.tol);
    }
    row.energy_after_phi = eval_energy(st, mesh, cost, prob.F, prob.rescaled).total;
    P0ScalarField g;
    std::vector<int> labels =
        update_regions(st.phis, st.sigma, row.eps, cost, prob.rescaled, mesh, &g);
    row.region_changes = count_changes(labels, st.regions);
    st.regions = std::move(labels);
    row.diffuse_triangles = count_label(st.regions, 0);
    if (diffuse) {
      NewtonResult nr = newton.step(st.sigma, st.lambda, g, prob.F, row.eps, cost, mesh,
                                    cfg.newton_damping, prob.tol);
      row.newton_residual = nr.residual_after;
      row.newton_accepted = nr.accepted;
      st.sigma = std::move(nr.sigma);
      st.lambda = std::move(nr.lambda);
    } else {
      LambdaResult lr = lambda_solver.solve(g, prob.F, row.eps, mesh, prob.tol);
      st.lambda = std::move(lr.lambda);
      st.sigma = std::move(lr.sigma);
    }
    row.energy = eval_energy(st, mesh, cost, prob.F, prob.rescaled);
    if (on_iteration) on_iteration(row, Stage::kMain);
    res.log.push_back(std::move(row));
  }
  res.final_energy = res.log.back().energy;
  return res;
}

inline RunResult warm_start(const Problem& prob, const RunConfig& cfg,
                            const IterationCallback& on_iteration = {}) {
  const RunConfig single = detail::single_segment_config(cfg);
  Problem p1 = prob;
  p1.cost = single.cost;
  return spfs(p1, single, nullptr, on_iteration, Stage::kWarmStart);
}

/// Several phase fields, no diffuse flux.
inline RunResult mpfs(const Problem& prob, const RunConfig& cfg,
                      const IterationCallback& on_iteration = {}) {
  if (prob.cost.diffuse_allowed() || prob.cost.num_phases() < 2)
    throw std::invalid_argument("mpfs: requires N > 1 and alpha0 = inf");
  return multiphase_loop(prob, cfg, warm_start(prob, cfg, on_iteration), "mpfs", on_iteration);
}

/// Several (or one) phase fields with diffuse flux priced by alpha0.
inline RunResult mpfsd(const Problem& prob, const RunConfig& cfg,
                       const IterationCallback& on_iteration = {}) {
  if (!prob.cost.diffuse_allowed()) throw std::invalid_argument("mpfsd: requires finite alpha0");
  return multiphase_loop(prob, cfg, warm_start(prob, cfg, on_iteration), "mpfsd", on_iteration);
}

/// Picks the algorithm from the cost shape.
inline RunResult run_solver(const Problem& prob, const RunConfig& cfg,
                            const IterationCallback& on_iteration = {}) {
  if (prob.cost.diffuse_allowed()) return mpfsd(prob, cfg, on_iteration);
  if (prob.cost.num_phases() == 1) return spfs(prob, cfg, nullptr, on_iteration);
  return mpfs(prob, cfg, on_iteration);
}

}  // namespace pfbt
