#pragma once

#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "pfbt/assembly.hpp"
#include "pfbt/cost.hpp"
#include "pfbt/mesh.hpp"

namespace pfbt {

/// Solver state: P0 flux, one P1 phase field per cost segment, the per-triangle
/// active region label (0 = diffuse, i = segment i), the multiplier of the
/// divergence constraint and the current phase field parameter.
struct PhaseState {
  P0VecField sigma;
  std::vector<P1Field> phis;
  std::vector<int> regions;
  P1Field lambda;
  double eps = 0.0;

  static PhaseState initial(const TriMesh& mesh, std::size_t num_phases, double eps) {
    PhaseState s;
    s.sigma = P0VecField::zero(mesh);
    s.phis.assign(num_phases, P1Field::constant(mesh, 1.0));
    s.regions.assign(mesh.num_triangles(), 1);
    s.lambda = P1Field::constant(mesh, 0.0);
    s.eps = eps;
    return s;
  }
};

struct EnergyBreakdown {
  double flux_term = 0.0;
  std::vector<double> phase_terms;  // beta_i * L_{eps_i}[phi_i]
  double total = 0.0;
  double divergence_residual = 0.0;  // || B^T sigma + F ||_2
};

/// gamma_eps at every triangle midpoint, optionally with the minimizing phase.
inline P0ScalarField gamma_field(const std::vector<P1Field>& phis, double eps,
                                 const CostSpec& cost, bool rescaled, const TriMesh& mesh,
                                 std::vector<int>* argmin = nullptr) {
  if (phis.size() != cost.num_phases())
    throw std::invalid_argument("gamma_field: expected one phase field per segment");
  for (const auto& p : phis) check_size(p, mesh, "gamma_field");
  std::vector<double> offsets(phis.size());
  for (std::size_t i = 0; i < phis.size(); ++i)
    offsets[i] = phase_offset(i + 1, eps, cost, rescaled);
  P0ScalarField g = P0ScalarField::constant(mesh, 0.0);
  if (argmin) argmin->assign(mesh.num_triangles(), 1);
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    double best = std::numeric_limits<double>::infinity();
    int best_i = 1;
    for (std::size_t i = 0; i < phis.size(); ++i) {
      const double v = midpoint_value(phis[i], mesh, t);
      const double c = v * v + offsets[i];
      if (c < best) {
        best = c;
        best_i = static_cast<int>(i + 1);
      }
    }
    g[static_cast<Eigen::Index>(t)] = best;
    if (argmin) (*argmin)[t] = best_i;
  }
  return g;
}

/// Ambrosio-Tortorelli length term L_eps[phi] = 1/2 int eps |grad phi|^2 + (phi - 1)^2 / eps
/// with midpoint quadrature.
inline double at_length(const P1Field& phi, double eps, const TriMesh& mesh) {
  check_size(phi, mesh, "at_length");
  double s = 0.0;
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const double v = midpoint_value(phi, mesh, t) - 1.0;
    s += mesh.areas[t] * (eps * gradient_on(phi, mesh, t).squaredNorm() + v * v / eps);
  }
  return 0.5 * s;
}

/// Discrete phase field energy of a state. Sums run over triangles in index
/// order, so repeated evaluations are bitwise reproducible.
inline EnergyBreakdown eval_energy(const PhaseState& state, const TriMesh& mesh,
                                   const CostSpec& cost, const Eigen::VectorXd& F,
                                   bool rescaled) {
  check_size(state.sigma, mesh, "eval_energy");
  if (static_cast<std::size_t>(F.size()) != mesh.num_nodes())
    throw std::invalid_argument("eval_energy: load vector size mismatch");
  const double eps = state.eps;
  const P0ScalarField g = gamma_field(state.phis, eps, cost, rescaled, mesh);
  EnergyBreakdown e;
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto ti = static_cast<Eigen::Index>(t);
    e.flux_term += mesh.areas[t] * omega_eps(cost, g[ti] / eps, state.sigma.norm_at(ti), eps);
  }
  e.total = e.flux_term;
  for (std::size_t i = 0; i < state.phis.size(); ++i) {
    const double eps_i = phase_eps(i + 1, eps, cost, rescaled);
    const double v = cost.segment(i + 1).beta * at_length(state.phis[i], eps_i, mesh);
    e.phase_terms.push_back(v);
    e.total += v;
  }
  e.divergence_residual = divergence_residual(state.sigma, F, mesh).norm();
  return e;
}

}  // namespace pfbt
