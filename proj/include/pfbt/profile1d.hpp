#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Sparse>

#include "pfbt/assembly.hpp"
#include "pfbt/cost.hpp"
#include "pfbt/linear_solve.hpp"

namespace pfbt {

struct Profile1dOptions {
  double half_length_factor = 12.0;  // domain [-L, L] with L = factor * eps
  int cells_per_eps = 200;
  int max_iterations = 5000;
  double tolerance = 1e-12;          // stop when max |phi_new - phi_old| is below
};

/// Numerical cross-section of a straight branch: P0 flux and P1 phase field
/// on a uniform grid of [-L, L], nodes d_k.
struct Profile1d {
  std::vector<double> nodes;     // d_k
  std::vector<double> phi;       // at nodes
  std::vector<double> sigma;     // per cell
  double mass = 0.0;             // sum_c h sigma_c
  double energy = 0.0;
  int iterations = 0;
  AnalyticProfile analytic;

  double cell_width() const { return nodes[1] - nodes[0]; }
  /// sigma at node k as the mean of the adjacent cells.
  double sigma_at_node(std::size_t k) const {
    if (k == 0) return sigma.front();
    if (k >= sigma.size()) return sigma.back();
    return 0.5 * (sigma[k - 1] + sigma[k]);
  }
};

/// Alternating minimization of the cross-section energy
///   int gamma/eps sigma^2 / 2 + beta/2 (eps phi'^2 + (phi - 1)^2 / eps)
/// with gamma = phi^2 + alpha^2 eps^2 / beta, subject to int sigma = m and
/// phi(+-L) = 1. The flux step is explicit (sigma proportional to 1/gamma),
/// the phase step a tridiagonal solve; midpoint quadrature as in 2D. Starts
/// from the analytic profile.
inline Profile1d solve_profile1d(double m, double alpha, double beta, double eps,
                                 const Profile1dOptions& opt = {}) {
  Profile1d out;
  out.analytic = analytic_profile(m, alpha, beta, eps);
  const double L = opt.half_length_factor * eps;
  const int nc = 2 * static_cast<int>(std::lround(opt.half_length_factor * opt.cells_per_eps));
  if (nc < 4) throw std::invalid_argument("profile1d: grid too coarse");
  const double h = 2.0 * L / nc;
  const int nn = nc + 1;
  out.nodes.resize(static_cast<std::size_t>(nn));
  for (int k = 0; k < nn; ++k) out.nodes[static_cast<std::size_t>(k)] = -L + k * h;
  Eigen::VectorXd phi(nn);
  for (int k = 0; k < nn; ++k) phi[k] = out.analytic.phi(out.nodes[static_cast<std::size_t>(k)]);
  phi[0] = phi[nn - 1] = 1.0;

  const double offset = alpha * alpha * eps * eps / beta;
  Eigen::VectorXd sigma(nc);
  auto flux_step = [&]() {
    double inv_sum = 0.0;
    for (int c = 0; c < nc; ++c) {
      const double pm = 0.5 * (phi[c] + phi[c + 1]);
      sigma[c] = 1.0 / (pm * pm + offset);
      inv_sum += h * sigma[c];
    }
    sigma *= m / inv_sum;
  };

  SpdSolver solver;
  auto phase_step = [&]() {
    std::vector<Triplet> trip;
    trip.reserve(static_cast<std::size_t>(4 * nc));
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nn);
    for (int c = 0; c < nc; ++c) {
      // Midpoint rule: each P1 basis function is 1/2 at the cell midpoint.
      const double mass = h * (sigma[c] * sigma[c] / eps + beta / eps) / 4.0;
      const double stiff = beta * eps / h;
      for (int a = 0; a < 2; ++a) {
        rhs[c + a] += h * (beta / eps) / 2.0;
        for (int b = 0; b < 2; ++b)
          trip.emplace_back(c + a, c + b, mass + (a == b ? stiff : -stiff));
      }
    }
    SparseMatrix K(nn, nn);
    K.setFromTriplets(trip.begin(), trip.end());
    for (Eigen::Index col = 0; col < K.outerSize(); ++col) {
      for (SparseMatrix::InnerIterator it(K, col); it; ++it) {
        const bool br = it.row() == 0 || it.row() == nn - 1;
        const bool bc = col == 0 || col == nn - 1;
        if (bc && !br) rhs[it.row()] -= it.value();
        if (br || bc) it.valueRef() = it.row() == col ? 1.0 : 0.0;
      }
    }
    rhs[0] = rhs[nn - 1] = 1.0;
    return solver.solve(K, rhs, 1e-13);
  };

  flux_step();
  int it = 0;
  for (; it < opt.max_iterations; ++it) {
    const Eigen::VectorXd next = phase_step();
    const double change = (next - phi).cwiseAbs().maxCoeff();
    phi = next;
    flux_step();
    if (change < opt.tolerance) break;
  }
  out.iterations = it;
  out.phi.assign(phi.data(), phi.data() + nn);
  out.sigma.assign(sigma.data(), sigma.data() + nc);
  out.mass = h * sigma.sum();
  double e = 0.0;
  for (int c = 0; c < nc; ++c) {
    const double pm = 0.5 * (phi[c] + phi[c + 1]);
    const double dp = (phi[c + 1] - phi[c]) / h;
    e += h * ((pm * pm + offset) / eps * sigma[c] * sigma[c] / 2.0 +
              beta / 2.0 * (eps * dp * dp + (pm - 1.0) * (pm - 1.0) / eps));
  }
  out.energy = e;
  return out;
}

}  // namespace pfbt
