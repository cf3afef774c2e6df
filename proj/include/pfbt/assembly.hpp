#pragma once

#include <stdexcept>
#include <vector>

#include <Eigen/Sparse>

#include "pfbt/mesh.hpp"

namespace pfbt {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

/// A_jk = sum_T w_T area_T grad b_j . grad b_k. Symmetric positive
/// semidefinite with the constants as nullspace.
inline SparseMatrix assemble_weighted_stiffness(const P0ScalarField& w, const TriMesh& mesh) {
  check_size(w, mesh, "assemble_weighted_stiffness");
  std::vector<Triplet> trip;
  trip.reserve(9 * mesh.num_triangles());
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const double wt = w[static_cast<Eigen::Index>(t)];
    if (!(wt > 0.0)) throw std::invalid_argument("assemble_weighted_stiffness: nonpositive weight");
    const auto& tri = mesh.triangles[t];
    const auto& g = mesh.basis_gradients[t];
    const double s = wt * mesh.areas[t];
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) trip.emplace_back(tri[a], tri[b], s * g[a].dot(g[b]));
  }
  const auto nn = static_cast<Eigen::Index>(mesh.num_nodes());
  SparseMatrix A(nn, nn);
  A.setFromTriplets(trip.begin(), trip.end());
  return A;
}

/// B_(t,c),j = int b_t^0 d_c b_j^1 = area_t * (grad b_j)_c on triangle t.
/// B * lambda gives area-weighted gradients, B^T * sigma the weak divergence
/// pairing int sigma . grad b_j.
inline SparseMatrix assemble_B(const TriMesh& mesh) {
  std::vector<Triplet> trip;
  trip.reserve(6 * mesh.num_triangles());
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    const auto& g = mesh.basis_gradients[t];
    const auto row = static_cast<int>(2 * t);
    for (int a = 0; a < 3; ++a) {
      trip.emplace_back(row, tri[a], mesh.areas[t] * g[a].x());
      trip.emplace_back(row + 1, tri[a], mesh.areas[t] * g[a].y());
    }
  }
  SparseMatrix B(2 * static_cast<Eigen::Index>(mesh.num_triangles()),
                 static_cast<Eigen::Index>(mesh.num_nodes()));
  B.setFromTriplets(trip.begin(), trip.end());
  return B;
}

/// Weighted P0 mass matrix; diagonal since P0 basis functions have disjoint support.
inline SparseMatrix assemble_M(const P0ScalarField& xi_values, const TriMesh& mesh) {
  check_size(xi_values, mesh, "assemble_M");
  const auto nt = static_cast<Eigen::Index>(mesh.num_triangles());
  SparseMatrix M(2 * nt, 2 * nt);
  M.reserve(Eigen::VectorXi::Constant(2 * nt, 1));
  for (Eigen::Index t = 0; t < nt; ++t) {
    const double x = xi_values[t];
    if (!(x > 0.0)) throw std::invalid_argument("assemble_M: nonpositive weight");
    const double v = x * mesh.areas[static_cast<std::size_t>(t)];
    M.insert(2 * t, 2 * t) = v;
    M.insert(2 * t + 1, 2 * t + 1) = v;
  }
  M.makeCompressed();
  return M;
}

/// Inputs of one phase field subproblem. mask selects the triangles where the
/// phase field pays for the flux (all ones for a single phase).
struct PhiSystemInput {
  const P0VecField* sigma = nullptr;
  const std::vector<char>* mask = nullptr;  // nullptr means everywhere
  double eps_flux = 0.0;   // eps dividing |sigma|^2
  double eps_phase = 0.0;  // width parameter of this phase field
  double beta = 0.0;
};

struct LinearSystem {
  SparseMatrix matrix;
  Eigen::VectorXd rhs;
};

/// Applies phi = value on boundary nodes by replacing boundary rows and
/// columns with identity and moving the known column into the right-hand side.
/// The sparsity pattern is left untouched.
inline void apply_dirichlet(SparseMatrix& K, Eigen::VectorXd& rhs, const TriMesh& mesh,
                            double value) {
  for (Eigen::Index c = 0; c < K.outerSize(); ++c) {
    const bool bc = mesh.is_boundary[static_cast<std::size_t>(c)] != 0;
    for (SparseMatrix::InnerIterator it(K, c); it; ++it) {
      const auto r = it.row();
      const bool br = mesh.is_boundary[static_cast<std::size_t>(r)] != 0;
      if (bc && !br) rhs[r] -= it.value() * value;
      if (bc || br) it.valueRef() = (r == c) ? 1.0 : 0.0;
    }
  }
  for (int b : mesh.boundary_nodes) rhs[b] = value;
}

/// Optimality system of
///   sum_T area_T [ mask_T |sigma_T|^2 phi(mid_T)^2 / (2 eps_flux)
///                  + beta/2 (eps_phase |grad phi|^2 + (phi(mid_T) - 1)^2 / eps_phase) ]
/// with phi = 1 on the boundary. All integrals use the midpoint rule, so the
/// P1 x P1 products are area_T / 9.
inline LinearSystem assemble_phi_system(const PhiSystemInput& in, const TriMesh& mesh) {
  if (mesh.num_triangles() == 0) throw std::invalid_argument("assemble_phi_system: empty mesh");
  if (in.sigma == nullptr) throw std::invalid_argument("assemble_phi_system: sigma missing");
  check_size(*in.sigma, mesh, "assemble_phi_system");
  if (in.mask && in.mask->size() != mesh.num_triangles())
    throw std::invalid_argument("assemble_phi_system: mask size mismatch");
  if (!(in.eps_flux > 0.0 && in.eps_phase > 0.0 && in.beta > 0.0))
    throw std::invalid_argument("assemble_phi_system: eps and beta must be positive");

  const auto nn = static_cast<Eigen::Index>(mesh.num_nodes());
  std::vector<Triplet> trip;
  trip.reserve(9 * mesh.num_triangles());
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nn);
  const double reaction0 = in.beta / in.eps_phase;
  const double diffusion = in.beta * in.eps_phase;
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto ti = static_cast<Eigen::Index>(t);
    const bool active = in.mask == nullptr || (*in.mask)[t] != 0;
    const double s2 = active ? in.sigma->at(ti).squaredNorm() : 0.0;
    const double area = mesh.areas[t];
    const double mass = area * (s2 / in.eps_flux + reaction0) / 9.0;
    const auto& tri = mesh.triangles[t];
    const auto& g = mesh.basis_gradients[t];
    for (int a = 0; a < 3; ++a) {
      rhs[tri[a]] += area * reaction0 / 3.0;
      for (int b = 0; b < 3; ++b)
        trip.emplace_back(tri[a], tri[b], mass + diffusion * area * g[a].dot(g[b]));
    }
  }
  SparseMatrix K(nn, nn);
  K.setFromTriplets(trip.begin(), trip.end());
  apply_dirichlet(K, rhs, mesh, 1.0);
  return {std::move(K), std::move(rhs)};
}

/// Weak divergence residual B^T sigma + F, computed triangle by triangle.
inline Eigen::VectorXd divergence_residual(const P0VecField& sigma, const Eigen::VectorXd& F,
                                           const TriMesh& mesh) {
  check_size(sigma, mesh, "divergence_residual");
  Eigen::VectorXd r = F;
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const Vec2 s = sigma.at(static_cast<Eigen::Index>(t));
    const auto& tri = mesh.triangles[t];
    const auto& g = mesh.basis_gradients[t];
    for (int a = 0; a < 3; ++a) r[tri[a]] += mesh.areas[t] * s.dot(g[a]);
  }
  return r;
}

}  // namespace pfbt
