#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pfbt/mesh.hpp"

namespace pfbt {

struct Atom {
  Vec2 x;
  double mass = 0.0;
};

/// Uniform densities supported for diffuse sources/sinks.
struct DensityPreset {
  enum class Kind { kUniformAnnulus, kUniformDiskComplement };

  Kind kind = Kind::kUniformAnnulus;
  Vec2 center{0.5, 0.5};
  double r_inner = 0.0;  // annulus inner radius / excluded disk radius
  double r_outer = 0.0;  // annulus only
  double margin = 0.0;   // disk complement only: support is [margin, 1 - margin]^2 minus the disk

  bool contains(const Vec2& p) const {
    const double r = (p - center).norm();
    if (kind == Kind::kUniformAnnulus) return r >= r_inner && r <= r_outer;
    return r >= r_inner && p.x() >= margin && p.x() <= 1.0 - margin && p.y() >= margin &&
           p.y() <= 1.0 - margin;
  }

  /// Smallest distance of the support to the boundary of the unit square.
  double boundary_clearance() const {
    if (kind == Kind::kUniformAnnulus) {
      return std::min({center.x() - r_outer, 1.0 - center.x() - r_outer, center.y() - r_outer,
                       1.0 - center.y() - r_outer});
    }
    return margin;
  }

  /// Exact area of the support (the excluded disk must lie inside the square).
  double support_area() const {
    const double pi = std::numbers::pi;
    if (kind == Kind::kUniformAnnulus) return pi * (r_outer * r_outer - r_inner * r_inner);
    const double side = 1.0 - 2.0 * margin;
    return side * side - pi * r_inner * r_inner;
  }

  static const char* name(Kind k) {
    return k == Kind::kUniformAnnulus ? "uniform_annulus" : "uniform_disk_complement";
  }
};

/// A probability measure given either by Dirac atoms or by a density preset.
struct MeasureSpec {
  std::vector<Atom> atoms;
  std::optional<DensityPreset> density;

  bool is_atomic() const { return !density.has_value(); }

  double total_mass() const {
    if (density) return 1.0;
    double s = 0.0;
    for (const auto& a : atoms) s += a.mass;
    return s;
  }

  /// Atoms with masses rescaled to sum to exactly 1. Rejects nonpositive
  /// masses and totals that are not 1 within tol.
  static MeasureSpec from_atoms(std::vector<Atom> atoms, double tol = 1e-9) {
    if (atoms.empty()) throw std::invalid_argument("measure: empty atom list");
    double total = 0.0;
    for (const auto& a : atoms) {
      if (!(a.mass > 0.0)) throw std::invalid_argument("measure: atom masses must be positive");
      total += a.mass;
    }
    if (std::abs(total - 1.0) > tol)
      throw std::invalid_argument("measure: atom masses must sum to 1 (got " +
                                  std::to_string(total) + ")");
    for (auto& a : atoms) a.mass /= total;
    MeasureSpec m;
    m.atoms = std::move(atoms);
    return m;
  }

  static MeasureSpec from_density(DensityPreset d) {
    MeasureSpec m;
    m.density = d;
    return m;
  }

  /// Compact support at distance >= clearance from the boundary.
  void validate(double clearance) const {
    if (density) {
      if (density->kind == DensityPreset::Kind::kUniformAnnulus &&
          !(density->r_outer > density->r_inner && density->r_inner >= 0.0))
        throw std::invalid_argument("measure: annulus needs 0 <= r_inner < r_outer");
      if (density->boundary_clearance() < clearance)
        throw std::invalid_argument("measure: density support closer than eps_end to the boundary");
      return;
    }
    if (atoms.empty()) throw std::invalid_argument("measure: empty spec");
    for (const auto& a : atoms) {
      const double d = std::min({a.x.x(), 1.0 - a.x.x(), a.x.y(), 1.0 - a.x.y()});
      if (d < clearance)
        throw std::invalid_argument("measure: atom at (" + std::to_string(a.x.x()) + ", " +
                                    std::to_string(a.x.y()) +
                                    ") is closer than eps_end to the boundary");
    }
  }
};

/// Standard radial bump exp(-1 / (1 - |y|^2)) on the unit disk.
inline double unit_bump(double r2) {
  if (r2 >= 1.0) return 0.0;
  return std::exp(-1.0 / (1.0 - r2));
}

/// Normalization C with C * integral of unit_bump over the disk = 1. The radial
/// integral 2 pi int_0^1 r exp(-1/(1-r^2)) dr is evaluated by composite Simpson;
/// the integrand is flat to all orders at r = 1 so the rule converges fast.
inline double bump_normalization() {
  static const double c = [] {
    constexpr int n = 1 << 14;
    const double h = 1.0 / n;
    double s = 0.0;
    for (int k = 0; k <= n; ++k) {
      const double r = k * h;
      const double f = r * unit_bump(r * r);
      const double w = (k == 0 || k == n) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
      s += w * f;
    }
    const double integral = 2.0 * std::numbers::pi * s * h / 3.0;
    return 1.0 / integral;
  }();
  return c;
}

/// rho_eps(x) = eps^-2 rho(x / eps), supported in the ball of radius eps.
struct Mollifier {
  double epsilon = 0.0;
  double normalization = bump_normalization();

  explicit Mollifier(double eps) : epsilon(eps) {
    if (!(eps > 0.0)) throw std::invalid_argument("mollifier: eps must be positive");
  }

  double operator()(const Vec2& x) const {
    const double r2 = x.squaredNorm() / (epsilon * epsilon);
    return normalization * unit_bump(r2) / (epsilon * epsilon);
  }
};

inline double mollifier_eval(const Mollifier& moll, const Vec2& x) { return moll(x); }

namespace detail {

/// Calls fn(t) for every triangle whose centroid lies within radius of p.
template <class Fn>
void for_triangles_near(const TriMesh& mesh, const Vec2& p, double radius, Fn&& fn) {
  const int n = mesh.n;
  const int i0 = std::max(0, static_cast<int>(std::floor((p.x() - radius) * n)));
  const int i1 = std::min(n - 1, static_cast<int>(std::floor((p.x() + radius) * n)));
  const int j0 = std::max(0, static_cast<int>(std::floor((p.y() - radius) * n)));
  const int j1 = std::min(n - 1, static_cast<int>(std::floor((p.y() + radius) * n)));
  const double r2 = radius * radius;
  for (int j = j0; j <= j1; ++j) {
    for (int i = i0; i <= i1; ++i) {
      const std::size_t base = 2 * (static_cast<std::size_t>(j) * n + static_cast<std::size_t>(i));
      for (std::size_t t = base; t < base + 2; ++t)
        if ((mesh.centroids[t] - p).squaredNorm() < r2) fn(t);
    }
  }
}

/// Adds the midpoint samples of one measure to f with the given sign.
/// With rebalance, each atom (or the whole density) is scaled so its discrete
/// mass sum_T area_T f_T equals its exact mass.
inline void add_measure(const MeasureSpec& mu, double sign, double eps, const TriMesh& mesh,
                        bool rebalance, Eigen::VectorXd& f) {
  if (mu.density) {
    const auto& d = *mu.density;
    Eigen::VectorXd g = Eigen::VectorXd::Zero(f.size());
    double mass = 0.0;
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
      if (d.contains(mesh.centroids[t])) {
        g[static_cast<Eigen::Index>(t)] = 1.0;
        mass += mesh.areas[t];
      }
    }
    if (!(mass > 0.0)) throw std::invalid_argument("measure: density support misses every triangle");
    // Uniform density 1 / |support|. Rebalancing swaps the exact support area
    // for the discrete one.
    const double scale = rebalance ? 1.0 / mass : 1.0 / d.support_area();
    f += sign * scale * g;
    return;
  }
  const Mollifier rho(eps);
  for (const auto& a : mu.atoms) {
    std::vector<std::pair<std::size_t, double>> samples;
    double mass = 0.0;
    for_triangles_near(mesh, a.x, eps, [&](std::size_t t) {
      const double v = a.mass * rho(mesh.centroids[t] - a.x);
      if (v > 0.0) {
        samples.emplace_back(t, v);
        mass += mesh.areas[t] * v;
      }
    });
    if (!(mass > 0.0))
      throw std::invalid_argument("measure: mollified atom captured by no triangle midpoint; "
                                  "refine the mesh or increase eps");
    const double scale = rebalance ? a.mass / mass : 1.0;
    for (const auto& [t, v] : samples) f[static_cast<Eigen::Index>(t)] += sign * scale * v;
  }
}

}  // namespace detail

/// f_eps = rho_eps * (mu_plus - mu_minus) sampled at triangle midpoints.
/// With rebalance (the default) the discrete integral of each signed part is
/// exactly its mass, so sum_T area_T f_T vanishes to rounding.
inline P0ScalarField smooth_source(const MeasureSpec& mu_plus, const MeasureSpec& mu_minus,
                                   double eps, const TriMesh& mesh, bool rebalance = true) {
  if (!(eps > 0.0)) throw std::invalid_argument("smooth_source: eps must be positive");
  mu_plus.validate(eps);
  mu_minus.validate(eps);
  Eigen::VectorXd f = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mesh.num_triangles()));
  detail::add_measure(mu_plus, +1.0, eps, mesh, rebalance, f);
  detail::add_measure(mu_minus, -1.0, eps, mesh, rebalance, f);
  return P0ScalarField(std::move(f));
}

/// Discrete integral sum_T area_T f_T.
inline double discrete_integral(const P0ScalarField& f, const TriMesh& mesh) {
  check_size(f, mesh, "discrete_integral");
  double s = 0.0;
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t)
    s += mesh.areas[t] * f[static_cast<Eigen::Index>(t)];
  return s;
}

/// Load vector F_i = int b_i f with midpoint quadrature (b_i = 1/3 at the
/// centroid of every triangle containing node i).
inline Eigen::VectorXd assemble_F(const P0ScalarField& f, const TriMesh& mesh) {
  check_size(f, mesh, "assemble_F");
  Eigen::VectorXd F = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mesh.num_nodes()));
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const double q = mesh.areas[t] * f[static_cast<Eigen::Index>(t)] / 3.0;
    for (int v : mesh.triangles[t]) F[v] += q;
  }
  return F;
}

}  // namespace pfbt
