#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "pfbt/measures.hpp"
#include "pfbt/mesh.hpp"

namespace pfbt {

/// |sigma|-weighted mean of |sigma|, int |sigma|^2 / int |sigma|. On a network
/// of uniform bands this is the band plateau.
inline double flux_plateau(const P0VecField& sigma, const TriMesh& mesh) {
  check_size(sigma, mesh, "flux_plateau");
  double s1 = 0.0, s2 = 0.0;
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const double s = sigma.norm_at(static_cast<Eigen::Index>(t));
    s1 += mesh.areas[t] * s;
    s2 += mesh.areas[t] * s * s;
  }
  return s1 > 0.0 ? s2 / s1 : 0.0;
}

/// Triangles with |sigma| >= fraction * plateau.
inline std::vector<char> flux_support(const P0VecField& sigma, const TriMesh& mesh,
                                      double fraction = 0.5) {
  const double thr = fraction * flux_plateau(sigma, mesh);
  std::vector<char> mask(mesh.num_triangles(), 0);
  if (thr <= 0.0) return mask;
  for (std::size_t t = 0; t < mask.size(); ++t)
    mask[t] = sigma.norm_at(static_cast<Eigen::Index>(t)) >= thr ? 1 : 0;
  return mask;
}

namespace detail {

/// Triangles sharing at least a vertex with t (the cell and its 8 neighbors).
template <class Fn>
void for_vertex_neighbors(const TriMesh& mesh, std::size_t t, Fn&& fn) {
  const int n = mesh.n;
  const auto cell = static_cast<int>(t / 2);
  const int i = cell % n, j = cell / n;
  const auto& tri = mesh.triangles[t];
  for (int dj = -1; dj <= 1; ++dj) {
    for (int di = -1; di <= 1; ++di) {
      const int ii = i + di, jj = j + dj;
      if (ii < 0 || jj < 0 || ii >= n || jj >= n) continue;
      const std::size_t base = 2 * (static_cast<std::size_t>(jj) * n + static_cast<std::size_t>(ii));
      for (std::size_t u = base; u < base + 2; ++u) {
        if (u == t) continue;
        const auto& o = mesh.triangles[u];
        bool shared = false;
        for (int a : tri)
          for (int b : o) shared = shared || a == b;
        if (shared) fn(u);
      }
    }
  }
}

}  // namespace detail

/// Connected components (vertex adjacency) of the triangles with mask != 0;
/// returns one component id per triangle, -1 outside the mask.
inline std::vector<int> connected_components(const std::vector<char>& mask, const TriMesh& mesh,
                                             int* count = nullptr) {
  if (mask.size() != mesh.num_triangles())
    throw std::invalid_argument("connected_components: mask size mismatch");
  std::vector<int> comp(mask.size(), -1);
  int c = 0;
  std::vector<std::size_t> stack;
  for (std::size_t s = 0; s < mask.size(); ++s) {
    if (!mask[s] || comp[s] >= 0) continue;
    comp[s] = c;
    stack.assign(1, s);
    while (!stack.empty()) {
      const std::size_t t = stack.back();
      stack.pop_back();
      detail::for_vertex_neighbors(mesh, t, [&](std::size_t u) {
        if (mask[u] && comp[u] < 0) {
          comp[u] = c;
          stack.push_back(u);
        }
      });
    }
    ++c;
  }
  if (count) *count = c;
  return comp;
}

/// Number of branches of the support at p: connected components (vertex
/// adjacency) of the support inside the annulus r <= |x - p| < 2r, ignoring
/// fragments of fewer than min_size triangles.
inline int branches_around(const std::vector<char>& support, const Vec2& p, double r,
                           const TriMesh& mesh, int min_size = 3) {
  std::vector<std::size_t> ring;
  detail::for_triangles_near(mesh, p, 2.0 * r, [&](std::size_t t) {
    if (support[t] && (mesh.centroids[t] - p).norm() >= r) ring.push_back(t);
  });
  std::sort(ring.begin(), ring.end());
  std::vector<int> comp(ring.size(), -1);
  auto index_of = [&](std::size_t t) -> std::ptrdiff_t {
    const auto it = std::lower_bound(ring.begin(), ring.end(), t);
    return (it != ring.end() && *it == t) ? it - ring.begin() : -1;
  };
  int count = 0, label = 0;
  std::vector<std::size_t> stack;
  for (std::size_t s = 0; s < ring.size(); ++s) {
    if (comp[s] >= 0) continue;
    int size = 0;
    comp[s] = label;
    stack.assign(1, s);
    while (!stack.empty()) {
      const std::size_t k = stack.back();
      stack.pop_back();
      ++size;
      detail::for_vertex_neighbors(mesh, ring[k], [&](std::size_t u) {
        const auto ku = index_of(u);
        if (ku >= 0 && comp[static_cast<std::size_t>(ku)] < 0) {
          comp[static_cast<std::size_t>(ku)] = label;
          stack.push_back(static_cast<std::size_t>(ku));
        }
      });
    }
    ++label;
    if (size >= min_size) ++count;
  }
  return count;
}

/// Probe radius for junction detection: a few cells and a few eps, so the
/// annulus sits outside the band blur at the junction.
inline double junction_radius(const TriMesh& mesh, double eps) {
  return std::max(4.0 * mesh.h, 4.0 * eps);
}

struct JunctionEstimate {
  Vec2 position;
  int candidates = 0;
};

/// Branch point of the flux support: centroid of the support triangles with
/// at least three branches in the surrounding annulus. Atoms are excluded by
/// requiring the candidate to lie farther than 2 r from every terminal.
inline std::optional<JunctionEstimate> find_junction(const std::vector<char>& support, double r,
                                                     const TriMesh& mesh,
                                                     const std::vector<Vec2>& terminals = {}) {
  JunctionEstimate j;
  j.position = Vec2::Zero();
  for (std::size_t t = 0; t < support.size(); ++t) {
    if (!support[t]) continue;
    const Vec2& c = mesh.centroids[t];
    bool near_terminal = false;
    for (const auto& x : terminals) near_terminal = near_terminal || (c - x).norm() < 2.0 * r;
    if (near_terminal) continue;
    if (branches_around(support, c, r, mesh) >= 3) {
      j.position += c;
      ++j.candidates;
    }
  }
  if (j.candidates == 0) return std::nullopt;
  j.position /= j.candidates;
  return j;
}

}  // namespace pfbt
