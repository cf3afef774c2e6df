#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace pfbt {

using Vec2 = Eigen::Vector2d;

/// Regular triangulation of the unit square. Every cell of the n x n grid is
/// split along its lower-left to upper-right diagonal. Nodes are numbered row
/// by row, node(i, j) = j * (n + 1) + i with i the x index.
struct TriMesh {
  int n = 0;
  double h = 0.0;
  std::vector<Vec2> nodes;
  std::vector<std::array<int, 3>> triangles;  // counterclockwise
  std::vector<int> boundary_nodes;
  std::vector<char> is_boundary;

  // Per-triangle geometry, filled by build_mesh.
  std::vector<double> areas;
  std::vector<Vec2> centroids;
  std::vector<std::array<Vec2, 3>> basis_gradients;

  std::size_t num_nodes() const { return nodes.size(); }
  std::size_t num_triangles() const { return triangles.size(); }

  int node_index(int i, int j) const { return j * (n + 1) + i; }
};

/// One scalar per mesh node (continuous piecewise linear function).
struct P1Field {
  Eigen::VectorXd values;

  P1Field() = default;
  explicit P1Field(Eigen::VectorXd v) : values(std::move(v)) {}
  static P1Field constant(const TriMesh& mesh, double c) {
    return P1Field(Eigen::VectorXd::Constant(static_cast<Eigen::Index>(mesh.num_nodes()), c));
  }
  Eigen::Index size() const { return values.size(); }
  double operator[](Eigen::Index i) const { return values[i]; }
  double& operator[](Eigen::Index i) { return values[i]; }
};

/// One scalar per triangle.
struct P0ScalarField {
  Eigen::VectorXd values;

  P0ScalarField() = default;
  explicit P0ScalarField(Eigen::VectorXd v) : values(std::move(v)) {}
  static P0ScalarField constant(const TriMesh& mesh, double c) {
    return P0ScalarField(
        Eigen::VectorXd::Constant(static_cast<Eigen::Index>(mesh.num_triangles()), c));
  }
  Eigen::Index size() const { return values.size(); }
  double operator[](Eigen::Index i) const { return values[i]; }
  double& operator[](Eigen::Index i) { return values[i]; }
};

/// One 2-vector per triangle, stored interleaved as (x0, y0, x1, y1, ...).
/// The interleaved layout is the coefficient vector used by the divergence
/// matrix B, whose rows are indexed by (triangle, component).
struct P0VecField {
  Eigen::VectorXd data;

  P0VecField() = default;
  explicit P0VecField(Eigen::VectorXd v) : data(std::move(v)) {}
  static P0VecField zero(const TriMesh& mesh) {
    return P0VecField(Eigen::VectorXd::Zero(2 * static_cast<Eigen::Index>(mesh.num_triangles())));
  }
  Eigen::Index num_triangles() const { return data.size() / 2; }
  Vec2 at(Eigen::Index t) const { return {data[2 * t], data[2 * t + 1]}; }
  void set(Eigen::Index t, const Vec2& v) {
    data[2 * t] = v.x();
    data[2 * t + 1] = v.y();
  }
  double norm_at(Eigen::Index t) const { return std::hypot(data[2 * t], data[2 * t + 1]); }
};

inline TriMesh build_mesh(int n) {
  if (n < 1) throw std::invalid_argument("build_mesh: n must be >= 1, got " + std::to_string(n));
  TriMesh m;
  m.n = n;
  m.h = 1.0 / n;
  const int np = n + 1;
  m.nodes.reserve(static_cast<std::size_t>(np) * np);
  m.is_boundary.assign(static_cast<std::size_t>(np) * np, 0);
  for (int j = 0; j < np; ++j) {
    for (int i = 0; i < np; ++i) {
      // i * h loses exactness at i = n for some n; pin the last row/column.
      const double x = (i == n) ? 1.0 : i * m.h;
      const double y = (j == n) ? 1.0 : j * m.h;
      m.nodes.emplace_back(x, y);
      if (i == 0 || j == 0 || i == n || j == n) {
        const int k = m.node_index(i, j);
        m.boundary_nodes.push_back(k);
        m.is_boundary[static_cast<std::size_t>(k)] = 1;
      }
    }
  }
  m.triangles.reserve(2 * static_cast<std::size_t>(n) * n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const int v00 = m.node_index(i, j);
      const int v10 = m.node_index(i + 1, j);
      const int v11 = m.node_index(i + 1, j + 1);
      const int v01 = m.node_index(i, j + 1);
      m.triangles.push_back({v00, v10, v11});
      m.triangles.push_back({v00, v11, v01});
    }
  }

  const std::size_t nt = m.triangles.size();
  m.areas.resize(nt);
  m.centroids.resize(nt);
  m.basis_gradients.resize(nt);
  for (std::size_t t = 0; t < nt; ++t) {
    const auto& tri = m.triangles[t];
    const Vec2& a = m.nodes[static_cast<std::size_t>(tri[0])];
    const Vec2& b = m.nodes[static_cast<std::size_t>(tri[1])];
    const Vec2& c = m.nodes[static_cast<std::size_t>(tri[2])];
    const double det = (b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y());
    m.areas[t] = 0.5 * det;
    m.centroids[t] = (a + b + c) / 3.0;
    // Gradient of the barycentric coordinate of vertex k is the rotated
    // opposite edge divided by twice the area.
    m.basis_gradients[t][0] = Vec2(b.y() - c.y(), c.x() - b.x()) / det;
    m.basis_gradients[t][1] = Vec2(c.y() - a.y(), a.x() - c.x()) / det;
    m.basis_gradients[t][2] = Vec2(a.y() - b.y(), b.x() - a.x()) / det;
  }
  return m;
}

/// Centroids and areas, the sampling points and weights of midpoint quadrature.
struct MidpointRule {
  std::vector<Vec2> centroids;
  std::vector<double> areas;
};

inline MidpointRule midpoints_and_areas(const TriMesh& mesh) {
  return {mesh.centroids, mesh.areas};
}

inline void check_size(const P1Field& f, const TriMesh& mesh, const char* what) {
  if (static_cast<std::size_t>(f.size()) != mesh.num_nodes())
    throw std::invalid_argument(std::string(what) + ": P1 field size " + std::to_string(f.size()) +
                                " does not match node count " + std::to_string(mesh.num_nodes()));
}

inline void check_size(const P0ScalarField& f, const TriMesh& mesh, const char* what) {
  if (static_cast<std::size_t>(f.size()) != mesh.num_triangles())
    throw std::invalid_argument(std::string(what) + ": P0 field size " + std::to_string(f.size()) +
                                " does not match triangle count " +
                                std::to_string(mesh.num_triangles()));
}

inline void check_size(const P0VecField& f, const TriMesh& mesh, const char* what) {
  if (static_cast<std::size_t>(f.num_triangles()) != mesh.num_triangles() || f.data.size() % 2 != 0)
    throw std::invalid_argument(std::string(what) + ": P0 vector field size " +
                                std::to_string(f.data.size()) + " does not match 2 x " +
                                std::to_string(mesh.num_triangles()));
}

/// Value of a P1 field at the centroid of triangle t.
inline double midpoint_value(const P1Field& f, const TriMesh& mesh, std::size_t t) {
  const auto& tri = mesh.triangles[t];
  return (f[tri[0]] + f[tri[1]] + f[tri[2]]) / 3.0;
}

inline Vec2 gradient_on(const P1Field& f, const TriMesh& mesh, std::size_t t) {
  const auto& tri = mesh.triangles[t];
  const auto& g = mesh.basis_gradients[t];
  return f[tri[0]] * g[0] + f[tri[1]] * g[1] + f[tri[2]] * g[2];
}

/// Piecewise constant gradient of the linear interpolant of f.
inline P0VecField p1_gradient(const P1Field& f, const TriMesh& mesh) {
  check_size(f, mesh, "p1_gradient");
  P0VecField out = P0VecField::zero(mesh);
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t)
    out.set(static_cast<Eigen::Index>(t), gradient_on(f, mesh, t));
  return out;
}

/// Index of the triangle containing p (points on shared edges resolve to the
/// lower/left cell). p is clamped to the closed unit square.
inline std::size_t locate_triangle(const TriMesh& mesh, const Vec2& p) {
  const int n = mesh.n;
  auto cell = [n](double v) {
    int c = static_cast<int>(std::floor(v * n));
    return c < 0 ? 0 : (c >= n ? n - 1 : c);
  };
  const int i = cell(p.x());
  const int j = cell(p.y());
  const double lx = p.x() * n - i;
  const double ly = p.y() * n - j;
  const std::size_t base = 2 * (static_cast<std::size_t>(j) * n + static_cast<std::size_t>(i));
  return ly <= lx ? base : base + 1;
}

}  // namespace pfbt
