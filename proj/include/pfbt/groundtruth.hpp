#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "pfbt/cost.hpp"
#include "pfbt/mesh.hpp"

namespace pfbt {

/// Network vertex; demand > 0 is a source, < 0 a sink, 0 a Steiner point.
struct NetworkVertex {
  Vec2 x;
  double demand = 0.0;
  bool terminal = false;
};

/// Straight edge carrying mass >= 0 from vertex `from` to vertex `to`.
struct NetworkEdge {
  int from = 0;
  int to = 0;
  double mass = 0.0;
};

struct PolyhedralNetwork {
  std::vector<NetworkVertex> vertices;
  std::vector<NetworkEdge> edges;

  double edge_length(const NetworkEdge& e) const {
    return (vertices.at(static_cast<std::size_t>(e.to)).x -
            vertices.at(static_cast<std::size_t>(e.from)).x)
        .norm();
  }

  std::size_t num_steiner() const {
    return static_cast<std::size_t>(
        std::count_if(vertices.begin(), vertices.end(), [](const auto& v) { return !v.terminal; }));
  }

  /// Largest violation of outflow - inflow = demand over all vertices.
  double kirchhoff_defect() const {
    std::vector<double> net(vertices.size(), 0.0);
    for (const auto& e : edges) {
      net.at(static_cast<std::size_t>(e.from)) += e.mass;
      net.at(static_cast<std::size_t>(e.to)) -= e.mass;
    }
    double worst = 0.0;
    for (std::size_t v = 0; v < vertices.size(); ++v)
      worst = std::max(worst, std::abs(net[v] - vertices[v].demand));
    return worst;
  }
};

inline constexpr double kKirchhoffTol = 1e-12;

/// Gilbert energy sum_e tau(m_e) |e|.
inline double network_cost(const PolyhedralNetwork& net, const CostSpec& cost) {
  if (net.kirchhoff_defect() > kKirchhoffTol)
    throw std::invalid_argument("network_cost: Kirchhoff balance violated by " +
                                std::to_string(net.kirchhoff_defect()));
  double c = 0.0;
  for (const auto& e : net.edges) {
    if (e.mass < 0.0) throw std::invalid_argument("network_cost: negative edge mass");
    const double len = net.edge_length(e);
    if (!(len > 0.0)) throw std::invalid_argument("network_cost: zero-length edge");
    c += tau(e.mass, cost) * len;
  }
  return c;
}

/// Tree over k terminals (nodes 0..k-1) and k-2 Steiner points (nodes k..2k-3).
/// Every Steiner point has degree 3 and every terminal is a leaf.
struct TreeTopology {
  int num_terminals = 0;
  std::vector<std::pair<int, int>> edges;

  int num_steiner() const { return num_terminals > 2 ? num_terminals - 2 : 0; }
  int num_nodes() const { return num_terminals + num_steiner(); }
};

/// All full Steiner topologies on k labeled terminals, built by attaching
/// terminal k to a new Steiner point subdividing each edge of every topology
/// on k - 1 terminals. The count is (2k - 5)!! for k >= 3.
inline std::vector<TreeTopology> enumerate_topologies(int k) {
  if (k < 2 || k > 5)
    throw std::invalid_argument("enumerate_topologies: k must lie in 2..5, got " +
                                std::to_string(k));
  if (k == 2) return {TreeTopology{2, {{0, 1}}}};
  // Relabel: terminals keep 0..k-1, Steiner points are k..2k-3.
  std::vector<TreeTopology> cur{TreeTopology{3, {{0, 3}, {1, 3}, {2, 3}}}};
  for (int kk = 4; kk <= k; ++kk) {
    std::vector<TreeTopology> next;
    for (const auto& t : cur) {
      const int old_k = t.num_terminals;
      auto relabel = [old_k](int v) { return v >= old_k ? v + 1 : v; };
      for (std::size_t e = 0; e < t.edges.size(); ++e) {
        TreeTopology n;
        n.num_terminals = kk;
        const int s = kk + (kk - 3);  // index of the new Steiner point
        for (std::size_t f = 0; f < t.edges.size(); ++f) {
          const auto [a, b] = t.edges[f];
          if (f == e) {
            n.edges.emplace_back(relabel(a), s);
            n.edges.emplace_back(s, relabel(b));
          } else {
            n.edges.emplace_back(relabel(a), relabel(b));
          }
        }
        n.edges.emplace_back(kk - 1, s);
        next.push_back(std::move(n));
      }
    }
    cur = std::move(next);
  }
  return cur;
}

struct Terminal {
  Vec2 x;
  double demand = 0.0;  // > 0 source, < 0 sink
};

/// Checks that demands balance within tol and returns a copy whose positive
/// part is rescaled so the balance is exact to rounding.
inline std::vector<Terminal> balanced_terminals(std::vector<Terminal> terms, double tol = 1e-9) {
  if (terms.size() < 2) throw std::invalid_argument("terminals: at least two are required");
  double pos = 0.0, neg = 0.0;
  for (const auto& t : terms) {
    if (!std::isfinite(t.demand) || t.demand == 0.0)
      throw std::invalid_argument("terminals: demands must be finite and nonzero");
    (t.demand > 0 ? pos : neg) += t.demand;
  }
  if (pos == 0.0 || neg == 0.0 || std::abs(pos + neg) > tol * std::max(1.0, pos))
    throw std::invalid_argument("terminals: source and sink demands do not balance (sum = " +
                                std::to_string(pos + neg) + ")");
  for (auto& t : terms)
    if (t.demand > 0) t.demand *= -neg / pos;
  return terms;
}

namespace detail {

/// Mass on each tree edge and its orientation: for edge (a, b), the signed
/// total demand on b's side of the cut; positive means flow b -> a.
inline std::vector<double> cut_demands(const TreeTopology& topo,
                                       const std::vector<double>& node_demand) {
  const int nn = topo.num_nodes();
  std::vector<std::vector<std::pair<int, int>>> adj(static_cast<std::size_t>(nn));
  for (std::size_t e = 0; e < topo.edges.size(); ++e) {
    adj[static_cast<std::size_t>(topo.edges[e].first)].emplace_back(topo.edges[e].second,
                                                                   static_cast<int>(e));
    adj[static_cast<std::size_t>(topo.edges[e].second)].emplace_back(topo.edges[e].first,
                                                                    static_cast<int>(e));
  }
  std::vector<double> out(topo.edges.size(), 0.0);
  // Subtree sums from root 0 by iterative post-order traversal.
  std::vector<int> parent(static_cast<std::size_t>(nn), -1), parent_edge(static_cast<std::size_t>(nn), -1),
      order;
  std::vector<char> seen(static_cast<std::size_t>(nn), 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    order.push_back(v);
    for (auto [w, e] : adj[static_cast<std::size_t>(v)]) {
      if (seen[static_cast<std::size_t>(w)]) continue;
      seen[static_cast<std::size_t>(w)] = 1;
      parent[static_cast<std::size_t>(w)] = v;
      parent_edge[static_cast<std::size_t>(w)] = e;
      stack.push_back(w);
    }
  }
  if (static_cast<int>(order.size()) != nn) throw std::invalid_argument("topology is not connected");
  std::vector<double> sub(node_demand);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const int v = *it;
    const int p = parent[static_cast<std::size_t>(v)];
    if (p < 0) continue;
    const int e = parent_edge[static_cast<std::size_t>(v)];
    sub[static_cast<std::size_t>(p)] += sub[static_cast<std::size_t>(v)];
    // Side of v is the subtree; express relative to edge (a, b).
    const bool v_is_b = topo.edges[static_cast<std::size_t>(e)].second == v;
    out[static_cast<std::size_t>(e)] = v_is_b ? sub[static_cast<std::size_t>(v)]
                                              : -sub[static_cast<std::size_t>(v)];
  }
  return out;
}

/// Nelder-Mead minimization with standard coefficients. Stops when every
/// simplex vertex is within `diameter_tol` of the best one.
inline Eigen::VectorXd nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                                   Eigen::VectorXd x0, double step, double diameter_tol,
                                   int max_evals, double* fbest) {
  const Eigen::Index d = x0.size();
  if (d == 0) {
    if (fbest) *fbest = f(x0);
    return x0;
  }
  std::vector<Eigen::VectorXd> s(static_cast<std::size_t>(d + 1), x0);
  std::vector<double> fs(static_cast<std::size_t>(d + 1));
  for (Eigen::Index i = 0; i < d; ++i) s[static_cast<std::size_t>(i + 1)][i] += step;
  int evals = 0;
  for (std::size_t i = 0; i < s.size(); ++i, ++evals) fs[i] = f(s[i]);
  std::vector<std::size_t> idx(s.size());
  while (evals < max_evals) {
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return fs[a] < fs[b]; });
    double diam = 0.0;
    for (std::size_t i = 1; i < idx.size(); ++i)
      diam = std::max(diam, (s[idx[i]] - s[idx[0]]).norm());
    if (diam < diameter_tol) break;
    const std::size_t worst = idx.back(), second = idx[idx.size() - 2];
    Eigen::VectorXd c = Eigen::VectorXd::Zero(d);
    for (std::size_t i = 0; i + 1 < idx.size(); ++i) c += s[idx[i]];
    c /= static_cast<double>(d);
    const Eigen::VectorXd xr = c + (c - s[worst]);
    const double fr = f(xr);
    ++evals;
    if (fr < fs[idx[0]]) {
      const Eigen::VectorXd xe = c + 2.0 * (c - s[worst]);
      const double fe = f(xe);
      ++evals;
      if (fe < fr) {
        s[worst] = xe;
        fs[worst] = fe;
      } else {
        s[worst] = xr;
        fs[worst] = fr;
      }
    } else if (fr < fs[second]) {
      s[worst] = xr;
      fs[worst] = fr;
    } else {
      const bool outside = fr < fs[worst];
      const Eigen::VectorXd xc = outside ? Eigen::VectorXd(c + 0.5 * (xr - c))
                                         : Eigen::VectorXd(c + 0.5 * (s[worst] - c));
      const double fc = f(xc);
      ++evals;
      if (fc < std::min(fr, fs[worst])) {
        s[worst] = xc;
        fs[worst] = fc;
      } else {
        const Eigen::VectorXd best = s[idx[0]];
        for (std::size_t i = 1; i < idx.size(); ++i) {
          s[idx[i]] = best + 0.5 * (s[idx[i]] - best);
          fs[idx[i]] = f(s[idx[i]]);
          ++evals;
        }
      }
    }
  }
  const auto b = static_cast<std::size_t>(std::min_element(fs.begin(), fs.end()) - fs.begin());
  if (fbest) *fbest = fs[b];
  return s[b];
}

}  // namespace detail

struct OptimizerOptions {
  int restarts = 8;
  double diameter_tol = 1e-9;
  double merge_tol = 1e-7;
  int max_evals = 200000;
  std::uint64_t seed = 0;
};

/// Merges the endpoints of edges shorter than tol (Steiner points collapse
/// onto terminals or onto each other) and drops those edges.
inline PolyhedralNetwork merge_close_vertices(const PolyhedralNetwork& net, double tol) {
  const std::size_t nv = net.vertices.size();
  std::vector<int> rep(nv);
  std::iota(rep.begin(), rep.end(), 0);
  std::function<int(int)> find = [&](int v) {
    while (rep[static_cast<std::size_t>(v)] != v) v = rep[static_cast<std::size_t>(v)];
    return v;
  };
  for (const auto& e : net.edges) {
    if (net.edge_length(e) >= tol) continue;
    int a = find(e.from), b = find(e.to);
    if (a == b) continue;
    const bool ta = net.vertices[static_cast<std::size_t>(a)].terminal;
    const bool tb = net.vertices[static_cast<std::size_t>(b)].terminal;
    if (ta && tb) continue;  // distinct terminals never merge
    if (tb || (!ta && b < a)) std::swap(a, b);
    rep[static_cast<std::size_t>(b)] = a;
  }
  PolyhedralNetwork out;
  std::vector<int> new_index(nv, -1);
  for (std::size_t v = 0; v < nv; ++v) {
    if (find(static_cast<int>(v)) != static_cast<int>(v)) continue;
    new_index[v] = static_cast<int>(out.vertices.size());
    out.vertices.push_back(net.vertices[v]);
  }
  for (std::size_t v = 0; v < nv; ++v) {
    const int r = find(static_cast<int>(v));
    if (r != static_cast<int>(v))
      out.vertices[static_cast<std::size_t>(new_index[static_cast<std::size_t>(r)])].demand +=
          net.vertices[v].demand;
  }
  for (const auto& e : net.edges) {
    const int a = find(e.from), b = find(e.to);
    if (a == b) continue;
    out.edges.push_back({new_index[static_cast<std::size_t>(a)], new_index[static_cast<std::size_t>(b)],
                         e.mass});
  }
  return out;
}

/// Network of a topology with given Steiner coordinates (stacked x, y).
inline PolyhedralNetwork realize(const TreeTopology& topo, const std::vector<Terminal>& terms,
                                 const Eigen::VectorXd& steiner) {
  if (static_cast<int>(terms.size()) != topo.num_terminals)
    throw std::invalid_argument("realize: terminal count does not match topology");
  PolyhedralNetwork net;
  std::vector<double> demand;
  for (const auto& t : terms) {
    net.vertices.push_back({t.x, t.demand, true});
    demand.push_back(t.demand);
  }
  for (int s = 0; s < topo.num_steiner(); ++s) {
    net.vertices.push_back({Vec2(steiner[2 * s], steiner[2 * s + 1]), 0.0, false});
    demand.push_back(0.0);
  }
  const std::vector<double> cut = detail::cut_demands(topo, demand);
  for (std::size_t e = 0; e < topo.edges.size(); ++e) {
    const auto [a, b] = topo.edges[e];
    // cut > 0: b's side has net supply, so mass flows b -> a.
    if (cut[e] >= 0.0)
      net.edges.push_back({b, a, cut[e]});
    else
      net.edges.push_back({a, b, -cut[e]});
  }
  return net;
}

/// Locally optimal Steiner point positions for one topology: Nelder-Mead from
/// `restarts` seeded starts (the first at the terminal centroid), each
/// restarted from its own optimum until the cost stops improving, followed by
/// merging of collapsed vertices.
inline PolyhedralNetwork optimize_vertices(const TreeTopology& topo, std::vector<Terminal> terms,
                                           const CostSpec& cost,
                                           const OptimizerOptions& opt = {}) {
  terms = balanced_terminals(std::move(terms));
  const int ns = topo.num_steiner();
  std::vector<double> demand;
  for (const auto& t : terms) demand.push_back(t.demand);
  demand.resize(static_cast<std::size_t>(topo.num_nodes()), 0.0);
  const std::vector<double> cut = detail::cut_demands(topo, demand);
  std::vector<double> weight(cut.size());
  for (std::size_t e = 0; e < cut.size(); ++e) weight[e] = tau(std::abs(cut[e]), cost);

  auto position = [&](const Eigen::VectorXd& x, int v) -> Vec2 {
    if (v < topo.num_terminals) return terms[static_cast<std::size_t>(v)].x;
    const int s = v - topo.num_terminals;
    return {x[2 * s], x[2 * s + 1]};
  };
  auto objective = [&](const Eigen::VectorXd& x) {
    double c = 0.0;
    for (std::size_t e = 0; e < topo.edges.size(); ++e)
      c += weight[e] * (position(x, topo.edges[e].first) - position(x, topo.edges[e].second)).norm();
    return c;
  };

  Vec2 lo = terms[0].x, hi = terms[0].x, centroid = Vec2::Zero();
  for (const auto& t : terms) {
    lo = lo.cwiseMin(t.x);
    hi = hi.cwiseMax(t.x);
    centroid += t.x / static_cast<double>(terms.size());
  }
  const double scale = std::max((hi - lo).maxCoeff(), 1e-3);
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> ux(lo.x(), hi.x()), uy(lo.y(), hi.y());

  Eigen::VectorXd best_x(2 * ns);
  double best = std::numeric_limits<double>::infinity();
  for (int r = 0; r < std::max(1, opt.restarts); ++r) {
    Eigen::VectorXd x(2 * ns);
    for (int s = 0; s < ns; ++s) {
      const Vec2 p = r == 0 ? centroid : Vec2(ux(rng), uy(rng));
      x[2 * s] = p.x();
      x[2 * s + 1] = p.y();
    }
    double fx = objective(x);
    double step = 0.1 * scale;
    for (int polish = 0; polish < 50; ++polish) {
      double fn = 0.0;
      Eigen::VectorXd xn =
          detail::nelder_mead(objective, x, step, opt.diameter_tol, opt.max_evals, &fn);
      const bool improved = fn < fx - 1e-15 * std::max(1.0, std::abs(fx));
      if (fn <= fx) {
        x = std::move(xn);
        fx = fn;
      }
      if (!improved) break;
      step = std::max(1e-3 * scale, 0.1 * step);
    }
    if (fx < best) {
      best = fx;
      best_x = x;
    }
  }
  return merge_close_vertices(realize(topo, terms, best_x), opt.merge_tol);
}

struct BestNetwork {
  PolyhedralNetwork network;
  double cost = 0.0;
  std::vector<double> candidate_costs;  // one per enumerated topology
};

/// Cheapest optimized network over all full topologies.
inline BestNetwork best_network(const std::vector<Terminal>& terms, const CostSpec& cost,
                                const OptimizerOptions& opt = {}) {
  if (terms.size() > 5) throw std::invalid_argument("best_network: at most 5 terminals");
  cost.validate();
  const auto topos = enumerate_topologies(static_cast<int>(terms.size()));
  BestNetwork out;
  out.cost = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < topos.size(); ++i) {
    OptimizerOptions o = opt;
    o.seed = opt.seed + i;
    PolyhedralNetwork net = optimize_vertices(topos[i], terms, cost, o);
    const double c = network_cost(net, cost);
    out.candidate_costs.push_back(c);
    if (c < out.cost) {
      out.cost = c;
      out.network = std::move(net);
    }
  }
  return out;
}

}  // namespace pfbt
