#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pfbt {

/// One affine piece alpha * m + beta of the transport cost.
struct Segment {
  double alpha = 0.0;
  double beta = 0.0;
};

/// Piecewise affine transport cost
///   tau(m) = min(alpha0 * m, alpha_1 * m + beta_1, ..., alpha_N * m + beta_N).
/// An infinite alpha0 forbids diffuse (off-network) transport; it is kept as an
/// explicit state so the branch logic in omega/xi never compares against a
/// large sentinel.
struct CostSpec {
  enum class Alpha0 { kFinite, kInfinite };

  Alpha0 alpha0_kind = Alpha0::kInfinite;
  double alpha0 = 0.0;  // only meaningful when alpha0_kind == kFinite
  std::vector<Segment> segments;
  double p = 2.0;

  static CostSpec infinite(std::vector<Segment> segs, double p = 2.0) {
    CostSpec c;
    c.segments = std::move(segs);
    c.p = p;
    return c;
  }
  static CostSpec finite(double alpha0, std::vector<Segment> segs, double p = 2.0) {
    CostSpec c;
    c.alpha0_kind = Alpha0::kFinite;
    c.alpha0 = alpha0;
    c.segments = std::move(segs);
    c.p = p;
    return c;
  }

  bool diffuse_allowed() const { return alpha0_kind == Alpha0::kFinite; }
  std::size_t num_phases() const { return segments.size(); }
  /// Segment i in 1..N.
  const Segment& segment(std::size_t i) const { return segments.at(i - 1); }

  /// Checks the ordering alpha0 > alpha_1 > ... > alpha_N > 0,
  /// 0 < beta_1 < ... < beta_N and p > 1.
  void validate() const {
    if (segments.empty()) throw std::invalid_argument("cost: at least one segment is required");
    if (!(p > 1.0)) throw std::invalid_argument("cost: exponent p must be > 1");
    double prev_alpha = diffuse_allowed() ? alpha0 : std::numeric_limits<double>::infinity();
    double prev_beta = 0.0;
    if (diffuse_allowed() && !(alpha0 > 0.0 && std::isfinite(alpha0)))
      throw std::invalid_argument("cost: alpha0 must be positive and finite, or infinite");
    for (std::size_t i = 0; i < segments.size(); ++i) {
      const auto& s = segments[i];
      const std::string id = "cost: segment " + std::to_string(i + 1);
      if (!(s.alpha > 0.0)) throw std::invalid_argument(id + " needs alpha > 0");
      if (!(s.beta > 0.0)) throw std::invalid_argument(id + " needs beta > 0");
      if (!(s.alpha < prev_alpha))
        throw std::invalid_argument(id + " breaks strictly decreasing alpha ordering");
      if (!(s.beta > prev_beta))
        throw std::invalid_argument(id + " breaks strictly increasing beta ordering");
      prev_alpha = s.alpha;
      prev_beta = s.beta;
    }
  }
};

inline double tau(double m, const CostSpec& cost) {
  if (m < 0.0) throw std::invalid_argument("tau: mass must be nonnegative");
  if (m == 0.0) return 0.0;
  double best = cost.diffuse_allowed() ? cost.alpha0 * m : std::numeric_limits<double>::infinity();
  for (const auto& s : cost.segments) best = std::min(best, s.alpha * m + s.beta);
  return best;
}

/// Smallest index in {0..N} attaining the minimum in tau(m); index 0 is the
/// diffuse term alpha0 * m and is skipped when alpha0 is infinite.
inline int active_index(double m, const CostSpec& cost) {
  if (m < 0.0) throw std::invalid_argument("active_index: mass must be nonnegative");
  int best_i = -1;
  double best = std::numeric_limits<double>::infinity();
  if (cost.diffuse_allowed()) {
    best = cost.alpha0 * m;
    best_i = 0;
  }
  for (std::size_t i = 0; i < cost.segments.size(); ++i) {
    const double v = cost.segments[i].alpha * m + cost.segments[i].beta;
    if (v < best) {
      best = v;
      best_i = static_cast<int>(i + 1);
    }
  }
  return best_i;
}

/// Additive offset of phase i (1-based) inside gamma_eps. The plain functional
/// uses alpha_i^2 eps^2 / beta_i; the rescaled one uses alpha_i eps^2.
inline double phase_offset(std::size_t i, double eps, const CostSpec& cost, bool rescaled) {
  const auto& s = cost.segment(i);
  return rescaled ? s.alpha * eps * eps : s.alpha * s.alpha * eps * eps / s.beta;
}

/// Phase field width parameter of phase i: eps, or beta_i eps / alpha_i when rescaled.
inline double phase_eps(std::size_t i, double eps, const CostSpec& cost, bool rescaled) {
  const auto& s = cost.segment(i);
  return rescaled ? s.beta * eps / s.alpha : eps;
}

/// gamma_eps = min_i (phi_i^2 + offset_i). phi holds one value per phase.
inline double gamma_eps(std::span<const double> phi, double eps, const CostSpec& cost,
                        bool rescaled) {
  if (phi.size() != cost.num_phases())
    throw std::invalid_argument("gamma_eps: expected one value per phase");
  double g = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < phi.size(); ++i)
    g = std::min(g, phi[i] * phi[i] + phase_offset(i + 1, eps, cost, rescaled));
  return g;
}

/// Convexified flux integrand. g = gamma_eps / eps, s = |sigma|.
inline double omega_eps(const CostSpec& cost, double g, double s, double eps) {
  if (!(g > 0.0)) throw std::invalid_argument("omega_eps: g must be positive");
  if (!cost.diffuse_allowed()) return 0.5 * g * s * s;
  const double reg = std::pow(eps, cost.p) * s * s;
  const double kink = cost.alpha0 / g;
  if (s <= kink) return 0.5 * g * s * s + reg;
  return cost.alpha0 * (s - 0.5 * kink) + reg;
}

/// d omega / d s divided by s: min(g, alpha0 / s) + 2 eps^p. For an infinite
/// alpha0 the integrand is g s^2 / 2, so xi = g.
inline double xi(const CostSpec& cost, double s, double g, double eps) {
  if (!cost.diffuse_allowed()) return g;
  const double reg = 2.0 * std::pow(eps, cost.p);
  if (s <= cost.alpha0 / g) return g + reg;
  return cost.alpha0 / s + reg;
}

/// Derivative of xi with respect to s. The gamma branch (including s = 0 and
/// the kink itself) is taken as 0.
inline double xi_derivative(const CostSpec& cost, double s, double g) {
  if (!cost.diffuse_allowed() || s <= cost.alpha0 / g) return 0.0;
  return -cost.alpha0 / (s * s);
}

/// Recovery profile across a straight branch carrying mass m with active
/// segment (alpha, beta): the flux is spread evenly over a band of half width
/// a = alpha m eps / (2 beta) and the phase field follows 1 - exp(-t / eps)
/// outside the band.
struct AnalyticProfile {
  double mass = 0.0;
  double eps = 0.0;
  double half_width = 0.0;  // a
  double plateau = 0.0;     // |sigma| on the band, m / (2a) = beta / (alpha eps)

  double phi(double d) const {
    d = std::abs(d);
    if (d < half_width) return 0.0;
    return 1.0 - std::exp((half_width - d) / eps);
  }
  double sigma(double d) const { return std::abs(d) <= half_width ? plateau : 0.0; }
};

inline AnalyticProfile analytic_profile(double m, double alpha, double beta, double eps) {
  if (!(m > 0.0 && alpha > 0.0 && beta > 0.0 && eps > 0.0))
    throw std::invalid_argument("analytic_profile: all parameters must be positive");
  AnalyticProfile p;
  p.mass = m;
  p.eps = eps;
  p.half_width = alpha * m * eps / (2.0 * beta);
  p.plateau = m / (2.0 * p.half_width);
  return p;
}

}  // namespace pfbt
