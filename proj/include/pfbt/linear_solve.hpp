#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "pfbt/assembly.hpp"
#include "pfbt/errors.hpp"

namespace pfbt {

/// Sparse LDL^T factorization that keeps its symbolic analysis while the
/// sparsity pattern of successive matrices stays the same.
class SpdFactorization {
 public:
  void compute(const SparseMatrix& A) {
    if (!same_pattern(A)) {
      ldlt_.analyzePattern(A);
      outer_.assign(A.outerIndexPtr(), A.outerIndexPtr() + A.outerSize() + 1);
      inner_.assign(A.innerIndexPtr(), A.innerIndexPtr() + A.nonZeros());
    }
    ldlt_.factorize(A);
    if (ldlt_.info() != Eigen::Success) throw NumericalError("sparse LDL^T factorization failed");
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& b) const {
    Eigen::VectorXd x = ldlt_.solve(b);
    if (ldlt_.info() != Eigen::Success) throw NumericalError("sparse LDL^T solve failed");
    return x;
  }

 private:
  bool same_pattern(const SparseMatrix& A) const {
    if (!A.isCompressed()) return false;
    if (outer_.size() != static_cast<std::size_t>(A.outerSize() + 1) ||
        inner_.size() != static_cast<std::size_t>(A.nonZeros()))
      return false;
    return std::equal(outer_.begin(), outer_.end(), A.outerIndexPtr()) &&
           std::equal(inner_.begin(), inner_.end(), A.innerIndexPtr());
  }

  Eigen::SimplicialLDLT<SparseMatrix> ldlt_;
  std::vector<SparseMatrix::StorageIndex> outer_;
  std::vector<SparseMatrix::StorageIndex> inner_;
};

/// b - A x accumulated in extended precision, so iterative refinement is not
/// limited by cancellation in the residual itself.
inline Eigen::VectorXd residual(const SparseMatrix& A, const Eigen::VectorXd& x,
                                const Eigen::VectorXd& b) {
  std::vector<long double> r(static_cast<std::size_t>(b.size()));
  for (Eigen::Index i = 0; i < b.size(); ++i) r[static_cast<std::size_t>(i)] = b[i];
  for (Eigen::Index c = 0; c < A.outerSize(); ++c) {
    const long double xc = x[c];
    for (SparseMatrix::InnerIterator it(A, c); it; ++it)
      r[static_cast<std::size_t>(it.row())] -= static_cast<long double>(it.value()) * xc;
  }
  Eigen::VectorXd out(b.size());
  for (Eigen::Index i = 0; i < b.size(); ++i) out[i] = static_cast<double>(r[static_cast<std::size_t>(i)]);
  return out;
}

/// Smallest residual norm that can be expected once x is rounded to double:
/// a small multiple of unit roundoff times || |A| |x| ||.
inline double rounding_floor(const SparseMatrix& A, const Eigen::VectorXd& x) {
  Eigen::VectorXd ax = Eigen::VectorXd::Zero(A.rows());
  for (Eigen::Index c = 0; c < A.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(A, c); it; ++it)
      ax[it.row()] += std::abs(it.value() * x[c]);
  return 16.0 * std::numeric_limits<double>::epsilon() * ax.norm();
}

/// Solves A x = b for symmetric positive definite A with iterative refinement
/// until ||A x - b|| <= tol ||b||, or until the residual reaches the rounding
/// floor of x when the system is too badly scaled for that.
class SpdSolver {
 public:
  Eigen::VectorXd solve(const SparseMatrix& A, const Eigen::VectorXd& b, double tol) {
    fac_.compute(A);
    return refine(A, b, tol, "SPD solve");
  }

 protected:
  Eigen::VectorXd refine(const SparseMatrix& A, const Eigen::VectorXd& b, double tol,
                         const char* what) const {
    Eigen::VectorXd x = fac_.solve(b);
    const double bn = b.norm();
    Eigen::VectorXd r = residual(A, x, b);
    double rn = r.norm();
    for (int k = 0; k < kMaxRefinements && rn > tol * bn; ++k) {
      Eigen::VectorXd y = x + fac_.solve(r);
      Eigen::VectorXd ry_vec = residual(A, y, b);
      const double ry = ry_vec.norm();
      if (!(ry < rn)) break;  // at the rounding floor
      x = std::move(y);
      r = std::move(ry_vec);
      rn = ry;
    }
    if (!std::isfinite(rn) || rn > std::max(tol * bn, rounding_floor(A, x)))
      throw NumericalError(std::string(what) + ": relative residual " + sci(rn / bn) +
                           " above tolerance " + sci(tol));
    return x;
  }

  static constexpr int kMaxRefinements = 5;
  SpdFactorization fac_;
};

/// Solves A x = b for a symmetric positive semidefinite A whose nullspace is
/// the constants (weighted Neumann Laplacians), returning the mean-zero
/// solution. One node is pinned to make the reduced system definite; the
/// dropped equation holds automatically when sum(b) = 0.
class SingularSpdSolver : private SpdSolver {
 public:
  Eigen::VectorXd solve(const SparseMatrix& A, const Eigen::VectorXd& b, double tol) {
    const Eigen::Index n = A.rows();
    if (b.size() != n) throw std::invalid_argument("singular solve: size mismatch");
    const double bn = b.norm();
    if (bn == 0.0) return Eigen::VectorXd::Zero(n);
    if (std::abs(b.sum()) > kCompatibilityTol * b.cwiseAbs().sum())
      throw std::invalid_argument("singular solve: right-hand side is incompatible (sum = " +
                                  sci(b.sum()) + ")");

    SparseMatrix Ap = A;
    Ap.makeCompressed();
    for (Eigen::Index c = 0; c < Ap.outerSize(); ++c)
      for (SparseMatrix::InnerIterator it(Ap, c); it; ++it)
        if (it.row() == kPin || it.col() == kPin) it.valueRef() = (it.row() == it.col()) ? 1.0 : 0.0;
    Eigen::VectorXd bp = b;
    bp[kPin] = 0.0;
    fac_.compute(Ap);
    Eigen::VectorXd x = refine(Ap, bp, tol, "singular solve");
    x.array() -= x.mean();
    const double rn = residual(A, x, b).norm();
    if (!std::isfinite(rn) || rn > std::max(tol * bn, rounding_floor(A, x)))
      throw NumericalError("singular solve: relative residual " + sci(rn / bn) +
                           " above tolerance " + sci(tol));
    return x;
  }

  static constexpr double kCompatibilityTol = 1e-10;

 private:
  static constexpr Eigen::Index kPin = 0;
};

}  // namespace pfbt
