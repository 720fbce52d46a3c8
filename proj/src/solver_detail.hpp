#pragma once

// Internal solver plumbing shared by fields.cpp and variational.cpp.

#include <cmath>
#include <cstdint>
#include <vector>

#include "rfo/errors.hpp"
#include "rfo/fields.hpp"
#include "rfo/geometry.hpp"

namespace rfo::detail {

// Flat neighbor indices (2d per site, -1 outside the region).
struct NeighborTable {
  int dim = 0;
  std::size_t n = 0;
  std::vector<std::int32_t> nbr;
  std::vector<std::int8_t> deg;

  static NeighborTable build(const Region& r) {
    NeighborTable t;
    t.dim = r.dim();
    t.n = r.size();
    t.nbr.assign(t.n * 2 * t.dim, -1);
    t.deg.assign(t.n, 0);
    for (std::size_t i = 0; i < t.n; ++i) {
      const Site& s = r.site(i);
      for (int ax = 0; ax < t.dim; ++ax)
        for (int dir = 0; dir < 2; ++dir) {
          Site q = s;
          q[ax] += dir ? 1 : -1;
          std::ptrdiff_t j = r.index_of(q);
          t.nbr[i * 2 * t.dim + 2 * ax + dir] = static_cast<std::int32_t>(j);
          if (j >= 0) ++t.deg[i];
        }
    }
    return t;
  }
};

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double sup(const std::vector<double>& a) {
  double s = 0;
  for (double v : a) s = std::max(s, std::fabs(v));
  return s;
}

// Jacobi-preconditioned CG; matvec(x, y) writes y = A x. Residual target is
// tol * max(1, sup|b|). Recomputes the true residual periodically.
template <class MatVec>
SolveResult pcg(std::size_t n, const MatVec& matvec,
                const std::vector<double>& diag, const std::vector<double>& b,
                double tol, int max_iter) {
  SolveResult res;
  res.x.assign(n, 0.0);
  const double bsup = sup(b);
  const double target = tol * std::max(1.0, bsup);
  if (bsup == 0.0) return res;
  std::vector<double> r = b, z(n), p(n), q(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = r[i] / diag[i];
  p = z;
  double rz = dot(r, z);
  for (int it = 1; it <= max_iter; ++it) {
    matvec(p, q);
    const double pq = dot(p, q);
    if (pq <= 0) throw NumericError("cg: operator lost positivity");
    const double alpha = rz / pq;
    for (std::size_t i = 0; i < n; ++i) {
      res.x[i] += alpha * p[i];
      r[i] -= alpha * q[i];
    }
    if (it % 64 == 0) {  // refresh against drift
      matvec(res.x, q);
      for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - q[i];
    }
    res.iterations = it;
    if (sup(r) <= target) {
      matvec(res.x, q);
      for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - q[i];
      res.residual_sup = sup(r);
      if (res.residual_sup <= target) return res;
    }
    for (std::size_t i = 0; i < n; ++i) z[i] = r[i] / diag[i];
    const double rz_new = dot(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  throw NumericError("cg failed to converge within iteration budget");
}

}  // namespace rfo::detail
