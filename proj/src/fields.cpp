#include "rfo/fields.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "rfo/edges.hpp"
#include "rfo/errors.hpp"
#include "rfo/random.hpp"
#include "solver_detail.hpp"

namespace rfo {

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

// Indices of sub's sites grouped by graph component; trivial for boxes.
std::vector<std::vector<std::size_t>> component_index_groups(const Region& sub) {
  std::vector<std::vector<std::size_t>> groups;
  if (sub.is_box()) {
    groups.emplace_back(sub.size());
    for (std::size_t i = 0; i < sub.size(); ++i) groups[0][i] = i;
    return groups;
  }
  for (const Region& c : connected_components(sub, Adjacency::graph)) {
    std::vector<std::size_t> g(c.size());
    for (std::size_t i = 0; i < c.size(); ++i)
      g[i] = static_cast<std::size_t>(sub.index_of(c.site(i)));
    groups.push_back(std::move(g));
  }
  return groups;
}

void center_per_component(const Region& sub, std::vector<double>& v) {
  for (const auto& g : component_index_groups(sub)) {
    double m = 0;
    for (std::size_t i : g) m += v[i];
    m /= static_cast<double>(g.size());
    for (std::size_t i : g) v[i] -= m;
  }
}

}  // namespace

double ScalarField::at(const Site& s) const {
  std::ptrdiff_t i = region.index_of(s);
  require(i >= 0, "ScalarField::at: site outside domain");
  return values[static_cast<std::size_t>(i)];
}

double ScalarField::at_or(const Site& s, double fallback) const {
  std::ptrdiff_t i = region.index_of(s);
  return i >= 0 ? values[static_cast<std::size_t>(i)] : fallback;
}

double ScalarField::sup_norm() const { return detail::sup(values); }

double ScalarField::mean() const {
  if (values.empty()) return 0;
  double s = 0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

DisorderRealization DisorderRealization::sample(const Region& r,
                                                std::uint64_t seed,
                                                double epsilon) {
  require(epsilon >= 0, "disorder: epsilon must be >= 0");
  DisorderRealization d;
  d.seed = seed;
  d.epsilon = epsilon;
  d.region = r;
  d.alpha.resize(r.size());
  for (std::size_t i = 0; i < r.size(); ++i)
    d.alpha[i] = gaussian_at(seed, r.site(i));
  return d;
}

double DisorderRealization::alpha_at(const Site& s) const {
  std::ptrdiff_t i = region.index_of(s);
  require(i >= 0, "disorder: site outside realization");
  return alpha[static_cast<std::size_t>(i)];
}

DisorderRealization DisorderRealization::restrict_to(const Region& sub) const {
  DisorderRealization d;
  d.seed = seed;
  d.epsilon = epsilon;
  d.region = sub;
  d.alpha.resize(sub.size());
  for (std::size_t i = 0; i < sub.size(); ++i)
    d.alpha[i] = alpha_at(sub.site(i));
  return d;
}

std::vector<double> apply_operator(const Region& sub, Bc bc, double lambda,
                                   const std::vector<double>& x) {
  require(x.size() == sub.size(), "apply_operator: size mismatch");
  const auto t = detail::NeighborTable::build(sub);
  const int d2 = 2 * t.dim;
  std::vector<double> y(t.n);
  for (std::size_t i = 0; i < t.n; ++i) {
    const double diag =
        (bc == Bc::dirichlet ? static_cast<double>(d2) : double(t.deg[i])) +
        lambda;
    double acc = diag * x[i];
    for (int k = 0; k < d2; ++k) {
      std::int32_t j = t.nbr[i * d2 + k];
      if (j >= 0) acc -= x[static_cast<std::size_t>(j)];
    }
    y[i] = acc;
  }
  return y;
}

SolveResult solve_lattice(const Region& sub, Bc bc, double lambda,
                          std::vector<double> rhs, double tol, int max_iter) {
  require(rhs.size() == sub.size(), "solve_lattice: size mismatch");
  require(lambda >= 0, "solve_lattice: lambda must be >= 0");
  const auto t = detail::NeighborTable::build(sub);
  const int d2 = 2 * t.dim;
  const bool singular = (bc == Bc::neumann && lambda == 0);
  if (singular) center_per_component(sub, rhs);
  std::vector<double> diag(t.n), precond(t.n);
  for (std::size_t i = 0; i < t.n; ++i) {
    diag[i] =
        (bc == Bc::dirichlet ? static_cast<double>(d2) : double(t.deg[i])) +
        lambda;
    precond[i] = diag[i] > 0 ? diag[i] : 1.0;
  }
  auto matvec = [&](const std::vector<double>& x, std::vector<double>& y) {
    for (std::size_t i = 0; i < t.n; ++i) {
      double acc = diag[i] * x[i];
      for (int k = 0; k < d2; ++k) {
        std::int32_t j = t.nbr[i * d2 + k];
        if (j >= 0) acc -= x[static_cast<std::size_t>(j)];
      }
      y[i] = acc;
    }
  };
  SolveResult res = detail::pcg(t.n, matvec, precond, rhs, tol, max_iter);
  if (singular) center_per_component(sub, res.x);
  return res;
}

GreenField solve_green(const DisorderRealization& real, const Region& sub,
                       double lambda, Bc bc, double tol, int max_iter) {
  std::vector<double> rhs(sub.size());
  for (std::size_t i = 0; i < sub.size(); ++i)
    rhs[i] = real.epsilon * real.alpha_at(sub.site(i));
  if (bc == Bc::neumann) center_per_component(sub, rhs);
  SolveResult sr = solve_lattice(sub, bc, lambda, std::move(rhs), tol, max_iter);
  GreenField g;
  g.g = ScalarField{sub, std::move(sr.x)};
  g.lambda = lambda;
  g.bc = bc;
  g.residual_sup = sr.residual_sup;
  g.iterations = sr.iterations;
  return g;
}

EigenBasis1d eigen_basis_1d(std::int64_t n, Bc bc) {
  require(n >= 1, "eigen_basis_1d: need n >= 1");
  const double pi = std::numbers::pi;
  const auto nn = static_cast<std::size_t>(n);
  EigenBasis1d b;
  b.eigenvalues.reserve(nn);
  b.vectors.reserve(nn);
  if (bc == Bc::dirichlet) {
    for (std::int64_t k = 1; k <= n; ++k) {
      b.eigenvalues.push_back(2.0 - 2.0 * std::cos(pi * double(k) / double(n + 1)));
      std::vector<double> v(nn);
      const double norm = std::sqrt(2.0 / double(n + 1));
      for (std::int64_t x = 0; x < n; ++x)
        v[static_cast<std::size_t>(x)] =
            norm * std::sin(pi * double(k) * double(x + 1) / double(n + 1));
      b.vectors.push_back(std::move(v));
    }
  } else {
    b.eigenvalues.push_back(0.0);
    b.vectors.emplace_back(nn, 1.0 / std::sqrt(double(n)));
    for (std::int64_t k = 1; k < n; ++k) {
      b.eigenvalues.push_back(2.0 - 2.0 * std::cos(pi * double(k) / double(n)));
      std::vector<double> v(nn);
      const double norm = std::sqrt(2.0 / double(n));
      for (std::int64_t x = 0; x < n; ++x)
        v[static_cast<std::size_t>(x)] =
            norm * std::cos(pi * double(k) * (double(x) + 0.5) / double(n));
      b.vectors.push_back(std::move(v));
    }
  }
  return b;
}

namespace {

// In-place contraction of one tensor axis with a mode matrix. forward applies
// out[k] = sum_x V[k][x] in[x]; inverse applies the transpose.
void apply_axis(std::vector<double>& data, const EigenBasis1d& basis,
                std::size_t len, std::size_t stride, bool forward) {
  const std::size_t total = data.size();
  const std::size_t block = len * stride;
  std::vector<double> in(len), out(len);
  for (std::size_t base = 0; base < total; base += block)
    for (std::size_t off = 0; off < stride; ++off) {
      for (std::size_t x = 0; x < len; ++x) in[x] = data[base + x * stride + off];
      for (std::size_t k = 0; k < len; ++k) {
        double s = 0;
        if (forward) {
          const std::vector<double>& v = basis.vectors[k];
          for (std::size_t x = 0; x < len; ++x) s += v[x] * in[x];
        } else {
          for (std::size_t m = 0; m < len; ++m) s += basis.vectors[m][k] * in[m];
        }
        out[k] = s;
      }
      for (std::size_t k = 0; k < len; ++k) data[base + k * stride + off] = out[k];
    }
}

}  // namespace

std::vector<double> eigen_solve_box(const LatticeBox& box, Bc bc, double lambda,
                                    const std::vector<double>& rhs) {
  require(lambda >= 0, "eigen_solve_box: lambda must be >= 0");
  const int d = box.dim;
  const std::size_t len = static_cast<std::size_t>(box.side);
  std::size_t total = 1;
  for (int i = 0; i < d; ++i) total *= len;
  require(rhs.size() == total, "eigen_solve_box: size mismatch");
  const EigenBasis1d basis = eigen_basis_1d(box.side, bc);
  std::vector<double> data = rhs;
  // Sites are lexicographic, so the last axis is fastest.
  std::size_t stride[3] = {1, 1, 1};
  for (int i = d - 2; i >= 0; --i) stride[i] = stride[i + 1] * len;
  for (int i = 0; i < d; ++i) apply_axis(data, basis, len, stride[i], true);
  // Divide by the mode eigenvalue; the singular constant mode is dropped.
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::size_t rem = idx;
    double mu = 0;
    for (int i = 0; i < d; ++i) {
      mu += basis.eigenvalues[rem % len];
      rem /= len;
    }
    const double denom = mu + lambda;
    data[idx] = denom > 0 ? data[idx] / denom : 0.0;
  }
  for (int i = 0; i < d; ++i) apply_axis(data, basis, len, stride[i], false);
  return data;
}

GreenField eigen_solve_oracle(const DisorderRealization& real,
                              const LatticeBox& box, double lambda, Bc bc) {
  Region rb = Region::of_box(box);
  std::vector<double> rhs(rb.size());
  for (std::size_t i = 0; i < rb.size(); ++i)
    rhs[i] = real.epsilon * real.alpha_at(rb.site(i));
  if (bc == Bc::neumann) center_per_component(rb, rhs);
  std::vector<double> x = eigen_solve_box(box, bc, lambda, rhs);
  std::vector<double> ax = apply_operator(rb, bc, lambda, x);
  double resid = 0;
  for (std::size_t i = 0; i < rb.size(); ++i)
    resid = std::max(resid, std::fabs(ax[i] - rhs[i]));
  GreenField g;
  g.g = ScalarField{std::move(rb), std::move(x)};
  g.lambda = lambda;
  g.bc = bc;
  g.residual_sup = resid;
  g.iterations = 0;
  return g;
}

double eigen_point_variance(const LatticeBox& box, Bc bc, double lambda,
                            const Site& x) {
  const int d = box.dim;
  require(box.contains(x), "eigen_point_variance: site outside box");
  const std::size_t len = static_cast<std::size_t>(box.side);
  std::size_t total = 1;
  std::size_t xi[3] = {0, 0, 0};
  for (int i = 0; i < d; ++i) {
    total *= len;
    xi[i] = static_cast<std::size_t>(x[i] - box.lo(i));
  }
  const EigenBasis1d basis = eigen_basis_1d(box.side, bc);
  double sum = 0;
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::size_t rem = idx;
    double mu = 0, phi = 1;
    for (int i = d - 1; i >= 0; --i) {
      std::size_t k = rem % len;
      rem /= len;
      mu += basis.eigenvalues[k];
      phi *= basis.vectors[k][xi[i]];
    }
    const double denom = mu + lambda;
    if (denom > 0) sum += phi * phi / (denom * denom);
  }
  return sum;
}

double eigen_grad_trace(const LatticeBox& box, Bc bc, double lambda) {
  const int d = box.dim;
  const std::size_t len = static_cast<std::size_t>(box.side);
  std::size_t total = 1;
  for (int i = 0; i < d; ++i) total *= len;
  const EigenBasis1d basis = eigen_basis_1d(box.side, bc);
  double sum = 0;
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::size_t rem = idx;
    double mu = 0;
    for (int i = 0; i < d; ++i) {
      mu += basis.eigenvalues[rem % len];
      rem /= len;
    }
    const double denom = mu + lambda;
    if (denom > 0) sum += mu / (denom * denom);
  }
  return sum;
}

FkEstimate fk_estimate(const DisorderRealization& real, const Region& sub,
                       double lambda, const Site& x, std::uint64_t walks,
                       std::uint64_t seed) {
  require(sub.contains(x), "fk_estimate: start site outside region");
  require(lambda >= 0, "fk_estimate: lambda must be >= 0");
  require(walks >= 2, "fk_estimate: need at least two walks");
  const int d = sub.dim();
  const double rate = 2.0 * d;
  double sum = 0, sumsq = 0;
  for (std::uint64_t w = 0; w < walks; ++w) {
    CounterRng rng(mix64(seed ^ 0x46b9c18e55aa12d5ULL) + w);
    const double kill = lambda > 0
                            ? -std::log(rng.next_u01()) / lambda
                            : std::numeric_limits<double>::infinity();
    double t = 0, acc = 0;
    Site s = x;
    while (true) {
      std::ptrdiff_t i = sub.index_of(s);
      if (i < 0) break;
      const double hold = -std::log(rng.next_u01()) / rate;
      acc += real.epsilon * real.alpha[static_cast<std::size_t>(i)] *
             std::min(hold, kill - t);
      t += hold;
      if (t >= kill) break;
      const std::uint64_t dir = rng.next_below(static_cast<std::uint64_t>(2 * d));
      s[static_cast<int>(dir / 2)] += (dir & 1) ? 1 : -1;
    }
    sum += acc;
    sumsq += acc * acc;
  }
  FkEstimate est;
  est.walks = walks;
  const double n = static_cast<double>(walks);
  est.estimate = sum / n;
  const double var = std::max(0.0, (sumsq - sum * sum / n) / (n - 1));
  est.std_error = std::sqrt(var / n);
  return est;
}

double PotentialField::at(const Site& s) const {
  std::ptrdiff_t i = region.index_of(s);
  require(i >= 0, "PotentialField::at: site outside domain");
  return m[static_cast<std::size_t>(i)];
}

PotentialField local_potential(const GreenField& g, const Region& within) {
  const int d = within.dim();
  require(d == g.g.region.dim(), "local_potential: dimension mismatch");
  PotentialField p;
  p.region = within;
  p.m.assign(within.size(), 0.0);
  for (std::size_t i = 0; i < within.size(); ++i) {
    const Site& s = within.site(i);
    std::ptrdiff_t is = g.g.region.index_of(s);
    require(is >= 0, "local_potential: site outside field domain");
    const double gs = g.g.values[static_cast<std::size_t>(is)];
    double acc = 0;
    for (int ax = 0; ax < d; ++ax)
      for (int dir = 0; dir < 2; ++dir) {
        Site q = s;
        q[ax] += dir ? 1 : -1;
        std::ptrdiff_t iq = g.g.region.index_of(q);
        if (iq >= 0) {
          const double dg = g.g.values[static_cast<std::size_t>(iq)] - gs;
          acc += dg * dg;
        } else if (g.bc == Bc::dirichlet) {
          acc += gs * gs;  // zero extension
        }
      }
    p.m[i] = acc;
  }
  return p;
}

namespace {

// Nodes/weights of p-point Gauss-Legendre on [-1, 1].
void legendre_rule(int p, std::vector<double>& nodes, std::vector<double>& wts) {
  nodes.resize(static_cast<std::size_t>(p));
  wts.resize(static_cast<std::size_t>(p));
  const double pi = std::numbers::pi;
  for (int i = 0; i < p; ++i) {
    double x = std::cos(pi * (i + 0.75) / (p + 0.5));
    double dp = 0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1, p1 = x;
      for (int k = 2; k <= p; ++k) {
        double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = p * (x * p1 - p0) / (x * x - 1);
      const double dx = p1 / dp;
      x -= dx;
      if (std::fabs(dx) < 1e-15) break;
    }
    nodes[static_cast<std::size_t>(p - 1 - i)] = x;
    wts[static_cast<std::size_t>(p - 1 - i)] = 2.0 / ((1 - x * x) * dp * dp);
  }
}

// All quadrature points along one axis for the given cell breakpoints.
void axis_points(const std::vector<double>& brk, int order,
                 std::vector<double>& xs, std::vector<double>& ws) {
  std::vector<double> gn, gw;
  legendre_rule(order, gn, gw);
  xs.clear();
  ws.clear();
  for (std::size_t c = 0; c + 1 < brk.size(); ++c) {
    const double a = brk[c], b = brk[c + 1];
    const double h = 0.5 * (b - a), m = 0.5 * (a + b);
    for (int i = 0; i < order; ++i) {
      xs.push_back(m + h * gn[static_cast<std::size_t>(i)]);
      ws.push_back(h * gw[static_cast<std::size_t>(i)]);
    }
  }
}

void tensor_integrals(const std::vector<double>& xs, const std::vector<double>& ws,
                      int d, double lambda, double& i2, double& ig) {
  const std::size_t n = xs.size();
  i2 = 0;
  ig = 0;
  std::size_t idx[3] = {0, 0, 0};
  const std::size_t total = [&] {
    std::size_t t = 1;
    for (int i = 0; i < d; ++i) t *= n;
    return t;
  }();
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t rem = flat;
    double s = 0, w = 1;
    for (int i = 0; i < d; ++i) {
      idx[i] = rem % n;
      rem /= n;
      s += xs[idx[i]] * xs[idx[i]];
      w *= ws[idx[i]];
    }
    const double denom = (s + lambda) * (s + lambda);
    i2 += w / denom;
    ig += w * s / denom;
  }
}

}  // namespace

SpectralConstants spectral_sigmas(std::int64_t l, double lambda, int d,
                                  double rel_tol) {
  require(l >= 1, "spectral_sigmas: need l >= 1");
  require(lambda >= 0, "spectral_sigmas: lambda must be >= 0");
  require(d >= 1 && d <= 3, "spectral_sigmas: d must be 1..3");
  const double kmin = 1.0 / static_cast<double>(l);
  const double kmax = 2.0 * std::numbers::pi;
  require(kmin < kmax, "spectral_sigmas: empty window");
  // Geometric cells resolve the k^-4 spike at the short end of the window.
  std::vector<double> brk{kmin};
  while (brk.back() * 2 < kmax) brk.push_back(brk.back() * 2);
  brk.push_back(kmax);
  for (int round = 0; round < 6; ++round) {
    std::vector<double> x8, w8, x16, w16;
    axis_points(brk, 8, x8, w8);
    axis_points(brk, 16, x16, w16);
    double a2, ag, b2, bg;
    tensor_integrals(x8, w8, d, lambda, a2, ag);
    tensor_integrals(x16, w16, d, lambda, b2, bg);
    const double err = std::max(std::fabs(a2 - b2) / std::max(1e-300, std::fabs(b2)),
                                std::fabs(ag - bg) / std::max(1e-300, std::fabs(bg)));
    if (err <= rel_tol) {
      SpectralConstants c;
      c.l = l;
      c.lambda = lambda;
      c.d = d;
      c.sigma2_sq = b2;
      c.sigma_grad_sq = bg;
      return c;
    }
    std::vector<double> finer;
    for (std::size_t i = 0; i + 1 < brk.size(); ++i) {
      finer.push_back(brk[i]);
      finer.push_back(0.5 * (brk[i] + brk[i + 1]));
    }
    finer.push_back(brk.back());
    brk = std::move(finer);
  }
  throw NumericError("spectral_sigmas failed to reach tolerance");
}

HarmonicSplit harmonic_split(const GreenField& outer,
                             const DisorderRealization& real,
                             const LatticeBox& sub, double tol) {
  require(outer.bc == Bc::dirichlet, "harmonic_split: outer field must be dirichlet");
  Region rb = Region::of_box(sub);
  for (std::size_t i = 0; i < rb.size(); ++i)
    require(outer.g.region.contains(rb.site(i)),
            "harmonic_split: sub-box leaves the outer domain");
  HarmonicSplit hs;
  hs.inner = solve_green(real, rb, outer.lambda, Bc::dirichlet, tol);
  // Residue lives on the sub-box plus the part of its boundary ring inside
  // the outer domain; beyond that both fields extend by zero.
  std::vector<Site> ring;
  Region ob = boundary(rb, BoundarySide::outer);
  for (std::size_t i = 0; i < ob.size(); ++i)
    if (outer.g.region.contains(ob.site(i))) ring.push_back(ob.site(i));
  Region dom = region_union(rb, Region::from_sites(rb.dim(), ring));
  std::vector<double> rv(dom.size());
  for (std::size_t i = 0; i < dom.size(); ++i) {
    const Site& s = dom.site(i);
    rv[i] = outer.g.at(s) - hs.inner.g.at_or(s, 0.0);
  }
  hs.residue = ScalarField{dom, std::move(rv)};

  const double lam = outer.lambda;
  const int d = rb.dim();
  for (std::size_t i = 0; i < rb.size(); ++i) {
    const Site& s = rb.site(i);
    double acc = (2.0 * d + lam) * hs.residue.at(s);
    for (int ax = 0; ax < d; ++ax)
      for (int dir = 0; dir < 2; ++dir) {
        Site q = s;
        q[ax] += dir ? 1 : -1;
        acc -= hs.residue.at_or(q, 0.0);
      }
    hs.harmonic_residual_sup = std::max(hs.harmonic_residual_sup, std::fabs(acc));
  }

  double cross = 0, e_out = 0, e_in = 0, e_res = 0;
  for_each_edge(rb, EdgeMode::meeting,
                [&](std::size_t, const Site& a, std::ptrdiff_t, const Site& b) {
                  const double oa = outer.g.at_or(a, 0), ob2 = outer.g.at_or(b, 0);
                  const double ia = hs.inner.g.at_or(a, 0), ib = hs.inner.g.at_or(b, 0);
                  const double ra = hs.residue.at_or(a, 0), rb2 = hs.residue.at_or(b, 0);
                  e_out += (ob2 - oa) * (ob2 - oa);
                  e_in += (ib - ia) * (ib - ia);
                  e_res += (rb2 - ra) * (rb2 - ra);
                  cross += (ib - ia) * (rb2 - ra);
                });
  for (std::size_t i = 0; i < rb.size(); ++i) {
    const Site& s = rb.site(i);
    const double o = outer.g.at(s), in = hs.inner.g.values[i], r = hs.residue.at(s);
    e_out += lam * o * o;
    e_in += lam * in * in;
    e_res += lam * r * r;
    cross += lam * in * r;
  }
  hs.cross_term = cross;
  hs.energy_outer = e_out;
  hs.energy_inner = e_in;
  hs.energy_residue = e_res;
  hs.additivity_gap = e_out - e_in - e_res - 2 * cross;
  return hs;
}

LocalityGap locality_gap(const DisorderRealization& real, const Region& R,
                         const LatticeBox& qtilde, double lambda, const Site& x,
                         double tol) {
  Region rq = Region::of_box(qtilde);
  require(R.contains(x) && rq.contains(x), "locality_gap: x must lie in both regions");
  GreenField gr = solve_green(real, R, lambda, Bc::dirichlet, tol);
  GreenField gq = solve_green(real, rq, lambda, Bc::dirichlet, tol);
  LocalityGap lg;
  lg.value_full = gr.g.at(x);
  lg.value_box = gq.g.at(x);
  lg.gap = std::fabs(lg.value_full - lg.value_box);
  Region diff = region_union(region_diff(R, rq), region_diff(rq, R));
  if (diff.size() == 0) {
    lg.dist = -1;
    return lg;
  }
  Region edge = boundary(diff, BoundarySide::outer);
  Coord best = std::numeric_limits<Coord>::max();
  for (std::size_t i = 0; i < edge.size(); ++i)
    best = std::min(best, dist_inf(x, edge.site(i)));
  lg.dist = best;
  return lg;
}

}  // namespace rfo
