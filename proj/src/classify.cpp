#include "rfo/classify.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>

#include "rfo/edges.hpp"

namespace rfo {
namespace {

bool unset(double v) { return std::isnan(v); }

double log_mag(double x) { return std::abs(std::log(x)); }

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b, r = a % b;
  return (r != 0 && ((r < 0) != (b < 0))) ? q - 1 : q;
}

std::int64_t ceil_div(std::int64_t a, std::int64_t b) {
  return -floor_div(-a, b);
}

// Inclusive prefix sums over a dense box grid; queries are inclusive box sums
// with coordinates clamped by the caller.
class PrefixGrid {
 public:
  PrefixGrid(const Site& lo, const Site& hi_excl, int dim) : dim_(dim) {
    for (int a = 0; a < 3; ++a) {
      lo_[a] = a < dim ? lo[a] : 0;
      n_[a] = a < dim ? std::max<Coord>(hi_excl[a] - lo[a], 1) : 1;
    }
    data_.assign(static_cast<std::size_t>(n_[0] * n_[1] * n_[2]), 0.0);
  }

  double& cell(const Site& s) { return data_[index(s)]; }

  void build() {
    const Coord stride[3] = {n_[1] * n_[2], n_[2], 1};
    for (int a = 0; a < dim_; ++a) {
      for (Coord i0 = 0; i0 < n_[0]; ++i0)
        for (Coord i1 = 0; i1 < n_[1]; ++i1)
          for (Coord i2 = 0; i2 < n_[2]; ++i2) {
            const Coord idx[3] = {i0, i1, i2};
            if (idx[a] == 0) continue;
            std::size_t at = static_cast<std::size_t>(
                i0 * stride[0] + i1 * stride[1] + i2 * stride[2]);
            data_[at] += data_[at - static_cast<std::size_t>(stride[a])];
          }
    }
  }

  // Sum over [lo, hi] inclusive; empty when any hi < lo.
  double box_sum(const Site& lo, const Site& hi) const {
    Coord a[3], b[3];
    for (int i = 0; i < 3; ++i) {
      a[i] = i < dim_ ? lo[i] - lo_[i] : 0;
      b[i] = i < dim_ ? hi[i] - lo_[i] : 0;
      if (b[i] < a[i]) return 0.0;
    }
    double total = 0;
    for (int mask = 0; mask < (1 << dim_); ++mask) {
      Coord c[3] = {b[0], b[1], b[2]};
      int bits = 0;
      bool zero = false;
      for (int i = 0; i < dim_; ++i)
        if (mask & (1 << i)) {
          ++bits;
          c[i] = a[i] - 1;
          if (c[i] < 0) zero = true;
        }
      if (zero) continue;
      double v = data_[static_cast<std::size_t>(
          c[0] * n_[1] * n_[2] + c[1] * n_[2] + c[2])];
      total += (bits % 2 == 0) ? v : -v;
    }
    return total;
  }

 private:
  std::size_t index(const Site& s) const {
    Coord i0 = dim_ > 0 ? s[0] - lo_[0] : 0;
    Coord i1 = dim_ > 1 ? s[1] - lo_[1] : 0;
    Coord i2 = dim_ > 2 ? s[2] - lo_[2] : 0;
    return static_cast<std::size_t>(i0 * n_[1] * n_[2] + i1 * n_[2] + i2);
  }

  int dim_;
  Coord lo_[3] = {0, 0, 0};
  Coord n_[3] = {1, 1, 1};
  std::vector<double> data_;
};

struct NiceThresholds {
  std::int64_t r = 1;
  double sup_field = 0, sup_grad = 0, sup_alpha = 0, mean_alpha = 0;
  std::vector<double> lambdas;
};

NiceThresholds nice_thresholds(const ClassifierParams& p, std::int64_t L0) {
  NiceThresholds t;
  const double le = log_mag(p.epsilon);
  const double lnL = std::log(static_cast<double>(L0));
  double r = p.avg_window_radius;
  if (unset(r))
    r = std::min(std::pow(lnL, 90.0), static_cast<double>(L0) / 4.0);
  t.r = std::max<std::int64_t>(1, static_cast<std::int64_t>(r));
  t.sup_field =
      unset(p.sup_field)
          ? p.epsilon *
                std::pow(static_cast<double>(L0),
                         p.sup_field_root_negative ? -0.5 : 0.5) *
                std::pow(le, 30.0)
          : p.sup_field;
  t.sup_grad = unset(p.sup_grad) ? p.epsilon * std::pow(le, 30.0) : p.sup_grad;
  t.sup_alpha = unset(p.sup_alpha) ? std::pow(le, 30.0) : p.sup_alpha;
  t.mean_alpha = unset(p.mean_alpha) ? std::pow(le, 30.0) : p.mean_alpha;
  t.lambdas = p.nice_lambdas.empty()
                  ? std::vector<double>{0.0, 0.5 / static_cast<double>(L0)}
                  : p.nice_lambdas;
  return t;
}

// Distance from a box site to the outer boundary of the box (1 on a face).
Coord box_depth(const LatticeBox& q, const Site& x) {
  Coord depth = q.side;
  for (int a = 0; a < q.dim; ++a)
    depth = std::min(depth, std::min(x[a] - q.lo(a), q.hi(a) - 1 - x[a]) + 1);
  return depth;
}

AvgPotentialWindow avg_event_core(const PotentialField& m, const LatticeBox& q,
                                  std::int64_t r, double threshold) {
  PrefixGrid grid(q.corner, Site{q.hi(0), q.dim > 1 ? q.hi(1) : 1,
                                 q.dim > 2 ? q.hi(2) : 1},
                  q.dim);
  for (std::size_t i = 0; i < m.region.size(); ++i)
    grid.cell(m.region.site(i)) = m.m[i];
  grid.build();
  const double norm = std::pow(static_cast<double>(r), q.dim);
  AvgPotentialWindow out;
  for (const Site& x : m.region.sites()) {
    if (static_cast<double>(box_depth(q, x)) <
        static_cast<double>(q.side) / 16.0)
      continue;
    Site lo, hi;
    for (int a = 0; a < q.dim; ++a) {
      lo[a] = std::max(x[a] - r, q.lo(a));
      hi[a] = std::min(x[a] + r, q.hi(a) - 1);
    }
    double margin = grid.box_sum(lo, hi) / norm - threshold;
    if (margin < out.margin) {
      out.margin = margin;
      out.worst = x;
    }
  }
  out.holds = out.margin >= 0;
  return out;
}

std::vector<Site> shift_family(int dim, std::int64_t L0, std::int64_t range) {
  const std::int64_t step = std::max<std::int64_t>(1, L0 / 16);
  std::vector<Site> out;
  const std::int64_t k = range;
  for (std::int64_t i = -k; i <= k; ++i)
    for (std::int64_t j = (dim > 1 ? -k : 0); j <= (dim > 1 ? k : 0); ++j)
      for (std::int64_t l = (dim > 2 ? -k : 0); l <= (dim > 2 ? k : 0); ++l)
        out.push_back(Site{i * step, j * step, l * step});
  return out;
}

struct CornerGrids {
  // Corner lattice base/step/count per axis; labels live on this grid.
  Site base;
  std::int64_t step = 1;
  Coord count[3] = {0, 0, 0};
  PrefixGrid invalid, bad_energy, not_plus, not_minus;
  bool any = false;
};

// A corner is admissible when its ell-box fits inside the configuration's
// domain; inadmissible corners are skipped by every scan.
CornerGrids build_corner_grids(const SpinConfig& sigma,
                               const ClassifierParams& p) {
  const int d = sigma.region.dim();
  const std::int64_t ell = p.ell;
  const std::int64_t step =
      p.psi_stride < 0 ? std::max<std::int64_t>(1, ell / 2) : p.psi_stride;
  const Bounds bb = sigma.region.bounds();

  Site base;
  Coord count[3] = {1, 1, 1};
  bool empty = false;
  for (int a = 0; a < d; ++a) {
    base[a] = ceil_div(bb.lo[a], step) * step;
    Coord last = bb.hi[a] - ell;  // inclusive upper corner coordinate
    count[a] = last < base[a] ? 0 : floor_div(last - base[a], step) + 1;
    if (count[a] <= 0) empty = true;
  }
  Site clo{0, 0, 0}, chi{count[0], count[1], count[2]};
  CornerGrids cg{base,
                 step,
                 {count[0], count[1], count[2]},
                 PrefixGrid(clo, chi, d),
                 PrefixGrid(clo, chi, d),
                 PrefixGrid(clo, chi, d),
                 PrefixGrid(clo, chi, d),
                 !empty};
  if (empty) return cg;

  // Site-level grids: membership, per-axis edge energies, first component.
  Site slo{bb.lo[0], bb.lo[1], bb.lo[2]};
  Site shi{bb.hi[0], d > 1 ? bb.hi[1] : 1, d > 2 ? bb.hi[2] : 1};
  PrefixGrid present(slo, shi, d), cosg(slo, shi, d);
  std::vector<PrefixGrid> edge;
  for (int a = 0; a < d; ++a) edge.emplace_back(slo, shi, d);
  for (std::size_t i = 0; i < sigma.region.size(); ++i) {
    const Site& s = sigma.region.site(i);
    present.cell(s) = 1.0;
    cosg.cell(s) = std::cos(sigma.theta[i]);
    for (int a = 0; a < d; ++a) {
      Site nb = s;
      nb[a] += 1;
      std::ptrdiff_t j = sigma.region.index_of(nb);
      if (j >= 0)
        edge[static_cast<std::size_t>(a)].cell(s) =
            2.0 - 2.0 * std::cos(sigma.theta[i] -
                                 sigma.theta[static_cast<std::size_t>(j)]);
    }
  }
  present.build();
  cosg.build();
  for (auto& e : edge) e.build();

  const double vol = std::pow(static_cast<double>(ell), d);
  const double energy_cut =
      unset(p.psi0_energy) ? p.epsilon * p.epsilon * log_mag(p.epsilon) * vol
                           : p.psi0_energy;

  Site idx;
  for (Coord i0 = 0; i0 < count[0]; ++i0)
    for (Coord i1 = 0; i1 < count[1]; ++i1)
      for (Coord i2 = 0; i2 < count[2]; ++i2) {
        idx = Site{i0, i1, i2};
        Site c{base[0] + i0 * step, d > 1 ? base[1] + i1 * step : 0,
               d > 2 ? base[2] + i2 * step : 0};
        Site lo = c, hi;
        for (int a = 0; a < 3; ++a) hi[a] = a < d ? c[a] + ell - 1 : 0;
        bool valid = present.box_sum(lo, hi) >= vol - 0.5;
        if (!valid) {
          cg.invalid.cell(idx) = 1.0;
          continue;
        }
        double energy = 0;
        for (int a = 0; a < d; ++a) {
          Site ehi = hi;
          ehi[a] -= 1;  // edges along a need both endpoints in the box
          energy += edge[static_cast<std::size_t>(a)].box_sum(lo, ehi);
        }
        if (energy > energy_cut) cg.bad_energy.cell(idx) = 1.0;
        double avg = cosg.box_sum(lo, hi) / vol;
        if (!(avg >= 1.0 - p.xi)) cg.not_plus.cell(idx) = 1.0;
        if (!(avg <= -1.0 + p.xi)) cg.not_minus.cell(idx) = 1.0;
      }
  cg.invalid.build();
  cg.bad_energy.build();
  cg.not_plus.build();
  cg.not_minus.build();
  return cg;
}

struct WindowCounts {
  double corners = 0, invalid = 0, bad_energy = 0, not_plus = 0, not_minus = 0;
};

WindowCounts window_counts(const CornerGrids& cg, const Site& z,
                           std::int64_t radius, int d) {
  WindowCounts w;
  if (!cg.any) return w;
  Site lo, hi;
  double total = 1;
  for (int a = 0; a < d; ++a) {
    Coord cl = std::max<Coord>(ceil_div(z[a] - radius - cg.base[a], cg.step), 0);
    Coord ch = std::min<Coord>(floor_div(z[a] + radius - cg.base[a], cg.step),
                               cg.count[a] - 1);
    if (ch < cl) return w;
    lo[a] = cl;
    hi[a] = ch;
    total *= static_cast<double>(ch - cl + 1);
  }
  w.corners = total;
  w.invalid = cg.invalid.box_sum(lo, hi);
  w.bad_energy = cg.bad_energy.box_sum(lo, hi);
  w.not_plus = cg.not_plus.box_sum(lo, hi);
  w.not_minus = cg.not_minus.box_sum(lo, hi);
  return w;
}

void labels_from_counts(const WindowCounts& w, std::int8_t& l0,
                        std::int8_t& l1) {
  l0 = w.bad_energy < 0.5 ? 1 : 0;
  const double admissible = w.corners - w.invalid;
  if (admissible < 0.5)
    l1 = 0;
  else if (w.not_plus < 0.5)
    l1 = 1;
  else if (w.not_minus < 0.5)
    l1 = -1;
  else
    l1 = 0;
}

std::int64_t psi_radius_of(const ClassifierParams& p) {
  return p.psi_radius < 0 ? 5 * p.ell : p.psi_radius;
}

std::int64_t big_radius_of(const ClassifierParams& p) {
  return p.big_radius < 0 ? 2 * p.L : p.big_radius;
}

// Blocks of side L covering exactly an L-measurable region (throws otherwise).
std::vector<LatticeBox> measurable_blocks(const Region& r, std::int64_t scale,
                                          const char* who) {
  std::vector<LatticeBox> blocks =
      enumerate_blocks(r, scale, BlockFamily::standard);
  double vol = std::pow(static_cast<double>(scale), r.dim());
  if (static_cast<double>(blocks.size()) * vol !=
      static_cast<double>(r.size()))
    throw std::invalid_argument(std::string(who) +
                                ": region is not measurable at the scale");
  return blocks;
}

}  // namespace

ClassifierParams ClassifierParams::defaults(double epsilon) {
  ClassifierParams p;
  p.epsilon = epsilon;
  Scales s = derive_scales(epsilon);
  p.ell = s.ell;
  p.L = s.L;
  return p;
}

ClassifierParams ClassifierParams::calibrated(double epsilon, std::int64_t ell,
                                              std::int64_t L) {
  ClassifierParams p;
  p.epsilon = epsilon;
  p.ell = ell;
  p.L = L;
  p.psi_radius = std::max<std::int64_t>(1, ell / 2);
  p.psi_stride = std::max<std::int64_t>(1, ell / 2);
  p.big_radius = 0;
  p.shift_range = 0;
  // The ln(L0)^50 factor in the mean-statistic budget degenerates at small
  // scales (it vanishes at L0 = 1); pin a unit per-block budget instead.
  p.rr5_rhs = 1.0;
  return p;
}

AvgPotentialWindow avg_potential_event(const DisorderRealization& real,
                                       const LatticeBox& Q, std::int64_t r,
                                       double A, double lambda) {
  Region rb = Region::of_box(Q);
  GreenField g = solve_green(real, rb, lambda, Bc::dirichlet);
  PotentialField m = local_potential(g, rb);
  return avg_event_core(m, Q, r, A * real.epsilon * real.epsilon);
}

BoxReport box_nice(const DisorderRealization& real, const LatticeBox& Q,
                   const ClassifierParams& p) {
  BoxReport rep;
  rep.box = Q;
  const NiceThresholds t = nice_thresholds(p, Q.side);
  const Region rb = Region::of_box(Q);
  const double eps2 = p.epsilon * p.epsilon;
  const double vol = static_cast<double>(Q.volume());
  const double inf = std::numeric_limits<double>::infinity();
  bool all = true;
  auto push = [&](ConditionCheck c) {
    all = all && c.pass;
    rep.checks.push_back(std::move(c));
  };

  for (double lam : t.lambdas) {
    for (Bc bc : {Bc::dirichlet, Bc::neumann}) {
      GreenField g = solve_green(real, rb, lam, bc);
      double gsup = g.g.sup_norm();
      push({"sup_field", lam, bc, gsup, -inf, t.sup_field,
            gsup <= t.sup_field});
      double dsup = 0, d2 = 0;
      for_each_edge(rb,
                    bc == Bc::dirichlet ? EdgeMode::meeting
                                        : EdgeMode::interior,
                    [&](std::size_t i, const Site&, std::ptrdiff_t j,
                        const Site&) {
                      double diff =
                          g.g.values[i] -
                          (j >= 0 ? g.g.values[static_cast<std::size_t>(j)]
                                  : 0.0);
                      dsup = std::max(dsup, std::abs(diff));
                      d2 += diff * diff;
                    });
      push({"sup_grad", lam, bc, dsup, -inf, t.sup_grad, dsup <= t.sup_grad});
      double dens = d2 / vol;
      push({"grad_density", lam, bc, dens, p.A * eps2, p.B * eps2,
            dens >= p.A * eps2 && dens <= p.B * eps2});
      if (bc == Bc::dirichlet) {
        PotentialField m = local_potential(g, rb);
        AvgPotentialWindow ev = avg_event_core(m, Q, t.r, p.A * eps2);
        push({"avg_window", lam, bc, ev.margin + p.A * eps2, p.A * eps2, inf,
              ev.holds});
      }
    }
  }

  double amax = 0, asum = 0;
  for (const Site& s : rb.sites()) {
    double a = real.alpha_at(s);
    amax = std::max(amax, std::abs(a));
    asum += a;
  }
  push({"sup_alpha", 0, Bc::dirichlet, amax, -inf, t.sup_alpha,
        amax <= t.sup_alpha});
  double mean_stat = std::abs(asum / vol) * std::sqrt(vol);
  push({"mean_alpha", 0, Bc::dirichlet, mean_stat, -inf, t.mean_alpha,
        mean_stat <= t.mean_alpha});
  rep.nice = all;
  return rep;
}

XiClassifier::XiClassifier(const DisorderRealization& real, std::int64_t L0,
                           ClassifierParams p)
    : real_(&real), L0_(L0), params_(std::move(p)) {}

bool XiClassifier::good_standard(const Site& corner) {
  const int d = real_->region.dim();
  for (int a = 0; a < d; ++a)
    if (floor_div(corner[a], L0_) * L0_ != corner[a])
      throw std::invalid_argument(
          "good_standard: corner is not on the block lattice");
  auto it = cache_.find(corner);
  if (it != cache_.end()) return it->second;
  const std::int64_t range = params_.shift_range < 0 ? 32 : params_.shift_range;
  bool good = true;
  for (const Site& eta : shift_family(d, L0_, range)) {
    Site c{corner[0] + eta[0], corner[1] + eta[1], corner[2] + eta[2]};
    if (!box_nice(*real_, LatticeBox::at_corner(c, L0_, d), params_).nice) {
      good = false;
      break;
    }
  }
  cache_[corner] = good;
  return good;
}

int XiClassifier::xi(const LatticeBox& q) {
  const int d = q.dim;
  Site lo, hi;
  for (int a = 0; a < d; ++a) {
    lo[a] = floor_div(q.lo(a), L0_);
    hi[a] = floor_div(q.hi(a) - 1, L0_);
  }
  for (Coord i = lo[0]; i <= hi[0]; ++i)
    for (Coord j = (d > 1 ? lo[1] : 0); j <= (d > 1 ? hi[1] : 0); ++j)
      for (Coord k = (d > 2 ? lo[2] : 0); k <= (d > 2 ? hi[2] : 0); ++k)
        if (good_standard(Site{i * L0_, d > 1 ? j * L0_ : 0,
                               d > 2 ? k * L0_ : 0}))
          return 1;
  return 0;
}

int psi0_site(const SpinConfig& sigma, const Site& z,
              const ClassifierParams& p) {
  CornerGrids cg = build_corner_grids(sigma, p);
  std::int8_t l0 = 0, l1 = 0;
  labels_from_counts(window_counts(cg, z, psi_radius_of(p), sigma.region.dim()),
                     l0, l1);
  return l0;
}

int psi1_site(const SpinConfig& sigma, const Site& z,
              const ClassifierParams& p) {
  CornerGrids cg = build_corner_grids(sigma, p);
  std::int8_t l0 = 0, l1 = 0;
  labels_from_counts(window_counts(cg, z, psi_radius_of(p), sigma.region.dim()),
                     l0, l1);
  return l1;
}

int psi_site(const SpinConfig& sigma, const Site& z,
             const ClassifierParams& p) {
  CornerGrids cg = build_corner_grids(sigma, p);
  std::int8_t l0 = 0, l1 = 0;
  labels_from_counts(window_counts(cg, z, psi_radius_of(p), sigma.region.dim()),
                     l0, l1);
  return l0 * l1;
}

int PhaseField::psi_at(const Site& s) const {
  std::ptrdiff_t i = domain.index_of(s);
  if (i < 0) throw std::invalid_argument("psi_at: site outside the domain");
  return psi[static_cast<std::size_t>(i)];
}

PhaseField phase_labels(const SpinConfig& sigma, const Region& domain,
                        const ClassifierParams& p) {
  if (domain.dim() != sigma.region.dim())
    throw std::invalid_argument("phase_labels: dimension mismatch");
  CornerGrids cg = build_corner_grids(sigma, p);
  const std::int64_t radius = psi_radius_of(p);
  PhaseField out;
  out.domain = domain;
  out.psi0.resize(domain.size());
  out.psi1.resize(domain.size());
  out.psi.resize(domain.size());
  for (std::size_t i = 0; i < domain.size(); ++i) {
    std::int8_t l0 = 0, l1 = 0;
    labels_from_counts(
        window_counts(cg, domain.site(i), radius, domain.dim()), l0, l1);
    out.psi0[i] = l0;
    out.psi1[i] = l1;
    out.psi[i] = static_cast<std::int8_t>(l0 * l1);
  }
  return out;
}

int BlockPhaseField::at(const Site& s) const {
  std::ptrdiff_t i = domain.index_of(s);
  if (i < 0) throw std::invalid_argument("at: site outside the domain");
  return label[static_cast<std::size_t>(i)];
}

BlockPhaseField big_phase_labels(const SpinConfig& sigma, const Region& lambda,
                                 const ClassifierParams& p) {
  const int d = lambda.dim();
  std::vector<LatticeBox> blocks =
      measurable_blocks(lambda, p.L, "big_phase_labels");
  const std::int64_t radius = big_radius_of(p);
  const std::int64_t reach = floor_div(radius, p.L);

  // Halo: every block within the window of some block of the region.
  std::vector<Site> halo_sites;
  {
    std::vector<Site> corners;
    for (const LatticeBox& b : blocks)
      for (Coord i = -reach; i <= reach; ++i)
        for (Coord j = (d > 1 ? -reach : 0); j <= (d > 1 ? reach : 0); ++j)
          for (Coord k = (d > 2 ? -reach : 0); k <= (d > 2 ? reach : 0); ++k)
            corners.push_back(Site{b.corner[0] + i * p.L,
                                   d > 1 ? b.corner[1] + j * p.L : 0,
                                   d > 2 ? b.corner[2] + k * p.L : 0});
    std::sort(corners.begin(), corners.end());
    corners.erase(std::unique(corners.begin(), corners.end()), corners.end());
    for (const Site& c : corners)
      for (const Site& s : LatticeBox::at_corner(c, p.L, d).sites())
        halo_sites.push_back(s);
  }
  Region halo = Region::from_sites(d, std::move(halo_sites));
  for (const Site& s : halo.sites())
    if (!sigma.region.contains(s))
      throw std::invalid_argument(
          "big_phase_labels: configuration does not cover the scan halo");

  PhaseField psi = phase_labels(sigma, halo, p);
  std::vector<LatticeBox> halo_blocks =
      measurable_blocks(halo, p.L, "big_phase_labels");
  std::map<Site, std::pair<bool, bool>> unanimity;  // all +1, all -1
  for (const LatticeBox& b : halo_blocks) {
    bool plus = true, minus = true;
    for (const Site& s : b.sites()) {
      int v = psi.psi[static_cast<std::size_t>(psi.domain.index_of(s))];
      plus = plus && v == 1;
      minus = minus && v == -1;
      if (!plus && !minus) break;
    }
    unanimity[b.corner] = {plus, minus};
  }

  BlockPhaseField out;
  out.domain = lambda;
  out.label.assign(lambda.size(), 0);
  for (const LatticeBox& b : blocks) {
    bool plus = true, minus = true;
    for (Coord i = -reach; i <= reach; ++i)
      for (Coord j = (d > 1 ? -reach : 0); j <= (d > 1 ? reach : 0); ++j)
        for (Coord k = (d > 2 ? -reach : 0); k <= (d > 2 ? reach : 0); ++k) {
          Site c{b.corner[0] + i * p.L, d > 1 ? b.corner[1] + j * p.L : 0,
                 d > 2 ? b.corner[2] + k * p.L : 0};
          auto u = unanimity.at(c);
          plus = plus && u.first;
          minus = minus && u.second;
        }
    std::int8_t v = plus ? 1 : (minus ? -1 : 0);
    if (v != 0)
      for (const Site& s : b.sites())
        out.label[static_cast<std::size_t>(lambda.index_of(s))] = v;
  }
  return out;
}

int big_label_site(const SpinConfig& sigma, const Site& z,
                   const ClassifierParams& p) {
  const int d = sigma.region.dim();
  Site corner;
  for (int a = 0; a < d; ++a) corner[a] = floor_div(z[a], p.L) * p.L;
  Region block = Region::of_box(LatticeBox::at_corner(corner, p.L, d));
  BlockPhaseField f = big_phase_labels(sigma, block, p);
  return f.at(z);
}

RegionReport region_taxonomy(const DisorderRealization& real, const Region& Y,
                             const ClassifierParams& p) {
  RegionReport rep;
  rep.region = Y;
  const int d = Y.dim();
  if (connected_components(Y, Adjacency::closed).size() != 1)
    throw std::invalid_argument("region_taxonomy: region is not connected");
  std::vector<LatticeBox> blocks = measurable_blocks(Y, p.L, "region_taxonomy");
  const double le = log_mag(p.epsilon);
  const double eps2 = p.epsilon * p.epsilon;

  XiClassifier cls(real, p.L, p);
  std::int64_t bad = 0;
  for (const LatticeBox& b : blocks)
    if (!cls.xi(b)) ++bad;
  rep.bad_blocks = static_cast<double>(bad);
  rep.good_rhs = (unset(p.good_density) ? std::pow(le, -55.0) : p.good_density) *
                 static_cast<double>(blocks.size());
  rep.good = rep.bad_blocks <= rep.good_rhs;

  const Region delta = enlarge(Y, p.L, p.ell);
  const std::int64_t range = p.shift_range < 0 ? 32 : p.shift_range;
  bool regular_all = true;
  for (std::int64_t scale :
       {std::max<std::int64_t>(1, p.ell / 2), p.ell, p.L}) {
    std::vector<LatticeBox> qs = measurable_blocks(delta, scale, "region_taxonomy");
    const double n = static_cast<double>(qs.size());
    const double lnL = std::log(static_cast<double>(scale));
    std::vector<double> lambdas =
        p.regular_lambdas.empty()
            ? std::vector<double>{0.0, std::pow(lnL, 8.0) /
                                           static_cast<double>(scale * scale)}
            : p.regular_lambdas;
    const std::vector<Site> family = shift_family(d, scale, range);
    const double vol = std::pow(static_cast<double>(scale), d);

    // Per-block statistics: field and gradient l2-densities maximized over
    // the shift family (per mass), the sup of the disorder, and the absolute
    // block means summed over the family.
    std::vector<std::vector<double>> F(lambdas.size()), Fg(lambdas.size());
    std::vector<double> R(qs.size(), 0.0), meanabs(qs.size(), 0.0);
    for (auto& v : F) v.assign(qs.size(), 0.0);
    for (auto& v : Fg) v.assign(qs.size(), 0.0);
    for (std::size_t qi = 0; qi < qs.size(); ++qi) {
      for (const Site& eta : family) {
        Site c{qs[qi].corner[0] + eta[0], qs[qi].corner[1] + eta[1],
               qs[qi].corner[2] + eta[2]};
        Region rb = Region::of_box(LatticeBox::at_corner(c, scale, d));
        double asup = 0, asum = 0;
        for (const Site& s : rb.sites()) {
          double a = real.alpha_at(s);
          asup = std::max(asup, std::abs(a));
          asum += a;
        }
        R[qi] = std::max(R[qi], asup);
        meanabs[qi] += std::abs(asum / vol);
        for (std::size_t li = 0; li < lambdas.size(); ++li) {
          GreenField g = solve_green(real, rb, lambdas[li], p.pairing_bc);
          double l2 = 0;
          for (double v : g.g.values) l2 += v * v;
          F[li][qi] = std::max(F[li][qi], l2 / vol);
          double d2 = 0;
          for_each_edge(rb,
                        p.pairing_bc == Bc::dirichlet ? EdgeMode::meeting
                                                      : EdgeMode::interior,
                        [&](std::size_t i, const Site&, std::ptrdiff_t j,
                            const Site&) {
                          double diff =
                              g.g.values[i] -
                              (j >= 0
                                   ? g.g.values[static_cast<std::size_t>(j)]
                                   : 0.0);
                          d2 += diff * diff;
                        });
          Fg[li][qi] = std::max(Fg[li][qi], d2 / vol);
        }
      }
    }

    bool scale_ok = true;
    auto push = [&](PairingCheck c) {
      scale_ok = scale_ok && c.pass;
      rep.checks.push_back(std::move(c));
    };
    for (std::size_t li = 0; li < lambdas.size(); ++li) {
      double cut1 = unset(p.rr1_cut) ? eps2 * le : p.rr1_cut;
      double lhs1 = 0;
      for (double v : Fg[li])
        if (v >= cut1) lhs1 += v;
      double rhs1 = (unset(p.rr1_rhs) ? std::pow(p.epsilon, 2.25) : p.rr1_rhs) * n;
      push({"grad_stat", scale, lambdas[li], lhs1, rhs1, lhs1 <= rhs1});

      double cap = lambdas[li] > 0
                       ? std::min(1.0 / std::sqrt(lambdas[li]),
                                  static_cast<double>(scale))
                       : static_cast<double>(scale);
      double cut2 = unset(p.rr2_cut) ? eps2 * cap * le : p.rr2_cut;
      double lhs2 = 0;
      for (double v : F[li])
        if (v >= cut2) lhs2 += v;
      double rhs2 = (unset(p.rr2_rhs) ? le * le : p.rr2_rhs) * n;
      push({"field_stat", scale, lambdas[li], lhs2, rhs2, lhs2 <= rhs2});
    }
    double cut4 = unset(p.rr4_cut) ? std::pow(le, 50.0) : p.rr4_cut;
    double lhs4 = 0;
    for (double v : R)
      if (v > cut4) lhs4 += v * v;
    double rhs4 = (unset(p.rr4_rhs) ? std::pow(le, -75.0) : p.rr4_rhs) * n;
    push({"sup_stat", scale, 0.0, lhs4, rhs4, lhs4 <= rhs4});

    double lhs5 = 0;
    for (double v : meanabs) lhs5 += v;
    double rhs5 = (unset(p.rr5_rhs)
                       ? std::pow(static_cast<double>(scale), -1.5) *
                             std::pow(lnL, 50.0)
                       : p.rr5_rhs) *
                  n;
    push({"mean_stat", scale, 0.0, lhs5, rhs5, lhs5 <= rhs5});

    rep.regular[scale] = scale_ok;
    regular_all = regular_all && scale_ok;
  }
  rep.clean = rep.good && regular_all;
  return rep;
}

}  // namespace rfo
