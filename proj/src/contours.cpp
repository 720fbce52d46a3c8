#include "rfo/contours.hpp"

#include <algorithm>
#include <limits>
#include <queue>
#include <stdexcept>
#include <unordered_set>
#include <utility>

namespace rfo {

namespace {

std::int64_t pow_int(std::int64_t base, int exp) {
  std::int64_t v = 1;
  for (int i = 0; i < exp; ++i) v *= base;
  return v;
}

// Sup-distance ball of radius `radius` around mask, as a key set. Shell BFS
// over the full 3^d neighborhood: layer k is exactly the sup-distance-k
// shell. Pruned to the coordinate hull of r and mask, which contains a
// geodesic for every relevant pair, so membership inside r is exact.
std::unordered_set<std::uint64_t> ball_keys(const Region& r,
                                            const Region& mask, Coord radius) {
  const int d = mask.dim();
  Site lo, hi;
  for (int a = 0; a < d; ++a) {
    lo[a] = std::numeric_limits<Coord>::max();
    hi[a] = std::numeric_limits<Coord>::min();
  }
  auto stretch = [&](const Region& reg) {
    for (const Site& s : reg.sites())
      for (int a = 0; a < d; ++a) {
        lo[a] = std::min(lo[a], s[a]);
        hi[a] = std::max(hi[a], s[a]);
      }
  };
  stretch(r);
  stretch(mask);
  std::vector<Site> offsets;
  for (std::int64_t c = 0; c < pow_int(3, d); ++c) {
    std::int64_t rem = c;
    Site o;
    for (int a = 0; a < d; ++a) {
      o[a] = static_cast<Coord>(rem % 3) - 1;
      rem /= 3;
    }
    if (o == Site{}) continue;
    offsets.push_back(o);
  }
  std::unordered_set<std::uint64_t> ball;
  std::vector<Site> frontier;
  frontier.reserve(mask.size());
  for (const Site& s : mask.sites()) {
    ball.insert(site_key(s));
    frontier.push_back(s);
  }
  for (Coord layer = 1; layer <= radius && !frontier.empty(); ++layer) {
    std::vector<Site> next;
    for (const Site& s : frontier)
      for (const Site& o : offsets) {
        Site n = s;
        bool in = true;
        for (int a = 0; a < d; ++a) {
          n[a] += o[a];
          if (n[a] < lo[a] || n[a] > hi[a]) in = false;
        }
        if (in && ball.insert(site_key(n)).second) next.push_back(n);
      }
    frontier = std::move(next);
  }
  return ball;
}

// Sites of r at l-infinity distance >= depth from every site of mask.
// Distance to the empty set is infinite, so an empty mask keeps everything.
Region far_sites(const Region& r, const Region& mask, Coord depth) {
  if (depth <= 0 || mask.empty()) return r;
  std::unordered_set<std::uint64_t> near = ball_keys(r, mask, depth - 1);
  std::vector<Site> keep;
  for (const Site& x : r.sites())
    if (!near.count(site_key(x))) keep.push_back(x);
  return Region::from_sites(r.dim(), std::move(keep));
}

// Sites of r within l-infinity distance <= reach of some site of mask.
Region near_sites(const Region& r, const Region& mask, Coord reach) {
  if (mask.empty() || reach < 0) return Region::from_sites(r.dim(), {});
  std::unordered_set<std::uint64_t> near = ball_keys(r, mask, reach);
  std::vector<Site> keep;
  for (const Site& x : r.sites())
    if (near.count(site_key(x))) keep.push_back(x);
  return Region::from_sites(r.dim(), std::move(keep));
}

Region blocks_region(const std::vector<LatticeBox>& blocks, int dim) {
  std::vector<Site> sites;
  for (const LatticeBox& q : blocks) {
    std::vector<Site> bs = q.sites();
    sites.insert(sites.end(), bs.begin(), bs.end());
  }
  return Region::from_sites(dim, std::move(sites));
}

void require_measurable(const Region& r, std::int64_t scale, const char* who) {
  std::int64_t covered = 0;
  for (const LatticeBox& q : enumerate_blocks(r, scale, BlockFamily::standard)) {
    for (const Site& s : q.sites())
      if (!r.contains(s))
        throw std::invalid_argument(std::string(who) +
                                    ": region is not block-measurable");
    covered += q.volume();
  }
  if (covered != static_cast<std::int64_t>(r.size()))
    throw std::invalid_argument(std::string(who) +
                                ": region is not block-measurable");
}

}  // namespace

int Contour::label_at(const Site& s) const {
  std::ptrdiff_t i = spine.index_of(s);
  if (i < 0) throw std::invalid_argument("label_at: site is not on the spine");
  return labels[static_cast<std::size_t>(i)];
}

std::vector<Contour> extract_contours(const SpinConfig& sigma,
                                      const Region& lambda,
                                      const ClassifierParams& p) {
  BlockPhaseField big = big_phase_labels(sigma, lambda, p);
  PhaseField small = phase_labels(sigma, lambda, p);
  const int d = lambda.dim();
  std::vector<Site> zeros;
  for (std::size_t i = 0; i < lambda.size(); ++i)
    if (big.label[i] == 0) zeros.push_back(lambda.site(i));
  Region r0 = Region::from_sites(d, std::move(zeros));

  std::vector<Contour> out;
  for (Region& comp : connected_components(r0, Adjacency::closed)) {
    Contour g;
    g.scaleL = p.L;
    g.labels.reserve(comp.size());
    for (const Site& s : comp.sites()) {
      std::ptrdiff_t i = lambda.index_of(s);
      g.labels.push_back(small.psi[static_cast<std::size_t>(i)]);
    }
    Region delta = enlarge(comp, p.L, p.ell);
    bool inside = true;
    for (const Site& s : delta.sites())
      if (!lambda.contains(s)) {
        inside = false;
        break;
      }
    g.touches_boundary = !inside;
    g.spine = std::move(comp);
    require_measurable(g.spine, p.L, "extract_contours");
    out.push_back(std::move(g));
  }
  return out;
}

RecoveredLabels recover_labels(const Contour& g, std::int64_t ell) {
  RecoveredLabels out;
  out.domain = enlarge(g.spine, g.scaleL, ell);
  out.big.resize(out.domain.size());
  out.small.resize(out.domain.size());
  const Region& sp = g.spine;
  for (std::size_t i = 0; i < out.domain.size(); ++i) {
    const Site& y = out.domain.site(i);
    std::ptrdiff_t j = sp.index_of(y);
    if (j >= 0) {
      out.big[i] = 0;
      out.small[i] = g.labels[static_cast<std::size_t>(j)];
      continue;
    }
    // Off the spine the coarse label is a definite sign, and every spine
    // site in reach shares it; take the nearest one (first in site order).
    Coord best = std::numeric_limits<Coord>::max();
    std::int8_t lab = 0;
    for (std::size_t k = 0; k < sp.size(); ++k) {
      Coord dd = dist_inf(y, sp.site(k));
      if (dd < best) {
        best = dd;
        lab = g.labels[k];
      }
    }
    out.big[i] = lab;
    out.small[i] = lab;
  }
  return out;
}

bool compatible(const Contour& a, const Contour& b, std::int64_t ell) {
  Region da = enlarge(a.spine, a.scaleL, ell);
  Region db = enlarge(b.spine, b.scaleL, ell);
  for (const Site& s : b.spine.sites())
    if (da.contains(s)) return false;
  for (const Site& s : a.spine.sites())
    if (db.contains(s)) return false;
  Region overlap = region_intersect(da, db);
  if (overlap.empty()) return true;
  RecoveredLabels ra = recover_labels(a, ell);
  RecoveredLabels rb = recover_labels(b, ell);
  for (const Site& s : overlap.sites()) {
    std::ptrdiff_t ia = ra.domain.index_of(s);
    std::ptrdiff_t ib = rb.domain.index_of(s);
    if (ra.big[static_cast<std::size_t>(ia)] !=
        rb.big[static_cast<std::size_t>(ib)])
      return false;
  }
  return true;
}

ContourGeometry contour_geometry(const Contour& g, std::int64_t ell) {
  if (g.spine.empty())
    throw std::invalid_argument("contour_geometry: empty spine");
  ContourGeometry out;
  const int d = g.spine.dim();
  out.delta = enlarge(g.spine, g.scaleL, ell);
  IntExt ie = int_ext_decompose(g.spine);
  Region covered = g.spine;
  for (const Region& hole : ie.interiors) {
    out.delta_in.push_back(region_intersect(out.delta, hole));
    covered = region_union(covered, hole);
  }
  out.delta_ext = region_diff(out.delta, covered);
  out.hull = closed_hull(g.spine, g.scaleL, ell);
  const std::int64_t volL = pow_int(g.scaleL, d);
  const std::int64_t vol_ell = pow_int(ell, d);
  const std::int64_t n = static_cast<std::int64_t>(out.delta.size());
  if (n % volL != 0 || n % vol_ell != 0)
    throw std::logic_error("contour_geometry: enlargement is not measurable");
  out.n_large = n / volL;
  out.n_small = n / vol_ell;
  return out;
}

Region erode_region(const Region& r, Coord depth) {
  if (r.empty() || depth <= 0) return r;
  return far_sites(r, boundary(r, BoundarySide::outer), depth);
}

Region grow_until(const Region& seed, const Region& universe,
                  const std::function<bool(const Site&)>& ok) {
  const int d = seed.dim();
  std::unordered_set<std::uint64_t> have;
  std::vector<Site> sites = seed.sites();
  std::queue<Site> work;
  for (const Site& s : sites) {
    have.insert(site_key(s));
    work.push(s);
  }
  while (!work.empty()) {
    Site x = work.front();
    work.pop();
    for (int i = 0; i < d; ++i)
      for (int dir = -1; dir <= 1; dir += 2) {
        Site n = x;
        n[i] += dir;
        if (have.count(site_key(n))) continue;
        if (!universe.contains(n)) continue;
        if (ok(n)) continue;
        have.insert(site_key(n));
        sites.push_back(n);
        work.push(n);
      }
  }
  return Region::from_sites(d, std::move(sites));
}

CollarDecomposition collar_decomposition(const Contour& g,
                                         const SpinConfig& sigma,
                                         const Region& lambdaN,
                                         XiClassifier& xi) {
  const ClassifierParams& p = xi.params();
  const std::int64_t L = g.scaleL;
  if (L != p.L || xi.scale() != L)
    throw std::invalid_argument(
        "collar_decomposition: contour and classifier scales disagree");
  for (const Site& s : g.spine.sites())
    if (!lambdaN.contains(s))
      throw std::invalid_argument(
          "collar_decomposition: spine leaves the volume");

  const int d = g.spine.dim();
  Region delta = enlarge(g.spine, L, p.ell);
  Region dom = region_intersect(delta, lambdaN);
  require_measurable(dom, L, "collar_decomposition");
  BlockPhaseField big = big_phase_labels(sigma, dom, p);
  PhaseField small = phase_labels(sigma, g.spine, p);

  // Concreteness: the spine must be a maximal zero-label component with the
  // stored small labels, so the collar carries definite signs throughout.
  for (std::size_t i = 0; i < g.spine.size(); ++i)
    if (small.psi[i] != g.labels[i])
      throw std::invalid_argument(
          "collar_decomposition: contour labels do not match the "
          "configuration");
  CollarDecomposition cd;
  std::vector<Site> collar, plus, minus;
  for (std::size_t i = 0; i < dom.size(); ++i) {
    const Site& s = dom.site(i);
    const bool on_spine = g.spine.contains(s);
    if (big.label[i] == 0) {
      if (!on_spine)
        throw std::invalid_argument(
            "collar_decomposition: contour is not concrete for the "
            "configuration");
      continue;
    }
    if (on_spine)
      throw std::invalid_argument(
          "collar_decomposition: contour is not concrete for the "
          "configuration");
    collar.push_back(s);
    (big.label[i] > 0 ? plus : minus).push_back(s);
  }
  cd.collar = Region::from_sites(d, std::move(collar));
  cd.collar_plus = Region::from_sites(d, std::move(plus));
  cd.collar_minus = Region::from_sites(d, std::move(minus));

  // Band thresholds; the -100 offset is meaningful only at production scales,
  // so it is floored at L/4, and the interpolation depth is capped to keep
  // the deep-block cover inside the band.
  const std::int64_t half = std::max<std::int64_t>(1, p.ell / 2);
  const Coord t_mid = std::max<Coord>(L / 2 - 100, L / 4);
  Coord t_inner = std::min<Coord>(L / 5, t_mid - half);
  if (t_inner < 0) t_inner = 0;

  Region rim = region_intersect(boundary(cd.collar, BoundarySide::outer),
                                lambdaN);
  cd.mid_band = far_sites(cd.collar, rim, t_mid);
  cd.mid_blocks = blocks_region(
      enumerate_blocks(cd.mid_band, half, BlockFamily::standard), d);
  cd.mid_plus = region_intersect(cd.mid_blocks, cd.collar_plus);
  cd.mid_minus = region_intersect(cd.mid_blocks, cd.collar_minus);

  std::vector<Site> bad;
  for (const LatticeBox& q : enumerate_blocks(cd.collar, L,
                                              BlockFamily::standard)) {
    bool whole = true;
    for (const Site& s : q.sites())
      if (!cd.collar.contains(s)) {
        whole = false;
        break;
      }
    if (!whole) continue;  // straddles the spine or the volume edge
    if (!xi.xi(q)) {
      std::vector<Site> bs = q.sites();
      bad.insert(bad.end(), bs.begin(), bs.end());
    }
  }
  cd.bad_blocks = Region::from_sites(d, std::move(bad));

  cd.dirty_plus = near_sites(cd.collar_plus, cd.bad_blocks, 5 * L);
  cd.dirty_minus = near_sites(cd.collar_minus, cd.bad_blocks, 5 * L);
  cd.deep12_plus = erode_region(cd.dirty_plus, L / 12);
  cd.deep12_minus = erode_region(cd.dirty_minus, L / 12);
  cd.deep16_plus = erode_region(cd.dirty_plus, L / 16);
  cd.deep16_minus = erode_region(cd.dirty_minus, L / 16);
  cd.work_plus = region_diff(cd.collar_plus, cd.deep12_plus);
  cd.work_minus = region_diff(cd.collar_minus, cd.deep12_minus);

  Region rim_plus = region_intersect(
      boundary(cd.collar_plus, BoundarySide::outer), lambdaN);
  Region rim_minus = region_intersect(
      boundary(cd.collar_minus, BoundarySide::outer), lambdaN);
  cd.anchor_plus = far_sites(cd.collar_plus, rim_plus, L / 8);
  cd.anchor_minus = far_sites(cd.collar_minus, rim_minus, L / 8);

  cd.inner_band = far_sites(cd.collar, rim, t_inner);
  cd.band_components = connected_components(cd.inner_band, Adjacency::closed);
  cd.band_mid.reserve(cd.band_components.size());
  for (const Region& comp : cd.band_components)
    cd.band_mid.push_back(region_intersect(comp, cd.mid_blocks));
  return cd;
}

bool star_clean(const Contour& g, const DisorderRealization& real,
                const Region& dirty, const ClassifierParams& p) {
  Region hull = closed_hull(g.spine, p.L, p.ell);
  bool subset = true;
  for (const Site& s : hull.sites())
    if (!dirty.contains(s)) {
      subset = false;
      break;
    }
  if (subset && dirty.size() > hull.size()) return false;
  Region delta = enlarge(g.spine, p.L, p.ell);
  return region_taxonomy(real, delta, p).clean;
}

}  // namespace rfo
