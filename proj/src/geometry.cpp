#include "rfo/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <unordered_set>

#include "rfo/errors.hpp"

namespace rfo {

namespace {

std::uint64_t mix_step(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Coord floor_div(Coord a, Coord b) {
  Coord q = a / b;
  if ((a % b) != 0 && ((a < 0) != (b < 0))) --q;
  return q;
}

void check_dim(int dim) {
  if (dim < 1 || dim > 3) throw std::invalid_argument("dimension must be 1, 2 or 3");
}

}  // namespace

std::uint64_t site_key(const Site& s) {
  std::uint64_t h = mix_step(static_cast<std::uint64_t>(s.v[0]));
  h = mix_step(h ^ static_cast<std::uint64_t>(s.v[1]));
  h = mix_step(h ^ static_cast<std::uint64_t>(s.v[2]));
  return h;
}

Coord dist_inf(const Site& a, const Site& b) {
  Coord d = 0;
  for (int i = 0; i < 3; ++i) d = std::max(d, std::abs(a.v[i] - b.v[i]));
  return d;
}

Coord dist_l1(const Site& a, const Site& b) {
  Coord d = 0;
  for (int i = 0; i < 3; ++i) d += std::abs(a.v[i] - b.v[i]);
  return d;
}

LatticeBox LatticeBox::at_corner(const Site& c, std::int64_t side, int dim) {
  check_dim(dim);
  if (side < 1) throw std::invalid_argument("box side must be positive");
  LatticeBox b;
  b.corner = c;
  b.side = side;
  b.dim = dim;
  for (int i = dim; i < 3; ++i)
    if (c[i] != 0) throw std::invalid_argument("unused coordinates must be zero");
  return b;
}

LatticeBox LatticeBox::centered(const Site& c, std::int64_t side, int dim) {
  if (side % 2 != 0) throw std::invalid_argument("centered box needs even side");
  Site corner = c;
  for (int i = 0; i < dim; ++i) corner[i] = c[i] - side / 2;
  return at_corner(corner, side, dim);
}

bool LatticeBox::contains(const Site& s) const {
  for (int i = 0; i < dim; ++i)
    if (s[i] < lo(i) || s[i] >= hi(i)) return false;
  for (int i = dim; i < 3; ++i)
    if (s[i] != 0) return false;
  return true;
}

std::int64_t LatticeBox::volume() const {
  std::int64_t v = 1;
  for (int i = 0; i < dim; ++i) v *= side;
  return v;
}

std::vector<Site> LatticeBox::sites() const {
  std::vector<Site> out;
  out.reserve(static_cast<std::size_t>(volume()));
  Site s = corner;
  const Coord x1 = hi(0), y1 = dim > 1 ? hi(1) : corner[1] + 1,
              z1 = dim > 2 ? hi(2) : corner[2] + 1;
  for (Coord x = corner[0]; x < x1; ++x)
    for (Coord y = corner[1]; y < y1; ++y)
      for (Coord z = corner[2]; z < z1; ++z) {
        s.v = {x, y, z};
        out.push_back(s);
      }
  return out;
}

bool LatticeBox::operator<(const LatticeBox& o) const {
  if (corner != o.corner) return corner < o.corner;
  return side < o.side;
}

Region Region::from_sites(int dim, std::vector<Site> sites) {
  check_dim(dim);
  for (const Site& s : sites)
    for (int i = dim; i < 3; ++i)
      if (s[i] != 0)
        throw std::invalid_argument("site has nonzero coordinate beyond dimension");
  std::sort(sites.begin(), sites.end());
  sites.erase(std::unique(sites.begin(), sites.end()), sites.end());
  Region r;
  r.dim_ = dim;
  r.sites_ = std::move(sites);
  r.build_index();
  return r;
}

Region Region::of_box(const LatticeBox& b) {
  return from_sites(b.dim, b.sites());
}

void Region::build_index() {
  bounds_ = Bounds{};
  if (sites_.empty()) {
    use_grid_ = false;
    grid_.clear();
    hash_.clear();
    return;
  }
  for (int i = 0; i < 3; ++i) {
    bounds_.lo[i] = std::numeric_limits<Coord>::max();
    bounds_.hi[i] = std::numeric_limits<Coord>::min();
  }
  for (const Site& s : sites_)
    for (int i = 0; i < 3; ++i) {
      bounds_.lo[i] = std::min(bounds_.lo[i], s.v[i]);
      bounds_.hi[i] = std::max(bounds_.hi[i], s.v[i] + 1);
    }
  std::uint64_t vol = 1;
  bool overflow = false;
  for (int i = 0; i < 3; ++i) {
    std::uint64_t span = static_cast<std::uint64_t>(bounds_.hi[i] - bounds_.lo[i]);
    if (span != 0 && vol > (std::uint64_t(1) << 40) / span) overflow = true;
    vol *= span;
  }
  use_grid_ = !overflow && vol <= std::max<std::uint64_t>(1024, 8 * sites_.size());
  if (use_grid_) {
    grid_.assign(vol, 0);
    hash_.clear();
    const std::uint64_t sy = static_cast<std::uint64_t>(bounds_.hi[1] - bounds_.lo[1]);
    const std::uint64_t sz = static_cast<std::uint64_t>(bounds_.hi[2] - bounds_.lo[2]);
    for (std::size_t i = 0; i < sites_.size(); ++i) {
      const Site& s = sites_[i];
      std::uint64_t cell =
          ((static_cast<std::uint64_t>(s.v[0] - bounds_.lo[0]) * sy) +
           static_cast<std::uint64_t>(s.v[1] - bounds_.lo[1])) * sz +
          static_cast<std::uint64_t>(s.v[2] - bounds_.lo[2]);
      grid_[cell] = static_cast<std::uint32_t>(i) + 1;
    }
  } else {
    grid_.clear();
    std::size_t cap = 16;
    while (cap < 2 * sites_.size()) cap <<= 1;
    hash_.assign(cap, {0, 0});
    hash_mask_ = cap - 1;
    for (std::size_t i = 0; i < sites_.size(); ++i) {
      std::uint64_t k = site_key(sites_[i]);
      std::size_t p = k & hash_mask_;
      while (hash_[p].second != 0) p = (p + 1) & hash_mask_;
      hash_[p] = {k, static_cast<std::uint32_t>(i) + 1};
    }
  }
}

std::ptrdiff_t Region::index_of(const Site& s) const {
  if (sites_.empty()) return -1;
  for (int i = 0; i < 3; ++i)
    if (s.v[i] < bounds_.lo[i] || s.v[i] >= bounds_.hi[i]) return -1;
  if (use_grid_) {
    const std::uint64_t sy = static_cast<std::uint64_t>(bounds_.hi[1] - bounds_.lo[1]);
    const std::uint64_t sz = static_cast<std::uint64_t>(bounds_.hi[2] - bounds_.lo[2]);
    std::uint64_t cell =
        ((static_cast<std::uint64_t>(s.v[0] - bounds_.lo[0]) * sy) +
         static_cast<std::uint64_t>(s.v[1] - bounds_.lo[1])) * sz +
        static_cast<std::uint64_t>(s.v[2] - bounds_.lo[2]);
    std::uint32_t slot = grid_[cell];
    return slot == 0 ? -1 : static_cast<std::ptrdiff_t>(slot - 1);
  }
  std::uint64_t k = site_key(s);
  std::size_t p = k & hash_mask_;
  while (hash_[p].second != 0) {
    if (hash_[p].first == k && sites_[hash_[p].second - 1] == s)
      return static_cast<std::ptrdiff_t>(hash_[p].second - 1);
    p = (p + 1) & hash_mask_;
  }
  return -1;
}

bool Region::contains(const Site& s) const { return index_of(s) >= 0; }

bool Region::is_box() const {
  if (sites_.empty()) return false;
  std::uint64_t vol = 1;
  for (int i = 0; i < 3; ++i)
    vol *= static_cast<std::uint64_t>(bounds_.hi[i] - bounds_.lo[i]);
  return vol == sites_.size();
}

Region region_union(const Region& a, const Region& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  if (a.dim() != b.dim()) throw std::invalid_argument("dimension mismatch");
  std::vector<Site> s;
  s.reserve(a.size() + b.size());
  std::merge(a.sites().begin(), a.sites().end(), b.sites().begin(),
             b.sites().end(), std::back_inserter(s));
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return Region::from_sites(a.dim(), std::move(s));
}

Region region_intersect(const Region& a, const Region& b) {
  if (a.empty() || b.empty()) return a.empty() ? a : b;
  if (a.dim() != b.dim()) throw std::invalid_argument("dimension mismatch");
  std::vector<Site> s;
  std::set_intersection(a.sites().begin(), a.sites().end(), b.sites().begin(),
                        b.sites().end(), std::back_inserter(s));
  return Region::from_sites(a.dim(), std::move(s));
}

Region region_diff(const Region& a, const Region& b) {
  if (a.empty() || b.empty()) return a;
  if (a.dim() != b.dim()) throw std::invalid_argument("dimension mismatch");
  std::vector<Site> s;
  std::set_difference(a.sites().begin(), a.sites().end(), b.sites().begin(),
                      b.sites().end(), std::back_inserter(s));
  return Region::from_sites(a.dim(), std::move(s));
}

std::vector<LatticeBox> enumerate_blocks(const Region& r, std::int64_t scale,
                                         BlockFamily family) {
  if (scale < 1) throw std::invalid_argument("scale must be positive");
  if (r.empty()) return {};
  const int d = r.dim();
  std::int64_t step = scale, offset = 0;
  if (family == BlockFamily::shifted) {
    if (scale % 16 != 0)
      throw std::invalid_argument("shifted family needs scale divisible by 16");
    step = scale / 16;
  } else if (family == BlockFamily::staggered) {
    if (scale % 2 != 0)
      throw std::invalid_argument("staggered family needs even scale");
    offset = scale / 2;
  }
  // Corner c (on offset + step*Z^d) meets the region iff some site x has
  // c in [x-scale+1, x] per axis.
  std::unordered_set<Site, SiteHash> corners;
  std::array<std::vector<Coord>, 3> axis_vals;
  for (const Site& x : r.sites()) {
    for (int i = 0; i < d; ++i) {
      axis_vals[i].clear();
      Coord first = offset + step * floor_div(x[i] - scale + 1 - offset + step - 1, step);
      if (first < x[i] - scale + 1) first += step;
      for (Coord c = first; c <= x[i]; c += step) axis_vals[i].push_back(c);
    }
    Site c;
    for (Coord a : axis_vals[0]) {
      c[0] = a;
      if (d == 1) { corners.insert(c); continue; }
      for (Coord b : axis_vals[1]) {
        c[1] = b;
        if (d == 2) { corners.insert(c); continue; }
        for (Coord e : axis_vals[2]) {
          c[2] = e;
          corners.insert(c);
        }
      }
    }
  }
  std::vector<Site> sorted(corners.begin(), corners.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<LatticeBox> out;
  out.reserve(sorted.size());
  for (const Site& c : sorted) out.push_back(LatticeBox::at_corner(c, scale, d));
  return out;
}

Region boundary(const Region& r, BoundarySide side) {
  if (r.empty()) return r;
  const int d = r.dim();
  std::vector<Site> out;
  for (const Site& s : r.sites()) {
    for (int i = 0; i < d; ++i)
      for (int dir = -1; dir <= 1; dir += 2) {
        Site n = s;
        n[i] += dir;
        if (!r.contains(n)) {
          out.push_back(side == BoundarySide::inner ? s : n);
          if (side == BoundarySide::inner) goto next_site;
        }
      }
  next_site:;
  }
  return Region::from_sites(d, std::move(out));
}

std::vector<Region> connected_components(const Region& r, Adjacency adj) {
  if (r.empty()) return {};
  const int d = r.dim();
  std::vector<Site> offsets;
  if (adj == Adjacency::graph) {
    for (int i = 0; i < d; ++i)
      for (int dir = -1; dir <= 1; dir += 2) {
        Site o;
        o[i] = dir;
        offsets.push_back(o);
      }
  } else {
    Site o;
    const int r1 = d > 1 ? 1 : 0, r2 = d > 2 ? 1 : 0;
    for (Coord x = -1; x <= 1; ++x)
      for (Coord y = -r1; y <= r1; ++y)
        for (Coord z = -r2; z <= r2; ++z) {
          if (x == 0 && y == 0 && z == 0) continue;
          o.v = {x, y, z};
          offsets.push_back(o);
        }
  }
  std::vector<char> seen(r.size(), 0);
  std::vector<Region> out;
  std::vector<std::size_t> stack;
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (seen[i]) continue;
    std::vector<Site> comp;
    stack.assign(1, i);
    seen[i] = 1;
    while (!stack.empty()) {
      std::size_t j = stack.back();
      stack.pop_back();
      comp.push_back(r.site(j));
      for (const Site& o : offsets) {
        Site n = r.site(j);
        for (int k = 0; k < 3; ++k) n[k] += o[k];
        std::ptrdiff_t idx = r.index_of(n);
        if (idx >= 0 && !seen[idx]) {
          seen[idx] = 1;
          stack.push_back(static_cast<std::size_t>(idx));
        }
      }
    }
    out.push_back(Region::from_sites(d, std::move(comp)));
  }
  return out;
}

Region enlarge(const Region& r, std::int64_t scale, std::int64_t threshold) {
  if (scale < 1) throw std::invalid_argument("scale must be positive");
  if (threshold < 0) threshold = scale;
  if (r.empty()) return r;
  const int d = r.dim();
  // Hull distance < threshold iff the region meets the block inflated by
  // threshold: corner c qualifies iff some site lies in [c-T, c+scale-1+T]^d,
  // i.e. c in [x-scale+1-T, x+T] for some site x, per axis.
  std::unordered_set<Site, SiteHash> corners;
  const std::int64_t T = threshold;
  for (const Site& x : r.sites()) {
    std::array<std::pair<Coord, Coord>, 3> rng;
    for (int i = 0; i < d; ++i) {
      Coord lo = scale * floor_div(x[i] - scale + 1 - T + scale - 1, scale);
      if (lo < x[i] - scale + 1 - T) lo += scale;
      rng[i] = {lo, x[i] + T};
    }
    Site c;
    for (Coord a = rng[0].first; a <= rng[0].second; a += scale) {
      c[0] = a;
      if (d == 1) { corners.insert(c); continue; }
      for (Coord b = rng[1].first; b <= rng[1].second; b += scale) {
        c[1] = b;
        if (d == 2) { corners.insert(c); continue; }
        for (Coord e = rng[2].first; e <= rng[2].second; e += scale) {
          c[2] = e;
          corners.insert(c);
        }
      }
    }
  }
  std::vector<Site> sites;
  sites.reserve(corners.size() * static_cast<std::size_t>(scale));
  for (const Site& c : corners) {
    LatticeBox b = LatticeBox::at_corner(c, scale, d);
    std::vector<Site> bs = b.sites();
    sites.insert(sites.end(), bs.begin(), bs.end());
  }
  return Region::from_sites(d, std::move(sites));
}

IntExt int_ext_decompose(const Region& r) {
  IntExt out;
  if (r.empty()) return out;
  const int d = r.dim();
  Bounds b = r.bounds();
  for (int i = 0; i < d; ++i) {
    b.lo[i] -= 2;
    b.hi[i] += 2;
  }
  std::vector<Site> complement;
  Site s;
  const Coord y0 = d > 1 ? b.lo[1] : 0, y1 = d > 1 ? b.hi[1] : 1;
  const Coord z0 = d > 2 ? b.lo[2] : 0, z1 = d > 2 ? b.hi[2] : 1;
  for (Coord x = b.lo[0]; x < b.hi[0]; ++x)
    for (Coord y = y0; y < y1; ++y)
      for (Coord z = z0; z < z1; ++z) {
        s.v = {x, y, z};
        if (!r.contains(s)) complement.push_back(s);
      }
  // The set is read with closed (hull) connectivity, so its complement
  // decomposes under graph connectivity: a diagonal pinch between two hull
  // boxes is blocked in R^d by the shared corner point.
  Region comp = Region::from_sites(d, std::move(complement));
  std::vector<Region> comps = connected_components(comp, Adjacency::graph);
  std::vector<Site> exterior;
  for (const Region& c : comps) {
    bool touches = false;
    for (const Site& x : c.sites()) {
      for (int i = 0; i < d && !touches; ++i)
        if (x[i] == b.lo[i] || x[i] == b.hi[i] - 1) touches = true;
      if (touches) break;
    }
    if (touches) {
      exterior.insert(exterior.end(), c.sites().begin(), c.sites().end());
    } else {
      out.interiors.push_back(c);
    }
  }
  out.exterior = Region::from_sites(d, std::move(exterior));
  return out;
}

Region closed_hull(const Region& r, std::int64_t scale, std::int64_t threshold) {
  Region hull = enlarge(r, scale, threshold);
  IntExt ie = int_ext_decompose(r);
  for (const Region& in : ie.interiors) hull = region_union(hull, in);
  return hull;
}

Scales derive_scales(double epsilon) {
  if (!(epsilon > 0.0) || !(epsilon < 1.0))
    throw std::invalid_argument("epsilon must lie in (0,1)");
  Scales sc;
  sc.epsilon = epsilon;
  const long double mis = -std::log(static_cast<long double>(epsilon));
  const long double ell_raw = 1.0L / (epsilon * mis * mis * mis * mis);
  const long double L_raw = (mis * mis * mis * mis) / epsilon;
  const long double le = std::floor(std::log2(ell_raw));
  const long double lL = std::ceil(std::log2(L_raw));
  if (le > 62 || lL > 62) throw NumericError("scales exceed 2^62");
  auto pow2 = [](long double e) -> std::int64_t {
    if (e < 1) return 0;  // caller clamps
    return std::int64_t(1) << static_cast<int>(e);
  };
  sc.ell = pow2(le);
  sc.L = pow2(lL);
  if (sc.ell < 2) {
    sc.ell = 2;
    sc.clamped = true;
  }
  if (sc.L < 2) {
    sc.L = 2;
    sc.clamped = true;
  }
  if (sc.ell > sc.L) {
    sc.L = sc.ell;
    sc.clamped = true;
  }
  return sc;
}

}  // namespace rfo
