#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace rfo {

using Coord = std::int64_t;

// Lattice site in dimension d <= 3; unused coordinates stay zero so that
// ordering and hashing are dimension-agnostic.
struct Site {
  std::array<Coord, 3> v{0, 0, 0};

  Site() = default;
  explicit Site(Coord x) : v{x, 0, 0} {}
  Site(Coord x, Coord y) : v{x, y, 0} {}
  Site(Coord x, Coord y, Coord z) : v{x, y, z} {}

  Coord& operator[](int i) { return v[static_cast<std::size_t>(i)]; }
  Coord operator[](int i) const { return v[static_cast<std::size_t>(i)]; }
  bool operator==(const Site&) const = default;
  bool operator<(const Site& o) const { return v < o.v; }  // lexicographic
};

std::uint64_t site_key(const Site& s);

struct SiteHash {
  std::size_t operator()(const Site& s) const {
    return static_cast<std::size_t>(site_key(s));
  }
};

// l-infinity and l-1 distances between sites.
Coord dist_inf(const Site& a, const Site& b);
Coord dist_l1(const Site& a, const Site& b);

enum class BoxStyle { corner, centered };

// Axis-aligned box of side s: corner style c + {0..s-1}^d, centered style
// c + {-s/2..s/2-1}^d (even s only). Stored corner-anchored.
struct LatticeBox {
  Site corner;
  std::int64_t side = 1;
  int dim = 1;

  static LatticeBox at_corner(const Site& c, std::int64_t side, int dim);
  static LatticeBox centered(const Site& c, std::int64_t side, int dim);

  Coord lo(int axis) const { return corner[axis]; }
  Coord hi(int axis) const { return corner[axis] + side; }  // exclusive
  bool contains(const Site& s) const;
  std::int64_t volume() const;
  std::vector<Site> sites() const;  // lexicographic
  bool operator==(const LatticeBox&) const = default;
  bool operator<(const LatticeBox& o) const;
};

struct Bounds {
  std::array<Coord, 3> lo{0, 0, 0};
  std::array<Coord, 3> hi{0, 0, 0};  // exclusive
};

// Finite set of sites with a fixed dimension. Sites are kept sorted
// (lexicographic), so iteration order is deterministic; membership is O(1)
// through either a dense presence grid (compact bounding boxes) or a hash map.
class Region {
 public:
  Region() = default;
  static Region from_sites(int dim, std::vector<Site> sites);
  static Region of_box(const LatticeBox& b);

  int dim() const { return dim_; }
  std::size_t size() const { return sites_.size(); }
  bool empty() const { return sites_.empty(); }
  const std::vector<Site>& sites() const { return sites_; }
  const Site& site(std::size_t i) const { return sites_[i]; }
  bool contains(const Site& s) const;
  // Position in sorted order, -1 if absent.
  std::ptrdiff_t index_of(const Site& s) const;
  Bounds bounds() const { return bounds_; }
  bool is_box() const;  // fills its bounding box exactly

  bool operator==(const Region& o) const {
    return dim_ == o.dim_ && sites_ == o.sites_;
  }

 private:
  void build_index();

  int dim_ = 0;
  std::vector<Site> sites_;
  Bounds bounds_;
  // Dense index: slot+1 per bounding-box cell, 0 = absent. Used when the
  // bounding box is not much larger than the site count.
  std::vector<std::uint32_t> grid_;
  bool use_grid_ = false;
  std::vector<std::pair<std::uint64_t, std::uint32_t>> hash_;  // open-addressed
  std::uint64_t hash_mask_ = 0;
};

Region region_union(const Region& a, const Region& b);
Region region_intersect(const Region& a, const Region& b);
Region region_diff(const Region& a, const Region& b);

// Standard: corners in scale*Z^d. Shifted: corners in (scale/16)*Z^d (the
// orbit of scale*Z^d under offsets (scale/16)*{-32..32}^d). Staggered:
// corners in scale*Z^d + scale/2.
enum class BlockFamily { standard, shifted, staggered };

// Every block of the family meeting the region, once, sorted by corner.
std::vector<LatticeBox> enumerate_blocks(const Region& r, std::int64_t scale,
                                         BlockFamily family);

enum class BoundarySide { inner, outer };
Region boundary(const Region& r, BoundarySide side);

// graph: l1-adjacency (2d neighbors). closed: l-infinity adjacency, i.e. the
// closed unit cubes around the sites share a point.
enum class Adjacency { graph, closed };
std::vector<Region> connected_components(const Region& r, Adjacency adj);

// Union of standard scale-blocks whose closed unit-cube hull lies at
// l-infinity distance < threshold from the hull of r. threshold < 0 means
// threshold = scale.
Region enlarge(const Region& r, std::int64_t scale, std::int64_t threshold = -1);

struct IntExt {
  Region exterior;                 // clipped to a frame 2 sites beyond r
  std::vector<Region> interiors;   // sorted by least site
};
// Complement components (graph adjacency — the hull reading of r pinches
// diagonal gaps shut) within the inflated frame; the unique component
// touching the frame border is the exterior.
IntExt int_ext_decompose(const Region& r);

// c(A) = enlarge(A, scale, threshold) united with the interior components.
Region closed_hull(const Region& r, std::int64_t scale,
                   std::int64_t threshold = -1);

struct Scales {
  double epsilon = 0;
  std::int64_t ell = 0;
  std::int64_t L = 0;
  bool clamped = false;
};

// ell = 2^floor(log2(1/(eps*|log eps|^4))), L = 2^ceil(log2(|log eps|^4/eps)),
// natural log, both clamped below at 2 (flag records any clamping, including
// the ell > L inversion that occurs for eps > 1/e, where L is raised to ell).
Scales derive_scales(double epsilon);

}  // namespace rfo
