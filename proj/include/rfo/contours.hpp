#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "rfo/classify.hpp"
#include "rfo/geometry.hpp"
#include "rfo/spin.hpp"

namespace rfo {

// A coarse interface piece: an L-measurable, closed-connected spine carrying
// the small-scale phase labels. Extracted contours are concrete (spines are
// maximal zero-label components of the configuration); freestanding instances
// are abstract and may be unrealizable.
struct Contour {
  Region spine;
  std::vector<std::int8_t> labels;  // parallel to spine.sites()
  std::int64_t scaleL = 0;
  // The enlargement sticks out of the extraction window; surgery refuses
  // such contours (the boundary data is not ours to change).
  bool touches_boundary = false;

  int label_at(const Site& s) const;
};

// Closed-connected components of the zero set of the coarse label, ordered by
// least site, each carrying the small labels on its spine. The configuration
// must cover the window's scan halo.
std::vector<Contour> extract_contours(const SpinConfig& sigma,
                                      const Region& lambda,
                                      const ClassifierParams& p);

// Phase labels on the enlargement, reconstructed from the stored spine labels
// alone: zero coarse label on the spine, and off the spine the label of the
// nearest spine site (which unanimity forces to be the common sign).
struct RecoveredLabels {
  Region domain;  // the enlargement of the spine
  std::vector<std::int8_t> big, small;
};
RecoveredLabels recover_labels(const Contour& g, std::int64_t ell);

// Neither spine meets the other's enlargement, and the reconstructed labels
// agree where the enlargements overlap.
bool compatible(const Contour& a, const Contour& b, std::int64_t ell);

struct ContourGeometry {
  Region delta;                    // enlargement of the spine
  Region delta_ext;                // part in the unbounded complement piece
  std::vector<Region> delta_in;    // parts in the holes, one per hole
  Region hull;                     // enlargement plus the holes
  std::int64_t n_large = 0;        // |delta| in units of L-blocks
  std::int64_t n_small = 0;        // |delta| in units of ell-blocks
};
ContourGeometry contour_geometry(const Contour& g, std::int64_t ell);

// {x in r : dist_inf(x, outer boundary of r) >= depth}.
Region erode_region(const Region& r, Coord depth);

// Least superset of seed whose outer boundary satisfies ok, by absorbing
// violating boundary sites; sites outside universe are never absorbed.
// Idempotent, and minimal among supersets closed under the absorption rule.
Region grow_until(const Region& seed, const Region& universe,
                  const std::function<bool(const Site&)>& ok);

// The collar of a contour: the enlargement minus the spine, inside the
// volume, split and refined into the working sets of the surgery. Every set
// is a deterministic function of (contour, configuration, volume, disorder).
struct CollarDecomposition {
  Region collar, collar_plus, collar_minus;  // split by the coarse label
  Region mid_band;                    // deep sites: far from the collar's rim
  Region mid_blocks;                  // half-ell block cover of the deep band
  Region mid_plus, mid_minus;
  Region bad_blocks;                  // not-good L-blocks inside the collar
  Region dirty_plus, dirty_minus;     // 5L halos of the bad blocks, by sign
  Region deep12_plus, deep12_minus;   // dirty cores at depth L/12
  Region deep16_plus, deep16_minus;   // dirty cores at depth L/16
  Region work_plus, work_minus;       // collar parts minus the L/12 cores
  Region anchor_plus, anchor_minus;   // depth-L/8 sets seeding the growth
  Region inner_band;                  // interpolation band (capped depth)
  std::vector<Region> band_components;
  std::vector<Region> band_mid;       // per component, its deep-block part
  // Grown sets and their working parts; filled by the optimization stage.
  Region f_plus, f_minus, g_plus, g_minus;
};
CollarDecomposition collar_decomposition(const Contour& g,
                                         const SpinConfig& sigma,
                                         const Region& lambdaN,
                                         XiClassifier& xi);

// The enlargement is clean and the hull is not strictly inside the dirty set.
bool star_clean(const Contour& g, const DisorderRealization& real,
                const Region& dirty, const ClassifierParams& p);

}  // namespace rfo
