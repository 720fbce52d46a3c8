#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "rfo/classify.hpp"
#include "rfo/contours.hpp"
#include "rfo/fields.hpp"
#include "rfo/geometry.hpp"
#include "rfo/spin.hpp"
#include "rfo/variational.hpp"

namespace rfo {

// Boundary data that is the first coordinate vector on every crossing edge.
BoundaryCondition aligned_bc(int dim);

struct GroundResult {
  double value = 0;
  SpinConfig argmax;
  double residual = 0;  // sup |gradient| at the reported configuration
  int iterations = 0;   // total, over all starts
  bool flagged = false;  // some start ran out of budget before the target
};

// Best value of the region functional under bc found by multi-start gradient
// ascent: the aligned constant, the internal-field profile, keyed random
// angles, and optionally a warm start.
GroundResult ground_energy(const DisorderRealization& real, const Region& r,
                           const BoundaryCondition& bc, double tol = 1e-8,
                           int max_iter = 20000, int starts = 4,
                           std::uint64_t seed = 1,
                           const SpinConfig* warm = nullptr);

GroundResult box_ground_energy(const DisorderRealization& real,
                               const LatticeBox& Q,
                               const BoundaryCondition& bc, double tol = 1e-8,
                               int max_iter = 20000, int starts = 4,
                               std::uint64_t seed = 1);

// Half-L enlargement of the spine inside the volume; the surgery inserts its
// stitched block state there.
Region half_enlargement(const Contour& g, const Region& lambdaN,
                        std::int64_t ell);

struct BulkState {
  Region delta_bar;
  SpinConfig sigma;                // on delta_bar
  std::vector<LatticeBox> blocks;  // half-ell partition of delta_bar
  std::vector<int> xi;             // per-block classifier bit
  double boundary_angle_sup = 0;   // max ramped angle on inner block rims
};

// Stitched approximate ground state: aligned on failed blocks, the damped
// internal-field profile on passing ones, ramped to near-alignment across
// block boundaries.
BulkState bulk_ground_state(const DisorderRealization& real, const Contour& g,
                            const Region& lambdaN, XiClassifier& xi_half);

struct BulkAudit {
  double block_sum = 0;     // sum of per-block best values
  double warm_sum = 0;      // same functionals at the stitched state itself
  double value = 0;         // whole-region value of the stitched state
  double gap = 0;           // block_sum - value, non-negative by construction
  double cross_energy = 0;  // exact inter-block edge energy
  double stitch_bound = 0;  // per-edge worst-case estimate of the gap
  int flagged_blocks = 0;
};

// Per-block ground searches (warm-started from the stitched state, so the
// gap is non-negative up to float noise) against the direct evaluation.
BulkAudit bulk_energy_audit(const DisorderRealization& real,
                            const BulkState& bulk, const Region& lambdaN,
                            double tol = 1e-8, int max_iter = 20000,
                            std::uint64_t seed = 1);

struct StageChange {
  SpinConfig sigma;   // configuration after the stage, on the input's region
  Region changed;     // sites whose angle differs from the input
  double delta = 0;   // volume energy difference, after minus before
  bool flagged = false;
  std::string note;
};

struct Mod1Result {
  StageChange stage;
  Region a_plus, a_minus;  // reflection supports grown from the collar signs
};

// Reflect misaligned spins across the second coordinate axis on the grown
// supports. Exactly monotone: no edge energy increases and the field term is
// untouched, so the volume energy cannot drop. Flags growth that escapes the
// one-L envelope of its collar side.
Mod1Result mod1_reflect(const SpinConfig& sigma, const CollarDecomposition& cd,
                        const Region& lambdaN,
                        const DisorderRealization& real, std::int64_t L);

// Scale angles toward exact alignment on the dirty halos: zero ramp weight on
// the depth-L/16 cores, full weight at distance L/16 outward. Identity off
// the halos.
StageChange mod2_damp(const SpinConfig& s1, const CollarDecomposition& cd,
                      const Region& lambdaN, const DisorderRealization& real,
                      std::int64_t L);

struct Mod3Result {
  StageChange stage;
  GreenField green_plus, green_minus;   // massive fields on the work sets
  MaximizerResult opt_plus, opt_minus;  // ascents on the grown cores
  double tau_sup = 0;                   // largest boundary datum used
};

// Change variables through the massive field on each work set, grow the
// anchor until the transformed angles are inside the concavity band, maximize
// the transformed functional there, and invert. Fills the grown sets of the
// decomposition. Throws when the field leaves the small-angle gate; flags
// growth that leaves the rim envelope.
Mod3Result mod3_optimize(const SpinConfig& s2, CollarDecomposition& cd,
                         const Region& lambdaN,
                         const DisorderRealization& real, std::int64_t L,
                         double tol = 1e-10);

struct Mod4Result {
  StageChange stage;
  double rim_sup_plus = 0;   // sup distance to alignment on the deep-set rims
  double rim_sup_minus = 0;
};

// Ramp angles to exact alignment on the rings around the per-component deep
// blocks, with the square-root-of-ell ramp, component by component on the
// interpolation band.
Mod4Result mod4_interpolate(const SpinConfig& s3, const CollarDecomposition& cd,
                            const Region& lambdaN,
                            const DisorderRealization& real, std::int64_t ell);

struct GlueResult {
  StageChange stage;               // final state against the stage-4 input
  int sign = 0;
  std::vector<Region> reflected;   // interior components reflected whole
};

// Keep the exterior, reflect interior components whose label disagrees with
// the requested sign, and insert the bulk state (its reflection for the minus
// sign) on the half-L enlargement. Rejects a sign that disagrees with the
// label on the exterior boundary component.
GlueResult glue(const SpinConfig& sigma_cc, const Contour& g,
                const BulkState& bulk, int sign, const Region& lambdaN,
                const DisorderRealization& real, std::int64_t ell);

struct EnergyGain {
  double delta = 0;  // volume energy of the output minus the input
  std::vector<LatticeBox> a1;  // standard blocks with oversized edge energy
  std::vector<LatticeBox> a2;  // staggered blocks with oversized edge energy
  std::vector<LatticeBox> a3;  // standard blocks with depressed alignment
  std::array<double, 3> attribution{};  // per family: headroom left in its boxes
  std::int64_t n_large = 0;             // enlargement size in L-blocks
};

// Direct volume-energy comparison plus the bad-box families on the block
// partitions of the half-L enlargement. Attribution sums the per-box gap
// between the best reachable value and the input's value; it is skipped
// (zeros) unless requested, since it runs a ground search per box.
EnergyGain energy_gain(const SpinConfig& sigma, const SpinConfig& s_out,
                       const Region& lambdaN, const DisorderRealization& real,
                       const Contour& g, const ClassifierParams& p,
                       bool with_attribution = false, std::uint64_t seed = 1);

struct SurgeryOptions {
  double k_tol = 1e-10;          // stationarity target of the stage-3 ascent
  bool with_attribution = false;
  bool keep_stages = true;       // false drops intermediate configurations
  std::uint64_t seed = 1;
};

struct SurgeryTrace {
  int sign = 0;
  SpinConfig input, s1, s2, s3, s_cc, final_s;  // stages (when kept)
  BulkState bulk;
  CollarDecomposition collar;
  std::array<double, 5> deltas{};        // four modifications, then the glue
  std::array<std::int64_t, 5> modified{};
  double total_delta = 0;        // direct evaluation, final against input
  double bookkeeping_gap = 0;    // |sum of stage deltas - total_delta|
  double boundary_angle_sup = 0;
  double rim_sup_plus = 0, rim_sup_minus = 0;
  double tau_sup = 0;
  bool flagged = false;
  std::vector<std::string> notes;
  EnergyGain gain;
};

// The whole pipeline on one contour: decomposition, the four modifications,
// the bulk state, the glue with the exterior-matching sign, and the direct
// energy comparison. Stage deltas must re-add to the direct difference.
// Refuses contours whose enlargement left the extraction window.
SurgeryTrace run_surgery(const SpinConfig& sigma, const Contour& g,
                         const Region& lambdaN,
                         const DisorderRealization& real,
                         const ClassifierParams& p,
                         const SurgeryOptions& opt = {});

// Independent pipelines, one per contour, over a thread pool. Results are in
// input order and identical to the sequential run.
std::vector<SurgeryTrace> run_surgery_batch(
    const SpinConfig& sigma, const std::vector<Contour>& contours,
    const Region& lambdaN, const DisorderRealization& real,
    const ClassifierParams& p, const SurgeryOptions& opt = {},
    int threads = 1);

// Single-line-item JSON summary: sizes, per-stage deltas and counts, flags.
std::string surgery_trace_json(const SurgeryTrace& t);

}  // namespace rfo
