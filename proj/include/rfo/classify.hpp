#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "rfo/fields.hpp"
#include "rfo/geometry.hpp"
#include "rfo/spin.hpp"

namespace rfo {

// Every asymptotic threshold is a parameter whose default (NaN = unset) is
// the formula value; the calibrated factory shrinks the scan geometry so that
// desk-size lattices classify in sensible time.
struct ClassifierParams {
  double epsilon = 0.1;
  double xi = 0.25;  // magnetization band width, in (0,1)
  std::int64_t ell = 8, L = 32;
  double A = 1e-3, B = 1e3;  // potential-density window

  std::int64_t psi_radius = -1;  // corner window for the small labels; -1: 5*ell
  std::int64_t psi_stride = -1;  // corner lattice step; -1: max(1, ell/2)
  std::int64_t big_radius = -1;  // block window for the coarse label; -1: 2*L
  std::int64_t shift_range = -1;  // family (L0/16)*{-k..k}^d; -1: 32

  std::vector<double> nice_lambdas;     // empty: {0, 1/(2 L0)}
  std::vector<double> regular_lambdas;  // empty: {0, ln(L0)^8 / L0^2}
  Bc pairing_bc = Bc::dirichlet;        // field used by the block statistics

  static constexpr double kUnset = std::numeric_limits<double>::quiet_NaN();
  double psi0_energy = kUnset;        // formula: eps^2 * |ln eps| * ell^d
  double avg_window_radius = kUnset;  // formula: min(ln(L0)^90, L0/4)
  double sup_field = kUnset;          // formula: eps * L0^(1/2) * |ln eps|^30
  bool sup_field_root_negative = false;  // selects L0^(-1/2) in the above
  double sup_grad = kUnset;           // formula: eps * |ln eps|^30
  double sup_alpha = kUnset;          // formula: |ln eps|^30
  double mean_alpha = kUnset;         // formula: |ln eps|^30
  double good_density = kUnset;       // formula: |ln eps|^-55 (per block)
  double rr1_cut = kUnset, rr1_rhs = kUnset;  // eps^2|ln eps|; eps^(9/4)
  double rr2_cut = kUnset, rr2_rhs = kUnset;
  double rr4_cut = kUnset, rr4_rhs = kUnset;
  double rr5_rhs = kUnset;

  static ClassifierParams defaults(double epsilon);
  static ClassifierParams calibrated(double epsilon, std::int64_t ell,
                                     std::int64_t L);
};

// Windowed potential-density event: the r-window average of the incident
// squared-gradient potential clears A*eps^2 at every site deep enough inside
// the box. Sites with no eligibility constraint make the event vacuous.
struct AvgPotentialWindow {
  bool holds = true;
  double margin = std::numeric_limits<double>::infinity();
  Site worst{0, 0, 0};
};
AvgPotentialWindow avg_potential_event(const DisorderRealization& real,
                                       const LatticeBox& Q, std::int64_t r,
                                       double A, double lambda);

struct ConditionCheck {
  std::string name;
  double lambda = 0;
  Bc bc = Bc::dirichlet;
  double value = 0;
  double low = -std::numeric_limits<double>::infinity();
  double high = std::numeric_limits<double>::infinity();
  bool pass = false;
};

struct BoxReport {
  LatticeBox box;
  std::vector<ConditionCheck> checks;
  bool nice = false;
};

// All six per-box conditions over the mass list and both boundary conditions;
// the box side is the classification scale.
BoxReport box_nice(const DisorderRealization& real, const LatticeBox& Q,
                   const ClassifierParams& p);

// Goodness of a standard block: every member of its shift family is nice.
// Cached; shifted/staggered blocks are good when they intersect a good
// standard block.
class XiClassifier {
 public:
  XiClassifier(const DisorderRealization& real, std::int64_t L0,
               ClassifierParams p);
  bool good_standard(const Site& corner);
  int xi(const LatticeBox& q);
  const DisorderRealization& realization() const { return *real_; }
  std::int64_t scale() const { return L0_; }
  const ClassifierParams& params() const { return params_; }

 private:
  const DisorderRealization* real_;
  std::int64_t L0_;
  ClassifierParams params_;
  std::map<Site, bool> cache_;
};

// Small-scale labels around one site; the batch variant computes the same
// values for a whole region using prefix-sum grids. Scan boxes that do not
// fit inside the configuration's domain are skipped; a site whose window has
// no admissible box gets energy label 1 (vacuous) and band label 0.
int psi0_site(const SpinConfig& sigma, const Site& z,
              const ClassifierParams& p);
int psi1_site(const SpinConfig& sigma, const Site& z,
              const ClassifierParams& p);
int psi_site(const SpinConfig& sigma, const Site& z,
             const ClassifierParams& p);

struct PhaseField {
  Region domain;
  std::vector<std::int8_t> psi0, psi1, psi;

  int psi_at(const Site& s) const;
};
PhaseField phase_labels(const SpinConfig& sigma, const Region& domain,
                        const ClassifierParams& p);

// Coarse block label: +/-1 when every small label in every block within the
// window agrees; block-constant by construction. The region must be
// L-measurable and sigma must cover the scan halo.
int big_label_site(const SpinConfig& sigma, const Site& z,
                   const ClassifierParams& p);

struct BlockPhaseField {
  Region domain;
  std::vector<std::int8_t> label;

  int at(const Site& s) const;
};
BlockPhaseField big_phase_labels(const SpinConfig& sigma, const Region& lambda,
                                 const ClassifierParams& p);

struct PairingCheck {
  std::string name;
  std::int64_t scale = 0;
  double lambda = 0;
  double lhs = 0, rhs = 0;
  bool pass = false;
};

struct RegionReport {
  Region region;
  bool good = false;
  double bad_blocks = 0, good_rhs = 0;
  std::vector<PairingCheck> checks;
  std::map<std::int64_t, bool> regular;  // per scale, on the enlargement
  bool clean = false;
};

// Region statistics: block-density of bad blocks (good), the block-statistic
// pairings at scales {ell/2, ell, L} on the enlargement (regular), and their
// conjunction (clean). Y must be connected and L-measurable.
RegionReport region_taxonomy(const DisorderRealization& real, const Region& Y,
                             const ClassifierParams& p);

}  // namespace rfo
