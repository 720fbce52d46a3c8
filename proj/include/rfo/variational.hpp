#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "rfo/fields.hpp"
#include "rfo/geometry.hpp"
#include "rfo/spin.hpp"

namespace rfo {

// sin(x)/x, by series below |x| = 1e-4.
double sinc(double x);

struct MaximizerResult {
  SpinConfig phi;      // angles on region + its outer boundary (frozen there)
  Region region;       // the optimized sites
  double objective = 0;
  double residual = 0;  // sup-norm of the stationarity defect
  int iterations = 0;   // flow steps + linearized sweeps
  bool converged = false;
  std::vector<double> objective_trace;  // one entry per step, non-decreasing
  std::vector<double> residual_trace;   // parallel to objective_trace
};

// Maximize the cos-edge + potential functional over angles on region, with
// tau fixed on the outer boundary. Pull-in flow (explicit Euler, step 0.1)
// drives the iterate into [-pi/6, pi/6]; then damped sweeps of the linearized
// conductance system until the stationarity defect falls below tol.
// Requires sup|tau| <= pi/6, m >= 0 on region, and tau covering the whole
// outer boundary; throws on violation or when the budget runs out.
MaximizerResult maximize_K(const Region& region, const PotentialField& m,
                           const SpinConfig& tau, double tol = 1e-10,
                           int max_iter = 400,
                           const SpinConfig* init = nullptr);

// sup over region of |sum_{y~x} sin(phi_x - phi_y) + (m_x/4) sin(2 phi_x)|,
// neighbor values outside region read from tau.
double stationarity_residual(const SpinConfig& phi, const Region& region,
                             const PotentialField& m, const SpinConfig& tau);

// iteration, objective, residual per line.
void write_trace_csv(const MaximizerResult& res, std::ostream& out);

struct DecayProfile {
  std::vector<double> shell_max;   // max |phi| at each sup-distance from anchors
  double rate = 0;                 // least-squares exponential decay rate
  double monotone_fraction = 0;    // share of consecutive shells not increasing
};

// Shell-wise sup of the maximizer by distance from the anchor set. Requires a
// converged result.
DecayProfile decay_profile(const MaximizerResult& res, const Region& region,
                           const Region& anchors);

struct DefectParams {
  double mu = 0;     // pointwise tilt depth on the witness set
  double delta = 0;  // block-average closeness to the first axis
  // Witness thresholds: diameter >= side/diam_div, distance to the box
  // complement >= side/dist_div.
  std::int64_t diam_div = 4;
  std::int64_t dist_div = 4;
};

struct DefectReport {
  bool found = false;
  double average = 0;  // block-averaged first spin component
  Region witness;      // largest qualifying tilted component, empty if none
};

// A defect: the block average hugs the first axis (>= 1-delta) while a
// graph-connected set deep inside the box stays tilted away (<= 1-mu), with
// diameter at least side/diam_div and distance to the complement at least
// side/dist_div.
DefectReport defect_detect(const SpinConfig& sigma, const LatticeBox& q,
                           const DefectParams& p);

struct DefectEnergy {
  double energy = 0;      // best feasible edge energy found
  bool converged = false;  // some start met the gradient tolerance
  int iterations = 0;      // gradient steps spent over all starts
};

// Upper-bound oracle for the least edge energy on the centered box of the
// given radius subject to sigma_0 . e1 <= 1-mu at the origin and block
// average . e1 >= 1-delta: penalized gradient descent, multi-start.
DefectEnergy min_defect_energy(std::int64_t radius, int dim,
                               const DefectParams& p, int starts = 3,
                               std::uint64_t seed = 1);

}  // namespace rfo
