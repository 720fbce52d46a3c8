#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "rfo/fields.hpp"
#include "rfo/geometry.hpp"

namespace rfo {

// Canonical angle representative in (-pi, pi].
double wrap_angle(double a);

// Representative of theta_y - theta_x in (-pi, pi].
double wrapped_gradient(double theta_x, double theta_y);

struct SpinConfig {
  Region region;
  std::vector<double> theta;  // canonical representatives, parallel to sites

  static SpinConfig constant(const Region& r, double angle);
  static SpinConfig from_angles(const Region& r, std::vector<double> angles);
  double at(const Site& s) const;
  double at_or(const Site& s, double fallback) const;
};

struct BoundaryCondition {
  enum class Kind { fixed, free, ext };
  Kind kind = Kind::free;
  SpinConfig data;  // fixed: angles on the outer boundary
  Region inside;    // ext: crossing edges into this region are dropped,
                    // the rest see the first coordinate vector

  static BoundaryCondition free_bc();
  static BoundaryCondition fixed_bc(SpinConfig on_boundary);
  static BoundaryCondition ext_bc(Region inside);
};

// Sum over edges inside region of the squared Euclidean spin difference.
double dirichlet_energy(const SpinConfig& sigma, const Region& region);

// Minus the energy functional (the maximized quantity): -1/2 of the edge sum
// (crossing edges carry the same 1/2 weight under fixed/ext data) plus the
// field pairing eps * sum alpha_x sin(theta_x).
double hamiltonian(const SpinConfig& sigma, const Region& region,
                   const BoundaryCondition& bc,
                   const DisorderRealization& real);

double block_average(const ScalarField& f, const LatticeBox& box);
std::array<double, 2> block_average(const SpinConfig& sigma,
                                    const LatticeBox& box);

struct EnergyBreakdown {
  double total = 0;
  std::map<std::string, double> parts;
  double residual = 0;  // total - sum of parts

  double parts_sum() const;
};

// Exact rewriting of the free-boundary value on a box through the Neumann
// field: gradient squares completed around g, the mass pairing, the mean-field
// cross term, and the solver defect. Residual is float noise only.
EnergyBreakdown decompose_free(const SpinConfig& sigma, const LatticeBox& Q,
                               double lambda, const DisorderRealization& real);

// Fixed-boundary analogue through the zero-extended field: all edges meeting
// the region, the boundary pairing row, the mass pairing, the solver defect.
EnergyBreakdown decompose_dirichlet(const SpinConfig& sigma, const Region& R,
                                    const SpinConfig& sigma0, double lambda,
                                    const DisorderRealization& real);

enum class CovDirection { forward, inverse };

// forward: phi = theta - cos(theta) g; inverse: the unique preimage, by
// fixed-point iteration. Requires sup|g| < 1.
SpinConfig change_of_variables(const SpinConfig& theta, const GreenField& g,
                               CovDirection direction);

// Edge sum of cos(grad phi) - 1 plus 1/4 sum m cos^2(phi). dirichlet counts
// edges meeting the region (boundary values read from phi itself), neumann
// counts interior edges only.
double k_functional(const SpinConfig& phi, const Region& region,
                    const PotentialField& m, Bc bc);

struct BlayerReport {
  double lhs = 0;  // the exact value being expanded
  std::map<std::string, double> parts;
  double residual = 0;     // lhs - sum of parts
  double bound_value = 0;  // stated error envelope, constant 1
};

// Boundary-layer expansion of the value after the change of variables:
// cos-edge term, potential term, and (fixed case) the two boundary rows.
// The fixed variant reads boundary data from sigma itself on the outer
// boundary; the free variant uses the centered Neumann field.
BlayerReport blayer_check(const SpinConfig& sigma, const Region& R,
                          double lambda, Bc bc,
                          const DisorderRealization& real);

struct SpinwaveValue {
  double quadratic = 0;      // (eps^2/2) cos^2(psi) <alpha_hat, inv alpha_hat>
  double abs_field_sum = 0;  // eps |sum of alpha over the box|
};

// Tilted-state energy gain of a uniform rotation by psi on a box, through the
// mean-zero Neumann inverse.
SpinwaveValue spinwave_value(const DisorderRealization& real,
                             const LatticeBox& Q, double psi);

}  // namespace rfo
