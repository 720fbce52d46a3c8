#pragma once

#include <cstdint>
#include <vector>

#include "rfo/geometry.hpp"

namespace rfo {

struct ScalarField {
  Region region;
  std::vector<double> values;  // parallel to region.sites()

  double at(const Site& s) const;
  double at_or(const Site& s, double fallback) const;
  double sup_norm() const;
  double mean() const;
};

// Quenched i.i.d. standard Gaussians keyed by (seed, site); epsilon rides
// along as the field strength. Materialization is a restriction of the same
// pointwise function, so it commutes with taking subregions.
struct DisorderRealization {
  std::uint64_t seed = 0;
  double epsilon = 0;
  Region region;
  std::vector<double> alpha;

  static DisorderRealization sample(const Region& r, std::uint64_t seed,
                                    double epsilon);
  double alpha_at(const Site& s) const;
  DisorderRealization restrict_to(const Region& sub) const;
};

enum class Bc { dirichlet, neumann };

struct GreenField {
  ScalarField g;
  double lambda = 0;
  Bc bc = Bc::dirichlet;
  double residual_sup = 0;  // sup-norm of (A g - rhs) at return
  int iterations = 0;
};

struct SolveResult {
  std::vector<double> x;
  double residual_sup = 0;
  int iterations = 0;
};

// y = (-Laplace^bc + lambda) x on sub. Dirichlet: zero extension outside sub
// (diagonal 2d + lambda); Neumann: edges within sub only (diagonal deg + lambda).
std::vector<double> apply_operator(const Region& sub, Bc bc, double lambda,
                                   const std::vector<double>& x);

// Jacobi-preconditioned conjugate gradients. Converged when the residual
// sup-norm drops below tol * max(1, sup|rhs|). Neumann with lambda = 0
// projects rhs and solution to zero mean on each graph component.
SolveResult solve_lattice(const Region& sub, Bc bc, double lambda,
                          std::vector<double> rhs, double tol = 1e-10,
                          int max_iter = 200000);

// g = eps * (A)^-1 alpha with A = -Laplace^bc + lambda; Neumann uses the
// centered source alpha - mean(alpha) (per graph component).
GreenField solve_green(const DisorderRealization& real, const Region& sub,
                       double lambda, Bc bc, double tol = 1e-10,
                       int max_iter = 200000);

// Orthonormal eigenpairs of the 1-d path Laplacian of length n.
struct EigenBasis1d {
  std::vector<double> eigenvalues;
  std::vector<std::vector<double>> vectors;  // vectors[k][x]
};
EigenBasis1d eigen_basis_1d(std::int64_t n, Bc bc);

// Exact solve on a box by separable sine/cosine transforms; rhs and result in
// lexicographic site order. Neumann lambda = 0 drops the constant mode.
std::vector<double> eigen_solve_box(const LatticeBox& box, Bc bc, double lambda,
                                    const std::vector<double>& rhs);

GreenField eigen_solve_oracle(const DisorderRealization& real,
                              const LatticeBox& box, double lambda, Bc bc);

// Exact single-site variance sum_k phi_k(x)^2/(mu_k+lambda)^2 and gradient
// trace sum_k mu_k/(mu_k+lambda)^2 for the box operator (G-normalization,
// i.e. unit-strength source).
double eigen_point_variance(const LatticeBox& box, Bc bc, double lambda,
                            const Site& x);
double eigen_grad_trace(const LatticeBox& box, Bc bc, double lambda);

struct FkEstimate {
  double estimate = 0;
  double std_error = 0;
  std::uint64_t walks = 0;
};

// Feynman-Kac probe of the Dirichlet Green field at x: continuous-time simple
// random walk (rate 2d), killed at rate lambda, stopped on exiting sub.
FkEstimate fk_estimate(const DisorderRealization& real, const Region& sub,
                       double lambda, const Site& x, std::uint64_t walks,
                       std::uint64_t seed);

struct PotentialField {
  Region region;
  std::vector<double> m;  // parallel to region.sites()
  double at(const Site& s) const;
};

// m_x = sum over incident edges of squared gradients of g. Dirichlet fields
// extend by zero beyond their domain; Neumann fields count edges inside the
// domain only.
PotentialField local_potential(const GreenField& g, const Region& within);

struct SpectralConstants {
  std::int64_t l = 0;
  double lambda = 0;
  int d = 0;
  double sigma2_sq = 0;     // integral of (|k|^2+lambda)^-2 over [1/l, 2pi]^d
  double sigma_grad_sq = 0; // integral of |k|^2 (|k|^2+lambda)^-2
};
SpectralConstants spectral_sigmas(std::int64_t l, double lambda, int d,
                                  double rel_tol = 1e-6);

struct HarmonicSplit {
  GreenField inner;      // Green field of the sub-box, same source
  ScalarField residue;   // outer - inner on sub and its outer boundary
  double harmonic_residual_sup = 0;  // sup |(-Laplace+lambda) residue| in sub
  double cross_term = 0;             // lambda-form pairing <inner, residue>
  double energy_outer = 0, energy_inner = 0, energy_residue = 0;
  double additivity_gap = 0;  // outer - inner - residue - 2*cross
};

// Split a Dirichlet Green field over a sub-box into the sub-box field plus an
// (-Laplace+lambda)-harmonic remainder. Energies are the lambda-forms over
// edges meeting the sub-box.
HarmonicSplit harmonic_split(const GreenField& outer,
                             const DisorderRealization& real,
                             const LatticeBox& sub, double tol = 1e-12);

struct LocalityGap {
  double gap = 0;
  Coord dist = -1;  // -1 when the regions coincide
  double value_full = 0, value_box = 0;
};

// |g_R(x) - g_Qtilde(x)| against the distance from x to the outer boundary of
// the symmetric difference.
LocalityGap locality_gap(const DisorderRealization& real, const Region& R,
                         const LatticeBox& qtilde, double lambda, const Site& x,
                         double tol = 1e-10);

}  // namespace rfo
