#include "rfo/spin.hpp"

#include <cmath>
#include <numbers>

#include "rfo/edges.hpp"
#include "rfo/errors.hpp"

namespace rfo {

namespace {

constexpr double kPi = std::numbers::pi;

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

// Angles of sigma on every site of region, by index.
std::vector<double> angles_on(const SpinConfig& sigma, const Region& region) {
  std::vector<double> th(region.size());
  for (std::size_t i = 0; i < region.size(); ++i)
    th[i] = sigma.at(region.site(i));
  return th;
}

double edge_sq(double ta, double tb) { return 2.0 - 2.0 * std::cos(tb - ta); }

// Residual vector of the solved field against its own source.
std::vector<double> solver_residual(const GreenField& g,
                                    const DisorderRealization& real) {
  const Region& r = g.g.region;
  std::vector<double> rhs(r.size());
  for (std::size_t i = 0; i < r.size(); ++i)
    rhs[i] = real.epsilon * real.alpha_at(r.site(i));
  if (g.bc == Bc::neumann) {
    // Mean-free source per component; boxes are connected.
    double m = 0;
    for (double v : rhs) m += v;
    m /= double(rhs.size());
    for (double& v : rhs) v -= m;
  }
  std::vector<double> av = apply_operator(r, g.bc, g.lambda, g.g.values);
  for (std::size_t i = 0; i < r.size(); ++i) rhs[i] -= av[i];
  return rhs;
}

}  // namespace

double wrap_angle(double a) {
  double w = std::remainder(a, 2.0 * kPi);
  if (w <= -kPi) w += 2.0 * kPi;
  return w;
}

double wrapped_gradient(double theta_x, double theta_y) {
  return wrap_angle(theta_y - theta_x);
}

SpinConfig SpinConfig::constant(const Region& r, double angle) {
  require(std::isfinite(angle), "spin: angle must be finite");
  SpinConfig s;
  s.region = r;
  s.theta.assign(r.size(), wrap_angle(angle));
  return s;
}

SpinConfig SpinConfig::from_angles(const Region& r, std::vector<double> angles) {
  require(angles.size() == r.size(), "spin: angle count mismatch");
  for (double& a : angles) {
    require(std::isfinite(a), "spin: angle must be finite");
    a = wrap_angle(a);
  }
  SpinConfig s;
  s.region = r;
  s.theta = std::move(angles);
  return s;
}

double SpinConfig::at(const Site& s) const {
  std::ptrdiff_t i = region.index_of(s);
  require(i >= 0, "spin: site outside configuration");
  return theta[static_cast<std::size_t>(i)];
}

double SpinConfig::at_or(const Site& s, double fallback) const {
  std::ptrdiff_t i = region.index_of(s);
  return i >= 0 ? theta[static_cast<std::size_t>(i)] : fallback;
}

BoundaryCondition BoundaryCondition::free_bc() { return {}; }

BoundaryCondition BoundaryCondition::fixed_bc(SpinConfig on_boundary) {
  BoundaryCondition bc;
  bc.kind = Kind::fixed;
  bc.data = std::move(on_boundary);
  return bc;
}

BoundaryCondition BoundaryCondition::ext_bc(Region inside) {
  BoundaryCondition bc;
  bc.kind = Kind::ext;
  bc.inside = std::move(inside);
  return bc;
}

double dirichlet_energy(const SpinConfig& sigma, const Region& region) {
  const std::vector<double> th = angles_on(sigma, region);
  double e = 0;
  for_each_edge(region, EdgeMode::interior,
                [&](std::size_t i, const Site&, std::ptrdiff_t j, const Site&) {
                  e += edge_sq(th[i], th[static_cast<std::size_t>(j)]);
                });
  return e;
}

double hamiltonian(const SpinConfig& sigma, const Region& region,
                   const BoundaryCondition& bc,
                   const DisorderRealization& real) {
  const std::vector<double> th = angles_on(sigma, region);
  double edges = 0;
  const EdgeMode mode =
      bc.kind == BoundaryCondition::Kind::free ? EdgeMode::interior
                                               : EdgeMode::meeting;
  for_each_edge(region, mode,
                [&](std::size_t i, const Site&, std::ptrdiff_t j, const Site& b) {
                  if (j >= 0) {
                    edges += edge_sq(th[i], th[static_cast<std::size_t>(j)]);
                    return;
                  }
                  if (bc.kind == BoundaryCondition::Kind::fixed) {
                    std::ptrdiff_t k = bc.data.region.index_of(b);
                    require(k >= 0, "hamiltonian: boundary data missing a site");
                    edges += edge_sq(th[i], bc.data.theta[static_cast<std::size_t>(k)]);
                  } else {  // ext: first coordinate vector beyond `inside`
                    if (!bc.inside.contains(b)) edges += edge_sq(th[i], 0.0);
                  }
                });
  double field = 0;
  for (std::size_t i = 0; i < region.size(); ++i)
    field += real.alpha_at(region.site(i)) * std::sin(th[i]);
  return -0.5 * edges + real.epsilon * field;
}

double block_average(const ScalarField& f, const LatticeBox& box) {
  require(box.volume() > 0, "block_average: empty box");
  double s = 0;
  for (const Site& x : box.sites()) s += f.at(x);
  return s / static_cast<double>(box.volume());
}

std::array<double, 2> block_average(const SpinConfig& sigma,
                                    const LatticeBox& box) {
  require(box.volume() > 0, "block_average: empty box");
  double c = 0, s = 0;
  for (const Site& x : box.sites()) {
    const double t = sigma.at(x);
    c += std::cos(t);
    s += std::sin(t);
  }
  const double n = static_cast<double>(box.volume());
  return {c / n, s / n};
}

double EnergyBreakdown::parts_sum() const {
  double s = 0;
  for (const auto& [k, v] : parts) s += v;
  return s;
}

EnergyBreakdown decompose_free(const SpinConfig& sigma, const LatticeBox& Q,
                               double lambda, const DisorderRealization& real) {
  Region rq = Region::of_box(Q);
  const std::vector<double> th = angles_on(sigma, rq);
  GreenField gf = solve_green(real, rq, lambda, Bc::neumann, 1e-12);
  const std::vector<double>& g = gf.g.values;
  const std::vector<double> defect = solver_residual(gf, real);

  double e_g = 0, e_c = 0, e_sg = 0;
  for_each_edge(rq, EdgeMode::interior,
                [&](std::size_t i, const Site&, std::ptrdiff_t jj, const Site&) {
                  const std::size_t j = static_cast<std::size_t>(jj);
                  const double dg = g[j] - g[i];
                  const double dc = std::cos(th[j]) - std::cos(th[i]);
                  const double ds = std::sin(th[j]) - std::sin(th[i]);
                  e_g += dg * dg;
                  e_c += dc * dc;
                  e_sg += (ds - dg) * (ds - dg);
                });
  double pair = 0, ssum = 0, dsum = 0, asum = 0;
  for (std::size_t i = 0; i < rq.size(); ++i) {
    const double s = std::sin(th[i]);
    pair += g[i] * s;
    ssum += s;
    dsum += defect[i] * s;
    asum += real.alpha_at(rq.site(i));
  }
  EnergyBreakdown br;
  br.parts["half_energy_field"] = 0.5 * e_g;
  br.parts["minus_half_energy_e1"] = -0.5 * e_c;
  br.parts["minus_half_energy_e2_less_field"] = -0.5 * e_sg;
  br.parts["mass_pairing"] = lambda * pair;
  br.parts["mean_field_cross"] =
      real.epsilon * (asum / double(rq.size())) * ssum;
  br.parts["solver_defect"] = dsum;
  br.total = hamiltonian(sigma, rq, BoundaryCondition::free_bc(), real);
  br.residual = br.total - br.parts_sum();
  return br;
}

EnergyBreakdown decompose_dirichlet(const SpinConfig& sigma, const Region& R,
                                    const SpinConfig& sigma0, double lambda,
                                    const DisorderRealization& real) {
  const std::vector<double> th = angles_on(sigma, R);
  GreenField gf = solve_green(real, R, lambda, Bc::dirichlet, 1e-12);
  const std::vector<double>& g = gf.g.values;
  const std::vector<double> defect = solver_residual(gf, real);

  double e_c = 0, e_sg = 0, e_g = 0, bpair = 0;
  for_each_edge(
      R, EdgeMode::meeting,
      [&](std::size_t i, const Site&, std::ptrdiff_t jj, const Site& b) {
        double tb, gb;
        if (jj >= 0) {
          tb = th[static_cast<std::size_t>(jj)];
          gb = g[static_cast<std::size_t>(jj)];
        } else {
          tb = sigma0.at(b);  // fixed extension
          gb = 0.0;           // zero extension
          bpair += g[i] * std::sin(tb);
        }
        const double dg = gb - g[i];
        const double dc = std::cos(tb) - std::cos(th[i]);
        const double ds = std::sin(tb) - std::sin(th[i]);
        e_c += dc * dc;
        e_sg += (ds - dg) * (ds - dg);
        e_g += dg * dg;
      });
  double pair = 0, dsum = 0;
  for (std::size_t i = 0; i < R.size(); ++i) {
    const double s = std::sin(th[i]);
    pair += g[i] * s;
    dsum += defect[i] * s;
  }
  EnergyBreakdown br;
  br.parts["minus_half_grad_e1"] = -0.5 * e_c;
  br.parts["minus_half_grad_e2_less_field"] = -0.5 * e_sg;
  br.parts["half_grad_field"] = 0.5 * e_g;
  br.parts["mass_pairing"] = lambda * pair;
  br.parts["boundary_pairing"] = bpair;
  br.parts["solver_defect"] = dsum;
  Region ob = boundary(R, BoundarySide::outer);
  br.total = hamiltonian(
      sigma, R,
      BoundaryCondition::fixed_bc(SpinConfig::from_angles(ob, angles_on(sigma0, ob))),
      real);
  br.residual = br.total - br.parts_sum();
  return br;
}

SpinConfig change_of_variables(const SpinConfig& theta, const GreenField& g,
                               CovDirection direction) {
  require(g.g.sup_norm() < 1.0, "change_of_variables: field reaches 1");
  const Region& r = theta.region;
  std::vector<double> out(r.size());
  if (direction == CovDirection::forward) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      const double gv = g.g.at_or(r.site(i), 0.0);
      out[i] = theta.theta[i] - std::cos(theta.theta[i]) * gv;
    }
    return SpinConfig::from_angles(r, std::move(out));
  }
  // Inverse: iterate t <- phi + cos(t) g; contraction since sup|g| < 1.
  std::vector<double> gv(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) gv[i] = g.g.at_or(r.site(i), 0.0);
  out = theta.theta;
  for (int it = 0; it < 4000; ++it) {
    double delta = 0;
    for (std::size_t i = 0; i < r.size(); ++i) {
      const double next = theta.theta[i] + std::cos(out[i]) * gv[i];
      delta = std::max(delta, std::fabs(next - out[i]));
      out[i] = next;
    }
    if (delta <= 1e-12) return SpinConfig::from_angles(r, std::move(out));
  }
  throw NumericError("change_of_variables: inverse iteration stalled");
}

double k_functional(const SpinConfig& phi, const Region& region,
                    const PotentialField& m, Bc bc) {
  const std::vector<double> th = angles_on(phi, region);
  double edges = 0;
  const EdgeMode mode =
      bc == Bc::dirichlet ? EdgeMode::meeting : EdgeMode::interior;
  for_each_edge(region, mode,
                [&](std::size_t i, const Site&, std::ptrdiff_t j, const Site& b) {
                  const double tb =
                      j >= 0 ? th[static_cast<std::size_t>(j)] : phi.at(b);
                  edges += std::cos(tb - th[i]) - 1.0;
                });
  double pot = 0;
  for (std::size_t i = 0; i < region.size(); ++i) {
    const double mv = m.at(region.site(i));
    require(mv >= 0, "k_functional: potential must be nonnegative");
    const double c = std::cos(th[i]);
    pot += mv * c * c;
  }
  return edges + 0.25 * pot;
}

BlayerReport blayer_check(const SpinConfig& sigma, const Region& R,
                          double lambda, Bc bc,
                          const DisorderRealization& real) {
  GreenField gf = solve_green(real, R, lambda, bc, 1e-12);
  require(gf.g.sup_norm() < 1.0, "blayer_check: field reaches 1");
  SpinConfig phi = change_of_variables(sigma, gf, CovDirection::forward);
  PotentialField m = local_potential(gf, R);
  const std::vector<double> th = angles_on(sigma, R);
  const std::vector<double> ph = angles_on(phi, R);
  const std::vector<double>& g = gf.g.values;

  double edge_cos = 0, bpair = 0, bquad = 0, grad_g_sq = 0, grad_g_sup = 0;
  const EdgeMode mode =
      bc == Bc::dirichlet ? EdgeMode::meeting : EdgeMode::interior;
  for_each_edge(
      R, mode,
      [&](std::size_t i, const Site&, std::ptrdiff_t jj, const Site& b) {
        double pb, dg;
        if (jj >= 0) {
          pb = ph[static_cast<std::size_t>(jj)];
          dg = g[static_cast<std::size_t>(jj)] - g[i];
        } else {
          const double tb = sigma.at(b);  // boundary data from sigma itself
          pb = tb;
          dg = -g[i];
          bpair += g[i] * std::sin(tb);
          bquad += std::cos(tb) * std::cos(tb) * g[i] * g[i];
        }
        edge_cos += std::cos(pb - ph[i]) - 1.0;
        grad_g_sq += dg * dg;
        grad_g_sup = std::max(grad_g_sup, std::fabs(dg));
      });
  double pot = 0, s_l1 = 0, s_l2 = 0, g_l2 = 0;
  for (std::size_t i = 0; i < R.size(); ++i) {
    const double c = std::cos(ph[i]);
    pot += m.m[i] * c * c;
    const double s = std::sin(th[i]);
    s_l1 += std::fabs(s);
    s_l2 += s * s;
    g_l2 += g[i] * g[i];
  }

  BlayerReport rep;
  rep.parts["edge_cos"] = edge_cos;
  rep.parts["potential"] = 0.25 * pot;
  if (bc == Bc::dirichlet) {
    rep.parts["boundary_pairing"] = bpair;
    rep.parts["boundary_quad"] = 0.25 * bquad;
    Region ob = boundary(R, BoundarySide::outer);
    rep.lhs = hamiltonian(
        sigma, R,
        BoundaryCondition::fixed_bc(SpinConfig::from_angles(ob, angles_on(sigma, ob))),
        real);
  } else {
    rep.lhs = hamiltonian(sigma, R, BoundaryCondition::free_bc(), real);
  }
  double sum = 0;
  for (const auto& [k, v] : rep.parts) sum += v;
  rep.residual = rep.lhs - sum;

  double sigma_grad;
  if (bc == Bc::dirichlet) {
    Region ring = boundary(R, BoundarySide::outer);
    std::vector<Site> covered;
    for (std::size_t i = 0; i < ring.size(); ++i)
      if (sigma.region.contains(ring.site(i))) covered.push_back(ring.site(i));
    sigma_grad = dirichlet_energy(
        sigma, region_union(R, Region::from_sites(R.dim(), covered)));
  } else {
    sigma_grad = dirichlet_energy(sigma, R);
  }
  rep.bound_value = lambda * std::sqrt(g_l2) * std::sqrt(s_l2) +
                    (grad_g_sup + gf.g.sup_norm()) * (sigma_grad + grad_g_sq);
  if (bc == Bc::neumann) {
    double asum = 0;
    for (std::size_t i = 0; i < R.size(); ++i)
      asum += real.alpha_at(R.site(i));
    rep.bound_value +=
        real.epsilon * std::fabs(asum / double(R.size())) * s_l1;
  }
  return rep;
}

SpinwaveValue spinwave_value(const DisorderRealization& real,
                             const LatticeBox& Q, double psi) {
  Region rq = Region::of_box(Q);
  std::vector<double> ahat(rq.size());
  double asum = 0;
  for (std::size_t i = 0; i < rq.size(); ++i) {
    ahat[i] = real.alpha_at(rq.site(i));
    asum += ahat[i];
  }
  const double mean = asum / double(rq.size());
  for (double& v : ahat) v -= mean;
  SolveResult sr = solve_lattice(rq, Bc::neumann, 0.0, ahat, 1e-12);
  double quad = 0;
  for (std::size_t i = 0; i < rq.size(); ++i) quad += ahat[i] * sr.x[i];
  const double c = std::cos(psi);
  SpinwaveValue v;
  v.quadratic = 0.5 * real.epsilon * real.epsilon * c * c * quad;
  v.abs_field_sum = real.epsilon * std::fabs(asum);
  return v;
}

}  // namespace rfo
