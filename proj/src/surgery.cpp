#include "rfo/surgery.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <limits>
#include <map>
#include <numbers>
#include <thread>
#include <unordered_map>
#include <utility>

#include "json.hpp"
#include "rfo/edges.hpp"
#include "rfo/errors.hpp"
#include "rfo/random.hpp"

namespace rfo {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kBand = kPi / 6.0;  // concavity band of the transformed angles

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

double edge_sq(double ta, double tb) { return 2.0 - 2.0 * std::cos(tb - ta); }

Coord floor_div(Coord a, Coord b) {
  Coord q = a / b, r = a % b;
  return r != 0 && ((r < 0) != (b < 0)) ? q - 1 : q;
}

// Volume-energy difference between two configurations on the same region that
// differ only inside `changed` (a subset of the volume). Aligned data on the
// crossing edges; interior edges counted once.
double volume_delta(const SpinConfig& before, const SpinConfig& after,
                    const Region& changed, const Region& lambdaN,
                    const DisorderRealization& real) {
  const int d = lambdaN.dim();
  double acc = 0;
  for (const Site& x : changed.sites()) {
    const double ta = before.at(x), tb = after.at(x);
    acc += real.epsilon * real.alpha_at(x) * (std::sin(tb) - std::sin(ta));
    for (int ax = 0; ax < d; ++ax)
      for (int dir = -1; dir <= 1; dir += 2) {
        Site y = x;
        y[ax] += dir;
        if (changed.contains(y) && y < x) continue;  // counted from y
        double ua = 0, ub = 0;
        if (lambdaN.contains(y)) {
          ua = before.at(y);
          ub = after.at(y);
        }
        acc -= 0.5 * (edge_sq(tb, ub) - edge_sq(ta, ua));
      }
  }
  return acc;
}

// Sites of the region whose angles differ bitwise between the two
// configurations (which share the region object of `a`).
Region bit_diff(const SpinConfig& a, const SpinConfig& b) {
  std::vector<Site> out;
  for (std::size_t i = 0; i < a.region.size(); ++i)
    if (a.theta[i] != b.theta[i]) out.push_back(a.region.site(i));
  return Region::from_sites(a.region.dim(), std::move(out));
}

// Chebyshev distance to `seeds`, for every site within sup-distance < cap.
// BFS over the full-shell adjacency: layer k holds exactly the sites at
// sup-distance k.
std::unordered_map<std::uint64_t, Coord> cheb_distances(const Region& seeds,
                                                        Coord cap, int d) {
  std::unordered_map<std::uint64_t, Coord> dist;
  if (seeds.empty() || cap <= 0) return dist;
  std::vector<Site> offsets;
  const Coord span = 3;
  const std::int64_t count = d == 1 ? 3 : d == 2 ? 9 : 27;
  for (std::int64_t c = 0; c < count; ++c) {
    std::int64_t rem = c;
    Site o;
    for (int a = 0; a < d; ++a) {
      o[a] = static_cast<Coord>(rem % span) - 1;
      rem /= span;
    }
    if (o == Site{}) continue;
    offsets.push_back(o);
  }
  std::vector<Site> frontier;
  frontier.reserve(seeds.size());
  for (const Site& s : seeds.sites()) {
    dist.emplace(site_key(s), 0);
    frontier.push_back(s);
  }
  for (Coord layer = 1; layer < cap && !frontier.empty(); ++layer) {
    std::vector<Site> next;
    for (const Site& s : frontier)
      for (const Site& o : offsets) {
        Site n = s;
        for (int a = 0; a < d; ++a) n[a] += o[a];
        if (dist.emplace(site_key(n), layer).second) next.push_back(n);
      }
    frontier = std::move(next);
  }
  return dist;
}

// Distance from x to the nearest site of base, early-exiting once <= cut.
bool within_dist(const Site& x, const Region& base, Coord cut) {
  for (const Site& s : base.sites())
    if (dist_inf(x, s) <= cut) return true;
  return false;
}

// First nonzero recovered label over the sites of r.
int label_over(const Region& r, const RecoveredLabels& rec) {
  for (const Site& s : r.sites()) {
    std::ptrdiff_t i = rec.domain.index_of(s);
    if (i >= 0 && rec.big[static_cast<std::size_t>(i)] != 0)
      return rec.big[static_cast<std::size_t>(i)];
  }
  return 0;
}

// Angle representative on the minus side: reflect across the second axis.
// Field term is invariant (same sine), edges are carried isometrically.
double reflect_angle(double t) { return wrap_angle(kPi - t); }

// Fixed-data ascent problem on a region: internal edges once, crossing edges
// against frozen boundary angles, linear field term.
struct AscentProblem {
  const Region* r = nullptr;
  std::vector<double> field;  // epsilon * alpha per site
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  std::vector<std::vector<double>> fixed;  // boundary angles seen per site

  AscentProblem(const DisorderRealization& real, const Region& region,
                const BoundaryCondition& bc)
      : r(&region) {
    const int d = region.dim();
    const std::size_t n = region.size();
    field.resize(n);
    fixed.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const Site& x = region.site(i);
      field[i] = real.epsilon * real.alpha_at(x);
      for (int ax = 0; ax < d; ++ax)
        for (int dir = -1; dir <= 1; dir += 2) {
          Site y = x;
          y[ax] += dir;
          std::ptrdiff_t j = region.index_of(y);
          if (j >= 0) {
            if (static_cast<std::size_t>(j) > i)
              edges.emplace_back(static_cast<std::uint32_t>(i),
                                 static_cast<std::uint32_t>(j));
            continue;
          }
          switch (bc.kind) {
            case BoundaryCondition::Kind::free:
              break;
            case BoundaryCondition::Kind::fixed:
              fixed[i].push_back(bc.data.at(y));
              break;
            case BoundaryCondition::Kind::ext:
              if (!bc.inside.contains(y)) fixed[i].push_back(0.0);
              break;
          }
        }
    }
  }

  double value(const std::vector<double>& th) const {
    double f = 0;
    for (const auto& [i, j] : edges) f -= 0.5 * edge_sq(th[i], th[j]);
    for (std::size_t i = 0; i < th.size(); ++i) {
      for (double a : fixed[i]) f -= 0.5 * edge_sq(th[i], a);
      f += field[i] * std::sin(th[i]);
    }
    return f;
  }

  void gradient(const std::vector<double>& th, std::vector<double>& g) const {
    g.assign(th.size(), 0.0);
    for (const auto& [i, j] : edges) {
      const double s = std::sin(th[i] - th[j]);
      g[i] -= s;
      g[j] += s;
    }
    for (std::size_t i = 0; i < th.size(); ++i) {
      for (double a : fixed[i]) g[i] -= std::sin(th[i] - a);
      g[i] += field[i] * std::cos(th[i]);
    }
  }
};

struct AscentOutcome {
  double value = 0;
  double residual = 0;
  int iterations = 0;
  bool converged = false;
};

// Backtracking gradient ascent from th (overwritten with the end point).
AscentOutcome ascend(const AscentProblem& p, std::vector<double>& th,
                     double tol, int max_iter) {
  AscentOutcome out;
  std::vector<double> g, trial(th.size());
  double f = p.value(th);
  double step = 0.25;
  while (out.iterations < max_iter) {
    p.gradient(th, g);
    double gsup = 0, gnorm2 = 0;
    for (double v : g) {
      gsup = std::max(gsup, std::abs(v));
      gnorm2 += v * v;
    }
    out.residual = gsup;
    if (gsup <= tol) {
      out.converged = true;
      break;
    }
    ++out.iterations;
    for (std::size_t i = 0; i < th.size(); ++i) trial[i] = th[i] + step * g[i];
    const double ft = p.value(trial);
    if (ft >= f + 1e-4 * step * gnorm2) {
      th.swap(trial);
      f = ft;
      step = std::min(step * 1.25, 2.0);
    } else {
      step *= 0.5;
      if (step < 1e-14) break;  // stuck on a ridge; report as unconverged
    }
  }
  out.value = f;
  return out;
}

}  // namespace

BoundaryCondition aligned_bc(int dim) {
  return BoundaryCondition::ext_bc(Region::from_sites(dim, {}));
}

GroundResult ground_energy(const DisorderRealization& real, const Region& r,
                           const BoundaryCondition& bc, double tol,
                           int max_iter, int starts, std::uint64_t seed,
                           const SpinConfig* warm) {
  require(!r.empty(), "ground_energy: empty region");
  require(starts >= 1, "ground_energy: needs at least one start");
  const AscentProblem prob(real, r, bc);
  const std::size_t n = r.size();

  GroundResult best;
  best.value = -std::numeric_limits<double>::infinity();
  int total_iter = 0;
  auto run = [&](std::vector<double> th) {
    AscentOutcome o = ascend(prob, th, tol, max_iter);
    total_iter += o.iterations;
    if (o.value > best.value) {
      best.value = o.value;
      best.residual = o.residual;
      best.flagged = !o.converged;
      best.argmax = SpinConfig::from_angles(*prob.r, std::move(th));
    }
  };

  run(std::vector<double>(n, 0.0));
  if (starts >= 2) {
    GreenField prof = solve_green(real, r, 0.0, Bc::neumann);
    run(prof.g.values);
  }
  for (int s = 2; s < starts; ++s) {
    CounterRng rng(seed ^ (0x9E3779B97F4A7C15ULL *
                           static_cast<std::uint64_t>(s + 1)));
    std::vector<double> th(n);
    for (double& v : th) v = rng.next_uniform(-kPi, kPi);
    run(std::move(th));
  }
  if (warm) {
    std::vector<double> th(n);
    for (std::size_t i = 0; i < n; ++i) th[i] = warm->at(r.site(i));
    run(std::move(th));
  }
  best.iterations = total_iter;
  return best;
}

GroundResult box_ground_energy(const DisorderRealization& real,
                               const LatticeBox& Q,
                               const BoundaryCondition& bc, double tol,
                               int max_iter, int starts, std::uint64_t seed) {
  return ground_energy(real, Region::of_box(Q), bc, tol, max_iter, starts,
                       seed);
}

Region half_enlargement(const Contour& g, const Region& lambdaN,
                        std::int64_t ell) {
  require(g.scaleL >= 2 && g.scaleL % 2 == 0,
          "half_enlargement: coarse scale must be even");
  return region_intersect(enlarge(g.spine, g.scaleL / 2, ell), lambdaN);
}

BulkState bulk_ground_state(const DisorderRealization& real, const Contour& g,
                            const Region& lambdaN, XiClassifier& xi_half) {
  const ClassifierParams& p = xi_half.params();
  require(g.scaleL == p.L,
          "bulk_ground_state: contour and parameter scales disagree");
  require(2 * xi_half.scale() == p.ell,
          "bulk_ground_state: classifier must run at half the fine scale");
  BulkState out;
  out.delta_bar = half_enlargement(g, lambdaN, p.ell);
  require(!out.delta_bar.empty(), "bulk_ground_state: empty enlargement");
  const std::int64_t h = xi_half.scale();
  const double root = std::sqrt(static_cast<double>(p.ell));
  out.blocks = enumerate_blocks(out.delta_bar, h, BlockFamily::standard);

  std::vector<double> th(out.delta_bar.size(), 0.0);
  double rim_sup = 0;
  for (const LatticeBox& q : out.blocks) {
    const int bit = xi_half.xi(q);
    out.xi.push_back(bit);
    if (!bit) continue;  // irregular block: stay aligned
    Region qreg = region_intersect(Region::of_box(q), out.delta_bar);
    GreenField gn = solve_green(real, qreg, 0.0, Bc::neumann);
    for (std::size_t i = 0; i < qreg.size(); ++i) {
      const Site& s = qreg.site(i);
      Coord inset = std::numeric_limits<Coord>::max();
      for (int a = 0; a < q.dim; ++a)
        inset = std::min(inset, std::min(s[a] - q.lo(a) + 1, q.hi(a) - s[a]));
      const double tau =
          std::min(1.0, static_cast<double>(inset) / root);
      const double ang = tau * gn.g.values[i];
      th[static_cast<std::size_t>(out.delta_bar.index_of(s))] = ang;
      if (inset == 1) rim_sup = std::max(rim_sup, std::abs(ang));
    }
  }
  out.sigma = SpinConfig::from_angles(out.delta_bar, std::move(th));
  out.boundary_angle_sup = rim_sup;
  return out;
}

BulkAudit bulk_energy_audit(const DisorderRealization& real,
                            const BulkState& bulk, const Region& lambdaN,
                            double tol, int max_iter, std::uint64_t seed) {
  require(!bulk.delta_bar.empty(), "bulk_energy_audit: empty state");
  const BoundaryCondition ext = BoundaryCondition::ext_bc(lambdaN);
  BulkAudit a;
  std::uint64_t k = 0;
  for (const LatticeBox& q : bulk.blocks) {
    Region qreg = region_intersect(Region::of_box(q), bulk.delta_bar);
    const AscentProblem prob(real, qreg, ext);
    std::vector<double> warm_th(qreg.size());
    for (std::size_t i = 0; i < qreg.size(); ++i)
      warm_th[i] = bulk.sigma.at(qreg.site(i));
    a.warm_sum += prob.value(warm_th);
    SpinConfig warm = SpinConfig::from_angles(qreg, std::move(warm_th));
    GroundResult gr = ground_energy(real, qreg, ext, tol, max_iter, 4,
                                    seed + 977 * ++k, &warm);
    if (gr.flagged) ++a.flagged_blocks;
    a.block_sum += gr.value;
  }
  a.value = hamiltonian(bulk.sigma, bulk.delta_bar, ext, real);
  a.gap = a.block_sum - a.value;

  // Inter-block edges, exactly: the stitching cost the per-block sum ignores.
  const std::int64_t h = bulk.blocks.empty() ? 1 : bulk.blocks.front().side;
  auto block_corner = [&](const Site& s) {
    Site c;
    for (int ax = 0; ax < bulk.delta_bar.dim(); ++ax)
      c[ax] = floor_div(s[ax], h) * h;
    return c;
  };
  double worst = 0;
  std::int64_t count = 0;
  for_each_edge(bulk.delta_bar, EdgeMode::interior,
                [&](std::size_t i, const Site& x, std::ptrdiff_t j,
                    const Site& y) {
                  if (block_corner(x) == block_corner(y)) return;
                  const double e = edge_sq(bulk.sigma.theta[i],
                                           bulk.sigma.theta[static_cast<
                                               std::size_t>(j)]);
                  a.cross_energy += 0.5 * e;
                  worst = std::max(worst, e);
                  ++count;
                });
  a.stitch_bound = 0.5 * worst * static_cast<double>(count);
  return a;
}

Mod1Result mod1_reflect(const SpinConfig& sigma, const CollarDecomposition& cd,
                        const Region& lambdaN, const DisorderRealization& real,
                        std::int64_t L) {
  Mod1Result r;
  StageChange& st = r.stage;
  st.sigma = sigma;

  auto ok_plus = [&](const Site& s) {
    return std::cos(sigma.at_or(s, 0.0)) > 0.0;
  };
  auto ok_minus = [&](const Site& s) {
    return std::cos(sigma.at_or(s, 0.0)) < 0.0;
  };
  r.a_plus = grow_until(cd.collar_plus, lambdaN, ok_plus);
  r.a_minus = grow_until(cd.collar_minus, lambdaN, ok_minus);

  auto note = [&](const char* msg) {
    st.flagged = true;
    if (!st.note.empty()) st.note += "; ";
    st.note += msg;
  };
  if (!region_intersect(r.a_plus, r.a_minus).empty())
    note("reflection supports overlap");
  auto check_envelope = [&](const Region& grown, const Region& seed) {
    if (seed.empty()) return true;
    Region extra = region_diff(grown, seed);
    for (const Site& x : extra.sites())
      if (!within_dist(x, seed, L)) return false;
    Region rimr = region_intersect(boundary(grown, BoundarySide::outer),
                                   lambdaN);
    for (const Site& x : rimr.sites())
      if (!within_dist(x, seed, L)) return false;
    return true;
  };
  if (!check_envelope(r.a_plus, cd.collar_plus) ||
      !check_envelope(r.a_minus, cd.collar_minus))
    note("support growth escaped the one-scale envelope");
  {
    Region bm = boundary(r.a_minus, BoundarySide::outer);
    if (!region_diff(bm, lambdaN).empty())
      note("minus support reaches the volume edge");
  }

  auto reflect_on = [&](const Region& support, bool plus) {
    for (const Site& x : support.sites()) {
      const std::size_t i =
          static_cast<std::size_t>(st.sigma.region.index_of(x));
      const double c = std::cos(st.sigma.theta[i]);
      if (plus ? c < 0.0 : c > 0.0)
        st.sigma.theta[i] = reflect_angle(st.sigma.theta[i]);
    }
  };
  reflect_on(r.a_plus, true);
  reflect_on(r.a_minus, false);
  // Diff against the input rather than logging the passes: on (flagged)
  // overlapping supports a site can be reflected twice, back to its start.
  std::vector<Site> changed;
  for (const Site& x : region_union(r.a_plus, r.a_minus).sites())
    if (st.sigma.at(x) != sigma.at(x)) changed.push_back(x);
  st.changed = Region::from_sites(sigma.region.dim(), std::move(changed));
  st.delta = volume_delta(sigma, st.sigma, st.changed, lambdaN, real);

  // Every touched edge must be no worse than before; the field term is
  // invariant under the reflection. Violations mean the growth invariant
  // broke, not a numerical accident.
  const int d = lambdaN.dim();
  for (const Site& x : st.changed.sites()) {
    for (int ax = 0; ax < d; ++ax)
      for (int dir = -1; dir <= 1; dir += 2) {
        Site y = x;
        y[ax] += dir;
        const double ua = lambdaN.contains(y) ? sigma.at(y) : 0.0;
        const double ub = lambdaN.contains(y) ? st.sigma.at(y) : 0.0;
        if (edge_sq(st.sigma.at(x), ub) > edge_sq(sigma.at(x), ua) + 5e-12)
          throw NumericError("mod1: an incident edge energy increased");
      }
  }
  if (st.delta < -1e-9)
    throw NumericError("mod1: energy decreased past float tolerance");
  return r;
}

StageChange mod2_damp(const SpinConfig& s1, const CollarDecomposition& cd,
                      const Region& lambdaN, const DisorderRealization& real,
                      std::int64_t L) {
  StageChange st;
  st.sigma = s1;
  const int d = s1.region.dim();
  std::vector<Site> changed;

  auto apply = [&](const Region& dirty, const Region& deep, bool plus) {
    if (dirty.empty()) return;
    const Coord cap = static_cast<Coord>((L + 15) / 16);
    auto dist = cheb_distances(deep, cap, d);
    for (const Site& x : dirty.sites()) {
      double tau = 1.0;
      auto it = dist.find(site_key(x));
      if (it != dist.end())
        tau = std::min(1.0, 16.0 * static_cast<double>(it->second) /
                                static_cast<double>(L));
      if (tau >= 1.0) continue;  // identity by definition away from the core
      const std::size_t i =
          static_cast<std::size_t>(st.sigma.region.index_of(x));
      const double t = st.sigma.theta[i];
      double nt;
      if (plus) {
        nt = tau == 0.0 ? 0.0 : wrap_angle(tau * t);
      } else {
        const double u = t > 0.0 ? t - kPi : t + kPi;
        nt = tau == 0.0 ? kPi : wrap_angle(tau * u + kPi);
      }
      if (nt != t) {
        st.sigma.theta[i] = nt;
        changed.push_back(x);
      }
    }
  };
  apply(cd.dirty_plus, cd.deep16_plus, true);
  apply(cd.dirty_minus, cd.deep16_minus, false);
  st.changed = Region::from_sites(d, std::move(changed));
  st.delta = volume_delta(s1, st.sigma, st.changed, lambdaN, real);
  return st;
}

Mod3Result mod3_optimize(const SpinConfig& s2, CollarDecomposition& cd,
                         const Region& lambdaN,
                         const DisorderRealization& real, std::int64_t L,
                         double tol) {
  Mod3Result R;
  StageChange& st = R.stage;
  st.sigma = s2;
  const int d = s2.region.dim();
  const double lambda =
      std::pow(std::log(static_cast<double>(L)), 8) /
      (static_cast<double>(L) * static_cast<double>(L));
  const Region rim =
      region_intersect(boundary(cd.collar, BoundarySide::outer), lambdaN);
  const Coord rim_cut = (L - 1) / 9;  // dist < L/9 iff dist <= this

  auto note = [&](const std::string& msg) {
    st.flagged = true;
    if (!st.note.empty()) st.note += "; ";
    st.note += msg;
  };

  std::vector<Site> changed;
  auto side = [&](bool plus, const Region& work, const Region& anchor,
                  const Region& collar_side, Region& f_out, Region& g_out,
                  GreenField& gf_out, MaximizerResult& opt_out) {
    if (work.empty() || anchor.empty()) return;
    GreenField gf = solve_green(real, work, lambda, Bc::dirichlet, 1e-12);
    if (gf.g.sup_norm() >= kPi / 12.0)
      throw NumericError(
          "mod3: massive field too large, collar behaves like a dirty block");
    gf_out = gf;
    // All reads go against the stage input; the two sides write to disjoint
    // supports, so the order of the sides cannot matter.
    auto rep = [&](const Site& x) {
      const double t = s2.at(x);
      return plus ? t : reflect_angle(t);
    };
    auto phi_bar = [&](const Site& x) {
      const double u = rep(x);
      return u - std::cos(u) * gf.g.at_or(x, 0.0);
    };
    auto ok = [&](const Site& x) { return std::abs(phi_bar(x)) <= kBand; };
    Region f = grow_until(anchor, collar_side, ok);
    // the grown set must keep a safety margin to the collar's outer rim
    for (const Site& x : rim.sites())
      if (within_dist(x, f, rim_cut)) {
        note(plus ? "plus core grew into the rim margin"
                  : "minus core grew into the rim margin");
        break;
      }
    Region g_set = region_intersect(f, work);
    if (g_set.empty()) return;
    Region bnd = boundary(g_set, BoundarySide::outer);
    std::vector<double> tb(bnd.size());
    double tmax = 0;
    for (std::size_t i = 0; i < bnd.size(); ++i) {
      tb[i] = phi_bar(bnd.site(i));
      tmax = std::max(tmax, std::abs(tb[i]));
    }
    R.tau_sup = std::max(R.tau_sup, tmax);
    if (tmax > kBand + 1e-12) {
      note(plus ? "plus boundary data left the concavity band, side skipped"
                : "minus boundary data left the concavity band, side skipped");
      return;
    }
    f_out = f;
    g_out = g_set;
    SpinConfig tau = SpinConfig::from_angles(bnd, std::move(tb));
    PotentialField m = local_potential(gf, g_set);
    MaximizerResult opt = maximize_K(g_set, m, tau, tol);
    std::vector<double> ph(g_set.size());
    for (std::size_t i = 0; i < g_set.size(); ++i)
      ph[i] = opt.phi.at(g_set.site(i));
    SpinConfig phi_g = SpinConfig::from_angles(g_set, std::move(ph));
    SpinConfig theta_new = change_of_variables(phi_g, gf, CovDirection::inverse);
    for (std::size_t i = 0; i < g_set.size(); ++i) {
      const Site& x = g_set.site(i);
      const double nt =
          plus ? theta_new.theta[i] : reflect_angle(theta_new.theta[i]);
      const std::size_t gi =
          static_cast<std::size_t>(st.sigma.region.index_of(x));
      if (st.sigma.theta[gi] != nt) {
        st.sigma.theta[gi] = nt;
        changed.push_back(x);
      }
    }
    opt_out = std::move(opt);
  };

  side(true, cd.work_plus, cd.anchor_plus, cd.collar_plus, cd.f_plus,
       cd.g_plus, R.green_plus, R.opt_plus);
  side(false, cd.work_minus, cd.anchor_minus, cd.collar_minus, cd.f_minus,
       cd.g_minus, R.green_minus, R.opt_minus);

  st.changed = Region::from_sites(d, std::move(changed));
  st.delta = volume_delta(s2, st.sigma, st.changed, lambdaN, real);
  return R;
}

Mod4Result mod4_interpolate(const SpinConfig& s3, const CollarDecomposition& cd,
                            const Region& lambdaN,
                            const DisorderRealization& real,
                            std::int64_t ell) {
  Mod4Result R;
  StageChange& st = R.stage;
  st.sigma = s3;
  const int d = s3.region.dim();
  const double root = std::sqrt(static_cast<double>(ell));
  const Coord cap = static_cast<Coord>(std::ceil(root));
  std::vector<Site> changed;

  auto note = [&](const char* msg) {
    st.flagged = true;
    if (!st.note.empty()) st.note += "; ";
    st.note += msg;
  };

  for (std::size_t ci = 0; ci < cd.band_components.size(); ++ci) {
    const Region& comp = cd.band_components[ci];
    const Region& mid = cd.band_mid[ci];
    if (mid.empty()) continue;  // nothing to anchor the ramp on
    std::size_t on_plus = region_intersect(comp, cd.collar_plus).size();
    std::size_t on_minus = region_intersect(comp, cd.collar_minus).size();
    if (on_plus > 0 && on_minus > 0) note("interpolation component spans both phases");
    const bool plus = on_plus >= on_minus;
    Region ring = boundary(mid, BoundarySide::outer);
    auto dist = cheb_distances(ring, cap, d);
    for (const Site& x : comp.sites()) {
      double tau = 1.0;
      auto it = dist.find(site_key(x));
      if (it != dist.end())
        tau = std::min(1.0, static_cast<double>(it->second) / root);
      if (tau >= 1.0) continue;
      const std::size_t i =
          static_cast<std::size_t>(st.sigma.region.index_of(x));
      const double t = st.sigma.theta[i];
      double nt;
      if (plus) {
        nt = tau == 0.0 ? 0.0 : wrap_angle(tau * t);
      } else {
        const double u = t > 0.0 ? t - kPi : t + kPi;
        nt = tau == 0.0 ? kPi : wrap_angle(tau * u + kPi);
      }
      if (nt != t) {
        st.sigma.theta[i] = nt;
        changed.push_back(x);
      }
    }
  }
  st.changed = Region::from_sites(d, std::move(changed));
  st.delta = volume_delta(s3, st.sigma, st.changed, lambdaN, real);

  auto rim_sup = [&](const Region& mid_side, double target) {
    double sup = 0;
    Region rb = boundary(mid_side, BoundarySide::outer);
    for (const Site& x : rb.sites())
      sup = std::max(sup,
                     std::sqrt(edge_sq(st.sigma.at_or(x, target), target)));
    return sup;
  };
  R.rim_sup_plus = rim_sup(cd.mid_plus, 0.0);
  R.rim_sup_minus = rim_sup(cd.mid_minus, kPi);
  // The ramp pins the deep-set rims exactly, so this only fires when a
  // component was skipped and its rim kept stray angles.
  if (real.epsilon > 0.0 && real.epsilon < 1.0) {
    const double close = real.epsilon * std::abs(std::log(real.epsilon));
    if (R.rim_sup_plus > close || R.rim_sup_minus > close)
      note("deep-rim alignment misses the closeness target");
  }
  return R;
}

namespace {

// Ring distance-0 sites of the exterior boundary component carry the phase
// the surgery output must land in.
int exterior_label(const ContourGeometry& cg, const RecoveredLabels& rec) {
  int lab = label_over(cg.delta_ext, rec);
  require(lab != 0, "glue: exterior ring carries no label");
  return lab;
}

}  // namespace

GlueResult glue(const SpinConfig& sigma_cc, const Contour& g,
                const BulkState& bulk, int sign, const Region& lambdaN,
                const DisorderRealization& real, std::int64_t ell) {
  require(sign == 1 || sign == -1, "glue: sign must be +1 or -1");
  RecoveredLabels rec = recover_labels(g, ell);
  ContourGeometry cg = contour_geometry(g, ell);
  if (exterior_label(cg, rec) != sign)
    throw std::invalid_argument("glue: sign disagrees with the exterior phase");

  GlueResult R;
  R.sign = sign;
  StageChange& st = R.stage;
  st.sigma = sigma_cc;
  std::vector<Site> changed;

  for (std::size_t i = 0; i < bulk.delta_bar.size(); ++i) {
    const Site& x = bulk.delta_bar.site(i);
    const double nt = sign > 0 ? bulk.sigma.theta[i]
                               : reflect_angle(bulk.sigma.theta[i]);
    const std::size_t gi =
        static_cast<std::size_t>(st.sigma.region.index_of(x));
    if (st.sigma.theta[gi] != nt) {
      st.sigma.theta[gi] = nt;
      changed.push_back(x);
    }
  }

  IntExt ie = int_ext_decompose(bulk.delta_bar);
  for (const Region& hole : ie.interiors) {
    Region inside = region_intersect(hole, lambdaN);
    if (inside.empty()) continue;
    const int lab = label_over(inside, rec);
    if (lab == 0) {
      st.flagged = true;
      if (!st.note.empty()) st.note += "; ";
      st.note += "unlabeled interior component kept as is";
      continue;
    }
    if (lab == sign) continue;
    R.reflected.push_back(inside);
    for (const Site& x : inside.sites()) {
      const std::size_t gi =
          static_cast<std::size_t>(st.sigma.region.index_of(x));
      const double nt = reflect_angle(st.sigma.theta[gi]);
      if (st.sigma.theta[gi] != nt) {
        st.sigma.theta[gi] = nt;
        changed.push_back(x);
      }
    }
  }
  st.changed = Region::from_sites(sigma_cc.region.dim(), std::move(changed));
  st.delta = volume_delta(sigma_cc, st.sigma, st.changed, lambdaN, real);
  return R;
}

EnergyGain energy_gain(const SpinConfig& sigma, const SpinConfig& s_out,
                       const Region& lambdaN, const DisorderRealization& real,
                       const Contour& g, const ClassifierParams& p,
                       bool with_attribution, std::uint64_t seed) {
  EnergyGain eg;
  const int d = lambdaN.dim();
  require(sigma.region.size() == s_out.region.size(),
          "energy_gain: configurations must share a region");
  // Evaluated locally over the actual diff: two full-volume sums would lose
  // the gain to cancellation once the volume dwarfs the surgery region.
  eg.delta = volume_delta(sigma, s_out, bit_diff(sigma, s_out), lambdaN, real);
  ContourGeometry cg = contour_geometry(g, p.ell);
  eg.n_large = cg.n_large;
  Region dbar = half_enlargement(g, lambdaN, p.ell);
  const double e_cut = p.epsilon * p.epsilon / 16.0 *
                       std::abs(std::log(p.epsilon)) *
                       std::pow(static_cast<double>(p.ell), d);
  const double band = 1.0 - p.xi / 16.0;

  // Angles extended by the aligned phase beyond the volume, so blocks poking
  // out are still scored.
  auto extended = [&](const LatticeBox& q) {
    Region qr = Region::of_box(q);
    std::vector<double> th(qr.size());
    for (std::size_t i = 0; i < qr.size(); ++i) {
      const Site& s = qr.site(i);
      th[i] = lambdaN.contains(s) ? sigma.at(s) : 0.0;
    }
    return SpinConfig::from_angles(qr, std::move(th));
  };

  for (const LatticeBox& q : enumerate_blocks(dbar, p.ell,
                                              BlockFamily::standard)) {
    SpinConfig sq = extended(q);
    if (dirichlet_energy(sq, sq.region) >= e_cut) eg.a1.push_back(q);
    std::array<double, 2> avg = block_average(sq, q);
    if (std::abs(avg[0]) <= band) eg.a3.push_back(q);
  }
  for (const LatticeBox& q : enumerate_blocks(dbar, p.ell,
                                              BlockFamily::staggered)) {
    SpinConfig sq = extended(q);
    if (dirichlet_energy(sq, sq.region) >= e_cut) eg.a2.push_back(q);
  }

  if (with_attribution) {
    const BoundaryCondition ext = BoundaryCondition::ext_bc(lambdaN);
    std::map<std::pair<Site, bool>, double> cache;
    auto headroom = [&](const LatticeBox& q, bool staggered) {
      auto key = std::make_pair(q.corner, staggered);
      auto it = cache.find(key);
      if (it != cache.end()) return it->second;
      Region qr = region_intersect(Region::of_box(q), lambdaN);
      double v = 0;
      if (!qr.empty()) {
        std::vector<double> warm_th(qr.size());
        for (std::size_t i = 0; i < qr.size(); ++i)
          warm_th[i] = sigma.at(qr.site(i));
        SpinConfig warm = SpinConfig::from_angles(qr, warm_th);
        GroundResult gr = ground_energy(real, qr, ext, 1e-8, 20000, 4,
                                        seed + site_key(q.corner), &warm);
        const AscentProblem prob(real, qr, ext);
        v = gr.value - prob.value(warm_th);
      }
      cache.emplace(key, v);
      return v;
    };
    for (const LatticeBox& q : eg.a1) eg.attribution[0] += headroom(q, false);
    for (const LatticeBox& q : eg.a2) eg.attribution[1] += headroom(q, true);
    for (const LatticeBox& q : eg.a3) eg.attribution[2] += headroom(q, false);
  }
  return eg;
}

SurgeryTrace run_surgery(const SpinConfig& sigma, const Contour& g,
                         const Region& lambdaN,
                         const DisorderRealization& real,
                         const ClassifierParams& p, const SurgeryOptions& opt) {
  require(!g.touches_boundary,
          "run_surgery: contour touches the extraction boundary");
  require(g.scaleL == p.L, "run_surgery: contour scale disagrees with params");
  require(p.ell >= 2 && p.ell % 2 == 0,
          "run_surgery: fine scale must be even");

  SurgeryTrace t;
  XiClassifier xi_big(real, p.L, p);
  t.collar = collar_decomposition(g, sigma, lambdaN, xi_big);

  auto absorb = [&](const StageChange& st, int slot) {
    t.deltas[static_cast<std::size_t>(slot)] = st.delta;
    t.modified[static_cast<std::size_t>(slot)] =
        static_cast<std::int64_t>(st.changed.size());
    if (st.flagged) t.flagged = true;
    if (!st.note.empty()) t.notes.push_back(st.note);
  };

  Mod1Result m1 = mod1_reflect(sigma, t.collar, lambdaN, real, p.L);
  absorb(m1.stage, 0);
  StageChange m2 = mod2_damp(m1.stage.sigma, t.collar, lambdaN, real, p.L);
  absorb(m2, 1);
  Mod3Result m3 =
      mod3_optimize(m2.sigma, t.collar, lambdaN, real, p.L, opt.k_tol);
  absorb(m3.stage, 2);
  t.tau_sup = m3.tau_sup;
  Mod4Result m4 =
      mod4_interpolate(m3.stage.sigma, t.collar, lambdaN, real, p.ell);
  absorb(m4.stage, 3);
  t.rim_sup_plus = m4.rim_sup_plus;
  t.rim_sup_minus = m4.rim_sup_minus;

  XiClassifier xi_half(real, p.ell / 2, p);
  t.bulk = bulk_ground_state(real, g, lambdaN, xi_half);
  t.boundary_angle_sup = t.bulk.boundary_angle_sup;

  t.sign = exterior_label(contour_geometry(g, p.ell), recover_labels(g, p.ell));
  GlueResult gl =
      glue(m4.stage.sigma, g, t.bulk, t.sign, lambdaN, real, p.ell);
  absorb(gl.stage, 4);

  const SpinConfig& fin = gl.stage.sigma;
  Region diff = bit_diff(sigma, fin);
  t.total_delta = volume_delta(sigma, fin, diff, lambdaN, real);
  double staged = 0;
  for (double v : t.deltas) staged += v;
  t.bookkeeping_gap = std::abs(staged - t.total_delta);
  if (t.bookkeeping_gap > 1e-9)
    throw NumericError("run_surgery: stage deltas do not re-add to the total");

  t.gain = energy_gain(sigma, fin, lambdaN, real, g, p, opt.with_attribution,
                       opt.seed);
  if (opt.keep_stages) {
    t.input = sigma;
    t.s1 = std::move(m1.stage.sigma);
    t.s2 = std::move(m2.sigma);
    t.s3 = std::move(m3.stage.sigma);
    t.s_cc = std::move(m4.stage.sigma);
  }
  t.final_s = gl.stage.sigma;
  return t;
}

std::vector<SurgeryTrace> run_surgery_batch(
    const SpinConfig& sigma, const std::vector<Contour>& contours,
    const Region& lambdaN, const DisorderRealization& real,
    const ClassifierParams& p, const SurgeryOptions& opt, int threads) {
  std::vector<SurgeryTrace> out(contours.size());
  if (contours.empty()) return out;
  const int nt = std::max(
      1, std::min(threads, static_cast<int>(contours.size())));
  std::vector<std::exception_ptr> errs(contours.size());
  auto worker = [&](int t0) {
    for (std::size_t i = static_cast<std::size_t>(t0); i < contours.size();
         i += static_cast<std::size_t>(nt)) {
      try {
        out[i] = run_surgery(sigma, contours[i], lambdaN, real, p, opt);
      } catch (...) {
        errs[i] = std::current_exception();
      }
    }
  };
  if (nt == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (int k = 0; k < nt; ++k) pool.emplace_back(worker, k);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errs)
    if (e) std::rethrow_exception(e);
  return out;
}

std::string surgery_trace_json(const SurgeryTrace& t) {
  nlohmann::ordered_json j;
  j["sign"] = t.sign;
  j["deltas"] = t.deltas;
  j["modified"] = t.modified;
  j["total_delta"] = t.total_delta;
  j["bookkeeping_gap"] = t.bookkeeping_gap;
  j["boundary_angle_sup"] = t.boundary_angle_sup;
  j["rim_sup_plus"] = t.rim_sup_plus;
  j["rim_sup_minus"] = t.rim_sup_minus;
  j["tau_sup"] = t.tau_sup;
  j["flagged"] = t.flagged;
  j["notes"] = t.notes;
  j["bulk_blocks"] = t.bulk.blocks.size();
  j["gain"] = nlohmann::ordered_json{
      {"delta", t.gain.delta},
      {"energy_blocks", t.gain.a1.size()},
      {"energy_blocks_staggered", t.gain.a2.size()},
      {"alignment_blocks", t.gain.a3.size()},
      {"attribution", t.gain.attribution},
      {"n_large", t.gain.n_large}};
  return j.dump();
}

}  // namespace rfo
