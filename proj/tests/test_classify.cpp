#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "rfo/classify.hpp"
#include "rfo/random.hpp"
#include "rfo/spin.hpp"

using namespace rfo;

namespace {

LatticeBox box2(Coord x, Coord y, std::int64_t side) {
  return LatticeBox::at_corner(Site{x, y}, side, 2);
}

DisorderRealization zero_real(const Region& r, double eps) {
  DisorderRealization real;
  real.seed = 0;
  real.epsilon = eps;
  real.region = r;
  real.alpha.assign(r.size(), 0.0);
  return real;
}

std::int64_t fdiv(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b, r = a % b;
  return (r != 0 && ((r < 0) != (b < 0))) ? q - 1 : q;
}

// Naive scan labels: direct loops over every corner of the stride lattice in
// the window, direct per-box energy and average.
struct NaiveLabels {
  int l0 = 1, l1 = 0;
};

NaiveLabels naive_labels(const SpinConfig& s, const Site& z,
                         const ClassifierParams& p) {
  const int d = s.region.dim();
  const std::int64_t R = p.psi_radius < 0 ? 5 * p.ell : p.psi_radius;
  const std::int64_t S =
      p.psi_stride < 0 ? std::max<std::int64_t>(1, p.ell / 2) : p.psi_stride;
  const double vol = std::pow(static_cast<double>(p.ell), d);
  const double cut =
      std::isnan(p.psi0_energy)
          ? p.epsilon * p.epsilon * std::abs(std::log(p.epsilon)) * vol
          : p.psi0_energy;

  Coord clo[3] = {0, 0, 0}, chi[3] = {0, 0, 0};
  for (int a = 0; a < d; ++a) {
    clo[a] = -fdiv(-(z[a] - R), S);  // ceil
    chi[a] = fdiv(z[a] + R, S);
  }
  NaiveLabels out;
  bool energy_ok = true, all_plus = true, all_minus = true;
  std::int64_t admissible = 0;
  for (Coord i = clo[0]; i <= chi[0]; ++i)
    for (Coord j = (d > 1 ? clo[1] : 0); j <= (d > 1 ? chi[1] : 0); ++j)
      for (Coord k = (d > 2 ? clo[2] : 0); k <= (d > 2 ? chi[2] : 0); ++k) {
        LatticeBox q = LatticeBox::at_corner(
            Site{i * S, d > 1 ? j * S : 0, d > 2 ? k * S : 0}, p.ell, d);
        bool inside = true;
        for (const Site& x : q.sites()) inside = inside && s.region.contains(x);
        if (!inside) continue;
        ++admissible;
        double energy = 0, csum = 0;
        for (const Site& x : q.sites()) {
          csum += std::cos(s.at(x));
          for (int a = 0; a < d; ++a) {
            Site nb = x;
            nb[a] += 1;
            if (q.contains(nb))
              energy += 2.0 - 2.0 * std::cos(s.at(x) - s.at(nb));
          }
        }
        if (energy > cut) energy_ok = false;
        double avg = csum / vol;
        if (!(avg >= 1.0 - p.xi)) all_plus = false;
        if (!(avg <= -1.0 + p.xi)) all_minus = false;
      }
  out.l0 = energy_ok ? 1 : 0;
  out.l1 = admissible == 0 ? 0 : (all_plus ? 1 : (all_minus ? -1 : 0));
  return out;
}

// Dense Dirichlet solve on a box: (2d + lambda) on the diagonal, -1 between
// box neighbors, zero extension outside.
std::vector<double> dense_green(const DisorderRealization& real,
                                const LatticeBox& q, double lambda) {
  Region rb = Region::of_box(q);
  const std::size_t n = rb.size();
  const int d = rb.dim();
  std::vector<double> A(n * n, 0.0), b(n);
  for (std::size_t i = 0; i < n; ++i) {
    A[i * n + i] = 2.0 * d + lambda;
    for (int a = 0; a < d; ++a)
      for (int sgn : {-1, 1}) {
        Site nb = rb.site(i);
        nb[a] += sgn;
        std::ptrdiff_t j = rb.index_of(nb);
        if (j >= 0) A[i * n + static_cast<std::size_t>(j)] = -1.0;
      }
    b[i] = real.epsilon * real.alpha_at(rb.site(i));
  }
  for (std::size_t c = 0; c < n; ++c) {  // partial pivoting
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(A[r * n + c]) > std::abs(A[piv * n + c])) piv = r;
    for (std::size_t k = 0; k < n; ++k) std::swap(A[c * n + k], A[piv * n + k]);
    std::swap(b[c], b[piv]);
    for (std::size_t r = c + 1; r < n; ++r) {
      double f = A[r * n + c] / A[c * n + c];
      for (std::size_t k = c; k < n; ++k) A[r * n + k] -= f * A[c * n + k];
      b[r] -= f * b[c];
    }
  }
  std::vector<double> x(n);
  for (std::size_t ri = n; ri-- > 0;) {
    double acc = b[ri];
    for (std::size_t k = ri + 1; k < n; ++k) acc -= A[ri * n + k] * x[k];
    x[ri] = acc / A[ri * n + ri];
  }
  return x;
}

// Meeting-edge energy with zero extension, matching the classifier's
// convention: positive-direction interior edges once, crossings from both
// sides.
double meeting_grad_sq(const Region& rb, const std::vector<double>& g) {
  const int d = rb.dim();
  double acc = 0;
  for (std::size_t i = 0; i < rb.size(); ++i)
    for (int a = 0; a < d; ++a) {
      Site up = rb.site(i);
      up[a] += 1;
      std::ptrdiff_t j = rb.index_of(up);
      if (j >= 0) {
        double diff = g[i] - g[static_cast<std::size_t>(j)];
        acc += diff * diff;
      } else {
        acc += g[i] * g[i];
      }
      Site dn = rb.site(i);
      dn[a] -= 1;
      if (!rb.contains(dn)) acc += g[i] * g[i];
    }
  return acc;
}

}  // namespace

TEST_CASE("constant configurations label cleanly") {
  Region r = Region::of_box(box2(0, 0, 12));
  ClassifierParams p = ClassifierParams::calibrated(0.1, 4, 4);

  SpinConfig plus = SpinConfig::constant(r, 0.0);
  SpinConfig minus = SpinConfig::constant(r, 3.14159265358979323846);
  SpinConfig side = SpinConfig::constant(r, 1.57079632679489661923);
  PhaseField fp = phase_labels(plus, r, p);
  PhaseField fm = phase_labels(minus, r, p);
  PhaseField fs = phase_labels(side, r, p);
  for (std::size_t i = 0; i < r.size(); ++i) {
    const Site& z = r.site(i);
    CHECK(fp.psi0[i] == 1);
    CHECK(fs.psi0[i] == 1);
    CHECK(fs.psi1[i] == 0);
    CHECK(fs.psi[i] == 0);
    if (std::max(z[0], z[1]) <= 10) {  // window holds an admissible corner
      CHECK(fp.psi1[i] == 1);
      CHECK(fp.psi[i] == 1);
      CHECK(fm.psi[i] == -1);
    } else {  // vacuous band label at the far edge of the domain
      CHECK(fp.psi1[i] == 0);
      CHECK(fm.psi[i] == 0);
    }
  }
  CHECK(psi_site(plus, Site{5, 5}, p) == 1);
  CHECK(psi_site(minus, Site{5, 5}, p) == -1);
  CHECK(fp.psi_at(Site{3, 7}) == 1);
}

TEST_CASE("a planted rough block kills the energy label nearby only") {
  Region r = Region::of_box(box2(0, 0, 16));
  std::vector<double> theta(r.size(), 0.0);
  LatticeBox rough = box2(8, 8, 4);
  for (std::size_t i = 0; i < r.size(); ++i) {
    const Site& s = r.site(i);
    if (rough.contains(s) && (s[0] + s[1]) % 2 == 0)
      theta[i] = 3.14159265358979323846;
  }
  SpinConfig sigma = SpinConfig::from_angles(r, theta);
  ClassifierParams p = ClassifierParams::calibrated(0.1, 4, 8);

  CHECK(psi0_site(sigma, Site{9, 9}, p) == 0);
  CHECK(psi0_site(sigma, Site{1, 1}, p) == 1);
  PhaseField f = phase_labels(sigma, r, p);
  CHECK(f.psi0[static_cast<std::size_t>(r.index_of(Site{9, 9}))] == 0);
  CHECK(f.psi0[static_cast<std::size_t>(r.index_of(Site{1, 1}))] == 1);
}

TEST_CASE("batch labels equal the naive scan") {
  struct Fixture {
    int d;
    std::int64_t side;
    double amp, base;
    std::uint64_t seed;
  };
  std::vector<Fixture> fixtures = {
      {1, 16, 0.05, 0.0, 11},  {1, 16, 2.5, 0.0, 12},
      {2, 12, 0.08, 0.0, 21},  {2, 12, 1.2, 0.0, 22},
      {2, 12, 0.3, 3.14159265358979323846, 23},
      {2, 10, 0.4, 1.57079632679489661923, 24},
      {3, 6, 0.1, 0.0, 31},    {3, 6, 1.8, 0.0, 32},
  };
  for (const Fixture& fx : fixtures) {
    LatticeBox b = LatticeBox::at_corner(Site{-2, fx.d > 1 ? 1 : 0, 0},
                                         fx.side, fx.d);
    Region r = Region::of_box(b);
    CounterRng rng(mix64(fx.seed));
    std::vector<double> theta(r.size());
    for (double& t : theta) t = fx.base + rng.next_uniform(-fx.amp, fx.amp);
    SpinConfig sigma = SpinConfig::from_angles(r, theta);

    for (ClassifierParams p :
         {ClassifierParams::calibrated(0.15, 4, 8), [&] {
            ClassifierParams q = ClassifierParams::calibrated(0.15, 2, 8);
            q.psi_radius = 5;
            q.psi_stride = 1;
            return q;
          }()}) {
      PhaseField f = phase_labels(sigma, r, p);
      for (std::size_t i = 0; i < r.size(); ++i) {
        NaiveLabels want = naive_labels(sigma, r.site(i), p);
        CHECK(f.psi0[i] == want.l0);
        CHECK(f.psi1[i] == want.l1);
        CHECK(f.psi[i] == want.l0 * want.l1);
      }
      Site probe = r.site(r.size() / 2);
      NaiveLabels want = naive_labels(sigma, probe, p);
      CHECK(psi0_site(sigma, probe, p) == want.l0);
      CHECK(psi1_site(sigma, probe, p) == want.l1);
      CHECK(psi_site(sigma, probe, p) == want.l0 * want.l1);
    }
  }
}

TEST_CASE("stride scan agrees with the exhaustive scan on decisive fields") {
  // Smooth fields with box statistics far from every cutoff: skipping corners
  // cannot change any label.
  Region r = Region::of_box(box2(0, 0, 14));
  int checked = 0;
  for (int rep = 0; rep < 100; ++rep) {
    CounterRng rng(mix64(500 + static_cast<std::uint64_t>(rep)));
    double amp = (rep % 2 == 0 ? 0.15 : 1.5) + rng.next_uniform(-0.05, 0.05);
    double base = (rep % 3 == 0) ? 0.0
                  : (rep % 3 == 1) ? 3.14159265358979323846
                                   : 1.57079632679489661923;
    double px = rng.next_uniform(0, 14), py = rng.next_uniform(0, 14);
    std::vector<double> theta(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) {
      const Site& s = r.site(i);
      theta[i] = base + amp *
                            std::sin(2 * 3.14159265358979323846 *
                                     (static_cast<double>(s[0]) + px) / 14.0) *
                            std::cos(2 * 3.14159265358979323846 *
                                     (static_cast<double>(s[1]) + py) / 14.0);
    }
    SpinConfig sigma = SpinConfig::from_angles(r, theta);

    ClassifierParams strided = ClassifierParams::calibrated(0.15, 4, 8);
    strided.psi_radius = 4;
    ClassifierParams full = strided;
    full.psi_stride = 1;
    for (Coord x = 5; x <= 8; ++x)
      for (Coord y = 5; y <= 8; ++y) {
        Site z{x, y};
        CHECK(psi0_site(sigma, z, strided) == psi0_site(sigma, z, full));
        CHECK(psi1_site(sigma, z, strided) == psi1_site(sigma, z, full));
        ++checked;
      }
  }
  CHECK(checked == 1600);
}

TEST_CASE("windows with no admissible box are vacuous") {
  Region r = Region::of_box(box2(0, 0, 3));
  SpinConfig sigma = SpinConfig::constant(r, 0.3);
  ClassifierParams p = ClassifierParams::calibrated(0.1, 4, 4);
  CHECK(psi0_site(sigma, Site{1, 1}, p) == 1);
  CHECK(psi1_site(sigma, Site{1, 1}, p) == 0);
  CHECK(psi_site(sigma, Site{1, 1}, p) == 0);
  PhaseField f = phase_labels(sigma, r, p);
  for (std::size_t i = 0; i < r.size(); ++i) {
    CHECK(f.psi0[i] == 1);
    CHECK(f.psi1[i] == 0);
  }
}

TEST_CASE("coarse labels: unanimity, propagation, block constancy") {
  ClassifierParams p = ClassifierParams::calibrated(0.15, 2, 4);
  p.psi_radius = 2;
  p.psi_stride = 1;
  p.big_radius = 8;

  Region world = Region::of_box(box2(-24, -24, 64));
  Region lambda = Region::of_box(box2(-16, -16, 48));

  SpinConfig sea = SpinConfig::constant(world, 0.0);
  BlockPhaseField bp = big_phase_labels(sea, lambda, p);
  for (std::size_t i = 0; i < lambda.size(); ++i) CHECK(bp.label[i] == 1);

  // One flipped small block: every coarse block within the window loses the
  // label, distant blocks keep it.
  std::vector<double> theta(world.size(), 0.0);
  LatticeBox flip = box2(6, 6, 2);
  for (std::size_t i = 0; i < world.size(); ++i)
    if (flip.contains(world.site(i))) theta[i] = 3.14159265358979323846;
  SpinConfig dam = SpinConfig::from_angles(world, theta);
  BlockPhaseField bd = big_phase_labels(dam, lambda, p);

  CHECK(bd.at(Site{5, 5}) == 0);
  CHECK(bd.at(Site{-16, -16}) == 1);
  CHECK(bd.at(Site{-16, -16}) == big_label_site(dam, Site{-16, -16}, p));
  CHECK(bd.at(Site{5, 5}) == big_label_site(dam, Site{5, 5}, p));

  // Block constancy.
  for (const LatticeBox& b : enumerate_blocks(lambda, p.L,
                                              BlockFamily::standard)) {
    int v = bd.at(b.corner);
    for (const Site& s : b.sites()) CHECK(bd.at(s) == v);
  }

  SpinConfig down = SpinConfig::constant(world, 3.14159265358979323846);
  BlockPhaseField bm = big_phase_labels(down, lambda, p);
  for (std::size_t i = 0; i < lambda.size(); ++i) CHECK(bm.label[i] == -1);
}

TEST_CASE("opposite coarse labels are never closed-adjacent") {
  ClassifierParams p = ClassifierParams::calibrated(0.15, 2, 4);
  p.psi_radius = 2;
  p.psi_stride = 1;
  p.big_radius = 4;

  Region world = Region::of_box(box2(-16, -16, 48));
  Region lambda = Region::of_box(box2(-8, -8, 32));
  std::vector<double> theta(world.size(), 0.0);
  for (std::size_t i = 0; i < world.size(); ++i)
    if (world.site(i)[0] >= 8) theta[i] = 3.14159265358979323846;
  SpinConfig sigma = SpinConfig::from_angles(world, theta);
  BlockPhaseField b = big_phase_labels(sigma, lambda, p);

  bool saw_plus = false, saw_minus = false;
  for (std::size_t i = 0; i < lambda.size(); ++i) {
    saw_plus = saw_plus || b.label[i] == 1;
    saw_minus = saw_minus || b.label[i] == -1;
    if (b.label[i] == 0) continue;
    for (Coord dx = -1; dx <= 1; ++dx)
      for (Coord dy = -1; dy <= 1; ++dy) {
        Site nb{lambda.site(i)[0] + dx, lambda.site(i)[1] + dy};
        if (!lambda.contains(nb)) continue;
        CHECK(b.label[i] * b.at(nb) >= 0);
      }
  }
  CHECK(saw_plus);
  CHECK(saw_minus);
}

TEST_CASE("zero disorder fails exactly the density conditions") {
  Region r = Region::of_box(box2(0, 0, 8));
  DisorderRealization real = zero_real(r, 0.2);
  ClassifierParams p = ClassifierParams::calibrated(0.2, 2, 8);
  BoxReport rep = box_nice(real, box2(0, 0, 8), p);
  CHECK(!rep.nice);
  for (const auto& c : rep.checks) {
    if (c.name == "grad_density" || c.name == "avg_window") {
      CHECK(!c.pass);
      CHECK(c.value == 0.0);
    } else {
      CHECK(c.pass);
    }
  }
}

TEST_CASE("niceness report is coherent and monotone in the window") {
  Region r = Region::of_box(box2(-8, 0, 16));
  DisorderRealization real = DisorderRealization::sample(r, 777, 0.25);
  ClassifierParams p = ClassifierParams::calibrated(0.25, 4, 16);
  BoxReport rep = box_nice(real, box2(-8, 0, 16), p);

  bool conj = true;
  for (const auto& c : rep.checks) {
    CHECK(c.pass == (c.value >= c.low && c.value <= c.high));
    conj = conj && c.pass;
  }
  CHECK(rep.nice == conj);
  CHECK(rep.checks.size() == 16);  // 2 masses x (2 bc x 3 legs + window) + 2

  ClassifierParams wider = p;
  wider.A = p.A / 10;
  wider.B = p.B * 10;
  BoxReport rep2 = box_nice(real, box2(-8, 0, 16), wider);
  for (std::size_t i = 0; i < rep.checks.size(); ++i)
    if (rep.checks[i].pass) CHECK(rep2.checks[i].pass);

  ClassifierParams tight = p;
  tight.sup_field = 1e-12;
  CHECK(!box_nice(real, box2(-8, 0, 16), tight).nice);
}

TEST_CASE("windowed potential event matches a dense recomputation") {
  LatticeBox q = box2(2, -3, 6);
  Region rb = Region::of_box(q);
  DisorderRealization real = DisorderRealization::sample(rb, 4242, 0.2);
  const double lambda = 0.3;
  const std::int64_t r = 2;
  const double A = 0.05;

  std::vector<double> g = dense_green(real, q, lambda);
  std::vector<double> m(rb.size(), 0.0);
  for (std::size_t i = 0; i < rb.size(); ++i)
    for (int a = 0; a < 2; ++a)
      for (int sgn : {-1, 1}) {
        Site nb = rb.site(i);
        nb[a] += sgn;
        std::ptrdiff_t j = rb.index_of(nb);
        double diff = g[i] - (j >= 0 ? g[static_cast<std::size_t>(j)] : 0.0);
        m[i] += diff * diff;
      }
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < rb.size(); ++i) {
    const Site& x = rb.site(i);
    double sum = 0;
    for (std::size_t j = 0; j < rb.size(); ++j)
      if (dist_inf(x, rb.site(j)) <= r) sum += m[j];
    worst = std::min(worst,
                     sum / std::pow(static_cast<double>(r), 2) -
                         A * real.epsilon * real.epsilon);
  }

  AvgPotentialWindow ev = avg_potential_event(real, q, r, A, lambda);
  CHECK(ev.margin == doctest::Approx(worst).epsilon(1e-9));
  CHECK(ev.holds == (worst >= 0));

  AvgPotentialWindow flat =
      avg_potential_event(zero_real(rb, 0.2), q, r, A, lambda);
  CHECK(!flat.holds);
  CHECK(flat.margin == doctest::Approx(-A * 0.2 * 0.2));
}

TEST_CASE("goodness caches per standard block and spreads by intersection") {
  Region r = Region::from_sites(2, [] {
    std::vector<Site> v;
    for (Coord x = 0; x < 8; ++x)
      for (Coord y = 0; y < 4; ++y) v.push_back(Site{x, y});
    return v;
  }());
  DisorderRealization real = zero_real(r, 0.2);
  real.alpha[static_cast<std::size_t>(r.index_of(Site{6, 2}))] = 10.0;

  ClassifierParams p = ClassifierParams::calibrated(0.2, 2, 4);
  p.A = 0.0;          // zero-field blocks stay nice
  p.sup_alpha = 1.0;  // the spike flips its block

  XiClassifier cls(real, 4, p);
  CHECK(cls.good_standard(Site{0, 0}));
  CHECK(cls.good_standard(Site{0, 0}));
  CHECK(!cls.good_standard(Site{4, 0}));
  CHECK(cls.xi(LatticeBox::at_corner(Site{0, 0}, 4, 2)) == 1);
  CHECK(cls.xi(LatticeBox::at_corner(Site{4, 0}, 4, 2)) == 0);
  CHECK(cls.xi(LatticeBox::at_corner(Site{2, 0}, 4, 2)) == 1);  // straddles
  CHECK_THROWS_AS(cls.good_standard(Site{1, 0}), std::invalid_argument);
}

TEST_CASE("region taxonomy: clean, zero-field, and spiked realizations") {
  ClassifierParams p = ClassifierParams::calibrated(0.3, 2, 4);
  Region y = Region::of_box(box2(0, 0, 8));
  Region cover = Region::of_box(box2(-4, -4, 16));

  DisorderRealization real = DisorderRealization::sample(cover, 90125, 0.3);
  RegionReport rep = region_taxonomy(real, y, p);
  CHECK(rep.good);
  CHECK(rep.bad_blocks == 0);
  CHECK(rep.regular.size() == 3);
  for (const auto& [scale, ok] : rep.regular) CHECK(ok);
  CHECK(rep.clean);
  for (const auto& c : rep.checks) CHECK(c.pass == (c.lhs <= c.rhs));

  DisorderRealization flat = zero_real(cover, 0.3);
  RegionReport rep0 = region_taxonomy(flat, y, p);
  CHECK(!rep0.good);
  CHECK(rep0.bad_blocks == 4);
  for (const auto& [scale, ok] : rep0.regular) CHECK(ok);
  CHECK(!rep0.clean);

  DisorderRealization spiked = real;
  spiked.alpha[static_cast<std::size_t>(cover.index_of(Site{1, 1}))] = 25.0;
  ClassifierParams ps = p;
  ps.rr4_cut = 5.0;
  ps.rr4_rhs = 1e-12;
  RegionReport reps = region_taxonomy(spiked, y, ps);
  for (const auto& [scale, ok] : reps.regular) CHECK(!ok);
  CHECK(!reps.clean);
  bool saw_fail = false;
  for (const auto& c : reps.checks)
    if (c.name == "sup_stat") {
      CHECK(!c.pass);
      saw_fail = true;
    }
  CHECK(saw_fail);
}

TEST_CASE("region taxonomy rejects bad regions") {
  ClassifierParams p = ClassifierParams::calibrated(0.3, 2, 4);
  Region cover = Region::of_box(box2(-8, -8, 32));
  DisorderRealization real = DisorderRealization::sample(cover, 5, 0.3);
  CHECK_THROWS_AS(region_taxonomy(real, Region::of_box(box2(0, 0, 6)), p),
                  std::invalid_argument);
  Region split = region_union(Region::of_box(box2(0, 0, 4)),
                              Region::of_box(box2(12, 12, 4)));
  CHECK_THROWS_AS(region_taxonomy(real, split, p), std::invalid_argument);
}

TEST_CASE("block statistics match a dense double loop") {
  const double lambda_reg = 0.35;
  for (int rep = 0; rep < 20; ++rep) {
    ClassifierParams p = ClassifierParams::calibrated(0.22, 2, 4);
    p.shift_range = 1;
    p.regular_lambdas = {lambda_reg};
    Region y = Region::of_box(box2(0, 0, 4));
    Region cover = Region::of_box(box2(-6, -6, 16));
    DisorderRealization real =
        DisorderRealization::sample(cover, 3000 + static_cast<std::uint64_t>(rep),
                                    0.22);

    // Oracle: per scale, per block, per shift, dense Dirichlet solves.
    Region delta = enlarge(y, p.L, p.ell);
    struct Stat {
      std::vector<double> F, Fg, R, meanabs;
    };
    std::map<std::int64_t, Stat> stats;
    std::vector<double> pool_f, pool_fg;
    for (std::int64_t scale : {std::int64_t{1}, std::int64_t{2}, std::int64_t{4}}) {
      std::vector<LatticeBox> qs =
          enumerate_blocks(delta, scale, BlockFamily::standard);
      Stat st;
      const double vol = std::pow(static_cast<double>(scale), 2);
      for (const LatticeBox& q : qs) {
        double fmax = 0, fgmax = 0, rmax = 0, msum = 0;
        for (Coord sx = -1; sx <= 1; ++sx)
          for (Coord sy = -1; sy <= 1; ++sy) {
            LatticeBox qe = LatticeBox::at_corner(
                Site{q.corner[0] + sx, q.corner[1] + sy}, scale, 2);
            Region rb = Region::of_box(qe);
            std::vector<double> g = dense_green(real, qe, lambda_reg);
            double l2 = 0;
            for (double v : g) l2 += v * v;
            fmax = std::max(fmax, l2 / vol);
            fgmax = std::max(fgmax, meeting_grad_sq(rb, g) / vol);
            double asum = 0;
            for (const Site& s : rb.sites()) {
              rmax = std::max(rmax, std::abs(real.alpha_at(s)));
              asum += real.alpha_at(s);
            }
            msum += std::abs(asum / vol);
          }
        st.F.push_back(fmax);
        st.Fg.push_back(fgmax);
        st.R.push_back(rmax);
        st.meanabs.push_back(msum);
        if (scale == 2) {
          pool_f.push_back(fmax);
          pool_fg.push_back(fgmax);
        }
      }
      stats[scale] = std::move(st);
    }
    // Cuts strictly between distinct order statistics (shift families of
    // adjacent blocks overlap, so maxima repeat), keeping every indicator
    // decision clear of solver noise.
    auto mid_cut = [](std::vector<double> v) {
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end(),
                          [](double a, double b) {
                            return std::abs(a - b) <= 1e-9 * (1 + std::abs(b));
                          }),
              v.end());
      std::size_t m = v.size() / 2;
      return 0.5 * (v[m - 1] + v[m]);
    };
    p.rr2_cut = mid_cut(pool_f);
    p.rr1_cut = mid_cut(pool_fg);

    RegionReport report = region_taxonomy(real, y, p);
    for (const auto& c : report.checks) {
      const Stat& st = stats.at(c.scale);
      double want = 0;
      if (c.name == "grad_stat") {
        for (double v : st.Fg)
          if (v >= p.rr1_cut) want += v;
      } else if (c.name == "field_stat") {
        for (double v : st.F)
          if (v >= p.rr2_cut) want += v;
      } else if (c.name == "sup_stat") {
        double cut = std::pow(std::abs(std::log(p.epsilon)), 50.0);
        for (double v : st.R)
          if (v > cut) want += v * v;
      } else if (c.name == "mean_stat") {
        for (double v : st.meanabs) want += v;
      } else {
        continue;
      }
      CHECK(c.lhs == doctest::Approx(want).epsilon(1e-8));
    }
  }
}

TEST_CASE("desk-size Gaussian boxes are mostly nice") {
  int nice = 0;
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    LatticeBox q = box2(0, 0, 16);
    DisorderRealization real =
        DisorderRealization::sample(Region::of_box(q), 600 + seed, 0.3);
    ClassifierParams p = ClassifierParams::calibrated(0.3, 4, 16);
    if (box_nice(real, q, p).nice) ++nice;
  }
  CHECK(nice >= 5);
}
