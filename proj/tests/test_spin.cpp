#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "rfo/errors.hpp"
#include "rfo/fields.hpp"
#include "rfo/geometry.hpp"
#include "rfo/random.hpp"
#include "rfo/spin.hpp"

using namespace rfo;

namespace {

constexpr double kPi = std::numbers::pi;

Region box_region(const Site& corner, std::int64_t side, int dim) {
  return Region::of_box(LatticeBox::at_corner(corner, side, dim));
}

// Connected random blob grown site by site.
Region random_region(int dim, std::size_t target, CounterRng& rng) {
  std::vector<Site> sites{{0, 0, 0}};
  while (sites.size() < target) {
    const Site& base = sites[rng.next_below(sites.size())];
    Site q = base;
    const auto dir = rng.next_below(static_cast<std::uint64_t>(2 * dim));
    q[static_cast<int>(dir / 2)] += (dir & 1) ? 1 : -1;
    if (std::find(sites.begin(), sites.end(), q) == sites.end())
      sites.push_back(q);
  }
  return Region::from_sites(dim, sites);
}

SpinConfig random_spins(const Region& r, CounterRng& rng) {
  std::vector<double> th(r.size());
  for (double& t : th) t = rng.next_uniform(-kPi, kPi);
  return SpinConfig::from_angles(r, th);
}

double naive_pair_energy(const SpinConfig& sigma, const Region& region) {
  double e = 0;
  for (std::size_t i = 0; i < region.size(); ++i)
    for (std::size_t j = i + 1; j < region.size(); ++j)
      if (dist_l1(region.site(i), region.site(j)) == 1) {
        const double ca = std::cos(sigma.theta[i]) - std::cos(sigma.theta[j]);
        const double sa = std::sin(sigma.theta[i]) - std::sin(sigma.theta[j]);
        e += ca * ca + sa * sa;
      }
  return e;
}

}  // namespace

TEST_CASE("angle wrapping and the gradient comparison constants") {
  CHECK(wrapped_gradient(0.0, kPi / 4) == doctest::Approx(kPi / 4).epsilon(1e-14));
  CHECK(wrapped_gradient(-3 * kPi / 4, 3 * kPi / 4) ==
        doctest::Approx(-kPi / 2).epsilon(1e-14));
  CHECK(wrap_angle(kPi) == doctest::Approx(kPi));
  CHECK(wrap_angle(-kPi) == doctest::Approx(kPi));
  CHECK(wrap_angle(7 * kPi / 2) == doctest::Approx(-kPi / 2).epsilon(1e-12));

  for (int i = 0; i <= 2000; ++i) {
    const double w = -kPi + (2 * kPi * i) / 2000.0;
    CHECK(std::fabs(wrapped_gradient(0.0, w)) <= kPi + 1e-12);
    const double sq = 2 - 2 * std::cos(w);  // |sigma_x - sigma_y|^2
    CHECK(sq <= w * w + 1e-12);
    CHECK(sq >= (2 / kPi) * (2 / kPi) * w * w - 1e-12);
  }
}

TEST_CASE("dirichlet energy on hand-checked configurations") {
  Region pair = box_region({0, 0, 0}, 2, 1);
  CHECK(dirichlet_energy(SpinConfig::constant(pair, 1.3), pair) == 0.0);
  CHECK(dirichlet_energy(SpinConfig::from_angles(pair, {0.0, kPi / 2}), pair) ==
        doctest::Approx(2.0).epsilon(1e-14));

  Region sq = box_region({0, 0, 0}, 2, 2);
  std::vector<double> chk(4);
  for (std::size_t i = 0; i < 4; ++i) {
    const Site& s = sq.site(i);
    chk[i] = ((s[0] + s[1]) % 2 == 0) ? 0.0 : kPi;
  }
  CHECK(dirichlet_energy(SpinConfig::from_angles(sq, chk), sq) ==
        doctest::Approx(16.0).epsilon(1e-14));

  CounterRng rng(2024);
  Region blob = random_region(2, 17, rng);
  SpinConfig s = random_spins(blob, rng);
  CHECK(dirichlet_energy(s, blob) ==
        doctest::Approx(naive_pair_energy(s, blob)).epsilon(1e-12));
}

TEST_CASE("hamiltonian boundary variants") {
  Region r = box_region({0, 0, 0}, 4, 3);
  CounterRng rng(88);
  auto zero = DisorderRealization::sample(r, 1, 0.0);

  SUBCASE("zero field") {
    auto e1 = SpinConfig::constant(r, 0.0);
    CHECK(hamiltonian(e1, r, BoundaryCondition::free_bc(), zero) == 0.0);
    auto s = random_spins(r, rng);
    const double h = hamiltonian(s, r, BoundaryCondition::free_bc(), zero);
    CHECK(h == doctest::Approx(-0.5 * dirichlet_energy(s, r)).epsilon(1e-12));
    CHECK(h <= 0.0);
  }

  SUBCASE("fixed equals free minus the crossing sum") {
    auto real = DisorderRealization::sample(r, 21, 0.3);
    auto s = random_spins(r, rng);
    Region ob = boundary(r, BoundarySide::outer);
    auto s0 = random_spins(ob, rng);
    double crossing = 0;
    for (std::size_t i = 0; i < r.size(); ++i)
      for (int ax = 0; ax < 3; ++ax)
        for (int dir = 0; dir < 2; ++dir) {
          Site q = r.site(i);
          q[ax] += dir ? 1 : -1;
          if (!r.contains(q))
            crossing += 2 - 2 * std::cos(s0.at(q) - s.theta[i]);
        }
    const double hfree = hamiltonian(s, r, BoundaryCondition::free_bc(), real);
    const double hfix =
        hamiltonian(s, r, BoundaryCondition::fixed_bc(s0), real);
    CHECK(hfix == doctest::Approx(hfree - 0.5 * crossing).epsilon(1e-12));
  }

  SUBCASE("ext interpolates between free and fully pinned") {
    auto real = DisorderRealization::sample(r, 5, 0.2);
    auto s = random_spins(r, rng);
    Region everything = box_region({-2, -2, -2}, 8, 3);
    CHECK(hamiltonian(s, r, BoundaryCondition::ext_bc(everything), real) ==
          hamiltonian(s, r, BoundaryCondition::free_bc(), real));
    Region elsewhere = box_region({50, 50, 50}, 2, 3);
    Region ob = boundary(r, BoundarySide::outer);
    auto pinned = BoundaryCondition::fixed_bc(SpinConfig::constant(ob, 0.0));
    CHECK(hamiltonian(s, r, BoundaryCondition::ext_bc(elsewhere), real) ==
          hamiltonian(s, r, pinned, real));
  }

  SUBCASE("missing boundary data is rejected") {
    auto s = random_spins(r, rng);
    auto short_bc = BoundaryCondition::fixed_bc(
        SpinConfig::constant(box_region({0, 0, 4}, 1, 3), 0.0));
    CHECK_THROWS_AS((void)hamiltonian(s, r, short_bc, zero),
                    std::invalid_argument);
  }
}

TEST_CASE("block averages") {
  LatticeBox box = LatticeBox::at_corner({0, 0, 0}, 4, 2);
  Region r = Region::of_box(box);
  auto m1 = block_average(SpinConfig::constant(r, 0.0), box);
  CHECK(m1[0] == doctest::Approx(1.0));
  CHECK(m1[1] == doctest::Approx(0.0));

  std::vector<double> half(r.size());
  for (std::size_t i = 0; i < r.size(); ++i)
    half[i] = (r.site(i)[0] < 2) ? 0.0 : kPi;
  auto m2 = block_average(SpinConfig::from_angles(r, half), box);
  CHECK(std::fabs(m2[0]) < 1e-14);
  CHECK(std::fabs(m2[1]) < 1e-14);

  LatticeBox big = LatticeBox::at_corner({0, 0, 0}, 32, 2);
  Region br = Region::of_box(big);
  CounterRng rng(777);
  auto m3 = block_average(random_spins(br, rng), big);
  CHECK(std::hypot(m3[0], m3[1]) < 0.1);

  ScalarField f{r, std::vector<double>(r.size(), 2.5)};
  CHECK(block_average(f, box) == doctest::Approx(2.5));
}

TEST_CASE("free-boundary decomposition is an identity") {
  CounterRng rng(300);
  SUBCASE("zero field reduces to the two-component gradient split") {
    LatticeBox q = LatticeBox::at_corner({0, 0, 0}, 4, 2);
    Region r = Region::of_box(q);
    auto zero = DisorderRealization::sample(r, 1, 0.0);
    auto s = random_spins(r, rng);
    auto br = decompose_free(s, q, 0.25, zero);
    CHECK(br.parts.at("half_energy_field") == 0.0);
    CHECK(br.parts.at("mass_pairing") == 0.0);
    CHECK(br.parts.at("mean_field_cross") == 0.0);
    CHECK(std::fabs(br.residual) <= 1e-10 * (1 + std::fabs(br.total)));
  }
  SUBCASE("aligned configuration sums to zero") {
    LatticeBox q = LatticeBox::at_corner({-1, 2, 0}, 5, 2);
    Region r = Region::of_box(q);
    auto real = DisorderRealization::sample(r, 9, 0.2);
    auto br = decompose_free(SpinConfig::constant(r, 0.0), q, 0.1, real);
    CHECK(br.total == 0.0);
    CHECK(std::fabs(br.parts_sum()) < 1e-12);
  }
  SUBCASE("randomized ensemble") {
    int n = 0;
    for (int d = 1; d <= 3; ++d)
      for (std::int64_t side = 3; side <= 8; ++side)
        for (int rep = 0; rep < (d == 3 ? 5 : 6); ++rep) {
          LatticeBox q = LatticeBox::at_corner({0, 0, 0}, side, d);
          Region r = Region::of_box(q);
          auto real = DisorderRealization::sample(
              r, 1000 + static_cast<std::uint64_t>(n), 0.4);
          auto s = random_spins(r, rng);
          const double lambda = (n % 3 == 0) ? 0.0 : 0.05 * (n % 3);
          auto br = decompose_free(s, q, lambda, real);
          CHECK(std::fabs(br.residual) <= 1e-10 * (1 + std::fabs(br.total)));
          const double mean_alpha = block_average(ScalarField{r, real.alpha}, q);
          CHECK(std::fabs(br.parts.at("mean_field_cross")) <=
                real.epsilon * std::fabs(mean_alpha) * double(r.size()) + 1e-12);
          ++n;
        }
    CHECK(n >= 100);
  }
}

TEST_CASE("fixed-boundary decomposition is an identity") {
  CounterRng rng(400);
  SUBCASE("randomized ensemble on blobs") {
    for (int rep = 0; rep < 40; ++rep) {
      const int d = 1 + rep % 3;
      Region r = random_region(d, 10 + rep % 15, rng);
      Region frame = region_union(r, boundary(r, BoundarySide::outer));
      auto real = DisorderRealization::sample(frame, 52 + rep, 0.3);
      auto s = random_spins(r, rng);
      auto s0 = random_spins(boundary(r, BoundarySide::outer), rng);
      const double lambda = 0.05 * (rep % 4);
      auto br = decompose_dirichlet(s, r, s0, lambda, real);
      CHECK(std::fabs(br.residual) <= 1e-10 * (1 + std::fabs(br.total)));
    }
  }
  SUBCASE("second-axis alignment exposes the boundary pairing") {
    Region r = box_region({0, 0, 0}, 5, 2);
    Region ob = boundary(r, BoundarySide::outer);
    auto real = DisorderRealization::sample(region_union(r, ob), 77, 0.25);
    auto s = SpinConfig::constant(r, kPi / 2);
    auto s0 = SpinConfig::constant(ob, kPi / 2);
    auto br = decompose_dirichlet(s, r, s0, 0.05, real);
    auto g = solve_green(real, r, 0.05, Bc::dirichlet, 1e-12);
    double direct = 0;
    for (std::size_t i = 0; i < r.size(); ++i)
      for (int ax = 0; ax < 2; ++ax)
        for (int dir = 0; dir < 2; ++dir) {
          Site q = r.site(i);
          q[ax] += dir ? 1 : -1;
          if (!r.contains(q)) direct += g.g.values[i] * 1.0;
        }
    CHECK(br.parts.at("boundary_pairing") ==
          doctest::Approx(direct).epsilon(1e-10));
    CHECK(std::fabs(br.residual) <= 1e-10 * (1 + std::fabs(br.total)));
  }
}

TEST_CASE("change of variables") {
  Region r = box_region({0, 0, 0}, 4, 2);
  CounterRng rng(31);
  auto s = random_spins(r, rng);

  SUBCASE("zero field is the identity") {
    GreenField g;
    g.g = ScalarField{r, std::vector<double>(r.size(), 0.0)};
    auto f = change_of_variables(s, g, CovDirection::forward);
    auto b = change_of_variables(s, g, CovDirection::inverse);
    for (std::size_t i = 0; i < r.size(); ++i) {
      CHECK(f.theta[i] == s.theta[i]);
      CHECK(b.theta[i] == s.theta[i]);
    }
  }
  SUBCASE("quarter-turn angles are fixed points of the forward map") {
    GreenField g;
    g.g = ScalarField{r, std::vector<double>(r.size(), 0.7)};
    auto q = SpinConfig::constant(r, kPi / 2);
    auto f = change_of_variables(q, g, CovDirection::forward);
    for (double t : f.theta) CHECK(t == doctest::Approx(kPi / 2).epsilon(1e-15));
  }
  SUBCASE("round trips") {
    for (double supg : {0.5, 0.9}) {
      GreenField g;
      std::vector<double> gv(r.size());
      for (std::size_t i = 0; i < r.size(); ++i)
        gv[i] = supg * std::sin(0.37 * double(i) + 0.2);
      g.g = ScalarField{r, gv};
      auto phi = change_of_variables(s, g, CovDirection::forward);
      auto back = change_of_variables(phi, g, CovDirection::inverse);
      for (std::size_t i = 0; i < r.size(); ++i)
        CHECK(std::fabs(wrapped_gradient(back.theta[i], s.theta[i])) < 1e-11);
      auto there = change_of_variables(back, g, CovDirection::forward);
      for (std::size_t i = 0; i < r.size(); ++i)
        CHECK(std::fabs(wrapped_gradient(there.theta[i], phi.theta[i])) < 1e-11);
    }
  }
  SUBCASE("non-invertible field is rejected") {
    GreenField g;
    g.g = ScalarField{r, std::vector<double>(r.size(), 1.0)};
    CHECK_THROWS_AS((void)change_of_variables(s, g, CovDirection::forward),
                    std::invalid_argument);
  }
}

TEST_CASE("k functional") {
  Region r = box_region({0, 0, 0}, 3, 2);
  Region frame = region_union(r, boundary(r, BoundarySide::outer));
  PotentialField m;
  m.region = r;
  m.m = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};

  SUBCASE("zero angles collect the full potential") {
    auto z = SpinConfig::constant(frame, 0.0);
    double msum = 0;
    for (double v : m.m) msum += v;
    CHECK(k_functional(z, r, m, Bc::dirichlet) ==
          doctest::Approx(0.25 * msum).epsilon(1e-14));
    CHECK(k_functional(z, r, m, Bc::neumann) ==
          doctest::Approx(0.25 * msum).epsilon(1e-14));
  }
  SUBCASE("quarter turn against pinned surroundings") {
    std::vector<double> th(frame.size());
    for (std::size_t i = 0; i < frame.size(); ++i)
      th[i] = r.contains(frame.site(i)) ? kPi / 2 : 0.0;
    auto s = SpinConfig::from_angles(frame, th);
    const double crossings = 12;  // 3x3 box has 12 crossing edges
    CHECK(k_functional(s, r, m, Bc::dirichlet) ==
          doctest::Approx(-crossings).epsilon(1e-12));
    CHECK(k_functional(s, r, m, Bc::neumann) == doctest::Approx(0.0));
  }
  SUBCASE("matches a naive double loop") {
    CounterRng rng(64);
    auto s = random_spins(frame, rng);
    double edges = 0;
    for (std::size_t i = 0; i < r.size(); ++i)
      for (int ax = 0; ax < 2; ++ax)
        for (int dir = 0; dir < 2; ++dir) {
          Site q = r.site(i);
          q[ax] += dir ? 1 : -1;
          std::ptrdiff_t j = r.index_of(q);
          const double other = s.at(q);
          if (j >= 0) {
            if (dir == 1) edges += std::cos(other - s.at(r.site(i))) - 1;
          } else {
            edges += std::cos(other - s.at(r.site(i))) - 1;
          }
        }
    double pot = 0;
    for (std::size_t i = 0; i < r.size(); ++i) {
      const double c = std::cos(s.at(r.site(i)));
      pot += m.m[i] * c * c;
    }
    CHECK(k_functional(s, r, m, Bc::dirichlet) ==
          doctest::Approx(edges + 0.25 * pot).epsilon(1e-12));

    PotentialField z;
    z.region = r;
    z.m.assign(r.size(), 0.0);
    CHECK(k_functional(s, r, z, Bc::dirichlet) <= 1e-15);
    CHECK(k_functional(s, r, z, Bc::neumann) <= 1e-15);
  }
}

TEST_CASE("boundary-layer expansion") {
  SUBCASE("zero field leaves no remainder") {
    Region r = box_region({0, 0, 0}, 4, 2);
    Region frame = region_union(r, boundary(r, BoundarySide::outer));
    auto zero = DisorderRealization::sample(frame, 2, 0.0);
    CounterRng rng(11);
    auto s = random_spins(frame, rng);
    auto rep_d = blayer_check(s, r, 0.3, Bc::dirichlet, zero);
    CHECK(std::fabs(rep_d.residual) < 1e-12);
    auto rep_n = blayer_check(s, r, 0.3, Bc::neumann, zero);
    CHECK(std::fabs(rep_n.residual) < 1e-12);
  }
  SUBCASE("remainder sits inside the stated envelope") {
    CounterRng rng(12);
    for (int rep = 0; rep < 12; ++rep) {
      Region r = box_region({0, 0, 0}, 4 + rep % 3, 2);
      Region frame = region_union(r, boundary(r, BoundarySide::outer));
      auto real = DisorderRealization::sample(frame, 600 + rep, 0.15);
      auto s = random_spins(frame, rng);
      auto rd = blayer_check(s, r, 0.2, Bc::dirichlet, real);
      CHECK(std::fabs(rd.residual) <= 2.0 * rd.bound_value);
      auto rn = blayer_check(s, r, 0.2, Bc::neumann, real);
      CHECK(std::fabs(rn.residual) <= 2.0 * rn.bound_value);
    }
  }
  SUBCASE("remainder is third order in the field strength") {
    std::vector<double> ratios;
    for (int rep = 0; rep < 12; ++rep) {
      Region r = box_region({0, 0, 0}, 5, 2);
      Region frame = region_union(r, boundary(r, BoundarySide::outer));
      std::vector<double> res;
      for (double eps : {0.2, 0.1}) {
        auto real = DisorderRealization::sample(frame, 900 + rep, eps);
        auto g = solve_green(real, r, 0.0, Bc::dirichlet, 1e-13);
        auto flat = SpinConfig::constant(frame, 0.3);
        auto s = change_of_variables(flat, g, CovDirection::inverse);
        auto rd = blayer_check(s, r, 0.0, Bc::dirichlet, real);
        res.push_back(std::fabs(rd.residual));
      }
      ratios.push_back(res[0] / res[1]);
    }
    std::sort(ratios.begin(), ratios.end());
    CHECK(ratios[ratios.size() / 2] >= 4.0);
  }
}

TEST_CASE("uniform-rotation energy through the mean-zero inverse") {
  LatticeBox q = LatticeBox::at_corner({0, 0, 0}, 8, 2);
  Region r = Region::of_box(q);
  auto real = DisorderRealization::sample(r, 404, 0.12);

  auto at0 = spinwave_value(real, q, 0.0);
  auto atp = spinwave_value(real, q, kPi);
  auto ath = spinwave_value(real, q, kPi / 2);
  CHECK(ath.quadratic == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(at0.quadratic == doctest::Approx(atp.quadratic).epsilon(1e-12));
  CHECK(at0.quadratic >= 0.0);

  // Quadratic form identity against the interior edge energy of the field.
  auto g = solve_green(real, r, 0.0, Bc::neumann, 1e-13);
  double grad = 0;
  for (std::size_t i = 0; i < r.size(); ++i)
    for (int ax = 0; ax < 2; ++ax) {
      Site n = r.site(i);
      n[ax] += 1;
      if (r.contains(n)) {
        const double dg = g.g.at(n) - g.g.values[i];
        grad += dg * dg;
      }
    }
  CHECK(at0.quadratic == doctest::Approx(0.5 * grad).epsilon(1e-9));

  double asum = 0;
  for (double a : real.alpha) asum += a;
  CHECK(at0.abs_field_sum == doctest::Approx(0.12 * std::fabs(asum)));
}

TEST_CASE("reflection across the second axis preserves free values") {
  Region r = box_region({0, 0, 0}, 4, 2);
  auto real = DisorderRealization::sample(r, 15, 0.35);
  CounterRng rng(5);
  auto s = random_spins(r, rng);
  std::vector<double> reflected(r.size());
  for (std::size_t i = 0; i < r.size(); ++i)
    reflected[i] = wrap_angle(kPi - s.theta[i]);
  auto sr = SpinConfig::from_angles(r, reflected);
  CHECK(hamiltonian(sr, r, BoundaryCondition::free_bc(), real) ==
        doctest::Approx(hamiltonian(s, r, BoundaryCondition::free_bc(), real))
            .epsilon(1e-12));
  CHECK(dirichlet_energy(sr, r) ==
        doctest::Approx(dirichlet_energy(s, r)).epsilon(1e-12));
}
