#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "rfo/random.hpp"

using namespace rfo;

TEST_CASE("inverse normal cdf hits standard quantiles") {
  CHECK(inverse_normal_cdf(0.5) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(inverse_normal_cdf(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
  CHECK(inverse_normal_cdf(0.995) == doctest::Approx(2.575829303548901).epsilon(1e-12));
  CHECK(inverse_normal_cdf(0.841344746068543) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(inverse_normal_cdf(1e-10) == doctest::Approx(-6.361340902404056).epsilon(1e-9));
  CHECK(inverse_normal_cdf(0.25) == doctest::Approx(-0.6744897501960817).epsilon(1e-12));
  CHECK_THROWS_AS(inverse_normal_cdf(0.0), std::invalid_argument);
  CHECK_THROWS_AS(inverse_normal_cdf(1.0), std::invalid_argument);
}

TEST_CASE("site-keyed gaussians are deterministic and seed-sensitive") {
  Site s(3, -7, 11);
  CHECK(gaussian_at(42, s) == gaussian_at(42, s));
  CHECK(gaussian_at(42, s) != gaussian_at(43, s));
  CHECK(gaussian_at(42, s) != gaussian_at(42, Site(3, -7, 12)));
  CHECK(gaussian_at(42, s, 0) != gaussian_at(42, s, 1));
  // coordinates are hashed independently, not summed
  CHECK(gaussian_at(1, Site(1, 2, 0)) != gaussian_at(1, Site(2, 1, 0)));
  CHECK(gaussian_at(1, Site(0, 3, 0)) != gaussian_at(1, Site(3, 0, 0)));
}

TEST_CASE("field statistics over a large sample") {
  // mean, variance, and the fraction beyond 1.96 sigma
  const int n = 1000000;
  double sum = 0, sq = 0;
  int beyond = 0;
  for (int i = 0; i < n; ++i) {
    double g = gaussian_at(123, Site(i % 1000, i / 1000, 0));
    sum += g;
    sq += g * g;
    if (std::fabs(g) > 1.959963984540054) ++beyond;
  }
  double mean = sum / n;
  double var = sq / n - mean * mean;
  CHECK(std::fabs(mean) < 5e-3);
  CHECK(std::fabs(var - 1.0) < 5e-3);
  CHECK(std::fabs(beyond / double(n) - 0.05) < 2e-3);
}

TEST_CASE("counter stream basics") {
  CounterRng a(9), b(9), c(10);
  for (int i = 0; i < 100; ++i) {
    std::uint64_t va = a.next_u64();
    CHECK(va == b.next_u64());
    CHECK(va != c.next_u64());
  }
  CounterRng r(77);
  for (int i = 0; i < 1000; ++i) {
    double u = r.next_u01();
    CHECK(u > 0.0);
    CHECK(u < 1.0);
    double w = r.next_uniform(-2.0, 3.0);
    CHECK(w >= -2.0);
    CHECK(w < 3.0);
    CHECK(r.next_below(7) < 7);
  }
}

TEST_CASE("next_below is roughly uniform") {
  CounterRng r(5150);
  int counts[5] = {0, 0, 0, 0, 0};
  const int n = 50000;
  for (int i = 0; i < n; ++i) ++counts[r.next_below(5)];
  for (int k = 0; k < 5; ++k)
    CHECK(std::fabs(counts[k] / double(n) - 0.2) < 0.01);
}
