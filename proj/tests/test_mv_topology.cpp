#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "rangeld/mv_topology.hpp"
#include "rangeld/rate_function.hpp"
#include "rangeld/rng.hpp"

using namespace rangeld;

namespace {

Cloud gaussian_cloud_1d(std::size_t n, double sd, std::uint64_t seed, double mass = 1.0) {
  Cloud c;
  c.dim = 1;
  for (std::size_t i = 0; i < n; ++i) {
    Philox rng(seed, i);
    c.push({sd * rng.next_gaussian()}, mass / double(n));
  }
  return c;
}

OrbitCollection single(const Cloud& c, double mass) {
  OrbitCollection xi;
  xi.components.push_back({c, mass});
  return xi;
}

}  // namespace

TEST_CASE("lambda on simple clouds") {
  const TestFunctionSpec f{1.0, 1.0};
  SUBCASE("single atom") {
    Cloud c;
    c.dim = 2;
    c.push({0.3, -0.7}, 0.4);
    CHECK(lambda_of(f, c) == doctest::Approx(0.4 * 0.4 * f(0.0)).epsilon(1e-14));
  }
  SUBCASE("two atoms, hand-computed") {
    Cloud c;
    c.dim = 1;
    c.push({0.0}, 0.5);
    c.push({1.0}, 0.5);
    const double expect = 0.25 * f(0.0) * 2 + 2 * 0.25 * f(1.0);
    CHECK(lambda_of(f, c) == doctest::Approx(expect).epsilon(1e-14));
  }
  SUBCASE("translation invariance is exact") {
    Cloud c = gaussian_cloud_1d(500, 1.0, 4);
    const double before = lambda_of(f, c);
    c.translate({437.25});
    CHECK(lambda_of(f, c) == doctest::Approx(before).epsilon(1e-12));
  }
  SUBCASE("worker count does not change the sum") {
    const Cloud c = gaussian_cloud_1d(1000, 1.0, 9);
    CHECK(lambda_of(f, c, 1) == lambda_of(f, c, 3));
  }
  SUBCASE("gaussian cloud matches the closed form within error bars") {
    // x - x' ~ N(0, 2 v): E f = sigma / sqrt(sigma^2 + 2 v) = 1/sqrt(3)
    const Cloud c = gaussian_cloud_1d(4000, 1.0, 12);
    const auto rep = lambda_with_error(f, c);
    CHECK(rep.mc_stderr > 0);
    CHECK(std::fabs(rep.value - 1.0 / std::sqrt(3.0)) < 4 * rep.mc_stderr + 1.0 / 4000.0);
    CHECK(rep.value == doctest::Approx(lambda_of(f, c)).epsilon(1e-12));
  }
}

TEST_CASE("metric properties") {
  const auto family = default_test_family();
  const Cloud a = gaussian_cloud_1d(800, 1.0, 31);
  const Cloud b = gaussian_cloud_1d(800, 1.6, 32);
  const Cloud c = gaussian_cloud_1d(800, 0.6, 33);

  SUBCASE("identity and symmetry") {
    const auto xa = single(a, 1.0), xb = single(b, 1.0);
    CHECK(metric_d(xa, xa, family).value == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(metric_d(xa, xb, family).value ==
          doctest::Approx(metric_d(xb, xa, family).value).epsilon(1e-14));
    CHECK(metric_d(xa, xb, family).value > 0);
  }
  SUBCASE("triangle inequality") {
    const auto xa = single(a, 1.0), xb = single(b, 1.0), xc = single(c, 1.0);
    const double ab = metric_d(xa, xb, family).value;
    const double bc = metric_d(xb, xc, family).value;
    const double ac = metric_d(xa, xc, family).value;
    CHECK(ac <= ab + bc + 1e-12);
    CHECK(ab <= ac + bc + 1e-12);
  }
  SUBCASE("translation of any component is invisible") {
    auto xa = single(a, 1.0);
    auto xb = single(b, 1.0);
    const double before = metric_d(xa, xb, family).value;
    xb.components[0].cloud.translate({-275.0});
    CHECK(metric_d(xa, xb, family).value == doctest::Approx(before).epsilon(1e-10));
  }
  SUBCASE("fragmentation is detected") {
    // one component of mass 1 versus the same points split into two
    // far-apart half-mass components: the pair terms across the split vanish
    Cloud left = a, right = a;
    for (auto& w : left.weights) w *= 0.5;
    for (auto& w : right.weights) w *= 0.5;
    OrbitCollection split;
    split.components.push_back({left, 0.5});
    split.components.push_back({right, 0.5});
    const double dist = metric_d(single(a, 1.0), split, family).value;
    CHECK(dist > 0.05);
  }
  SUBCASE("vanishing mass perturbs the metric at most linearly") {
    const double tiny = 1e-3;
    auto xa = single(a, 1.0 - tiny);
    for (auto& w : xa.components[0].cloud.weights) w *= (1.0 - tiny);
    auto xb = xa;
    xb.components.push_back({gaussian_cloud_1d(50, 1.0, 99, tiny), tiny});
    const double dist = metric_d(xa, xb, family).value;
    CHECK(dist <= 10 * tiny);
  }
  SUBCASE("invalid collections are rejected") {
    OrbitCollection bad;
    bad.components.push_back({a, 0.8});
    bad.components.push_back({b, 0.5});
    CHECK_THROWS_AS(metric_d(bad, single(a, 1.0), family), std::invalid_argument);
    CHECK_THROWS_AS(metric_d(single(a, 1.0), single(b, 1.0), {}), std::invalid_argument);
  }
}

TEST_CASE("minimizer orbit sampling") {
  const auto pt = solve_rate_point(ProblemParams{3, 1.0, 0.5});
  REQUIRE(pt.converged);
  REQUIRE(pt.profile);
  const RadialProfile& prof = *pt.profile;

  // tabulated radial CDF used as the KS reference
  const double r_end = prof.r_match + 12.0 / prof.tail_rate;
  const Grid1D grid = Grid1D::graded(0.0, r_end, 5e-4);
  std::vector<double> cdf(grid.nodes.size(), 0.0);
  for (std::size_t i = 1; i < grid.nodes.size(); ++i) {
    const double r0 = grid.nodes[i - 1], r1 = grid.nodes[i];
    auto f = [&](double r) {
      const double y = prof.value(r);
      return y * y * r * r;
    };
    cdf[i] = cdf[i - 1] + (r1 - r0) / 6.0 * (f(r0) + 4 * f(0.5 * (r0 + r1)) + f(r1));
  }
  for (auto& v : cdf) v /= cdf.back();
  auto cdf_at = [&](double r) {
    const auto it = std::upper_bound(grid.nodes.begin(), grid.nodes.end(), r);
    if (it == grid.nodes.begin()) return 0.0;
    const std::size_t k = std::size_t(it - grid.nodes.begin()) - 1;
    if (k + 1 >= grid.nodes.size()) return 1.0;
    const double t = (r - grid.nodes[k]) / (grid.nodes[k + 1] - grid.nodes[k]);
    return cdf[k] + t * (cdf[k + 1] - cdf[k]);
  };

  SUBCASE("radii follow the profile law (KS test at the 1% level)") {
    const std::size_t N = 4000;
    const auto orb = minimizer_orbit(prof, N, 7);
    std::vector<double> radii(N);
    for (std::size_t i = 0; i < N; ++i)
      radii[i] = std::sqrt(sqnorm(orb.cloud.coords.data() + 3 * i, 3));
    std::sort(radii.begin(), radii.end());
    double ks = 0;
    for (std::size_t i = 0; i < N; ++i) {
      const double F = cdf_at(radii[i]);
      ks = std::max({ks, std::fabs(F - double(i) / N), std::fabs(F - double(i + 1) / N)});
    }
    CHECK(ks < 1.63 / std::sqrt(double(N)));
  }

  SUBCASE("agrees with an independent rejection sampler") {
    // rejection sampling of r^2 y(r)^2 under a constant envelope
    double env = 0;
    for (double r = 0; r < r_end; r += 0.01) {
      const double y = prof.value(r);
      env = std::max(env, y * y * r * r);
    }
    env *= 1.05;
    Philox rng(123, 0);
    double s1 = 0, s2 = 0, s4 = 0;
    const std::size_t M = 20000;
    std::size_t got = 0;
    while (got < M) {
      const double r = r_end * rng.next_double();
      const double y = prof.value(r);
      if (rng.next_double() * env <= y * y * r * r) {
        s1 += r;
        s2 += r * r;
        s4 += r * r * r * r;
        ++got;
      }
    }
    const double m2_ref = s2 / M;
    const double se_ref = std::sqrt((s4 / M - m2_ref * m2_ref) / M);

    const std::size_t N = 4000;
    const auto orb = minimizer_orbit(prof, N, 7);
    double t2 = 0, t4 = 0;
    for (std::size_t i = 0; i < N; ++i) {
      const double q = sqnorm(orb.cloud.coords.data() + 3 * i, 3);
      t2 += q;
      t4 += q * q;
    }
    const double m2 = t2 / N;
    const double se = std::sqrt((t4 / N - m2 * m2) / N);
    CHECK(std::fabs(m2 - m2_ref) < 4 * std::sqrt(se * se + se_ref * se_ref));
  }

  SUBCASE("second moment is seed-stable at the 3-sigma level") {
    const std::size_t N = 4000;
    double m[2], se[2];
    int idx = 0;
    for (std::uint64_t seed : {11ull, 77ull}) {
      const auto orb = minimizer_orbit(prof, N, seed);
      double t2 = 0, t4 = 0;
      for (std::size_t i = 0; i < N; ++i) {
        const double q = sqnorm(orb.cloud.coords.data() + 3 * i, 3);
        t2 += q;
        t4 += q * q;
      }
      m[idx] = t2 / N;
      se[idx] = std::sqrt((t4 / N - m[idx] * m[idx]) / N);
      ++idx;
    }
    CHECK(std::fabs(m[0] - m[1]) < 3 * std::sqrt(se[0] * se[0] + se[1] * se[1]));
  }

  SUBCASE("lambda regression value") {
    const auto orb = minimizer_orbit(prof, 4000, 77);
    const double lam = lambda_of(TestFunctionSpec{1.0, 1.0}, orb.cloud);
    CHECK(lam == doctest::Approx(0.872375).epsilon(1e-4));
  }
}

TEST_CASE("centering and 1-d mixture sampling") {
  SUBCASE("center_component zeroes the weighted mean") {
    OrbitComponent orb{gaussian_cloud_1d(1000, 1.0, 5), 1.0};
    orb.cloud.translate({3.5});
    const auto centered = center_component(orb);
    CHECK(centered.cloud.weighted_mean()[0] == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("mixture mass and moments") {
    std::vector<MixtureTerm> terms = {{-1.0, 0.25, 0.3}, {2.0, 1.0, 0.4}};
    const auto orb = sample_mixture_1d(terms, 200000, 8);
    CHECK(orb.mass == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(orb.cloud.weights.front() == doctest::Approx(0.7 / 200000.0));
    double mean = 0;
    for (double x : orb.cloud.coords) mean += x;
    mean /= orb.cloud.coords.size();
    const double expect = (0.3 * -1.0 + 0.4 * 2.0) / 0.7;
    CHECK(mean == doctest::Approx(expect).epsilon(0.02));
  }
}
