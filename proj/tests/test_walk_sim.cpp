#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "rangeld/walk_sim.hpp"

using namespace rangeld;

// kappa_3 = 1/G(0), with the Watson value of G(0) frozen below and
// re-derived independently in the escape-probability test case.
static constexpr double kKappa3 = 0.659462645087328;

TEST_CASE("walk simulation basics") {
  SUBCASE("one step visits exactly one site") {
    WalkParams p;
    p.d = 3;
    p.n = 1;
    p.eps = 0.5;
    const auto rec = simulate(p, 0);
    CHECK(rec.range == 1);
    CHECK(rec.M == 1);
    CHECK(rec.skeleton_lattice.size() == (rec.M + 1) * 3);
  }
  SUBCASE("a straight-line walk never revisits") {
    WalkParams p;
    p.d = 3;
    p.n = 500;
    p.eps = 0.2;
    const auto rec = simulate_moves(p, [](std::uint64_t) { return 0u; });
    CHECK(rec.range == rec.n);
    // skeleton sits on multiples of the block length along the first axis
    const auto ell = std::int64_t(p.block_length());
    for (std::uint64_t i = 0; i <= rec.M; ++i) {
      CHECK(rec.skeleton_lattice[i * 3 + 0] == std::int64_t(i) * ell);
      CHECK(rec.skeleton_lattice[i * 3 + 1] == 0);
      CHECK(rec.skeleton_lattice[i * 3 + 2] == 0);
    }
  }
  SUBCASE("a back-and-forth walk visits two sites") {
    WalkParams p;
    p.d = 3;
    p.n = 100;
    p.eps = 1.0;
    const auto rec = simulate_moves(p, [](std::uint64_t t) { return unsigned(t % 2); });
    CHECK(rec.range == 2);
  }
  SUBCASE("same seed and stream reproduce; streams differ") {
    WalkParams p;
    p.d = 3;
    p.n = 4000;
    p.eps = 0.3;
    p.seed = 99;
    const auto a = simulate(p, 4), b = simulate(p, 4), c = simulate(p, 5);
    CHECK(a.range == b.range);
    CHECK(a.skeleton_lattice == b.skeleton_lattice);
    CHECK(a.skeleton_lattice != c.skeleton_lattice);
  }
  SUBCASE("block length and step rounding") {
    WalkParams p;
    p.d = 3;
    p.n = 1000;
    p.eps = 0.1;
    // floor(0.1 * 1000^{2/3}) up to pow() rounding at the integer boundary
    CHECK(p.block_length() >= 9);
    CHECK(p.block_length() <= 10);
    CHECK(p.steps() % p.block_length() == 0);
    p.n = 1005;
    CHECK(p.steps() % p.block_length() == 0);
    CHECK(p.steps() <= 1005);
  }
  SUBCASE("invalid parameters are rejected") {
    WalkParams p;
    p.d = 2;
    p.n = 10;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p.d = 3;
    p.n = 0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  }
  SUBCASE("site packing range is guarded") {
    const std::int64_t far[3] = {std::int64_t(1) << 30, 0, 0};
    CHECK_THROWS_AS(rangeld::detail::pack_site(far, 3), std::overflow_error);
  }
}

TEST_CASE("escape probability estimators") {
  const auto green = kappa_green_series(3);
  SUBCASE("series matches the closed-form lattice Green value") {
    const double watson = 1.0 / oracle::watson_green();
    CHECK(green.value == doctest::Approx(watson).epsilon(1e-6));
    CHECK(green.value == doctest::Approx(kKappa3).epsilon(1e-6));
    CHECK(green.std_error < 1e-5);
  }
  SUBCASE("monte carlo agrees within three standard errors") {
    const auto mc = kappa_monte_carlo(3, 100000, 40000, 17, 1);
    CHECK(mc.std_error > 0);
    CHECK(std::fabs(mc.value - green.value) < 3 * (mc.std_error + green.std_error));
  }
  SUBCASE("escape probability grows with dimension") {
    const double k3 = kappa_green_series(3).value;
    const double k4 = kappa_green_series(4).value;
    const double k5 = kappa_green_series(5).value;
    CHECK(k3 < k4);
    CHECK(k4 < k5);
    CHECK(k5 < 1.0);
  }
  SUBCASE("method dispatch") {
    CHECK(escape_probability(3, "green_series").value == green.value);
    CHECK_THROWS_AS(escape_probability(3, "bogus"), std::invalid_argument);
  }
}

TEST_CASE("range law of large numbers") {
  WalkParams p;
  p.d = 3;
  p.n = 100000;
  p.eps = 0.5;
  p.seed = 2024;
  const int W = 160;
  double s1 = 0, s2 = 0;
  for (int w = 0; w < W; ++w) {
    const double v = double(simulate(p, w).range) / double(p.steps());
    s1 += v;
    s2 += v * v;
  }
  const double mean = s1 / W;
  const double se = std::sqrt((s2 / W - mean * mean) / W);
  // E R_n / n exceeds kappa by a positive O(n^{-1/2})-type bias; the Green
  // tail bound dominates it rigorously
  const double bias = range_bias_bound(3, p.steps());
  CHECK(mean >= kKappa3 - 3 * se);
  CHECK(mean <= kKappa3 + bias + 3 * se);
}

TEST_CASE("range bias bound") {
  const double b5 = range_bias_bound(3, 100000);
  const double b6 = range_bias_bound(3, 1000000);
  CHECK(b5 > 0);
  CHECK(b6 > 0);
  CHECK(b6 < b5);
  CHECK(b5 < 0.02);
  CHECK(b6 < 0.005);
}

TEST_CASE("return probabilities") {
  const auto pr = return_probabilities(3, 10);
  REQUIRE(pr.size() >= 11);
  CHECK(pr[0] == doctest::Approx(1.0));
  CHECK(pr[1] == doctest::Approx(0.0));
  CHECK(pr[2] == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
  CHECK(pr[3] == doctest::Approx(0.0));
  // direct 4-step count: return probability = sum over move multisets
  double p4 = 0;
  // enumerate all 6^4 move sequences
  for (int a = 0; a < 6; ++a)
    for (int b = 0; b < 6; ++b)
      for (int c = 0; c < 6; ++c)
        for (int e = 0; e < 6; ++e) {
          int pos[3] = {0, 0, 0};
          for (int m : {a, b, c, e}) pos[m >> 1] += (m & 1) ? -1 : 1;
          if (!pos[0] && !pos[1] && !pos[2]) p4 += 1.0;
        }
  p4 /= 6.0 * 6.0 * 6.0 * 6.0;
  CHECK(pr[4] == doctest::Approx(p4).epsilon(1e-12));
}

TEST_CASE("skeleton measures") {
  WalkParams p;
  p.d = 3;
  p.n = 8000;
  p.eps = 0.3;
  p.seed = 5;
  const auto rec = simulate(p, 2);
  const auto [site, pair] = skeleton_measures(rec);

  CHECK(site.size() == rec.M);
  CHECK(pair.size() == rec.M);
  double sw = 0;
  for (double w : site.weights) sw += w;
  CHECK(sw == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(pair.total_weight() == doctest::Approx(1.0).epsilon(1e-12));
  // the pair measure's first marginal is exactly the site measure
  for (std::size_t i = 0; i < site.size(); ++i)
    for (int k = 0; k < 3; ++k) CHECK(pair.x(i)[k] == site.coords[i * 3 + k]);
  // consecutive-pair structure: second of pair i = first of pair i+1
  for (std::size_t i = 0; i + 1 < pair.size(); ++i)
    for (int k = 0; k < 3; ++k) CHECK(pair.y(i)[k] == pair.x(i + 1)[k]);

  SUBCASE("single-block walk yields one atom at the origin") {
    WalkParams q;
    q.d = 3;
    q.n = 10;
    q.eps = 3.0;  // ell >= n, so M = 1
    const auto r1 = simulate(q, 0);
    CHECK(r1.M == 1);
    const auto [s1, pr1] = skeleton_measures(r1);
    CHECK(s1.size() == 1);
    for (int k = 0; k < 3; ++k) CHECK(s1.coords[k] == 0.0);
  }
}

TEST_CASE("pair displacement tail") {
  WalkParams p;
  p.d = 3;
  p.n = 500;
  p.eps = 0.2;
  const auto rec = simulate_moves(p, [](std::uint64_t) { return 0u; });
  const auto [site, pair] = skeleton_measures(rec);
  (void)site;
  // every displacement has the same length ell * n^{-1/3}
  const double len = double(p.block_length()) * std::pow(double(rec.n), -1.0 / 3.0);
  CHECK(pair_displacement_tail(pair, 0.5 * len) == doctest::Approx(1.0));
  CHECK(pair_displacement_tail(pair, 2.0 * len) == doctest::Approx(0.0));
  CHECK(pair_displacement_tail(pair, 0.999 * len) == doctest::Approx(1.0));
  CHECK_THROWS_AS(pair_displacement_tail(pair, 0.0), std::invalid_argument);
  // monotone non-increasing in the threshold for a random walk
  const auto rnd = simulate(p, 3);
  const auto pr = skeleton_measures(rnd).second;
  double prev = 1.1;
  for (double A : {0.01, 0.1, 0.3, 1.0, 3.0}) {
    const double t = pair_displacement_tail(pr, A);
    CHECK(t <= prev + 1e-15);
    prev = t;
  }
}

TEST_CASE("conditioned sampling") {
  WalkParams p;
  p.d = 3;
  p.n = 2000;
  p.eps = 0.4;
  p.seed = 31;

  SUBCASE("a loose threshold accepts everything") {
    const auto cs = conditioned_sample(p, 1.0, 128, 128);
    CHECK(cs.attempts == 128);
    CHECK(cs.accepted.size() == 128);
    CHECK(cs.acceptance_rate == doctest::Approx(1.0));
    CHECK(!cs.exhausted);
  }
  SUBCASE("acceptance is monotone in the threshold") {
    const auto lo = conditioned_sample(p, 0.62, 512, 512);
    const auto hi = conditioned_sample(p, 0.70, 512, 512);
    CHECK(lo.acceptance_rate <= hi.acceptance_rate);
    for (const auto& r : lo.accepted) CHECK(double(r.range) <= 0.62 * double(p.steps()));
  }
  SUBCASE("worker count changes nothing") {
    const auto a = conditioned_sample(p, 0.65, 256, 20, 1);
    const auto b = conditioned_sample(p, 0.65, 256, 20, 3);
    CHECK(a.attempts == b.attempts);
    REQUIRE(a.accepted.size() == b.accepted.size());
    for (std::size_t i = 0; i < a.accepted.size(); ++i)
      CHECK(a.accepted[i].range == b.accepted[i].range);
  }
  SUBCASE("an impossible threshold exhausts the budget") {
    const auto cs = conditioned_sample(p, 1e-6, 64, 1);
    CHECK(cs.exhausted);
    CHECK(cs.accepted.empty());
    CHECK(cs.attempts == 64);
    CHECK(cs.wilson_lo == 0.0);
    CHECK(cs.wilson_hi < 0.1);
  }
  SUBCASE("wilson interval sanity") {
    double lo = -1, hi = -1;
    wilson_interval(0, 100, lo, hi);
    CHECK(lo == 0.0);
    CHECK(hi > 0);
    wilson_interval(100, 100, lo, hi);
    CHECK(hi > 0.99);
    CHECK(lo > 0.9);
    wilson_interval(50, 100, lo, hi);
    CHECK(lo < 0.5);
    CHECK(hi > 0.5);
  }
}

TEST_CASE("bridge hitting probability") {
  SUBCASE("hitting the terminal point is certain") {
    const std::vector<std::int64_t> x = {0, 0, 0}, y = {2, 0, 0};
    CHECK(bridge_hit_probability(x, y, y, 4, 3) == doctest::Approx(1.0));
  }
  SUBCASE("one step can only hit its endpoint") {
    const std::vector<std::int64_t> x = {0, 0, 0}, y = {1, 0, 0}, z = {0, 1, 0};
    CHECK(bridge_hit_probability(x, y, z, 1, 3) == doctest::Approx(0.0));
  }
  SUBCASE("agrees with brute-force path enumeration") {
    const std::vector<std::int64_t> x = {0, 0, 0};
    struct Case {
      std::vector<std::int64_t> y, z;
      int ell;
    };
    const std::vector<Case> cases = {
        {{2, 0, 0}, {1, 0, 0}, 4},
        {{0, 0, 0}, {1, 0, 0}, 4},
        {{1, 1, 0}, {0, 1, 0}, 4},
        {{1, 0, 0}, {-1, 0, 0}, 3},
    };
    for (const auto& c : cases) {
      const double mine = bridge_hit_probability(x, c.y, c.z, c.ell, 3);
      const double ref = oracle::enumerate_bridge_q(x, c.y, c.z, c.ell, 3);
      CHECK(mine == doctest::Approx(ref).epsilon(1e-12));
    }
  }
  SUBCASE("parity-impossible bridges are null") {
    const std::vector<std::int64_t> x = {0, 0, 0}, y = {1, 0, 0}, z = {0, 1, 0};
    CHECK_THROWS_WITH_AS(bridge_hit_probability(x, y, z, 4, 3),
                         "bridge_hit_probability: conditioning event null", std::runtime_error);
  }
  SUBCASE("translation invariance") {
    const std::vector<std::int64_t> x = {5, -3, 2}, y = {7, -3, 2}, z = {6, -3, 2};
    const std::vector<std::int64_t> x0 = {0, 0, 0}, y0 = {2, 0, 0}, z0 = {1, 0, 0};
    CHECK(bridge_hit_probability(x, y, z, 4, 3) ==
          doctest::Approx(bridge_hit_probability(x0, y0, z0, 4, 3)).epsilon(1e-14));
  }
}

TEST_CASE("conditional range given the skeleton") {
  WalkParams p;
  p.d = 3;
  p.n = 600;
  p.eps = 0.1;  // ell = 7
  p.seed = 77;
  REQUIRE(p.block_length() <= 12);

  SUBCASE("tower property: conditional means average to the range mean") {
    const int W = 24;
    double cond = 0, raw = 0, raw2 = 0, diff2 = 0;
    for (int w = 0; w < W; ++w) {
      const auto rec = simulate(p, w);
      const double c = conditional_range_exact(rec);
      const double r = double(rec.range) / double(rec.n);
      cond += c;
      raw += r;
      raw2 += r * r;
      diff2 += (r - c) * (r - c);
    }
    cond /= W;
    raw /= W;
    // the difference r - c is mean zero; use its spread for the test scale
    const double se = std::sqrt(diff2 / W / W);
    CHECK(std::fabs(cond - raw) < 4 * se + 1e-6);
    CHECK(cond > 0.3);
    CHECK(cond < 1.0);
  }
  SUBCASE("continuum functional is bounded by kappa") {
    const auto rec = simulate(p, 0);
    const double v = conditional_range_continuum(rec, p.eps, kKappa3);
    CHECK(v > 0);
    CHECK(v <= kKappa3 + 1e-9);
  }
  SUBCASE("exact path refuses oversized blocks") {
    WalkParams q;
    q.d = 3;
    q.n = 100000;
    q.eps = 0.5;  // ell far above 12
    const auto rec = simulate(q, 0);
    CHECK_THROWS_AS(conditional_range_exact(rec), std::invalid_argument);
  }
}

TEST_CASE("local clt error table") {
  SUBCASE("one step by hand") {
    const auto e = llt_error(1, 3);
    CHECK(e.parity_ok);
    // candidates: |1/6 - 2 p_{1/3}(e1)| and the pure-Gaussian leakage at
    // odd sites the walk cannot reach in one step, e.g. (1,1,1)
    const double e1[3] = {1, 0, 0};
    const double v111[3] = {1, 1, 1};
    const double cand1 = std::fabs(1.0 / 6.0 - 2 * heat_kernel(1.0 / 3.0, e1, 3));
    const double cand2 = 2 * heat_kernel(1.0 / 3.0, v111, 3);
    CHECK(e.sup_error == doctest::Approx(std::max(cand1, cand2)).epsilon(1e-12));
    CHECK(e.scaled == doctest::Approx(e.sup_error).epsilon(1e-12));  // n = 1
  }
  SUBCASE("error decays with n and parity holds") {
    const auto a = llt_error(10, 3);
    const auto b = llt_error(30, 3);
    CHECK(a.parity_ok);
    CHECK(b.parity_ok);
    CHECK(b.sup_error < a.sup_error);
    CHECK(a.scaled < 1.0);
    CHECK(b.scaled < 1.0);
  }
  SUBCASE("domain guards") {
    CHECK_THROWS_AS(llt_error(31, 3), std::invalid_argument);
    CHECK_THROWS_AS(llt_error(4, 2), std::invalid_argument);
  }
}

TEST_CASE("binomial large deviations") {
  SUBCASE("xi vanishes at C = 1 and grows with C") {
    CHECK(binomial_ld_check(100, 0.1, 1.0).xi == doctest::Approx(0.0).epsilon(1e-14));
    const double x2 = binomial_ld_check(100, 0.1, 2.0).xi;
    const double x4 = binomial_ld_check(100, 0.1, 4.0).xi;
    CHECK(x2 > 0);
    CHECK(x4 > x2);
    CHECK(x2 == doctest::Approx(std::log(2.0) + 0.5 - 1.0).epsilon(1e-14));
  }
  SUBCASE("the exponential bound dominates the exact tail") {
    for (std::size_t M : {50, 200, 1000})
      for (double eps0 : {0.05, 0.1, 0.2})
        for (double C : {1.5, 3.0, 8.0}) {
          const auto r = binomial_ld_check(M, eps0, C);
          CHECK(r.exact <= r.bound * (1 + 1e-12));
          CHECK(r.exact >= 0);
        }
  }
  SUBCASE("the bound vanishes with M") {
    const double b1 = binomial_ld_check(100, 0.1, 3.0).bound;
    const double b2 = binomial_ld_check(1000, 0.1, 3.0).bound;
    CHECK(b2 < b1);
    CHECK(b2 < 1e-8);
  }
}
