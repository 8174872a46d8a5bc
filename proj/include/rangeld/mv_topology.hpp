#pragma once

// Truncated Mukherjee-Varadhan metric on orbit collections: Gaussian
// pair-difference test kernels, Lambda functionals on weighted clouds,
// minimizer-orbit sampling from a radial profile.

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

#include "rangeld/numerics.hpp"
#include "rangeld/parallel.hpp"
#include "rangeld/points.hpp"
#include "rangeld/rate_function.hpp"
#include "rangeld/rng.hpp"

namespace rangeld {

// f(u1, u2) = amplitude * exp(-|u1 - u2|^2 / (2 sigma^2))
struct TestFunctionSpec {
  double sigma = 1.0;
  double amplitude = 1.0;

  double operator()(double sq) const { return amplitude * std::exp(-0.5 * sq / (sigma * sigma)); }
};

inline std::vector<TestFunctionSpec> default_test_family() {
  return {{0.25, 1.0}, {0.5, 1.0}, {1.0, 1.0}, {2.0, 1.0}, {4.0, 1.0}};
}

struct OrbitComponent {
  Cloud cloud;
  double mass = 0.0;

  void validate() const {
    if (!(mass > 0) || mass > 1.0 + 1e-12)
      throw std::invalid_argument("OrbitComponent: mass must lie in (0, 1]");
  }
};

struct OrbitCollection {
  std::vector<OrbitComponent> components;

  void validate() const {
    double m = 0;
    for (const auto& c : components) {
      c.validate();
      m += c.mass;
    }
    if (m > 1.0 + 1e-12) throw std::invalid_argument("OrbitCollection: total mass exceeds 1");
  }
};

// Lambda(f, alpha) = sum_{i,j} w_i w_j f(x_i - x_j), exact double sum.
inline double lambda_of(const TestFunctionSpec& f, const Cloud& alpha, int workers = 1) {
  const std::size_t n = alpha.size();
  std::vector<double> row(n, 0.0);
  parallel_for(0, n, workers, [&](std::size_t i) {
    const double* xi = alpha.point(i);
    double acc = alpha.weights[i] * f(0.0);  // diagonal term
    for (std::size_t j = i + 1; j < n; ++j)
      acc += 2.0 * alpha.weights[j] * f(sqdist(xi, alpha.point(j), alpha.dim));
    row[i] = alpha.weights[i] * acc;
  });
  double total = 0;
  for (double v : row) total += v;
  return total;
}

inline double lambda_of(const TestFunctionSpec& f, const OrbitComponent& alpha, int workers = 1) {
  return lambda_of(f, alpha.cloud, workers);
}

struct DistanceReport {
  double value = 0.0;
  double mc_stderr = 0.0;  // propagated cloud-sampling error, 0 for exact clouds
};

// Lambda of a cloud estimated as a U-statistic with a jackknife-style
// standard error; used to attach mc_stderr to sampled-mixture distances.
inline DistanceReport lambda_with_error(const TestFunctionSpec& f, const Cloud& alpha,
                                        int workers = 1) {
  const std::size_t n = alpha.size();
  DistanceReport rep;
  if (n == 0) return rep;
  // per-point contribution h_i = w_i sum_j w_j f(x_i - x_j); Lambda = sum h_i
  std::vector<double> h(n, 0.0);
  parallel_for(0, n, workers, [&](std::size_t i) {
    double acc = 0;
    for (std::size_t j = 0; j < n; ++j)
      acc += alpha.weights[j] * f(sqdist(alpha.point(i), alpha.point(j), alpha.dim));
    h[i] = alpha.weights[i] * acc;
  });
  for (double v : h) rep.value += v;
  if (n < 2) return rep;
  double mean = 0;
  for (double v : h) mean += v;
  mean /= n;
  double var = 0;
  for (double v : h) var += (v - mean) * (v - mean);
  var /= (n - 1);
  rep.mc_stderr = 2.0 * std::sqrt(var * n);  // U-statistic linearization
  return rep;
}

// Truncated D: sum_r 2^{-r} (1 + |f_r|_inf)^{-1} |sum Lambda - sum Lambda|,
// with the cloud-sampling errors of the Lambda terms propagated in
// quadrature.
inline DistanceReport metric_d(const OrbitCollection& xi1, const OrbitCollection& xi2,
                               const std::vector<TestFunctionSpec>& family, int workers = 1) {
  if (family.empty()) throw std::invalid_argument("metric_d: empty test family");
  xi1.validate();
  xi2.validate();
  DistanceReport rep;
  double w = 1.0;
  for (const auto& f : family) {
    w *= 0.5;
    double s1 = 0, s2 = 0, var = 0;
    for (const auto& c : xi1.components) {
      const DistanceReport r = lambda_with_error(f, c.cloud, workers);
      s1 += r.value;
      var += r.mc_stderr * r.mc_stderr;
    }
    for (const auto& c : xi2.components) {
      const DistanceReport r = lambda_with_error(f, c.cloud, workers);
      s2 += r.value;
      var += r.mc_stderr * r.mc_stderr;
    }
    const double fw = w / (1.0 + f.amplitude);
    rep.value += fw * std::fabs(s1 - s2);
    rep.mc_stderr += fw * std::sqrt(var);
  }
  return rep;
}

// Draws `samples` points from the density phi^2 (normalized) by inverse-CDF
// in the radius plus a uniform direction; every sample carries weight 1/N.
inline OrbitComponent minimizer_orbit(const RadialProfile& profile, std::size_t samples,
                                      std::uint64_t seed) {
  const int d = profile.params.d;
  // tabulate the radial CDF of omega_{d-1} y(r)^2 r^{d-1} dr
  const double r_end = profile.r_match + 12.0 / std::max(profile.tail_rate, 0.1);
  Grid1D grid = Grid1D::graded(0.0, r_end, 5e-4);
  const std::size_t m = grid.nodes.size();
  std::vector<double> cdf(m, 0.0);
  for (std::size_t i = 1; i < m; ++i) {
    const double r0 = grid.nodes[i - 1], r1 = grid.nodes[i];
    auto f = [&](double r) {
      const double y = profile.value(r);
      return y * y * std::pow(r, d - 1);
    };
    // Simpson on the cell
    cdf[i] = cdf[i - 1] + (r1 - r0) / 6.0 * (f(r0) + 4 * f(0.5 * (r0 + r1)) + f(r1));
  }
  const double total = cdf.back();
  if (!(total > 0)) throw std::invalid_argument("minimizer_orbit: degenerate profile");
  for (auto& v : cdf) v /= total;

  OrbitComponent out;
  out.mass = 1.0;
  out.cloud.dim = d;
  out.cloud.coords.resize(samples * d);
  out.cloud.weights.assign(samples, 1.0 / double(samples));
  for (std::size_t i = 0; i < samples; ++i) {
    Philox rng(seed, i);
    const double u = rng.next_double();
    const auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
    double r;
    if (it == cdf.begin()) {
      r = grid.nodes.front();
    } else {
      const std::size_t k = std::size_t(it - cdf.begin());
      const double c0 = cdf[k - 1], c1 = cdf[k];
      const double t = c1 > c0 ? (u - c0) / (c1 - c0) : 0.5;
      r = grid.nodes[k - 1] + t * (grid.nodes[k] - grid.nodes[k - 1]);
    }
    // uniform direction: normalized Gaussian vector
    double nrm2 = 0;
    std::vector<double> g(d);
    do {
      nrm2 = 0;
      for (int k = 0; k < d; ++k) {
        g[k] = rng.next_gaussian();
        nrm2 += g[k] * g[k];
      }
    } while (nrm2 == 0);
    const double inv = r / std::sqrt(nrm2);
    for (int k = 0; k < d; ++k) out.cloud.coords[i * d + k] = g[k] * inv;
  }
  return out;
}

inline OrbitComponent center_component(const OrbitComponent& alpha) {
  OrbitComponent out = alpha;
  auto m = out.cloud.weighted_mean();
  for (auto& v : m) v = -v;
  out.cloud.translate(m);
  return out;
}

// Samples a Gaussian-mixture density in d=1 as a weighted cloud of `samples`
// points; weights (mixture masses) need not sum to 1 (sub-probability).
struct MixtureTerm {
  double mean = 0.0;
  double var = 1.0;
  double weight = 1.0;
};

inline OrbitComponent sample_mixture_1d(const std::vector<MixtureTerm>& terms,
                                        std::size_t samples, std::uint64_t seed) {
  double mass = 0;
  for (const auto& t : terms) mass += t.weight;
  OrbitComponent out;
  out.mass = mass;
  out.cloud.dim = 1;
  out.cloud.coords.resize(samples);
  out.cloud.weights.assign(samples, mass / double(samples));
  for (std::size_t i = 0; i < samples; ++i) {
    Philox rng(seed, i);
    double u = rng.next_double() * mass;
    std::size_t k = 0;
    while (k + 1 < terms.size() && u > terms[k].weight) {
      u -= terms[k].weight;
      ++k;
    }
    out.cloud.coords[i] = terms[k].mean + std::sqrt(terms[k].var) * rng.next_gaussian();
  }
  return out;
}

}  // namespace rangeld
