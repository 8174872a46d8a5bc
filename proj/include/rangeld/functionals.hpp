#pragma once

// Heat kernels, Brownian-bridge weights and the measure functionals Gamma,
// Gamma_delta, Psi_eps, phi_infty, relative entropy.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "rangeld/numerics.hpp"
#include "rangeld/parallel.hpp"
#include "rangeld/points.hpp"
#include "rangeld/rate_function.hpp"
#include "rangeld/rng.hpp"

namespace rangeld {

// p_s(x) = (2 pi s)^{-d/2} exp(-|x|^2 / (2s))
inline double heat_kernel(double s, const double* x, int d) {
  if (!(s > 0)) throw std::invalid_argument("heat_kernel: s must be positive");
  return std::pow(2 * M_PI * s, -0.5 * d) * std::exp(-0.5 * sqnorm(x, d) / s);
}

inline double heat_kernel(double s, const std::vector<double>& x, int d) {
  return heat_kernel(s, x.data(), d);
}

inline double log_heat_kernel_sq(double s, double sq, int d) {
  return -0.5 * d * std::log(2 * M_PI * s) - 0.5 * sq / s;
}

namespace detail {

// 16-point Gauss-Legendre nodes/weights on (0, 1).
inline const std::vector<std::pair<double, double>>& gl16() {
  static const std::vector<std::pair<double, double>> nw = [] {
    // roots of P_16 on (-1,1), mapped to (0,1)
    const double x[8] = {0.0950125098376374, 0.2816035507792589, 0.4580167776572274,
                         0.6178762444026438, 0.7554044083550030, 0.8656312023878318,
                         0.9445750230732326, 0.9894009349916499};
    const double w[8] = {0.1894506104550685, 0.1826034150449236, 0.1691565193950025,
                         0.1495959888165767, 0.1246289712555339, 0.0951585116824928,
                         0.0622535239386479, 0.0271524594117541};
    std::vector<std::pair<double, double>> v;
    for (int i = 7; i >= 0; --i) v.emplace_back(0.5 * (1 - x[i]), 0.5 * w[i]);
    for (int i = 0; i < 8; ++i) v.emplace_back(0.5 * (1 + x[i]), 0.5 * w[i]);
    return v;
  }();
  return nw;
}

template <class F>
double adaptive_simpson_rec(F& f, double a, double b, double fa, double fm, double fb,
                            double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6 * (fa + 4 * flm + fm);
  const double right = (b - m) / 6 * (fm + 4 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::fabs(delta) <= 15 * tol) return left + right + delta / 15;
  return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, tol / 2, depth - 1) +
         adaptive_simpson_rec(f, m, b, fm, frm, fb, right, tol / 2, depth - 1);
}

}  // namespace detail

// Adaptive Simpson with a subdivision cap of 2^max_depth panels.
template <class F>
double adaptive_simpson(F&& f, double a, double b, double tol = 1e-10, int max_depth = 14) {
  const double m = 0.5 * (a + b);
  const double fa = f(a), fm = f(m), fb = f(b);
  const double whole = (b - a) / 6 * (fa + 4 * fm + fb);
  return detail::adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

// Brownian-bridge weight
//   phi_eps(x, y) = int_0^eps p_{s/d}(-x) p_{(eps-s)/d}(y) / p_{eps/d}(y - x) ds.
// The integrand vanishes smoothly at both endpoints unless x = 0 or y = 0,
// where the weight itself is (integrably) infinite.
inline double bridge_weight(const double* x, const double* y, double eps, int d,
                            double tol = 1e-11) {
  if (!(eps > 0)) throw std::invalid_argument("bridge_weight: eps must be positive");
  const double sqx = sqnorm(x, d), sqy = sqnorm(y, d);
  if (sqx == 0.0 || sqy == 0.0) return std::numeric_limits<double>::infinity();
  double sqxy = 0;
  for (int k = 0; k < d; ++k) {
    const double t = y[k] - x[k];
    sqxy += t * t;
  }
  const double lden = log_heat_kernel_sq(eps / d, sqxy, d);
  auto integrand = [&](double s) -> double {
    if (s <= 0.0 || s >= eps) return 0.0;
    return std::exp(log_heat_kernel_sq(s / d, sqx, d) +
                    log_heat_kernel_sq((eps - s) / d, sqy, d) - lden);
  };
  return adaptive_simpson(integrand, 0.0, eps, tol * eps, 14);
}

inline double bridge_weight(const std::vector<double>& x, const std::vector<double>& y,
                            double eps, int d, double tol = 1e-11) {
  return bridge_weight(x.data(), y.data(), eps, d, tol);
}

// Time-truncated variant phi_{eps,eta} = int_eta^{eps-eta}, bounded for all
// arguments (used by the envelope diagnostics).
inline double bridge_weight_truncated(const double* x, const double* y, double eps, double eta,
                                      int d, double tol = 1e-11) {
  if (!(eta > 0) || !(eta < 0.5 * eps))
    throw std::invalid_argument("bridge_weight_truncated: need 0 < eta < eps/2");
  const double sqx = sqnorm(x, d), sqy = sqnorm(y, d);
  double sqxy = 0;
  for (int k = 0; k < d; ++k) {
    const double t = y[k] - x[k];
    sqxy += t * t;
  }
  const double lden = log_heat_kernel_sq(eps / d, sqxy, d);
  auto integrand = [&](double s) {
    return std::exp(log_heat_kernel_sq(s / d, sqx, d) +
                    log_heat_kernel_sq((eps - s) / d, sqy, d) - lden);
  };
  return adaptive_simpson(integrand, eta, eps - eta, tol * eps, 14);
}

// Fixed-node bridge weight (composite 16-point Gauss-Legendre on 4 panels);
// cheap enough for the inner loops of phi_infty.
inline double bridge_weight_fast(double sqx, double sqy, double lden, double eps, int d) {
  double acc = 0.0;
  for (int panel = 0; panel < 4; ++panel) {
    const double a = eps * panel / 4.0, w = eps / 4.0;
    for (const auto& [t, gw] : detail::gl16()) {
      const double s = a + w * t;
      acc += gw * w *
             std::exp(log_heat_kernel_sq(s / d, sqx, d) +
                      log_heat_kernel_sq((eps - s) / d, sqy, d) - lden);
    }
  }
  return acc;
}

// Numerical check of int (1/eps) phi_eps(x - z, y - z) dz = 1 (d = 3).
// Prolate spheroidal coordinates with foci x, y: the volume element
// c^3 (xi^2 - eta^2) = r1 r2 / c^2 * ... cancels both 1/r singularities, and
// the integrand depends on z only through (r1, r2), so the phi-angle is free.
inline double bridge_normalization(const std::vector<double>& x, const std::vector<double>& y,
                                   double eps, int d, double tol = 1e-9) {
  if (d != 3) throw std::invalid_argument("bridge_normalization: d = 3 only");
  const double sep2 = sqdist(x.data(), y.data(), d);
  const double c = 0.5 * std::sqrt(sep2);
  if (!(c > 0)) throw std::invalid_argument("bridge_normalization: x and y must differ");
  const double lden = log_heat_kernel_sq(eps / d, sep2, d);

  // decay along xi: envelope exponent (d/2eps)((r1+r2)^2 - 4c^2), r1+r2 = 2c xi
  const double xi_max = std::sqrt(1.0 + 50.0 * eps / (2.0 * d * c * c));

  auto f12 = [&](double r1, double r2) {
    auto integrand = [&](double s) -> double {
      if (s <= 0.0 || s >= eps) return 0.0;
      return std::exp(log_heat_kernel_sq(s / d, r1 * r1, d) +
                      log_heat_kernel_sq((eps - s) / d, r2 * r2, d) - lden);
    };
    return adaptive_simpson(integrand, 0.0, eps, tol * eps, 14) / eps;
  };

  const auto& nodes = detail::gl16();
  const int xi_panels = 10, eta_panels = 6;
  double total = 0;
  for (int pi = 0; pi < xi_panels; ++pi) {
    const double a = 1.0 + (xi_max - 1.0) * pi / xi_panels;
    const double w = (xi_max - 1.0) / xi_panels;
    for (const auto& [tx, wx] : nodes) {
      const double xi = a + w * tx;
      double inner = 0;
      for (int pe = 0; pe < eta_panels; ++pe) {
        const double ae = -1.0 + 2.0 * pe / eta_panels;
        const double we = 2.0 / eta_panels;
        for (const auto& [te, wv] : nodes) {
          const double eta = ae + we * te;
          const double r1 = c * (xi + eta), r2 = c * (xi - eta);
          inner += wv * we * (xi * xi - eta * eta) * f12(r1, r2);
        }
      }
      total += wx * w * inner;
    }
  }
  return 2 * M_PI * c * c * c * total;
}

// ---------------------------------------------------------------------------
// Pair empirical measures (weighted point clouds on R^d x R^d).

struct PairEmpiricalMeasure {
  int dim = 0;
  std::vector<double> first;   // flat, row-major
  std::vector<double> second;  // flat, row-major
  std::vector<double> weights;

  std::size_t size() const { return weights.size(); }
  const double* x(std::size_t i) const { return first.data() + i * dim; }
  const double* y(std::size_t i) const { return second.data() + i * dim; }

  double total_weight() const {
    double s = 0;
    for (double w : weights) s += w;
    return s;
  }

  void validate() const {
    for (double w : weights)
      if (!(w > 0)) throw std::invalid_argument("PairEmpiricalMeasure: weights must be positive");
    if (total_weight() > 1.0 + 1e-12)
      throw std::invalid_argument("PairEmpiricalMeasure: total weight exceeds 1");
  }

  void translate(const std::vector<double>& v) {
    for (std::size_t i = 0; i < size(); ++i)
      for (int k = 0; k < dim; ++k) {
        first[i * dim + k] += v[k];
        second[i * dim + k] += v[k];
      }
  }
};

struct PhiInftyOptions {
  enum class Method { quadrature, monte_carlo } method = Method::quadrature;
  double grid_step = 0.0;     // 0: auto (sqrt(eps)/6)
  std::size_t mc_samples = 200000;
  std::uint64_t seed = 1;
  int workers = 1;
  double pad_factor = 6.0;    // box = atom hull padded by pad * sqrt(eps)
  double skip_log = 40.0;     // atom pruning threshold on the exponent
};

struct PhiInftyResult {
  double value = 0.0;
  double std_error = 0.0;  // 0 for the deterministic quadrature path
};

// phi_{infty,eps}(mu) = int dz (1 - exp(-(kappa/eps) int mu(dx,dy)
// phi_eps(x-z, y-z))). The z-integral runs over the atom hull padded by
// 6 sqrt(eps); atoms whose bridge envelope is below exp(-skip_log) at z are
// pruned.
inline PhiInftyResult phi_infty(const PairEmpiricalMeasure& mu, double eps, double kappa, int d,
                                const PhiInftyOptions& opt = {}) {
  if (!(eps > 0)) throw std::invalid_argument("phi_infty: eps must be positive");
  if (mu.size() == 0) throw std::invalid_argument("phi_infty: empty measure");

  const std::size_t n = mu.size();
  std::vector<double> lden(n), sq_sep(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0;
    for (int k = 0; k < d; ++k) {
      const double t = mu.y(i)[k] - mu.x(i)[k];
      s += t * t;
    }
    sq_sep[i] = s;
    lden[i] = log_heat_kernel_sq(eps / d, s, d);
  }

  std::vector<double> lo(d, std::numeric_limits<double>::infinity());
  std::vector<double> hi(d, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < n; ++i)
    for (int k = 0; k < d; ++k) {
      lo[k] = std::min({lo[k], mu.x(i)[k], mu.y(i)[k]});
      hi[k] = std::max({hi[k], mu.x(i)[k], mu.y(i)[k]});
    }
  const double pad = opt.pad_factor * std::sqrt(eps);
  for (int k = 0; k < d; ++k) {
    lo[k] -= pad;
    hi[k] += pad;
  }

  auto field = [&](const double* z) {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double* x = mu.x(i);
      const double* y = mu.y(i);
      const double ax = std::sqrt(sqdist(x, z, d)), ay = std::sqrt(sqdist(y, z, d));
      // envelope exponent: (d/2eps)((|x-z|+|y-z|)^2 - |x-y|^2) >= 0
      const double expo = 0.5 * d / eps * ((ax + ay) * (ax + ay) - sq_sep[i]);
      if (expo > opt.skip_log) continue;
      s += mu.weights[i] * bridge_weight_fast(ax * ax, ay * ay, lden[i], eps, d);
    }
    return -std::expm1(-kappa / eps * s);
  };

  PhiInftyResult res;
  if (opt.method == PhiInftyOptions::Method::monte_carlo) {
    double vol = 1;
    for (int k = 0; k < d; ++k) vol *= hi[k] - lo[k];
    const std::size_t ns = opt.mc_samples;
    // values stored per index and reduced in index order, so the result is
    // independent of the worker count
    std::vector<double> vals(ns, 0.0);
    parallel_for(0, ns, opt.workers, [&](std::size_t i) {
      Philox rng(opt.seed, i);
      std::vector<double> z(d);
      for (int k = 0; k < d; ++k) z[k] = lo[k] + (hi[k] - lo[k]) * rng.next_double();
      vals[i] = field(z.data());
    });
    double s1 = 0, s2 = 0;
    for (double v : vals) {
      s1 += v;
      s2 += v * v;
    }
    const double mean = s1 / ns;
    const double var = std::max(0.0, s2 / ns - mean * mean);
    res.value = vol * mean;
    res.std_error = vol * std::sqrt(var / ns);
    return res;
  }

  const double h = opt.grid_step > 0 ? opt.grid_step : std::sqrt(eps) / 6.0;
  std::vector<Grid1D> axes;
  for (int k = 0; k < d; ++k) {
    const std::size_t cnt = std::max<std::size_t>(5, std::size_t((hi[k] - lo[k]) / h) | 1);
    axes.push_back(Grid1D::uniform(lo[k], hi[k], cnt % 2 ? cnt : cnt + 1));
  }
  if (d > 3) throw std::invalid_argument("phi_infty: quadrature path supports d <= 3");
  // flatten the product grid and share rows across workers
  const std::size_t n0 = axes[0].nodes.size();
  std::vector<double> row_sum(n0, 0.0);
  parallel_for(0, n0, opt.workers, [&](std::size_t i0) {
    std::vector<double> z(d);
    z[0] = axes[0].nodes[i0];
    double acc = 0;
    if (d == 1) {
      acc = field(z.data());
    } else if (d == 2) {
      for (std::size_t i1 = 0; i1 < axes[1].nodes.size(); ++i1) {
        z[1] = axes[1].nodes[i1];
        acc += axes[1].weights[i1] * field(z.data());
      }
    } else {
      for (std::size_t i1 = 0; i1 < axes[1].nodes.size(); ++i1) {
        z[1] = axes[1].nodes[i1];
        double acc2 = 0;
        for (std::size_t i2 = 0; i2 < axes[2].nodes.size(); ++i2) {
          z[2] = axes[2].nodes[i2];
          acc2 += axes[2].weights[i2] * field(z.data());
        }
        acc += axes[1].weights[i1] * acc2;
      }
    }
    row_sum[i0] = acc;
  });
  double total = 0;
  for (std::size_t i0 = 0; i0 < n0; ++i0) total += axes[0].weights[i0] * row_sum[i0];
  res.value = total;
  return res;
}

// ---------------------------------------------------------------------------
// Density fields (sub-probability densities on R^d).

struct GaussianComponent {
  std::vector<double> center;
  double var = 1.0;  // isotropic per-coordinate variance; 0 means a point mass
  double weight = 1.0;
};

struct DensityField {
  int dim = 0;
  double mass = 0.0;
  double support_radius = 0.0;  // density negligible beyond |x - center| > support_radius
  std::vector<double> center;
  bool radial = false;  // radially symmetric about `center`
  std::vector<GaussianComponent> gaussians;  // analytic fast path when non-empty
  std::function<double(const double*)> evaluator;

  double operator()(const double* x) const { return evaluator(x); }

  void validate() const {
    if (!(mass >= 0) || mass > 1.0 + 1e-12)
      throw std::invalid_argument("DensityField: mass must lie in [0, 1]");
  }

  static DensityField gaussian_mixture(std::vector<GaussianComponent> comps, int dim) {
    DensityField f;
    f.dim = dim;
    f.gaussians = std::move(comps);
    f.center.assign(dim, 0.0);
    double mass = 0;
    for (const auto& c : f.gaussians) mass += c.weight;
    f.mass = mass;
    if (mass > 0)
      for (const auto& c : f.gaussians)
        for (int k = 0; k < dim; ++k) f.center[k] += c.weight / mass * c.center[k];
    double rad = 0;
    for (const auto& c : f.gaussians) {
      const double off = std::sqrt(sqdist(c.center.data(), f.center.data(), dim));
      rad = std::max(rad, off + 8.0 * std::sqrt(std::max(c.var, 1e-12)));
    }
    f.support_radius = rad;
    f.radial = f.gaussians.size() == 1;
    auto comps_copy = f.gaussians;
    f.evaluator = [comps_copy, dim](const double* x) {
      double v = 0;
      for (const auto& c : comps_copy) {
        if (c.var <= 0) continue;  // point mass: density undefined, treat as 0 a.e.
        v += c.weight * std::pow(2 * M_PI * c.var, -0.5 * dim) *
             std::exp(-0.5 * sqdist(x, c.center.data(), dim) / c.var);
      }
      return v;
    };
    return f;
  }

  // phi^2 for a solved radial profile (mass ~ 1 by construction)
  static DensityField from_profile(std::shared_ptr<const RadialProfile> prof) {
    DensityField f;
    f.dim = prof->params.d;
    f.center.assign(f.dim, 0.0);
    f.radial = true;
    f.support_radius = prof->r_match + 10.0 / std::max(prof->tail_rate, 0.1);
    f.mass = profile_functionals(*prof).mass;
    f.evaluator = [prof, d = f.dim](const double* x) {
      const double r = std::sqrt(sqnorm(x, d));
      const double y = prof->value(r);
      return y * y;
    };
    return f;
  }

  // scaling family rho_[a](x) = a^d rho(a x) (squared-profile convention)
  DensityField rescaled(double a) const {
    DensityField f = *this;
    f.support_radius = support_radius / a;
    for (int k = 0; k < dim; ++k) f.center[k] /= a;
    if (!gaussians.empty()) {
      for (auto& c : f.gaussians) {
        c.var /= a * a;
        for (auto& ck : c.center) ck /= a;
      }
      f = gaussian_mixture(std::move(f.gaussians), dim);
      return f;
    }
    auto base = evaluator;
    const int d = dim;
    const double scale = std::pow(a, d);
    f.evaluator = [base, a, scale, d](const double* x) {
      std::vector<double> xs(d);
      for (int k = 0; k < d; ++k) xs[k] = a * x[k];
      return scale * base(xs.data());
    };
    return f;
  }
};

namespace detail {

// Generic integral of g over the support box of `f` (d <= 3), Simpson grid.
template <class G>
double box_integral(const DensityField& f, double extra_pad, double h, G&& g) {
  const int d = f.dim;
  if (d > 3) throw std::invalid_argument("box_integral: d <= 3 required for non-radial fields");
  const double R = f.support_radius + extra_pad;
  std::vector<Grid1D> axes;
  for (int k = 0; k < d; ++k) {
    std::size_t cnt = std::max<std::size_t>(9, std::size_t(2 * R / h));
    if (cnt % 2 == 0) ++cnt;
    axes.push_back(Grid1D::uniform(f.center[k] - R, f.center[k] + R, cnt));
  }
  double total = 0;
  std::vector<double> z(d);
  if (d == 1) {
    for (std::size_t i0 = 0; i0 < axes[0].nodes.size(); ++i0) {
      z[0] = axes[0].nodes[i0];
      total += axes[0].weights[i0] * g(z.data());
    }
  } else if (d == 2) {
    for (std::size_t i0 = 0; i0 < axes[0].nodes.size(); ++i0)
      for (std::size_t i1 = 0; i1 < axes[1].nodes.size(); ++i1) {
        z[0] = axes[0].nodes[i0];
        z[1] = axes[1].nodes[i1];
        total += axes[0].weights[i0] * axes[1].weights[i1] * g(z.data());
      }
  } else {
    for (std::size_t i0 = 0; i0 < axes[0].nodes.size(); ++i0)
      for (std::size_t i1 = 0; i1 < axes[1].nodes.size(); ++i1)
        for (std::size_t i2 = 0; i2 < axes[2].nodes.size(); ++i2) {
          z[0] = axes[0].nodes[i0];
          z[1] = axes[1].nodes[i1];
          z[2] = axes[2].nodes[i2];
          total += axes[0].weights[i0] * axes[1].weights[i1] * axes[2].weights[i2] * g(z.data());
        }
  }
  return total;
}

// radial integral about f.center: int_0^{R} g(r) r^{d-1} dr * omega_{d-1}
template <class G>
double radial_integral(const DensityField& f, double extra_pad, double h, G&& g) {
  const double R = f.support_radius + extra_pad;
  Grid1D grid = Grid1D::graded(0.0, R, h);
  double total = 0;
  for (std::size_t i = 0; i < grid.nodes.size(); ++i) {
    const double r = grid.nodes[i];
    total += grid.weights[i] * g(r) * std::pow(r, f.dim - 1);
  }
  return sphere_surface(f.dim) * total;
}

// (p_t * alpha)(x) for radial alpha at radius r (d = 1 or 3); rho is the
// radial density profile of alpha.
template <class Rho>
double radial_heat_conv(Rho&& rho, double r, double t, int d, double R, double h) {
  Grid1D grid = Grid1D::graded(0.0, R, h);
  double total = 0;
  if (d == 3) {
    const double c = std::pow(2 * M_PI * t, -1.5) * 2 * M_PI * t;
    for (std::size_t i = 0; i < grid.nodes.size(); ++i) {
      const double u = grid.nodes[i];
      double ker;
      if (r * u / t < 1e-6) {
        ker = 2.0 * u * std::exp(-0.5 * (r * r + u * u) / t) / t;  // limit of the sinh kernel
      } else {
        ker = (std::exp(-0.5 * (r - u) * (r - u) / t) - std::exp(-0.5 * (r + u) * (r + u) / t)) / r;
      }
      total += grid.weights[i] * rho(u) * u * ker;
    }
    return c * total;
  }
  if (d == 1) {
    for (std::size_t i = 0; i < grid.nodes.size(); ++i) {
      const double u = grid.nodes[i];
      const double k1 = std::exp(-0.5 * (r - u) * (r - u) / t);
      const double k2 = std::exp(-0.5 * (r + u) * (r + u) / t);
      total += grid.weights[i] * rho(u) * (k1 + (u > 0 ? k2 : 0.0));
    }
    return total / std::sqrt(2 * M_PI * t);
  }
  throw std::invalid_argument("radial_heat_conv: only d = 1 and d = 3 supported");
}

}  // namespace detail

// Gamma(alpha) = int (1 - exp(-kappa rho(x))) dx
inline double gamma_of(const DensityField& alpha, double kappa, double h = 0.02) {
  alpha.validate();
  if (alpha.mass == 0) return 0.0;
  auto g1 = [&](const double* x) { return -std::expm1(-kappa * alpha(x)); };
  if (alpha.radial && !alpha.gaussians.empty()) {
    // single Gaussian: radial about its own center
    const auto& c = alpha.gaussians.front();
    const int d = alpha.dim;
    const double norm = c.weight * std::pow(2 * M_PI * c.var, -0.5 * d);
    return detail::radial_integral(alpha, 0.0, h, [&](double r) {
      return -std::expm1(-kappa * norm * std::exp(-0.5 * r * r / c.var));
    });
  }
  if (alpha.radial) {
    std::vector<double> x(alpha.dim, 0.0);
    return detail::radial_integral(alpha, 0.0, h, [&](double r) {
      x[0] = r;
      for (int k = 0; k < alpha.dim; ++k) x[k] = (k == 0 ? r + alpha.center[0] : alpha.center[k]);
      return -std::expm1(-kappa * alpha(x.data()));
    });
  }
  return detail::box_integral(alpha, 0.0, h, g1);
}

// Gamma-tilde over a collection: sum of per-component Gammas plus the
// mass-defect term kappa (1 - sum of masses).
inline double gamma_tilde(const std::vector<DensityField>& xi, double kappa, double h = 0.02) {
  double total = 0, mass = 0;
  for (const auto& a : xi) {
    total += gamma_of(a, kappa, h);
    mass += a.mass;
  }
  return total + kappa * (1.0 - mass);
}

// (p_t * alpha) as a new density field. Gaussian mixtures smooth exactly;
// radial fields (d in {1,3}) smooth through the angular-averaged kernel.
inline DensityField heat_smooth(const DensityField& alpha, double t) {
  if (!(t > 0)) throw std::invalid_argument("heat_smooth: t must be positive");
  if (!alpha.gaussians.empty()) {
    auto comps = alpha.gaussians;
    for (auto& c : comps) c.var += t;
    return DensityField::gaussian_mixture(std::move(comps), alpha.dim);
  }
  if (!alpha.radial) throw std::invalid_argument("heat_smooth: non-Gaussian fields must be radial");
  DensityField out = alpha;
  out.support_radius = alpha.support_radius + 8 * std::sqrt(t);
  const int d = alpha.dim;
  const double R = alpha.support_radius;
  auto base = alpha.evaluator;
  auto center = alpha.center;
  auto rho_rad = [base, center, d](double u) {
    std::vector<double> x(center);
    x[0] += u;
    return base(x.data());
  };
  out.evaluator = [rho_rad, center, t, d, R](const double* x) {
    const double r = std::sqrt(sqdist(x, center.data(), d));
    return detail::radial_heat_conv(rho_rad, r, t, d, R, 0.02);
  };
  return out;
}

// Psi_eps(alpha) = int dx (1 - exp(-(kappa/eps) int_0^eps (p_{s/d} * alpha)(x) ds))
inline double psi_eps(const DensityField& alpha, double eps, double kappa, int d,
                      double h = 0.03) {
  if (!(eps > 0)) throw std::invalid_argument("psi_eps: eps must be positive");
  alpha.validate();
  if (alpha.dim != d) throw std::invalid_argument("psi_eps: dimension mismatch");

  // time-smoothed density via Gauss-Legendre in s
  std::function<double(const double*)> smoothed;
  if (!alpha.gaussians.empty()) {
    auto comps = alpha.gaussians;
    smoothed = [comps, eps, d](const double* x) {
      double v = 0;
      for (const auto& [t, gw] : detail::gl16()) {
        const double s = eps * t;
        for (const auto& c : comps)
          v += gw * c.weight * std::pow(2 * M_PI * (c.var + s / d), -0.5 * d) *
               std::exp(-0.5 * sqdist(x, c.center.data(), d) / (c.var + s / d));
      }
      return v;
    };
  } else if (alpha.radial) {
    auto base = alpha.evaluator;
    auto center = alpha.center;
    const double R = alpha.support_radius;
    auto rho_rad = [base, center, d](double u) {
      std::vector<double> x(center);
      x[0] += u;
      return base(x.data());
    };
    smoothed = [rho_rad, center, eps, d, R](const double* x) {
      const double r = std::sqrt(sqdist(x, center.data(), d));
      double v = 0;
      for (const auto& [t, gw] : detail::gl16())
        v += gw * detail::radial_heat_conv(rho_rad, r, eps * t / d, d, R, 0.02);
      return v;
    };
  } else {
    throw std::invalid_argument("psi_eps: non-Gaussian fields must be radial");
  }

  DensityField box = alpha;
  box.support_radius += 8 * std::sqrt(eps / d);
  auto g = [&](const double* x) { return -std::expm1(-kappa * smoothed(x)); };
  if (alpha.radial) {
    std::vector<double> x(alpha.dim);
    return detail::radial_integral(box, 0.0, h, [&](double r) {
      for (int k = 0; k < alpha.dim; ++k) x[k] = alpha.center[k] + (k == 0 ? r : 0.0);
      return g(x.data());
    });
  }
  return detail::box_integral(box, 0.0, h, g);
}

// Gamma_delta over a collection: heat-smooth each component at time delta/d,
// apply the Gamma integral, add the mass-defect term.
inline double gamma_delta(const std::vector<DensityField>& xi, double delta, double kappa, int d,
                          double h = 0.02) {
  if (!(delta > 0)) throw std::invalid_argument("gamma_delta: delta must be positive");
  double total = 0, mass = 0;
  for (const auto& a : xi) {
    DensityField sm = heat_smooth(a, delta / d);
    total += gamma_of(sm, kappa, h);
    mass += a.mass;
  }
  return total + kappa * (1.0 - mass);
}

// ---------------------------------------------------------------------------
// Relative entropy and the pair rate diagnostic.

// h(mu | nu) = sum mu_c log(mu_c / nu_c), +inf unless mu << nu cell-wise.
inline double relative_entropy(const std::vector<double>& mu, const std::vector<double>& nu) {
  if (mu.size() != nu.size())
    throw std::invalid_argument("relative_entropy: histograms must share the grid");
  double h = 0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (mu[i] == 0) continue;
    if (nu[i] == 0) return std::numeric_limits<double>::infinity();
    h += mu[i] * std::log(mu[i] / nu[i]);
  }
  return h;
}

struct PairDiagOptions {
  int bins_per_axis = 12;
  double marginal_tol = 0.05;  // total-variation tolerance between marginals
};

struct PairDiagnostic {
  double value = 0.0;           // entropy estimate (+inf when flagged)
  bool marginals_match = true;  // first vs second marginal within tolerance
  double marginal_tv = 0.0;
};

// Bins mu on a product grid, builds the reference first-marginal x heat
// kernel on the same bins (per-coordinate variance eps/d), and returns the
// relative entropy. Unequal marginals are flagged (the rate is +inf there).
inline PairDiagnostic pair_rate_diagnostic(const PairEmpiricalMeasure& mu, double eps, int d,
                                           const PairDiagOptions& opt = {}) {
  if (mu.size() == 0) throw std::invalid_argument("pair_rate_diagnostic: empty measure");
  const int B = opt.bins_per_axis;
  std::vector<double> lo(d, std::numeric_limits<double>::infinity());
  std::vector<double> hi(d, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < mu.size(); ++i)
    for (int k = 0; k < d; ++k) {
      lo[k] = std::min({lo[k], mu.x(i)[k], mu.y(i)[k]});
      hi[k] = std::max({hi[k], mu.x(i)[k], mu.y(i)[k]});
    }
  std::vector<double> width(d);
  for (int k = 0; k < d; ++k) {
    if (hi[k] <= lo[k]) hi[k] = lo[k] + 1e-9;
    width[k] = (hi[k] - lo[k]) / B * (1 + 1e-12);
  }
  auto cell_of = [&](const double* p) {
    std::uint64_t idx = 0;
    for (int k = 0; k < d; ++k) {
      int c = int((p[k] - lo[k]) / width[k]);
      c = std::clamp(c, 0, B - 1);
      idx = idx * B + c;
    }
    return idx;
  };
  auto cell_center = [&](std::uint64_t idx, std::vector<double>& out) {
    for (int k = d - 1; k >= 0; --k) {
      out[k] = lo[k] + (double(idx % B) + 0.5) * width[k];
      idx /= B;
    }
  };

  std::unordered_map<std::uint64_t, double> binned;       // (cx, cy) pairs
  std::unordered_map<std::uint64_t, double> marg1, marg2; // site marginals
  const std::uint64_t side = [&] {
    std::uint64_t s = 1;
    for (int k = 0; k < d; ++k) s *= B;
    return s;
  }();
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const std::uint64_t cx = cell_of(mu.x(i)), cy = cell_of(mu.y(i));
    binned[cx * side + cy] += mu.weights[i];
    marg1[cx] += mu.weights[i];
    marg2[cy] += mu.weights[i];
  }

  PairDiagnostic res;
  double tv = 0;
  for (const auto& [c, w] : marg1) {
    auto it = marg2.find(c);
    tv += std::fabs(w - (it == marg2.end() ? 0.0 : it->second));
  }
  for (const auto& [c, w] : marg2)
    if (!marg1.count(c)) tv += w;
  res.marginal_tv = 0.5 * tv;
  res.marginals_match = res.marginal_tv <= opt.marginal_tol;
  if (!res.marginals_match) {
    res.value = std::numeric_limits<double>::infinity();
    return res;
  }

  const double sigma = std::sqrt(eps / d);
  auto norm_cdf = [](double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); };
  std::vector<double> xc(d), yc(d);
  double h = 0;
  for (const auto& [key, w] : binned) {
    const std::uint64_t cx = key / side, cy = key % side;
    cell_center(cx, xc);
    cell_center(cy, yc);
    double ref = marg1.at(cx);
    for (int k = 0; k < d; ++k) {
      const double a = (yc[k] - 0.5 * width[k] - xc[k]) / sigma;
      const double b2 = (yc[k] + 0.5 * width[k] - xc[k]) / sigma;
      ref *= norm_cdf(b2) - norm_cdf(a);
    }
    if (ref <= 0) {
      res.value = std::numeric_limits<double>::infinity();
      return res;
    }
    h += w * std::log(w / ref);
  }
  res.value = h;
  return res;
}

}  // namespace rangeld
