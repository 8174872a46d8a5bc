#pragma once

// Reusable numeric kernels: explicit adaptive ODE stepping, bracketed 1-D
// root finding, composite quadrature on graded grids.

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace rangeld {

// Quadrature grid: strictly increasing nodes with per-node weights such that
// integral(f) ~= sum_i w_i f(x_i). Weights come from piecewise-quadratic
// interpolation over consecutive node triples (composite Simpson on uniform
// grids, its non-uniform generalization otherwise).
struct Grid1D {
  std::vector<double> nodes;
  std::vector<double> weights;

  static Grid1D from_nodes(std::vector<double> xs) {
    if (xs.size() < 2) throw std::invalid_argument("Grid1D: need at least 2 nodes");
    for (std::size_t i = 1; i < xs.size(); ++i)
      if (!(xs[i] > xs[i - 1])) throw std::invalid_argument("Grid1D: nodes must be strictly increasing");
    Grid1D g;
    g.nodes = std::move(xs);
    g.weights.assign(g.nodes.size(), 0.0);
    const auto& x = g.nodes;
    const std::size_t n = x.size() - 1;  // interval count
    // Integrate the quadratic through (x0,x1,x2) over [a,b] and accumulate
    // the three Lagrange-basis integrals into the node weights.
    auto add_quad = [&](std::size_t i0, std::size_t i1, std::size_t i2, double a, double b) {
      const double xs_[3] = {x[i0], x[i1], x[i2]};
      const std::size_t idx[3] = {i0, i1, i2};
      for (int k = 0; k < 3; ++k) {
        const double xk = xs_[k];
        const double xa = xs_[(k + 1) % 3], xb = xs_[(k + 2) % 3];
        const double denom = (xk - xa) * (xk - xb);
        // int_a^b (t-xa)(t-xb) dt
        auto prim = [&](double t) {
          return t * t * t / 3.0 - (xa + xb) * t * t / 2.0 + xa * xb * t;
        };
        g.weights[idx[k]] += (prim(b) - prim(a)) / denom;
      }
    };
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) add_quad(i, i + 1, i + 2, x[i], x[i + 2]);
    if (i < n)  // odd interval count: reuse the last triple over the final interval
      add_quad(n - 2, n - 1, n, x[n - 1], x[n]);
    return g;
  }

  static Grid1D uniform(double a, double b, std::size_t count) {
    if (count < 2) throw std::invalid_argument("Grid1D: need at least 2 nodes");
    std::vector<double> xs(count);
    for (std::size_t i = 0; i < count; ++i)
      xs[i] = a + (b - a) * double(i) / double(count - 1);
    return from_nodes(std::move(xs));
  }

  // Graded radial grid: uniform step h0 on [a, max(a,1)], geometric
  // stretching beyond r = 1. Profiles we integrate decay exponentially in
  // the far field, so coarse far nodes lose no accuracy.
  static Grid1D graded(double a, double b, double h0, double stretch = 1.04) {
    if (!(b > a) || !(h0 > 0) || !(stretch > 1.0))
      throw std::invalid_argument("Grid1D::graded: bad parameters");
    std::vector<double> xs{a};
    double r = a, h = h0;
    while (r < b) {
      if (r >= 1.0) h *= stretch;
      r = std::min(r + h, b);
      xs.push_back(r);
    }
    if (xs.size() < 3) return uniform(a, b, 3);
    return from_nodes(std::move(xs));
  }
};

template <class F>
double quadrature(F&& f, const Grid1D& grid) {
  double acc = 0.0;
  for (std::size_t i = 0; i < grid.nodes.size(); ++i) {
    const double v = f(grid.nodes[i]);
    if (!std::isfinite(v)) throw std::runtime_error("quadrature: non-finite integrand");
    acc += grid.weights[i] * v;
  }
  return acc;
}

struct OdeState {
  double r = 0.0;   // abscissa, finite and non-negative in our uses
  double y = 0.0;   // value
  double yp = 0.0;  // first derivative
};

struct StepControl {
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  double h_init = 1e-3;
  double h_min = 1e-13;
  double h_max = 0.25;
  double blow_up = 1e6;  // |y| beyond this counts as divergence
};

struct OdeResult {
  std::vector<OdeState> trajectory;  // includes both endpoints unless blow-up
  bool blew_up = false;              // non-finite or |y| > blow_up encountered
};

// Integrates y'' = rhs(r, y, y') with the Dormand-Prince 5(4) embedded pair.
// `watch` is called after each accepted step; returning false stops the
// integration early (used for shooting event detection).
template <class Rhs, class Watch>
OdeResult integrate_ode(Rhs&& rhs, OdeState start, double r_end, const StepControl& ctrl,
                        Watch&& watch) {
  if (!(r_end > start.r)) throw std::invalid_argument("integrate_ode: r_end must exceed start.r");
  if (!(ctrl.rel_tol > 0) || !(ctrl.abs_tol > 0)) throw std::invalid_argument("integrate_ode: tolerances must be positive");

  // Dormand-Prince coefficients.
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                          b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                          e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

  OdeResult out;
  out.trajectory.push_back(start);
  double r = start.r, y = start.y, yp = start.yp;
  double h = std::min(ctrl.h_init, r_end - r);

  auto bad = [&](double a, double b) { return !std::isfinite(a) || !std::isfinite(b); };

  while (r < r_end) {
    h = std::min(h, r_end - r);
    // k_i = (y', y'') samples
    double k1y = yp, k1p = rhs(r, y, yp);
    double y2 = y + h * a21 * k1y, p2 = yp + h * a21 * k1p;
    double k2y = p2, k2p = rhs(r + c2 * h, y2, p2);
    double y3 = y + h * (a31 * k1y + a32 * k2y), p3 = yp + h * (a31 * k1p + a32 * k2p);
    double k3y = p3, k3p = rhs(r + c3 * h, y3, p3);
    double y4 = y + h * (a41 * k1y + a42 * k2y + a43 * k3y),
           p4 = yp + h * (a41 * k1p + a42 * k2p + a43 * k3p);
    double k4y = p4, k4p = rhs(r + c4 * h, y4, p4);
    double y5 = y + h * (a51 * k1y + a52 * k2y + a53 * k3y + a54 * k4y),
           p5 = yp + h * (a51 * k1p + a52 * k2p + a53 * k3p + a54 * k4p);
    double k5y = p5, k5p = rhs(r + c5 * h, y5, p5);
    double y6 = y + h * (a61 * k1y + a62 * k2y + a63 * k3y + a64 * k4y + a65 * k5y),
           p6 = yp + h * (a61 * k1p + a62 * k2p + a63 * k3p + a64 * k4p + a65 * k5p);
    double k6y = p6, k6p = rhs(r + h, y6, p6);

    double ny = y + h * (b1 * k1y + b3 * k3y + b4 * k4y + b5 * k5y + b6 * k6y);
    double np = yp + h * (b1 * k1p + b3 * k3p + b4 * k4p + b5 * k5p + b6 * k6p);
    double k7y = np, k7p = rhs(r + h, ny, np);

    if (bad(ny, np)) {
      out.blew_up = true;
      return out;
    }

    double erry = h * (e1 * k1y + e3 * k3y + e4 * k4y + e5 * k5y + e6 * k6y + e7 * k7y);
    double errp = h * (e1 * k1p + e3 * k3p + e4 * k4p + e5 * k5p + e6 * k6p + e7 * k7p);
    double scy = ctrl.abs_tol + ctrl.rel_tol * std::max(std::fabs(y), std::fabs(ny));
    double scp = ctrl.abs_tol + ctrl.rel_tol * std::max(std::fabs(yp), std::fabs(np));
    double err = std::sqrt(0.5 * ((erry / scy) * (erry / scy) + (errp / scp) * (errp / scp)));

    if (err <= 1.0 || h <= ctrl.h_min * std::max(1.0, std::fabs(r))) {
      r += h;
      y = ny;
      yp = np;
      out.trajectory.push_back({r, y, yp});
      if (std::fabs(y) > ctrl.blow_up) {
        out.blew_up = true;
        return out;
      }
      if (!watch(out.trajectory.back())) return out;
    }
    double fac = (err > 0) ? 0.9 * std::pow(err, -0.2) : 5.0;
    fac = std::min(5.0, std::max(0.2, fac));
    h = std::min(ctrl.h_max, h * fac);
    if (h < ctrl.h_min * std::max(1.0, std::fabs(r))) h = ctrl.h_min * std::max(1.0, std::fabs(r));
  }
  return out;
}

template <class Rhs>
OdeResult integrate_ode(Rhs&& rhs, OdeState start, double r_end, const StepControl& ctrl) {
  return integrate_ode(std::forward<Rhs>(rhs), start, r_end, ctrl,
                       [](const OdeState&) { return true; });
}

// Bracketed root finding: Brent's method with a guaranteed bisection
// fallback. Accepts either bracket orientation. Succeeds when |f| <= tol or
// the bracket width falls below tol.
template <class F>
double find_root(F&& f, double lo, double hi, double tol = 1e-12, int max_iter = 200) {
  if (!(tol > 0)) throw std::invalid_argument("find_root: tol must be positive");
  if (lo > hi) std::swap(lo, hi);
  double fa = f(lo), fb = f(hi);
  if (fa == 0.0) return lo;
  if (fb == 0.0) return hi;
  if (fa * fb > 0) throw std::invalid_argument("find_root: no sign change on bracket");

  double a = lo, b = hi, c = a, fc = fa;
  double d = b - a, e = d;
  for (int it = 0; it < max_iter; ++it) {
    if (std::fabs(fc) < std::fabs(fb)) {
      a = b; b = c; c = a;
      fa = fb; fb = fc; fc = fa;
    }
    const double tol1 = 2.0 * std::numeric_limits<double>::epsilon() * std::fabs(b) + 0.5 * tol;
    const double xm = 0.5 * (c - b);
    if (std::fabs(xm) <= tol1 || std::fabs(fb) <= tol) return b;
    if (std::fabs(e) >= tol1 && std::fabs(fa) > std::fabs(fb)) {
      double p, q, r2;
      const double s = fb / fa;
      if (a == c) {  // secant
        p = 2.0 * xm * s;
        q = 1.0 - s;
      } else {  // inverse quadratic
        q = fa / fc;
        r2 = fb / fc;
        p = s * (2.0 * xm * q * (q - r2) - (b - a) * (r2 - 1.0));
        q = (q - 1.0) * (r2 - 1.0) * (s - 1.0);
      }
      if (p > 0) q = -q;
      p = std::fabs(p);
      if (2.0 * p < std::min(3.0 * xm * q - std::fabs(tol1 * q), std::fabs(e * q))) {
        e = d;
        d = p / q;
      } else {
        d = xm;
        e = d;
      }
    } else {
      d = xm;
      e = d;
    }
    a = b;
    fa = fb;
    b += (std::fabs(d) > tol1) ? d : (xm > 0 ? tol1 : -tol1);
    fb = f(b);
    if ((fb > 0) == (fc > 0)) {
      c = a;
      fc = fa;
      d = b - a;
      e = d;
    }
  }
  return b;
}

// Surface area of the unit sphere in R^d: 2 pi^{d/2} / GammaE(d/2).
inline double sphere_surface(int d) {
  return 2.0 * std::pow(M_PI, 0.5 * d) / std::tgamma(0.5 * d);
}

}  // namespace rangeld
