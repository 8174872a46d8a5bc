#pragma once

// Variational rate function I_kappa(b) for the range large-deviation problem:
// radial shooting on the Euler-Lagrange equation
//   y'' + (d-1)/r y' + lambda y + mu kappa y exp(-kappa y^2) = 0,
// multiplier determination through the scaling reduction t = mu/lambda, and
// the uniqueness-machinery checks (Pohozaev multipliers, Serrin-Tang
// hypotheses).

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rangeld/numerics.hpp"
#include "rangeld/parallel.hpp"

namespace rangeld {

struct ProblemParams {
  int d = 3;
  double kappa = 1.0;
  double b = 0.5;

  void validate() const {
    if (d < 3) throw std::invalid_argument("ProblemParams: d must be >= 3");
    if (!(kappa > 0)) throw std::invalid_argument("ProblemParams: kappa must be positive");
    if (!(b > 0)) throw std::invalid_argument("ProblemParams: b must be positive");
  }
};

struct Multipliers {
  double lambda = 1.0;
  double mu = -3.0;
};

// f_{lambda,mu}(y) = lambda y + mu kappa y exp(-kappa y^2)
inline double el_nonlinearity(const Multipliers& m, double kappa, double y) {
  return m.lambda * y + m.mu * kappa * y * std::exp(-kappa * y * y);
}

enum class ShootOutcome { decays, crosses_zero, blows_up };

struct ShootOptions {
  double r0 = 1e-4;       // Taylor start radius (regularizes the (d-1)/r term)
  double r_max = 200.0;
  double far_band = 1e-8;  // |y| below this counts as reaching the far field
  StepControl ode{};
};

struct ShootResult {
  ShootOutcome outcome = ShootOutcome::blows_up;
  std::vector<OdeState> trajectory;
};

inline OdeState taylor_start(const Multipliers& m, const ProblemParams& p, double y0,
                             double r0) {
  // y(r) = y0 - f(y0) r^2 / (2d) + O(r^4), y'(0) = 0
  const double f0 = el_nonlinearity(m, p.kappa, y0);
  return OdeState{r0, y0 - f0 * r0 * r0 / (2.0 * p.d), -f0 * r0 / p.d};
}

// Integrates the radial Euler-Lagrange equation from the Taylor start and
// classifies the first event: the solution crossing zero, turning back up
// while still above the far-field band, or entering the band (decay).
inline ShootResult shoot(const Multipliers& m, const ProblemParams& p, double y0,
                         const ShootOptions& opt = {}) {
  if (!(y0 > 0)) throw std::invalid_argument("shoot: y0 must be positive");
  ShootResult res;
  const OdeState start = taylor_start(m, p, y0, opt.r0);
  auto rhs = [&](double r, double y, double yp) {
    return -(p.d - 1) / r * yp - el_nonlinearity(m, p.kappa, y);
  };
  bool classified = false;
  auto watch = [&](const OdeState& s) {
    if (s.y <= 0.0) {
      res.outcome = ShootOutcome::crosses_zero;
      classified = true;
      return false;
    }
    if (s.y < opt.far_band) {
      res.outcome = ShootOutcome::decays;
      classified = true;
      return false;
    }
    if (s.yp >= 0.0) {
      res.outcome = ShootOutcome::blows_up;
      classified = true;
      return false;
    }
    return true;
  };
  OdeResult ode = integrate_ode(rhs, start, opt.r_max, opt.ode, watch);
  res.trajectory = std::move(ode.trajectory);
  if (!classified) {
    if (ode.blew_up) {
      res.outcome = ShootOutcome::blows_up;
    } else {
      // ran to r_max without an event; a still-positive, still-decreasing
      // tail counts as decay
      const OdeState& last = res.trajectory.back();
      res.outcome = (last.y > 0 && last.yp < 0) ? ShootOutcome::decays : ShootOutcome::blows_up;
    }
  }
  return res;
}

struct RadialProfile {
  Grid1D grid;  // nodes on [r0, r_match]
  std::vector<double> y;
  std::vector<double> yp;
  ProblemParams params;
  Multipliers mult;
  double y0 = 0.0;         // height at the origin
  double r_match = 0.0;    // start of the analytic exponential tail
  double tail_coeff = 0.0; // y ~ C r^{-(d-1)/2} exp(-nu r) beyond r_match
  double tail_rate = 0.0;  // nu = sqrt(-(lambda + mu kappa))

  // Cubic Hermite interpolation inside the grid, Taylor head, analytic tail.
  double value(double r) const {
    if (grid.nodes.empty()) return 0.0;
    const double r0 = grid.nodes.front();
    if (r < r0) {
      const double f0 = el_nonlinearity(mult, params.kappa, y0);
      return y0 - f0 * r * r / (2.0 * params.d);
    }
    if (r >= r_match)
      return tail_coeff * std::pow(r, -0.5 * (params.d - 1)) * std::exp(-tail_rate * r);
    const auto it = std::upper_bound(grid.nodes.begin(), grid.nodes.end(), r);
    const std::size_t i = std::min<std::size_t>(grid.nodes.size() - 2,
                                                std::max<std::ptrdiff_t>(0, it - grid.nodes.begin() - 1));
    const double x0 = grid.nodes[i], x1 = grid.nodes[i + 1], h = x1 - x0;
    const double t = (r - x0) / h;
    const double h00 = (1 + 2 * t) * (1 - t) * (1 - t), h10 = t * (1 - t) * (1 - t);
    const double h01 = t * t * (3 - 2 * t), h11 = t * t * (t - 1);
    return h00 * y[i] + h10 * h * yp[i] + h01 * y[i + 1] + h11 * h * yp[i + 1];
  }
};

struct GroundStateOptions {
  ShootOptions shoot{};
  double y0_seed = 1e-2;
  int scan_max = 80;
  double y0_tol_rel = 1e-13;
  double profile_h_max = 0.02;  // step cap for the final dense integration
};

// Bisection over the initial height y0 between an undershooting
// (blows_up) and an overshooting (crosses_zero) trajectory, then one dense
// pass with a capped step for the returned profile. Throws when the scan
// finds no classification change ((lambda, mu) outside the solvable region).
inline RadialProfile ground_state(const Multipliers& m, const ProblemParams& p,
                                  const GroundStateOptions& opt = {}) {
  p.validate();
  auto classify = [&](double y0) { return shoot(m, p, y0, opt.shoot).outcome; };

  // geometric scan for a (blows_up, crosses_zero) bracket
  double lo = 0.0, hi = 0.0;
  {
    double y0 = opt.y0_seed;
    ShootOutcome c = classify(y0);
    if (c == ShootOutcome::blows_up) {
      for (int k = 0; k < opt.scan_max; ++k) {
        const double next = y0 * 2.0;
        const ShootOutcome cn = classify(next);
        if (cn != ShootOutcome::blows_up) {
          lo = y0;
          hi = next;
          break;
        }
        y0 = next;
      }
    } else {
      for (int k = 0; k < opt.scan_max; ++k) {
        const double next = y0 * 0.5;
        const ShootOutcome cn = classify(next);
        if (cn == ShootOutcome::blows_up) {
          lo = next;
          hi = y0;
          break;
        }
        y0 = next;
      }
    }
    if (hi == 0.0) throw std::runtime_error("ground_state: no bracket found");
  }

  while ((hi - lo) > opt.y0_tol_rel * hi) {
    const double mid = 0.5 * (lo + hi);
    const ShootOutcome c = classify(mid);
    if (c == ShootOutcome::blows_up)
      lo = mid;
    else
      hi = mid;
  }
  const double y0 = 0.5 * (lo + hi);

  // dense pass; stop once the far-field band is reached
  ShootOptions dense = opt.shoot;
  dense.ode.h_max = opt.profile_h_max;
  ShootResult final = shoot(m, p, y0, dense);

  // keep the strictly decreasing, positive part of the trajectory
  auto& tr = final.trajectory;
  std::size_t keep = tr.size();
  for (std::size_t i = 1; i < tr.size(); ++i) {
    if (tr[i].y <= 0.0 || tr[i].y >= tr[i - 1].y) {
      keep = i;
      break;
    }
  }
  tr.resize(keep);
  if (tr.size() < 8) throw std::runtime_error("ground_state: trajectory too short");

  RadialProfile prof;
  prof.params = p;
  prof.mult = m;
  prof.y0 = y0;
  std::vector<double> nodes(tr.size());
  prof.y.resize(tr.size());
  prof.yp.resize(tr.size());
  for (std::size_t i = 0; i < tr.size(); ++i) {
    nodes[i] = tr[i].r;
    prof.y[i] = tr[i].y;
    prof.yp[i] = tr[i].yp;
  }
  prof.grid = Grid1D::from_nodes(std::move(nodes));
  prof.r_match = prof.grid.nodes.back();
  const double psi0 = m.lambda + m.mu * p.kappa;
  prof.tail_rate = psi0 < 0 ? std::sqrt(-psi0) : std::sqrt(m.lambda);
  prof.tail_coeff = prof.y.back() * std::pow(prof.r_match, 0.5 * (p.d - 1)) *
                    std::exp(prof.tail_rate * prof.r_match);
  return prof;
}

struct ProfileFunctionals {
  double mass = 0.0;    // ||phi||_2^2
  double energy = 0.0;  // J = 1/2 ||grad phi||_2^2
  double gamma = 0.0;   // Gamma = int (1 - exp(-kappa phi^2))
};

// Radial quadrature with the surface factor omega_{d-1}; the head below r0
// and the exponential tail beyond r_match enter analytically.
inline ProfileFunctionals profile_functionals(const RadialProfile& prof) {
  ProfileFunctionals out;
  if (prof.grid.nodes.empty()) return out;
  const int d = prof.params.d;
  const double kappa = prof.params.kappa;
  const double omega = sphere_surface(d);
  const double r0 = prof.grid.nodes.front();
  const double R = prof.r_match;

  double mass = 0, energy2 = 0, gamma = 0;
  for (std::size_t i = 0; i < prof.grid.nodes.size(); ++i) {
    const double r = prof.grid.nodes[i], w = prof.grid.weights[i];
    const double rd = std::pow(r, d - 1);
    mass += w * prof.y[i] * prof.y[i] * rd;
    energy2 += w * prof.yp[i] * prof.yp[i] * rd;
    const double e = -std::expm1(-kappa * prof.y[i] * prof.y[i]);
    gamma += w * e * rd;
  }
  // head [0, r0], y ~ y0
  mass += prof.y0 * prof.y0 * std::pow(r0, d) / d;
  gamma += -std::expm1(-kappa * prof.y0 * prof.y0) * std::pow(r0, d) / d;
  // tail: y ~ C r^{-(d-1)/2} e^{-nu r}, y' ~ -nu y
  if (prof.tail_coeff > 0 && prof.tail_rate > 0) {
    const double C = prof.tail_coeff, nu = prof.tail_rate;
    const double tail_mass = C * C * std::exp(-2 * nu * R) / (2 * nu);
    mass += tail_mass;
    energy2 += nu * nu * tail_mass;
    gamma += kappa * tail_mass;  // 1 - e^{-k y^2} ~ k y^2 in the tail
  }
  out.mass = omega * mass;
  out.energy = 0.5 * omega * energy2;
  out.gamma = omega * gamma;
  return out;
}

struct RatePoint {
  double b = 0.0;
  double I = 0.0;
  Multipliers mult{};
  double mass_res = 0.0;
  double gamma_res = 0.0;
  std::shared_ptr<const RadialProfile> profile;
  bool converged = false;
  std::string message;
};

struct SolveConfig {
  GroundStateOptions gs{};
  // bracket for u, where t = mu/lambda = -(1/kappa)(1 + e^u)
  double u_lo = -12.0;
  double u_hi = 8.0;
  double ratio_tol = 1e-11;
  double resid_tol = 1e-6;
  int newton_max = 6;
  std::optional<double> warm_u;  // continuation seed from a previous solve
};

namespace detail {

struct ShapeEval {
  double mass, gamma, energy, ratio;
  RadialProfile profile;
};

// Unit-lambda shape problem: y(r) = w(sqrt(lambda) r) turns the Euler-
// Lagrange equation into the same equation with multipliers (1, t),
// t = mu/lambda. Mass and Gamma then scale by lambda^{-d/2}, so the
// constraint pair (mass = 1, Gamma = b) collapses to Gamma/mass = b, a
// one-dimensional root-find in t.
inline ShapeEval eval_shape(double u, const ProblemParams& p, const SolveConfig& cfg) {
  const double t = -(1.0 / p.kappa) * (1.0 + std::exp(u));
  ShapeEval ev;
  ev.profile = ground_state(Multipliers{1.0, t}, p, cfg.gs);
  const ProfileFunctionals f = profile_functionals(ev.profile);
  ev.mass = f.mass;
  ev.gamma = f.gamma;
  ev.energy = f.energy;
  ev.ratio = f.gamma / f.mass;
  return ev;
}

inline RadialProfile rescale_profile(const RadialProfile& shape, double lambda, double mu) {
  RadialProfile out = shape;
  const double s = std::sqrt(lambda);
  std::vector<double> nodes(shape.grid.nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    nodes[i] = shape.grid.nodes[i] / s;
    out.yp[i] = shape.yp[i] * s;
  }
  out.grid = Grid1D::from_nodes(std::move(nodes));
  out.mult = Multipliers{lambda, mu};
  out.r_match = shape.r_match / s;
  out.tail_rate = shape.tail_rate * s;
  const int d = shape.params.d;
  out.tail_coeff = shape.tail_coeff * std::pow(s, 0.5 * (d - 1));
  return out;
}

}  // namespace detail

// Solves the constrained variational problem at parameters (d, kappa, b).
// The Gamma constraint is treated as saturated. For b >= kappa the rate
// vanishes and no profile is produced.
inline RatePoint solve_rate_point(const ProblemParams& p, SolveConfig cfg = {}) {
  p.validate();
  RatePoint pt;
  pt.b = p.b;
  if (p.b >= p.kappa) {
    pt.I = 0.0;
    pt.converged = true;
    pt.message = "b >= kappa: rate vanishes";
    return pt;
  }
  if (p.d >= 4 && p.b >= 2.0 * p.kappa / p.d)
    pt.message = "warning: b outside the guaranteed-uniqueness regime b < 2 kappa / d";

  // Gamma/mass is decreasing in |t| and spans (0, kappa); bracket the target
  // ratio in u, skipping u values where the shape solve fails.
  auto ratio_err = [&](double u) { return detail::eval_shape(u, p, cfg).ratio - p.b; };
  double u_lo = 0.0, u_hi = 0.0;
  bool bracketed = false;
  {
    std::vector<double> scan;
    if (cfg.warm_u)
      for (double w = 0.25; w <= 8.0; w *= 2) {
        scan.push_back(*cfg.warm_u - w);
        scan.push_back(*cfg.warm_u + w);
      }
    for (double u = cfg.u_lo; u <= cfg.u_hi + 1e-9; u += 1.0) scan.push_back(u);
    std::sort(scan.begin(), scan.end());
    scan.erase(std::unique(scan.begin(), scan.end()), scan.end());
    double prev_u = 0.0, prev_e = 0.0;
    bool have_prev = false;
    for (double u : scan) {
      double e;
      try {
        e = ratio_err(u);
      } catch (const std::exception&) {
        continue;
      }
      if (have_prev && prev_e * e <= 0.0) {
        u_lo = prev_u;
        u_hi = u;
        bracketed = true;
        break;
      }
      prev_u = u;
      prev_e = e;
      have_prev = true;
    }
  }
  if (!bracketed) {
    pt.message = "search failed: no bracket for the multiplier ratio";
    return pt;
  }
  double u_root;
  try {
    u_root = find_root(ratio_err, u_lo, u_hi, cfg.ratio_tol);
  } catch (const std::exception& e) {
    pt.message = std::string("search failed: ") + e.what();
    return pt;
  }

  const detail::ShapeEval ev = detail::eval_shape(u_root, p, cfg);
  const double t = -(1.0 / p.kappa) * (1.0 + std::exp(u_root));
  double lambda = std::pow(ev.mass, 2.0 / p.d);
  double mu = t * lambda;

  RadialProfile final_prof = detail::rescale_profile(ev.profile, lambda, mu);
  ProfileFunctionals f = profile_functionals(final_prof);
  pt.mult = Multipliers{lambda, mu};
  pt.I = f.energy;
  pt.mass_res = f.mass - 1.0;
  pt.gamma_res = f.gamma - p.b;

  // Safeguard: damped Newton on the true map (lambda, mu) -> (mass-1,
  // Gamma-b) if the scaling solution misses the residual tolerance.
  for (int it = 0; it < cfg.newton_max &&
                   (std::fabs(pt.mass_res) > cfg.resid_tol || std::fabs(pt.gamma_res) > cfg.resid_tol);
       ++it) {
    auto eval_lm = [&](double l, double m_) {
      RadialProfile pr = ground_state(Multipliers{l, m_}, p, cfg.gs);
      ProfileFunctionals ff = profile_functionals(pr);
      return std::pair<ProfileFunctionals, RadialProfile>(ff, std::move(pr));
    };
    const double dl = 1e-6 * std::max(1.0, std::fabs(lambda));
    const double dm = 1e-6 * std::max(1.0, std::fabs(mu));
    auto [f0, p0] = eval_lm(lambda, mu);
    auto [fl, pl] = eval_lm(lambda + dl, mu);
    auto [fm, pm] = eval_lm(lambda, mu + dm);
    const double j11 = (fl.mass - f0.mass) / dl, j12 = (fm.mass - f0.mass) / dm;
    const double j21 = (fl.gamma - f0.gamma) / dl, j22 = (fm.gamma - f0.gamma) / dm;
    const double det = j11 * j22 - j12 * j21;
    if (det == 0) break;
    const double r1 = f0.mass - 1.0, r2 = f0.gamma - p.b;
    double step_l = -(j22 * r1 - j12 * r2) / det;
    double step_m = -(-j21 * r1 + j11 * r2) / det;
    double damp = 1.0;
    while (damp > 1e-3) {
      const double l_try = lambda + damp * step_l, m_try = mu + damp * step_m;
      if (l_try > 0 && m_try < 0 && l_try + m_try * p.kappa < 0) {
        try {
          auto [ft, ptr] = eval_lm(l_try, m_try);
          if (std::hypot(ft.mass - 1.0, ft.gamma - p.b) < std::hypot(r1, r2)) {
            lambda = l_try;
            mu = m_try;
            final_prof = std::move(ptr);
            pt.mult = Multipliers{lambda, mu};
            pt.I = ft.energy;
            pt.mass_res = ft.mass - 1.0;
            pt.gamma_res = ft.gamma - p.b;
            break;
          }
        } catch (const std::exception&) {
        }
      }
      damp *= 0.5;
    }
    if (damp <= 1e-3) break;
  }

  pt.profile = std::make_shared<const RadialProfile>(std::move(final_prof));
  pt.converged = std::fabs(pt.mass_res) <= cfg.resid_tol && std::fabs(pt.gamma_res) <= cfg.resid_tol;
  if (!pt.converged && pt.message.empty()) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "search failed: best residuals mass %.3e gamma %.3e",
                  pt.mass_res, pt.gamma_res);
    pt.message = buf;
  }
  return pt;
}

// Continuation sweep over a b grid: the first point is solved cold, the rest
// warm-start from its shape parameter in parallel. Per-point failures are
// recorded, not thrown.
inline std::vector<RatePoint> rate_curve(int d, double kappa, const std::vector<double>& bs,
                                         SolveConfig cfg = {}, int workers = 1) {
  std::vector<RatePoint> out(bs.size());
  if (bs.empty()) return out;
  ProblemParams p0{d, kappa, bs.front()};
  out.front() = solve_rate_point(p0, cfg);
  std::optional<double> warm;
  if (out.front().converged && out.front().profile) {
    const double t = out.front().mult.mu / out.front().mult.lambda;
    warm = std::log(std::max(1e-300, -t * kappa - 1.0));
  }
  parallel_for(1, bs.size(), workers, [&](std::size_t i) {
    SolveConfig c = cfg;
    c.warm_u = warm;
    ProblemParams p{d, kappa, bs[i]};
    try {
      out[i] = solve_rate_point(p, c);
    } catch (const std::exception& e) {
      out[i].b = bs[i];
      out[i].message = std::string("search failed: ") + e.what();
    }
  });
  return out;
}

struct SerrinTangReport {
  double psi0 = 0.0;     // psi(0) = lambda + kappa mu, must be < 0
  double psi_inf = 0.0;  // psi(inf) = lambda, must be > 0
  double alpha = 0.0;    // unique positive zero of psi
  double g_max_increase = 0.0;
  double g_at_rcheck = 0.0;
  double xi_min = 0.0;
  bool g_monotone = false;
  bool pass = false;
  std::vector<std::string> violations;
};

// Checks the uniqueness hypotheses on a converged multiplier pair:
// psi(0) < 0 < psi(inf), g(r) = r f'(r)/f(r) non-increasing past alpha, and
// Xi >= 0 on (0, e^{-kappa alpha^2}).
inline SerrinTangReport serrin_tang_report(const Multipliers& m, const ProblemParams& p,
                                           int samples = 4000) {
  p.validate();
  SerrinTangReport rep;
  rep.psi0 = m.lambda + p.kappa * m.mu;
  rep.psi_inf = m.lambda;
  if (!(rep.psi_inf > 0)) rep.violations.push_back("psi(inf) = lambda <= 0");
  if (!(rep.psi0 < 0)) rep.violations.push_back("psi(0) = lambda + kappa mu >= 0");
  if (!rep.violations.empty()) {
    rep.pass = false;
    return rep;
  }
  const double kappa = p.kappa;
  rep.alpha = std::sqrt(std::log(-kappa * m.mu / m.lambda) / kappa);
  const double a2 = rep.alpha * rep.alpha;

  // g on (alpha (1 + 1e-3), R_check) with kappa (R^2 - alpha^2) > 20;
  // offset avoids the pole of g at alpha
  auto g = [&](double r) {
    return 1.0 + 2.0 * kappa * r * r * (1.0 / (1.0 - std::exp(kappa * (a2 - r * r))) - 1.0);
  };
  const double r_lo = rep.alpha * (1.0 + 1e-3);
  const double r_check = std::sqrt(a2 + 21.0 / kappa);
  double prev = g(r_lo);
  rep.g_max_increase = 0.0;
  for (int i = 1; i <= samples; ++i) {
    const double r = r_lo * std::pow(r_check / r_lo, double(i) / samples);
    const double cur = g(r);
    rep.g_max_increase = std::max(rep.g_max_increase, cur - prev);
    prev = cur;
  }
  rep.g_at_rcheck = g(r_check);
  rep.g_monotone = rep.g_max_increase <= 1e-8;
  if (!rep.g_monotone) rep.violations.push_back("g increases past alpha");

  // Xi(u) = -log u - (1 - e^{kappa alpha^2} u) on (0, e^{-kappa alpha^2})
  const double u_max = std::exp(-kappa * a2);
  rep.xi_min = std::numeric_limits<double>::infinity();
  for (int i = 1; i <= samples; ++i) {
    const double u = u_max * double(i) / (samples + 1);
    const double xi = -std::log(u) - (1.0 - std::exp(kappa * a2) * u);
    rep.xi_min = std::min(rep.xi_min, xi);
  }
  if (!(rep.xi_min >= -1e-12)) rep.violations.push_back("Xi < 0 on (0, e^{-kappa alpha^2})");

  rep.pass = rep.violations.empty();
  return rep;
}

// dI/db at interior index i of a uniform b grid: five-point stencils (4th
// order, one-sided variants near the edges), three-point fallback when the
// grid is too short. I is strongly convex near b = 0, so stencil order
// matters for the mu = 2 I'(b) comparison.
inline double grid_derivative(const std::vector<double>& bs, const std::vector<double>& I,
                              std::size_t i) {
  const std::size_t n = bs.size();
  if (n < 3 || i == 0 || i + 1 >= n)
    throw std::invalid_argument("grid_derivative: interior index of a grid with >= 3 points");
  const double h = bs[1] - bs[0];
  if (n < 5) return (I[i + 1] - I[i - 1]) / (2 * h);
  if (i >= 2 && i + 2 < n)
    return (-I[i + 2] + 8 * I[i + 1] - 8 * I[i - 1] + I[i - 2]) / (12 * h);
  if (i == 1) return (-3 * I[0] - 10 * I[1] + 18 * I[2] - 6 * I[3] + I[4]) / (12 * h);
  return (3 * I[n - 1] + 10 * I[n - 2] - 18 * I[n - 3] + 6 * I[n - 4] - I[n - 5]) / (12 * h);
}

}  // namespace rangeld
