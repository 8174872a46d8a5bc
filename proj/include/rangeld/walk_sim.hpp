#pragma once

// Simple random walk on Z^d: range statistics, escape probability, skeleton
// empirical measures, conditioned (rejection) sampling, and the exact
// small-scale estimates (bridge hitting DP, local CLT table, binomial bound).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "rangeld/functionals.hpp"
#include "rangeld/parallel.hpp"
#include "rangeld/points.hpp"
#include "rangeld/rng.hpp"

namespace rangeld {

struct WalkParams {
  int d = 3;
  std::uint64_t n = 0;
  double eps = 0.5;  // skeleton scale
  std::uint64_t seed = 1;

  std::uint64_t block_length() const {
    const auto ell = std::uint64_t(eps * std::pow(double(n), 2.0 / d));
    return std::max<std::uint64_t>(ell, 1);
  }

  // n rounded down to a multiple of ell
  std::uint64_t steps() const {
    const std::uint64_t ell = block_length();
    return std::max<std::uint64_t>(n / ell, 1) * ell;
  }

  void validate() const {
    if (d < 3) throw std::invalid_argument("WalkParams: d >= 3 required");
    if (n == 0) throw std::invalid_argument("WalkParams: n must be positive");
    if (!(eps > 0)) throw std::invalid_argument("WalkParams: eps must be positive");
  }
};

struct WalkRecord {
  std::uint64_t range = 0;
  std::vector<double> skeleton;        // (M+1) x d, scaled by n^{-1/d}
  std::vector<std::int64_t> skeleton_lattice;  // (M+1) x d, unscaled
  std::uint64_t M = 0;
  std::uint64_t n = 0;
  int d = 3;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  bool accepted = true;
};

namespace detail {

inline std::uint64_t pack_site(const std::int64_t* s, int d) {
  const int bits = 64 / d;
  const std::int64_t lim = (std::int64_t(1) << (bits - 1)) - 1;
  std::uint64_t key = 0;
  for (int k = 0; k < d; ++k) {
    if (s[k] > lim || s[k] < -lim)
      throw std::overflow_error("pack_site: coordinate exceeds packing range");
    key = (key << bits) | (std::uint64_t(s[k] + lim) & ((std::uint64_t(1) << bits) - 1));
  }
  return key;
}

}  // namespace detail

// Core walk: `move(step)` returns a direction index in [0, 2d); axis = idx/2,
// sign = +1 for even idx.
template <class MoveSource>
WalkRecord simulate_moves(const WalkParams& p, MoveSource&& move) {
  p.validate();
  const int d = p.d;
  const std::uint64_t ell = p.block_length();
  const std::uint64_t n = p.steps();
  const std::uint64_t M = n / ell;
  const double scale = std::pow(double(n), -1.0 / d);

  WalkRecord rec;
  rec.d = d;
  rec.n = n;
  rec.M = M;
  rec.seed = p.seed;
  rec.skeleton.reserve((M + 1) * d);
  rec.skeleton_lattice.reserve((M + 1) * d);

  std::vector<std::int64_t> pos(d, 0);
  std::unordered_set<std::uint64_t> visited;
  visited.reserve(std::min<std::uint64_t>(n, std::uint64_t(1) << 24) + 16);

  auto record_skeleton = [&] {
    for (int k = 0; k < d; ++k) {
      rec.skeleton_lattice.push_back(pos[k]);
      rec.skeleton.push_back(double(pos[k]) * scale);
    }
  };
  record_skeleton();

  for (std::uint64_t t = 1; t <= n; ++t) {
    const unsigned dir = move(t - 1);
    const int axis = int(dir >> 1);
    pos[axis] += (dir & 1) ? -1 : 1;
    visited.insert(detail::pack_site(pos.data(), d));
    if (t % ell == 0) record_skeleton();
  }
  rec.range = visited.size();
  return rec;
}

inline WalkRecord simulate(const WalkParams& p, std::uint64_t stream) {
  Philox rng(p.seed, stream);
  const unsigned m = 2u * p.d;
  WalkRecord rec = simulate_moves(p, [&](std::uint64_t) { return rng.next_below(m); });
  rec.stream = stream;
  return rec;
}

// ---------------------------------------------------------------------------
// Escape probability kappa_d = 1 / G(0).

struct KappaEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::string method;
};

// Exact return probabilities via the axis decomposition: conditioning on how
// many of the n steps use the first axis (Binomial(n, 1/d)) splits the walk
// into an independent 1-D walk and a (d-1)-dim walk. All terms live in [0, 1].
inline std::vector<double> return_probabilities(int d, std::size_t n_max) {
  std::vector<double> one(n_max + 1, 0.0);
  one[0] = 1.0;
  for (std::size_t j = 0; 2 * (j + 1) <= n_max; ++j)
    one[2 * (j + 1)] = one[2 * j] * (2.0 * j + 1) / (2.0 * j + 2);

  std::vector<double> cur = one;
  for (int dim = 2; dim <= d; ++dim) {
    std::vector<double> nxt(n_max + 1, 0.0);
    nxt[0] = 1.0;
    const double p = 1.0 / dim;
    for (std::size_t n = 2; n <= n_max; n += 2) {
      const double mean = n * p;
      const double sd = std::sqrt(n * p * (1 - p));
      const std::size_t k_lo = std::size_t(std::max(0.0, mean - 12 * sd - 12)) & ~std::size_t(1);
      const std::size_t k_hi = std::min<std::size_t>(n, std::size_t(mean + 12 * sd + 12));
      double acc = 0;
      for (std::size_t k = k_lo; k <= k_hi; k += 2) {
        if ((n - k) % 2) continue;
        const double lb = std::lgamma(double(n + 1)) - std::lgamma(double(k + 1)) -
                          std::lgamma(double(n - k + 1)) + k * std::log(p) +
                          (n - k) * std::log1p(-p);
        acc += std::exp(lb) * one[k] * cur[n - k];
      }
      nxt[n] = acc;
    }
    cur = std::move(nxt);
  }
  return cur;
}

inline KappaEstimate kappa_green_series(int d, std::size_t n_max = 20000) {
  if (d < 3) throw std::invalid_argument("kappa_green_series: d >= 3 required");
  n_max &= ~std::size_t(1);
  const std::vector<double> probs = return_probabilities(d, n_max);
  double green = 0;
  for (std::size_t n = 0; n <= n_max; n += 2) green += probs[n];

  // tail sum of the local-CLT leading term 2 (d / (4 pi m))^{d/2} over
  // m > n_max/2, by Euler-Maclaurin
  const double s = 0.5 * d;
  const double c = 2.0 * std::pow(d / (4 * M_PI), s);
  const double m0 = double(n_max / 2);
  const double tail = c * (std::pow(m0, 1 - s) / (s - 1) - 0.5 * std::pow(m0, -s) +
                           s / 12.0 * std::pow(m0, -s - 1));
  green += tail;

  // empirical handle on the neglected LLT corrections: relative deviation of
  // the exact term from the leading LLT term at the truncation point
  const double llt_last = c * std::pow(m0, -s);
  const double rel = llt_last > 0 ? std::fabs(probs[n_max] - llt_last) / llt_last : 0.0;
  const double green_err = rel * tail + 1e-12 * green;

  KappaEstimate est;
  est.method = "green_series";
  est.value = 1.0 / green;
  est.std_error = green_err / (green * green);
  return est;
}

inline KappaEstimate kappa_monte_carlo(int d, std::size_t walks, std::uint64_t cutoff,
                                       std::uint64_t seed, int workers = 1) {
  if (d < 3) throw std::invalid_argument("kappa_monte_carlo: d >= 3 required");
  std::vector<std::uint8_t> escaped(walks, 0);
  parallel_for(0, walks, workers, [&](std::size_t w) {
    Philox rng(seed, w);
    std::vector<std::int64_t> pos(d, 0);
    const unsigned m = 2u * d;
    bool returned = false;
    for (std::uint64_t t = 0; t < cutoff && !returned; ++t) {
      const unsigned dir = rng.next_below(m);
      pos[dir >> 1] += (dir & 1) ? -1 : 1;
      returned = std::all_of(pos.begin(), pos.end(), [](std::int64_t v) { return v == 0; });
    }
    escaped[w] = returned ? 0 : 1;
  });
  std::size_t cnt = 0;
  for (auto e : escaped) cnt += e;
  const double k = double(cnt) / double(walks);

  // upper bias: P(first return after cutoff) <= sum_{n > cutoff} P(S_n = 0)
  const double s = 0.5 * d;
  const double c = 2.0 * std::pow(d / (4 * M_PI), s);
  const double m0 = double(cutoff / 2);
  const double bias = c * std::pow(m0, 1 - s) / (s - 1);

  KappaEstimate est;
  est.method = "monte_carlo";
  est.value = k;
  est.std_error = std::sqrt(k * (1 - k) / double(walks)) + bias;
  return est;
}

// Rigorous upper bound on E(R_n)/n - kappa_d. Writing E R_n = sum_m q_m with
// q_m the no-return probability within m steps, q_m - kappa_d = P(first
// return after m) <= sum_{j>m} P(S_j = 0), so the bias is at most
// (1/n) sum_{m<=n} sum_{j>m} P(S_j=0) = (1/n) sum_j P(S_j=0) min(j-1, n).
inline double range_bias_bound(int d, std::uint64_t n, std::size_t n_max = 20000) {
  n_max &= ~std::size_t(1);
  const std::vector<double> probs = return_probabilities(d, n_max);
  double acc = 0;
  for (std::size_t j = 2; j <= n_max; j += 2)
    acc += probs[j] * double(std::min<std::uint64_t>(j - 1, n));
  // asymptotic continuation with P(S_{2m}=0) ~ c m^{-d/2}
  const double s = 0.5 * d;
  const double c = 2.0 * std::pow(d / (4 * M_PI), s);
  const double m1 = double(n_max / 2);
  const double mn = std::max(m1, double(n) / 2);
  if (s < 2.0) {  // d = 3: integrate c m^{-3/2} (2m - 1) and c n m^{-3/2}
    acc += 2 * c * (std::pow(mn, 2 - s) - std::pow(m1, 2 - s)) / (2 - s);
    acc += double(n) * c * std::pow(mn, 1 - s) / (s - 1);
  } else {
    acc += double(n) * c * std::pow(m1, 1 - s) / (s - 1);
  }
  return acc / double(n);
}

inline KappaEstimate escape_probability(int d, const std::string& method,
                                        std::uint64_t seed = 1, int workers = 1) {
  if (method == "green_series") return kappa_green_series(d);
  if (method == "monte_carlo") return kappa_monte_carlo(d, 200000, 40000, seed, workers);
  throw std::invalid_argument("escape_probability: unknown method " + method);
}

// ---------------------------------------------------------------------------
// Skeleton empirical measures.

// Site measure uses skeleton indices 0 <= i < M; the pair measure uses pairs
// (i-1, i) for 0 < i <= M. The endpoint off-by-one between the two is kept
// exactly as defined.
inline std::pair<Cloud, PairEmpiricalMeasure> skeleton_measures(const WalkRecord& rec) {
  if (rec.skeleton.empty()) throw std::invalid_argument("skeleton_measures: no skeleton");
  const int d = rec.d;
  const std::uint64_t M = rec.M;
  Cloud site;
  site.dim = d;
  site.coords.assign(rec.skeleton.begin(), rec.skeleton.begin() + M * d);
  site.weights.assign(M, 1.0 / double(M));

  PairEmpiricalMeasure pair;
  pair.dim = d;
  pair.first.assign(rec.skeleton.begin(), rec.skeleton.begin() + M * d);
  pair.second.assign(rec.skeleton.begin() + d, rec.skeleton.begin() + (M + 1) * d);
  pair.weights.assign(M, 1.0 / double(M));
  return {std::move(site), std::move(pair)};
}

inline double pair_displacement_tail(const PairEmpiricalMeasure& mu, double A) {
  if (!(A > 0)) throw std::invalid_argument("pair_displacement_tail: A must be positive");
  double s = 0;
  for (std::size_t i = 0; i < mu.size(); ++i)
    if (sqdist(mu.x(i), mu.y(i), mu.dim) >= A * A) s += mu.weights[i];
  return s;
}

// ---------------------------------------------------------------------------
// Conditioned sampling.

struct ConditionedSample {
  std::vector<WalkRecord> accepted;
  std::size_t attempts = 0;
  double acceptance_rate = 0.0;
  double wilson_lo = 0.0;
  double wilson_hi = 0.0;
  bool exhausted = false;  // budget spent with zero acceptances
};

inline void wilson_interval(std::size_t k, std::size_t n, double& lo, double& hi) {
  if (n == 0) {
    lo = 0;
    hi = 1;
    return;
  }
  const double z = 1.96, p = double(k) / n;
  const double denom = 1 + z * z / n;
  const double center = (p + z * z / (2 * n)) / denom;
  const double half = z / denom * std::sqrt(p * (1 - p) / n + z * z / (4.0 * n * n));
  lo = std::max(0.0, center - half);
  hi = std::min(1.0, center + half);
}

inline ConditionedSample conditioned_sample(const WalkParams& p, double b, std::size_t budget,
                                            std::size_t want, int workers = 1) {
  if (!(b > 0)) throw std::invalid_argument("conditioned_sample: b must be positive");
  ConditionedSample out;
  const std::uint64_t n = p.steps();
  const auto threshold = std::uint64_t(b * double(n));
  std::size_t done = 0;
  const std::size_t chunk = 64;  // fixed so attempt counts are worker-independent
  while (out.attempts < budget && out.accepted.size() < want) {
    const std::size_t batch = std::min(chunk, budget - out.attempts);
    std::vector<WalkRecord> recs(batch);
    parallel_for(0, batch, workers, [&](std::size_t i) { recs[i] = simulate(p, done + i); });
    for (auto& r : recs) {
      r.accepted = r.range <= threshold;
      if (r.accepted && out.accepted.size() < want) out.accepted.push_back(std::move(r));
    }
    out.attempts += batch;
    done += batch;
  }
  std::size_t k = out.accepted.size();
  out.acceptance_rate = out.attempts ? double(k) / double(out.attempts) : 0.0;
  wilson_interval(k, out.attempts, out.wilson_lo, out.wilson_hi);
  out.exhausted = k == 0;
  return out;
}

// ---------------------------------------------------------------------------
// Exact bridge machinery (small ell).

namespace detail {

// dense DP over the diamond |u|_1 <= ell around the start; index helpers
struct DpBox {
  int ell;
  int d;
  int side;
  std::vector<double> cur, nxt;

  DpBox(int ell_, int d_) : ell(ell_), d(d_), side(2 * ell_ + 1) {
    std::size_t cells = 1;
    for (int k = 0; k < d; ++k) cells *= side;
    cur.assign(cells, 0.0);
    nxt.assign(cells, 0.0);
  }

  std::size_t index(const std::int64_t* u) const {
    std::size_t idx = 0;
    for (int k = 0; k < d; ++k) idx = idx * side + std::size_t(u[k] + ell);
    return idx;
  }

  bool inside(const std::int64_t* u) const {
    std::int64_t l1 = 0;
    for (int k = 0; k < d; ++k) {
      if (u[k] < -ell || u[k] > ell) return false;
      l1 += std::llabs(u[k]);
    }
    return l1 <= ell;
  }

  // one step of the walk kernel; `skip` (optional) is a cell index whose
  // incoming mass is dropped (the avoided site)
  void step(std::ptrdiff_t skip) {
    std::fill(nxt.begin(), nxt.end(), 0.0);
    const double w = 1.0 / (2.0 * d);
    std::vector<std::ptrdiff_t> strides(d);
    std::ptrdiff_t s = 1;
    for (int k = d - 1; k >= 0; --k) {
      strides[k] = s;
      s *= side;
    }
    std::vector<std::int64_t> u(d, -ell);
    const std::size_t cells = cur.size();
    for (std::size_t idx = 0; idx < cells; ++idx) {
      const double v = cur[idx];
      if (v > 0) {
        std::int64_t l1 = 0;
        for (int k = 0; k < d; ++k) l1 += std::llabs(u[k]);
        for (int k = 0; k < d; ++k) {
          if (u[k] + 1 <= ell && l1 + (u[k] >= 0 ? 1 : -1) <= ell) {
            const std::ptrdiff_t j = std::ptrdiff_t(idx) + strides[k];
            if (j != skip) nxt[j] += w * v;
          }
          if (u[k] - 1 >= -ell && l1 + (u[k] <= 0 ? 1 : -1) <= ell) {
            const std::ptrdiff_t j = std::ptrdiff_t(idx) - strides[k];
            if (j != skip) nxt[j] += w * v;
          }
        }
      }
      // odometer over u
      for (int k = d - 1; k >= 0; --k) {
        if (++u[k] <= ell) break;
        u[k] = -ell;
      }
    }
    cur.swap(nxt);
  }
};

}  // namespace detail

// q_{ell,{z}}(x, y) = P_x(z visited during (0, ell] | S_ell = y), exact.
inline double bridge_hit_probability(const std::vector<std::int64_t>& x,
                                     const std::vector<std::int64_t>& y,
                                     const std::vector<std::int64_t>& z, int ell, int d) {
  if (ell < 1 || ell > 20) throw std::invalid_argument("bridge_hit_probability: need 1 <= ell <= 20");
  std::vector<std::int64_t> dy(d), dz(d);
  for (int k = 0; k < d; ++k) {
    dy[k] = y[k] - x[k];
    dz[k] = z[k] - x[k];
  }
  detail::DpBox total(ell, d);
  std::vector<std::int64_t> origin(d, 0);
  total.cur[total.index(origin.data())] = 1.0;
  for (int t = 0; t < ell; ++t) total.step(-1);
  const double f = total.inside(dy.data()) ? total.cur[total.index(dy.data())] : 0.0;
  if (f <= 0) throw std::runtime_error("bridge_hit_probability: conditioning event null");

  detail::DpBox avoid(ell, d);
  avoid.cur[avoid.index(origin.data())] = 1.0;
  const std::ptrdiff_t skip =
      avoid.inside(dz.data()) ? std::ptrdiff_t(avoid.index(dz.data())) : -1;
  for (int t = 0; t < ell; ++t) avoid.step(skip);
  const double g = avoid.inside(dy.data()) ? avoid.cur[avoid.index(dy.data())] : 0.0;
  return 1.0 - g / f;
}

// ---------------------------------------------------------------------------
// Conditional range given the skeleton.

// (1/n) E(R_n | skeleton) = (1/n) sum_z [1 - prod_i (1 - q_i(z))], summed
// exactly over the union of the per-segment L1 diamonds (the support of the
// q_i). Results are memoized by (segment displacement, target offset).
inline double conditional_range_exact(const WalkRecord& rec, int workers = 1) {
  const int d = rec.d;
  const std::uint64_t M = rec.M;
  const int ell = int(rec.n / M);
  if (ell > 12) throw std::invalid_argument("conditional_range_exact: ell too large for exact DP");

  struct PairHash {
    std::size_t operator()(const std::pair<std::uint64_t, std::uint64_t>& p) const {
      return std::hash<std::uint64_t>()(p.first * 0x9E3779B97F4A7C15ull ^ p.second);
    }
  };

  auto seg_start = [&](std::uint64_t i) { return rec.skeleton_lattice.data() + i * d; };

  // collect candidate sites z: union over segments of {z : |z-x|_1 + |z-y|_1 <= ell}
  std::unordered_set<std::uint64_t> cand;
  std::vector<std::int64_t> z(d);
  for (std::uint64_t i = 0; i < M; ++i) {
    const std::int64_t* x = seg_start(i);
    const std::int64_t* y = seg_start(i + 1);
    std::vector<std::int64_t> lo(d), hi(d);
    for (int k = 0; k < d; ++k) {
      lo[k] = std::min(x[k], y[k]) - ell;
      hi[k] = std::max(x[k], y[k]) + ell;
    }
    std::vector<std::int64_t> u(lo);
    while (true) {
      std::int64_t s = 0;
      for (int k = 0; k < d; ++k) s += std::llabs(u[k] - x[k]) + std::llabs(u[k] - y[k]);
      if (s <= ell) cand.insert(detail::pack_site(u.data(), d));
      int k = d - 1;
      for (; k >= 0; --k) {
        if (++u[k] <= hi[k]) break;
        u[k] = lo[k];
      }
      if (k < 0) break;
    }
  }
  std::vector<std::uint64_t> sites(cand.begin(), cand.end());
  std::sort(sites.begin(), sites.end());

  auto unpack = [&](std::uint64_t key, std::int64_t* out) {
    const int bits = 64 / d;
    const std::int64_t lim = (std::int64_t(1) << (bits - 1)) - 1;
    for (int k = d - 1; k >= 0; --k) {
      out[k] = std::int64_t(key & ((std::uint64_t(1) << bits) - 1)) - lim;
      key >>= bits;
    }
  };

  std::unordered_map<std::pair<std::uint64_t, std::uint64_t>, double, PairHash> memo;
  std::vector<double> partial(sites.size(), 0.0);
  // memo is shared read-mostly; fill it serially first for the distinct keys
  // encountered, then sum in parallel with a read-only map
  std::vector<std::int64_t> xv(d), yv(d), zv(d);
  for (std::size_t si = 0; si < sites.size(); ++si) {
    unpack(sites[si], zv.data());
    double log_miss = 0.0;
    bool certain = false;
    for (std::uint64_t i = 0; i < M && !certain; ++i) {
      const std::int64_t* x = seg_start(i);
      const std::int64_t* y = seg_start(i + 1);
      std::int64_t s = 0;
      for (int k = 0; k < d; ++k) s += std::llabs(zv[k] - x[k]) + std::llabs(zv[k] - y[k]);
      if (s > ell) continue;
      std::vector<std::int64_t> dy(d), dz(d);
      for (int k = 0; k < d; ++k) {
        dy[k] = y[k] - x[k];
        dz[k] = zv[k] - x[k];
      }
      const auto key = std::make_pair(detail::pack_site(dy.data(), d),
                                      detail::pack_site(dz.data(), d));
      double q;
      auto it = memo.find(key);
      if (it != memo.end()) {
        q = it->second;
      } else {
        for (int k = 0; k < d; ++k) {
          xv[k] = 0;
          yv[k] = dy[k];
        }
        q = bridge_hit_probability(xv, yv, dz, ell, d);
        memo.emplace(key, q);
      }
      if (q >= 1.0) {
        certain = true;
      } else {
        log_miss += std::log1p(-q);
      }
    }
    partial[si] = certain ? 1.0 : -std::expm1(log_miss);
  }
  (void)workers;
  double total = 0;
  for (double v : partial) total += v;
  return total / double(rec.n);
}

// Continuum counterpart: phi_{infty,eps}(L^{(2)}_{M,eps}).
inline double conditional_range_continuum(const WalkRecord& rec, double eps, double kappa,
                                          const PhiInftyOptions& opt = {}) {
  auto [site, pair] = skeleton_measures(rec);
  (void)site;
  return phi_infty(pair, eps, kappa, rec.d, opt).value;
}

// ---------------------------------------------------------------------------
// Local CLT table.

struct LltError {
  double sup_error = 0.0;         // sup over same-parity x of |P(S_n=x) - 2 p_{n/d}(x)|
  double scaled = 0.0;            // n^{(d+2)/2} * sup_error
  bool parity_ok = true;          // opposite-parity sites carry exactly zero mass
};

inline LltError llt_error(int n, int d) {
  if (d != 3 || n < 1 || n > 30) throw std::invalid_argument("llt_error: d=3 and n <= 30 required");
  detail::DpBox dp(n, d);
  std::vector<std::int64_t> origin(d, 0);
  dp.cur[dp.index(origin.data())] = 1.0;
  for (int t = 0; t < n; ++t) dp.step(-1);

  LltError res;
  const int side = dp.side;
  std::vector<std::int64_t> u(d, -n);
  const std::size_t cells = dp.cur.size();
  (void)side;
  for (std::size_t idx = 0; idx < cells; ++idx) {
    std::int64_t l1 = 0;
    for (int k = 0; k < d; ++k) l1 += std::llabs(u[k]);
    if (l1 <= n) {
      const double prob = dp.cur[idx];
      if (((l1 ^ n) & 1) != 0) {
        if (prob != 0.0) res.parity_ok = false;
      } else {
        double sq = 0;
        for (int k = 0; k < d; ++k) sq += double(u[k]) * double(u[k]);
        const double gauss = 2.0 * std::pow(2 * M_PI * double(n) / d, -0.5 * d) *
                             std::exp(-0.5 * sq * d / double(n));
        res.sup_error = std::max(res.sup_error, std::fabs(prob - gauss));
      }
    }
    for (int k = d - 1; k >= 0; --k) {
      if (++u[k] <= n) break;
      u[k] = -n;
    }
  }
  res.scaled = std::pow(double(n), 0.5 * (d + 2)) * res.sup_error;
  return res;
}

// ---------------------------------------------------------------------------
// Binomial large-deviation bound.

struct BinomialLd {
  double exact = 0.0;  // P(Bin(M, eps0/C) >= eps0 M)
  double bound = 0.0;  // exp(-M eps0 Xi(C)), Xi(C) = log C + 1/C - 1
  double xi = 0.0;
};

inline BinomialLd binomial_ld_check(std::size_t M, double eps0, double C) {
  if (!(C > 0) || !(eps0 > 0) || eps0 / C > 1.0)
    throw std::invalid_argument("binomial_ld_check: need C > 0, eps0 > 0, eps0/C <= 1");
  BinomialLd res;
  res.xi = std::log(C) + 1.0 / C - 1.0;
  res.bound = std::exp(-double(M) * eps0 * res.xi);
  const double p = eps0 / C;
  const auto k0 = std::size_t(std::ceil(eps0 * double(M) - 1e-12));
  double acc = 0;
  for (std::size_t k = k0; k <= M; ++k) {
    const double lp = std::lgamma(double(M + 1)) - std::lgamma(double(k + 1)) -
                      std::lgamma(double(M - k + 1)) + k * std::log(p) +
                      double(M - k) * std::log1p(-p);
    acc += std::exp(lp);
  }
  res.exact = std::min(acc, 1.0);
  return res;
}

}  // namespace rangeld
