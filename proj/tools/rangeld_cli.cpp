// Command-line driver: rate-curve, walk-stats, tube, mv-demo, verify.
//
// Exit codes: 0 ok, 1 hard-check failure, 2 config error, 3 inconclusive
// (zero acceptances in a conditioned run).

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rangeld/functionals.hpp"
#include "rangeld/mv_topology.hpp"
#include "rangeld/rate_function.hpp"
#include "rangeld/walk_sim.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rangeld;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string now_iso() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%FT%TZ", std::gmtime(&t));
  return buf;
}

std::uint64_t fnv1a_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::uint64_t h = 0xcbf29ce484222325ull;
  char c;
  while (in.get(c)) {
    h ^= std::uint8_t(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

struct Settings {
  std::map<std::string, std::string> kv;     // config file + flag overrides
  std::map<std::string, double> tol;         // tolerance table
  std::uint64_t seed = 1;
  int workers = 1;
  fs::path out = "out";

  bool has(const std::string& k) const { return kv.count(k) != 0; }

  double num(const std::string& k, double dflt) const {
    auto it = kv.find(k);
    if (it == kv.end()) return dflt;
    std::size_t pos = 0;
    const double v = std::stod(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("config: bad number for " + k);
    return v;
  }

  std::int64_t integer(const std::string& k, std::int64_t dflt) const {
    const double v = num(k, double(dflt));
    const auto r = std::int64_t(v);
    if (double(r) != v) throw std::invalid_argument("config: integer expected for " + k);
    return r;
  }
};

std::map<std::string, double> default_tolerances() {
  return {
      {"pohozaev_rel", 1e-3},   {"mu_deriv_rel", 0.05},     {"bridge_norm", 1e-4},
      {"heat_norm", 1e-6},      {"scaling_endpoint", 0.01}, {"kappa_watson", 1e-3},
      {"kappa_sigmas", 3.0},    {"llt_slope_sigmas", 2.0},  {"serrin_tang_g", 1e-8},
      {"serrin_tang_xi", 1e-12},
  };
}

void parse_config_file(const fs::path& p, std::map<std::string, std::string>& kv) {
  std::ifstream in(p);
  if (!in) throw std::invalid_argument("config: cannot open " + p.string());
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      if (line.find_first_not_of(" \t\r") != std::string::npos)
        throw std::invalid_argument("config: malformed line: " + line);
      continue;
    }
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq)), val = trim(line.substr(eq + 1));
    if (key.empty()) throw std::invalid_argument("config: empty key");
    kv[key] = val;
  }
}

struct Manifest {
  fs::path dir;
  json doc;

  void start(const std::string& command, const Settings& s) {
    fs::create_directories(dir);
    doc["command"] = command;
    doc["version"] = kVersion;
    doc["status"] = "running";
    doc["started"] = now_iso();
    doc["seed"] = s.seed;
    doc["workers"] = s.workers;
    doc["config"] = json::object();
    for (const auto& [k, v] : s.kv) doc["config"][k] = v;
    doc["tolerances"] = json::object();
    for (const auto& [k, v] : s.tol) doc["tolerances"][k] = v;
    write();
  }

  void finish(bool ok) {
    doc["status"] = ok ? "complete" : "failed";
    doc["finished"] = now_iso();
    doc["outputs"] = json::object();
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (!entry.is_regular_file() || entry.path().filename() == "manifest.json") continue;
      char hex[20];
      std::snprintf(hex, sizeof hex, "%016llx",
                    (unsigned long long)fnv1a_file(entry.path()));
      doc["outputs"][entry.path().filename().string()] = std::string("fnv1a:") + hex;
    }
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
      if (!entry.is_regular_file()) continue;
      const auto rel = fs::relative(entry.path(), dir).string();
      if (rel.find('/') == std::string::npos) continue;
      char hex[20];
      std::snprintf(hex, sizeof hex, "%016llx",
                    (unsigned long long)fnv1a_file(entry.path()));
      doc["outputs"][rel] = std::string("fnv1a:") + hex;
    }
    write();
  }

  void write() const {
    std::ofstream out(dir / "manifest.json.tmp");
    out << doc.dump(2) << "\n";
    out.close();
    fs::rename(dir / "manifest.json.tmp", dir / "manifest.json");
  }
};

void write_json(const fs::path& p, const json& j) {
  std::ofstream out(p);
  out << j.dump(2) << "\n";
}

// ---------------------------------------------------------------------------

int cmd_rate_curve(const Settings& s) {
  const int d = int(s.integer("d", 3));
  const double kappa = s.num("kappa", 1.0);
  const double b_min = s.num("b_min", 0.14 * kappa);
  const double b_max = s.num("b_max", 0.86 * kappa);
  const auto count = s.integer("b_count", 10);
  if (count < 1 || !(b_min > 0) || !(b_max >= b_min) || !(kappa > 0) || d < 3)
    throw std::invalid_argument("rate-curve: invalid grid");

  std::vector<double> bs;
  for (std::int64_t i = 0; i < count; ++i)
    bs.push_back(count == 1 ? b_min : b_min + (b_max - b_min) * double(i) / double(count - 1));

  const auto pts = rate_curve(d, kappa, bs, {}, s.workers);

  std::ofstream csv(s.out / "rate_curve.csv");
  csv << "b,I,lambda,mu,mass_res,gamma_res,converged\n";
  for (const auto& pt : pts)
    csv << fmt17(pt.b) << ',' << fmt17(pt.I) << ',' << fmt17(pt.mult.lambda) << ','
        << fmt17(pt.mult.mu) << ',' << fmt17(pt.mass_res) << ',' << fmt17(pt.gamma_res) << ','
        << (pt.converged ? 1 : 0) << '\n';
  csv.close();

  fs::create_directories(s.out / "profiles");
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (!pts[i].profile) continue;
    char name[48];
    std::snprintf(name, sizeof name, "profile_%03zu.csv", i);
    std::ofstream pf(s.out / "profiles" / name);
    pf << "r,y\n";
    const auto& prof = *pts[i].profile;
    for (std::size_t k = 0; k < prof.grid.nodes.size(); ++k)
      pf << fmt17(prof.grid.nodes[k]) << ',' << fmt17(prof.y[k]) << '\n';
  }

  json ids = json::array();
  bool hard_fail = false;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto& pt = pts[i];
    json rec;
    rec["b"] = pt.b;
    rec["converged"] = pt.converged;
    if (!pt.converged) {
      rec["message"] = pt.message;
      hard_fail = true;
      ids.push_back(rec);
      continue;
    }
    const double lhs = pt.mult.lambda + pt.mult.mu * pt.b;
    const double rhs = 2.0 * (1.0 - 2.0 / d) * pt.I;
    const double poho = std::fabs(lhs - rhs) / std::max(std::fabs(rhs), 1e-30);
    rec["pohozaev_rel"] = poho;
    if (poho > s.tol.at("pohozaev_rel")) hard_fail = true;
    if (i > 0 && i + 1 < pts.size()) {
      bool all_conv = true;
      std::vector<double> Is;
      for (const auto& q : pts) {
        all_conv = all_conv && q.converged;
        Is.push_back(q.I);
      }
      if (all_conv) {
        const double dI = grid_derivative(bs, Is, i);
        const double rel = std::fabs(pt.mult.mu - 2 * dI) / std::fabs(pt.mult.mu);
        rec["mu_vs_2dIdb_rel"] = rel;
        if (rel > s.tol.at("mu_deriv_rel")) hard_fail = true;
      }
    }
    const auto st = serrin_tang_report(pt.mult, ProblemParams{d, kappa, pt.b});
    rec["serrin_tang_pass"] = st.pass;
    rec["serrin_tang"] = {{"psi0", st.psi0},
                          {"alpha", st.alpha},
                          {"g_max_increase", st.g_max_increase},
                          {"xi_min", st.xi_min}};
    if (!st.pass) hard_fail = true;
    ids.push_back(rec);
  }
  // monotone decrease of I along the grid
  for (std::size_t i = 1; i < pts.size(); ++i)
    if (pts[i].converged && pts[i - 1].converged && pts[i].I > pts[i - 1].I) hard_fail = true;

  json top;
  top["points"] = ids;
  top["hard_fail"] = hard_fail;
  write_json(s.out / "identities.json", top);
  return hard_fail ? 1 : 0;
}

int cmd_walk_stats(const Settings& s) {
  const int d = int(s.integer("d", 3));
  const auto n = std::uint64_t(s.integer("n", 100000));
  const auto seeds = std::size_t(s.integer("seeds", 100));
  const double eps = s.num("eps", 0.5);
  if (d < 3 || n == 0 || seeds == 0 || !(eps > 0))
    throw std::invalid_argument("walk-stats: invalid parameters");

  WalkParams p{d, n, eps, s.seed};
  std::vector<WalkRecord> recs(seeds);
  parallel_for(0, seeds, s.workers, [&](std::size_t i) { recs[i] = simulate(p, i); });

  std::ofstream csv(s.out / "walks.csv");
  csv << "seed,stream,n,d,eps,range,accepted\n";
  double sum = 0, sum2 = 0;
  for (std::size_t i = 0; i < seeds; ++i) {
    const auto& r = recs[i];
    csv << s.seed << ',' << i << ',' << r.n << ',' << r.d << ',' << fmt17(eps) << ',' << r.range
        << ',' << (r.accepted ? 1 : 0) << '\n';
    const double v = double(r.range) / double(r.n);
    sum += v;
    sum2 += v * v;
  }
  csv.close();
  const double mean = sum / double(seeds);
  const double var = std::max(0.0, sum2 / double(seeds) - mean * mean);
  const double stderr_mean = std::sqrt(var / double(seeds));

  const auto gs = kappa_green_series(d);
  const auto mc = kappa_monte_carlo(d, std::size_t(s.integer("mc_walks", 100000)),
                                    std::uint64_t(s.integer("mc_cutoff", 20000)), s.seed + 1,
                                    s.workers);
  const double gap = std::fabs(gs.value - mc.value);
  const bool agree = gap <= s.tol.at("kappa_sigmas") * (gs.std_error + mc.std_error);

  json rep;
  rep["range_mean"] = mean;
  rep["range_stderr"] = stderr_mean;
  rep["kappa_green_series"] = {{"value", gs.value}, {"std_error", gs.std_error}};
  rep["kappa_monte_carlo"] = {{"value", mc.value}, {"std_error", mc.std_error}};
  rep["methods_agree"] = agree;
  const double bias = range_bias_bound(d, n);
  rep["range_above_kappa"] = mean > gs.value;
  rep["range_bias_bound"] = bias;
  rep["range_within_bound"] =
      mean - gs.value <= bias + s.tol.at("kappa_sigmas") * (stderr_mean + gs.std_error);
  write_json(s.out / "kappa.json", rep);
  return agree ? 0 : 1;
}

int cmd_tube(const Settings& s) {
  const int d = int(s.integer("d", 3));
  const auto n = std::uint64_t(s.integer("n", 10000));
  const double eps = s.num("eps", 0.5);
  const double b = s.num("b", 0.62);
  const auto want = std::size_t(s.integer("accepted_target", 40));
  const auto budget = std::size_t(s.integer("budget", 400000));
  const auto orbit_samples = std::size_t(s.integer("orbit_samples", 2000));
  if (d != 3) throw std::invalid_argument("tube: d = 3 only");
  if (!(b > 0)) throw std::invalid_argument("tube: b must be positive");

  const double kappa = kappa_green_series(d).value;
  if (b >= kappa && b < 1.0)
    std::fprintf(stderr, "tube: warning, b >= kappa_d; conditioning is not a rare event\n");

  // minimizer orbit of the variational problem at (kappa_d, b)
  const double b_rate = std::min(b, 0.95 * kappa);
  const auto pt = solve_rate_point(ProblemParams{d, kappa, b_rate});
  if (!pt.converged || !pt.profile) throw std::runtime_error("tube: rate point failed: " + pt.message);
  const auto orbit = minimizer_orbit(*pt.profile, orbit_samples, s.seed + 1000000);
  const auto family = default_test_family();
  OrbitCollection target{{orbit}};

  WalkParams p{d, n, eps, s.seed};
  const auto cond = conditioned_sample(p, b, budget, want, s.workers);

  json rep;
  rep["b"] = b;
  rep["kappa"] = kappa;
  rep["I"] = pt.I;
  rep["attempts"] = cond.attempts;
  rep["accepted"] = cond.accepted.size();
  rep["acceptance_rate"] = cond.acceptance_rate;
  rep["wilson"] = {cond.wilson_lo, cond.wilson_hi};

  if (cond.exhausted) {
    rep["verdict"] = "inconclusive";
    write_json(s.out / "distances.json", rep);
    std::ofstream(s.out / "tube.csv") << "sample,conditioned,distance,mc_stderr\n";
    return 3;
  }

  // paired unconditioned sample, disjoint streams
  const std::size_t m = cond.accepted.size();
  std::vector<WalkRecord> uncond(m);
  WalkParams pu = p;
  pu.seed = s.seed + 2000000;
  parallel_for(0, m, s.workers, [&](std::size_t i) { uncond[i] = simulate(pu, i); });

  auto distance_to_target = [&](const WalkRecord& r) {
    auto [site, pair] = skeleton_measures(r);
    (void)pair;
    OrbitCollection col{{OrbitComponent{std::move(site), 1.0}}};
    return metric_d(col, target, family, s.workers);
  };

  std::ofstream csv(s.out / "tube.csv");
  csv << "sample,conditioned,distance,mc_stderr\n";
  std::vector<double> dc(m), du(m);
  for (std::size_t i = 0; i < m; ++i) {
    const auto rc = distance_to_target(cond.accepted[i]);
    const auto ru = distance_to_target(uncond[i]);
    dc[i] = rc.value;
    du[i] = ru.value;
    csv << i << ",1," << fmt17(rc.value) << ',' << fmt17(rc.mc_stderr) << '\n';
    csv << i << ",0," << fmt17(ru.value) << ',' << fmt17(ru.mc_stderr) << '\n';
  }
  csv.close();

  // Mann-Whitney rank sum, normal approximation, one-sided (cond < uncond)
  std::vector<std::pair<double, int>> all;
  for (double v : dc) all.emplace_back(v, 1);
  for (double v : du) all.emplace_back(v, 0);
  std::sort(all.begin(), all.end());
  double rank_sum = 0;
  for (std::size_t i = 0; i < all.size(); ++i)
    if (all[i].second == 1) rank_sum += double(i + 1);
  const double nn = double(m);
  const double u_stat = rank_sum - nn * (nn + 1) / 2;
  const double mu_u = nn * nn / 2;
  const double sd_u = std::sqrt(nn * nn * (2 * nn + 1) / 12.0);
  const double z = (u_stat - mu_u) / sd_u;
  const double p_value = 0.5 * std::erfc(-z * M_SQRT1_2);  // P(Z <= z): small when cond ranks low

  double mean_c = 0, mean_u = 0;
  for (double v : dc) mean_c += v;
  for (double v : du) mean_u += v;
  mean_c /= nn;
  mean_u /= nn;

  rep["mean_conditioned"] = mean_c;
  rep["mean_unconditioned"] = mean_u;
  rep["rank_sum_z"] = z;
  rep["p_one_sided"] = p_value;
  rep["verdict"] = (mean_c < mean_u && p_value < 0.05) ? "directional_pass" : "directional_fail";
  write_json(s.out / "distances.json", rep);
  return 0;
}

int cmd_mv_demo(const Settings& s) {
  const auto samples = std::size_t(s.integer("samples", 6000));
  const double n_small = s.num("n_small", 5.0);
  const double n_large = s.num("n_large", 50.0);
  if (samples < 10) throw std::invalid_argument("mv-demo: samples too small");

  const auto family = default_test_family();
  const auto lim1 = sample_mixture_1d({{0.0, 1.0, 0.5}}, samples, s.seed + 21);
  const auto lim2 = sample_mixture_1d({{0.0, 2.0, 1.0 / 3}}, samples, s.seed + 22);
  OrbitCollection xi{{lim1, lim2}};

  std::ofstream csv(s.out / "mv_demo.csv");
  csv << "n,distance,mc_stderr\n";
  json rep = json::array();
  double d_small = 0, d_large = 0;
  for (double nv : {n_small, n_large}) {
    const auto mun = sample_mixture_1d(
        {{nv, 1.0, 0.5}, {-nv, 2.0, 1.0 / 3}, {0.0, nv, 1.0 / 6}}, samples, s.seed + 31);
    OrbitCollection col{{mun}};
    const auto r = metric_d(col, xi, family, s.workers);
    csv << fmt17(nv) << ',' << fmt17(r.value) << ',' << fmt17(r.mc_stderr) << '\n';
    rep.push_back({{"n", nv}, {"distance", r.value}, {"mc_stderr", r.mc_stderr}});
    (nv == n_small ? d_small : d_large) = r.value;
  }
  csv.close();
  json top;
  top["points"] = rep;
  top["ratio"] = d_small / d_large;
  write_json(s.out / "mv_demo.json", top);
  return 0;
}

int cmd_verify(const Settings& s) {
  const double kappa = s.num("kappa", 1.0);
  if (!(kappa > 0)) throw std::invalid_argument("verify: kappa must be positive");
  const int d = int(s.integer("d", 3));
  if (d != 3) throw std::invalid_argument("verify: d = 3 only");

  json checks = json::array();
  bool all_ok = true;
  auto record = [&](const std::string& name, bool ok, json detail) {
    detail["name"] = name;
    detail["pass"] = ok;
    checks.push_back(detail);
    if (!ok) all_ok = false;
  };

  {  // heat kernel normalization, radial quadrature
    double worst = 0;
    for (double t : {0.05, 0.3, 1.0}) {
      Grid1D g = Grid1D::graded(0.0, 12 * std::sqrt(t), 0.002 * std::sqrt(t));
      double total = 0;
      for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        const double r = g.nodes[i];
        total += g.weights[i] * std::pow(2 * M_PI * t, -1.5) * std::exp(-0.5 * r * r / t) * r * r;
      }
      total *= sphere_surface(3);
      worst = std::max(worst, std::fabs(total - 1.0));
    }
    record("heat_kernel_normalization", worst <= s.tol.at("heat_norm"), {{"max_error", worst}});
  }
  {  // bridge normalization on sampled triples
    Philox rng(s.seed, 0);
    double worst = 0;
    for (int trial = 0; trial < 5; ++trial) {
      std::vector<double> x(3), y(3);
      for (int k = 0; k < 3; ++k) {
        x[k] = rng.next_gaussian() * 0.5;
        y[k] = x[k] + 0.2 + 0.6 * rng.next_double();
      }
      const double eps = 0.08 + 0.5 * rng.next_double();
      worst = std::max(worst, std::fabs(bridge_normalization(x, y, eps, 3) - 1.0));
    }
    record("bridge_normalization", worst <= s.tol.at("bridge_norm"), {{"max_error", worst}});
  }
  {  // scaling lemma on the unit Gaussian
    const auto g = DensityField::gaussian_mixture({GaussianComponent{{0, 0, 0}, 1.0, 1.0}}, 3);
    double prev = std::numeric_limits<double>::infinity();
    bool mono = true;
    double first = 0, last = 0;
    for (int e = -6; e <= 6; ++e) {
      const double v = gamma_of(g.rescaled(std::pow(2.0, e)), kappa);
      if (v > prev + 1e-9) mono = false;
      if (e == -6) first = v;
      last = v;
      prev = v;
    }
    const bool ok = mono && std::fabs(first - kappa) <= s.tol.at("scaling_endpoint") * kappa &&
                    last <= s.tol.at("scaling_endpoint") * kappa;
    record("scaling_lemma", ok, {{"gamma_small_a", first}, {"gamma_large_a", last}, {"monotone", mono}});
  }
  {  // binomial LD bound grid
    bool ok = true;
    double worst_margin = std::numeric_limits<double>::infinity();
    for (std::size_t M : {20, 50, 100})
      for (double e0 : {0.1, 0.2, 0.4})
        for (double C : {1.5, 4.0, 10.0}) {
          const auto r = binomial_ld_check(M, e0, C);
          ok = ok && r.exact <= r.bound;
          worst_margin = std::min(worst_margin, r.bound - r.exact);
        }
    record("binomial_ld_bound", ok, {{"worst_margin", worst_margin}});
  }
  {  // LLT scaled-error trend
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int m = 0;
    std::vector<double> ys;
    for (int n = 10; n <= 30; ++n) {
      const auto e = llt_error(n, 3);
      if (!e.parity_ok) {
        record("llt_parity", false, {});
        break;
      }
      sx += n;
      sy += e.scaled;
      sxx += double(n) * n;
      sxy += double(n) * e.scaled;
      ys.push_back(e.scaled);
      ++m;
    }
    const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    const double inter = (sy - slope * sx) / m;
    double ss = 0;
    for (int i = 0; i < m; ++i) {
      const double r = ys[i] - (inter + slope * (10 + i));
      ss += r * r;
    }
    const double se = std::sqrt(ss / (m - 2) / (sxx - sx * sx / m));
    const bool ok = slope - s.tol.at("llt_slope_sigmas") * se <= 0;
    record("llt_decay", ok, {{"slope", slope}, {"slope_se", se}});
  }
  {  // Pohozaev + Serrin-Tang on a short b grid
    bool ok = true;
    double worst = 0;
    std::vector<double> bs = {0.2 * kappa, 0.5 * kappa, 0.8 * kappa};
    const auto pts = rate_curve(d, kappa, bs, {}, s.workers);
    for (const auto& pt : pts) {
      if (!pt.converged) {
        ok = false;
        continue;
      }
      const double lhs = pt.mult.lambda + pt.mult.mu * pt.b;
      const double rhs = 2.0 * (1.0 - 2.0 / d) * pt.I;
      const double rel = std::fabs(lhs - rhs) / std::fabs(rhs);
      worst = std::max(worst, rel);
      if (rel > s.tol.at("pohozaev_rel")) ok = false;
      const auto st = serrin_tang_report(pt.mult, ProblemParams{d, kappa, pt.b});
      if (!st.pass) ok = false;
    }
    record("pohozaev_serrin_tang", ok, {{"worst_rel", worst}});
  }
  {  // kappa_d cross-method
    const auto gs = kappa_green_series(3);
    const auto mc = kappa_monte_carlo(3, 100000, 20000, s.seed + 5, s.workers);
    const bool ok =
        std::fabs(gs.value - mc.value) <= s.tol.at("kappa_sigmas") * (gs.std_error + mc.std_error);
    record("kappa_cross_method", ok,
           {{"green_series", gs.value}, {"monte_carlo", mc.value}, {"mc_error", mc.std_error}});
  }

  json top;
  top["checks"] = checks;
  top["all_pass"] = all_ok;
  write_json(s.out / "verify.json", top);
  return all_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Swiss-cheese large deviation laboratory"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out";
  std::uint64_t seed = 1;
  int workers = 1;
  std::vector<std::string> tol_overrides;
  app.add_option("--config", config_path, "key=value config file");
  app.add_option("--seed", seed, "global RNG seed");
  app.add_option("--workers", workers, "worker thread count");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--tol-override", tol_overrides, "tolerance override KEY=VAL");

  auto* c_rate = app.add_subcommand("rate-curve", "variational rate function sweep");
  auto* c_walk = app.add_subcommand("walk-stats", "range statistics and escape probability");
  auto* c_tube = app.add_subcommand("tube", "conditioned-walk distance-to-minimizer experiment");
  auto* c_demo = app.add_subcommand("mv-demo", "metric convergence demo on Gaussian mixtures");
  auto* c_verify = app.add_subcommand("verify", "identity suites");
  for (auto* sub : {c_rate, c_walk, c_tube, c_demo, c_verify}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  Settings s;
  s.tol = default_tolerances();
  try {
    if (!config_path.empty()) parse_config_file(config_path, s.kv);
    // flags win over config
    if (app.count("--seed")) s.kv["seed"] = std::to_string(seed);
    if (app.count("--workers")) s.kv["workers"] = std::to_string(workers);
    if (app.count("--out")) s.kv["out"] = out_dir;
    if (!s.kv.count("out")) s.kv["out"] = out_dir;
    s.seed = std::uint64_t(s.integer("seed", 1));
    s.workers = int(s.integer("workers", 1));
    s.out = s.kv.at("out");
    if (s.workers < 1) throw std::invalid_argument("config: workers must be >= 1");
    for (const auto& [k, v] : s.kv)
      if (k.rfind("tol_", 0) == 0) s.tol[k.substr(4)] = std::stod(v);
    for (const auto& ov : tol_overrides) {
      const auto eq = ov.find('=');
      if (eq == std::string::npos) throw std::invalid_argument("bad --tol-override: " + ov);
      s.tol[ov.substr(0, eq)] = std::stod(ov.substr(eq + 1));
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  }

  Manifest man;
  man.dir = s.out;
  int rc = 2;
  std::string cmd_name;
  try {
    if (c_rate->parsed()) cmd_name = "rate-curve";
    if (c_walk->parsed()) cmd_name = "walk-stats";
    if (c_tube->parsed()) cmd_name = "tube";
    if (c_demo->parsed()) cmd_name = "mv-demo";
    if (c_verify->parsed()) cmd_name = "verify";
    man.start(cmd_name, s);
    if (c_rate->parsed()) rc = cmd_rate_curve(s);
    if (c_walk->parsed()) rc = cmd_walk_stats(s);
    if (c_tube->parsed()) rc = cmd_tube(s);
    if (c_demo->parsed()) rc = cmd_mv_demo(s);
    if (c_verify->parsed()) rc = cmd_verify(s);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    man.finish(false);
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    man.finish(false);
    return 1;
  }
  man.finish(rc == 0 || rc == 3);
  return rc;
}
