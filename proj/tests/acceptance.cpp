// Acceptance suite: one pass/fail line per criterion, exit code = number of
// failures. Criteria 11-13 drive the installed CLI binary end to end.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "oracles.hpp"
#include "rangeld/functionals.hpp"
#include "rangeld/mv_topology.hpp"
#include "rangeld/rate_function.hpp"
#include "rangeld/walk_sim.hpp"

using namespace rangeld;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int idx, const std::string& name, bool ok, const std::string& detail) {
  std::printf("criterion %2d (%s): %s  [%s]\n", idx, name.c_str(), ok ? "PASS" : "FAIL",
              detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(CLI_BIN) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return rc == -1 ? -1 : WEXITSTATUS(rc);
}

fs::path fresh_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() / ("rangeld_acc_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

int main() {
  // ---- 1: escape probability vs the Watson-integral oracle --------------
  {
    const auto gs = kappa_green_series(3);
    const double watson = 1.0 / oracle::watson_green();
    const double rel = std::fabs(gs.value - watson) / watson;
    const auto mc = kappa_monte_carlo(3, 100000, 20000, 11, 1);
    const double gap = std::fabs(mc.value - gs.value);
    const bool ok = rel <= 1e-3 && gap <= 3 * (mc.std_error + gs.std_error);
    report(1, "escape probability",
           ok, "series=" + fmt(gs.value) + " watson=" + fmt(watson) + " mc=" + fmt(mc.value) +
               "+-" + fmt(mc.std_error));
  }

  // ---- 2: range law of large numbers, d=3, n=1e6, 100 seeds -------------
  {
    WalkParams p;
    p.d = 3;
    p.n = 1000000;
    p.eps = 0.5;
    p.seed = 2026;
    const int W = 100;
    double s1 = 0, s2 = 0;
    for (int w = 0; w < W; ++w) {
      const double v = double(simulate(p, w).range) / double(p.steps());
      s1 += v;
      s2 += v * v;
    }
    const double mean = s1 / W;
    const double se = std::sqrt((s2 / W - mean * mean) / W);
    const double kappa = kappa_green_series(3).value;
    // E R_n / n sits above kappa by a positive finite-n bias; the Green-tail
    // bound caps it rigorously, so the acceptance window is
    // kappa < mean <= kappa + bias + 3 se
    const double bias = range_bias_bound(3, p.steps());
    const bool ok = mean > kappa && mean - kappa <= bias + 3 * se;
    report(2, "range LLN", ok,
           "mean=" + fmt(mean) + " kappa=" + fmt(kappa) + " bias_bound=" + fmt(bias) +
               " se=" + fmt(se));
  }

  // ---- 3-5: identity sweep on a 10-point b grid --------------------------
  {
    std::vector<double> bs;
    for (int i = 0; i < 10; ++i) bs.push_back(0.14 + (0.86 - 0.14) * i / 9.0);
    const auto pts = rate_curve(3, 1.0, bs, {}, 1);

    bool conv = true;
    double poh_worst = 0;
    for (const auto& pt : pts) {
      if (!pt.converged) {
        conv = false;
        continue;
      }
      const double lhs = pt.mult.lambda + pt.mult.mu * pt.b;
      const double rhs = 2.0 * (1.0 - 2.0 / 3.0) * pt.I;
      poh_worst = std::max(poh_worst, std::fabs(lhs - rhs) / std::fabs(rhs));
    }
    report(3, "Pohozaev identity", conv && poh_worst <= 1e-3, "worst_rel=" + fmt(poh_worst));

    std::vector<double> Is;
    for (const auto& pt : pts) Is.push_back(pt.I);
    double mu_worst = 0;
    for (std::size_t i = 1; i + 1 < pts.size(); ++i) {
      const double dI = grid_derivative(bs, Is, i);
      mu_worst = std::max(mu_worst, std::fabs(pts[i].mult.mu - 2 * dI) / std::fabs(pts[i].mult.mu));
    }
    report(4, "multiplier derivative", conv && mu_worst <= 0.05, "worst_rel=" + fmt(mu_worst));

    bool st_ok = conv;
    for (const auto& pt : pts) {
      if (!pt.converged) continue;
      const auto st = serrin_tang_report(pt.mult, ProblemParams{3, 1.0, pt.b});
      if (!(st.pass && st.psi0 < 0 && pt.mult.lambda > 0 && st.g_max_increase <= 1e-8 &&
            st.xi_min >= -1e-12))
        st_ok = false;
    }
    report(5, "Serrin-Tang hypotheses", st_ok, "grid points=" + std::to_string(pts.size()));
  }

  // ---- 6: kappa-scaling collapse ------------------------------------------
  {
    double worst = 0;
    bool conv = true;
    for (double u : {0.3, 0.5, 0.7}) {
      const auto a = solve_rate_point(ProblemParams{3, 1.0, u});
      const auto b = solve_rate_point(ProblemParams{3, 0.6595, 0.6595 * u});
      if (!a.converged || !b.converged) {
        conv = false;
        continue;
      }
      const double c1 = a.I;
      const double c2 = std::pow(0.6595, 2.0 / 3.0) * b.I;
      worst = std::max(worst, std::fabs(c1 - c2) / c1);
    }
    report(6, "kappa-scaling collapse", conv && worst <= 0.01, "worst_rel=" + fmt(worst));
  }

  // ---- 7: bridge normalization --------------------------------------------
  {
    Philox rng(7, 0);
    double worst = 0;
    for (int trial = 0; trial < 5; ++trial) {
      std::vector<double> x(3), y(3);
      for (int k = 0; k < 3; ++k) {
        x[k] = 0.5 * rng.next_gaussian();
        y[k] = x[k] + 0.2 + 0.6 * rng.next_double();
      }
      const double eps = 0.08 + 0.5 * rng.next_double();
      worst = std::max(worst, std::fabs(bridge_normalization(x, y, eps, 3) - 1.0));
    }
    report(7, "bridge normalization", worst <= 1e-4, "worst_abs=" + fmt(worst));
  }

  // ---- 8: scaling lemma on the unit Gaussian -------------------------------
  {
    const double kappa = 1.0;
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
    const bool ok = mono && std::fabs(first - kappa) <= 0.01 * kappa && last <= 0.01 * kappa;
    report(8, "scaling lemma", ok,
           "gamma(a=2^-6)=" + fmt(first) + " gamma(a=2^6)=" + fmt(last));
  }

  // ---- 9: binomial large-deviation bound (hard inequality) ----------------
  {
    bool ok = true;
    double margin = std::numeric_limits<double>::infinity();
    for (std::size_t M : {20, 50, 100})
      for (double e0 : {0.1, 0.2, 0.4})
        for (double C : {1.5, 4.0, 10.0}) {
          const auto r = binomial_ld_check(M, e0, C);
          if (r.exact > r.bound) ok = false;
          margin = std::min(margin, r.bound - r.exact);
        }
    report(9, "binomial LD bound", ok, "worst_margin=" + fmt(margin));
  }

  // ---- 10: local CLT scaled error has no increasing trend ------------------
  {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::vector<double> ys;
    bool parity = true;
    for (int n = 10; n <= 30; ++n) {
      const auto e = llt_error(n, 3);
      parity = parity && e.parity_ok;
      sx += n;
      sy += e.scaled;
      sxx += double(n) * n;
      sxy += double(n) * e.scaled;
      ys.push_back(e.scaled);
    }
    const int m = int(ys.size());
    const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    const double inter = (sy - slope * sx) / m;
    double ss = 0;
    for (int i = 0; i < m; ++i) {
      const double r = ys[i] - (inter + slope * (10 + i));
      ss += r * r;
    }
    const double se = std::sqrt(ss / (m - 2) / (sxx - sx * sx / m));
    const bool ok = parity && slope - 2 * se <= 0;
    report(10, "local CLT trend", ok, "slope=" + fmt(slope) + " se=" + fmt(se));
  }

  // ---- 11: MV-topology demo through the CLI --------------------------------
  {
    const fs::path dir = fresh_dir("demo");
    const int rc = run_cli("mv-demo --out " + dir.string() + " --seed 1");
    bool ok = rc == 0 && fs::exists(dir / "mv_demo.json");
    double ratio = 0;
    std::string bands;
    if (ok) {
      const json rep = json::parse(slurp(dir / "mv_demo.json"));
      ratio = rep.at("ratio").get<double>();
      for (const auto& pt : rep.at("points"))
        bands += " d(n=" + fmt(pt.at("n").get<double>()) + ")=" +
                 fmt(pt.at("distance").get<double>()) + "+-" +
                 fmt(pt.at("mc_stderr").get<double>());
      ok = ratio >= 3.0;
    }
    report(11, "MV demo contraction", ok, "ratio=" + fmt(ratio) + bands);
  }

  // ---- 12: tube proxy through the CLI --------------------------------------
  {
    const fs::path dir = fresh_dir("tube");
    const int rc = run_cli("tube --out " + dir.string() + " --seed 1");
    bool ok = rc == 0 && fs::exists(dir / "distances.json");
    std::string detail = "exit=" + std::to_string(rc);
    if (ok) {
      const json rep = json::parse(slurp(dir / "distances.json"));
      const double p = rep.at("p_one_sided").get<double>();
      const double acc = rep.at("acceptance_rate").get<double>();
      const auto m = rep.at("accepted").get<std::size_t>();
      const std::string verdict = rep.at("verdict").get<std::string>();
      ok = verdict == "directional_pass" && p < 0.05 && acc >= 1e-4 && m >= 30;
      detail = "p=" + fmt(p) + " acceptance=" + fmt(acc) + " accepted=" + std::to_string(m) +
               " verdict=" + verdict;
    }
    report(12, "tube proxy", ok, detail);
  }

  // ---- 13: CLI determinism across worker counts -----------------------------
  {
    bool ok = true;
    std::string detail;
    struct Job {
      std::string name, args, csv;
      std::string cfg;
    };
    const std::vector<Job> jobs = {
        {"rate-curve", "rate-curve", "rate_curve.csv", "b_min=0.4\nb_max=0.6\nb_count=2\n"},
        {"walk-stats", "walk-stats", "walks.csv",
         "n=20000\nseeds=30\nmc_walks=20000\nmc_cutoff=5000\n"},
        {"mv-demo", "mv-demo", "mv_demo.csv", "samples=1500\n"},
    };
    int tag = 0;
    for (const auto& job : jobs) {
      const fs::path d1 = fresh_dir("det" + std::to_string(tag++));
      const fs::path d4 = fresh_dir("det" + std::to_string(tag++));
      for (const fs::path* d : {&d1, &d4}) std::ofstream(*d / "cfg") << job.cfg;
      const int r1 = run_cli(job.args + " --config " + (d1 / "cfg").string() + " --out " +
                             d1.string() + " --seed 5 --workers 1");
      const int r4 = run_cli(job.args + " --config " + (d4 / "cfg").string() + " --out " +
                             d4.string() + " --seed 5 --workers 4");
      const bool same = r1 == r4 && slurp(d1 / job.csv) == slurp(d4 / job.csv) &&
                        !slurp(d1 / job.csv).empty();
      if (!same) ok = false;
      detail += job.name + (same ? "=identical " : "=DIFFERS ");
    }
    report(13, "determinism", ok, detail);
  }

  if (g_failures == 0) std::printf("all 13 criteria passed\n");
  return g_failures;
}
