// One PASS/FAIL line per acceptance criterion. Oracles are computed here,
// independently of the library code paths they check.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "orthopolicy/commands.hpp"
#include "orthopolicy/nuisance.hpp"
#include "orthopolicy/parallel.hpp"
#include "orthopolicy/policy.hpp"
#include "orthopolicy/scores.hpp"
#include "orthopolicy/simlab.hpp"
#include "orthopolicy/ustat.hpp"

using namespace orthopolicy;

namespace {

int failures = 0;

void verdict(int id, bool ok, double seconds, double limit, const std::string& detail) {
  const bool in_time = limit <= 0.0 || seconds < limit;
  const bool pass = ok && in_time;
  if (!pass) ++failures;
  std::printf("%s [%d] %s (%.1fs%s)\n", pass ? "PASS" : "FAIL", id, detail.c_str(), seconds,
              in_time ? "" : ", over time limit");
  std::fflush(stdout);
}

template <class F>
double timed(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double rel(double a, double b) { return std::abs(a - b) / std::max({1e-300, std::abs(a), std::abs(b)}); }

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

// ---------------------------------------------------------------------------
// True nuisances of a DgpSpec, written out from its documented law.

double true_gamma(const DgpSpec& s, int d, const double* x) {
  double g = s.outcome_intercept;
  for (std::size_t k = 0; k < s.outcome_coefs.size(); ++k) g += s.outcome_coefs[k] * x[k];
  if (d == 1) {
    const double f = x[s.effect_feature];
    g += s.effect_base + s.effect_slope * f + (f > s.jump_at ? s.effect_jump : 0.0);
  }
  return g;
}
double true_e(const DgpSpec& s, const double* x) { return s.propensity_base + s.propensity_slope * x[s.propensity_feature]; }
double true_x1_mean(const DgpSpec& s, const double* x) {
  return s.parental_intercept + s.parental_gamma0 * true_gamma(s, 0, x) + s.parental_coef * x[s.parental_feature];
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// E|N(m, v)|
double abs_normal_mean(double m, double v) {
  if (v <= 0.0) return std::abs(m);
  const double sd = std::sqrt(v);
  return sd * std::sqrt(2.0 / M_PI) * std::exp(-m * m / (2.0 * v)) + m * (1.0 - 2.0 * normal_cdf(-m / sd));
}

// E[min(Y_i(a), Y_j(b)) | x_i, x_j] with independent N(0, sd^2) noise.
double gini_phi(const DgpSpec& s, int a, int b, const double* xi, const double* xj) {
  const double ma = true_gamma(s, a, xi), mb = true_gamma(s, b, xj);
  return 0.5 * (ma + mb - abs_normal_mean(ma - mb, 2.0 * s.noise_sd * s.noise_sd));
}

double sign_mean(double delta, double sd_each) {
  if (sd_each <= 0.0) return static_cast<double>((delta > 0) - (delta < 0));
  return std::erf(delta / (2.0 * sd_each));
}

// E[sgn(X1_i - X1_j) sgn(Y_i(a) - Y_j(b)) | x_i, x_j]; the two noises are independent.
double kendall_phi(const DgpSpec& s, int a, int b, const double* xi, const double* xj) {
  return sign_mean(true_x1_mean(s, xi) - true_x1_mean(s, xj), s.parental_sd) *
         sign_mean(true_gamma(s, a, xi) - true_gamma(s, b, xj), s.noise_sd);
}

NuisanceFits truth_fits(const DgpSpec& s, const Dataset& data, Family family) {
  const std::size_t n = data.n();
  const Eigen::MatrixXd xr = data.covariates();
  std::vector<std::array<double, 8>> rows(n);
  std::vector<double> g0(n), g1(n), e(n);
  for (std::size_t i = 0; i < n; ++i) {
    double x[8] = {};
    for (Eigen::Index k = 0; k < xr.cols(); ++k) x[k] = xr(static_cast<Eigen::Index>(i), k);
    std::copy(x, x + 8, rows[i].begin());
    g0[i] = true_gamma(s, 0, x);
    g1[i] = true_gamma(s, 1, x);
    e[i] = true_e(s, x);
  }
  std::shared_ptr<const PhiSource> phi;
  if (family == Family::Gini)
    phi = std::make_shared<FunctionPhi>(n, [rows, s](int a, int b, std::size_t i, std::size_t j) {
      return gini_phi(s, a, b, rows[i].data(), rows[j].data());
    });
  if (family == Family::KendallTau)
    phi = std::make_shared<FunctionPhi>(n, [rows, s](int a, int b, std::size_t i, std::size_t j) {
      return kendall_phi(s, a, b, rows[i].data(), rows[j].data());
    });
  return NuisanceFits::known(g0, g1, e, phi, 0.0);
}

// ---------------------------------------------------------------------------

void criterion1() {
  bool ok = true;
  double worst = 0.0;
  const double secs = timed([&] {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 5.0);
    for (std::size_t n = 2; n <= 6; ++n) {
      std::vector<double> y(n), w(n);
      for (auto& v : y) v = u(rng);
      for (auto& v : w) v = u(rng);
      const std::vector<PairKernel> kernels{
          {[&](std::size_t i, std::size_t j) { return std::min(y[i], y[j]); }, true},
          {[&](std::size_t i, std::size_t j) { return std::abs(y[i] - y[j]) * (w[i] + w[j]); }, true},
          {[&](std::size_t i, std::size_t j) { return sgn(y[i] - y[j]) * sgn(w[i] - w[j]) + y[i] * y[j]; }, true}};
      for (const auto& k : kernels) {
        const double perms = std::tgamma(static_cast<double>(n) + 1.0);
        const double h = hoeffding_estimate(n, k, static_cast<std::size_t>(perms), 1);
        // brute-force U-statistic
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = i + 1; j < n; ++j) sum += k.eval(i, j);
        const double u_brute = sum / (static_cast<double>(n * (n - 1)) / 2.0);
        worst = std::max({worst, rel(h, u_brute), rel(u_statistic(n, k), u_brute)});
      }
    }
    ok = worst <= 1e-12;
  });
  verdict(1, ok, secs, 1.0, fmt("hoeffding average equals U-statistic, n<=6, 3 kernels, max rel diff %.2e", worst));
}

void criterion2() {
  bool ok = true;
  double worst_gini = 0.0, worst_scale = 0.0;
  long kendall_mismatch = 0, transform_mismatch = 0;
  const double secs = timed([&] {
    std::mt19937_64 rng(21);
    std::uniform_int_distribution<int> size(2, 200);
    std::lognormal_distribution<double> ln(0.0, 1.0);
    std::uniform_int_distribution<int> coarse(0, 9);
    for (int rep = 0; rep < 100; ++rep) {
      const std::size_t n = static_cast<std::size_t>(size(rng));
      std::vector<double> y(n), x(n);
      for (std::size_t i = 0; i < n; ++i) {
        y[i] = rep % 3 == 0 ? static_cast<double>(coarse(rng)) + 1.0 : ln(rng);
        x[i] = rep % 4 == 0 ? static_cast<double>(coarse(rng)) : ln(rng);
      }
      double num = 0.0, den = 0.0;
      std::int64_t s = 0;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
          num += std::abs(y[i] - y[j]);
          den += y[i] + y[j];
          s += static_cast<std::int64_t>(sgn(y[i] - y[j]) * sgn(x[i] - x[j]));
        }
      const double g = gini_index(y);
      worst_gini = std::max(worst_gini, rel(g, num / den));
      kendall_mismatch += kendall_sign_sum(y, x) != s;
      const double tau = kendall_tau(y, x);
      kendall_mismatch += std::abs(tau - static_cast<double>(s) / (static_cast<double>(n * (n - 1)) / 2.0)) > 0.0;

      std::vector<double> scaled(n), ty(n), tx(n);
      for (std::size_t i = 0; i < n; ++i) {
        scaled[i] = 3.7 * y[i];
        ty[i] = std::log(y[i]) * 2.0 + 1.0;
        tx[i] = std::exp(x[i]);
      }
      worst_scale = std::max(worst_scale, rel(gini_index(scaled), g));
      transform_mismatch += kendall_tau(ty, tx) != tau;
    }
    ok = worst_gini <= 1e-12 && worst_scale <= 1e-12 && kendall_mismatch == 0 && transform_mismatch == 0;
  });
  verdict(2, ok, secs, 10.0,
          fmt("gini vs pairs rel %.1e, scale invariance rel %.1e, kendall mismatches %.0f", worst_gini, worst_scale,
              static_cast<double>(kendall_mismatch + transform_mismatch)));
}

void criterion3() {
  long identity_fail = 0, d_fail = 0, pi_fail = 0;
  const double secs = timed([&] {
    // dyadic values make every operation in the identity exact
    std::mt19937_64 rng(31);
    std::uniform_int_distribution<std::int64_t> u(-(1 << 20), 1 << 20);
    const double scale = std::ldexp(1.0, -12);
    std::vector<double> ya(100000), yb(100000);
    for (std::size_t k = 0; k < ya.size(); ++k) {
      ya[k] = static_cast<double>(u(rng)) * scale;
      yb[k] = static_cast<double>(u(rng)) * scale;
    }
    std::vector<double> y(ya);
    y.insert(y.end(), yb.begin(), yb.end());
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(y.size()), 1);
    std::vector<std::uint8_t> d(y.size(), 0);
    d[0] = 1;
    const Dataset pairs_data(y, d, x, {"x"});
    const auto kernel = observed_kernel(pairs_data, Family::Gini);
    for (std::size_t k = 0; k < ya.size(); ++k) {
      const double a = ya[k], b = yb[k];
      const double lhs = 0.5 * (a + b - std::abs(a - b));
      identity_fail += lhs != std::min(a, b) || kernel(k, k + ya.size()) != lhs;
    }

    // D^{ab} and pi_ab partitions on a 500-unit draw
    const auto sample = draw_sample(DgpSpec::preset("reference"), 500, 32);
    const auto& data = sample.data;
    const std::size_t n = data.n();
    const auto dv = data.treatment();
    // Y = 1 makes the IPW pair score D^{ab} / (p_a(i) p_b(j)), so p-weighted sums recover D^{ab}.
    const Dataset ones(std::vector<double>(n, 1.0), {dv.begin(), dv.end()}, data.covariates(), data.covariate_names());
    std::vector<double> e(n);
    for (std::size_t i = 0; i < n; ++i) e[i] = sample.propensity[i];
    const auto fits = NuisanceFits::known(std::vector<double>(n, 1.0), std::vector<double>(n, 1.0), e, nullptr, 0.0);
    const auto ipw = pair_scores_gini(ones, fits, Identification::IPW);
    std::mt19937_64 prng(33);
    std::uniform_real_distribution<double> pu(0.0, 1.0);
    std::vector<double> pi(n);
    for (auto& v : pi) v = pu(prng);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        double dsum = 0.0, direct = 0.0, pisum = 0.0;
        for (int a = 0; a < 2; ++a)
          for (int b = 0; b < 2; ++b) {
            const double pa = a ? e[i] : 1.0 - e[i];
            const double pb = b ? e[j] : 1.0 - e[j];
            dsum += pa * pb * ipw.at(a, b, i, j);
            direct += static_cast<double>(dv[i] == a) * static_cast<double>(dv[j] == b);
            pisum += (a ? pi[i] : 1.0 - pi[i]) * (b ? pi[j] : 1.0 - pi[j]);
          }
        d_fail += direct != 1.0 || std::abs(dsum - 1.0) > 1e-12;
        pi_fail += std::abs(pisum - 1.0) > 1e-15;
      }
  });
  verdict(3, identity_fail == 0 && d_fail == 0 && pi_fail == 0, secs, 0.0,
          fmt("min identity failures %.0f of 1e5, D-partition failures %.0f, pi-partition failures %.0f",
              static_cast<double>(identity_fail), static_cast<double>(d_fail), static_cast<double>(pi_fail)));
}

void criterion4() {
  long checks = 0, fails = 0;
  double worst = 0.0;
  std::string bad;
  const double secs = timed([&] {
    const Split root{0, 0, 0.7};
    const std::vector<PolicyTree> policies{PolicyTree::constant(true), PolicyTree::constant(false),
                                           PolicyTree::stump(root, {1, 0})};
    for (Family f : {Family::Additive, Family::AtkinsonIop, Family::Gini, Family::IopGini, Family::KendallTau}) {
      // the reference law has negative outcomes, which the Atkinson utility cannot take
      const auto law = DgpSpec::preset(f == Family::AtkinsonIop ? "positive" : "reference");
      for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto sample = draw_sample(law, 2000, 400 + seed);
        const auto fits = truth_fits(law, sample.data, f);
        WelfareSpec spec;
        spec.family = f;
        std::array<ScoreSet, 3> scores{ScoreSet(LinearScoreSet{}), ScoreSet(LinearScoreSet{}), ScoreSet(LinearScoreSet{})};
        const Identification ids[3] = {Identification::DM, Identification::IPW, Identification::DR};
        for (int k = 0; k < 3; ++k) {
          spec.identification = ids[k];
          scores[static_cast<std::size_t>(k)] = build_scores(sample.data, fits, spec);
        }
        for (const auto& p : policies) {
          const auto x = sample.data.covariates();
          const auto dm = estimate_welfare(scores[0], p, x, spec);
          for (int k = 1; k < 3; ++k) {
            const auto other = estimate_welfare(scores[static_cast<std::size_t>(k)], p, x, spec);
            const double combined = std::sqrt(dm.se * dm.se + other.se * other.se);
            const double z = std::abs(dm.value - other.value) / std::max(combined, 1e-300);
            worst = std::max(worst, z);
            ++checks;
            if (!(z < 3.0)) {
              ++fails;
              bad += " " + to_string(f) + "/" + to_string(ids[k]) + "/seed" + std::to_string(seed);
            }
          }
        }
      }
    }
  });
  verdict(4, fails == 0, secs, 300.0,
          fmt("DM vs IPW and DM vs DR with true nuisances: %.0f of %.0f within 3 combined SE, max z %.2f",
              static_cast<double>(checks - fails), static_cast<double>(checks), worst) +
              bad);
}

void criterion5() {
  std::string detail;
  bool ok = true;
  const double secs = timed([&] {
    for (Family f : {Family::AtkinsonIop, Family::Gini, Family::IopGini}) {
      ProbeOptions o;
      o.welfare.family = f;
      o.target = Perturbation::Gamma;
      o.n = 1000;
      o.replications = 50;
      o.seed = 5;
      const auto law = DgpSpec::preset(f == Family::AtkinsonIop ? "positive" : "reference");
      const auto r = orthogonality_probe(law, o);
      ok = ok && r.replications.size() == 50 && r.share_smaller >= 0.9;
      detail += " " + to_string(f) + fmt(" %.2f", r.share_smaller);
    }
  });
  verdict(5, ok, secs, 600.0, "share of 50 seeds with |orthogonal slope| < |plug-in slope|:" + detail);
}

// Brute-force argmax over every tree in enumeration order with the stated tie rule.
struct Brute {
  double welfare;
  std::uint64_t index;
  PolicyTree tree;
};

Brute brute_argmax(const ThresholdGrid& grid, int depth, const Eigen::MatrixXd& x,
                   const std::function<double(const std::vector<std::uint8_t>&)>& welfare) {
  struct Entry {
    double w;
    std::size_t treated;
    std::uint64_t index;
  };
  std::vector<Entry> all;
  TreeEnumerator en(grid, depth);
  for (std::uint64_t k = 0; k < en.count(); ++k) {
    const auto t = en.at(k);
    const auto a = t.assign(x);
    all.push_back({welfare(a), static_cast<std::size_t>(std::count(a.begin(), a.end(), 1)), k});
  }
  double best = -INFINITY;
  for (const auto& e : all) best = std::max(best, e.w);
  const double tol = 1e-12 * std::max(1.0, std::abs(best));
  const Entry* pick = nullptr;
  for (const auto& e : all) {
    if (e.w < best - tol) continue;
    if (!pick || e.treated < pick->treated) pick = &e;
  }
  return {pick->w, pick->index, en.at(pick->index)};
}

void criterion6() {
  long fails = 0, cases = 0;
  double worst = 0.0;
  const double secs = timed([&] {
    const std::size_t n = 50;
    for (int rep = 0; rep < 20; ++rep) {
      std::mt19937_64 rng(600 + static_cast<std::uint64_t>(rep));
      std::uniform_real_distribution<double> u(0.0, 1.0);
      std::normal_distribution<double> z;
      Eigen::MatrixXd x(static_cast<Eigen::Index>(n), 2);
      for (Eigen::Index i = 0; i < x.rows(); ++i) x(i, 0) = u(rng), x(i, 1) = u(rng);
      const ThresholdGrid grid({0, 1}, {{0.25, 0.5, 0.75}, {0.2, 0.45, 0.8}});
      const bool pair = rep % 2 == 1;
      // coarse scores on some sets to force ties
      auto draw = [&] { return rep % 4 == 2 ? std::round(z(rng)) : z(rng); };
      std::vector<double> t(n), c(n), p(4 * n * n);
      for (std::size_t i = 0; i < n; ++i) t[i] = draw(), c[i] = draw();
      for (auto& v : p) v = draw();
      ScoreSet scores = LinearScoreSet{t, c};
      WelfareSpec spec;
      if (pair) {
        spec.family = Family::Gini;
        scores = PairScoreSet(n, [p, n](int a, int b, std::size_t i, std::span<double> out) {
          for (std::size_t j = i + 1; j < n; ++j) out[j - i - 1] = p[((2 * a + b) * n + i) * n + j];
        });
      }
      auto welfare = [&](const std::vector<std::uint8_t>& a) {
        double s = 0.0;
        if (!pair) {
          for (std::size_t i = 0; i < n; ++i) s += a[i] ? t[i] : c[i];
          return s / static_cast<double>(n);
        }
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = i + 1; j < n; ++j) s += p[((2 * a[i] + a[j]) * n + i) * n + j];
        return s / (static_cast<double>(n * (n - 1)) / 2.0);
      };
      for (int depth = 0; depth <= 2; ++depth) {
        const auto want = brute_argmax(grid, depth, x, welfare);
        const auto got = optimize_policy(scores, spec, grid, x, depth);
        const double d = std::abs(got.welfare - want.welfare) / std::max(1.0, std::abs(want.welfare));
        worst = std::max(worst, d);
        ++cases;
        fails += d > 1e-12 || got.index != want.index || got.tree.encoding() != want.tree.encoding();
      }
    }
  });
  verdict(6, fails == 0, secs, 60.0,
          fmt("optimizer vs brute-force argmax: %.0f of %.0f cases identical tree, max welfare diff %.1e",
              static_cast<double>(cases - fails), static_cast<double>(cases), worst));
}

void criterion7() {
  int covered = 0;
  double mc = 0.0, mc_se = 0.0;
  const auto law = DgpSpec::preset("reference");
  const double secs = timed([&] {
    // closed form: effect 1 - 2 * 1(x1 > 0.7) averages to 1 - 2 * 0.3
    const double truth = 1.0 - 2.0 * 0.3;
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double s = 0.0, s2 = 0.0;
    const int draws = 1'000'000;
    for (int k = 0; k < draws; ++k) {
      const double x[2] = {u(rng), u(rng)};
      const double v = true_gamma(law, 1, x) - true_gamma(law, 0, x);
      s += v;
      s2 += v * v;
    }
    mc = s / draws;
    mc_se = std::sqrt((s2 / draws - mc * mc) / draws);
    if (std::abs(mc - truth) > 3.0 * mc_se || std::abs(law.true_ate() - truth) > 1e-12) return;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      const auto sample = draw_sample(law, 2000, 700 + seed);
      CrossFitOptions opt;
      opt.seed = seed;
      const auto fits = cross_fit(sample.data, WelfareSpec{}, opt);
      const auto ate = estimate_ate(linear_scores_additive(sample.data, fits));
      covered += std::abs(ate.ate - truth) <= 3.0 * ate.se;
    }
  });
  verdict(7, covered >= 18, secs, 0.0,
          fmt("AIPW within 3 SE of the true ATE in %.0f/20 seeds (MC truth %.4f +- %.4f)", covered, mc, mc_se));
}

void criterion8() {
  std::string detail;
  bool ok = true;
  const double secs = timed([&] {
    for (Family f : {Family::Additive, Family::Gini}) {
      RegretOptions o;
      o.welfare.family = f;
      o.n_list = {500, 2000};
      o.replications = 20;
      o.mc_draws = 1'000'000;
      o.seed = 8;
      const auto curve = regret_experiment(DgpSpec::preset("reference"), o);
      const double r500 = curve.rows[0].mean, r2000 = curve.rows[1].mean;
      ok = ok && r2000 < r500;
      detail += " " + to_string(f) + fmt(" %.5f -> %.5f", r500, r2000);
    }
  });
  verdict(8, ok, secs, 1800.0, "mean regret n=500 -> n=2000:" + detail);
}

void criterion9() {
  bool ok = false;
  std::string detail;
  const double secs = timed([&] {
    const auto law = DgpSpec::preset("kendall");
    // independent oracle: tau(pi) = E over independent pairs of the closed-form phi
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int pairs = 500'000;
    std::vector<std::array<double, 4>> draws(pairs);
    for (auto& d : draws)
      for (auto& v : d) v = u(rng);
    auto oracle = [&](const PolicyTree& t) {
      std::vector<double> vals(pairs);
      for (int k = 0; k < pairs; ++k) {
        const double* xi = draws[static_cast<std::size_t>(k)].data();
        const double* xj = xi + 2;
        const Eigen::RowVector2d ri(xi[0], xi[1]), rj(xj[0], xj[1]);
        const int a = t.treats(t.leaf_of(ri)), b = t.treats(t.leaf_of(rj));
        vals[static_cast<std::size_t>(k)] = kendall_phi(law, a, b, xi, xj);
      }
      const double m = std::accumulate(vals.begin(), vals.end(), 0.0) / pairs;
      double v = 0.0;
      for (double x : vals) v += (x - m) * (x - m);
      return std::pair<double, double>{m, std::sqrt(v / (pairs - 1.0) / pairs)};
    };
    const auto none = oracle(PolicyTree::constant(false));
    const auto all = oracle(PolicyTree::constant(true));

    const auto sample = draw_sample(law, 2000, 909);
    WelfareSpec spec;
    spec.family = Family::KendallTau;
    spec.target = 0.0;
    CrossFitOptions opt;
    opt.seed = 9;
    const auto fits = cross_fit(sample.data, spec, opt);
    const auto scores = build_scores(sample.data, fits, spec);
    const auto grid = ThresholdGrid::from_data(sample.data.covariates(), {}, GridSpec{});
    const auto best = optimize_policy(scores, spec, grid, sample.data.covariates(), 2);
    const auto chosen = oracle(best.tree);
    const double w_none = -std::abs(none.first), w_all = -std::abs(all.first), w = -std::abs(chosen.first);
    const double tol = 3.0 * std::max({chosen.second, none.second, all.second});
    ok = std::abs(none.first - 0.1) < 0.03 && std::abs(all.first - 0.3) < 0.03 && w >= w_none - tol &&
         w >= w_all - tol;
    detail = fmt("oracle tau: treat-none %.4f, treat-all %.4f, chosen %.4f", none.first, all.first, chosen.first) +
             " (" + best.tree.describe(sample.data.covariate_names()) + ")";
  });
  verdict(9, ok, secs, 0.0, detail);
}

void criterion10() {
  bool ok = true;
  std::string detail;
  const double secs = timed([&] {
    const std::vector<std::pair<std::string, nlohmann::json>> runs{
        {"report", {{"dgp", "reference"}, {"n", 800}}},
        {"optimize", {{"dgp", "reference"}, {"n", 400}, {"family", "gini"}}},
        {"optimize", {{"dgp", "kendall"}, {"n", 400}, {"family", "kendall_tau"}, {"learner", "forest"}}},
        {"simulate", {{"dgp", "reference"}, {"n_list", {100, 200}}, {"reps", 3}, {"mc_draws", 20000}}},
        {"probe", {{"dgp", "positive"}, {"n", 300}, {"reps", 3}, {"family", "atkinson_iop"}}}};
    for (const auto& [cmd, j] : runs) {
      std::vector<std::string> outputs;
      for (unsigned threads : {1u, 4u, 4u, 0u}) {
        auto cj = j;
        cj["threads"] = threads;
        const auto cfg = RunConfig::from_json(cj);
        set_thread_limit(cfg.threads);
        CommandOutput out;
        if (cmd == "report") out = cmd_report(cfg);
        if (cmd == "optimize") out = cmd_optimize(cfg);
        if (cmd == "simulate") out = cmd_simulate(cfg);
        if (cmd == "probe") out = cmd_probe(cfg);
        outputs.push_back(out.table + out.jsonl());
      }
      const bool same = std::all_of(outputs.begin(), outputs.end(), [&](const auto& s) { return s == outputs[0]; });
      ok = ok && same;
      detail += " " + cmd + (same ? " identical" : " DIFFERS");
    }
    set_thread_limit(0);
  });
  verdict(10, ok, secs, 0.0, "outputs across reruns and 1/4/auto threads:" + detail);
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> only;
  for (int k = 1; k < argc; ++k) only.push_back(std::atoi(argv[k]));
  const std::vector<void (*)()> all{criterion1, criterion2, criterion3, criterion4, criterion5,
                                    criterion6, criterion7, criterion8, criterion9, criterion10};
  for (std::size_t k = 0; k < all.size(); ++k) {
    if (!only.empty() && std::find(only.begin(), only.end(), static_cast<int>(k + 1)) == only.end()) continue;
    try {
      all[k]();
    } catch (const std::exception& e) {
      verdict(static_cast<int>(k + 1), false, 0.0, 0.0, std::string("threw: ") + e.what());
    }
  }
  return failures == 0 ? 0 : 1;
}
