#include "orthopolicy/scores.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "orthopolicy/error.hpp"
#include "orthopolicy/parallel.hpp"
#include "orthopolicy/ustat.hpp"

namespace orthopolicy {

PairScoreSet::PairScoreSet(std::size_t n, RowFn rows, std::size_t dense_budget)
    : n_(n), rows_(std::move(rows)), dense_(false) {
  if (n < 2) throw ArgumentError("pair scores need n >= 2");
  if (pair_count() > dense_budget) return;
  dense_ = true;
  for (int ab = 0; ab < 4; ++ab) {
    auto& store = store_[static_cast<std::size_t>(ab)];
    store.resize(pair_count());
    parallel_for(n_ - 1, [&](std::size_t i) {
      rows_(ab / 2, ab % 2, i, std::span<double>(store.data() + offset(n_, i), n_ - i - 1));
    });
  }
  rows_ = nullptr;  // drop captured nuisances
}

std::span<const double> PairScoreSet::row(int a, int b, std::size_t i, std::vector<double>& scratch) const {
  const std::size_t len = n_ - i - 1;
  if (dense_) return {store_[static_cast<std::size_t>(2 * a + b)].data() + offset(n_, i), len};
  scratch.resize(len);
  rows_(a, b, i, scratch);
  return {scratch.data(), len};
}

std::span<const double> PairScoreSet::slice(int a, int b) const {
  if (!dense_) throw ArgumentError("pair score slices are only available with dense storage");
  return store_[static_cast<std::size_t>(2 * a + b)];
}

void PairScoreSet::visit_slice(int a, int b,
                               const std::function<void(std::size_t i, std::span<const double>)>& fn) const {
  std::vector<double> scratch;
  for (std::size_t i = 0; i + 1 < n_; ++i) fn(i, row(a, b, i, scratch));
}

double PairScoreSet::at(int a, int b, std::size_t i, std::size_t j) const {
  if (i > j) std::swap(i, j);
  if (i == j || j >= n_) throw ArgumentError("pair index out of range");
  std::vector<double> scratch;
  return row(a, b, i, scratch)[j - i - 1];
}

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ArgumentError("nuisance fits lack " + what);
}

double indicator(std::uint8_t d, int a) { return d == a ? 1.0 : 0.0; }

}  // namespace

LinearScoreSet linear_scores_additive(const Dataset& data, const NuisanceFits& fits, Identification id) {
  const std::size_t n = data.n();
  if (id != Identification::IPW) require(fits.has_gamma(), "outcome regressions");
  if (id != Identification::DM) require(fits.has_propensity(), "propensity scores");
  const auto y = data.outcome();
  const auto d = data.treatment();
  LinearScoreSet s;
  s.treated.resize(n);
  s.control.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = indicator(d[i], 1);
    switch (id) {
      case Identification::DM:
        s.treated[i] = fits.gamma(1, i);
        s.control[i] = fits.gamma(0, i);
        break;
      case Identification::IPW:
        s.treated[i] = t * y[i] / fits.prob(1, i);
        s.control[i] = (1.0 - t) * y[i] / fits.prob(0, i);
        break;
      case Identification::DR:
        s.treated[i] = fits.gamma(1, i) + t * (y[i] - fits.gamma(1, i)) / fits.prob(1, i);
        s.control[i] = fits.gamma(0, i) + (1.0 - t) * (y[i] - fits.gamma(0, i)) / fits.prob(0, i);
        break;
    }
  }
  return s;
}

LinearScoreSet linear_scores_atkinson_iop(const Dataset& data, const NuisanceFits& fits, double theta,
                                          Identification id) {
  WelfareSpec spec;
  spec.family = Family::AtkinsonIop;
  spec.theta = theta;
  spec.validate(data);
  require(fits.has_gamma(), "outcome regressions");
  if (id != Identification::DM) require(fits.has_propensity(), "propensity scores");
  const std::size_t n = data.n();
  const auto y = data.outcome();
  const auto d = data.treatment();
  const double mean = data.mean_outcome();
  const double floor = 1e-6 * mean;
  if (!(mean > 0.0) || !std::isfinite(floor)) throw NumericError("atkinson_iop scores need a positive mean outcome");

  std::vector<std::size_t> bad;
  auto floored = [&](int arm, std::size_t i) {
    const double g = fits.gamma(arm, i);
    if (!std::isfinite(g)) bad.push_back(i);
    return std::max(g, floor);
  };
  LinearScoreSet s;
  s.treated.resize(n);
  s.control.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double g1 = floored(1, i);
    const double g0 = floored(0, i);
    const double u1 = atkinson_utility(g1, theta);
    const double u0 = atkinson_utility(g0, theta);
    const double t = indicator(d[i], 1);
    switch (id) {
      case Identification::DM:
        s.treated[i] = u1;
        s.control[i] = u0;
        break;
      case Identification::IPW:
        s.treated[i] = u1 * t / fits.prob(1, i);
        s.control[i] = u0 * (1.0 - t) / fits.prob(0, i);
        break;
      case Identification::DR: {
        const double g_obs = d[i] == 1 ? g1 : g0;
        const double weight = std::pow(g_obs, -theta) * (y[i] - g_obs);
        s.treated[i] = u1 + t * weight / fits.prob(1, i);
        s.control[i] = u0 + (1.0 - t) * weight / fits.prob(0, i);
        break;
      }
    }
  }
  for (std::size_t i = 0; i < n && bad.empty(); ++i)
    if (!std::isfinite(s.treated[i]) || !std::isfinite(s.control[i])) bad.push_back(i);
  if (!bad.empty()) {
    std::string units;
    for (std::size_t k = 0; k < std::min<std::size_t>(bad.size(), 5); ++k)
      units += (k ? ", " : "") + std::to_string(bad[k]);
    throw NumericError("atkinson_iop scores are not finite for units " + units);
  }
  return s;
}

namespace {

// Doubly robust pair score for a kernel observed on the data: phi + D/e (g - phi).
PairScoreSet observed_kernel_scores(const Dataset& data, const NuisanceFits& fits, Family family,
                                    Identification id) {
  if (id != Identification::IPW) require(fits.phi != nullptr, "pair regressions");
  if (id != Identification::DM) require(fits.has_propensity(), "propensity scores");
  const std::size_t n = data.n();
  const PairTarget g = observed_kernel(data, family);
  const std::vector<std::uint8_t> d(data.treatment().begin(), data.treatment().end());
  auto rows = [n, g, d, fits, id](int a, int b, std::size_t i, std::span<double> out) {
    if (id != Identification::IPW) fits.phi->predict_row(a, b, i, out);
    const double ia = indicator(d[i], a);
    for (std::size_t j = i + 1; j < n; ++j) {
      double& v = out[j - i - 1];
      const double dab = ia * indicator(d[j], b);
      if (id == Identification::DM) continue;
      const double w = dab == 0.0 ? 0.0 : 1.0 / (fits.prob(a, i, j) * fits.prob(b, j, i));
      if (id == Identification::IPW)
        v = w == 0.0 ? 0.0 : g(i, j) * w;
      else if (w != 0.0)
        v += w * (g(i, j) - v);
    }
  };
  return PairScoreSet(n, rows);
}

}  // namespace

PairScoreSet pair_scores_gini(const Dataset& data, const NuisanceFits& fits, Identification id) {
  return observed_kernel_scores(data, fits, Family::Gini, id);
}

PairScoreSet pair_scores_kendall(const Dataset& data, const NuisanceFits& fits, Identification id) {
  if (!data.has_parental_outcome()) throw ConfigError("kendall_tau scores need a parental_outcome column");
  return observed_kernel_scores(data, fits, Family::KendallTau, id);
}

PairScoreSet pair_scores_iop_gini(const Dataset& data, const NuisanceFits& fits, Identification id) {
  require(fits.has_gamma(), "outcome regressions");
  if (id != Identification::DM) require(fits.has_propensity(), "propensity scores");
  const std::size_t n = data.n();
  const std::vector<double> y(data.outcome().begin(), data.outcome().end());
  const std::vector<std::uint8_t> d(data.treatment().begin(), data.treatment().end());
  auto rows = [n, y, d, fits, id](int a, int b, std::size_t i, std::span<double> out) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double gi = fits.gamma(a, i, j);
      const double gj = fits.gamma(b, j, i);
      const double m = 0.5 * (gi + gj - std::abs(gi - gj));
      double v = m;
      if (id == Identification::IPW) {
        const double dab = indicator(d[i], a) * indicator(d[j], b);
        v = dab == 0.0 ? 0.0 : m / (fits.prob(a, i, j) * fits.prob(b, j, i));
      } else if (id == Identification::DR) {
        const double delta = sgn(gi - gj);
        if (d[i] == a) v += 0.5 * (1.0 - delta) * (y[i] - fits.gamma(a, i, j)) / fits.prob(a, i, j);
        if (d[j] == b) v += 0.5 * (1.0 + delta) * (y[j] - fits.gamma(b, j, i)) / fits.prob(b, j, i);
      }
      out[j - i - 1] = v;
    }
  };
  return PairScoreSet(n, rows);
}

ScoreSet ipw_scores(const Dataset& data, const NuisanceFits& fits, const WelfareSpec& spec) {
  switch (spec.family) {
    case Family::Additive: return linear_scores_additive(data, fits, Identification::IPW);
    case Family::AtkinsonIop: return linear_scores_atkinson_iop(data, fits, spec.theta, Identification::IPW);
    case Family::Gini: return pair_scores_gini(data, fits, Identification::IPW);
    case Family::IopGini: return pair_scores_iop_gini(data, fits, Identification::IPW);
    case Family::KendallTau: return pair_scores_kendall(data, fits, Identification::IPW);
  }
  throw ArgumentError("unknown family");
}

ScoreSet ipw_orthogonal_scores(const Dataset& data, const NuisanceFits& fits, Family family) {
  if (family == Family::Additive) return linear_scores_additive(data, fits, Identification::DR);
  if (family != Family::Gini)
    throw ArgumentError("propensity-orthogonal IPW scores are implemented for additive and gini only");
  require(fits.phi != nullptr, "pair regressions");
  require(fits.has_propensity(), "propensity scores");
  const std::size_t n = data.n();
  if (n * (n - 1) / 2 > PairScoreSet::kDenseBudget)
    throw ArgumentError("propensity-orthogonal gini scores need dense pair storage");

  // phi_ab(X_i, X_j) for i < j; the kernel is symmetric, so the reversed
  // orientation is phi_ba(X_j, X_i).
  const std::size_t pairs = n * (n - 1) / 2;
  std::array<std::vector<double>, 4> phi;
  for (int ab = 0; ab < 4; ++ab) {
    phi[static_cast<std::size_t>(ab)].resize(pairs);
    parallel_for(n - 1, [&](std::size_t i) {
      fits.phi->predict_row(ab / 2, ab % 2, i,
                            {phi[static_cast<std::size_t>(ab)].data() + PairScoreSet::offset(n, i), n - i - 1});
    });
  }
  auto phi_at = [&](int a, int b, std::size_t i, std::size_t j) {
    if (i < j) return phi[static_cast<std::size_t>(2 * a + b)][PairScoreSet::offset(n, i) + j - i - 1];
    return phi[static_cast<std::size_t>(2 * b + a)][PairScoreSet::offset(n, j) + i - j - 1];
  };
  // first[ab][i]: mean over partners of phi_ab(X_i, .); second[ab][j]: of phi_ab(., X_j).
  std::array<std::vector<double>, 4> first, second;
  for (int ab = 0; ab < 4; ++ab) {
    auto& f = first[static_cast<std::size_t>(ab)];
    auto& s = second[static_cast<std::size_t>(ab)];
    f.assign(n, 0.0);
    s.assign(n, 0.0);
    parallel_for(n, [&](std::size_t i) {
      double sf = 0.0, ss = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        sf += phi_at(ab / 2, ab % 2, i, j);
        ss += phi_at(ab / 2, ab % 2, j, i);
      }
      f[i] = sf / static_cast<double>(n - 1);
      s[i] = ss / static_cast<double>(n - 1);
    });
  }
  const PairTarget g = observed_kernel(data, Family::Gini);
  const std::vector<std::uint8_t> d(data.treatment().begin(), data.treatment().end());
  auto rows = [&](int a, int b, std::size_t i, std::span<double> out) {
    const auto ab = static_cast<std::size_t>(2 * a + b);
    for (std::size_t j = i + 1; j < n; ++j) {
      const double ea = fits.prob(a, i, j);
      const double eb = fits.prob(b, j, i);
      const double dab = indicator(d[i], a) * indicator(d[j], b);
      double v = dab == 0.0 ? 0.0 : g(i, j) / (ea * eb);
      v += -first[ab][i] / ea * (indicator(d[i], a) - ea);
      v += -second[ab][j] / eb * (indicator(d[j], b) - eb);
      out[j - i - 1] = v;
    }
  };
  return PairScoreSet(n, rows);
}

ScoreSet build_scores(const Dataset& data, const NuisanceFits& fits, const WelfareSpec& spec) {
  spec.validate(data);
  switch (spec.family) {
    case Family::Additive: return linear_scores_additive(data, fits, spec.identification);
    case Family::AtkinsonIop: return linear_scores_atkinson_iop(data, fits, spec.theta, spec.identification);
    case Family::Gini: return pair_scores_gini(data, fits, spec.identification);
    case Family::IopGini: return pair_scores_iop_gini(data, fits, spec.identification);
    case Family::KendallTau: return pair_scores_kendall(data, fits, spec.identification);
  }
  throw ArgumentError("unknown family");
}

}  // namespace orthopolicy
