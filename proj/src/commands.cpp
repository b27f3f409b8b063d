#include "orthopolicy/commands.hpp"

#include <cstdio>
#include <sstream>

#include "orthopolicy/error.hpp"
#include "orthopolicy/folds.hpp"
#include "orthopolicy/learners.hpp"
#include "orthopolicy/policy.hpp"
#include "orthopolicy/scores.hpp"
#include "orthopolicy/simlab.hpp"
#include "orthopolicy/ustat.hpp"

namespace orthopolicy {

namespace {

using nlohmann::json;

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

json header(const RunConfig& c, const std::string& command) {
  return {{"record", "config"}, {"command", command}, {"config", c.to_json()}, {"config_hash", c.hash()}, {"seed", c.seed}};
}

std::string table_head(const RunConfig& c, const std::string& title) {
  return title + "  (config " + c.hash() + ", seed " + std::to_string(c.seed) + ")\n";
}

// Fixed-width rows; the first column is left aligned.
std::string render_rows(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& r : rows) {
    width.resize(std::max(width.size(), r.size()), 0);
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  }
  std::ostringstream out;
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c) {
      const auto pad = std::string(width[c] - r[c].size(), ' ');
      if (c == 0)
        out << r[c] << pad;
      else
        out << "  " << pad << r[c];
    }
    out << '\n';
  }
  return out.str();
}

std::string opt_cell(const std::optional<double>& v) { return v ? fmt(*v) : "n/a"; }
json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

std::string CommandOutput::jsonl() const {
  std::string s;
  for (const auto& r : records) {
    s += r.dump();
    s += '\n';
  }
  return s;
}

InputData load_input(const RunConfig& config) {
  if (config.data) {
    auto loaded = load_dataset(*config.data, *config.mapping);
    return {std::move(loaded.data), loaded.dropped_rows, *config.data};
  }
  if (config.dgp) {
    auto sample = draw_sample(*config.dgp, config.n, config.seed);
    return {std::move(sample.data), 0, "dgp:" + config.dgp->name};
  }
  throw ConfigError("no input: set data (with mapping) or dgp");
}

std::vector<std::size_t> resolve_features(const std::vector<std::string>& features, const Dataset& data) {
  std::vector<std::size_t> cols;
  for (const auto& f : features) {
    const bool numeric = !f.empty() && f.find_first_not_of("0123456789") == std::string::npos;
    if (numeric) {
      const auto idx = std::stoul(f);
      if (idx >= data.k()) throw ConfigError("feature index " + f + " out of range");
      cols.push_back(idx);
    } else {
      cols.push_back(data.column_index(f));
    }
  }
  return cols;
}

CommandOutput cmd_report(const RunConfig& config) {
  const auto input = load_input(config);
  const auto& data = input.data;
  CommandOutput out;
  out.records.push_back(header(config, "report"));

  WelfareSpec additive;
  additive.identification = config.welfare.identification;
  const auto fits = cross_fit(data, additive, config.fit);
  const auto scores = std::get<LinearScoreSet>(build_scores(data, fits, additive));
  const auto ate = estimate_ate(scores);

  json rec{{"record", "summary"}, {"n", data.n()}, {"dropped_rows", input.dropped_rows}, {"source", input.source},
           {"ate", ate.ate},      {"ate_se", ate.se}, {"ate_p", ate.p}, {"mean_outcome", data.mean_outcome()},
           {"treated_share", static_cast<double>(data.treated_count()) / static_cast<double>(data.n())}};
  json reasons = json::object();

  std::optional<double> gini, iop, ratio, tau;
  try {
    gini = gini_index(data.outcome());
  } catch (const NumericError& e) {
    reasons["gini"] = e.what();
  }
  if (gini) {
    const auto folds = make_unit_folds(data.n(), config.fit.folds, config.fit.seed);
    const auto learner = make_learner(config.fit.learner);
    const auto fitted = fit_mean(data, folds, *learner, data.circumstance_columns(), data.outcome());
    try {
      const auto share = iop_share(fitted, data.outcome());
      iop = share.iop;
      ratio = share.ratio;
    } catch (const NumericError& e) {
      reasons["iop"] = e.what();
    }
  } else {
    reasons["iop"] = "requires a defined Gini index of the outcome";
  }
  if (data.has_parental_outcome())
    tau = kendall_tau(data.outcome(), data.parental_outcome());
  else
    reasons["kendall_tau"] = "no parental outcome column";

  rec["gini"] = opt_json(gini);
  rec["iop"] = opt_json(iop);
  rec["iop_ratio"] = opt_json(ratio);
  rec["kendall_tau"] = opt_json(tau);
  rec["unavailable"] = reasons;
  rec["diagnostics"] = score_diagnostics(scores, fits.clamped_share()).to_json();
  out.records.push_back(rec);

  out.table = table_head(config, "Descriptive report (" + input.source + ")");
  out.table += render_rows({{"n", "ATE", "se", "p", "Gini", "IOp", "IOp/Gini", "Kendall tau"},
                            {std::to_string(data.n()), fmt(ate.ate), fmt(ate.se), fmt(ate.p), opt_cell(gini),
                             opt_cell(iop), opt_cell(ratio), opt_cell(tau)}});
  if (input.dropped_rows) out.table += "dropped rows with missing values: " + std::to_string(input.dropped_rows) + "\n";
  for (const auto& [k, v] : reasons.items()) out.table += k + " unavailable: " + v.get<std::string>() + "\n";
  return out;
}

CommandOutput cmd_optimize(const RunConfig& config) {
  const auto input = load_input(config);
  const auto& data = input.data;
  const auto& names = data.covariate_names();
  CommandOutput out;
  out.records.push_back(header(config, "optimize"));
  out.table = table_head(config, "Policy comparison (" + input.source + ", n=" + std::to_string(data.n()) + ")");

  const auto features = resolve_features(config.features, data);
  const auto grid = ThresholdGrid::from_data(data.covariates(), features, config.grid);
  out.records.push_back({{"record", "grid"}, {"grid", grid.to_json(names)}});
  const auto report = report_scores(data, config.fit, config.welfare.identification);

  std::vector<std::vector<std::string>> rows{
      {"family", "policy", "welfare", "se", "mean", "Gini", "IOp", "Kendall tau", "treated"}};
  std::string trees;
  for (auto family : config.families()) {
    WelfareSpec spec = config.welfare;
    spec.family = family;
    try {
      spec.validate(data);
    } catch (const Error& e) {
      if (config.family != "all") throw;
      out.records.push_back({{"record", "skipped"}, {"family", to_string(family)}, {"reason", e.what()}});
      out.table += "skipped " + to_string(family) + ": " + e.what() + "\n";
      continue;
    }
    const auto fits = cross_fit(data, spec, config.fit);
    const auto scores = build_scores(data, fits, spec);
    const auto best = optimize_policy(scores, spec, grid, data.covariates(), config.depth);

    json diag = score_diagnostics(scores, fits.clamped_share()).to_json();
    out.records.push_back({{"record", "diagnostics"}, {"family", to_string(family)}, {"diagnostics", diag}});

    const std::vector<std::pair<std::string, PolicyTree>> policies{
        {"optimal", best.tree}, {"treat-none", PolicyTree::constant(false)}, {"treat-all", PolicyTree::constant(true)}};
    for (const auto& [label, tree] : policies) {
      const auto r = policy_report(data, report, scores, spec, tree, label);
      json rec = r.to_json(names);
      rec["record"] = "policy";
      rec["family"] = to_string(family);
      rec["spec"] = spec.to_json();
      if (label == "optimal") {
        rec["enumeration_index"] = best.index;
        rec["trees_evaluated"] = best.evaluated;
        trees += "[" + to_string(family) + "] optimal rule, welfare " + fmt(r.welfare) + "\n" + r.rendering;
      }
      out.records.push_back(rec);
      rows.push_back({to_string(family), label, fmt(r.welfare), fmt(r.welfare_se), fmt(r.mean), opt_cell(r.gini),
                      opt_cell(r.iop), opt_cell(r.kendall_tau), fmt(r.share_treated, 3)});
    }
  }
  out.table += render_rows(rows);
  for (const auto& [col, why] : report.unavailable) out.table += col + " unavailable: " + why + "\n";
  out.table += "\n" + trees;
  return out;
}

CommandOutput cmd_simulate(const RunConfig& config) {
  if (!config.dgp) throw ConfigError("simulate needs a dgp (preset name, spec file or object)");
  CommandOutput out;
  out.records.push_back(header(config, "simulate"));
  out.table = table_head(config, "Regret experiment (dgp " + config.dgp->name + ")");

  std::vector<std::string> fam_names;
  std::vector<std::vector<std::string>> rows{{"family", "n", "reps", "mean regret", "sd", "W*"}};
  std::vector<Family> families = config.families();
  std::string trees;
  for (auto family : families) {
    RegretOptions opt;
    opt.welfare = config.welfare;
    opt.welfare.family = family;
    opt.fit = config.fit;
    opt.grid = config.grid;
    opt.depth = config.depth;
    opt.n_list = config.n_list;
    opt.replications = config.reps;
    opt.mc_draws = config.mc_draws;
    opt.seed = config.seed;
    std::vector<std::string> names;
    for (std::size_t k = 0; k < config.dgp->dim; ++k) names.push_back("x" + std::to_string(k + 1));
    for (const auto& f : config.features) {
      const bool numeric = f.find_first_not_of("0123456789") == std::string::npos;
      std::size_t idx = config.dgp->dim;
      if (numeric)
        idx = std::stoul(f);
      else
        for (std::size_t k = 0; k < names.size(); ++k)
          if (names[k] == f) idx = k;
      if (idx >= config.dgp->dim) throw ConfigError("unknown feature '" + f + "'");
      opt.features.push_back(idx);
    }
    const auto curve = regret_experiment(*config.dgp, opt);
    out.records.push_back({{"record", "class"},
                           {"family", to_string(family)},
                           {"best_welfare", curve.best_welfare},
                           {"best_welfare_mc_se", curve.mc_se},
                           {"best_tree", curve.best_tree.to_json(names)},
                           {"grid", curve.grid}});
    for (const auto& row : curve.rows) {
      out.records.push_back({{"record", "regret"},
                             {"family", to_string(family)},
                             {"n", row.n},
                             {"mean_regret", row.mean},
                             {"sd_regret", row.sd},
                             {"regrets", row.regrets},
                             {"welfare", row.welfare}});
      rows.push_back({to_string(family), std::to_string(row.n), std::to_string(row.regrets.size()), fmt(row.mean, 5),
                      fmt(row.sd, 5), fmt(curve.best_welfare, 5)});
    }
    trees += "[" + to_string(family) + "] best rule in class: " + curve.best_tree.describe(names) + "\n";
  }
  out.table += render_rows(rows) + trees;
  return out;
}

CommandOutput cmd_probe(const RunConfig& config) {
  if (!config.dgp) throw ConfigError("probe needs a dgp (preset name, spec file or object)");
  CommandOutput out;
  out.records.push_back(header(config, "probe"));
  out.table = table_head(config, "Orthogonality probe (dgp " + config.dgp->name + ", n=" + std::to_string(config.n) + ")");
  std::vector<std::vector<std::string>> rows{
      {"family", "nuisance", "plug-in", "reps", "share |orth|<|plug|", "mean |orth slope|", "mean |plug slope|"}};
  for (auto family : config.families()) {
    ProbeOptions opt;
    opt.welfare = config.welfare;
    opt.welfare.family = family;
    opt.target = config.perturbation;
    opt.tau_grid = config.tau_grid;
    opt.n = config.n;
    opt.replications = config.reps;
    opt.seed = config.seed;
    opt.trim = config.fit.trim;
    const auto r = orthogonality_probe(*config.dgp, opt);
    json reps = json::array();
    for (const auto& p : r.replications)
      reps.push_back({{"orthogonal_slope", p.orthogonal_slope},
                      {"plugin_slope", p.plugin_slope},
                      {"orthogonal_at_zero", p.orthogonal_at_zero},
                      {"dr_at_zero", p.dr_at_zero}});
    out.records.push_back({{"record", "probe"},
                           {"family", to_string(family)},
                           {"perturbation", to_string(config.perturbation)},
                           {"plugin", r.plugin},
                           {"tau", r.tau},
                           {"share_smaller", r.share_smaller},
                           {"mean_abs_orthogonal", r.mean_abs_orthogonal},
                           {"mean_abs_plugin", r.mean_abs_plugin},
                           {"replications", reps}});
    rows.push_back({to_string(family), to_string(config.perturbation), r.plugin, std::to_string(r.replications.size()),
                    fmt(r.share_smaller, 3), fmt(r.mean_abs_orthogonal, 5), fmt(r.mean_abs_plugin, 5)});
  }
  out.table += render_rows(rows);
  return out;
}

}  // namespace orthopolicy
