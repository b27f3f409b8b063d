#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "orthopolicy/error.hpp"
#include "orthopolicy/policy.hpp"

namespace orthopolicy {

ReportScores report_scores(const Dataset& data, const CrossFitOptions& options, Identification id) {
  ReportScores out;
  WelfareSpec spec;
  spec.identification = id;
  spec.family = Family::Additive;
  out.additive = std::get<LinearScoreSet>(build_scores(data, cross_fit(data, spec, options), spec));

  const auto y = data.outcome();
  const bool negative = std::any_of(y.begin(), y.end(), [](double v) { return v < 0.0; });
  for (Family f : {Family::Gini, Family::IopGini}) {
    const std::string column = f == Family::Gini ? "gini" : "iop";
    if (negative) {
      out.unavailable.emplace_back(column, "outcome has negative values");
      continue;
    }
    spec.family = f;
    auto scores = std::get<PairScoreSet>(build_scores(data, cross_fit(data, spec, options), spec));
    (f == Family::Gini ? out.gini : out.iop_gini).emplace(std::move(scores));
  }
  if (data.has_parental_outcome()) {
    spec.family = Family::KendallTau;
    out.kendall.emplace(std::get<PairScoreSet>(build_scores(data, cross_fit(data, spec, options), spec)));
  } else {
    out.unavailable.emplace_back("kendall_tau", "no parental_outcome column");
  }
  return out;
}

namespace {

std::string fmt(double v, int precision = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

std::string fmt_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string name_of(std::size_t f, const std::vector<std::string>& names) {
  return f < names.size() ? names[f] : "x" + std::to_string(f);
}

std::string annotate(const NodeSummary& s) {
  return "n=" + std::to_string(s.n) + " CATE=" + fmt(s.cate) + " p=" + fmt(s.treated_share, 3);
}

}  // namespace

PolicyReport policy_report(const Dataset& data, const ReportScores& report, const ScoreSet& scores,
                           const WelfareSpec& spec, const PolicyTree& policy, std::string label) {
  const auto& x = data.covariates();
  const auto actions = policy.assign(x);
  PolicyReport r;
  r.label = std::move(label);
  r.tree = policy;
  const auto w = estimate_welfare(scores, actions, spec);
  r.welfare = w.value;
  r.welfare_se = w.se;

  WelfareSpec plain;
  r.mean = estimate_welfare(report.additive, actions, plain).mean;
  if (report.gini && r.mean > 0.0) r.gini = 1.0 - estimate_welfare(*report.gini, actions, plain).mean / r.mean;
  if (report.iop_gini && r.mean > 0.0)
    r.iop = 1.0 - estimate_welfare(*report.iop_gini, actions, plain).mean / r.mean;
  if (report.kendall) r.kendall_tau = estimate_welfare(*report.kendall, actions, plain).mean;
  const std::size_t n = data.n();
  std::size_t treated = 0;
  for (auto a : actions) treated += a;
  r.share_treated = static_cast<double>(treated) / static_cast<double>(n);

  // Breadth-first nodes: root, internal children, leaves.
  const auto leaves = policy.leaves(x);
  const std::size_t node_count = policy.depth() == 0 ? 1 : (policy.depth() == 1 ? 3 : 7);
  std::vector<double> cate_sum(node_count, 0.0), d_sum(node_count, 0.0);
  std::vector<std::size_t> count(node_count, 0);
  const auto d = data.treatment();
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> path{0};
    if (policy.depth() == 1) path.push_back(1 + leaves[i]);
    if (policy.depth() == 2) {
      path.push_back(1 + leaves[i] / 2);
      path.push_back(3 + leaves[i]);
    }
    const double cate = report.additive.treated[i] - report.additive.control[i];
    for (auto k : path) {
      cate_sum[k] += cate;
      d_sum[k] += d[i];
      ++count[k];
    }
  }
  for (std::size_t k = 0; k < node_count; ++k) {
    NodeSummary s;
    s.n = count[k];
    if (count[k] > 0) {
      s.cate = cate_sum[k] / static_cast<double>(count[k]);
      s.treated_share = d_sum[k] / static_cast<double>(count[k]);
    }
    r.nodes.push_back(s);
  }
  r.rendering = render_tree(policy, r.nodes, data.covariate_names());
  return r;
}

std::string render_tree(const PolicyTree& tree, const std::vector<NodeSummary>& nodes,
                        const std::vector<std::string>& names) {
  std::ostringstream os;
  auto leaf_line = [&](std::size_t leaf, std::size_t node) {
    return std::string(tree.treats(leaf) ? "TREAT" : "no treatment") + "  [" + annotate(nodes[node]) + "]";
  };
  auto cond = [&](const Split& s) { return name_of(s.feature, names) + " <= " + fmt_g(s.threshold); };
  if (tree.depth() == 0) {
    os << leaf_line(0, 0) << "\n";
    return os.str();
  }
  os << cond(tree.split(0)) << "  [" << annotate(nodes[0]) << "]\n";
  if (tree.depth() == 1) {
    os << "├── yes: " << leaf_line(0, 1) << "\n";
    os << "└── no:  " << leaf_line(1, 2) << "\n";
    return os.str();
  }
  os << "├── yes: " << cond(tree.split(1)) << "  [" << annotate(nodes[1]) << "]\n";
  os << "│   ├── yes: " << leaf_line(0, 3) << "\n";
  os << "│   └── no:  " << leaf_line(1, 4) << "\n";
  os << "└── no:  " << cond(tree.split(2)) << "  [" << annotate(nodes[2]) << "]\n";
  os << "    ├── yes: " << leaf_line(2, 5) << "\n";
  os << "    └── no:  " << leaf_line(3, 6) << "\n";
  return os.str();
}

nlohmann::json PolicyReport::to_json(const std::vector<std::string>& names) const {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  nlohmann::json node_list = nlohmann::json::array();
  for (const auto& s : nodes) node_list.push_back({{"n", s.n}, {"cate", s.cate}, {"p_hat", s.treated_share}});
  return {{"policy", label},
          {"welfare", welfare},
          {"welfare_se", welfare_se},
          {"mean", mean},
          {"gini", opt(gini)},
          {"iop", opt(iop)},
          {"kendall_tau", opt(kendall_tau)},
          {"share_treated", share_treated},
          {"tree", tree.to_json(names)},
          {"nodes", node_list}};
}

}  // namespace orthopolicy
