#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "orthopolicy/commands.hpp"
#include "orthopolicy/config.hpp"
#include "orthopolicy/error.hpp"
#include "orthopolicy/parallel.hpp"

namespace op = orthopolicy;
using nlohmann::json;

namespace {

// Flag values that were actually given; they replace config-file keys.
struct Overrides {
  std::optional<std::string> data, mapping, dgp, learner, pair_learner, family, identification, grid, perturbation;
  std::optional<std::size_t> n, k, trees, min_leaf, max_depth, pair_cap, folds, reps, mc_draws;
  std::optional<double> bandwidth, trim, theta, target_t;
  std::optional<int> depth;
  std::vector<std::string> features;
  std::vector<std::size_t> n_list;
  std::vector<double> tau_grid;

  void attach(CLI::App* app) {
    app->add_option("--data", data, "delimited data file");
    app->add_option("--mapping", mapping, "column mapping (JSON file)");
    app->add_option("--dgp", dgp, "synthetic law: preset name or JSON spec file");
    app->add_option("--n", n, "sample size for synthetic draws");
    app->add_option("--learner", learner, "kernel | knn | forest");
    app->add_option("--bandwidth", bandwidth, "kernel bandwidth multiplier (0 = rule of thumb)");
    app->add_option("--k", k, "neighbours for knn (0 = default)");
    app->add_option("--trees", trees, "trees in the forest");
    app->add_option("--min-leaf", min_leaf, "forest minimum leaf size");
    app->add_option("--max-depth", max_depth, "forest maximum depth");
    app->add_option("--pair-learner", pair_learner, "learner for pair nuisances: kernel | knn | forest");
    app->add_option("--trim", trim, "propensity trimming level");
    app->add_option("--pair-cap", pair_cap, "maximum training pairs per pair-nuisance fit");
    app->add_option("--folds", folds, "cross-fitting folds");
    app->add_option("--family", family, "additive | atkinson_iop | gini | iop_gini | kendall_tau | all");
    app->add_option("--theta", theta, "Atkinson inequality aversion");
    app->add_option("--target-t", target_t, "Kendall tau target");
    app->add_option("--identification", identification, "dr | dm | ipw");
    app->add_option("--depth", depth, "policy tree depth (0-2)");
    app->add_option("--grid", grid, "deciles | all | quantiles:Q");
    app->add_option("--features", features, "policy features (names or indices)");
    app->add_option("--n-list", n_list, "sample sizes for simulate");
    app->add_option("--reps", reps, "replications");
    app->add_option("--mc-draws", mc_draws, "Monte-Carlo oracle draws");
    app->add_option("--perturbation", perturbation, "probe target: gamma | e | phi");
    app->add_option("--tau-grid", tau_grid, "probe perturbation sizes");
  }

  void apply(json& j) const {
    auto set = [&j](const char* key, const auto& v) {
      if (v) j[key] = *v;
    };
    set("data", data);
    set("mapping", mapping);
    set("dgp", dgp);
    set("n", n);
    set("learner", learner);
    set("bandwidth", bandwidth);
    set("k", k);
    set("trees", trees);
    set("min_leaf", min_leaf);
    set("max_depth", max_depth);
    if (pair_learner) {
      json pl = j.contains("pair_learner") ? j["pair_learner"] : json::object();
      pl["kind"] = *pair_learner;
      j["pair_learner"] = pl;
    }
    set("trim", trim);
    set("pair_cap", pair_cap);
    set("folds", folds);
    set("family", family);
    set("theta", theta);
    set("target_t", target_t);
    set("identification", identification);
    set("depth", depth);
    set("grid", grid);
    if (!features.empty()) j["features"] = features;
    if (!n_list.empty()) j["n_list"] = n_list;
    set("reps", reps);
    set("mc_draws", mc_draws);
    set("perturbation", perturbation);
    if (!tau_grid.empty()) j["tau_grid"] = tau_grid;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Policy learning with orthogonal welfare scores"};
  app.require_subcommand(1);
  app.fallthrough();
  std::optional<std::string> config_path, out;
  std::optional<unsigned> threads;
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--threads", threads, "worker cap (0 = hardware)");
  app.add_option("--out", out, "write the JSONL records here instead of stdout");
  app.add_option("--seed", seed, "master seed");

  Overrides ov;
  std::vector<std::pair<CLI::App*, op::CommandOutput (*)(const op::RunConfig&)>> commands{
      {app.add_subcommand("report", "ATE, Gini, IOp and Kendall tau of the sample"), &op::cmd_report},
      {app.add_subcommand("optimize", "optimal tree against treat-none and treat-all"), &op::cmd_optimize},
      {app.add_subcommand("simulate", "regret curve on a synthetic law"), &op::cmd_simulate},
      {app.add_subcommand("probe", "orthogonality probe on a synthetic law"), &op::cmd_probe}};
  for (auto& [sub, _] : commands) ov.attach(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(op::ErrorKind::Argument);
  }

  try {
    json j = json::object();
    std::filesystem::path base;
    if (config_path) {
      j = op::load_config_file(*config_path);
      base = std::filesystem::path(*config_path).parent_path();
    }
    ov.apply(j);
    if (seed) j["seed"] = *seed;
    if (threads) j["threads"] = *threads;
    if (out) j["out"] = *out;
    // flag paths are relative to the working directory, file paths to the file
    auto absolute_flag = [&j](const char* key, bool given) {
      if (given && std::filesystem::exists(j[key].get<std::string>()))
        j[key] = std::filesystem::absolute(j[key].get<std::string>()).string();
    };
    absolute_flag("data", ov.data.has_value());
    absolute_flag("mapping", ov.mapping.has_value());
    absolute_flag("dgp", ov.dgp.has_value());
    const auto config = op::RunConfig::from_json(j, base);
    op::set_thread_limit(config.threads);

    for (auto& [sub, run] : commands) {
      if (!sub->parsed()) continue;
      const auto result = run(config);
      std::cout << result.table;
      if (config.out) {
        std::ofstream file(*config.out, std::ios::binary);
        if (!file) throw op::ConfigError("cannot write " + *config.out);
        file << result.jsonl();
      } else {
        std::cout << '\n' << result.jsonl();
      }
    }
    return 0;
  } catch (const op::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
