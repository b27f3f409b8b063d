#include "orthopolicy/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>

#include "orthopolicy/error.hpp"

namespace orthopolicy {

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

nlohmann::json load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  try {
    auto j = nlohmann::json::parse(in);
    if (!j.is_object()) throw ConfigError("config file " + path.string() + " must hold a JSON object");
    return j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config file " + path.string() + ": " + e.what());
  }
}

namespace {

const std::set<std::string> kKeys{
    "data",     "mapping",  "dgp",   "n",        "learner",  "bandwidth", "k",        "trees",     "min_leaf",
    "max_depth", "pair_learner", "trim", "pair_cap", "folds", "family", "theta",   "target_t", "identification",
    "depth",    "grid",     "features", "n_list", "reps",     "mc_draws",  "perturbation", "tau_grid", "seed",
    "threads",  "out"};

std::string resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  if (path.is_absolute() || base.empty()) return p;
  return (base / path).string();
}

}  // namespace

RunConfig RunConfig::from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (!kKeys.count(key)) throw ConfigError("unknown config key '" + key + "'");
  RunConfig c;
  try {
    if (j.contains("data") && !j.at("data").is_null()) c.data = resolve(base_dir, j.at("data").get<std::string>());
    if (j.contains("mapping") && !j.at("mapping").is_null()) {
      const auto& m = j.at("mapping");
      c.mapping = m.is_string() ? ColumnMapping::load(resolve(base_dir, m.get<std::string>())) : ColumnMapping::from_json(m);
    }
    if (j.contains("dgp") && !j.at("dgp").is_null()) {
      const auto& d = j.at("dgp");
      if (d.is_string()) {
        const auto s = d.get<std::string>();
        const auto file = resolve(base_dir, s);
        c.dgp = std::filesystem::exists(file) && s.find(".json") != std::string::npos
                    ? DgpSpec::from_json(load_config_file(file))
                    : DgpSpec::preset(s);
      } else {
        c.dgp = DgpSpec::from_json(d);
      }
    }
    if (j.contains("n")) c.n = j.at("n").get<std::size_t>();

    if (j.contains("learner")) {
      const auto& l = j.at("learner");
      if (l.is_string())
        c.fit.learner.kind = parse_learner_kind(l.get<std::string>());
      else
        c.fit.learner = LearnerSpec::from_json(l, c.fit.learner);
    }
    if (j.contains("bandwidth")) c.fit.learner.bandwidth = j.at("bandwidth").get<double>();
    if (j.contains("k")) c.fit.learner.k = j.at("k").get<std::size_t>();
    if (j.contains("trees")) c.fit.learner.trees = j.at("trees").get<std::size_t>();
    if (j.contains("min_leaf")) c.fit.learner.min_leaf = j.at("min_leaf").get<std::size_t>();
    if (j.contains("max_depth")) c.fit.learner.max_depth = j.at("max_depth").get<std::size_t>();
    if (j.contains("pair_learner")) c.fit.pair_learner = LearnerSpec::from_json(j.at("pair_learner"), c.fit.pair_learner);
    if (j.contains("trim")) c.fit.trim = j.at("trim").get<double>();
    if (j.contains("pair_cap")) c.fit.pair_cap = j.at("pair_cap").get<std::size_t>();
    if (j.contains("folds")) c.fit.folds = j.at("folds").get<std::size_t>();

    if (j.contains("family")) c.family = j.at("family").get<std::string>();
    if (j.contains("theta")) c.welfare.theta = j.at("theta").get<double>();
    if (j.contains("target_t")) c.welfare.target = j.at("target_t").get<double>();
    if (j.contains("identification"))
      c.welfare.identification = parse_identification(j.at("identification").get<std::string>());

    if (j.contains("depth")) c.depth = j.at("depth").get<int>();
    if (j.contains("grid")) c.grid = GridSpec::parse(j.at("grid").get<std::string>());
    if (j.contains("features")) {
      for (const auto& f : j.at("features"))
        c.features.push_back(f.is_string() ? f.get<std::string>() : std::to_string(f.get<std::size_t>()));
    }
    if (j.contains("n_list")) c.n_list = j.at("n_list").get<std::vector<std::size_t>>();
    if (j.contains("reps")) c.reps = j.at("reps").get<std::size_t>();
    if (j.contains("mc_draws")) c.mc_draws = j.at("mc_draws").get<std::size_t>();
    if (j.contains("perturbation")) c.perturbation = parse_perturbation(j.at("perturbation").get<std::string>());
    if (j.contains("tau_grid")) c.tau_grid = j.at("tau_grid").get<std::vector<double>>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("threads")) c.threads = j.at("threads").get<unsigned>();
    if (j.contains("out") && !j.at("out").is_null()) c.out = j.at("out").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  c.fit.seed = c.seed;

  // validation before any computation
  c.fit.validate();
  if (c.family != "all") c.welfare.family = parse_family(c.family);
  c.welfare.validate();
  if (c.depth < 0 || c.depth > 2) throw ConfigError("depth must be 0, 1 or 2");
  if (c.n < 2) throw ConfigError("n must be at least 2");
  if (c.n_list.empty()) throw ConfigError("n_list must not be empty");
  for (auto v : c.n_list)
    if (v < 2 * c.fit.folds) throw ConfigError("every n in n_list must allow the fold count");
  if (c.reps < 1) throw ConfigError("reps must be at least 1");
  if (c.mc_draws < 100) throw ConfigError("mc_draws must be at least 100");
  if (c.tau_grid.empty()) throw ConfigError("tau_grid must not be empty");
  if (c.data && !c.mapping) throw ConfigError("data needs a column mapping");
  return c;
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j;
  j["data"] = data ? nlohmann::json(*data) : nlohmann::json(nullptr);
  j["mapping"] = mapping ? mapping->to_json() : nlohmann::json(nullptr);
  j["dgp"] = dgp ? dgp->to_json() : nlohmann::json(nullptr);
  j["n"] = n;
  j["learner"] = fit.learner.to_json();
  j["pair_learner"] = fit.pair_learner.to_json();
  j["trim"] = fit.trim;
  j["pair_cap"] = fit.pair_cap;
  j["folds"] = fit.folds;
  j["family"] = family;
  j["theta"] = welfare.theta;
  j["target_t"] = welfare.target;
  j["identification"] = to_string(welfare.identification);
  j["depth"] = depth;
  j["grid"] = grid.to_string();
  j["features"] = features;
  j["n_list"] = n_list;
  j["reps"] = reps;
  j["mc_draws"] = mc_draws;
  j["perturbation"] = to_string(perturbation);
  j["tau_grid"] = tau_grid;
  j["seed"] = seed;
  j["out"] = out ? nlohmann::json(*out) : nlohmann::json(nullptr);
  return j;
}

std::string RunConfig::hash() const {
  auto j = to_json();
  j.erase("out");
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(j.dump())));
  return buf;
}

std::vector<Family> RunConfig::families() const {
  if (family == "all")
    return {Family::Additive, Family::AtkinsonIop, Family::Gini, Family::IopGini, Family::KendallTau};
  return {parse_family(family)};
}

}  // namespace orthopolicy
