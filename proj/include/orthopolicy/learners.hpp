#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

namespace orthopolicy {

/// A fitted regression function. Rows of `x` are query points.
class Regressor {
 public:
  virtual ~Regressor() = default;
  virtual void predict(const Eigen::MatrixXd& x, std::span<double> out) const = 0;
  std::vector<double> predict(const Eigen::MatrixXd& x) const;
};

/// Regression learner: fit(features, targets) -> fitted model.
class Learner {
 public:
  virtual ~Learner() = default;
  virtual std::unique_ptr<Regressor> fit(const Eigen::MatrixXd& x, std::span<const double> y) const = 0;
  virtual std::string name() const = 0;
};

enum class LearnerKind { Kernel, Knn, Forest };

struct LearnerSpec {
  LearnerKind kind = LearnerKind::Kernel;
  /// Kernel: bandwidth in units of each feature's standard deviation
  /// (0 = Silverman's rule of thumb).
  double bandwidth = 0.0;
  /// kNN: neighbours (0 = ceil(sqrt(ceil(n^(2/3))))).
  std::size_t k = 0;
  /// Forest: number of bagged trees, minimum leaf size, maximum depth.
  std::size_t trees = 50;
  std::size_t min_leaf = 5;
  std::size_t max_depth = 20;
  std::uint64_t seed = 1;

  static LearnerSpec from_json(const nlohmann::json& j, LearnerSpec defaults);
  static LearnerSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

LearnerKind parse_learner_kind(const std::string& s);
std::string to_string(LearnerKind kind);

std::unique_ptr<Learner> make_learner(const LearnerSpec& spec);

/// Nadaraya-Watson regression with a Gaussian product kernel.
class KernelRegression final : public Learner {
 public:
  explicit KernelRegression(double bandwidth = 0.0) : bandwidth_(bandwidth) {}
  std::unique_ptr<Regressor> fit(const Eigen::MatrixXd& x, std::span<const double> y) const override;
  std::string name() const override { return "kernel"; }

  /// Per-dimension bandwidths used for a training sample of this shape.
  static Eigen::VectorXd silverman_bandwidths(const Eigen::MatrixXd& x);

 private:
  double bandwidth_;
};

/// k-nearest-neighbour average on standardised features; ties broken by
/// training index.
class NearestNeighbors final : public Learner {
 public:
  explicit NearestNeighbors(std::size_t k = 0) : k_(k) {}
  std::unique_ptr<Regressor> fit(const Eigen::MatrixXd& x, std::span<const double> y) const override;
  std::string name() const override { return "knn"; }
  static std::size_t default_k(std::size_t n);

 private:
  std::size_t k_;
};

/// Bagged CART regression trees on quantile-binned features.
class BaggedTrees final : public Learner {
 public:
  BaggedTrees(std::size_t trees, std::size_t min_leaf, std::size_t max_depth, std::uint64_t seed)
      : trees_(trees), min_leaf_(min_leaf), max_depth_(max_depth), seed_(seed) {}
  std::unique_ptr<Regressor> fit(const Eigen::MatrixXd& x, std::span<const double> y) const override;
  std::string name() const override { return "forest"; }

 private:
  std::size_t trees_;
  std::size_t min_leaf_;
  std::size_t max_depth_;
  std::uint64_t seed_;
};

}  // namespace orthopolicy
