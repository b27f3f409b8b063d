#include "orthopolicy/learners.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "json.hpp"

#include "orthopolicy/error.hpp"
#include "orthopolicy/parallel.hpp"
#include "orthopolicy/rng.hpp"

namespace orthopolicy {

std::vector<double> Regressor::predict(const Eigen::MatrixXd& x) const {
  std::vector<double> out(static_cast<std::size_t>(x.rows()));
  predict(x, out);
  return out;
}

LearnerKind parse_learner_kind(const std::string& s) {
  if (s == "kernel") return LearnerKind::Kernel;
  if (s == "knn") return LearnerKind::Knn;
  if (s == "forest") return LearnerKind::Forest;
  throw ConfigError("unknown learner '" + s + "' (expected kernel, knn or forest)");
}

std::string to_string(LearnerKind kind) {
  switch (kind) {
    case LearnerKind::Kernel: return "kernel";
    case LearnerKind::Knn: return "knn";
    case LearnerKind::Forest: return "forest";
  }
  return "kernel";
}

LearnerSpec LearnerSpec::from_json(const nlohmann::json& j, LearnerSpec s) {
  try {
    if (j.contains("kind")) s.kind = parse_learner_kind(j.at("kind").get<std::string>());
    if (j.contains("bandwidth")) s.bandwidth = j.at("bandwidth").get<double>();
    if (j.contains("k")) s.k = j.at("k").get<std::size_t>();
    if (j.contains("trees")) s.trees = j.at("trees").get<std::size_t>();
    if (j.contains("min_leaf")) s.min_leaf = j.at("min_leaf").get<std::size_t>();
    if (j.contains("max_depth")) s.max_depth = j.at("max_depth").get<std::size_t>();
    if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("learner settings: ") + e.what());
  }
  if (s.bandwidth < 0.0) throw ConfigError("bandwidth must be >= 0");
  if (s.trees == 0 || s.min_leaf == 0 || s.max_depth == 0) throw ConfigError("forest settings must be positive");
  return s;
}

nlohmann::json LearnerSpec::to_json() const {
  return {{"kind", to_string(kind)}, {"bandwidth", bandwidth}, {"k", k},       {"trees", trees},
          {"min_leaf", min_leaf},    {"max_depth", max_depth}, {"seed", seed}};
}

std::unique_ptr<Learner> make_learner(const LearnerSpec& spec) {
  switch (spec.kind) {
    case LearnerKind::Kernel: return std::make_unique<KernelRegression>(spec.bandwidth);
    case LearnerKind::Knn: return std::make_unique<NearestNeighbors>(spec.k);
    case LearnerKind::Forest:
      return std::make_unique<BaggedTrees>(spec.trees, spec.min_leaf, spec.max_depth, spec.seed);
  }
  throw ConfigError("unknown learner kind");
}

namespace {

void check_training(const Eigen::MatrixXd& x, std::span<const double> y) {
  if (x.rows() == 0) throw EstimationError("cannot fit a regression on an empty training set");
  if (static_cast<std::size_t>(x.rows()) != y.size()) throw ArgumentError("features and targets differ in length");
}

Eigen::VectorXd column_sd(const Eigen::MatrixXd& x) {
  Eigen::VectorXd sd(x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const double mean = x.col(c).mean();
    const double var = x.rows() > 1 ? (x.col(c).array() - mean).square().sum() / static_cast<double>(x.rows() - 1)
                                     : 0.0;
    sd(c) = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  return sd;
}

// Row-major copy of x with each column divided by scale.
std::vector<double> scaled_rows(const Eigen::MatrixXd& x, const Eigen::VectorXd& scale,
                                const Eigen::VectorXd* centre = nullptr) {
  const auto rows = static_cast<std::size_t>(x.rows());
  const auto cols = static_cast<std::size_t>(x.cols());
  std::vector<double> out(rows * cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      const double shift = centre ? (*centre)(static_cast<Eigen::Index>(c)) : 0.0;
      out[r * cols + c] = (x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) - shift) /
                          scale(static_cast<Eigen::Index>(c));
    }
  return out;
}

constexpr std::size_t kPredictChunk = 256;

class KernelModel final : public Regressor {
 public:
  KernelModel(std::vector<double> train, std::vector<double> y, Eigen::VectorXd h, std::size_t dims)
      : train_(std::move(train)), y_(std::move(y)), h_(std::move(h)), dims_(dims) {}

  void predict(const Eigen::MatrixXd& x, std::span<double> out) const override {
    if (static_cast<std::size_t>(x.cols()) != dims_) throw ArgumentError("kernel regression: dimension mismatch");
    const auto q = scaled_rows(x, h_);
    const std::size_t m = y_.size();
    const std::size_t rows = static_cast<std::size_t>(x.rows());
    const std::size_t chunks = (rows + kPredictChunk - 1) / kPredictChunk;
    parallel_for(chunks, [&](std::size_t chunk) {
      std::vector<double> expo(m);
      const std::size_t end = std::min(rows, (chunk + 1) * kPredictChunk);
      for (std::size_t r = chunk * kPredictChunk; r < end; ++r) {
        const double* qr = &q[r * dims_];
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < m; ++k) {
          const double* tk = &train_[k * dims_];
          double d2 = 0.0;
          for (std::size_t d = 0; d < dims_; ++d) {
            const double diff = qr[d] - tk[d];
            d2 += diff * diff;
          }
          expo[k] = -0.5 * d2;
          best = std::max(best, expo[k]);
        }
        double num = 0.0, den = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
          const double w = std::exp(expo[k] - best);
          num += w * y_[k];
          den += w;
        }
        out[r] = num / den;
      }
    });
  }

 private:
  std::vector<double> train_;
  std::vector<double> y_;
  Eigen::VectorXd h_;
  std::size_t dims_;
};

class KnnModel final : public Regressor {
 public:
  KnnModel(std::vector<double> train, std::vector<double> y, Eigen::VectorXd centre, Eigen::VectorXd scale,
           std::size_t dims, std::size_t k)
      : train_(std::move(train)),
        y_(std::move(y)),
        centre_(std::move(centre)),
        scale_(std::move(scale)),
        dims_(dims),
        k_(k) {}

  void predict(const Eigen::MatrixXd& x, std::span<double> out) const override {
    if (static_cast<std::size_t>(x.cols()) != dims_) throw ArgumentError("knn: dimension mismatch");
    const auto q = scaled_rows(x, scale_, &centre_);
    const std::size_t m = y_.size();
    const std::size_t rows = static_cast<std::size_t>(x.rows());
    const std::size_t chunks = (rows + kPredictChunk - 1) / kPredictChunk;
    parallel_for(chunks, [&](std::size_t chunk) {
      std::vector<std::pair<double, std::size_t>> dist(m);
      const std::size_t end = std::min(rows, (chunk + 1) * kPredictChunk);
      for (std::size_t r = chunk * kPredictChunk; r < end; ++r) {
        const double* qr = &q[r * dims_];
        for (std::size_t k = 0; k < m; ++k) {
          const double* tk = &train_[k * dims_];
          double d2 = 0.0;
          for (std::size_t d = 0; d < dims_; ++d) {
            const double diff = qr[d] - tk[d];
            d2 += diff * diff;
          }
          dist[k] = {d2, k};
        }
        auto kth = dist.begin() + static_cast<std::ptrdiff_t>(k_);
        std::nth_element(dist.begin(), kth - 1, dist.end());
        double s = 0.0;
        for (auto it = dist.begin(); it != kth; ++it) s += y_[it->second];
        out[r] = s / static_cast<double>(k_);
      }
    });
  }

 private:
  std::vector<double> train_;
  std::vector<double> y_;
  Eigen::VectorXd centre_;
  Eigen::VectorXd scale_;
  std::size_t dims_;
  std::size_t k_;
};

}  // namespace

Eigen::VectorXd KernelRegression::silverman_bandwidths(const Eigen::MatrixXd& x) {
  const auto d = static_cast<double>(x.cols());
  const auto n = static_cast<double>(x.rows());
  const double factor = std::pow(4.0 / ((d + 2.0) * n), 1.0 / (d + 4.0));
  return column_sd(x) * factor;
}

std::unique_ptr<Regressor> KernelRegression::fit(const Eigen::MatrixXd& x, std::span<const double> y) const {
  check_training(x, y);
  Eigen::VectorXd h = bandwidth_ > 0.0 ? Eigen::VectorXd(column_sd(x) * bandwidth_) : silverman_bandwidths(x);
  auto train = scaled_rows(x, h);
  return std::make_unique<KernelModel>(std::move(train), std::vector<double>(y.begin(), y.end()), std::move(h),
                                       static_cast<std::size_t>(x.cols()));
}

std::size_t NearestNeighbors::default_k(std::size_t n) {
  const double inner = std::ceil(std::pow(static_cast<double>(n), 2.0 / 3.0));
  return static_cast<std::size_t>(std::ceil(std::sqrt(inner)));
}

std::unique_ptr<Regressor> NearestNeighbors::fit(const Eigen::MatrixXd& x, std::span<const double> y) const {
  check_training(x, y);
  const std::size_t m = y.size();
  const std::size_t k = std::clamp<std::size_t>(k_ == 0 ? default_k(m) : k_, 1, m);
  Eigen::VectorXd centre = x.colwise().mean().transpose();
  Eigen::VectorXd scale = column_sd(x);
  auto train = scaled_rows(x, scale, &centre);
  return std::make_unique<KnnModel>(std::move(train), std::vector<double>(y.begin(), y.end()), std::move(centre),
                                    std::move(scale), static_cast<std::size_t>(x.cols()), k);
}

// ---------------------------------------------------------------------------
// Bagged trees

namespace {

constexpr std::size_t kMaxBins = 64;

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  std::uint8_t bin = 0;
  double threshold = 0.0;
  std::uint32_t left = 0;
  std::uint32_t right = 0;
  double value = 0.0;
};

struct BinnedFeatures {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::vector<double>> edges;  // per feature; bin b holds edges[b-1] < x <= edges[b]
  std::vector<std::uint8_t> bins;          // row-major
};

BinnedFeatures bin_features(const Eigen::MatrixXd& x) {
  BinnedFeatures b;
  b.rows = static_cast<std::size_t>(x.rows());
  b.cols = static_cast<std::size_t>(x.cols());
  b.edges.resize(b.cols);
  b.bins.resize(b.rows * b.cols);
  std::vector<double> v(b.rows);
  for (std::size_t c = 0; c < b.cols; ++c) {
    for (std::size_t r = 0; r < b.rows; ++r) v[r] = x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    std::sort(v.begin(), v.end());
    std::vector<double> uniq = v;
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    auto& e = b.edges[c];
    if (uniq.size() <= kMaxBins) {
      for (std::size_t i = 0; i + 1 < uniq.size(); ++i) e.push_back(0.5 * (uniq[i] + uniq[i + 1]));
    } else {
      for (std::size_t q = 1; q < kMaxBins; ++q) {
        const std::size_t pos = q * (b.rows - 1) / kMaxBins;
        const double lo = v[pos];
        auto next = std::upper_bound(v.begin(), v.end(), lo);
        if (next == v.end()) break;
        const double edge = 0.5 * (lo + *next);
        if (e.empty() || edge > e.back()) e.push_back(edge);
      }
    }
    for (std::size_t r = 0; r < b.rows; ++r) {
      const double xv = x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
      b.bins[r * b.cols + c] =
          static_cast<std::uint8_t>(std::lower_bound(e.begin(), e.end(), xv) - e.begin());
    }
  }
  return b;
}

class TreeBuilder {
 public:
  TreeBuilder(const BinnedFeatures& data, std::span<const double> y, std::size_t min_leaf, std::size_t max_depth)
      : data_(data), y_(y), min_leaf_(min_leaf), max_depth_(max_depth) {}

  std::vector<TreeNode> build(std::vector<std::uint32_t> sample) {
    nodes_.clear();
    nodes_.emplace_back();
    grow(0, sample, 0, sample.size(), 0);
    return std::move(nodes_);
  }

 private:
  void grow(std::size_t node, std::vector<std::uint32_t>& idx, std::size_t lo, std::size_t hi, std::size_t depth) {
    const std::size_t count = hi - lo;
    double sum = 0.0;
    for (std::size_t i = lo; i < hi; ++i) sum += y_[idx[i]];
    nodes_[node].value = sum / static_cast<double>(count);
    if (depth >= max_depth_ || count < 2 * min_leaf_) return;

    double best_gain = 1e-12 * (std::abs(sum) + 1.0);
    int best_feature = -1;
    std::size_t best_bin = 0;
    std::array<double, kMaxBins> bin_sum{};
    std::array<std::size_t, kMaxBins> bin_count{};
    const double parent = sum * sum / static_cast<double>(count);
    for (std::size_t f = 0; f < data_.cols; ++f) {
      const std::size_t nb = data_.edges[f].size() + 1;
      if (nb < 2) continue;
      std::fill_n(bin_sum.begin(), nb, 0.0);
      std::fill_n(bin_count.begin(), nb, 0);
      for (std::size_t i = lo; i < hi; ++i) {
        const auto b = data_.bins[idx[i] * data_.cols + f];
        bin_sum[b] += y_[idx[i]];
        ++bin_count[b];
      }
      double left_sum = 0.0;
      std::size_t left_count = 0;
      for (std::size_t b = 0; b + 1 < nb; ++b) {
        left_sum += bin_sum[b];
        left_count += bin_count[b];
        if (left_count < min_leaf_) continue;
        const std::size_t right_count = count - left_count;
        if (right_count < min_leaf_) break;
        const double right_sum = sum - left_sum;
        const double gain = left_sum * left_sum / static_cast<double>(left_count) +
                            right_sum * right_sum / static_cast<double>(right_count) - parent;
        if (gain > best_gain) {
          best_gain = gain;
          best_feature = static_cast<int>(f);
          best_bin = b;
        }
      }
    }
    if (best_feature < 0) return;

    const auto f = static_cast<std::size_t>(best_feature);
    auto mid_it = std::partition(idx.begin() + static_cast<std::ptrdiff_t>(lo),
                                 idx.begin() + static_cast<std::ptrdiff_t>(hi),
                                 [&](std::uint32_t r) { return data_.bins[r * data_.cols + f] <= best_bin; });
    const auto mid = static_cast<std::size_t>(mid_it - idx.begin());
    const auto left = static_cast<std::uint32_t>(nodes_.size());
    nodes_.emplace_back();
    nodes_.emplace_back();
    nodes_[node].feature = best_feature;
    nodes_[node].bin = static_cast<std::uint8_t>(best_bin);
    nodes_[node].threshold = data_.edges[f][best_bin];
    nodes_[node].left = left;
    nodes_[node].right = left + 1;
    grow(left, idx, lo, mid, depth + 1);
    grow(left + 1, idx, mid, hi, depth + 1);
  }

  const BinnedFeatures& data_;
  std::span<const double> y_;
  std::size_t min_leaf_;
  std::size_t max_depth_;
  std::vector<TreeNode> nodes_;
};

class ForestModel final : public Regressor {
 public:
  ForestModel(std::vector<std::vector<TreeNode>> trees, std::size_t dims) : trees_(std::move(trees)), dims_(dims) {}

  void predict(const Eigen::MatrixXd& x, std::span<double> out) const override {
    if (static_cast<std::size_t>(x.cols()) != dims_) throw ArgumentError("forest: dimension mismatch");
    const std::size_t rows = static_cast<std::size_t>(x.rows());
    const std::size_t chunks = (rows + 1023) / 1024;
    parallel_for(chunks, [&](std::size_t chunk) {
      const std::size_t end = std::min(rows, (chunk + 1) * 1024);
      std::vector<double> q(dims_);
      for (std::size_t r = chunk * 1024; r < end; ++r) {
        for (std::size_t d = 0; d < dims_; ++d) q[d] = x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(d));
        double s = 0.0;
        for (const auto& tree : trees_) {
          std::size_t node = 0;
          while (tree[node].feature >= 0) {
            const auto& nd = tree[node];
            node = q[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right;
          }
          s += tree[node].value;
        }
        out[r] = s / static_cast<double>(trees_.size());
      }
    });
  }

 private:
  std::vector<std::vector<TreeNode>> trees_;
  std::size_t dims_;
};

}  // namespace

std::unique_ptr<Regressor> BaggedTrees::fit(const Eigen::MatrixXd& x, std::span<const double> y) const {
  check_training(x, y);
  const auto binned = bin_features(x);
  const std::size_t n = y.size();
  std::vector<std::vector<TreeNode>> trees(trees_);
  parallel_for(trees_, [&](std::size_t t) {
    Rng rng(derive_seed(seed_, {t, n}));
    std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(n - 1));
    std::vector<std::uint32_t> sample(n);
    for (auto& s : sample) s = pick(rng);
    TreeBuilder builder(binned, y, min_leaf_, max_depth_);
    trees[t] = builder.build(std::move(sample));
  });
  return std::make_unique<ForestModel>(std::move(trees), static_cast<std::size_t>(x.cols()));
}

}  // namespace orthopolicy

namespace orthopolicy {
LearnerSpec LearnerSpec::from_json(const nlohmann::json& j) { return from_json(j, LearnerSpec{}); }
}  // namespace orthopolicy
