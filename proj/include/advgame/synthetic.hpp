#pragma once

// Seeded desk-scale instances: sparse least-squares linear models on Gaussian
// clusters, and small relu networks on a two-cluster task in the plane.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "advgame/bench.hpp"

namespace advgame {

struct SyntheticSpec {
  int dim = 20;
  int classes = 2;
  int classifiers = 5;
  double sparsity = 0.75;     // fraction of features hidden from each model
  int points = 100;           // evaluation points returned
  std::uint64_t seed = 0;
  double separation = 0.1;    // per-coordinate offset of each cluster centre from 0.5
  double noise = 0.1;         // per-coordinate standard deviation
  int train_points = 400;
  int max_attempts = 200;     // evaluation draws allowed per requested point

  void validate() const {
    if (dim < 1) throw InputError("SyntheticSpec: dim must be >= 1");
    if (classes < 2) throw InputError("SyntheticSpec: classes must be >= 2");
    if (classifiers < 1) throw InputError("SyntheticSpec: classifiers must be >= 1");
    if (!(sparsity >= 0.0 && sparsity < 1.0)) {
      throw InputError("SyntheticSpec: sparsity must lie in [0, 1)");
    }
    if (points < 0) throw InputError("SyntheticSpec: points must be >= 0");
    if (!(noise > 0.0)) throw InputError("SyntheticSpec: noise must be > 0");
    if (train_points < classes) {
      throw InputError("SyntheticSpec: too few training points");
    }
  }

  int zeroed_features() const {
    return static_cast<int>(std::lround(sparsity * dim));
  }
};

struct SyntheticInstance {
  ClassifierSet set;
  Dataset data;
  std::vector<std::vector<int>> active_features;  // sorted, per member
};

namespace detail {

class ClusterSampler {
 public:
  ClusterSampler(std::vector<Vector> centers, double noise)
      : centers_(std::move(centers)), noise_(noise) {}

  LabeledPoint draw(int label, std::mt19937_64& rng) const {
    std::normal_distribution<double> gauss(0.0, noise_);
    Vector x = centers_[static_cast<std::size_t>(label)];
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      x[i] = std::clamp(x[i] + gauss(rng), 0.0, 1.0);
    }
    return {std::move(x), label};
  }

 private:
  std::vector<Vector> centers_;
  double noise_;
};

// Least squares with an intercept on the given feature columns; one output per
// target column.
inline Matrix fit_least_squares(const Dataset& train,
                                const std::vector<int>& features,
                                const Matrix& targets) {
  const Eigen::Index m = static_cast<Eigen::Index>(train.size());
  const Eigen::Index a = static_cast<Eigen::Index>(features.size());
  Matrix design(m, a + 1);
  for (Eigen::Index r = 0; r < m; ++r) {
    for (Eigen::Index c = 0; c < a; ++c) {
      design(r, c) = train[static_cast<std::size_t>(r)].x[features[c]];
    }
    design(r, a) = 1.0;
  }
  return design.colPivHouseholderQr().solve(targets);  // (a + 1) x outputs
}

inline double logit_gap(const Classifier& c, const Vector& x, int y) {
  return logit_gap(c.logits(x), y).first;
}

}  // namespace detail

// Each member sees a random subset of features (the rest are zeroed before
// training) and is fit by least squares: +-1 targets for two classes, one-hot
// targets otherwise. Only points every member classifies correctly with a
// strictly positive logit gap are returned.
inline SyntheticInstance generate_synthetic_sparse_set(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const int d = spec.dim;
  const int k = spec.classes;

  std::vector<Vector> centers;
  std::bernoulli_distribution coin(0.5);
  for (int j = 0; j < k; ++j) {
    Vector c(d);
    for (int i = 0; i < d; ++i) {
      c[i] = 0.5 + (coin(rng) ? spec.separation : -spec.separation);
    }
    if (k == 2 && j == 1) c = Vector::Constant(d, 1.0) - centers[0];
    centers.push_back(std::move(c));
  }
  const detail::ClusterSampler sampler(centers, spec.noise);

  Dataset train;
  train.reserve(static_cast<std::size_t>(spec.train_points));
  for (int r = 0; r < spec.train_points; ++r) train.push_back(sampler.draw(r % k, rng));

  const int active = d - spec.zeroed_features();
  if (active < 1) throw GenerationError("synthetic set: no active features left");

  std::vector<Classifier> members;
  std::vector<std::vector<int>> active_sets;
  for (int m = 0; m < spec.classifiers; ++m) {
    std::vector<int> order(static_cast<std::size_t>(d));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<int> features(order.begin(), order.begin() + active);
    std::sort(features.begin(), features.end());

    const Eigen::Index rows = static_cast<Eigen::Index>(train.size());
    if (k == 2) {
      Matrix t(rows, 1);
      for (Eigen::Index r = 0; r < rows; ++r) {
        t(r, 0) = binary_sign(train[static_cast<std::size_t>(r)].label);
      }
      const Matrix coef = detail::fit_least_squares(train, features, t);
      Vector w = Vector::Zero(d);
      for (int c = 0; c < active; ++c) w[features[static_cast<std::size_t>(c)]] = coef(c, 0);
      members.emplace_back(LinearClassifier::binary(w, coef(active, 0)));
    } else {
      Matrix t = Matrix::Zero(rows, k);
      for (Eigen::Index r = 0; r < rows; ++r) {
        t(r, train[static_cast<std::size_t>(r)].label) = 1.0;
      }
      const Matrix coef = detail::fit_least_squares(train, features, t);
      Matrix weights = Matrix::Zero(k, d);
      Vector biases(k);
      for (int j = 0; j < k; ++j) {
        for (int c = 0; c < active; ++c) {
          weights(j, features[static_cast<std::size_t>(c)]) = coef(c, j);
        }
        biases[j] = coef(active, j);
      }
      members.emplace_back(LinearClassifier(weights, biases));
    }
    if (!members.back().logits(Vector::Zero(d)).allFinite()) {
      throw GenerationError("synthetic set: training produced non-finite weights");
    }
    active_sets.push_back(std::move(features));
  }
  ClassifierSet set(std::move(members));

  Dataset data;
  data.reserve(static_cast<std::size_t>(spec.points));
  const long budget = static_cast<long>(spec.max_attempts) * std::max(spec.points, 1);
  long draws = 0;
  while (static_cast<int>(data.size()) < spec.points) {
    if (++draws > budget) {
      throw GenerationError("synthetic set: only " + std::to_string(data.size()) +
                            " of " + std::to_string(spec.points) +
                            " points are correctly classified by every model");
    }
    LabeledPoint pt = sampler.draw(static_cast<int>(data.size()) % k, rng);
    bool ok = true;
    for (std::size_t i = 0; i < set.size() && ok; ++i) {
      ok = detail::logit_gap(set[i], pt.x, pt.label) > 0.0;
    }
    if (ok) data.push_back(std::move(pt));
  }
  return {std::move(set), std::move(data), std::move(active_sets)};
}

// Two Gaussian clusters in [0,1]^2 centred at (c, c) and (1-c, 1-c).
inline Dataset two_cluster_2d(int points, std::uint64_t seed, double center = 0.3,
                              double noise = 0.06) {
  std::mt19937_64 rng(seed);
  const detail::ClusterSampler sampler(
      {Vector::Constant(2, center), Vector::Constant(2, 1.0 - center)}, noise);
  Dataset out;
  out.reserve(static_cast<std::size_t>(std::max(points, 0)));
  for (int r = 0; r < points; ++r) out.push_back(sampler.draw(r % 2, rng));
  return out;
}

struct MlpTraining {
  int hidden = 8;
  int epochs = 200;
  double learning_rate = 0.1;
  std::vector<int> input_mask;  // input features the network may use; empty = all
  std::uint64_t seed = 0;
};

// Plain SGD on softmax cross-entropy for a single hidden relu layer.
inline MlpClassifier train_mlp(const Dataset& data, int num_classes,
                               const MlpTraining& opt) {
  if (data.empty()) throw InputError("train_mlp: empty dataset");
  const int d = static_cast<int>(data.front().x.size());
  const int h = opt.hidden;
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> init(0.0, 1.0);

  Vector mask = Vector::Ones(d);
  if (!opt.input_mask.empty()) {
    mask.setZero();
    for (int f : opt.input_mask) {
      if (f < 0 || f >= d) throw InputError("train_mlp: mask feature out of range");
      mask[f] = 1.0;
    }
  }

  Matrix w1(h, d);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < d; ++c) w1(r, c) = init(rng) * std::sqrt(2.0 / d) * mask[c];
  }
  Vector b1 = Vector::Constant(h, 0.01);
  Matrix w2(num_classes, h);
  for (int r = 0; r < num_classes; ++r) {
    for (int c = 0; c < h; ++c) w2(r, c) = init(rng) * std::sqrt(1.0 / h);
  }
  Vector b2 = Vector::Zero(num_classes);

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t idx : order) {
      const Vector& x = data[idx].x;
      const Vector pre = w1 * x + b1;
      const Vector act = pre.cwiseMax(0.0);
      Vector z = w2 * act + b2;
      z.array() -= z.maxCoeff();
      Vector prob = z.array().exp();
      prob /= prob.sum();
      Vector dz = prob;
      dz[data[idx].label] -= 1.0;
      Vector dact = w2.transpose() * dz;
      for (int r = 0; r < h; ++r) {
        if (!(pre[r] > 0.0)) dact[r] = 0.0;
      }
      w2 -= opt.learning_rate * dz * act.transpose();
      b2 -= opt.learning_rate * dz;
      w1 -= opt.learning_rate * (dact * x.transpose()) * mask.asDiagonal();
      b1 -= opt.learning_rate * dact;
    }
  }
  return MlpClassifier({DenseLayer{w1, b1, Activation::relu},
                        DenseLayer{w2, b2, Activation::identity}});
}

}  // namespace advgame
