#pragma once

// Independent reference computations shared by the test suites. None of these
// call into the code under test beyond predict/logits.

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "advgame/advgame.hpp"

namespace testing_support {

using advgame::Classifier;
using advgame::ClassifierSet;
using advgame::LinearClassifier;
using advgame::Matrix;
using advgame::MixedStrategy;
using advgame::Vector;

inline Vector vec(std::initializer_list<double> values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v[i++] = x;
  return v;
}

inline LinearClassifier binary(std::initializer_list<double> w, double b) {
  return LinearClassifier::binary(vec(w), b);
}

// Two axis-aligned binary models at x = (1, 1): fooling both needs norm sqrt(2).
inline ClassifierSet axis_pair() {
  return ClassifierSet({binary({1, 0}, 0), binary({0, 1}, 0)});
}

inline Vector central_difference(const std::function<double(const Vector&)>& f,
                                 const Vector& at, double h = 1e-5) {
  Vector g(at.size());
  for (Eigen::Index i = 0; i < at.size(); ++i) {
    Vector hi = at, lo = at;
    hi[i] += h;
    lo[i] -= h;
    g[i] = (f(hi) - f(lo)) / (2.0 * h);
  }
  return g;
}

inline double relative_error(const Vector& a, const Vector& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

// Expected 0-1 loss evaluated straight from predictions.
inline double direct_zero_one(const MixedStrategy& p, const ClassifierSet& set,
                              const Vector& x, const Vector& v, int y) {
  double loss = 0.0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (set[i].predict(x + v) != y) loss += p[i];
  }
  return loss;
}

// Maximum expected 0-1 loss over a polar grid of the closed l2 disc (d = 2).
inline double grid_best_loss_2d(const MixedStrategy& p, const ClassifierSet& set,
                                const Vector& x, int y, double eps,
                                int radial = 400, int angular = 2000) {
  double best = direct_zero_one(p, set, x, Vector::Zero(2), y);
  for (int r = 1; r <= radial; ++r) {
    const double rad = eps * r / radial;
    for (int a = 0; a < angular; ++a) {
      const double th = 2.0 * M_PI * a / angular;
      best = std::max(best, direct_zero_one(p, set, x, vec({rad * std::cos(th), rad * std::sin(th)}), y));
    }
  }
  return best;
}

inline Matrix random_matrix(int rows, int cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = g(rng);
  }
  return m;
}

inline Vector random_vector(int n, std::mt19937_64& rng, double scale = 1.0) {
  return random_matrix(n, 1, rng, scale).col(0);
}

inline advgame::MlpClassifier random_mlp(int d, int hidden, int k, std::mt19937_64& rng) {
  using advgame::Activation;
  using advgame::DenseLayer;
  return advgame::MlpClassifier(
      {DenseLayer{random_matrix(hidden, d, rng), random_vector(hidden, rng), Activation::relu},
       DenseLayer{random_matrix(k, hidden, rng), random_vector(k, rng), Activation::identity}});
}

// True when no relu pre-activation lies within `gap` of zero at x.
inline bool away_from_kinks(const advgame::MlpClassifier& mlp, const Vector& x, double gap) {
  Vector h = x;
  for (const auto& layer : mlp.layers()) {
    const Vector pre = layer.weights * h + layer.biases;
    if (layer.activation == advgame::Activation::relu) {
      if (pre.cwiseAbs().minCoeff() < gap) return false;
      h = pre.cwiseMax(0.0);
    } else {
      h = pre;
    }
  }
  return true;
}

inline MixedStrategy random_strategy(std::size_t n, std::mt19937_64& rng) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> w(n);
  for (double& x : w) x = e(rng);
  return MixedStrategy::normalized(w);
}

}  // namespace testing_support
