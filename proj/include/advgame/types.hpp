#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "advgame/error.hpp"

namespace advgame {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Index of the largest entry; exact ties resolve to the lowest index.
inline int argmax_lowest(const Vector& values) {
  int best = 0;
  for (Eigen::Index j = 1; j < values.size(); ++j) {
    if (values[j] > values[best]) best = static_cast<int>(j);
  }
  return best;
}

inline bool all_finite(const Vector& v) { return v.allFinite(); }

inline void require_dim(const Vector& x, int dim, const char* what) {
  if (x.size() != dim) {
    throw InputError(std::string(what) + ": expected dimension " +
                     std::to_string(dim) + ", got " +
                     std::to_string(x.size()));
  }
}

inline Vector to_vector(const std::vector<double>& values) {
  return Eigen::Map<const Vector>(values.data(),
                                  static_cast<Eigen::Index>(values.size()));
}

inline std::vector<double> to_std(const Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

// Probability distribution over the members of a classifier set.
class MixedStrategy {
 public:
  static constexpr double kSumTolerance = 1e-12;

  MixedStrategy() = default;

  explicit MixedStrategy(std::vector<double> probs) : probs_(std::move(probs)) {
    if (probs_.empty()) throw InputError("MixedStrategy: empty distribution");
    double sum = 0.0;
    for (double p : probs_) {
      if (!std::isfinite(p) || p < 0.0) {
        throw InputError("MixedStrategy: probabilities must be finite and >= 0");
      }
      sum += p;
    }
    if (std::abs(sum - 1.0) > kSumTolerance) {
      throw InputError("MixedStrategy: probabilities sum to " +
                       std::to_string(sum) + ", expected 1");
    }
  }

  static MixedStrategy uniform(std::size_t n) {
    if (n == 0) throw InputError("MixedStrategy: empty distribution");
    return MixedStrategy(std::vector<double>(n, 1.0 / static_cast<double>(n)));
  }

  // Rescales nonnegative weights to sum to one.
  static MixedStrategy normalized(std::vector<double> weights) {
    double sum = 0.0;
    for (double w : weights) {
      if (!std::isfinite(w) || w < 0.0) {
        throw InputError("MixedStrategy: weights must be finite and >= 0");
      }
      sum += w;
    }
    if (!(sum > 0.0)) throw InputError("MixedStrategy: weights sum to zero");
    for (double& w : weights) w /= sum;
    return MixedStrategy(std::move(weights));
  }

  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  const std::vector<double>& probs() const noexcept { return probs_; }

 private:
  std::vector<double> probs_;
};

}  // namespace advgame
