#pragma once

// Attack losses. Each one is zero exactly when x + v is misclassified and is
// bounded to [0, 1] so it can drive multiplicative weights updates.

#include <algorithm>
#include <cmath>
#include <limits>

#include "advgame/budget.hpp"
#include "advgame/classifier.hpp"

namespace advgame {

struct LossKind {
  enum class Kind { zero_one, reverse_hinge_normalized, untargeted_reverse_hinge };

  Kind kind = Kind::zero_one;
  double budget = 0.0;    // radius used by the reverse hinge normaliser
  Norm norm = Norm::l2;   // ball the normaliser maximises over

  static LossKind zero_one() { return {Kind::zero_one, 0.0, Norm::l2}; }
  static LossKind reverse_hinge_normalized(double eps, Norm norm = Norm::l2) {
    if (!(eps > 0.0)) {
      throw InputError("reverse_hinge_normalized: budget must be > 0");
    }
    return {Kind::reverse_hinge_normalized, eps, norm};
  }
  static LossKind untargeted_reverse_hinge() {
    return {Kind::untargeted_reverse_hinge, 0.0, Norm::l2};
  }
};

// Class 0 of a canonical binary model is the +1 side.
inline int binary_sign(int label) {
  if (label == 0) return +1;
  if (label == 1) return -1;
  throw InputError("binary label must be 0 or 1, got " + std::to_string(label));
}

inline void require_label(int y, int k) {
  if (y < 0 || y >= k) {
    throw InputError("label " + std::to_string(y) + " outside [0, " +
                     std::to_string(k) + ")");
  }
}

inline double zero_one_loss(const Classifier& c, const Vector& x,
                            const Vector& v, int y) {
  return c.predict(x + v) != y ? 1.0 : 0.0;
}

// Largest raw reverse hinge over the ball of radius eps around x. For l2 it is
// reached at v = eps * y * w / ||w||; over an l-inf ball the dual norm ||w||_1
// takes the place of ||w||_2.
inline double reverse_hinge_normalizer(const Vector& w, double b,
                                       const Vector& x, int y_sign, double eps,
                                       Norm ball = Norm::l2) {
  const double norm = ball == Norm::l2 ? w.norm() : w.lpNorm<1>();
  if (!(norm > 0.0)) {
    throw DegenerateModelError("reverse hinge: weight vector has zero norm");
  }
  return std::max(y_sign * (w.dot(x) + b) + eps * norm, 0.0);
}

// max{y(<w, x+v> + b), 0}, optionally divided by its maximum over the eps-ball.
inline double reverse_hinge(const LinearClassifier& c, const Vector& x,
                            const Vector& v, int y_sign, bool normalize,
                            double eps, Norm ball = Norm::l2) {
  if (y_sign != 1 && y_sign != -1) {
    throw InputError("reverse hinge: label must be +1 or -1");
  }
  const auto [w, b] = c.binary_hyperplane();
  require_dim(x, c.dim(), "reverse_hinge");
  require_dim(v, c.dim(), "reverse_hinge");
  const double raw = std::max(y_sign * (w.dot(x + v) + b), 0.0);
  if (!normalize) return raw;
  if (!(eps > 0.0)) throw InputError("reverse hinge: budget must be > 0");
  const double scale = reverse_hinge_normalizer(w, b, x, y_sign, eps, ball);
  if (scale == 0.0) return 0.0;
  return raw / scale;
}

namespace detail {

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Logit gap z = c_y - max_{j != y} c_j and the competing class (lowest index
// among maximisers).
inline std::pair<double, int> logit_gap(const Vector& logits, int y) {
  int rival = -1;
  double best = -std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < logits.size(); ++j) {
    if (j == y) continue;
    if (rival < 0 || logits[j] > best) {
      best = logits[j];
      rival = static_cast<int>(j);
    }
  }
  return {logits[y] - best, rival};
}

}  // namespace detail

inline double untargeted_reverse_hinge_from_gap(double z) {
  return std::max(2.0 * (detail::sigmoid(z) - 0.5), 0.0);
}

inline double untargeted_reverse_hinge(const Classifier& c, const Vector& x,
                                       const Vector& v, int y) {
  require_label(y, c.num_classes());
  const auto [z, rival] = detail::logit_gap(c.logits(x + v), y);
  (void)rival;
  return untargeted_reverse_hinge_from_gap(z);
}

// Loss of a single classifier under `kind`; zero_one included.
inline double loss_value(const Classifier& c, const Vector& x, const Vector& v,
                         int y, const LossKind& kind) {
  switch (kind.kind) {
    case LossKind::Kind::zero_one:
      return zero_one_loss(c, x, v, y);
    case LossKind::Kind::reverse_hinge_normalized:
      return reverse_hinge(c.linear(), x, v, binary_sign(y), true, kind.budget,
                           kind.norm);
    case LossKind::Kind::untargeted_reverse_hinge:
      return untargeted_reverse_hinge(c, x, v, y);
  }
  throw ContractError("unknown loss kind");
}

struct ObjectiveValue {
  double value = 0.0;
  Vector gradient;
};

// f(v) = sum_i p[i] * loss_i(x + v) and its gradient in v. Inactive terms
// (loss exactly zero) contribute a zero gradient.
inline ObjectiveValue weighted_objective(const MixedStrategy& p,
                                         const ClassifierSet& set,
                                         const Vector& x, const Vector& v,
                                         int y, const LossKind& kind) {
  if (p.size() != set.size()) {
    throw InputError("weighted_objective: strategy size does not match set");
  }
  require_dim(x, set.dim(), "weighted_objective");
  require_dim(v, set.dim(), "weighted_objective");
  require_label(y, set.num_classes());

  ObjectiveValue out{0.0, Vector::Zero(set.dim())};
  const Vector xv = x + v;
  switch (kind.kind) {
    case LossKind::Kind::zero_one:
      throw ContractError("weighted_objective: 0-1 loss has no gradient");

    case LossKind::Kind::reverse_hinge_normalized: {
      if (!set.is_binary_linear()) {
        throw ContractError(
            "weighted_objective: reverse hinge needs binary linear members");
      }
      if (!(kind.budget > 0.0)) {
        throw InputError("weighted_objective: budget must be > 0");
      }
      const int s = binary_sign(y);
      for (std::size_t i = 0; i < set.size(); ++i) {
        const auto [w, b] = set[i].linear().binary_hyperplane();
        const double scale =
            reverse_hinge_normalizer(w, b, x, s, kind.budget, kind.norm);
        const double margin = s * (w.dot(xv) + b);
        if (scale == 0.0 || !(margin > 0.0)) continue;
        out.value += p[i] * margin / scale;
        out.gradient += (p[i] * s / scale) * w;
      }
      return out;
    }

    case LossKind::Kind::untargeted_reverse_hinge: {
      for (std::size_t i = 0; i < set.size(); ++i) {
        const auto& c = set[i];
        const auto [z, rival] = detail::logit_gap(c.logits(xv), y);
        if (!(z > 0.0)) continue;
        const double sig = detail::sigmoid(z);
        out.value += p[i] * 2.0 * (sig - 0.5);
        const double slope = 2.0 * sig * (1.0 - sig);
        out.gradient += (p[i] * slope) *
                        (c.logit_gradient(xv, y) - c.logit_gradient(xv, rival));
      }
      return out;
    }
  }
  throw ContractError("unknown loss kind");
}

}  // namespace advgame
