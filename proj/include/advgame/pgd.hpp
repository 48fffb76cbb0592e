#pragma once

// Approximate best responses by projected gradient descent on a weighted sum
// of reverse hinge losses. The iteration is
//
//   v_{t+1} = Proj(v_t - eta * grad f(v_t) / ||grad f(v_t)||_2),  eta = 1.25 eps / T
//
// started from v_0 = 0, followed by optional clipping of x + v to [0,1]^d.

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "advgame/budget.hpp"
#include "advgame/losses.hpp"

namespace advgame {

struct PgdConfig {
  int iterations = 40;
  AttackBudget budget{Norm::l2, 1.0};
  bool pixel_box = false;
  bool early_stop_at_zero = true;
  std::optional<double> step;  // overrides 1.25 eps / T

  double step_size() const {
    if (step) return *step;
    return 1.25 * budget.eps / static_cast<double>(iterations);
  }

  // T = ceil(eps^2 / delta^2) (at most `cap`) with step eps / sqrt(T): the
  // schedule under which the best iterate is within delta of the optimum of
  // the normalised reverse hinge objective.
  static PgdConfig certified(const AttackBudget& budget, double delta,
                             int cap = 100000) {
    if (!(delta > 0.0)) throw InputError("PgdConfig: delta must be > 0");
    PgdConfig cfg;
    cfg.budget = budget;
    const double t = std::ceil(budget.eps * budget.eps / (delta * delta));
    cfg.iterations = static_cast<int>(std::clamp(t, 1.0, static_cast<double>(cap)));
    cfg.step = budget.eps / std::sqrt(static_cast<double>(cfg.iterations));
    return cfg;
  }

  void validate() const {
    if (iterations < 1) throw InputError("PgdConfig: iterations must be >= 1");
    if (!(budget.eps > 0.0)) throw InputError("PgdConfig: eps must be > 0");
    if (!(step_size() > 0.0)) throw InputError("PgdConfig: step must be > 0");
  }
};

// Euclidean projection onto the budget ball (radial scaling for l2, clamping
// for l-inf).
inline Vector project(const Vector& v, const AttackBudget& budget) {
  if (budget.norm == Norm::l2) {
    const double norm = v.norm();
    if (norm <= budget.eps) return v;
    return v * (budget.eps / norm);
  }
  return v.cwiseMax(-budget.eps).cwiseMin(budget.eps);
}

inline void require_unit_box(const Vector& x) {
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (!(x[i] >= 0.0 && x[i] <= 1.0)) {
      throw InputError("point coordinate " + std::to_string(i) +
                       " lies outside [0, 1]");
    }
  }
}

// v'_i = clamp(x_i + v_i, 0, 1) - x_i.
inline Vector clip_to_pixel_box(const Vector& x, const Vector& v) {
  require_dim(v, static_cast<int>(x.size()), "clip_to_pixel_box");
  require_unit_box(x);
  return (x + v).cwiseMax(0.0).cwiseMin(1.0) - x;
}

struct PgdResult {
  Vector v;                   // best iterate by objective value
  double objective = 0.0;
  std::vector<double> trace;  // objective of every evaluated iterate, v_0 first
};

inline PgdResult pgd_best_response(const MixedStrategy& p,
                                   const ClassifierSet& set, const Vector& x,
                                   int y, const PgdConfig& cfg,
                                   const LossKind& kind) {
  cfg.validate();
  if (kind.kind == LossKind::Kind::zero_one) {
    throw ContractError("pgd_best_response: 0-1 loss is not differentiable");
  }
  if (cfg.pixel_box) require_unit_box(x);

  const double eta = cfg.step_size();
  Vector v = Vector::Zero(set.dim());
  ObjectiveValue f = weighted_objective(p, set, x, v, y, kind);

  PgdResult out{v, f.value, {f.value}};
  out.trace.reserve(static_cast<std::size_t>(cfg.iterations) + 1);

  for (int t = 0; t < cfg.iterations; ++t) {
    const double gnorm = f.gradient.norm();
    if (!(gnorm > 0.0)) {
      if (cfg.early_stop_at_zero) break;
      out.trace.push_back(f.value);
      continue;
    }
    v = project(v - (eta / gnorm) * f.gradient, cfg.budget);
    if (cfg.pixel_box) v = clip_to_pixel_box(x, v);
    if (!cfg.budget.admits(v)) {
      throw ContractError("pgd_best_response: iterate left the budget ball");
    }
    f = weighted_objective(p, set, x, v, y, kind);
    out.trace.push_back(f.value);
    if (f.value < out.objective) {
      out.objective = f.value;
      out.v = v;
    }
  }
  return out;
}

}  // namespace advgame
