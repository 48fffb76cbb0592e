#pragma once

// The learner/adversary zero-sum game on a single point (x, y).
//
// The learner mixes over classifiers, the adversary over budget-bounded noise
// vectors, and the payoff is the learner's expected loss. Multiplicative
// weights on the learner side, paired with a best-response oracle for the
// adversary, yields approximately optimal randomized attacks.

#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "advgame/geometry.hpp"
#include "advgame/pgd.hpp"

namespace advgame {

enum class PayoffKind {
  zero_one,          // M_{0-1} = E[l_{0-1}]
  reverse_hinge,     // M_r    = 1 - E[normalised l_r]   (binary linear sets)
  untargeted_hinge,  // M_ut   = 1 - E[l_ut]
};

inline const char* to_string(PayoffKind kind) {
  switch (kind) {
    case PayoffKind::zero_one: return "M01";
    case PayoffKind::reverse_hinge: return "Mr";
    case PayoffKind::untargeted_hinge: return "Mut";
  }
  return "?";
}

enum class OracleKind { exact, pgd };

// A finite distribution over deterministic noise vectors.
class RandomizedAttack {
 public:
  RandomizedAttack() = default;
  RandomizedAttack(std::vector<Vector> vectors, MixedStrategy probs)
      : vectors_(std::move(vectors)), probs_(std::move(probs)) {
    if (vectors_.size() != probs_.size()) {
      throw InputError("RandomizedAttack: " + std::to_string(vectors_.size()) +
                       " vectors but " + std::to_string(probs_.size()) +
                       " probabilities");
    }
  }

  static RandomizedAttack deterministic(Vector v) {
    return RandomizedAttack({std::move(v)}, MixedStrategy({1.0}));
  }

  // Uniform over the given atoms; duplicates are kept as separate atoms.
  static RandomizedAttack uniform(std::vector<Vector> vectors) {
    const std::size_t t = vectors.size();
    return RandomizedAttack(std::move(vectors), MixedStrategy::uniform(t));
  }

  std::size_t size() const { return vectors_.size(); }
  const std::vector<Vector>& vectors() const { return vectors_; }
  const MixedStrategy& probs() const { return probs_; }

  void validate(const AttackBudget& budget) const {
    for (std::size_t j = 0; j < vectors_.size(); ++j) {
      if (!budget.admits(vectors_[j])) {
        throw ContractError("RandomizedAttack: atom " + std::to_string(j) +
                            " has norm " +
                            std::to_string(budget.measure(vectors_[j])) +
                            " > eps " + std::to_string(budget.eps));
      }
    }
  }

 private:
  std::vector<Vector> vectors_;
  MixedStrategy probs_;
};

// Payoffs of the game played on one point. Every expectation is an exact sum
// over atoms.
class Game {
 public:
  Game(const ClassifierSet& set, Vector x, int y, PayoffKind kind,
       AttackBudget budget)
      : set_(&set), x_(std::move(x)), y_(y), kind_(kind), budget_(budget) {
    require_dim(x_, set.dim(), "Game");
    require_label(y_, set.num_classes());
    if (kind_ == PayoffKind::reverse_hinge && !set.is_binary_linear()) {
      throw ContractError("Mr payoff needs a binary linear set");
    }
  }

  const ClassifierSet& set() const { return *set_; }
  const Vector& x() const { return x_; }
  int label() const { return y_; }
  PayoffKind kind() const { return kind_; }
  const AttackBudget& budget() const { return budget_; }

  // M(c_i, v).
  double payoff(std::size_t i, const Vector& v) const {
    const Classifier& c = (*set_)[i];
    switch (kind_) {
      case PayoffKind::zero_one:
        return zero_one_loss(c, x_, v, y_);
      case PayoffKind::reverse_hinge:
        return 1.0 - reverse_hinge(c.linear(), x_, v, binary_sign(y_), true,
                                   budget_.eps, budget_.norm);
      case PayoffKind::untargeted_hinge:
        return 1.0 - untargeted_reverse_hinge(c, x_, v, y_);
    }
    throw ContractError("unknown payoff kind");
  }

  // M(c_i, v) for every member.
  std::vector<double> payoffs(const Vector& v) const {
    std::vector<double> out(set_->size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = payoff(i, v);
    return out;
  }

  double payoff(const MixedStrategy& p, const Vector& v) const {
    check_strategy(p);
    double total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (p[i] != 0.0) total += p[i] * payoff(i, v);
    }
    return total;
  }

  double payoff(std::size_t i, const RandomizedAttack& q) const {
    q.validate(budget_);
    double total = 0.0;
    for (std::size_t j = 0; j < q.size(); ++j) {
      total += q.probs()[j] * payoff(i, q.vectors()[j]);
    }
    return total;
  }

  double payoff(const MixedStrategy& p, const RandomizedAttack& q) const {
    check_strategy(p);
    q.validate(budget_);
    double total = 0.0;
    for (std::size_t j = 0; j < q.size(); ++j) {
      total += q.probs()[j] * payoff(p, q.vectors()[j]);
    }
    return total;
  }

 private:
  void check_strategy(const MixedStrategy& p) const {
    if (p.size() != set_->size()) {
      throw InputError("learner strategy has " + std::to_string(p.size()) +
                       " entries for " + std::to_string(set_->size()) +
                       " classifiers");
    }
  }

  const ClassifierSet* set_;
  Vector x_;
  int y_;
  PayoffKind kind_;
  AttackBudget budget_;
};

struct MwuConfig {
  int rounds = 30;
  std::optional<double> beta;  // default sqrt(ln n / T), capped at 1/2
  OracleKind oracle = OracleKind::exact;
  PayoffKind payoff = PayoffKind::zero_one;
  AttackBudget budget{Norm::l2, 1.0};
  GeometryConfig geometry;
  int pgd_iterations = 40;
  bool pixel_box = false;
  std::uint64_t seed = 0;

  double resolved_beta(std::size_t n) const {
    if (beta) return *beta;
    if (n <= 1) return 0.5;
    return std::min(0.5, std::sqrt(std::log(static_cast<double>(n)) /
                                   static_cast<double>(rounds)));
  }

  void validate(std::size_t n) const {
    if (rounds < 1) throw InputError("MwuConfig: rounds must be >= 1");
    const double b = resolved_beta(n);
    if (!(b > 0.0 && b <= 0.5)) {
      throw InputError("MwuConfig: beta must lie in (0, 1/2]");
    }
    geometry.validate();
  }
};

// T = ceil(4 ln n / delta^2) and beta = delta / 2, the schedule under which the
// averaged strategies are delta-optimal.
struct CertifiedSchedule {
  int rounds;
  double beta;
};

inline CertifiedSchedule certified_schedule(std::size_t n, double delta) {
  if (!(delta > 0.0 && delta <= 1.0)) {
    throw InputError("certified_schedule: delta must lie in (0, 1]");
  }
  const double ln_n = std::log(static_cast<double>(std::max<std::size_t>(n, 2)));
  return {static_cast<int>(std::ceil(4.0 * ln_n / (delta * delta))), delta / 2.0};
}

using BestResponseOracle = std::function<Vector(const MixedStrategy&)>;

// Loss PGD descends for a given payoff: normalised reverse hinge for binary
// linear sets under M_r (or M_01), the untargeted hinge otherwise.
inline LossKind pgd_loss_for(const ClassifierSet& set, const MwuConfig& cfg) {
  switch (cfg.payoff) {
    case PayoffKind::reverse_hinge:
      return LossKind::reverse_hinge_normalized(cfg.budget.eps, cfg.budget.norm);
    case PayoffKind::untargeted_hinge:
      return LossKind::untargeted_reverse_hinge();
    case PayoffKind::zero_one:
      return set.is_binary_linear()
                 ? LossKind::reverse_hinge_normalized(cfg.budget.eps,
                                                      cfg.budget.norm)
                 : LossKind::untargeted_reverse_hinge();
  }
  throw ContractError("unknown payoff kind");
}

inline PgdConfig pgd_config_for(const MwuConfig& cfg) {
  PgdConfig pgd;
  pgd.iterations = cfg.pgd_iterations;
  pgd.budget = cfg.budget;
  pgd.pixel_box = cfg.pixel_box;
  return pgd;
}

inline GeometryConfig geometry_config_for(const MwuConfig& cfg, int dim) {
  GeometryConfig geo = cfg.geometry;
  if (cfg.pixel_box && !geo.box) geo.box = Box::unit(dim);
  return geo;
}

// Builds the configured best-response oracle for one point.
inline BestResponseOracle make_oracle(const ClassifierSet& set, const Vector& x,
                                      int y, const MwuConfig& cfg) {
  if (cfg.oracle == OracleKind::exact) {
    if (!set.all_linear()) {
      throw ConfigError("exact oracle requires every classifier to be linear");
    }
    auto oracle = std::make_shared<ExactOracle>(
        set, x, y, geometry_config_for(cfg, set.dim()));
    const AttackBudget budget = cfg.budget;
    return [oracle, budget](const MixedStrategy& p) {
      return oracle->best_response(p, budget).v;
    };
  }
  const LossKind loss = pgd_loss_for(set, cfg);
  const PgdConfig pgd = pgd_config_for(cfg);
  return [&set, x, y, pgd, loss](const MixedStrategy& p) {
    return pgd_best_response(p, set, x, y, pgd, loss).v;
  };
}

struct GameTrace {
  std::vector<MixedStrategy> strategies;  // p_1 .. p_T
  std::vector<Vector> attacks;            // v_1 .. v_T
  std::vector<double> round_payoffs;      // M(p_t, v_t)
  MixedStrategy p_star;                   // (1/T) sum_t p_t
  RandomizedAttack q_star;                // uniform over v_1 .. v_T
  double value_estimate = 0.0;            // (1/T) sum_t M(p_t, v_t)
};

namespace detail {

[[noreturn]] inline void rethrow_with_round(int round) {
  const std::string prefix = "round " + std::to_string(round) + ": ";
  try {
    throw;
  } catch (const EnumerationCapError& e) {
    throw EnumerationCapError(e.cap(), prefix + e.what());
  } catch (const ContractError& e) {
    throw ContractError(prefix + e.what());
  } catch (const InputError& e) {
    throw InputError(prefix + e.what());
  } catch (const DegenerateModelError& e) {
    throw DegenerateModelError(prefix + e.what());
  } catch (const Error& e) {
    throw Error(prefix + e.what());
  }
}

}  // namespace detail

// Multiplicative weights for the learner against a best-responding adversary:
// p_{t+1}[i] proportional to p_t[i] * (1 - beta)^{M(c_i, v_t)}.
inline GameTrace mwu_attack(const ClassifierSet& set, const Vector& x, int y,
                            const MwuConfig& cfg,
                            const BestResponseOracle& oracle) {
  cfg.validate(set.size());
  const Game game(set, x, y, cfg.payoff, cfg.budget);
  const double beta = cfg.resolved_beta(set.size());
  const std::size_t n = set.size();

  GameTrace trace;
  trace.strategies.reserve(static_cast<std::size_t>(cfg.rounds));
  trace.attacks.reserve(static_cast<std::size_t>(cfg.rounds));

  MixedStrategy p = MixedStrategy::uniform(n);
  std::vector<double> p_sum(n, 0.0);
  double payoff_sum = 0.0;
  for (int t = 1; t <= cfg.rounds; ++t) {
    Vector v;
    try {
      v = oracle(p);
    } catch (const Error&) {
      detail::rethrow_with_round(t);
    }
    if (!cfg.budget.admits(v)) {
      throw ContractError("round " + std::to_string(t) +
                          ": oracle returned a vector outside the budget");
    }
    const std::vector<double> losses = game.payoffs(v);
    double round_payoff = 0.0;
    std::vector<double> next(n);
    for (std::size_t i = 0; i < n; ++i) {
      round_payoff += p[i] * losses[i];
      p_sum[i] += p[i];
      next[i] = p[i] * std::pow(1.0 - beta, losses[i]);
    }
    payoff_sum += round_payoff;
    trace.strategies.push_back(p);
    trace.attacks.push_back(std::move(v));
    trace.round_payoffs.push_back(round_payoff);
    p = MixedStrategy::normalized(std::move(next));
  }

  trace.p_star = MixedStrategy::normalized(std::move(p_sum));
  trace.q_star = RandomizedAttack::uniform(trace.attacks);
  trace.value_estimate = payoff_sum / static_cast<double>(cfg.rounds);
  return trace;
}

inline GameTrace mwu_attack(const ClassifierSet& set, const Vector& x, int y,
                            const MwuConfig& cfg) {
  return mwu_attack(set, x, y, cfg, make_oracle(set, x, y, cfg));
}

struct EquilibriumGap {
  double adversary_gap = 0.0;  // value_estimate - min_i M(c_i, q*)      (>= 0)
  double learner_gap = 0.0;    // max_v M(p*, v) - value_estimate
  double min_classifier_payoff = 0.0;
  double best_response_payoff = 0.0;
};

// Certifies a trace: the adversary side by enumerating members against q*,
// the learner side with one oracle call against p*.
inline EquilibriumGap equilibrium_gap(const ClassifierSet& set, const Vector& x,
                                      int y, const GameTrace& trace,
                                      const MwuConfig& cfg,
                                      const BestResponseOracle& oracle) {
  if (trace.attacks.empty()) throw InputError("equilibrium_gap: empty trace");
  const Game game(set, x, y, cfg.payoff, cfg.budget);
  double min_payoff = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < set.size(); ++i) {
    min_payoff = std::min(min_payoff, game.payoff(i, trace.q_star));
  }
  Vector v;
  try {
    v = oracle(trace.p_star);
  } catch (const Error&) {
    detail::rethrow_with_round(static_cast<int>(trace.attacks.size()) + 1);
  }
  const double best = game.payoff(trace.p_star, v);
  return {trace.value_estimate - min_payoff, best - trace.value_estimate,
          min_payoff, best};
}

inline EquilibriumGap equilibrium_gap(const ClassifierSet& set, const Vector& x,
                                      int y, const GameTrace& trace,
                                      const MwuConfig& cfg) {
  return equilibrium_gap(set, x, y, trace, cfg, make_oracle(set, x, y, cfg));
}

}  // namespace advgame
