#pragma once

// Baseline attacks, evaluation of attacks over a dataset, and a sampling-based
// reference oracle used to cross-check the exact one.

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "advgame/game.hpp"

namespace advgame {

struct LabeledPoint {
  Vector x;
  int label = 0;
};

using Dataset = std::vector<LabeledPoint>;

enum class Method { mwu_exact, mwu_pgd, oracle, ensemble, best_individual };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::mwu_exact: return "mwu-exact";
    case Method::mwu_pgd: return "mwu-pgd";
    case Method::oracle: return "oracle";
    case Method::ensemble: return "ensemble";
    case Method::best_individual: return "best-individual";
  }
  return "?";
}

inline Method parse_method(const std::string& text) {
  for (Method m : {Method::mwu_exact, Method::mwu_pgd, Method::oracle,
                   Method::ensemble, Method::best_individual}) {
    if (text == to_string(m)) return m;
  }
  throw InputError("unknown method '" + text +
                   "' (expected mwu-exact, mwu-pgd, oracle, ensemble or "
                   "best-individual)");
}

struct AttackReport {
  std::string method;
  AttackBudget budget;
  std::vector<double> classifier_accuracy;  // per member, averaged over points
  double mean_accuracy = 1.0;               // accuracy under uniform p
  double max_accuracy = 1.0;
  double min_accuracy = 1.0;
  std::vector<double> point_losses;         // min over members of E[0-1 loss]
};

// Accuracy of every member under per-point randomized attacks. Each atom is
// re-checked against the budget. An empty dataset reports accuracy 1.
inline AttackReport evaluate_attack(const ClassifierSet& set,
                                    const std::vector<RandomizedAttack>& attacks,
                                    const Dataset& data,
                                    const AttackBudget& budget,
                                    std::string method = "") {
  if (attacks.size() != data.size()) {
    throw InputError("evaluate_attack: " + std::to_string(attacks.size()) +
                     " attacks for " + std::to_string(data.size()) + " points");
  }
  const std::size_t n = set.size();
  AttackReport report;
  report.method = std::move(method);
  report.budget = budget;
  report.classifier_accuracy.assign(n, 1.0);
  if (data.empty()) return report;

  std::vector<double> loss_sum(n, 0.0);
  report.point_losses.reserve(data.size());
  for (std::size_t j = 0; j < data.size(); ++j) {
    const Game game(set, data[j].x, data[j].label, PayoffKind::zero_one, budget);
    double point_min = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double loss = game.payoff(i, attacks[j]);
      loss_sum[i] += loss;
      point_min = std::min(point_min, loss);
    }
    report.point_losses.push_back(point_min);
  }
  const double m = static_cast<double>(data.size());
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    // Clamped: atom probabilities may sum to 1 + ulp.
    report.classifier_accuracy[i] = std::clamp(1.0 - loss_sum[i] / m, 0.0, 1.0);
    mean += report.classifier_accuracy[i];
  }
  report.mean_accuracy = mean / static_cast<double>(n);
  report.max_accuracy = *std::max_element(report.classifier_accuracy.begin(),
                                          report.classifier_accuracy.end());
  report.min_accuracy = *std::min_element(report.classifier_accuracy.begin(),
                                          report.classifier_accuracy.end());
  return report;
}

inline AttackReport evaluate_attack(const ClassifierSet& set,
                                    const std::vector<Vector>& attacks,
                                    const Dataset& data,
                                    const AttackBudget& budget,
                                    std::string method = "") {
  std::vector<RandomizedAttack> qs;
  qs.reserve(attacks.size());
  for (const Vector& v : attacks) qs.push_back(RandomizedAttack::deterministic(v));
  return evaluate_attack(set, qs, data, budget, std::move(method));
}

// Settings shared by the deterministic baselines.
struct BaselineConfig {
  AttackBudget budget{Norm::l2, 1.0};
  GeometryConfig geometry;  // box here also clips the scaled attack
  PgdConfig pgd;
};

inline BaselineConfig baseline_config_for(const MwuConfig& cfg, int dim) {
  return {cfg.budget, geometry_config_for(cfg, dim), pgd_config_for(cfg)};
}

// Minimum-norm misclassifying direction for one linear model, rescaled to the
// full budget. Returns 0 when x is already misclassified or no wrong region is
// reachable.
inline Vector single_model_attack(const LinearClassifier& c, const Vector& x,
                                  int y, const BaselineConfig& cfg) {
  require_dim(x, c.dim(), "single_model_attack");
  require_label(y, c.num_classes());
  const Vector zero = Vector::Zero(c.dim());
  const std::optional<Vector> dir =
      min_norm_misclassification(c, x, y, cfg.geometry);
  if (!dir) return zero;
  const double size = cfg.budget.measure(*dir);
  if (!(size > 0.0)) return zero;
  Vector v = *dir * (cfg.budget.eps / size);
  if (cfg.geometry.box) {
    const Box& box = *cfg.geometry.box;
    v = (x + v).cwiseMax(box.lo).cwiseMin(box.hi) - x;
  }
  return project(v, cfg.budget);
}

// PGD with the untargeted reverse hinge against one (possibly nonlinear) model.
inline Vector single_model_pgd(const Classifier& c, const Vector& x, int y,
                               const BaselineConfig& cfg) {
  const ClassifierSet single({c});
  PgdConfig pgd = cfg.pgd;
  pgd.budget = cfg.budget;
  return pgd_best_response(MixedStrategy({1.0}), single, x, y, pgd,
                           LossKind::untargeted_reverse_hinge())
      .v;
}

inline Vector individual_attack(const Classifier& c, const Vector& x, int y,
                                const BaselineConfig& cfg) {
  if (c.is_linear()) return single_model_attack(c.linear(), x, y, cfg);
  return single_model_pgd(c, x, y, cfg);
}

// Attack the uniform average of the set as if it were a single model.
inline Vector ensemble_attack(const ClassifierSet& set, const Vector& x, int y,
                              const BaselineConfig& cfg) {
  const Classifier ensemble =
      average_ensemble(set, MixedStrategy::uniform(set.size()));
  return individual_attack(ensemble, x, y, cfg);
}

// Attacks each member on its own and keeps the candidate that leaves the
// fewest members correct, then the lowest mean accuracy, then the lowest index.
inline Vector best_individual_attack(const ClassifierSet& set, const Vector& x,
                                     int y, const BaselineConfig& cfg) {
  Vector best;
  double best_max = 2.0;
  double best_mean = 2.0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    Vector v = individual_attack(set[i], x, y, cfg);
    double max_acc = 0.0;
    double mean_acc = 0.0;
    for (std::size_t j = 0; j < set.size(); ++j) {
      const double acc = 1.0 - zero_one_loss(set[j], x, v, y);
      max_acc = std::max(max_acc, acc);
      mean_acc += acc;
    }
    mean_acc /= static_cast<double>(set.size());
    if (max_acc < best_max || (max_acc == best_max && mean_acc < best_mean)) {
      best = std::move(v);
      best_max = max_acc;
      best_mean = mean_acc;
    }
  }
  return best;
}

// Reference oracle: evaluates the expected 0-1 loss at v = 0 and at `samples`
// seeded random points, half uniform in the ball and half on its boundary.
inline BestResponse brute_force_best_response(const MixedStrategy& p,
                                              const ClassifierSet& set,
                                              const Vector& x, int y,
                                              const AttackBudget& budget,
                                              std::size_t samples,
                                              std::uint64_t seed) {
  require_dim(x, set.dim(), "brute_force_best_response");
  const int d = set.dim();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  BestResponse best{Vector::Zero(d), expected_zero_one(p, set, x, Vector::Zero(d), y)};
  Vector v(d);
  for (std::size_t s = 0; s < samples && best.loss < 1.0; ++s) {
    const bool boundary = (s % 2) == 1;
    if (budget.norm == Norm::l2) {
      for (int i = 0; i < d; ++i) v[i] = gauss(rng);
      const double norm = v.norm();
      if (!(norm > 0.0)) continue;
      const double radius =
          boundary ? budget.eps
                   : budget.eps * std::pow(unit(rng), 1.0 / static_cast<double>(d));
      v *= radius / norm;
    } else {
      for (int i = 0; i < d; ++i) v[i] = budget.eps * (2.0 * unit(rng) - 1.0);
      if (boundary) {
        const int face = static_cast<int>(unit(rng) * d) % d;
        v[face] = v[face] < 0.0 ? -budget.eps : budget.eps;
      }
    }
    const double loss = expected_zero_one(p, set, x, v, y);
    if (loss > best.loss) best = {v, loss};
  }
  return best;
}

struct PointAttack {
  RandomizedAttack attack;
  std::optional<GameTrace> trace;  // set for the MWU methods
};

// The configuration a method actually runs with: mwu-exact plays the 0-1 game
// with the exact oracle; mwu-pgd plays the relaxed game (M_r for binary linear
// sets, M_ut otherwise) with PGD.
inline MwuConfig method_config(Method method, const ClassifierSet& set,
                               MwuConfig cfg) {
  if (method == Method::mwu_exact) {
    cfg.oracle = OracleKind::exact;
    cfg.payoff = PayoffKind::zero_one;
  } else if (method == Method::mwu_pgd) {
    cfg.oracle = OracleKind::pgd;
    cfg.payoff = set.is_binary_linear() ? PayoffKind::reverse_hinge
                                        : PayoffKind::untargeted_hinge;
  } else if (method == Method::oracle) {
    cfg.oracle = set.all_linear() ? OracleKind::exact : OracleKind::pgd;
    cfg.payoff = set.all_linear() ? PayoffKind::zero_one
                                  : PayoffKind::untargeted_hinge;
  }
  return cfg;
}

inline void check_method(Method method, const ClassifierSet& set) {
  if (method == Method::mwu_exact && !set.all_linear()) {
    throw ConfigError("mwu-exact requires every model to be linear");
  }
}

inline PointAttack attack_point(Method method, const ClassifierSet& set,
                                const Vector& x, int y, const MwuConfig& base) {
  check_method(method, set);
  const MwuConfig cfg = method_config(method, set, base);
  const BaselineConfig bcfg = baseline_config_for(cfg, set.dim());
  switch (method) {
    case Method::mwu_exact:
    case Method::mwu_pgd: {
      GameTrace trace = mwu_attack(set, x, y, cfg);
      RandomizedAttack q = trace.q_star;
      return {std::move(q), std::move(trace)};
    }
    case Method::oracle: {
      const BestResponseOracle oracle = make_oracle(set, x, y, cfg);
      return {RandomizedAttack::deterministic(
                  oracle(MixedStrategy::uniform(set.size()))),
              std::nullopt};
    }
    case Method::ensemble:
      return {RandomizedAttack::deterministic(ensemble_attack(set, x, y, bcfg)),
              std::nullopt};
    case Method::best_individual:
      return {RandomizedAttack::deterministic(
                  best_individual_attack(set, x, y, bcfg)),
              std::nullopt};
  }
  throw ContractError("unknown method");
}

// Runs `fn(j)` for j in [0, count) on up to `threads` workers. The exception
// of the lowest failing index is rethrown.
template <class Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(count)));
  if (threads <= 1) {
    for (std::size_t j = 0; j < count; ++j) fn(j);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::size_t failed_at = count;
  std::exception_ptr failure;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (std::size_t j = next++; j < count; j = next++) {
        try {
          fn(j);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (j < failed_at) {
            failed_at = j;
            failure = std::current_exception();
          }
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

inline std::vector<PointAttack> attack_dataset(Method method,
                                               const ClassifierSet& set,
                                               const Dataset& data,
                                               const MwuConfig& cfg,
                                               unsigned threads = 1) {
  check_method(method, set);
  for (std::size_t j = 0; j < data.size(); ++j) {
    require_dim(data[j].x, set.dim(), "attack_dataset");
    require_label(data[j].label, set.num_classes());
  }
  std::vector<PointAttack> out(data.size());
  parallel_for(data.size(), threads, [&](std::size_t j) {
    try {
      out[j] = attack_point(method, set, data[j].x, data[j].label, cfg);
    } catch (const EnumerationCapError& e) {
      throw EnumerationCapError(e.cap(), "point " + std::to_string(j) + ": " + e.what());
    } catch (const ContractError& e) {
      throw ContractError("point " + std::to_string(j) + ": " + e.what());
    }
  });
  return out;
}

inline std::vector<RandomizedAttack> attacks_of(const std::vector<PointAttack>& runs) {
  std::vector<RandomizedAttack> qs;
  qs.reserve(runs.size());
  for (const PointAttack& r : runs) qs.push_back(r.attack);
  return qs;
}

struct ConvergencePoint {
  int round = 0;
  double max_accuracy = 1.0;
  double mean_accuracy = 1.0;
  double min_accuracy = 1.0;
};

// Accuracy of the members against q_t = uniform{v_1..v_t} for every prefix t,
// averaged over points. All traces must have the same number of rounds.
inline std::vector<ConvergencePoint> convergence_series(
    const ClassifierSet& set, const std::vector<PointAttack>& runs,
    const Dataset& data) {
  if (runs.size() != data.size()) {
    throw InputError("convergence_series: runs and dataset differ in size");
  }
  if (runs.empty() || !runs.front().trace) return {};
  const std::size_t rounds = runs.front().trace->attacks.size();
  const std::size_t n = set.size();
  std::vector<std::vector<double>> acc_sum(rounds, std::vector<double>(n, 0.0));
  for (std::size_t j = 0; j < runs.size(); ++j) {
    if (!runs[j].trace || runs[j].trace->attacks.size() != rounds) {
      throw InputError("convergence_series: traces differ in length");
    }
    std::vector<double> fooled(n, 0.0);
    for (std::size_t t = 0; t < rounds; ++t) {
      const Vector& v = runs[j].trace->attacks[t];
      for (std::size_t i = 0; i < n; ++i) {
        fooled[i] += zero_one_loss(set[i], data[j].x, v, data[j].label);
        acc_sum[t][i] += 1.0 - fooled[i] / static_cast<double>(t + 1);
      }
    }
  }
  std::vector<ConvergencePoint> series;
  series.reserve(rounds);
  const double m = static_cast<double>(runs.size());
  for (std::size_t t = 0; t < rounds; ++t) {
    ConvergencePoint pt;
    pt.round = static_cast<int>(t + 1);
    pt.max_accuracy = 0.0;
    pt.min_accuracy = 1.0;
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double acc = acc_sum[t][i] / m;
      pt.max_accuracy = std::max(pt.max_accuracy, acc);
      pt.min_accuracy = std::min(pt.min_accuracy, acc);
      mean += acc;
    }
    pt.mean_accuracy = mean / static_cast<double>(n);
    series.push_back(pt);
  }
  return series;
}

}  // namespace advgame
