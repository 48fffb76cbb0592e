#pragma once

// Exact best responses against sets of linear classifiers.
//
// Fixing the prediction of every member splits R^d into at most k^n label
// regions; each region is an intersection of half-spaces, and the learner's
// expected 0-1 loss is constant on it. A best response is therefore the
// region of highest loss whose minimum-norm perturbation fits the budget.
// Regions are visited in descending loss order so the first one that fits is
// optimal.

#include <algorithm>
#include <map>
#include <numeric>
#include <optional>
#include <vector>

#include "advgame/budget.hpp"
#include "advgame/classifier.hpp"
#include "advgame/losses.hpp"
#include "advgame/qp.hpp"

namespace advgame {

struct GeometryConfig {
  double strict_slack = 1e-6;   // margin replacing strict argmax inequalities
  double qp_tolerance = 1e-8;
  std::size_t max_regions = 60000;
  std::optional<Box> box;       // bounds on x + v

  void validate() const {
    if (!(strict_slack > 0.0)) {
      throw InputError("GeometryConfig: strict_slack must be > 0");
    }
    if (!(qp_tolerance > 0.0)) {
      throw InputError("GeometryConfig: qp_tolerance must be > 0");
    }
    if (max_regions == 0) {
      throw InputError("GeometryConfig: max_regions must be positive");
    }
  }
};

// A label vector s (one predicted label per classifier) and the learner's
// expected 0-1 loss on that region.
struct Region {
  std::vector<int> labels;
  double loss = 0.0;
};

// Expected 0-1 loss sum_i p[i] * [c_i(x + v) != y].
inline double expected_zero_one(const MixedStrategy& p, const ClassifierSet& set,
                                const Vector& x, const Vector& v, int y) {
  if (p.size() != set.size()) {
    throw InputError("expected_zero_one: strategy size does not match set");
  }
  double total = 0.0;
  const Vector xv = x + v;
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (set[i].predict(xv) != y) total += p[i];
  }
  return total;
}

// Lazily yields every label vector in [k]^n. Wrong-sets W (members with
// s_i != y) come in descending order of sum_{i in W} p[i], ties broken by
// lexicographic order of the sorted index list; inside one wrong-set the
// (k-1)^|W| assignments come in lexicographic order.
class RegionEnumerator {
 public:
  RegionEnumerator(int k, int n, int y, const MixedStrategy& p,
                   std::size_t max_regions)
      : k_(k), n_(n), y_(y) {
    if (k < 2) throw InputError("enumerate_regions: need k >= 2");
    if (n < 1) throw InputError("enumerate_regions: need n >= 1");
    require_label(y, k);
    if (p.size() != static_cast<std::size_t>(n)) {
      throw InputError("enumerate_regions: strategy size does not match n");
    }
    std::size_t total = 1;
    for (int i = 0; i < n; ++i) {
      if (total > max_regions / static_cast<std::size_t>(k)) {
        throw EnumerationCapError(
            max_regions, "enumerate_regions: " + std::to_string(k) + "^" +
                             std::to_string(n) + " regions exceed the cap of " +
                             std::to_string(max_regions));
      }
      total *= static_cast<std::size_t>(k);
    }
    if (total > max_regions) {
      throw EnumerationCapError(max_regions,
                                "enumerate_regions: region count exceeds cap");
    }

    const std::size_t subsets = std::size_t{1} << n;
    wrong_sets_.reserve(subsets);
    for (std::size_t mask = 0; mask < subsets; ++mask) {
      WrongSet ws;
      for (int i = 0; i < n; ++i) {
        if (mask & (std::size_t{1} << i)) {
          ws.members.push_back(i);
          ws.loss += p[i];
        }
      }
      wrong_sets_.push_back(std::move(ws));
    }
    std::sort(wrong_sets_.begin(), wrong_sets_.end(),
              [](const WrongSet& a, const WrongSet& b) {
                if (a.loss != b.loss) return a.loss > b.loss;
                return a.members < b.members;
              });
    start_wrong_set();
  }

  std::optional<Region> next() {
    if (current_ >= wrong_sets_.size()) return std::nullopt;
    Region out{labels_, wrong_sets_[current_].loss};
    advance();
    return out;
  }

 private:
  struct WrongSet {
    std::vector<int> members;
    double loss = 0.0;
  };

  int first_wrong() const { return y_ == 0 ? 1 : 0; }

  int next_wrong(int label) const {
    int next = label + 1;
    if (next == y_) ++next;
    return next;
  }

  void start_wrong_set() {
    if (current_ >= wrong_sets_.size()) return;
    labels_.assign(static_cast<std::size_t>(n_), y_);
    for (int i : wrong_sets_[current_].members) labels_[i] = first_wrong();
  }

  // Odometer over the wrong labels of the current wrong-set, last member
  // fastest, which is lexicographic order of the full label vector.
  void advance() {
    const auto& members = wrong_sets_[current_].members;
    for (auto it = members.rbegin(); it != members.rend(); ++it) {
      const int nxt = next_wrong(labels_[*it]);
      if (nxt < k_) {
        labels_[*it] = nxt;
        return;
      }
      labels_[*it] = first_wrong();
    }
    ++current_;
    start_wrong_set();
  }

  int k_;
  int n_;
  int y_;
  std::vector<WrongSet> wrong_sets_;
  std::size_t current_ = 0;
  std::vector<int> labels_;
};

inline RegionEnumerator enumerate_regions(int k, int n, int y,
                                          const MixedStrategy& p,
                                          std::size_t max_regions = 60000) {
  return RegionEnumerator(k, n, y, p, max_regions);
}

inline void require_all_linear(const ClassifierSet& set, const char* what) {
  if (!set.all_linear()) {
    throw ContractError(std::string(what) + ": every member must be linear");
  }
}

namespace detail {

// Half-spaces <w_{i,s_i} - w_{i,j}, x + v> + (b_{i,s_i} - b_{i,j}) >= slack for
// every member i and every j != s_i, plus the optional box on x + v. Two-class
// members use half the difference, i.e. their hyperplane (w, b), so the slack
// applies to y(<w, x + v> + b) directly.
inline MinNormQp region_program(const ClassifierSet& set, const Vector& x,
                                const std::vector<int>& labels, double slack,
                                const std::optional<Box>& box) {
  MinNormQp qp(set.dim());
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto& lin = set[i].linear();
    const int s = labels[i];
    for (int j = 0; j < lin.num_classes(); ++j) {
      if (j == s) continue;
      const double scale = lin.num_classes() == 2 ? 0.5 : 1.0;
      const Vector a =
          scale * (lin.weights().row(s) - lin.weights().row(j)).transpose();
      const double offset = scale * (lin.biases()[s] - lin.biases()[j]);
      qp.add_halfspace(a, slack - offset - a.dot(x));
    }
  }
  if (box) qp.add_box(box->lo - x, box->hi - x);
  return qp;
}

inline std::optional<Vector> solve_region(const MinNormQp& qp,
                                          const GeometryConfig& cfg) {
  const QpResult res = qp.solve(std::min(cfg.qp_tolerance, 1e-12));
  if (res.status != QpStatus::optimal) return std::nullopt;
  if (res.max_violation > 1e-9) return std::nullopt;
  return res.v;
}

inline void check_region(const ClassifierSet& set, const Vector& x,
                         const std::vector<int>& labels) {
  if (labels.size() != set.size()) {
    throw InputError("region label vector length does not match the set");
  }
  require_dim(x, set.dim(), "region");
  for (int s : labels) require_label(s, set.num_classes());
}

}  // namespace detail

// Minimum-norm v with c_i(x + v) = s_i for all i (each argmax held with slack
// cfg.strict_slack). nullopt when the region is empty.
inline std::optional<Vector> min_norm_to_region(const ClassifierSet& set,
                                                const Vector& x,
                                                const Region& region,
                                                const GeometryConfig& cfg = {}) {
  cfg.validate();
  require_all_linear(set, "min_norm_to_region");
  detail::check_region(set, x, region.labels);
  return detail::solve_region(
      detail::region_program(set, x, region.labels, cfg.strict_slack, cfg.box),
      cfg);
}

// Some v with |v_i| <= eps and x + v inside the region; nullopt when none
// exists. The point returned is the l2-smallest such v.
inline std::optional<Vector> linf_feasible_point(const ClassifierSet& set,
                                                 const Vector& x,
                                                 const Region& region,
                                                 double eps,
                                                 const GeometryConfig& cfg = {}) {
  cfg.validate();
  require_all_linear(set, "linf_feasible_point");
  detail::check_region(set, x, region.labels);
  if (!(eps > 0.0)) throw InputError("linf_feasible_point: eps must be > 0");
  MinNormQp qp =
      detail::region_program(set, x, region.labels, cfg.strict_slack, cfg.box);
  const Vector e = Vector::Constant(set.dim(), eps);
  qp.add_box(-e, e);
  return detail::solve_region(qp, cfg);
}

struct BestResponse {
  Vector v;
  double loss = 0.0;  // expected 0-1 loss of the learner at x + v
};

// Exact best-response oracle for one data point. Region solutions do not
// depend on the learner's distribution, so they are memoised across calls;
// an MWU run asks for many best responses at the same point.
class ExactOracle {
 public:
  ExactOracle(ClassifierSet set, Vector x, int y, GeometryConfig cfg = {})
      : set_(std::move(set)), x_(std::move(x)), y_(y), cfg_(std::move(cfg)) {
    cfg_.validate();
    require_all_linear(set_, "ExactOracle");
    require_dim(x_, set_.dim(), "ExactOracle");
    require_label(y_, set_.num_classes());
  }

  const ClassifierSet& set() const { return set_; }

  BestResponse best_response(const MixedStrategy& p,
                             const AttackBudget& budget) {
    auto regions = enumerate_regions(set_.num_classes(),
                                     static_cast<int>(set_.size()), y_, p,
                                     cfg_.max_regions);
    while (auto region = regions.next()) {
      const std::optional<Vector>& v = solution(region->labels, budget);
      if (v && budget.measure(*v) <= budget.eps) {
        return {*v, expected_zero_one(p, set_, x_, *v, y_)};
      }
    }
    // Only reachable when x itself sits on a tie of some member.
    Vector zero = Vector::Zero(set_.dim());
    return {zero, expected_zero_one(p, set_, x_, zero, y_)};
  }

 private:
  const std::optional<Vector>& solution(const std::vector<int>& labels,
                                        const AttackBudget& budget) {
    if (budget.norm == Norm::l2) {
      auto it = l2_cache_.find(labels);
      if (it == l2_cache_.end()) {
        it = l2_cache_
                 .emplace(labels, detail::solve_region(
                                      detail::region_program(
                                          set_, x_, labels, cfg_.strict_slack,
                                          cfg_.box),
                                      cfg_))
                 .first;
      }
      return it->second;
    }
    if (linf_eps_ != budget.eps) {
      linf_cache_.clear();
      linf_eps_ = budget.eps;
    }
    auto it = linf_cache_.find(labels);
    if (it == linf_cache_.end()) {
      it = linf_cache_
               .emplace(labels, linf_feasible_point(set_, x_, Region{labels, 0.0},
                                                    budget.eps, cfg_))
               .first;
    }
    return it->second;
  }

  ClassifierSet set_;
  Vector x_;
  int y_;
  GeometryConfig cfg_;
  std::map<std::vector<int>, std::optional<Vector>> l2_cache_;
  std::map<std::vector<int>, std::optional<Vector>> linf_cache_;
  double linf_eps_ = -1.0;
};

// Best response maximising the learner's expected 0-1 loss within the budget.
inline BestResponse exact_best_response(const MixedStrategy& p,
                                        const ClassifierSet& set,
                                        const Vector& x, int y,
                                        const AttackBudget& budget,
                                        const GeometryConfig& cfg = {}) {
  ExactOracle oracle(set, x, y, cfg);
  return oracle.best_response(p, budget);
}

// Euclidean distance from a correctly classified x to the decision boundary
// of c (slack 0, no box).
inline double margin(const LinearClassifier& c, const Vector& x, int y,
                     const GeometryConfig& cfg = {}) {
  require_dim(x, c.dim(), "margin");
  require_label(y, c.num_classes());
  if (c.predict(x) != y) {
    throw ContractError("margin: point is not classified as its label");
  }
  const ClassifierSet single({Classifier(c)});
  double best = std::numeric_limits<double>::infinity();
  for (int j = 0; j < c.num_classes(); ++j) {
    if (j == y) continue;
    auto v = detail::solve_region(
        detail::region_program(single, x, {j}, 0.0, std::nullopt), cfg);
    if (v) best = std::min(best, v->norm());
  }
  return best;
}

// Minimum-norm perturbation that moves x out of class y for a single linear
// model (slack cfg.strict_slack), or nullopt when no wrong region is reachable.
inline std::optional<Vector> min_norm_misclassification(
    const LinearClassifier& c, const Vector& x, int y,
    const GeometryConfig& cfg = {}) {
  const ClassifierSet single({Classifier(c)});
  std::optional<Vector> best;
  for (int j = 0; j < c.num_classes(); ++j) {
    if (j == y) continue;
    auto v = detail::solve_region(
        detail::region_program(single, x, {j}, cfg.strict_slack, cfg.box), cfg);
    if (v && (!best || v->norm() < best->norm())) best = std::move(v);
  }
  return best;
}

}  // namespace advgame
