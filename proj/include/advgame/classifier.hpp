#pragma once

// Classifier representations used by the attack library.
//
// Every classifier maps R^d to k logits and predicts the argmax, with exact
// ties broken toward the lowest class index. Binary +-1 linear models are
// canonicalised to k = 2 one-vs-all form with rows (w, -w) and biases
// (b, -b), so class 0 plays the role of the +1 label.

#include <map>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "advgame/types.hpp"

namespace advgame {

class LinearClassifier {
 public:
  LinearClassifier(Matrix weights, Vector biases)
      : weights_(std::move(weights)), biases_(std::move(biases)) {
    if (weights_.rows() < 2) {
      throw InputError("LinearClassifier: need at least 2 classes");
    }
    if (weights_.cols() < 1) {
      throw InputError("LinearClassifier: input dimension must be >= 1");
    }
    if (biases_.size() != weights_.rows()) {
      throw InputError("LinearClassifier: " + std::to_string(weights_.rows()) +
                       " weight rows but " + std::to_string(biases_.size()) +
                       " biases");
    }
    if (!weights_.allFinite() || !biases_.allFinite()) {
      throw InputError("LinearClassifier: non-finite parameter");
    }
  }

  // Canonical k = 2 form of sign(<w, x> + b); +1 maps to class 0.
  static LinearClassifier binary(const Vector& w, double b) {
    Matrix rows(2, w.size());
    rows.row(0) = w.transpose();
    rows.row(1) = -w.transpose();
    Vector biases(2);
    biases << b, -b;
    return LinearClassifier(std::move(rows), std::move(biases));
  }

  int num_classes() const { return static_cast<int>(weights_.rows()); }
  int dim() const { return static_cast<int>(weights_.cols()); }
  const Matrix& weights() const { return weights_; }
  const Vector& biases() const { return biases_; }

  Vector logits(const Vector& x) const {
    require_dim(x, dim(), "LinearClassifier::logits");
    return weights_ * x + biases_;
  }

  Vector logit_gradient(const Vector& x, int j) const {
    require_dim(x, dim(), "LinearClassifier::logit_gradient");
    check_class(j);
    return weights_.row(j).transpose();
  }

  int predict(const Vector& x) const { return argmax_lowest(logits(x)); }

  // For k = 2: the (w, b) with class 0 <=> <w, x> + b >= 0. Exact inverse of
  // binary() on canonical models.
  std::pair<Vector, double> binary_hyperplane() const {
    if (num_classes() != 2) {
      throw ContractError("binary_hyperplane: classifier has " +
                          std::to_string(num_classes()) + " classes");
    }
    Vector w = 0.5 * (weights_.row(0) - weights_.row(1)).transpose();
    return {std::move(w), 0.5 * (biases_[0] - biases_[1])};
  }

 private:
  void check_class(int j) const {
    if (j < 0 || j >= num_classes()) {
      throw InputError("class index " + std::to_string(j) + " out of range");
    }
  }

  Matrix weights_;
  Vector biases_;
};

enum class Activation { relu, identity };

struct DenseLayer {
  Matrix weights;  // out x in
  Vector biases;   // out
  Activation activation = Activation::identity;
};

// Dense feed-forward network; the final layer emits the k logits.
class MlpClassifier {
 public:
  explicit MlpClassifier(std::vector<DenseLayer> layers)
      : layers_(std::move(layers)) {
    if (layers_.empty()) throw InputError("MlpClassifier: no layers");
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const auto& layer = layers_[l];
      if (layer.weights.rows() < 1 || layer.weights.cols() < 1) {
        throw InputError("MlpClassifier: empty weight matrix in layer " +
                         std::to_string(l));
      }
      if (layer.biases.size() != layer.weights.rows()) {
        throw InputError("MlpClassifier: bias length mismatch in layer " +
                         std::to_string(l));
      }
      if (l > 0 && layer.weights.cols() != layers_[l - 1].weights.rows()) {
        throw InputError("MlpClassifier: layer " + std::to_string(l) +
                         " expects " + std::to_string(layer.weights.cols()) +
                         " inputs, previous layer emits " +
                         std::to_string(layers_[l - 1].weights.rows()));
      }
      if (!layer.weights.allFinite() || !layer.biases.allFinite()) {
        throw InputError("MlpClassifier: non-finite parameter in layer " +
                         std::to_string(l));
      }
    }
    if (num_classes() < 2) {
      throw InputError("MlpClassifier: need at least 2 output logits");
    }
  }

  int num_classes() const {
    return static_cast<int>(layers_.back().weights.rows());
  }
  int dim() const { return static_cast<int>(layers_.front().weights.cols()); }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  Vector logits(const Vector& x) const {
    require_dim(x, dim(), "MlpClassifier::logits");
    Vector h = x;
    for (const auto& layer : layers_) {
      h = layer.weights * h + layer.biases;
      if (layer.activation == Activation::relu) h = h.cwiseMax(0.0);
    }
    return h;
  }

  // Reverse accumulation; relu'(0) = 0.
  Vector logit_gradient(const Vector& x, int j) const {
    require_dim(x, dim(), "MlpClassifier::logit_gradient");
    if (j < 0 || j >= num_classes()) {
      throw InputError("class index " + std::to_string(j) + " out of range");
    }
    std::vector<Vector> pre;
    pre.reserve(layers_.size());
    Vector h = x;
    for (const auto& layer : layers_) {
      pre.push_back(layer.weights * h + layer.biases);
      h = pre.back();
      if (layer.activation == Activation::relu) h = h.cwiseMax(0.0);
    }
    Vector g = Vector::Zero(num_classes());
    g[j] = 1.0;
    for (std::size_t l = layers_.size(); l-- > 0;) {
      if (layers_[l].activation == Activation::relu) {
        for (Eigen::Index i = 0; i < g.size(); ++i) {
          if (!(pre[l][i] > 0.0)) g[i] = 0.0;
        }
      }
      g = layers_[l].weights.transpose() * g;
    }
    return g;
  }

  int predict(const Vector& x) const { return argmax_lowest(logits(x)); }

 private:
  std::vector<DenseLayer> layers_;
};

class Classifier;

// Weighted average of member logits. Built by average_ensemble() for sets
// that are not all linear.
struct EnsembleClassifier {
  std::shared_ptr<const std::vector<Classifier>> members;
  std::vector<double> weights;
};

// Immutable value holding any supported classifier kind.
class Classifier {
 public:
  using Model = std::variant<LinearClassifier, MlpClassifier, EnsembleClassifier>;

  Classifier(LinearClassifier m) : model_(std::move(m)) {}  // NOLINT
  Classifier(MlpClassifier m) : model_(std::move(m)) {}     // NOLINT
  Classifier(EnsembleClassifier m) : model_(std::move(m)) {}  // NOLINT

  const Model& model() const { return model_; }
  bool is_linear() const {
    return std::holds_alternative<LinearClassifier>(model_);
  }
  const LinearClassifier& linear() const {
    if (const auto* lin = std::get_if<LinearClassifier>(&model_)) return *lin;
    throw ContractError("classifier is not linear");
  }

  int num_classes() const;
  int dim() const;
  Vector logits(const Vector& x) const;
  Vector logit_gradient(const Vector& x, int j) const;
  int predict(const Vector& x) const { return argmax_lowest(logits(x)); }

 private:
  Model model_;
};

namespace detail {

inline const Classifier& first_member(const EnsembleClassifier& e) {
  if (!e.members || e.members->empty()) {
    throw ContractError("EnsembleClassifier: no members");
  }
  return e.members->front();
}

}  // namespace detail

inline int Classifier::num_classes() const {
  return std::visit(
      [](const auto& m) -> int {
        if constexpr (std::is_same_v<std::decay_t<decltype(m)>,
                                     EnsembleClassifier>) {
          return detail::first_member(m).num_classes();
        } else {
          return m.num_classes();
        }
      },
      model_);
}

inline int Classifier::dim() const {
  return std::visit(
      [](const auto& m) -> int {
        if constexpr (std::is_same_v<std::decay_t<decltype(m)>,
                                     EnsembleClassifier>) {
          return detail::first_member(m).dim();
        } else {
          return m.dim();
        }
      },
      model_);
}

inline Vector Classifier::logits(const Vector& x) const {
  return std::visit(
      [&x](const auto& m) -> Vector {
        if constexpr (std::is_same_v<std::decay_t<decltype(m)>,
                                     EnsembleClassifier>) {
          Vector out = Vector::Zero(detail::first_member(m).num_classes());
          for (std::size_t i = 0; i < m.members->size(); ++i) {
            out += m.weights[i] * (*m.members)[i].logits(x);
          }
          return out;
        } else {
          return m.logits(x);
        }
      },
      model_);
}

inline Vector Classifier::logit_gradient(const Vector& x, int j) const {
  return std::visit(
      [&x, j](const auto& m) -> Vector {
        if constexpr (std::is_same_v<std::decay_t<decltype(m)>,
                                     EnsembleClassifier>) {
          Vector out = Vector::Zero(detail::first_member(m).dim());
          for (std::size_t i = 0; i < m.members->size(); ++i) {
            out += m.weights[i] * (*m.members)[i].logit_gradient(x, j);
          }
          return out;
        } else {
          return m.logit_gradient(x, j);
        }
      },
      model_);
}

inline int predict(const Classifier& c, const Vector& x) { return c.predict(x); }
inline Vector logits(const Classifier& c, const Vector& x) { return c.logits(x); }
inline Vector logit_gradient(const Classifier& c, const Vector& x, int j) {
  return c.logit_gradient(x, j);
}

// Nonempty collection of classifiers sharing input dimension and class count.
class ClassifierSet {
 public:
  ClassifierSet(std::vector<Classifier> members,
                std::vector<std::string> labels = {})
      : members_(std::move(members)), labels_(std::move(labels)) {
    if (members_.empty()) throw InputError("ClassifierSet: no members");
    const int d = members_.front().dim();
    const int k = members_.front().num_classes();
    for (std::size_t i = 1; i < members_.size(); ++i) {
      if (members_[i].dim() != d) {
        throw InputError("ClassifierSet: member " + std::to_string(i) +
                         " has dimension " + std::to_string(members_[i].dim()) +
                         ", expected " + std::to_string(d));
      }
      if (members_[i].num_classes() != k) {
        throw InputError("ClassifierSet: member " + std::to_string(i) +
                         " has " + std::to_string(members_[i].num_classes()) +
                         " classes, expected " + std::to_string(k));
      }
    }
    if (labels_.empty()) {
      for (std::size_t i = 0; i < members_.size(); ++i) {
        labels_.push_back("c" + std::to_string(i));
      }
    } else if (labels_.size() != members_.size()) {
      throw InputError("ClassifierSet: label count does not match members");
    }
  }

  std::size_t size() const { return members_.size(); }
  int dim() const { return members_.front().dim(); }
  int num_classes() const { return members_.front().num_classes(); }
  const Classifier& operator[](std::size_t i) const { return members_[i]; }
  const std::vector<Classifier>& members() const { return members_; }
  const std::vector<std::string>& labels() const { return labels_; }

  bool all_linear() const {
    for (const auto& m : members_) {
      if (!m.is_linear()) return false;
    }
    return true;
  }
  bool is_binary_linear() const { return all_linear() && num_classes() == 2; }

 private:
  std::vector<Classifier> members_;
  std::vector<std::string> labels_;
};

// One pairwise predictor c_{i,j}(x) = <w, x> + b for i < j.
struct PairwisePredictor {
  Vector weights;
  double bias = 0.0;
};

// All-pairs multiclass model: c_{j,i} = -c_{i,j}; label = argmax_i sum_{j != i} c_{i,j}(x).
class AllPairsClassifier {
 public:
  AllPairsClassifier(int num_classes,
                     std::map<std::pair<int, int>, PairwisePredictor> pairwise)
      : k_(num_classes), pairwise_(std::move(pairwise)) {
    if (k_ < 2) throw InputError("AllPairsClassifier: need at least 2 classes");
    const auto expected = static_cast<std::size_t>(k_ * (k_ - 1) / 2);
    if (pairwise_.size() != expected) {
      throw InputError("AllPairsClassifier: expected " +
                       std::to_string(expected) + " predictors, got " +
                       std::to_string(pairwise_.size()));
    }
    dim_ = -1;
    for (const auto& [key, pred] : pairwise_) {
      const auto [i, j] = key;
      if (i < 0 || j >= k_ || i >= j) {
        throw InputError("AllPairsClassifier: invalid pair (" +
                         std::to_string(i) + "," + std::to_string(j) + ")");
      }
      if (dim_ < 0) dim_ = static_cast<int>(pred.weights.size());
      if (pred.weights.size() != dim_ || dim_ < 1) {
        throw InputError("AllPairsClassifier: inconsistent predictor dimension");
      }
      if (!pred.weights.allFinite() || !std::isfinite(pred.bias)) {
        throw InputError("AllPairsClassifier: non-finite parameter");
      }
    }
  }

  int num_classes() const { return k_; }
  int dim() const { return dim_; }
  const std::map<std::pair<int, int>, PairwisePredictor>& pairwise() const {
    return pairwise_;
  }

  // c_{i,j}(x) with the antisymmetric convention.
  double score(int i, int j, const Vector& x) const {
    if (i == j) return 0.0;
    if (i < j) {
      const auto& p = pairwise_.at({i, j});
      return p.weights.dot(x) + p.bias;
    }
    return -score(j, i, x);
  }

  int predict(const Vector& x) const {
    require_dim(x, dim_, "AllPairsClassifier::predict");
    Vector totals = Vector::Zero(k_);
    for (int i = 0; i < k_; ++i) {
      for (int j = 0; j < k_; ++j) {
        if (j != i) totals[i] += score(i, j, x);
      }
    }
    return argmax_lowest(totals);
  }

 private:
  int k_;
  int dim_ = -1;
  std::map<std::pair<int, int>, PairwisePredictor> pairwise_;
};

// Row i = sum_{j != i} w_{i,j}, bias i = sum_{j != i} b_{i,j}.
inline LinearClassifier convert_all_pairs(const AllPairsClassifier& ap) {
  const int k = ap.num_classes();
  Matrix rows = Matrix::Zero(k, ap.dim());
  Vector biases = Vector::Zero(k);
  for (const auto& [key, pred] : ap.pairwise()) {
    const auto [i, j] = key;
    rows.row(i) += pred.weights.transpose();
    biases[i] += pred.bias;
    rows.row(j) -= pred.weights.transpose();
    biases[j] -= pred.bias;
  }
  return LinearClassifier(std::move(rows), std::move(biases));
}

// Slices a multivector weight of length k(d+1) into k blocks (w_j, b_j).
inline LinearClassifier convert_multivector(std::span<const double> w, int k,
                                            int d) {
  if (k < 2 || d < 1) {
    throw InputError("convert_multivector: need k >= 2 and d >= 1");
  }
  const auto expected = static_cast<std::size_t>(k) * static_cast<std::size_t>(d + 1);
  if (w.size() != expected) {
    throw InputError("convert_multivector: expected " +
                     std::to_string(expected) + " weights, got " +
                     std::to_string(w.size()));
  }
  Matrix rows(k, d);
  Vector biases(k);
  for (int j = 0; j < k; ++j) {
    const std::size_t base = static_cast<std::size_t>(j) * (d + 1);
    for (int c = 0; c < d; ++c) rows(j, c) = w[base + c];
    biases[j] = w[base + d];
  }
  return LinearClassifier(std::move(rows), std::move(biases));
}

// logits(result, x) = sum_i p[i] * logits(c_i, x). All-linear sets collapse to
// a single LinearClassifier with averaged parameters.
inline Classifier average_ensemble(const ClassifierSet& set,
                                   const MixedStrategy& weights) {
  if (weights.size() != set.size()) {
    throw InputError("average_ensemble: " + std::to_string(weights.size()) +
                     " weights for " + std::to_string(set.size()) + " members");
  }
  if (set.all_linear()) {
    Matrix rows = Matrix::Zero(set.num_classes(), set.dim());
    Vector biases = Vector::Zero(set.num_classes());
    for (std::size_t i = 0; i < set.size(); ++i) {
      const auto& lin = set[i].linear();
      rows += weights[i] * lin.weights();
      biases += weights[i] * lin.biases();
    }
    return LinearClassifier(std::move(rows), std::move(biases));
  }
  return EnsembleClassifier{
      std::make_shared<const std::vector<Classifier>>(set.members()),
      weights.probs()};
}

}  // namespace advgame
