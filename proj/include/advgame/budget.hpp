#pragma once

#include <algorithm>
#include <string>

#include "advgame/types.hpp"

namespace advgame {

enum class Norm { l2, linf };

inline const char* to_string(Norm norm) {
  return norm == Norm::l2 ? "l2" : "linf";
}

inline Norm parse_norm(const std::string& text) {
  if (text == "l2") return Norm::l2;
  if (text == "linf") return Norm::linf;
  throw InputError("unknown norm '" + text + "' (expected l2 or linf)");
}

// Noise vectors must satisfy ||v||_norm <= eps.
struct AttackBudget {
  Norm norm = Norm::l2;
  double eps = 1.0;

  AttackBudget() = default;
  AttackBudget(Norm n, double e) : norm(n), eps(e) {
    if (!(eps > 0.0) || !std::isfinite(eps)) {
      throw InputError("attack budget must be a finite eps > 0");
    }
  }

  double measure(const Vector& v) const {
    return norm == Norm::l2 ? v.norm() : v.lpNorm<Eigen::Infinity>();
  }

  // Membership with a relative slack for accumulated rounding.
  bool admits(const Vector& v, double rel_tol = 1e-9) const {
    return measure(v) <= eps * (1.0 + rel_tol);
  }
};

// Coordinatewise bounds lo <= x + v <= hi on the perturbed point.
struct Box {
  Vector lo;
  Vector hi;

  static Box unit(int dim) {
    return {Vector::Zero(dim), Vector::Ones(dim)};
  }
};

}  // namespace advgame
