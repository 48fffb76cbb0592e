#pragma once

// Minimum-norm point of a polyhedron {v : A v >= b}.
//
// Dual active-set method of Goldfarb and Idnani specialised to the objective
// 1/2 ||v||^2 (Hessian = I, so the initial factor J is the identity and the
// unconstrained minimiser is the origin). The method keeps the active set
// primal-infeasible/dual-feasible and adds the most violated constraint each
// major iteration; it terminates in finitely many steps with either the
// optimum or a certificate that the polyhedron is empty.

#include <cmath>
#include <limits>
#include <vector>

#include "advgame/types.hpp"

namespace advgame {

enum class QpStatus { optimal, infeasible, iteration_limit };

struct QpResult {
  QpStatus status = QpStatus::infeasible;
  Vector v;                    // minimiser when status == optimal
  double max_violation = 0.0;  // max_i (b_i - a_i.v)^+ over normalised rows
  int iterations = 0;
};

class MinNormQp {
 public:
  explicit MinNormQp(int dim) : dim_(dim) {
    if (dim < 1) throw InputError("MinNormQp: dimension must be >= 1");
  }

  int dim() const { return dim_; }
  std::size_t num_constraints() const { return rows_.size(); }

  // Adds a.v >= b. Rows are stored scaled to unit norm; an all-zero row is
  // either vacuous (b <= 0) or makes the problem infeasible.
  void add_halfspace(const Vector& a, double b) {
    require_dim(a, dim_, "MinNormQp::add_halfspace");
    const double norm = a.norm();
    if (!(norm > 0.0)) {
      if (b > 0.0) trivially_infeasible_ = true;
      return;
    }
    rows_.push_back(a / norm);
    rhs_.push_back(b / norm);
  }

  // lo <= v <= hi coordinatewise.
  void add_box(const Vector& lo, const Vector& hi) {
    require_dim(lo, dim_, "MinNormQp::add_box");
    require_dim(hi, dim_, "MinNormQp::add_box");
    for (int i = 0; i < dim_; ++i) {
      Vector e = Vector::Zero(dim_);
      e[i] = 1.0;
      if (std::isfinite(lo[i])) add_halfspace(e, lo[i]);
      if (std::isfinite(hi[i])) add_halfspace(-e, -hi[i]);
    }
  }

  QpResult solve(double feasibility_tol = 1e-12) const;

 private:
  double violation(int i, const Vector& x) const {
    return rhs_[i] - rows_[i].dot(x);
  }

  int dim_;
  std::vector<Vector> rows_;
  std::vector<double> rhs_;
  bool trivially_infeasible_ = false;
};

namespace detail {

// Appends the constraint with transformed normal d = J^T n to the
// factorisation, rotating J so that d has zeros below position iq.
inline bool gi_add_constraint(Matrix& R, Matrix& J, Vector& d, int& iq,
                              double& r_norm) {
  const int n = static_cast<int>(J.rows());
  for (int j = n - 1; j >= iq + 1; --j) {
    double cc = d[j - 1];
    double ss = d[j];
    const double h = std::hypot(cc, ss);
    if (h == 0.0) continue;
    d[j] = 0.0;
    ss /= h;
    cc /= h;
    if (cc < 0.0) {
      cc = -cc;
      ss = -ss;
      d[j - 1] = -h;
    } else {
      d[j - 1] = h;
    }
    const double xny = ss / (1.0 + cc);
    for (int k = 0; k < n; ++k) {
      const double t1 = J(k, j - 1);
      const double t2 = J(k, j);
      J(k, j - 1) = t1 * cc + t2 * ss;
      J(k, j) = xny * (t1 + J(k, j - 1)) - t2;
    }
  }
  ++iq;
  for (int i = 0; i < iq; ++i) R(i, iq - 1) = d[i];
  if (std::abs(d[iq - 1]) <= std::numeric_limits<double>::epsilon() * r_norm) {
    return false;
  }
  r_norm = std::max(r_norm, std::abs(d[iq - 1]));
  return true;
}

// Removes active constraint at position l and restores R to upper-triangular
// form with Givens rotations mirrored onto J.
inline void gi_delete_constraint(Matrix& R, Matrix& J, std::vector<int>& active,
                                 std::vector<double>& u, int& iq, int l) {
  const int n = static_cast<int>(J.rows());
  for (int j = l; j < iq - 1; ++j) {
    active[j] = active[j + 1];
    u[j] = u[j + 1];
    R.col(j) = R.col(j + 1);
  }
  active.pop_back();
  u.pop_back();
  --iq;
  R.col(iq).setZero();
  for (int j = l; j < iq; ++j) {
    double cc = R(j, j);
    double ss = R(j + 1, j);
    const double h = std::hypot(cc, ss);
    if (h == 0.0) continue;
    cc /= h;
    ss /= h;
    R(j + 1, j) = 0.0;
    if (cc < 0.0) {
      R(j, j) = -h;
      cc = -cc;
      ss = -ss;
    } else {
      R(j, j) = h;
    }
    const double xny = ss / (1.0 + cc);
    for (int k = j + 1; k < iq; ++k) {
      const double t1 = R(j, k);
      const double t2 = R(j + 1, k);
      R(j, k) = t1 * cc + t2 * ss;
      R(j + 1, k) = xny * (t1 + R(j, k)) - t2;
    }
    for (int k = 0; k < n; ++k) {
      const double t1 = J(k, j);
      const double t2 = J(k, j + 1);
      J(k, j) = t1 * cc + t2 * ss;
      J(k, j + 1) = xny * (J(k, j) + t1) - t2;
    }
  }
}

}  // namespace detail

inline QpResult MinNormQp::solve(double feasibility_tol) const {
  QpResult result;
  const int n = dim_;
  const int m = static_cast<int>(rows_.size());
  if (trivially_infeasible_) {
    result.status = QpStatus::infeasible;
    return result;
  }

  Vector x = Vector::Zero(n);
  Matrix J = Matrix::Identity(n, n);
  Matrix R = Matrix::Zero(n, n);
  std::vector<int> active;
  std::vector<double> u;
  std::vector<bool> excluded(static_cast<std::size_t>(m), false);
  int iq = 0;
  double r_norm = 1.0;
  const double inf = std::numeric_limits<double>::infinity();
  const double tiny = 1e-14;
  const int max_iter = 50 * (m + n) + 100;

  auto finish = [&](QpStatus status) {
    result.status = status;
    result.v = x;
    double worst = 0.0;
    for (int i = 0; i < m; ++i) worst = std::max(worst, violation(i, x));
    result.max_violation = worst;
    return result;
  };

  while (true) {
    // Step 1: most violated constraint not yet in the active set.
    int ip = -1;
    double most = feasibility_tol;
    std::vector<bool> in_active(static_cast<std::size_t>(m), false);
    for (int a : active) in_active[a] = true;
    for (int i = 0; i < m; ++i) {
      if (in_active[i] || excluded[i]) continue;
      const double viol = violation(i, x);
      if (viol > most) {
        most = viol;
        ip = i;
      }
    }
    if (ip < 0) return finish(QpStatus::optimal);

    const Vector& np = rows_[ip];
    double u_plus = 0.0;
    double s_ip = -violation(ip, x);  // a.x - b < 0

    while (true) {
      if (++result.iterations > max_iter) {
        return finish(QpStatus::iteration_limit);
      }
      // Step 2a: primal direction z and dual direction r.
      Vector d = J.transpose() * np;
      Vector z = Vector::Zero(n);
      for (int j = iq; j < n; ++j) z += d[j] * J.col(j);
      Vector r = Vector::Zero(iq);
      for (int i = iq - 1; i >= 0; --i) {
        double sum = d[i];
        for (int j = i + 1; j < iq; ++j) sum -= R(i, j) * r[j];
        r[i] = sum / R(i, i);
      }

      // Step 2b: step length.
      double t1 = inf;
      int l = -1;
      for (int k = 0; k < iq; ++k) {
        if (r[k] > tiny) {
          const double ratio = u[k] / r[k];
          if (ratio < t1) {
            t1 = ratio;
            l = k;
          }
        }
      }
      double t2 = inf;
      const double zn = z.dot(np);
      if (z.norm() > tiny && zn > tiny) t2 = -s_ip / zn;
      const double t = std::min(t1, t2);
      if (t == inf) return finish(QpStatus::infeasible);

      if (t2 == inf) {
        // Dual step only.
        for (int k = 0; k < iq; ++k) u[k] -= t * r[k];
        u_plus += t;
        detail::gi_delete_constraint(R, J, active, u, iq, l);
        continue;
      }

      x += t * z;
      for (int k = 0; k < iq; ++k) u[k] -= t * r[k];
      u_plus += t;

      if (t == t2) {
        if (!detail::gi_add_constraint(R, J, d, iq, r_norm)) {
          // Numerically dependent on the active set: undo and skip it.
          --iq;
          R.col(iq).setZero();
          excluded[ip] = true;
          break;
        }
        active.push_back(ip);
        u.push_back(u_plus);
        break;
      }

      detail::gi_delete_constraint(R, J, active, u, iq, l);
      s_ip = std::min(-violation(ip, x), 0.0);
    }
  }
}

}  // namespace advgame
