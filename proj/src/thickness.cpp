#include "eqgrad/thickness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "eqgrad/errors.hpp"
#include "eqgrad/linalg.hpp"
#include "eqgrad/rng.hpp"

namespace eqgrad {

using Eigen::MatrixXd;
using Eigen::VectorXd;

EigenSplit EigenSplit::of(const MatrixXd& x, double cluster_tol) {
  RealSplit rs = real_split(x, cluster_tol);
  EigenSplit s;
  s.n_ = static_cast<int>(x.rows());
  s.x_ = x;
  s.eigenvalues_ = rs.eigenvalues;
  s.projections_ = rs.projectors;
  s.bases_ = rs.bases;
  double defect = s.projection_defect();
  if (defect > 1e-10) {
    std::ostringstream msg;
    msg << "eigenspace projections are inconsistent (defect " << defect << ")";
    throw Error(ErrorKind::decomposition, msg.str());
  }
  return s;
}

MatrixXd EigenSplit::flow(double t) const {
  MatrixXd e = MatrixXd::Zero(n_, n_);
  for (int j = 0; j < count(); ++j) e += std::exp(t * eigenvalues_[j]) * projections_[j];
  return e;
}

double EigenSplit::projection_defect() const {
  double d = 0.0;
  MatrixXd sum = MatrixXd::Zero(n_, n_);
  for (int j = 0; j < count(); ++j) {
    const MatrixXd& p = projections_[j];
    sum += p;
    d = std::max(d, (p * p - p).norm());
    for (int k = 0; k < j; ++k) d = std::max(d, (p * projections_[k] - projections_[k] * p).norm());
  }
  return std::max(d, (sum - MatrixXd::Identity(n_, n_)).norm());
}

int r_dimension(int n) {
  if (n < 2) throw Error(ErrorKind::domain, "r is defined for n >= 2");
  return (2 * n * n) / (n - 1) + 1;
}

namespace {

// calls f on each k-subset of {0..s-1} in lexicographic order until f returns false
template <class F>
void for_each_subset(int s, int k, F f) {
  std::vector<int> idx(k);
  for (int i = 0; i < k; ++i) idx[i] = i;
  while (true) {
    if (!f(idx)) return;
    int i = k - 1;
    while (i >= 0 && idx[i] == s - k + i) --i;
    if (i < 0) return;
    ++idx[i];
    for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

// e^{tX} v through the projections
VectorXd flow_apply(const EigenSplit& split, const std::vector<VectorXd>& parts, double t) {
  VectorXd out = VectorXd::Zero(split.dimension());
  for (int j = 0; j < split.count(); ++j) out += std::exp(t * split.eigenvalue(j)) * parts[j];
  return out;
}

double time_range(const EigenSplit& split) {
  double lmax = 0.0;
  for (int j = 0; j < split.count(); ++j) lmax = std::max(lmax, std::abs(split.eigenvalue(j)));
  return 30.0 / std::max(lmax, 1e-12);
}

// argmin_t |target - e^{tX} v| by a grid scan and Gauss-Newton polishing
double best_time(const EigenSplit& split, const VectorXd& v, const VectorXd& target, double* residual,
                 std::optional<double> start = {}) {
  std::vector<VectorXd> parts, dparts;
  for (int j = 0; j < split.count(); ++j) {
    parts.push_back(split.projection(j) * v);
    dparts.push_back(split.eigenvalue(j) * parts.back());
  }
  auto err = [&](double t) { return (target - flow_apply(split, parts, t)).norm(); };
  double t;
  if (start) {
    t = *start;
  } else {
    const double range = time_range(split);
    const int m = 1200;
    t = 0.0;
    double best = err(0.0);
    for (int k = 0; k <= m; ++k) {
      double s = -range + 2.0 * range * k / m;
      double e = err(s);
      if (e < best) best = e, t = s;
    }
  }
  double e = err(t);
  for (int it = 0; it < 60; ++it) {
    VectorXd r = target - flow_apply(split, parts, t);
    VectorXd d = flow_apply(split, dparts, t);
    double dd = d.squaredNorm();
    if (dd == 0.0) break;
    double step = d.dot(r) / dd;
    double tn = t + step, en = err(tn);
    if (!(en < e)) break;
    t = tn;
    e = en;
    if (std::abs(step) < 1e-15 * std::max(1.0, std::abs(t))) break;
  }
  if (residual) *residual = e;
  return t;
}

double best_matrix_time(const EigenSplit& split, const MatrixXd& g, double t0) {
  auto err = [&](double t) { return (g - split.flow(t)).norm(); };
  double t = t0, e = err(t);
  const double range = time_range(split);
  const int m = 1200;
  for (int k = 0; k <= m; ++k) {
    double s = -range + 2.0 * range * k / m;
    double es = err(s);
    if (es < e) e = es, t = s;
  }
  const MatrixXd& x = split.generator();
  for (int it = 0; it < 60; ++it) {
    MatrixXd r = g - split.flow(t);
    MatrixXd d = x * split.flow(t);
    double dd = d.squaredNorm();
    if (dd == 0.0) break;
    double step = (d.array() * r.array()).sum() / dd;
    double tn = t + step, en = err(tn);
    if (!(en < e)) break;
    t = tn;
    e = en;
    if (std::abs(step) < 1e-15 * std::max(1.0, std::abs(t))) break;
  }
  return t;
}

}  // namespace

ThickReport is_thick(const std::vector<VectorXd>& vectors, const EigenSplit& split, double tol) {
  if (vectors.empty()) throw Error(ErrorKind::precondition, "thickness needs at least one vector");
  const int s = static_cast<int>(vectors.size());
  ThickReport rep;
  for (int j = 0; j < split.count() && rep.thick; ++j) {
    const int d = split.eigenspace_dimension(j);
    if (s <= d) {
      rep.thick = false;
      rep.failing_space = j;
      rep.margin = 0.0;
      break;
    }
    std::vector<VectorXd> w;
    for (const auto& v : vectors) w.push_back(split.basis(j).transpose() * (split.projection(j) * v));
    for_each_subset(s, d, [&](const std::vector<int>& idx) {
      MatrixXd m(d, d);
      double prod = 1.0;
      for (int c = 0; c < d; ++c) {
        m.col(c) = w[idx[c]];
        prod *= w[idx[c]].norm();
      }
      double margin = prod > 0.0 ? std::abs(m.determinant()) / prod : 0.0;
      rep.margin = std::min(rep.margin, margin);
      if (margin <= tol) {
        rep.thick = false;
        rep.failing_space = j;
        rep.failing_subset = idx;
        return false;
      }
      return true;
    });
  }
  return rep;
}

FlowFormCheck thick_free_check(const std::vector<VectorXd>& tuple, const MatrixXd& g, const EigenSplit& split,
                               double tol) {
  FlowFormCheck out;
  for (const auto& v : tuple) {
    double res = 0.0;
    out.times.push_back(best_time(split, v, g * v, &res));
    out.constraint_residual = std::max(out.constraint_residual, res / v.norm());
  }
  out.constraint_satisfied = out.constraint_residual < 1e-2 * tol;
  std::vector<double> sorted = out.times;
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
  out.t = best_matrix_time(split, g, sorted[sorted.size() / 2]);
  Eigen::JacobiSVD<MatrixXd> svd(g - split.flow(out.t));
  out.distance = svd.singularValues()(0);
  out.violation = out.constraint_satisfied && out.distance >= tol;
  return out;
}

ThickFreeVerdict thick_free_oracle(const std::vector<VectorXd>& tuple, const CentralizerAlgebra& z,
                                   const EigenSplit& split, int trials, std::uint64_t seed) {
  const int s = static_cast<int>(tuple.size());
  const int n = split.dimension();
  const int m = z.dimension();
  // A c stacks sigma(c) v_j
  MatrixXd a(s * n, m);
  for (int b = 0; b < m; ++b)
    for (int j = 0; j < s; ++j) a.block(j * n, b, n, 1) = z.basis[b] * tuple[j];
  Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(a);

  std::vector<std::vector<VectorXd>> parts(s);
  for (int j = 0; j < s; ++j)
    for (int k = 0; k < split.count(); ++k) parts[j].push_back(split.projection(k) * tuple[j]);
  auto stacked_flow = [&](const VectorXd& t) {
    VectorXd b(s * n);
    for (int j = 0; j < s; ++j) b.segment(j * n, n) = flow_apply(split, parts[j], t(j));
    return b;
  };

  ThickFreeVerdict out;
  const double range = time_range(split) / 20.0;
  for (int trial = 0; trial < trials; ++trial) {
    Rng rng(seed, static_cast<std::uint64_t>(trial));
    ++out.trials;
    bool solved = false;
    for (int start = 0; start < 10 && !solved; ++start) {
      VectorXd t(s);
      for (int j = 0; j < s; ++j) t(j) = rng.uniform(-range, range);
      VectorXd c = cod.solve(stacked_flow(t));
      // alternating: centralizer coefficients, then each t_j
      for (int it = 0; it < 30; ++it) {
        MatrixXd g = z.combine(c);
        for (int j = 0; j < s; ++j) t(j) = best_time(split, tuple[j], g * tuple[j], nullptr, t(j));
        c = cod.solve(stacked_flow(t));
      }
      // joint Gauss-Newton on (c, t)
      for (int it = 0; it < 60; ++it) {
        VectorXd r = a * c - stacked_flow(t);
        if (r.norm() < 1e-14) break;
        MatrixXd jac(s * n, m + s);
        jac.setZero();
        jac.leftCols(m) = a;
        for (int j = 0; j < s; ++j) {
          VectorXd d = VectorXd::Zero(n);
          for (int k = 0; k < split.count(); ++k) d += split.eigenvalue(k) * std::exp(t(j) * split.eigenvalue(k)) * parts[j][k];
          jac.block(j * n, m + j, n, 1) = -d;
        }
        VectorXd step = jac.completeOrthogonalDecomposition().solve(-r);
        c += step.head(m);
        t += step.tail(s);
      }
      MatrixXd g = z.combine(c);
      FlowFormCheck chk = thick_free_check(tuple, g, split);
      if (!chk.constraint_satisfied) continue;
      solved = true;
      ++out.satisfied;
      out.max_distance = std::max(out.max_distance, chk.distance);
      if (chk.violation) {
        ++out.violations;
        if (!out.counterexample) out.counterexample = g;
      }
    }
    if (!solved) ++out.unresolved;
  }
  return out;
}

bool f_membership(const std::vector<VectorXd>& tuple, const EigenSplit& split, double tol) {
  const int r = r_dimension(split.dimension());
  if (static_cast<int>(tuple.size()) != r) {
    std::ostringstream msg;
    msg << "tuple has " << tuple.size() << " entries, expected r = " << r;
    throw Error(ErrorKind::arity, msg.str());
  }
  return is_thick(tuple, split, tol).thick;
}

OrbitRank orbit_map_rank(const std::vector<VectorXd>& tuple, const CentralizerAlgebra& z, const MatrixXd& x,
                         double rel_tol) {
  const int n = static_cast<int>(x.rows());
  const int r = static_cast<int>(tuple.size());
  const int m = z.dimension();
  MatrixXd map(r * (n - 1), m);
  for (int i = 0; i < r; ++i) {
    MatrixXd q = orthogonal_complement(x * tuple[i]);
    for (int b = 0; b < m; ++b) map.block(i * (n - 1), b, n - 1, 1) = q.transpose() * (z.basis[b] * tuple[i]);
  }
  Eigen::JacobiSVD<MatrixXd> svd(map);
  OrbitRank out;
  out.singular_values = svd.singularValues();
  out.centralizer_dimension = m;
  double top = out.singular_values.size() ? out.singular_values(0) : 0.0;
  for (int k = 0; k < out.singular_values.size(); ++k)
    if (out.singular_values(k) > rel_tol * top) ++out.rank;
  out.expected = out.rank == m - 1;
  return out;
}

}  // namespace eqgrad
