#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <complex>
#include <vector>

#include "eqgrad/errors.hpp"

namespace eqgrad {

using Exponent = std::array<int, 3>;

// Monomials in n <= 3 variables of total degree <= d, graded; within a degree
// ordered by (e1 + e2, e2).
class MonomialBasis {
 public:
  MonomialBasis(int n, int degree) : n_(n), degree_(degree) {
    if (n < 1 || n > 3) throw Error(ErrorKind::unsupported_dimension, "polynomial jets support n <= 3");
    for (int d = 0; d <= degree; ++d) {
      if (n == 1) {
        exps_.push_back({d, 0, 0});
      } else if (n == 2) {
        for (int b = 0; b <= d; ++b) exps_.push_back({d - b, b, 0});
      } else {
        for (int s = 0; s <= d; ++s)
          for (int c = 0; c <= s; ++c) exps_.push_back({d - s, s - c, c});
      }
    }
  }

  int n() const { return n_; }
  int degree() const { return degree_; }
  int size() const { return static_cast<int>(exps_.size()); }
  const Exponent& exponent(int k) const { return exps_[k]; }
  static int total(const Exponent& e) { return e[0] + e[1] + e[2]; }

  // number of monomials of degree < d
  int offset(int d) const {
    if (n_ == 1) return d;
    if (n_ == 2) return d * (d + 1) / 2;
    return d * (d + 1) * (d + 2) / 6;
  }
  int index(const Exponent& e) const {
    int d = total(e);
    if (n_ == 1) return d;
    if (n_ == 2) return offset(d) + e[1];
    int s = e[1] + e[2];
    return offset(d) + s * (s + 1) / 2 + e[2];
  }

 private:
  int n_, degree_;
  std::vector<Exponent> exps_;
};

// Polynomial map R^n -> R^n (or C^n) truncated at a fixed degree; column k of
// the coefficient matrix multiplies the k-th monomial.
template <class S>
class PolyMap {
 public:
  using Matrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<S, Eigen::Dynamic, 1>;

  PolyMap(int n, int degree) : basis_(n, degree), c_(Matrix::Zero(n, basis_.size())) {}

  static PolyMap linear(const Matrix& a, int degree) {
    PolyMap p(static_cast<int>(a.rows()), degree);
    for (int j = 0; j < p.dimension(); ++j) {
      Exponent e{0, 0, 0};
      e[j] = 1;
      p.c_.col(p.basis_.index(e)) = a.col(j);
    }
    return p;
  }
  static PolyMap identity(int n, int degree) { return linear(Matrix::Identity(n, n), degree); }

  int dimension() const { return basis_.n(); }
  int degree() const { return basis_.degree(); }
  const MonomialBasis& basis() const { return basis_; }
  const Matrix& coefficients() const { return c_; }
  Matrix& coefficients() { return c_; }

  S get(int component, const Exponent& e) const { return c_(component, basis_.index(e)); }
  void set(int component, const Exponent& e, S v) { c_(component, basis_.index(e)) = v; }
  void add(int component, const Exponent& e, S v) { c_(component, basis_.index(e)) += v; }

  Matrix linear_part() const {
    const int n = dimension();
    Matrix a(n, n);
    for (int j = 0; j < n; ++j) {
      Exponent e{0, 0, 0};
      e[j] = 1;
      a.col(j) = c_.col(basis_.index(e));
    }
    return a;
  }

  // monomial values at x
  template <class T>
  Eigen::Matrix<T, Eigen::Dynamic, 1> monomials(const Eigen::Matrix<T, Eigen::Dynamic, 1>& x) const {
    const int n = dimension(), d = degree();
    std::array<std::vector<T>, 3> pw;
    for (int j = 0; j < n; ++j) {
      pw[j].assign(d + 1, T(1));
      for (int k = 1; k <= d; ++k) pw[j][k] = pw[j][k - 1] * x(j);
    }
    Eigen::Matrix<T, Eigen::Dynamic, 1> m(basis_.size());
    for (int k = 0; k < basis_.size(); ++k) {
      const Exponent& e = basis_.exponent(k);
      T v(1);
      for (int j = 0; j < n; ++j) v *= pw[j][e[j]];
      m(k) = v;
    }
    return m;
  }

  Vector operator()(const Vector& x) const { return c_ * monomials<S>(x); }

  Matrix jacobian(const Vector& x) const {
    const int n = dimension();
    Matrix jac(n, n);
    for (int j = 0; j < n; ++j) jac.col(j) = derivative(j)(x);
    return jac;
  }

  // componentwise partial derivative; the degree drops by one but the basis is kept
  PolyMap derivative(int j) const {
    PolyMap out(dimension(), degree());
    for (int k = 0; k < basis_.size(); ++k) {
      Exponent e = basis_.exponent(k);
      if (e[j] == 0) continue;
      S f = S(double(e[j]));
      e[j] -= 1;
      out.c_.col(basis_.index(e)) += f * c_.col(k);
    }
    return out;
  }

  PolyMap with_degree(int d) const {
    PolyMap out(dimension(), d);
    for (int k = 0; k < basis_.size(); ++k) {
      const Exponent& e = basis_.exponent(k);
      if (MonomialBasis::total(e) <= d) out.c_.col(out.basis_.index(e)) = c_.col(k);
    }
    return out;
  }

  // x -> A P(x)
  PolyMap left_multiply(const Matrix& a) const {
    PolyMap out(static_cast<int>(a.rows()), degree());
    out.c_ = a * c_;
    return out;
  }

  // x -> P(B x), truncated at the same degree
  PolyMap compose_linear(const Matrix& b) const {
    const int n = dimension(), d = degree();
    // powers of the linear forms (B x)_j as scalar jets
    std::array<std::vector<Vector>, 3> pw;
    for (int j = 0; j < n; ++j) {
      Vector form = Vector::Zero(basis_.size());
      for (int i = 0; i < n; ++i) {
        Exponent e{0, 0, 0};
        e[i] = 1;
        form(basis_.index(e)) = b(j, i);
      }
      pw[j].push_back(unit());
      for (int k = 1; k <= d; ++k) pw[j].push_back(product(pw[j][k - 1], form, d));
    }
    PolyMap out(n, d);
    for (int k = 0; k < basis_.size(); ++k) {
      if (c_.col(k).isZero(0.0)) continue;
      const Exponent& e = basis_.exponent(k);
      Vector m = pw[0][e[0]];
      for (int j = 1; j < n; ++j) m = product(m, pw[j][e[j]], d);
      out.c_ += c_.col(k) * m.transpose();
    }
    return out;
  }

  // truncated product of two scalar jets in this basis
  Vector product(const Vector& a, const Vector& b, int cap) const {
    Vector out = Vector::Zero(basis_.size());
    for (int i = 0; i < basis_.size(); ++i) {
      if (a(i) == S(0)) continue;
      const Exponent& ei = basis_.exponent(i);
      int di = MonomialBasis::total(ei);
      for (int j = 0; j < basis_.size(); ++j) {
        if (b(j) == S(0)) continue;
        const Exponent& ej = basis_.exponent(j);
        if (di + MonomialBasis::total(ej) > cap) break;  // graded order
        Exponent e{ei[0] + ej[0], ei[1] + ej[1], ei[2] + ej[2]};
        out(basis_.index(e)) += a(i) * b(j);
      }
    }
    return out;
  }

  Vector unit() const {
    Vector u = Vector::Zero(basis_.size());
    u(0) = S(1);
    return u;
  }

  // Dself(x) * v(x) truncated at the degree
  PolyMap apply_derivative(const PolyMap& v) const {
    PolyMap out(dimension(), degree());
    for (int j = 0; j < dimension(); ++j) {
      PolyMap dj = derivative(j);
      Vector vj = v.c_.row(j).transpose();
      for (int i = 0; i < dimension(); ++i) {
        Vector di = dj.c_.row(i).transpose();
        out.c_.row(i) += product(di, vj, degree()).transpose();
      }
    }
    return out;
  }

  // max over monomials of degree d of the Euclidean norm of the coefficient vector
  double degree_norm(int d) const {
    double m = 0.0;
    if (d > degree()) return 0.0;
    for (int k = basis_.offset(d); k < basis_.offset(d + 1) && k < basis_.size(); ++k) {
      m = std::max(m, static_cast<double>(c_.col(k).norm()));
    }
    return m;
  }
  double coefficient_norm() const {
    double m = 0.0;
    for (int d = 0; d <= degree(); ++d) m = std::max(m, degree_norm(d));
    return m;
  }

  PolyMap operator+(const PolyMap& o) const {
    PolyMap r = *this;
    r.c_ += o.c_;
    return r;
  }
  PolyMap operator-(const PolyMap& o) const {
    PolyMap r = *this;
    r.c_ -= o.c_;
    return r;
  }
  PolyMap operator*(S s) const {
    PolyMap r = *this;
    r.c_ *= s;
    return r;
  }

  template <class T>
  PolyMap<T> cast() const {
    PolyMap<T> r(dimension(), degree());
    r.coefficients() = c_.template cast<T>();
    return r;
  }

 private:
  MonomialBasis basis_;
  Matrix c_;
};

}  // namespace eqgrad
