#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <sstream>
#include <utility>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "eqgrad/errors.hpp"

namespace eqgrad {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar, typename F>
MatrixX<Scalar> central_jacobian(const F& f, const VectorX<Scalar>& x, Scalar h) {
  const Eigen::Index n = x.size();
  VectorX<Scalar> probe = x;
  VectorX<Scalar> f0 = f(x);
  MatrixX<Scalar> jac(f0.size(), n);
  for (Eigen::Index j = 0; j < n; ++j) {
    probe(j) = x(j) + h;
    VectorX<Scalar> plus = f(probe);
    probe(j) = x(j) - h;
    VectorX<Scalar> minus = f(probe);
    probe(j) = x(j);
    jac.col(j) = (plus - minus) / (Scalar(2) * h);
  }
  return jac;
}

template <typename Scalar = double>
class SmoothField {
 public:
  using Vector = VectorX<Scalar>;
  using Matrix = MatrixX<Scalar>;
  using Evaluator = std::function<Vector(const Vector&)>;
  using JacobianEvaluator = std::function<Matrix(const Vector&)>;

  static constexpr double default_fd_step = 1e-5;

  SmoothField(Eigen::Index dimension, Evaluator eval, JacobianEvaluator jacobian = {})
      : dim_(dimension), eval_(std::move(eval)), jac_(std::move(jacobian)) {}

  static SmoothField linear(const Matrix& a) {
    return SmoothField(
        a.rows(), [a](const Vector& x) -> Vector { return a * x; },
        [a](const Vector&) -> Matrix { return a; });
  }

  static SmoothField constant(const Vector& c) {
    const Eigen::Index n = c.size();
    return SmoothField(
        n, [c](const Vector&) -> Vector { return c; },
        [n](const Vector&) -> Matrix { return Matrix::Zero(n, n); });
  }

  static SmoothField zero(Eigen::Index n) { return constant(Vector::Zero(n)); }

  Eigen::Index dimension() const { return dim_; }
  bool has_analytic_jacobian() const { return static_cast<bool>(jac_); }

  Vector operator()(const Vector& x) const { return eval_(x); }

  Matrix jacobian(const Vector& x) const {
    if (jac_) return jac_(x);
    return central_jacobian<Scalar>(eval_, x, Scalar(default_fd_step));
  }

  // the same field with its jacobian forced through central differences
  SmoothField without_jacobian() const { return SmoothField(dim_, eval_); }

 private:
  Eigen::Index dim_;
  Evaluator eval_;
  JacobianEvaluator jac_;
};

template <typename Scalar>
SmoothField<Scalar> operator+(const SmoothField<Scalar>& x, const SmoothField<Scalar>& y) {
  using V = VectorX<Scalar>;
  using M = MatrixX<Scalar>;
  return SmoothField<Scalar>(
      x.dimension(), [x, y](const V& p) -> V { return x(p) + y(p); },
      [x, y](const V& p) -> M { return x.jacobian(p) + y.jacobian(p); });
}

template <typename Scalar>
SmoothField<Scalar> operator*(Scalar s, const SmoothField<Scalar>& x) {
  using V = VectorX<Scalar>;
  using M = MatrixX<Scalar>;
  return SmoothField<Scalar>(
      x.dimension(), [s, x](const V& p) -> V { return s * x(p); },
      [s, x](const V& p) -> M { return s * x.jacobian(p); });
}

template <typename Scalar>
SmoothField<Scalar> operator-(const SmoothField<Scalar>& x, const SmoothField<Scalar>& y) {
  return x + Scalar(-1) * y;
}

template <typename Scalar = double>
struct FlowOptions {
  Scalar abs_tol = Scalar(1e-10);
  Scalar rel_tol = Scalar(1e-10);
  Scalar max_norm = Scalar(1e8);
  Scalar min_step = Scalar(1e-13);
  std::size_t max_steps = 2'000'000;
  std::size_t fixed_steps = 0;  // nonzero: equal steps, no error control
};

template <typename Scalar = double>
struct FlowResult {
  VectorX<Scalar> endpoint;
  Scalar elapsed = 0;
  std::size_t steps = 0;
  std::size_t rejected = 0;
  Scalar max_error_estimate = 0;  // weighted RMS norm of accepted steps, <= 1 when adaptive
};

template <typename Scalar = double>
struct VariationalResult {
  VectorX<Scalar> endpoint;
  MatrixX<Scalar> derivative;
  FlowResult<Scalar> stats;
};

namespace detail {

// Dormand-Prince 5(4) tableau
template <typename Scalar>
struct DoPri {
  static constexpr Scalar c2 = Scalar(1) / 5, c3 = Scalar(3) / 10, c4 = Scalar(4) / 5,
                          c5 = Scalar(8) / 9;
  static constexpr Scalar a21 = Scalar(1) / 5;
  static constexpr Scalar a31 = Scalar(3) / 40, a32 = Scalar(9) / 40;
  static constexpr Scalar a41 = Scalar(44) / 45, a42 = Scalar(-56) / 15, a43 = Scalar(32) / 9;
  static constexpr Scalar a51 = Scalar(19372) / 6561, a52 = Scalar(-25360) / 2187,
                          a53 = Scalar(64448) / 6561, a54 = Scalar(-212) / 729;
  static constexpr Scalar a61 = Scalar(9017) / 3168, a62 = Scalar(-355) / 33,
                          a63 = Scalar(46732) / 5247, a64 = Scalar(49) / 176,
                          a65 = Scalar(-5103) / 18656;
  static constexpr Scalar b1 = Scalar(35) / 384, b3 = Scalar(500) / 1113, b4 = Scalar(125) / 192,
                          b5 = Scalar(-2187) / 6784, b6 = Scalar(11) / 84;
  static constexpr Scalar e1 = Scalar(71) / 57600, e3 = Scalar(-71) / 16695,
                          e4 = Scalar(71) / 1920, e5 = Scalar(-17253) / 339200,
                          e6 = Scalar(22) / 525, e7 = Scalar(-1) / 40;
};

template <typename Scalar>
void check_state(const VectorX<Scalar>& y, Scalar bound, Scalar t) {
  using std::isfinite;
  Scalar norm = y.template lpNorm<Eigen::Infinity>();
  if (!isfinite(static_cast<double>(norm)) || norm > bound) {
    std::ostringstream msg;
    msg << "state norm " << static_cast<double>(norm) << " exceeds bound "
        << static_cast<double>(bound) << " at flow time " << static_cast<double>(t);
    throw Error(ErrorKind::divergence, msg.str());
  }
}

}  // namespace detail

// Integrates y' = rhs(y) from y0 over signed time t.
template <typename Scalar, typename Rhs>
FlowResult<Scalar> integrate(const Rhs& rhs, const VectorX<Scalar>& y0, Scalar t,
                             const FlowOptions<Scalar>& opt = {}) {
  using std::abs;
  using std::max;
  using std::min;
  using std::pow;
  using std::sqrt;
  using V = VectorX<Scalar>;
  using T = detail::DoPri<Scalar>;

  FlowResult<Scalar> res;
  res.endpoint = y0;
  if (t == Scalar(0)) return res;

  const Scalar dir = t > 0 ? Scalar(1) : Scalar(-1);
  const Scalar span = abs(t);
  V y = y0;
  V k1 = rhs(y), k2, k3, k4, k5, k6, k7, ynew, err;
  Scalar done = 0;

  auto stage = [&](Scalar h) {
    k2 = rhs(V(y + h * (T::a21 * k1)));
    k3 = rhs(V(y + h * (T::a31 * k1 + T::a32 * k2)));
    k4 = rhs(V(y + h * (T::a41 * k1 + T::a42 * k2 + T::a43 * k3)));
    k5 = rhs(V(y + h * (T::a51 * k1 + T::a52 * k2 + T::a53 * k3 + T::a54 * k4)));
    k6 = rhs(V(y + h * (T::a61 * k1 + T::a62 * k2 + T::a63 * k3 + T::a64 * k4 + T::a65 * k5)));
    ynew = y + h * (T::b1 * k1 + T::b3 * k3 + T::b4 * k4 + T::b5 * k5 + T::b6 * k6);
    k7 = rhs(ynew);
    err = h * (T::e1 * k1 + T::e3 * k3 + T::e4 * k4 + T::e5 * k5 + T::e6 * k6 + T::e7 * k7);
  };

  if (opt.fixed_steps > 0) {
    const Scalar h = t / Scalar(opt.fixed_steps);
    for (std::size_t i = 0; i < opt.fixed_steps; ++i) {
      stage(h);
      y = ynew;
      k1 = k7;
      detail::check_state(y, opt.max_norm, h * Scalar(i + 1));
    }
    res.endpoint = y;
    res.elapsed = t;
    res.steps = opt.fixed_steps;
    return res;
  }

  auto weighted_norm = [&](const V& e, const V& a, const V& b) {
    Scalar acc = 0;
    for (Eigen::Index i = 0; i < e.size(); ++i) {
      Scalar sc = opt.abs_tol + opt.rel_tol * max(abs(a(i)), abs(b(i)));
      Scalar q = e(i) / sc;
      acc += q * q;
    }
    return sqrt(acc / Scalar(e.size()));
  };

  // starting step from the local scale of y and y'
  Scalar h;
  {
    Scalar d0 = weighted_norm(y, y, y), d1 = weighted_norm(k1, y, y);
    h = (d0 < Scalar(1e-5) || d1 < Scalar(1e-5)) ? Scalar(1e-6) : Scalar(0.01) * d0 / d1;
    h = min(h, span);
  }

  while (done < span) {
    if (res.steps + res.rejected >= opt.max_steps) {
      throw Error(ErrorKind::stiffness, "step budget exhausted before reaching the target time");
    }
    bool last = false;
    if (done + h >= span) {
      h = span - done;
      last = true;
    }
    stage(dir * h);
    Scalar en = weighted_norm(err, y, ynew);
    using std::isfinite;
    if (!isfinite(static_cast<double>(en))) en = Scalar(1e10);
    if (en <= Scalar(1)) {
      done = last ? span : done + h;
      y = ynew;
      k1 = k7;
      ++res.steps;
      res.max_error_estimate = max(res.max_error_estimate, en);
      detail::check_state(y, opt.max_norm, dir * done);
      Scalar fac = en == Scalar(0) ? Scalar(5) : Scalar(0.9) * pow(en, Scalar(-0.2));
      h *= min(Scalar(5), max(Scalar(0.2), fac));
    } else {
      ++res.rejected;
      Scalar fac = Scalar(0.9) * pow(en, Scalar(-0.2));
      h *= max(Scalar(0.1), fac);
      if (h < opt.min_step * max(Scalar(1), span)) {
        std::ostringstream msg;
        msg << "step size underflow at flow time " << static_cast<double>(dir * done);
        throw Error(ErrorKind::stiffness, msg.str());
      }
    }
  }
  res.endpoint = y;
  res.elapsed = t;
  return res;
}

template <typename Scalar>
FlowResult<Scalar> flow(const SmoothField<Scalar>& x, const VectorX<Scalar>& x0, Scalar t,
                        const FlowOptions<Scalar>& opt = {}) {
  return integrate<Scalar>([&x](const VectorX<Scalar>& p) { return x(p); }, x0, t, opt);
}

template <typename Scalar>
VariationalResult<Scalar> flow_derivative(const SmoothField<Scalar>& x,
                                          const VectorX<Scalar>& x0, Scalar t,
                                          const FlowOptions<Scalar>& opt = {}) {
  const Eigen::Index n = x.dimension();
  VectorX<Scalar> state(n + n * n);
  state.head(n) = x0;
  Eigen::Map<MatrixX<Scalar>>(state.data() + n, n, n).setIdentity();
  auto rhs = [&x, n](const VectorX<Scalar>& s) {
    VectorX<Scalar> out(s.size());
    VectorX<Scalar> p = s.head(n);
    out.head(n) = x(p);
    Eigen::Map<const MatrixX<Scalar>> m(s.data() + n, n, n);
    Eigen::Map<MatrixX<Scalar>>(out.data() + n, n, n) = x.jacobian(p) * m;
    return out;
  };
  FlowOptions<Scalar> o = opt;
  o.max_norm = std::numeric_limits<Scalar>::max();
  auto res = integrate<Scalar>(rhs, state, t, o);
  detail::check_state(VectorX<Scalar>(res.endpoint.head(n)), opt.max_norm, t);
  VariationalResult<Scalar> out;
  out.endpoint = res.endpoint.head(n);
  out.derivative = Eigen::Map<const MatrixX<Scalar>>(res.endpoint.data() + n, n, n);
  out.stats = res;
  out.stats.endpoint = out.endpoint;
  return out;
}

// Signed time for the scalar field h d/dx to carry a to b: the integral of 1/h.
template <typename Scalar, typename H>
Scalar time_of_flight(const H& h, Scalar a, Scalar b, Scalar tol = Scalar(1e-12)) {
  using std::abs;
  if (a == b) return Scalar(0);
  constexpr int scan = 512;
  Scalar h0 = h(a);
  Scalar scale = abs(h0);
  for (int i = 0; i <= scan; ++i) {
    Scalar s = a + (b - a) * Scalar(i) / Scalar(scan);
    Scalar v = h(s);
    scale = std::max(scale, abs(v));
    if (v == Scalar(0) || (v > 0) != (h0 > 0)) {
      std::ostringstream msg;
      msg << "field vanishes between " << static_cast<double>(a) << " and "
          << static_cast<double>(b);
      throw Error(ErrorKind::singular_integrand, msg.str());
    }
  }
  Scalar error = 0;
  auto integrand = [&h](Scalar s) { return Scalar(1) / h(s); };
  Scalar value = boost::math::quadrature::gauss_kronrod<Scalar, 31>::integrate(
      integrand, a, b, 10, tol, &error);
  return value;
}

template <typename Scalar>
Scalar time_of_flight(const SmoothField<Scalar>& x, Scalar a, Scalar b,
                      Scalar tol = Scalar(1e-12)) {
  if (x.dimension() != 1) {
    throw Error(ErrorKind::precondition, "time of flight needs a one-dimensional field");
  }
  auto h = [&x](Scalar s) {
    VectorX<Scalar> p(1);
    p(0) = s;
    return x(p)(0);
  };
  return time_of_flight<Scalar>(h, a, b, tol);
}

template <typename Scalar>
SmoothField<Scalar> lie_bracket(const SmoothField<Scalar>& x, const SmoothField<Scalar>& y) {
  if (x.dimension() != y.dimension()) {
    throw Error(ErrorKind::precondition, "bracket of fields of different dimension");
  }
  using V = VectorX<Scalar>;
  return SmoothField<Scalar>(x.dimension(), [x, y](const V& p) -> V {
    return y.jacobian(p) * x(p) - x.jacobian(p) * y(p);
  });
}

// The field (X(x), DX(x) v) on the doubled space.
template <typename Scalar>
SmoothField<Scalar> tangent_lift(const SmoothField<Scalar>& x) {
  using V = VectorX<Scalar>;
  using M = MatrixX<Scalar>;
  const Eigen::Index n = x.dimension();
  auto eval = [x, n](const V& s) -> V {
    V out(2 * n);
    V p = s.head(n);
    out.head(n) = x(p);
    out.tail(n) = x.jacobian(p) * s.tail(n);
    return out;
  };
  auto jac = [x, n](const V& s) -> M {
    V p = s.head(n);
    V v = s.tail(n);
    M out = M::Zero(2 * n, 2 * n);
    M dx = x.jacobian(p);
    out.topLeftCorner(n, n) = dx;
    out.bottomRightCorner(n, n) = dx;
    auto dxv = [&x, &v](const V& q) -> V { return x.jacobian(q) * v; };
    out.bottomLeftCorner(n, n) = central_jacobian<Scalar>(dxv, p, Scalar(1e-4));
    return out;
  };
  return SmoothField<Scalar>(2 * n, eval, jac);
}

// Central difference in s of the flow of X + s[X, Y] started at p. Equals
// Y(flow_t(p)) when p is outside the support of Y; the caller owns that check.
template <typename Scalar>
VectorX<Scalar> variation_of_flow(const SmoothField<Scalar>& x, const SmoothField<Scalar>& y,
                                  const VectorX<Scalar>& p, Scalar t, Scalar s = Scalar(1e-4),
                                  const FlowOptions<Scalar>& opt = {}) {
  SmoothField<Scalar> bracket = lie_bracket(x, y);
  auto plus = flow(x + s * bracket, p, t, opt).endpoint;
  auto minus = flow(x + (-s) * bracket, p, t, opt).endpoint;
  return (plus - minus) / (Scalar(2) * s);
}

}  // namespace eqgrad
