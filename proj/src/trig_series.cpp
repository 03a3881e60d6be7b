#include "eqgrad/trig_series.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace eqgrad {

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

}  // namespace

double wrap_angle(double x) {
  double r = std::fmod(x, two_pi);
  if (r < 0) r += two_pi;
  if (r >= two_pi) r = 0.0;
  return r;
}

double circle_distance(double a, double b) { return std::abs(std::remainder(a - b, two_pi)); }

TrigSeries::TrigSeries(double a0, std::vector<double> cos_coeffs, std::vector<double> sin_coeffs)
    : a0_(a0), a_(std::move(cos_coeffs)), b_(std::move(sin_coeffs)) {
  resize(static_cast<int>(std::max(a_.size(), b_.size())));
}

void TrigSeries::resize(int degree) {
  a_.resize(degree, 0.0);
  b_.resize(degree, 0.0);
}

TrigSeries TrigSeries::cosine(int k, double amplitude) {
  if (k == 0) return constant(amplitude);
  std::vector<double> a(k, 0.0);
  a[k - 1] = amplitude;
  return TrigSeries(0.0, a, {});
}

TrigSeries TrigSeries::sine(int k, double amplitude) {
  if (k == 0) return TrigSeries();
  std::vector<double> b(k, 0.0);
  b[k - 1] = amplitude;
  return TrigSeries(0.0, {}, b);
}

TrigSeries TrigSeries::fit(const std::function<double(double)>& f, int degree, int samples) {
  if (samples < 2 * degree + 1) throw std::invalid_argument("too few samples for degree");
  std::vector<double> v(samples);
  for (int j = 0; j < samples; ++j) v[j] = f(two_pi * j / samples);
  double a0 = 0.0;
  for (double s : v) a0 += s;
  a0 /= samples;
  std::vector<double> a(degree), b(degree);
  for (int k = 1; k <= degree; ++k) {
    double ca = 0.0, cb = 0.0;
    for (int j = 0; j < samples; ++j) {
      double x = two_pi * j / samples * k;
      ca += v[j] * std::cos(x);
      cb += v[j] * std::sin(x);
    }
    double w = (2 * k == samples) ? 1.0 / samples : 2.0 / samples;
    a[k - 1] = ca * w;
    b[k - 1] = cb * w;
  }
  return TrigSeries(a0, a, b);
}

double TrigSeries::operator()(double x) const {
  double s = a0_;
  for (int k = 1; k <= degree(); ++k) s += a_[k - 1] * std::cos(k * x) + b_[k - 1] * std::sin(k * x);
  return s;
}

double TrigSeries::derivative(double x, int order) const {
  if (order <= 4) return jet(x)[order];
  return derivative().derivative(x, order - 1);
}

Jet TrigSeries::jet(double x) const {
  Jet j{a0_, 0.0, 0.0, 0.0, 0.0};
  for (int k = 1; k <= degree(); ++k) {
    double c = std::cos(k * x), s = std::sin(k * x);
    double p = a_[k - 1] * c + b_[k - 1] * s;   // value
    double q = -a_[k - 1] * s + b_[k - 1] * c;  // d/d(kx)
    double kk = k;
    j[0] += p;
    j[1] += kk * q;
    j[2] -= kk * kk * p;
    j[3] -= kk * kk * kk * q;
    j[4] += kk * kk * kk * kk * p;
  }
  return j;
}

TrigSeries TrigSeries::derivative() const {
  std::vector<double> a(degree()), b(degree());
  for (int k = 1; k <= degree(); ++k) {
    a[k - 1] = k * b_[k - 1];
    b[k - 1] = -k * a_[k - 1];
  }
  return TrigSeries(0.0, a, b);
}

TrigSeries TrigSeries::reflected() const {
  std::vector<double> b = b_;
  for (double& v : b) v = -v;
  return TrigSeries(a0_, a_, b);
}

TrigSeries TrigSeries::shifted(double alpha) const {
  std::vector<double> a(degree()), b(degree());
  for (int k = 1; k <= degree(); ++k) {
    double c = std::cos(k * alpha), s = std::sin(k * alpha);
    // a cos(k(x+alpha)) + b sin(k(x+alpha))
    a[k - 1] = a_[k - 1] * c + b_[k - 1] * s;
    b[k - 1] = -a_[k - 1] * s + b_[k - 1] * c;
  }
  return TrigSeries(a0_, a, b);
}

TrigSeries TrigSeries::dilated(int k) const {
  if (k < 1) throw std::invalid_argument("dilation factor must be positive");
  std::vector<double> a(degree() * k, 0.0), b(degree() * k, 0.0);
  for (int m = 1; m <= degree(); ++m) {
    a[m * k - 1] = a_[m - 1];
    b[m * k - 1] = b_[m - 1];
  }
  return TrigSeries(a0_, a, b);
}

TrigSeries TrigSeries::operator+(const TrigSeries& o) const {
  TrigSeries r = *this;
  r.resize(std::max(degree(), o.degree()));
  r.a0_ += o.a0_;
  for (int k = 0; k < o.degree(); ++k) {
    r.a_[k] += o.a_[k];
    r.b_[k] += o.b_[k];
  }
  return r;
}

TrigSeries TrigSeries::operator-(const TrigSeries& o) const { return *this + o * -1.0; }

TrigSeries TrigSeries::operator*(double s) const {
  TrigSeries r = *this;
  r.a0_ *= s;
  for (auto& v : r.a_) v *= s;
  for (auto& v : r.b_) v *= s;
  return r;
}

TrigSeries TrigSeries::operator*(const TrigSeries& o) const {
  // complex form: c_k = (a_k - i b_k)/2 for k > 0, c_0 = a0
  const int d1 = degree(), d2 = o.degree(), d = d1 + d2;
  auto coeffs = [](const TrigSeries& t) {
    std::vector<std::pair<double, double>> c(2 * t.degree() + 1);
    int n = t.degree();
    c[n] = {t.a0_, 0.0};
    for (int k = 1; k <= n; ++k) {
      c[n + k] = {t.a_[k - 1] / 2, -t.b_[k - 1] / 2};
      c[n - k] = {t.a_[k - 1] / 2, t.b_[k - 1] / 2};
    }
    return c;
  };
  auto c1 = coeffs(*this), c2 = coeffs(o);
  std::vector<std::pair<double, double>> c(2 * d + 1, {0.0, 0.0});
  for (int i = -d1; i <= d1; ++i) {
    for (int j = -d2; j <= d2; ++j) {
      auto [x1, y1] = c1[i + d1];
      auto [x2, y2] = c2[j + d2];
      c[i + j + d].first += x1 * x2 - y1 * y2;
      c[i + j + d].second += x1 * y2 + x2 * y1;
    }
  }
  std::vector<double> a(d), b(d);
  for (int k = 1; k <= d; ++k) {
    a[k - 1] = 2 * c[d + k].first;
    b[k - 1] = -2 * c[d + k].second;
  }
  return TrigSeries(c[d].first, a, b);
}

double TrigSeries::sup_norm(int samples) const {
  double m = 0.0;
  for (int j = 0; j < samples; ++j) m = std::max(m, std::abs((*this)(two_pi * j / samples)));
  return m;
}

PeriodicFunction::PeriodicFunction(TrigSeries series)
    : series_(series),
      jet_(std::make_shared<const JetEvaluator>([s = std::move(series)](double x) { return s.jet(x); })) {}

PeriodicFunction::PeriodicFunction(JetEvaluator jet)
    : jet_(std::make_shared<const JetEvaluator>(std::move(jet))) {}

Jet PeriodicFunction::jet(double x) const { return (*jet_)(x); }

PeriodicFunction PeriodicFunction::quotient(const PeriodicFunction& num, const PeriodicFunction& den) {
  return PeriodicFunction([num, den](double x) {
    static constexpr double binom[5][5] = {
        {1, 0, 0, 0, 0}, {1, 1, 0, 0, 0}, {1, 2, 1, 0, 0}, {1, 3, 3, 1, 0}, {1, 4, 6, 4, 1}};
    Jet a = num.jet(x), b = den.jet(x), q{};
    for (int n = 0; n <= 4; ++n) {
      double acc = a[n];
      for (int k = 1; k <= n; ++k) acc -= binom[n][k] * b[k] * q[n - k];
      q[n] = acc / b[0];
    }
    return q;
  });
}

PeriodicFunction PeriodicFunction::reciprocal(const PeriodicFunction& den) {
  return quotient(PeriodicFunction(TrigSeries::constant(1.0)), den);
}

PeriodicFunction PeriodicFunction::product(const PeriodicFunction& a, const PeriodicFunction& b) {
  if (a.series_ && b.series_) return PeriodicFunction(*a.series_ * *b.series_);
  return PeriodicFunction([a, b](double x) {
    static constexpr double binom[5][5] = {
        {1, 0, 0, 0, 0}, {1, 1, 0, 0, 0}, {1, 2, 1, 0, 0}, {1, 3, 3, 1, 0}, {1, 4, 6, 4, 1}};
    Jet u = a.jet(x), v = b.jet(x), p{};
    for (int n = 0; n <= 4; ++n)
      for (int k = 0; k <= n; ++k) p[n] += binom[n][k] * u[k] * v[n - k];
    return p;
  });
}

PeriodicFunction PeriodicFunction::derivative() const {
  if (series_) return PeriodicFunction(series_->derivative());
  // the fourth derivative of the result is not available from a 4-jet
  return PeriodicFunction([f = *this](double x) {
    Jet j = f.jet(x);
    constexpr double h = 1e-3;
    Jet jp = f.jet(x + h), jm = f.jet(x - h);
    return Jet{j[1], j[2], j[3], j[4], (jp[4] - jm[4]) / (2 * h)};
  });
}

PeriodicFunction PeriodicFunction::scaled(double s) const {
  if (series_) return PeriodicFunction(*series_ * s);
  return PeriodicFunction([f = *this, s](double x) {
    Jet j = f.jet(x);
    for (double& v : j) v *= s;
    return j;
  });
}

}  // namespace eqgrad
