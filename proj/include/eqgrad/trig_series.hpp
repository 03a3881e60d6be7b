#pragma once

#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

namespace eqgrad {

// value and first four derivatives at a point
using Jet = std::array<double, 5>;

// a0 + sum_k a_k cos(kx) + b_k sin(kx), k = 1..degree
class TrigSeries {
 public:
  TrigSeries() = default;
  TrigSeries(double a0, std::vector<double> cos_coeffs, std::vector<double> sin_coeffs);

  static TrigSeries constant(double c) { return TrigSeries(c, {}, {}); }
  static TrigSeries cosine(int k, double amplitude = 1.0);
  static TrigSeries sine(int k, double amplitude = 1.0);
  // least-squares trigonometric interpolation from `samples` equispaced values
  static TrigSeries fit(const std::function<double(double)>& f, int degree, int samples);

  int degree() const { return static_cast<int>(a_.size()); }
  double a0() const { return a0_; }
  const std::vector<double>& cos_coeffs() const { return a_; }
  const std::vector<double>& sin_coeffs() const { return b_; }

  double operator()(double x) const;
  double derivative(double x, int order = 1) const;
  Jet jet(double x) const;

  TrigSeries derivative() const;
  TrigSeries reflected() const;           // x -> -x
  TrigSeries shifted(double alpha) const;  // x -> x + alpha
  TrigSeries dilated(int k) const;         // x -> k x

  TrigSeries operator+(const TrigSeries& o) const;
  TrigSeries operator-(const TrigSeries& o) const;
  TrigSeries operator*(const TrigSeries& o) const;
  TrigSeries operator*(double s) const;

  double sup_norm(int samples = 4096) const;

 private:
  void resize(int degree);

  double a0_ = 0.0;
  std::vector<double> a_, b_;
};

inline TrigSeries operator*(double s, const TrigSeries& t) { return t * s; }

// A smooth 2pi-periodic function known through its 4-jet; keeps the Fourier
// coefficients when it has them.
class PeriodicFunction {
 public:
  using JetEvaluator = std::function<Jet(double)>;

  PeriodicFunction(TrigSeries series);  // NOLINT: implicit by design
  explicit PeriodicFunction(JetEvaluator jet);

  static PeriodicFunction quotient(const PeriodicFunction& num, const PeriodicFunction& den);
  static PeriodicFunction reciprocal(const PeriodicFunction& den);
  static PeriodicFunction product(const PeriodicFunction& a, const PeriodicFunction& b);

  double operator()(double x) const { return jet(x)[0]; }
  Jet jet(double x) const;
  double derivative(double x, int order = 1) const { return jet(x)[order]; }

  PeriodicFunction derivative() const;
  PeriodicFunction scaled(double s) const;
  const std::optional<TrigSeries>& series() const { return series_; }

 private:
  std::optional<TrigSeries> series_;
  std::shared_ptr<const JetEvaluator> jet_;
};

double wrap_angle(double x);       // into [0, 2pi)
double circle_distance(double a, double b);

}  // namespace eqgrad
