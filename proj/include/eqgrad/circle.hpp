#pragma once

#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "eqgrad/ode.hpp"
#include "eqgrad/trig_series.hpp"

namespace eqgrad {

// X = h d/dx on R / 2piZ
class CircleField {
 public:
  explicit CircleField(PeriodicFunction h) : h_(std::move(h)) {}
  explicit CircleField(TrigSeries h) : h_(std::move(h)) {}

  const PeriodicFunction& h() const { return h_; }
  double operator()(double x) const { return h_(x); }
  Jet jet(double x) const { return h_.jet(x); }
  double sup_norm(int samples = 4096) const;

  SmoothField<double> as_field() const;

 private:
  PeriodicFunction h_;
};

struct ZeroOptions {
  int grid = 4096;
  double degeneracy = 1e-8;
  double polish_tol = 1e-12;
};

struct ZeroDatum {
  double location;    // in [0, 2pi)
  double derivative;  // h'(location)
};

std::vector<ZeroDatum> find_zeros(const CircleField& x, const ZeroOptions& opt = {});

// u(x) = (x - z) exp(int_z^x [lambda/h(s) - 1/(s - z)] ds) on (z - R, z + R),
// with x measured on the lift of the circle through z.
class LinearizingChart {
 public:
  LinearizingChart(PeriodicFunction h, double center, double rate, double radius);

  double center() const { return z_; }
  double rate() const { return lambda_; }
  double radius() const { return radius_; }

  double operator()(double x) const;
  double derivative(double x) const;
  double inverse(double u) const;
  double lower_value() const { return lower_; }  // u(z - R)
  double upper_value() const { return upper_; }  // u(z + R)

 private:
  double log_factor(double x) const;

  PeriodicFunction h_;
  double z_, lambda_, radius_;
  double c0_, c1_, c2_;  // series of the regularised integrand at z
  double lower_ = 0.0, upper_ = 0.0;
};

// Default radius: 0.4 times the distance to the nearest other zero.
LinearizingChart linearizing_coordinate(const CircleField& x, const ZeroDatum& z,
                                        std::optional<double> radius = {},
                                        const ZeroOptions& opt = {});

// sigma(x) = u^{-1}(-u(x)): fixes z, reverses the side, preserves X.
class LocalInvolution {
 public:
  explicit LocalInvolution(LinearizingChart chart) : chart_(std::move(chart)) {}
  double operator()(double x) const;
  const LinearizingChart& chart() const { return chart_; }
  // largest offset d > 0 with sigma defined on [z, z + d]
  double admissible_offset() const;

 private:
  LinearizingChart chart_;
};

LocalInvolution local_involution(const CircleField& x, const ZeroDatum& z,
                                 std::optional<double> radius = {}, const ZeroOptions& opt = {});

struct ChiOptions {
  ZeroOptions zeros;
  double quad_tol = 1e-12;
};

struct ChiBreakdown {
  std::vector<ZeroDatum> zeros;
  std::vector<double> t_plus, t_minus, rho;
  double chi = 0.0;
};

// fractions[i] in (0, 1] places t_i^+ at that fraction of the admissible
// offset to the right of the i-th zero; empty means 1/2 everywhere.
ChiBreakdown chi_breakdown(const CircleField& x, const std::vector<double>& fractions = {},
                           const ChiOptions& opt = {});
double chi(const CircleField& x, const ChiOptions& opt = {});
double chi_with_choices(const CircleField& x, const std::vector<double>& fractions,
                        const ChiOptions& opt = {});

// x -> orientation * x + shift + p(x), with sup |p'| < 0.9
class CircleDiffeo {
 public:
  CircleDiffeo(int orientation, double shift, TrigSeries perturbation);

  static CircleDiffeo identity() { return CircleDiffeo(1, 0.0, TrigSeries()); }
  static CircleDiffeo rotation(double alpha) { return CircleDiffeo(1, alpha, TrigSeries()); }
  static CircleDiffeo reflection() { return CircleDiffeo(-1, 0.0, TrigSeries()); }

  int orientation() const { return orientation_; }
  double operator()(double x) const;
  double derivative(double x) const;
  double inverse(double y) const;

 private:
  int orientation_;
  double shift_;
  TrigSeries p_;
  double p_sup_ = 0.0;
};

struct Pushforward {
  CircleField field;
  double aliasing_error;
};

Pushforward pushforward(const CircleDiffeo& phi, const CircleField& x, int degree = 128);

struct CircleSignature {
  int zero_count = 0;
  std::vector<double> derivatives;  // cyclic order starting at the first zero in [0, 2pi)
  double chi = 0.0;
};

CircleSignature signature(const CircleField& x, const ChiOptions& opt = {});
bool equivalent(const CircleSignature& a, const CircleSignature& b, double tol = 1e-6);
bool equivalent(const CircleField& x, const CircleField& y, double tol = 1e-6);

// h = f' / g for the metric g(x) dx^2
CircleField gradient_field_on_circle(const PeriodicFunction& f, const PeriodicFunction& g);

struct CircleIsometry {
  int orientation = 1;
  double shift = 0.0;

  double operator()(double x) const { return wrap_angle(orientation * x + shift); }
  CircleIsometry operator*(const CircleIsometry& o) const;
  CircleIsometry inverse() const;
};

class CircleGroup {
 public:
  explicit CircleGroup(std::vector<CircleIsometry> elements);

  static CircleGroup trivial();
  static CircleGroup cyclic(int k);
  static CircleGroup dihedral(int k);
  static CircleGroup reflection();

  const std::vector<CircleIsometry>& elements() const { return elements_; }
  int order() const { return static_cast<int>(elements_.size()); }
  bool orientation_preserving() const;
  bool same_orbit(double x, double y, double tol = 1e-6) const;

 private:
  std::vector<CircleIsometry> elements_;
};

struct CircleGenericity {
  std::vector<ZeroDatum> critical_points;
  bool orbit_condition = true;
  bool chi_required = false;
  double chi = 0.0;
  bool chi_condition = true;
  bool generic = true;
  std::optional<std::pair<ZeroDatum, ZeroDatum>> witness;
};

CircleGenericity check_circle_genericity(const PeriodicFunction& f, const PeriodicFunction& g,
                                         const CircleGroup& group, double tol = 1e-6);

struct IntervalFit {
  double t = 0.0;
  double residual = 0.0;
};

// Fits phi = flow_t on samples lying in one zero-free arc of X.
IntervalFit interval_automorphism_time(const CircleField& x, const std::vector<double>& samples,
                                       const std::vector<double>& images);

struct AutReduction {
  int element = 0;
  CircleIsometry gamma;
  double t = 0.0;
  double residual = 0.0;
  std::vector<double> residual_per_element;
};

AutReduction circle_aut_reduction(const CircleField& x, const CircleGroup& group,
                                  const std::function<double(double)>& phi, int samples = 64);

// flow of X applied to many points at once, unrolled coordinates
std::vector<double> circle_flow(const CircleField& x, const std::vector<double>& points, double t,
                                const FlowOptions<double>& opt = {});

}  // namespace eqgrad
