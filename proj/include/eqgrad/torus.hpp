#pragma once

#include <Eigen/Dense>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "eqgrad/ode.hpp"
#include "eqgrad/spectra.hpp"

namespace eqgrad {

using Eigen::Matrix2d;
using Eigen::Vector2d;

Vector2d wrap_torus(const Vector2d& p);
// representative of a - b in (-pi, pi]^2
Vector2d torus_delta(const Vector2d& a, const Vector2d& b);
double torus_distance(const Vector2d& a, const Vector2d& b);

// a cos(k.x) + b sin(k.x)
struct FourierTerm {
  int kx = 0, ky = 0;
  double a = 0.0, b = 0.0;
};

class TorusFunction {
 public:
  TorusFunction() = default;
  explicit TorusFunction(std::vector<FourierTerm> terms) : terms_(std::move(terms)) {}
  static TorusFunction constant(double c) { return TorusFunction({{0, 0, c, 0.0}}); }

  double operator()(const Vector2d& p) const;
  Vector2d gradient(const Vector2d& p) const;
  Matrix2d hessian(const Vector2d& p) const;
  const std::vector<FourierTerm>& terms() const { return terms_; }

 private:
  std::vector<FourierTerm> terms_;
};

// Affine isometry p -> A p + shift of the flat square torus, A a signed permutation.
struct TorusAffine {
  Eigen::Matrix2i linear = Eigen::Matrix2i::Identity();
  Vector2d shift = Vector2d::Zero();

  Vector2d operator()(const Vector2d& p) const { return wrap_torus(linear.cast<double>() * p + shift); }
  Matrix2d differential() const { return linear.cast<double>(); }
  TorusAffine compose(const TorusAffine& o) const;  // this after o
  bool same(const TorusAffine& o, double tol = 1e-9) const;
};

class TorusGroup {
 public:
  TorusGroup() : elements_{TorusAffine{}} {}
  // closure of the generators; order capped at 64
  static TorusGroup generated(const std::vector<TorusAffine>& generators);

  int order() const { return static_cast<int>(elements_.size()); }
  const TorusAffine& element(int k) const { return elements_[k]; }
  const std::vector<TorusAffine>& elements() const { return elements_; }
  std::vector<int> stabilizer(const Vector2d& p, double tol = 1e-9) const;

 private:
  std::vector<TorusAffine> elements_;
};

class TorusMetric {
 public:
  using Evaluator = std::function<Matrix2d(const Vector2d&)>;

  TorusMetric() : TorusMetric(flat()) {}
  explicit TorusMetric(Evaluator eval) : eval_(std::move(eval)) {}
  static TorusMetric flat();
  static TorusMetric fourier(const TorusFunction& g11, const TorusFunction& g12, const TorusFunction& g22);

  Matrix2d operator()(const Vector2d& p) const { return eval_(p); }
  // minimal eigenvalue over an m x m grid
  double positivity_margin(int m = 64) const;
  // max over the grid and the group of |A^T G(gamma p) A - G(p)|
  double invariance_defect(const TorusGroup& group, int m = 32) const;

 private:
  Evaluator eval_;
};

SmoothField<double> gradient_field(const TorusFunction& f, const TorusMetric& g);

struct CriticalPointDatum {
  std::string label;
  Vector2d location;
  int index = 0;
  Matrix2d hessian;
  Eigen::MatrixXd linearization;  // D grad^g f at the point
  std::optional<EigenSpectrum> spectrum;
  bool sink() const { return index == 2; }
  bool source() const { return index == 0; }
};

struct CriticalPointOptions {
  int seeds = 64;  // per axis
  double dedup = 1e-6;
  double morse_threshold = 1e-8;
};

std::vector<CriticalPointDatum> find_critical_points(const TorusFunction& f, const TorusMetric& g,
                                                     const CriticalPointOptions& opt = {});
int euler_sum(const std::vector<CriticalPointDatum>& points);
// index of the critical point nearest to p, if within tol
std::optional<int> nearest_critical(const std::vector<CriticalPointDatum>& points, const Vector2d& p,
                                    double tol);

enum class FlowDirection { forward, backward };

struct BasinLabel {
  std::optional<int> point;  // critical point reached
  bool saddle = false;       // converged to a saddle (separatrix)
  bool undecided = false;    // time cap hit away from all critical points
  double time = 0.0;
  Vector2d endpoint;
};

BasinLabel gradient_basin(const TorusFunction& f, const TorusMetric& g,
                          const std::vector<CriticalPointDatum>& points, const Vector2d& x0,
                          FlowDirection direction, double time_cap = 400.0);

// point at metric distance ~radius from p in the Euclidean direction u
Vector2d sphere_point(const TorusMetric& g, const Vector2d& p, const Vector2d& u, double radius);
Vector2d sphere_direction(const TorusMetric& g, const Vector2d& p, const Vector2d& q);

struct BasinSample {
  int sink = 0;
  double radius = 1e-2;
  std::vector<Vector2d> directions;
  std::vector<BasinLabel> labels;
  std::map<int, double> fractions;  // critical point -> fraction of directions
  double undecided_fraction = 0.0;
  double adjacent_agreement = 0.0;  // fraction of adjacent direction pairs with equal labels
};

BasinSample omega_sample(const TorusFunction& f, const TorusMetric& g,
                         const std::vector<CriticalPointDatum>& points, int sink, int directions,
                         double radius = 1e-2);

struct Transfer {
  Vector2d direction;  // unit Euclidean direction at the target
  Vector2d point;
  double time = 0.0;
};

// from the sphere around `from` along the flow towards `to` (backward when from is a sink)
Transfer sigma_transfer(const TorusFunction& f, const TorusMetric& g,
                        const std::vector<CriticalPointDatum>& points, int from, int to, const Vector2d& direction,
                        double radius = 1e-2);

class MetricFamily {
 public:
  MetricFamily(TorusMetric g, TorusFunction f, SmoothField<double> y, double eps_low, double eps_high);

  TorusMetric at(double eps) const;
  double eps_low() const { return low_; }
  double eps_high() const { return high_; }
  const SmoothField<double>& field() const { return y_; }

 private:
  TorusMetric g_;
  TorusFunction f_;
  SmoothField<double> y_;
  double low_, high_;
};

// g_eps with grad^{g_eps} f = grad^g f + eps Y; Y must vanish near Crit(f)
MetricFamily build_metric_family(const TorusMetric& g, const TorusFunction& f, const SmoothField<double>& y,
                                 const std::vector<CriticalPointDatum>& points, int grid = 256);

// sum_gamma A beta(|q - gamma c|^2 / r^2) (w + K A^T (q - gamma c)), beta(u) = exp(1 - 1/(1 - u))
SmoothField<double> symmetric_bump(const TorusGroup& group, const Vector2d& center, double radius,
                                   const Vector2d& w, const Matrix2d& k = Matrix2d::Zero());

struct VariationReport {
  Vector2d x, y;
  double t = 0.0;
  Vector2d window_center;
  double window_radius = 0.0;
  Eigen::VectorXd target;       // v (2) or u (4)
  Eigen::VectorXd predicted;    // from the variational equation
  Eigen::VectorXd finite_difference;
  double relative_error = 0.0;
  double eps = 1e-4;
  Eigen::VectorXd amplitude;    // bump coefficients W (and K)
};

struct VariationOptions {
  double t_fraction = 0.5;      // window centred on Phi_{t'}(x), t' = t_fraction * t
  double window_radius = 0.0;   // 0: chosen automatically
  double eps = 1e-4;
  TorusGroup group;
};

// point variation: d/de Phi^{g_e}_{-t}(y) = v at e = 0
VariationReport point_variation(const TorusFunction& f, const TorusMetric& g,
                                const std::vector<CriticalPointDatum>& points, const Vector2d& x, double t,
                                const Vector2d& v, const VariationOptions& opt = {});
// derivative variation: d/de DPhi^{g_e}_{-t}(w) = u in T_v(TM), w = DPhi_t(x) v
VariationReport derivative_variation(const TorusFunction& f, const TorusMetric& g,
                                     const std::vector<CriticalPointDatum>& points, const Vector2d& x, double t,
                                     const Vector2d& v, const Eigen::Vector4d& u, const VariationOptions& opt = {});

}  // namespace eqgrad
