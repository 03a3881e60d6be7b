#include "eqgrad/torus.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "eqgrad/errors.hpp"

namespace eqgrad {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

double wrap_coordinate(double a) {
  double r = std::fmod(a, two_pi);
  if (r < 0.0) r += two_pi;
  if (r >= two_pi) r -= two_pi;
  return r;
}

double signed_delta(double a) {
  double r = std::remainder(a, two_pi);
  return r <= -std::numbers::pi ? r + two_pi : r;
}

FlowOptions<double> tight_options() {
  FlowOptions<double> opt;
  opt.abs_tol = 1e-12;
  opt.rel_tol = 1e-12;
  return opt;
}

}  // namespace

Vector2d wrap_torus(const Vector2d& p) { return {wrap_coordinate(p(0)), wrap_coordinate(p(1))}; }

Vector2d torus_delta(const Vector2d& a, const Vector2d& b) {
  return {signed_delta(a(0) - b(0)), signed_delta(a(1) - b(1))};
}

double torus_distance(const Vector2d& a, const Vector2d& b) { return torus_delta(a, b).norm(); }

double TorusFunction::operator()(const Vector2d& p) const {
  double s = 0.0;
  for (const auto& t : terms_) {
    double th = t.kx * p(0) + t.ky * p(1);
    s += t.a * std::cos(th) + t.b * std::sin(th);
  }
  return s;
}

Vector2d TorusFunction::gradient(const Vector2d& p) const {
  Vector2d g = Vector2d::Zero();
  for (const auto& t : terms_) {
    double th = t.kx * p(0) + t.ky * p(1);
    double d = -t.a * std::sin(th) + t.b * std::cos(th);
    g += d * Vector2d(t.kx, t.ky);
  }
  return g;
}

Matrix2d TorusFunction::hessian(const Vector2d& p) const {
  Matrix2d h = Matrix2d::Zero();
  for (const auto& t : terms_) {
    double th = t.kx * p(0) + t.ky * p(1);
    double d = -t.a * std::cos(th) - t.b * std::sin(th);
    Vector2d k(t.kx, t.ky);
    h += d * k * k.transpose();
  }
  return h;
}

TorusAffine TorusAffine::compose(const TorusAffine& o) const {
  TorusAffine r;
  r.linear = linear * o.linear;
  r.shift = wrap_torus(linear.cast<double>() * o.shift + shift);
  return r;
}

bool TorusAffine::same(const TorusAffine& o, double tol) const {
  return linear == o.linear && torus_distance(shift, o.shift) < tol;
}

TorusGroup TorusGroup::generated(const std::vector<TorusAffine>& generators) {
  for (const auto& g : generators) {
    Eigen::Matrix2i a = g.linear;
    Eigen::Matrix2i ata = a.transpose() * a;
    if (ata != Eigen::Matrix2i::Identity()) {
      throw Error(ErrorKind::precondition, "torus group generators must have signed permutation linear part");
    }
  }
  TorusGroup grp;
  for (std::size_t k = 0; k < grp.elements_.size(); ++k) {
    for (const auto& g : generators) {
      TorusAffine c = g.compose(grp.elements_[k]);
      bool known = std::any_of(grp.elements_.begin(), grp.elements_.end(),
                               [&](const TorusAffine& e) { return e.same(c); });
      if (known) continue;
      if (grp.elements_.size() >= 64) {
        throw Error(ErrorKind::unsupported_dimension, "torus group of order > 64 (shifts must be rational)");
      }
      grp.elements_.push_back(c);
    }
  }
  return grp;
}

std::vector<int> TorusGroup::stabilizer(const Vector2d& p, double tol) const {
  std::vector<int> out;
  for (int k = 0; k < order(); ++k)
    if (torus_distance(elements_[k](p), p) < tol) out.push_back(k);
  return out;
}

TorusMetric TorusMetric::flat() {
  return TorusMetric([](const Vector2d&) -> Matrix2d { return Matrix2d::Identity(); });
}

TorusMetric TorusMetric::fourier(const TorusFunction& g11, const TorusFunction& g12, const TorusFunction& g22) {
  return TorusMetric([g11, g12, g22](const Vector2d& p) -> Matrix2d {
    Matrix2d m;
    m << g11(p), g12(p), g12(p), g22(p);
    return m;
  });
}

double TorusMetric::positivity_margin(int m) const {
  double margin = std::numeric_limits<double>::infinity();
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      Vector2d p(two_pi * i / m, two_pi * j / m);
      Eigen::SelfAdjointEigenSolver<Matrix2d> es((*this)(p));
      margin = std::min(margin, es.eigenvalues()(0));
    }
  return margin;
}

double TorusMetric::invariance_defect(const TorusGroup& group, int m) const {
  double d = 0.0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      Vector2d p(two_pi * (i + 0.3) / m, two_pi * (j + 0.7) / m);
      for (const auto& e : group.elements()) {
        Matrix2d a = e.differential();
        d = std::max(d, (a.transpose() * (*this)(e(p)) * a - (*this)(p)).norm());
      }
    }
  return d;
}

SmoothField<double> gradient_field(const TorusFunction& f, const TorusMetric& g) {
  return SmoothField<double>(2, [f, g](const VectorXd& p) -> VectorXd {
    Vector2d q = p;
    return g(q).ldlt().solve(f.gradient(q));
  });
}

std::vector<CriticalPointDatum> find_critical_points(const TorusFunction& f, const TorusMetric& g,
                                                     const CriticalPointOptions& opt) {
  std::vector<Vector2d> found;
  const int m = opt.seeds;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      Vector2d p(two_pi * (i + 0.5) / m, two_pi * (j + 0.5) / m);
      bool ok = false;
      for (int it = 0; it < 50; ++it) {
        Vector2d grad = f.gradient(p);
        if (grad.norm() < 1e-13) {
          // polish; only linear convergence at degenerate points
          for (int k = 0; k < 100; ++k) {
            Eigen::FullPivLU<Matrix2d> lu(f.hessian(p));
            if (!lu.isInvertible()) break;
            Vector2d step = lu.solve(f.gradient(p));
            p -= step;
            if (step.norm() < 1e-14) break;
          }
          ok = true;
          break;
        }
        Matrix2d h = f.hessian(p);
        Eigen::FullPivLU<Matrix2d> lu(h);
        if (!lu.isInvertible()) break;
        Vector2d step = lu.solve(grad);
        double sn = step.norm();
        if (sn > 0.5) step *= 0.5 / sn;
        p -= step;
        if (sn < 1e-15) {
          ok = f.gradient(p).norm() < 1e-10;
          break;
        }
      }
      if (!ok && f.gradient(p).norm() < 1e-11) ok = true;
      if (!ok) continue;
      p = wrap_torus(p);
      bool dup = std::any_of(found.begin(), found.end(),
                             [&](const Vector2d& q) { return torus_distance(p, q) < opt.dedup; });
      if (!dup) found.push_back(p);
    }

  std::vector<CriticalPointDatum> pts;
  for (const auto& p : found) {
    CriticalPointDatum d;
    d.location = p;
    d.hessian = f.hessian(p);
    if (std::abs(d.hessian.determinant()) < opt.morse_threshold) {
      std::ostringstream msg;
      msg << "degenerate critical point at (" << p(0) << ", " << p(1) << "), det Hess = " << d.hessian.determinant();
      throw Error(ErrorKind::morse, msg.str());
    }
    Eigen::SelfAdjointEigenSolver<Matrix2d> es(d.hessian);
    d.index = static_cast<int>((es.eigenvalues().array() < 0.0).count());
    Matrix2d gm = g(p);
    d.linearization = linearization_from_hessian(d.hessian, gm);
    d.spectrum = gradient_spectrum(d.hessian, gm);
    pts.push_back(d);
  }
  // sinks, sources, saddles; each by location
  auto rank = [](int index) { return index == 2 ? 0 : index == 0 ? 1 : 2; };
  std::sort(pts.begin(), pts.end(), [&](const CriticalPointDatum& a, const CriticalPointDatum& b) {
    if (rank(a.index) != rank(b.index)) return rank(a.index) < rank(b.index);
    if (std::abs(a.location(0) - b.location(0)) > 1e-9) return a.location(0) < b.location(0);
    return a.location(1) < b.location(1);
  });
  int counts[3] = {0, 0, 0};
  for (auto& d : pts) {
    const char* kind = d.index == 2 ? "sink" : d.index == 0 ? "source" : "saddle";
    d.label = std::string(kind) + std::to_string(counts[d.index]++);
  }
  if (euler_sum(pts) != 0) {
    std::ostringstream msg;
    msg << "critical point search incomplete: Euler sum " << euler_sum(pts) << " with " << pts.size()
        << " points; refine the seed grid";
    throw Error(ErrorKind::resolution, msg.str());
  }
  return pts;
}

int euler_sum(const std::vector<CriticalPointDatum>& points) {
  int s = 0;
  for (const auto& p : points) s += p.index % 2 == 0 ? 1 : -1;
  return s;
}

std::optional<int> nearest_critical(const std::vector<CriticalPointDatum>& points, const Vector2d& p, double tol) {
  std::optional<int> best;
  double bd = tol;
  for (int k = 0; k < static_cast<int>(points.size()); ++k) {
    double d = torus_distance(points[k].location, p);
    if (d < bd) bd = d, best = k;
  }
  return best;
}

BasinLabel gradient_basin(const TorusFunction& f, const TorusMetric& g,
                          const std::vector<CriticalPointDatum>& points, const Vector2d& x0,
                          FlowDirection direction, double time_cap) {
  if (f.gradient(x0).norm() < 1e-12) throw Error(ErrorKind::precondition, "basin start is a critical point");
  SmoothField<double> x = gradient_field(f, g);
  const double sign = direction == FlowDirection::forward ? 1.0 : -1.0;
  FlowOptions<double> opt;
  opt.abs_tol = 1e-11;
  opt.rel_tol = 1e-11;
  BasinLabel out;
  VectorXd p = x0;
  double t = 0.0;
  const double dt = 0.5;
  while (t < time_cap) {
    p = flow(x, p, sign * dt, opt).endpoint;
    t += dt;
    if (auto k = nearest_critical(points, p, 1e-6)) {
      out.point = k;
      out.saddle = points[*k].index == 1;
      break;
    }
  }
  out.time = t;
  out.endpoint = wrap_torus(p);
  if (!out.point) {
    out.undecided = true;
    if (auto k = nearest_critical(points, p, 1e-3)) {
      out.saddle = points[*k].index == 1;
    }
  }
  return out;
}

Vector2d sphere_point(const TorusMetric& g, const Vector2d& p, const Vector2d& u, double radius) {
  Vector2d d = u.normalized();
  return p + radius / std::sqrt(d.dot(g(p) * d)) * d;
}

Vector2d sphere_direction(const TorusMetric&, const Vector2d& p, const Vector2d& q) {
  return torus_delta(q, p).normalized();
}

BasinSample omega_sample(const TorusFunction& f, const TorusMetric& g,
                         const std::vector<CriticalPointDatum>& points, int sink, int directions, double radius) {
  if (sink < 0 || sink >= static_cast<int>(points.size()) || !points[sink].sink()) {
    throw Error(ErrorKind::precondition, "omega_sample needs a sink");
  }
  BasinSample s;
  s.sink = sink;
  s.radius = radius;
  for (int k = 0; k < directions; ++k) {
    double a = two_pi * k / directions;
    Vector2d u(std::cos(a), std::sin(a));
    // exact zeros on the axes
    for (int c = 0; c < 2; ++c)
      if (std::abs(u(c)) < 1e-15) u(c) = 0.0;
    s.directions.push_back(u);
    s.labels.push_back(gradient_basin(f, g, points, sphere_point(g, points[sink].location, u, radius),
                                      FlowDirection::backward));
  }
  int undecided = 0;
  for (const auto& l : s.labels) {
    bool decided = l.point && !l.saddle;
    if (decided) s.fractions[*l.point] += 1.0 / directions;
    else ++undecided;
  }
  s.undecided_fraction = static_cast<double>(undecided) / directions;
  int pairs = 0, agree = 0;
  for (int k = 0; k < directions; ++k) {
    const auto& a = s.labels[k];
    const auto& b = s.labels[(k + 1) % directions];
    if (!(a.point && !a.saddle && b.point && !b.saddle)) continue;
    ++pairs;
    agree += *a.point == *b.point;
  }
  s.adjacent_agreement = pairs ? static_cast<double>(agree) / pairs : 1.0;
  return s;
}

Transfer sigma_transfer(const TorusFunction& f, const TorusMetric& g,
                        const std::vector<CriticalPointDatum>& points, int from, int to, const Vector2d& direction,
                        double radius) {
  const auto& a = points.at(from);
  const auto& b = points.at(to);
  double sign;
  if (a.sink() && b.source()) sign = -1.0;
  else if (a.source() && b.sink()) sign = 1.0;
  else throw Error(ErrorKind::precondition, "transfer runs between a sink and a source");

  SmoothField<double> x = gradient_field(f, g);
  FlowOptions<double> opt = tight_options();
  const Matrix2d gb = g(b.location);
  auto level = [&](const VectorXd& p) {
    Vector2d d = torus_delta(p, b.location);
    return std::sqrt(d.dot(gb * d));
  };
  VectorXd p = sphere_point(g, a.location, direction, radius);
  const double dt = 0.05, cap = 400.0;
  double t = 0.0;
  while (level(p) > radius) {
    if (t > cap) throw Error(ErrorKind::transfer, "trajectory did not reach the target sphere");
    VectorXd next = flow(x, p, sign * dt, opt).endpoint;
    if (level(next) <= radius) {
      double lo = 0.0, hi = dt;
      for (int it = 0; it < 60; ++it) {
        double mid = 0.5 * (lo + hi);
        if (level(flow(x, p, sign * mid, opt).endpoint) > radius) lo = mid;
        else hi = mid;
      }
      p = flow(x, p, sign * hi, opt).endpoint;
      t += hi;
      break;
    }
    p = next;
    t += dt;
    if (auto k = nearest_critical(points, p, 1e-6); k && *k != to) {
      std::ostringstream msg;
      msg << "trajectory converged to " << points[*k].label << " instead of " << b.label;
      throw Error(ErrorKind::transfer, msg.str());
    }
  }
  Transfer out;
  out.point = wrap_torus(p);
  out.direction = torus_delta(p, b.location).normalized();
  out.time = t;
  return out;
}

MetricFamily::MetricFamily(TorusMetric g, TorusFunction f, SmoothField<double> y, double eps_low, double eps_high)
    : g_(std::move(g)), f_(std::move(f)), y_(std::move(y)), low_(eps_low), high_(eps_high) {}

TorusMetric MetricFamily::at(double eps) const {
  if (!(eps > low_ && eps < high_)) {
    std::ostringstream msg;
    msg << "eps = " << eps << " outside the positivity window (" << low_ << ", " << high_ << ")";
    throw Error(ErrorKind::window, msg.str());
  }
  TorusMetric g = g_;
  TorusFunction f = f_;
  SmoothField<double> y = y_;
  return TorusMetric([g, f, y, eps](const Vector2d& p) -> Matrix2d {
    Matrix2d gp = g(p);
    Vector2d yp = y(VectorXd(p));
    if (yp.squaredNorm() == 0.0) return gp;
    Vector2d df = f.gradient(p);
    Vector2d v = gp.ldlt().solve(df) + eps * yp;
    double alpha = df.dot(v);
    if (!(alpha > 0.0)) {
      std::ostringstream msg;
      msg << "df(grad + eps Y) = " << alpha << " <= 0 at (" << p(0) << ", " << p(1) << ")";
      throw Error(ErrorKind::window, msg.str());
    }
    Matrix2d proj = Matrix2d::Identity() - v * df.transpose() / alpha;
    return proj.transpose() * gp * proj + df * df.transpose() / alpha;
  });
}

MetricFamily build_metric_family(const TorusMetric& g, const TorusFunction& f, const SmoothField<double>& y,
                                 const std::vector<CriticalPointDatum>& points, int grid) {
  for (const auto& c : points) {
    for (double r : {0.0, 0.25e-2, 0.5e-2, 1e-2})
      for (int k = 0; k < 16; ++k) {
        double a = two_pi * k / 16.0;
        Vector2d p = c.location + r * Vector2d(std::cos(a), std::sin(a));
        double yn = y(VectorXd(p)).norm();
        if (yn >= 1e-12) {
          std::ostringstream msg;
          msg << "field does not vanish near critical point " << c.label << " (|Y| = " << yn << ")";
          throw Error(ErrorKind::support, msg.str());
        }
      }
  }
  double low = -std::numeric_limits<double>::infinity(), high = std::numeric_limits<double>::infinity();
  for (int i = 0; i < grid; ++i)
    for (int j = 0; j < grid; ++j) {
      Vector2d p(two_pi * i / grid, two_pi * j / grid);
      Vector2d yp = y(VectorXd(p));
      if (yp.squaredNorm() == 0.0) continue;
      Vector2d df = f.gradient(p);
      double a = df.dot(g(p).ldlt().solve(df));
      double b = df.dot(yp);
      if (b < 0.0) high = std::min(high, a / -b);
      if (b > 0.0) low = std::max(low, -a / b);
    }
  return MetricFamily(g, f, y, low, high);
}

namespace {

// C-infinity bump of |d|^2 / rho^2 with value 1 at the centre
double bump(double u) { return u < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - u)) : 0.0; }
double bump_derivative(double u) {
  if (u >= 1.0) return 0.0;
  double s = 1.0 - u;
  return -bump(u) / (s * s);
}

struct Window {
  Vector2d center;
  double radius = 0.0;
  std::vector<Matrix2d> linear;  // A_gamma
  std::vector<Vector2d> centers; // gamma(center)
};

// basis field j of Z(q) = sum_gamma A beta(|d|^2 / rho^2) (W + K A^T d), d = q - gamma(c)
// parameters: W (j = 0, 1), then K column-major (j = 2..5)
SmoothField<double> bump_field(const Window& w, const VectorXd& theta) {
  Vector2d wv = theta.head(2);
  Matrix2d k = Matrix2d::Zero();
  if (theta.size() == 6) k = Eigen::Map<const Matrix2d>(theta.data() + 2);
  auto eval = [w, wv, k](const VectorXd& q) -> VectorXd {
    Vector2d out = Vector2d::Zero();
    for (std::size_t g = 0; g < w.linear.size(); ++g) {
      Vector2d d = torus_delta(q, w.centers[g]);
      double u = d.squaredNorm() / (w.radius * w.radius);
      if (u >= 1.0) continue;
      const Matrix2d& a = w.linear[g];
      out += a * (bump(u) * (wv + k * a.transpose() * d));
    }
    return out;
  };
  auto jac = [w, wv, k](const VectorXd& q) -> MatrixXd {
    Matrix2d out = Matrix2d::Zero();
    for (std::size_t g = 0; g < w.linear.size(); ++g) {
      Vector2d d = torus_delta(q, w.centers[g]);
      double r2 = w.radius * w.radius;
      double u = d.squaredNorm() / r2;
      if (u >= 1.0) continue;
      const Matrix2d& a = w.linear[g];
      Vector2d inner = wv + k * a.transpose() * d;
      out += a * (inner * (bump_derivative(u) * 2.0 / r2) * d.transpose() + bump(u) * k * a.transpose());
    }
    return out;
  };
  return SmoothField<double>(2, eval, jac);
}

Window choose_window(const TorusFunction& f, const TorusMetric& g, const std::vector<CriticalPointDatum>& points,
                     const Vector2d& x, double t, const VariationOptions& opt) {
  SmoothField<double> field = gradient_field(f, g);
  FlowOptions<double> fo = tight_options();
  Window w;
  double tp = opt.t_fraction * t;
  if (!(opt.t_fraction > 0.0 && opt.t_fraction < 1.0)) {
    throw Error(ErrorKind::precondition, "window time must lie strictly inside (0, t)");
  }
  Vector2d z = flow(field, VectorXd(x), tp, fo).endpoint;
  Vector2d y = flow(field, VectorXd(x), t, fo).endpoint;
  w.center = wrap_torus(z);
  std::vector<Vector2d> path;
  for (int k = 0; k <= 200; ++k) path.push_back(flow(field, VectorXd(x), t * k / 200.0, fo).endpoint);

  double crit = std::numeric_limits<double>::infinity();
  for (const auto& c : points) crit = std::min(crit, torus_distance(c.location, w.center));
  double limit = std::min({0.9 * torus_distance(w.center, x), 0.9 * torus_distance(w.center, y), crit - 2e-2});
  for (const auto& e : opt.group.elements()) {
    w.linear.push_back(e.differential());
    w.centers.push_back(e(w.center));
  }
  auto admissible = [&](double rho) {
    if (rho > limit) return false;
    // element 0 is the identity
    for (std::size_t gi = 1; gi < w.centers.size(); ++gi) {
      if (torus_distance(w.centers[gi], w.center) < 2.0 * rho) return false;
      for (const auto& p : path)
        if (torus_distance(p, w.centers[gi]) < rho) return false;
      for (const auto& c : points)
        if (torus_distance(c.location, w.centers[gi]) < rho + 2e-2) return false;
    }
    return true;
  };
  double rho = opt.window_radius > 0.0 ? opt.window_radius : std::min(0.5, limit);
  if (opt.window_radius > 0.0) {
    if (!admissible(rho)) throw Error(ErrorKind::support, "requested window cannot host the bump");
  } else {
    while (rho >= 1e-3 && !admissible(rho)) rho *= 0.7;
  }
  if (rho < 1e-3 || !admissible(rho)) {
    std::ostringstream msg;
    msg << "no admissible bump window around (" << w.center(0) << ", " << w.center(1) << ")";
    throw Error(ErrorKind::support, msg.str());
  }
  w.radius = rho;
  return w;
}

void check_variation_preconditions(const TorusFunction& f, const Vector2d& x, double t, const VariationOptions& opt) {
  if (f.gradient(x).norm() < 1e-8) throw Error(ErrorKind::precondition, "x is a critical point");
  if (t == 0.0) throw Error(ErrorKind::precondition, "flow time must be nonzero");
  if (opt.group.stabilizer(x).size() != 1) throw Error(ErrorKind::precondition, "stabilizer of x is not trivial");
}

double relative(const VectorXd& got, const VectorXd& want) {
  double n = want.norm();
  return n > 0.0 ? (got - want).norm() / n : got.norm();
}

}  // namespace

SmoothField<double> symmetric_bump(const TorusGroup& group, const Vector2d& center, double radius,
                                   const Vector2d& w, const Matrix2d& k) {
  if (!(radius > 0.0)) throw Error(ErrorKind::precondition, "bump radius must be positive");
  Window win;
  win.center = wrap_torus(center);
  win.radius = radius;
  for (const auto& e : group.elements()) {
    win.linear.push_back(e.differential());
    win.centers.push_back(e(win.center));
  }
  VectorXd theta(6);
  theta.head(2) = w;
  theta.tail(4) = Eigen::Map<const Eigen::Vector4d>(k.data());
  return bump_field(win, theta);
}

VariationReport point_variation(const TorusFunction& f, const TorusMetric& g,
                                const std::vector<CriticalPointDatum>& points, const Vector2d& x, double t,
                                const Vector2d& v, const VariationOptions& opt) {
  check_variation_preconditions(f, x, t, opt);
  Window w = choose_window(f, g, points, x, t, opt);
  SmoothField<double> field = gradient_field(f, g);
  FlowOptions<double> fo = tight_options();
  VariationReport rep;
  rep.x = x;
  rep.t = t;
  rep.y = flow(field, VectorXd(x), t, fo).endpoint;
  rep.window_center = w.center;
  rep.window_radius = w.radius;
  rep.target = v;
  rep.eps = opt.eps;

  // backward flow from y with variations delta_j' = -DX delta_j - Z_j
  std::vector<SmoothField<double>> basis;
  for (int j = 0; j < 2; ++j) basis.push_back(bump_field(w, VectorXd::Unit(2, j)));
  auto rhs = [&](const VectorXd& s) -> VectorXd {
    VectorXd out(6);
    VectorXd p = s.head(2);
    MatrixXd dx = field.jacobian(p);
    out.head(2) = -field(p);
    for (int j = 0; j < 2; ++j) out.segment(2 + 2 * j, 2) = -dx * s.segment(2 + 2 * j, 2) - basis[j](p);
    return out;
  };
  VectorXd s0 = VectorXd::Zero(6);
  s0.head(2) = rep.y;
  VectorXd s1 = integrate<double>(rhs, s0, t, fo).endpoint;
  Matrix2d m;
  m << s1.segment(2, 2), s1.segment(4, 2);
  if (std::abs(m.determinant()) < 1e-12 * std::max(1.0, m.squaredNorm())) {
    throw Error(ErrorKind::support, "bump window does not control the endpoint variation");
  }
  rep.amplitude = m.lu().solve(v);
  rep.predicted = m * rep.amplitude;

  SmoothField<double> z = bump_field(w, rep.amplitude);
  MetricFamily fam = build_metric_family(g, f, z, points, 128);
  auto end = [&](double e) -> VectorXd {
    return flow(gradient_field(f, fam.at(e)), VectorXd(rep.y), -t, fo).endpoint;
  };
  rep.finite_difference = (end(opt.eps) - end(-opt.eps)) / (2.0 * opt.eps);
  rep.relative_error = relative(rep.finite_difference, v);
  return rep;
}

VariationReport derivative_variation(const TorusFunction& f, const TorusMetric& g,
                                     const std::vector<CriticalPointDatum>& points, const Vector2d& x, double t,
                                     const Vector2d& v, const Eigen::Vector4d& u, const VariationOptions& opt) {
  check_variation_preconditions(f, x, t, opt);
  Window w = choose_window(f, g, points, x, t, opt);
  SmoothField<double> field = gradient_field(f, g);
  FlowOptions<double> fo = tight_options();
  VariationReport rep;
  rep.x = x;
  rep.t = t;
  auto fwd = flow_derivative(field, VectorXd(x), t, fo);
  rep.y = fwd.endpoint;
  Vector2d wv = fwd.derivative * v;
  rep.window_center = w.center;
  rep.window_radius = w.radius;
  rep.target = u;
  rep.eps = opt.eps;

  // lifted backward flow on TM; second derivatives of X by central differences of its jacobian
  const int m = 6;
  std::vector<SmoothField<double>> basis;
  for (int j = 0; j < m; ++j) basis.push_back(bump_field(w, VectorXd::Unit(m, j)));
  auto d2 = [&](const VectorXd& p, const VectorXd& a, const VectorXd& b) -> VectorXd {
    const double h = 1e-4;
    double an = a.norm();
    if (an == 0.0) return VectorXd::Zero(2);
    VectorXd e = a / an;
    return an * (field.jacobian(p + h * e) - field.jacobian(p - h * e)) * b / (2.0 * h);
  };
  auto rhs = [&](const VectorXd& s) -> VectorXd {
    VectorXd out(4 + 4 * m);
    VectorXd p = s.head(2), xi = s.segment(2, 2);
    MatrixXd dx = field.jacobian(p);
    out.head(2) = -field(p);
    out.segment(2, 2) = -dx * xi;
    for (int j = 0; j < m; ++j) {
      VectorXd dp = s.segment(4 + 4 * j, 2), dxi = s.segment(6 + 4 * j, 2);
      out.segment(4 + 4 * j, 2) = -dx * dp - basis[j](p);
      out.segment(6 + 4 * j, 2) = -d2(p, dp, xi) - dx * dxi - basis[j].jacobian(p) * xi;
    }
    return out;
  };
  VectorXd s0 = VectorXd::Zero(4 + 4 * m);
  s0.head(2) = rep.y;
  s0.segment(2, 2) = wv;
  VectorXd s1 = integrate<double>(rhs, s0, t, fo).endpoint;
  MatrixXd mm(4, m);
  for (int j = 0; j < m; ++j) mm.col(j) = s1.segment(4 + 4 * j, 4);
  Eigen::JacobiSVD<MatrixXd> svd(mm, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.singularValues()(3) < 1e-10 * std::max(1.0, svd.singularValues()(0))) {
    throw Error(ErrorKind::support, "bump window does not control the lifted endpoint variation");
  }
  rep.amplitude = svd.solve(VectorXd(u));
  rep.predicted = mm * rep.amplitude;

  SmoothField<double> z = bump_field(w, rep.amplitude);
  MetricFamily fam = build_metric_family(g, f, z, points, 128);
  auto end = [&](double e) -> VectorXd {
    auto r = flow_derivative(gradient_field(f, fam.at(e)), VectorXd(rep.y), -t, fo);
    VectorXd out(4);
    out.head(2) = r.endpoint;
    out.tail(2) = r.derivative * wv;
    return out;
  };
  rep.finite_difference = (end(opt.eps) - end(-opt.eps)) / (2.0 * opt.eps);
  rep.relative_error = relative(rep.finite_difference, VectorXd(u));
  return rep;
}

}  // namespace eqgrad
