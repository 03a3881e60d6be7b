#include "eqgrad/circle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <boost/math/tools/minima.hpp>

namespace eqgrad {

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

double gk_integral(const std::function<double(double)>& f, double a, double b, double tol) {
  double err = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 8, tol, &err);
}

// index of the arc (z_i, z_{i+1}) containing x, or -1 when x is a zero
int arc_of(const std::vector<ZeroDatum>& zeros, double x) {
  double w = wrap_angle(x);
  const int n = static_cast<int>(zeros.size());
  for (int i = 0; i < n; ++i) {
    double a = zeros[i].location;
    double len = (i + 1 < n) ? zeros[i + 1].location - a : zeros[0].location + two_pi - a;
    double off = wrap_angle(w - a);
    if (off > 0.0 && off < len) return i;
  }
  return -1;
}

// lift y into the arc of the i-th zero, i.e. to (z_i, z_i + len)
double lift_into_arc(const std::vector<ZeroDatum>& zeros, int i, double y) {
  return zeros[i].location + wrap_angle(y - zeros[i].location);
}

}  // namespace

double CircleField::sup_norm(int samples) const {
  double m = 0.0;
  for (int j = 0; j < samples; ++j) m = std::max(m, std::abs(h_(two_pi * j / samples)));
  return m;
}

SmoothField<double> CircleField::as_field() const {
  auto h = h_;
  return SmoothField<double>(
      1, [h](const Eigen::VectorXd& p) { return Eigen::VectorXd::Constant(1, h(p(0))); },
      [h](const Eigen::VectorXd& p) { return Eigen::MatrixXd::Constant(1, 1, h.derivative(p(0))); });
}

std::vector<double> circle_flow(const CircleField& x, const std::vector<double>& points, double t,
                                const FlowOptions<double>& opt) {
  Eigen::VectorXd y0 = Eigen::Map<const Eigen::VectorXd>(points.data(), points.size());
  const auto& h = x.h();
  auto rhs = [&h](const Eigen::VectorXd& y) {
    Eigen::VectorXd out(y.size());
    for (Eigen::Index i = 0; i < y.size(); ++i) out(i) = h(y(i));
    return out;
  };
  auto res = integrate<double>(rhs, y0, t, opt);
  return std::vector<double>(res.endpoint.data(), res.endpoint.data() + res.endpoint.size());
}

std::vector<ZeroDatum> find_zeros(const CircleField& x, const ZeroOptions& opt) {
  const int n = opt.grid;
  const double step = two_pi / n;
  std::vector<double> v(n + 1);
  for (int j = 0; j < n; ++j) v[j] = x(j * step);
  v[n] = v[0];
  double scale = 0.0;
  for (double s : v) scale = std::max(scale, std::abs(s));
  if (scale == 0.0) throw Error(ErrorKind::degeneracy, "field vanishes identically");

  auto polish = [&](double a, double b) {
    double fa = x(a);
    for (int it = 0; it < 200 && b - a > 1e-7; ++it) {
      double m = 0.5 * (a + b), fm = x(m);
      if (fm == 0.0) return m;
      if ((fm > 0) == (fa > 0)) {
        a = m;
        fa = fm;
      } else {
        b = m;
      }
    }
    double z = 0.5 * (a + b);
    for (int it = 0; it < 50; ++it) {
      Jet j = x.jet(z);
      if (j[1] == 0.0) break;
      double dz = j[0] / j[1];
      double zn = std::clamp(z - dz, a, b);
      if (std::abs(zn - z) < opt.polish_tol * 1e-2) {
        z = zn;
        break;
      }
      z = zn;
    }
    return z;
  };

  std::vector<double> roots;
  for (int j = 0; j < n; ++j) {
    if (v[j] == 0.0) {
      roots.push_back(j * step);
    } else if (v[j + 1] != 0.0 && (v[j] > 0) != (v[j + 1] > 0)) {
      roots.push_back(polish(j * step, (j + 1) * step));
    }
  }

  // a local minimum of |h| between grid points may hide a pair of roots
  for (int j = 0; j < n; ++j) {
    double prev = std::abs(v[(j + n - 1) % n]), cur = std::abs(v[j]), next = std::abs(v[j + 1]);
    if (cur == 0.0 || !(cur <= prev && cur <= next)) continue;
    if ((v[(j + n - 1) % n] > 0) != (v[j] > 0) || (v[j + 1] > 0) != (v[j] > 0)) continue;
    double c = j * step;
    for (int it = 0; it < 50; ++it) {
      Jet jt = x.jet(c);
      if (jt[2] == 0.0) break;
      double cn = c - jt[1] / jt[2];
      if (std::abs(cn - j * step) > 2 * step) break;
      if (std::abs(cn - c) < 1e-15) {
        c = cn;
        break;
      }
      c = cn;
    }
    double hc = x(c);
    if (std::abs(hc) <= 1e-10 * scale) {
      std::ostringstream msg;
      msg << "zero near " << c << " has vanishing derivative";
      throw Error(ErrorKind::degeneracy, msg.str());
    }
    if ((hc > 0) != (v[j] > 0)) {
      std::ostringstream msg;
      msg << "grid of " << n << " points misses a pair of zeros near " << c;
      throw Error(ErrorKind::resolution, msg.str());
    }
  }

  std::vector<ZeroDatum> zeros;
  for (double r : roots) {
    double z = wrap_angle(r);
    double d = x.h().derivative(z);
    if (std::abs(d) <= opt.degeneracy) {
      std::ostringstream msg;
      msg << "zero at " << z << " has |h'| = " << std::abs(d);
      throw Error(ErrorKind::degeneracy, msg.str());
    }
    zeros.push_back({z, d});
  }
  std::sort(zeros.begin(), zeros.end(),
            [](const ZeroDatum& a, const ZeroDatum& b) { return a.location < b.location; });
  zeros.erase(std::unique(zeros.begin(), zeros.end(),
                          [](const ZeroDatum& a, const ZeroDatum& b) {
                            return std::abs(a.location - b.location) < 1e-12;
                          }),
              zeros.end());
  if (zeros.size() % 2 != 0) {
    throw Error(ErrorKind::resolution, "odd number of zeros located");
  }
  return zeros;
}

LinearizingChart::LinearizingChart(PeriodicFunction h, double center, double rate, double radius)
    : h_(std::move(h)), z_(center), lambda_(rate), radius_(radius) {
  Jet j = h_.jet(z_);
  double a1 = j[2] / (2 * lambda_), a2 = j[3] / (6 * lambda_), a3 = j[4] / (24 * lambda_);
  c0_ = -a1;
  c1_ = a1 * a1 - a2;
  c2_ = 2 * a1 * a2 - a1 * a1 * a1 - a3;
  lower_ = (*this)(z_ - radius_);
  upper_ = (*this)(z_ + radius_);
}

double LinearizingChart::log_factor(double x) const {
  constexpr double small = 1e-3;
  auto series = [this](double e) { return e * (c0_ + e * (c1_ / 2 + e * c2_ / 3)); };
  double e = x - z_;
  if (std::abs(e) <= small) return series(e);
  double edge = std::copysign(small, e);
  auto g = [this](double s) { return lambda_ / h_(s) - 1.0 / (s - z_); };
  return series(edge) + gk_integral(g, z_ + edge, x, 1e-13);
}

double LinearizingChart::operator()(double x) const { return (x - z_) * std::exp(log_factor(x)); }

double LinearizingChart::derivative(double x) const {
  if (std::abs(x - z_) < 1e-7) return std::exp(log_factor(x)) * (1.0 + c0_ * (x - z_));
  return lambda_ * (*this)(x) / h_(x);
}

double LinearizingChart::inverse(double u) const {
  if (u < lower_ || u > upper_) {
    std::ostringstream msg;
    msg << "value " << u << " outside chart range [" << lower_ << ", " << upper_ << "]";
    throw Error(ErrorKind::chart_too_small, msg.str());
  }
  double a = z_ - radius_, b = z_ + radius_;
  double x = z_ + u;  // u'(z) = 1
  x = std::clamp(x, a, b);
  for (int it = 0; it < 100; ++it) {
    double f = (*this)(x) - u;
    if (f == 0.0) return x;
    if (f > 0) b = x; else a = x;
    double d = derivative(x);
    double xn = x - f / d;
    if (!(xn > a && xn < b)) xn = 0.5 * (a + b);
    if (std::abs(xn - x) < 1e-15 * std::max(1.0, std::abs(x)) || b - a < 1e-15) return xn;
    x = xn;
  }
  return x;
}

LinearizingChart linearizing_coordinate(const CircleField& x, const ZeroDatum& z,
                                        std::optional<double> radius, const ZeroOptions& opt) {
  auto zeros = find_zeros(x, opt);
  double gap = two_pi;
  for (const auto& w : zeros) {
    double d = circle_distance(w.location, z.location);
    if (d > 1e-9) gap = std::min(gap, d);
  }
  double r = radius.value_or(0.4 * gap);
  if (r >= gap) {
    std::ostringstream msg;
    msg << "chart radius " << r << " reaches the neighbouring zero at distance " << gap;
    throw Error(ErrorKind::chart_overlap, msg.str());
  }
  return LinearizingChart(x.h(), z.location, z.derivative, r);
}

double LocalInvolution::operator()(double x) const { return chart_.inverse(-chart_(x)); }

double LocalInvolution::admissible_offset() const {
  double target = std::min(chart_.upper_value(), -chart_.lower_value());
  return chart_.inverse(target) - chart_.center();
}

LocalInvolution local_involution(const CircleField& x, const ZeroDatum& z,
                                 std::optional<double> radius, const ZeroOptions& opt) {
  return LocalInvolution(linearizing_coordinate(x, z, radius, opt));
}

ChiBreakdown chi_breakdown(const CircleField& x, const std::vector<double>& fractions,
                           const ChiOptions& opt) {
  ChiBreakdown out;
  out.zeros = find_zeros(x, opt.zeros);
  const auto& h = x.h();
  auto hf = [&h](double s) { return h(s); };
  if (out.zeros.empty()) {
    out.chi = time_of_flight<double>(hf, 0.0, two_pi, opt.quad_tol);
    return out;
  }
  const int n = static_cast<int>(out.zeros.size());
  if (!fractions.empty() && static_cast<int>(fractions.size()) != n) {
    throw Error(ErrorKind::precondition, "one section choice per zero is required");
  }
  std::vector<LocalInvolution> sigma;
  for (int i = 0; i < n; ++i) {
    double prev = out.zeros[(i + n - 1) % n].location, next = out.zeros[(i + 1) % n].location;
    double gap = std::min(circle_distance(prev, out.zeros[i].location),
                          circle_distance(next, out.zeros[i].location));
    sigma.emplace_back(LinearizingChart(h, out.zeros[i].location, out.zeros[i].derivative, 0.4 * gap));
  }
  for (int i = 0; i < n; ++i) {
    double frac = fractions.empty() ? 0.5 : fractions[i];
    if (!(frac > 0.0 && frac <= 1.0)) {
      throw Error(ErrorKind::precondition, "section choice must lie in (0, 1]");
    }
    double tp = out.zeros[i].location + frac * sigma[i].admissible_offset();
    out.t_plus.push_back(tp);
    out.t_minus.push_back(sigma[i](tp));
  }
  for (int i = 0; i < n; ++i) {
    double end = out.t_minus[(i + 1) % n] + (i + 1 == n ? two_pi : 0.0);
    double rho = time_of_flight<double>(hf, out.t_plus[i], end, opt.quad_tol);
    out.rho.push_back(rho);
    out.chi += rho;
  }
  return out;
}

double chi(const CircleField& x, const ChiOptions& opt) { return chi_breakdown(x, {}, opt).chi; }

double chi_with_choices(const CircleField& x, const std::vector<double>& fractions,
                        const ChiOptions& opt) {
  return chi_breakdown(x, fractions, opt).chi;
}

CircleDiffeo::CircleDiffeo(int orientation, double shift, TrigSeries perturbation)
    : orientation_(orientation), shift_(shift), p_(std::move(perturbation)) {
  if (orientation != 1 && orientation != -1) {
    throw Error(ErrorKind::not_diffeomorphism, "orientation must be +1 or -1");
  }
  double dsup = p_.derivative().sup_norm(4096);
  if (!(dsup < 0.9)) {
    std::ostringstream msg;
    msg << "perturbation derivative reaches " << dsup << ", map may fail to be invertible";
    throw Error(ErrorKind::not_diffeomorphism, msg.str());
  }
  p_sup_ = p_.sup_norm(4096);
}

double CircleDiffeo::operator()(double x) const { return orientation_ * x + shift_ + p_(x); }

double CircleDiffeo::derivative(double x) const { return orientation_ + p_.derivative(x, 1); }

double CircleDiffeo::inverse(double y) const {
  // s x + p(x) = y - shift is monotone in x with slope of sign s
  double target = y - shift_;
  double base = orientation_ * target;
  double a = base - p_sup_ - 1.0, b = base + p_sup_ + 1.0;
  auto g = [&](double x) { return orientation_ * (orientation_ * x + p_(x) - target); };
  double x = base;
  for (int it = 0; it < 200; ++it) {
    double f = g(x);
    if (f == 0.0) return x;
    if (f > 0) b = x; else a = x;
    double d = orientation_ * derivative(x);
    double xn = x - f / d;
    if (!(xn > a && xn < b)) xn = 0.5 * (a + b);
    if (std::abs(xn - x) < 1e-15 * std::max(1.0, std::abs(x)) || b - a < 1e-15) return xn;
    x = xn;
  }
  return x;
}

Pushforward pushforward(const CircleDiffeo& phi, const CircleField& x, int degree) {
  auto value = [&](double y) {
    double s = phi.inverse(y);
    return phi.derivative(s) * x(s);
  };
  const int samples = 4 * degree;
  TrigSeries fitted = TrigSeries::fit(value, degree, samples);
  double err = 0.0;
  for (int j = 0; j < samples; ++j) {
    double y = two_pi * (j + 0.5) / samples;
    err = std::max(err, std::abs(fitted(y) - value(y)));
  }
  return {CircleField(fitted), err};
}

CircleSignature signature(const CircleField& x, const ChiOptions& opt) {
  auto b = chi_breakdown(x, {}, opt);
  CircleSignature s;
  s.zero_count = static_cast<int>(b.zeros.size());
  for (const auto& z : b.zeros) s.derivatives.push_back(z.derivative);
  s.chi = b.chi;
  return s;
}

bool equivalent(const CircleSignature& a, const CircleSignature& b, double tol) {
  if (a.zero_count != b.zero_count) return false;
  if (std::abs(a.chi - b.chi) >= tol) return false;
  const int n = a.zero_count;
  if (n == 0) return true;
  for (int shift = 0; shift < n; ++shift) {
    bool ok = true;
    for (int i = 0; i < n && ok; ++i) {
      ok = std::abs(a.derivatives[i] - b.derivatives[(i + shift) % n]) < tol;
    }
    if (ok) return true;
  }
  return false;
}

bool equivalent(const CircleField& x, const CircleField& y, double tol) {
  return equivalent(signature(x), signature(y), tol);
}

CircleField gradient_field_on_circle(const PeriodicFunction& f, const PeriodicFunction& g) {
  constexpr int grid = 4096;
  for (int j = 0; j < grid; ++j) {
    double x = two_pi * j / grid;
    if (!(g(x) > 0.0)) {
      std::ostringstream msg;
      msg << "metric coefficient " << g(x) << " at x = " << x << " is not positive";
      throw Error(ErrorKind::metric, msg.str());
    }
  }
  if (g.series() && g.series()->degree() == 0 && f.series()) {
    return CircleField(f.series()->derivative() * (1.0 / g.series()->a0()));
  }
  return CircleField(PeriodicFunction::quotient(f.derivative(), g));
}

CircleIsometry CircleIsometry::operator*(const CircleIsometry& o) const {
  // (this o other)(x) = s1 (s2 x + c2) + c1
  return {orientation * o.orientation, wrap_angle(orientation * o.shift + shift)};
}

CircleIsometry CircleIsometry::inverse() const {
  // x = s (y - c)
  return {orientation, wrap_angle(-orientation * shift)};
}

CircleGroup::CircleGroup(std::vector<CircleIsometry> elements) : elements_(std::move(elements)) {
  if (elements_.empty()) elements_.push_back({});
}

CircleGroup CircleGroup::trivial() { return CircleGroup({CircleIsometry{}}); }

CircleGroup CircleGroup::cyclic(int k) {
  std::vector<CircleIsometry> e;
  for (int j = 0; j < k; ++j) e.push_back({1, two_pi * j / k});
  return CircleGroup(e);
}

CircleGroup CircleGroup::dihedral(int k) {
  std::vector<CircleIsometry> e;
  for (int j = 0; j < k; ++j) e.push_back({1, two_pi * j / k});
  for (int j = 0; j < k; ++j) e.push_back({-1, two_pi * j / k});
  return CircleGroup(e);
}

CircleGroup CircleGroup::reflection() { return CircleGroup({{1, 0.0}, {-1, 0.0}}); }

bool CircleGroup::orientation_preserving() const {
  return std::all_of(elements_.begin(), elements_.end(),
                     [](const CircleIsometry& g) { return g.orientation == 1; });
}

bool CircleGroup::same_orbit(double x, double y, double tol) const {
  return std::any_of(elements_.begin(), elements_.end(),
                     [&](const CircleIsometry& g) { return circle_distance(g(x), y) < tol; });
}

CircleGenericity check_circle_genericity(const PeriodicFunction& f, const PeriodicFunction& g,
                                         const CircleGroup& group, double tol) {
  constexpr int grid = 512;
  for (const auto& gamma : group.elements()) {
    for (int j = 0; j < grid; ++j) {
      double x = two_pi * j / grid;
      double df = std::abs(f(gamma(x)) - f(x)), dg = std::abs(g(gamma(x)) - g(x));
      if (df > 1e-9 || dg > 1e-9) {
        std::ostringstream msg;
        msg << (df > 1e-9 ? "function" : "metric") << " not invariant under x -> "
            << gamma.orientation << " x + " << gamma.shift << " at x = " << x;
        throw Error(ErrorKind::invariance, msg.str());
      }
    }
  }
  CircleField x = gradient_field_on_circle(f, g);
  CircleGenericity out;
  out.critical_points = find_zeros(x);
  const auto& c = out.critical_points;
  for (std::size_t i = 0; i < c.size() && out.orbit_condition; ++i) {
    for (std::size_t j = i + 1; j < c.size(); ++j) {
      if (std::abs(c[i].derivative - c[j].derivative) < tol &&
          !group.same_orbit(c[i].location, c[j].location)) {
        out.orbit_condition = false;
        out.witness = std::make_pair(c[i], c[j]);
        break;
      }
    }
  }
  out.chi_required = group.orientation_preserving();
  out.chi = chi(x);
  out.chi_condition = !out.chi_required || std::abs(out.chi) > tol;
  out.generic = out.orbit_condition && out.chi_condition;
  return out;
}

namespace {

double sup_flow_residual(const CircleField& x, const CircleIsometry& gamma,
                         const std::vector<double>& samples, const std::vector<double>& images,
                         double t) {
  FlowOptions<double> tight;
  tight.abs_tol = tight.rel_tol = 1e-12;
  auto moved = circle_flow(x, samples, t, tight);
  double r = 0.0;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    r = std::max(r, circle_distance(gamma.orientation * moved[k] + gamma.shift, images[k]));
  }
  return r;
}

// the residual is V-shaped near its minimum, so Brent can stall slightly off
// the kink; a direct estimate of the kink is kept when it does better
std::pair<double, double> minimize_residual(const std::function<double(double)>& f, double lo,
                                            double hi, double guess) {
  std::uintmax_t iters = 200;
  auto r = boost::math::tools::brent_find_minima(f, lo, hi, 45, iters);
  double fg = f(guess);
  if (fg <= r.second) return {guess, fg};
  return {r.first, r.second};
}

}  // namespace

IntervalFit interval_automorphism_time(const CircleField& x, const std::vector<double>& samples,
                                       const std::vector<double>& images) {
  if (samples.size() != images.size() || samples.empty()) {
    throw Error(ErrorKind::precondition, "samples and images must be nonempty and paired");
  }
  auto zeros = find_zeros(x);
  const auto& h = x.h();
  auto hf = [&h](double s) { return h(s); };
  std::vector<double> times;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    double a = samples[k], b = images[k];
    if (!zeros.empty()) {
      int arc = arc_of(zeros, a);
      if (arc < 0 || arc_of(zeros, b) != arc) {
        throw Error(ErrorKind::precondition, "sample and image lie in different arcs");
      }
      a = lift_into_arc(zeros, arc, a);
      b = lift_into_arc(zeros, arc, b);
    } else {
      // forward along the flow within one turn
      double off = wrap_angle(b - a);
      b = h(a) > 0 ? a + off : a - wrap_angle(a - b);
    }
    times.push_back(time_of_flight<double>(hf, a, b));
  }
  auto [lo_it, hi_it] = std::minmax_element(times.begin(), times.end());
  double lo = *lo_it, hi = *hi_it;
  double pad = 1e-3 * (1.0 + std::abs(hi) + std::abs(lo));
  CircleIsometry id;
  auto objective = [&](double t) { return sup_flow_residual(x, id, samples, images, t); };
  std::vector<double> sorted = times;
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
  auto [t, r] = minimize_residual(objective, lo - pad, hi + pad, sorted[sorted.size() / 2]);
  return {t, r};
}

AutReduction circle_aut_reduction(const CircleField& x, const CircleGroup& group,
                                  const std::function<double(double)>& phi, int samples) {
  auto zeros = find_zeros(x);
  const auto& h = x.h();
  auto hf = [&h](double s) { return h(s); };
  std::vector<double> pts(samples), images(samples);
  int ref = 0;
  for (int k = 0; k < samples; ++k) {
    pts[k] = two_pi * (k + 0.5) / samples;
    images[k] = wrap_angle(phi(pts[k]));
    if (std::abs(h(pts[k])) > std::abs(h(pts[ref]))) ref = k;
  }
  double period = zeros.empty() ? std::abs(time_of_flight<double>(hf, 0.0, two_pi)) : 0.0;

  AutReduction best;
  best.residual = std::numeric_limits<double>::infinity();
  for (int e = 0; e < group.order(); ++e) {
    const CircleIsometry& gamma = group.elements()[e];
    // flow_t(x_ref) must equal gamma^{-1}(phi(x_ref))
    double target = gamma.inverse()(images[ref]);
    double a = pts[ref];
    std::optional<double> t0;
    if (zeros.empty()) {
      double b = h(a) > 0 ? a + wrap_angle(target - a) : a - wrap_angle(a - target);
      t0 = time_of_flight<double>(hf, a, b);
    } else {
      int arc = arc_of(zeros, a);
      if (arc >= 0 && arc_of(zeros, target) == arc) {
        t0 = time_of_flight<double>(hf, lift_into_arc(zeros, arc, a), lift_into_arc(zeros, arc, target));
      }
    }
    double t = 0.0, r;
    if (t0) {
      auto objective = [&](double s) { return sup_flow_residual(x, gamma, pts, images, s); };
      double pad = 0.05 + 0.01 * std::abs(*t0);
      std::tie(t, r) = minimize_residual(objective, *t0 - pad, *t0 + pad, *t0);
      if (zeros.empty() && period > 0.0) t = std::remainder(t, period);
    } else {
      r = sup_flow_residual(x, gamma, pts, images, 0.0);
    }
    best.residual_per_element.push_back(r);
    if (r < best.residual) {
      best.residual = r;
      best.element = e;
      best.gamma = gamma;
      best.t = t;
    }
  }
  return best;
}

}  // namespace eqgrad
