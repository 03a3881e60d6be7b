#include "doctest.h"

#include <cmath>
#include <numbers>

#include "eqgrad/circle.hpp"
#include "eqgrad/rng.hpp"

using namespace eqgrad;

namespace {

constexpr double pi = std::numbers::pi;

TrigSeries series(double a0, std::vector<double> a, std::vector<double> b) {
  return TrigSeries(a0, std::move(a), std::move(b));
}

// random nondegenerate field with 2 or 4 zeros
CircleField random_field(Rng& rng) {
  for (;;) {
    std::vector<double> a(3), b(3);
    for (int k = 0; k < 3; ++k) {
      a[k] = rng.normal() / (k + 1);
      b[k] = rng.normal() / (k + 1);
    }
    CircleField x(series(rng.uniform(-0.3, 0.3), a, b));
    try {
      auto z = find_zeros(x);
      bool ok = !z.empty();
      for (std::size_t i = 0; i < z.size(); ++i) {
        ok = ok && std::abs(z[i].derivative) > 0.05 &&
             circle_distance(z[i].location, z[(i + 1) % z.size()].location) > 0.05;
      }
      if (ok) return x;
    } catch (const Error&) {
    }
  }
}

}  // namespace

TEST_CASE("trig series arithmetic") {
  auto s = series(0.5, {1.0, -0.3}, {0.2, 0.7});
  auto t = series(-0.1, {0.0, 0.4, 0.2}, {1.0});
  auto p = s * t;
  Rng rng(1);
  for (int k = 0; k < 20; ++k) {
    double x = rng.uniform(0, 2 * pi);
    CHECK(std::abs(p(x) - s(x) * t(x)) < 1e-13);
    CHECK(std::abs(s.shifted(0.3)(x) - s(x + 0.3)) < 1e-13);
    CHECK(std::abs(s.reflected()(x) - s(-x)) < 1e-13);
    double h = 1e-4;
    Jet j = s.jet(x);
    CHECK(std::abs(j[1] - (s(x + h) - s(x - h)) / (2 * h)) < 1e-7);
    CHECK(std::abs(j[2] - s.derivative().derivative(x, 1)) < 1e-12);
    CHECK(std::abs(j[4] - s.derivative().derivative().derivative(x, 2)) < 1e-12);
  }
  auto fitted = TrigSeries::fit([&](double x) { return s(x); }, 4, 16);
  CHECK(std::abs(fitted.cos_coeffs()[1] + 0.3) < 1e-14);
  CHECK(std::abs(fitted.sin_coeffs()[0] - 0.2) < 1e-14);
}

TEST_CASE("quotient jets") {
  auto num = series(0.0, {}, {1.0});
  auto den = series(1.0, {0.5}, {});
  auto q = PeriodicFunction::quotient(num, den);
  for (double x : {0.1, 1.3, 4.0}) {
    double h = 1e-3;
    Jet j = q.jet(x);
    auto f = [&](double s) { return std::sin(s) / (1 + 0.5 * std::cos(s)); };
    CHECK(std::abs(j[0] - f(x)) < 1e-15);
    CHECK(std::abs(j[1] - (f(x + h) - f(x - h)) / (2 * h)) < 1e-6);
    CHECK(std::abs(j[2] - (f(x + h) - 2 * f(x) + f(x - h)) / (h * h)) < 1e-5);
    double d3 = (f(x + 2 * h) - 2 * f(x + h) + 2 * f(x - h) - f(x - 2 * h)) / (2 * h * h * h);
    CHECK(std::abs(j[3] - d3) < 1e-4);
  }
}

TEST_CASE("find zeros") {
  auto z = find_zeros(CircleField(TrigSeries::sine(1)));
  REQUIRE(z.size() == 2);
  CHECK(std::abs(z[0].location) < 1e-14);
  CHECK(std::abs(z[1].location - pi) < 1e-12);
  CHECK(z[0].derivative == doctest::Approx(1.0));
  CHECK(z[1].derivative == doctest::Approx(-1.0));

  CHECK(find_zeros(CircleField(TrigSeries::constant(1.0))).empty());

  auto w = find_zeros(CircleField(series(0.3, {1.0}, {})));
  REQUIRE(w.size() == 2);
  double r = std::acos(-0.3);
  CHECK(std::abs(w[0].location - r) < 1e-12);
  CHECK(std::abs(w[1].location - (2 * pi - r)) < 1e-12);
  CHECK(std::abs(w[0].derivative + std::sin(r)) < 1e-12);
  CHECK(std::abs(w[1].derivative - std::sin(r)) < 1e-12);
}

TEST_CASE("find zeros errors") {
  // 1 - cos x has a double zero at 0
  try {
    find_zeros(CircleField(series(1.0, {-1.0}, {})));
    FAIL("expected degeneracy");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::degeneracy);
  }
  // a pair of zeros 1e-4 apart hidden between coarse grid points
  ZeroOptions coarse;
  coarse.grid = 16;
  try {
    find_zeros(CircleField(series(1.0 - 2e-9, {-1.0}, {}).shifted(0.1)), coarse);
    FAIL("expected resolution error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::resolution);
  }
}

TEST_CASE("linearizing chart of a linear field is the identity") {
  for (double lambda : {-1.5, 0.7}) {
    PeriodicFunction lin([lambda](double x) { return Jet{lambda * x, lambda, 0, 0, 0}; });
    LinearizingChart u(lin, 0.0, lambda, 0.5);
    for (double x : {-0.4, -1e-4, 0.0, 2e-4, 0.3}) CHECK(std::abs(u(x) - x) < 1e-14);
    LocalInvolution sigma(u);
    CHECK(std::abs(sigma(0.25) + 0.25) < 1e-13);
  }
}

TEST_CASE("linearizing chart of sin x is 2 tan(x/2)") {
  CircleField x(TrigSeries::sine(1));
  auto z = find_zeros(x);
  auto u = linearizing_coordinate(x, z[0]);
  CHECK(u.radius() == doctest::Approx(0.4 * pi));
  for (double s : {-1.2, -0.5, -5e-4, 1e-5, 8e-4, 0.2, 1.0, 1.25}) {
    CHECK(std::abs(u(s) - 2 * std::tan(s / 2)) < 1e-9);
    // X u = lambda u
    CHECK(std::abs(std::sin(s) * u.derivative(s) - u(s)) < 1e-9);
  }
  LocalInvolution sigma(u);
  for (double s : {0.1, 0.6, 1.2}) CHECK(std::abs(sigma(s) + s) < 1e-9);
}

TEST_CASE("chart is flow-equivariant and sigma is an involution") {
  Rng rng(21);
  for (int trial = 0; trial < 5; ++trial) {
    CircleField x = random_field(rng);
    auto zeros = find_zeros(x);
    for (const auto& z : zeros) {
      auto u = linearizing_coordinate(x, z);
      CHECK(std::abs(u(z.location)) == 0.0);
      CHECK(std::abs(u.derivative(z.location) - 1.0) < 1e-8);
      LocalInvolution sigma(u);
      double d = sigma.admissible_offset();
      for (double frac : {0.2, 0.7, 0.95}) {
        double p = z.location + frac * d;
        CHECK(std::abs(sigma(sigma(p)) - p) < 1e-8);
        CHECK(sigma(p) < z.location);
        // sigma pushes X to X: sigma'(p) h(p) = h(sigma(p))
        double e = 1e-5;
        double ds = (sigma(p + e) - sigma(p - e)) / (2 * e);
        CHECK(std::abs(ds * x(p) - x(sigma(p))) < 1e-7);
        // u(flow_t(p)) = e^{lambda t} u(p)
        double t = rng.uniform(-0.5, 0.5);
        double q = circle_flow(x, {p}, t)[0];
        if (std::abs(q - z.location) < u.radius()) {
          CHECK(std::abs(u(q) - std::exp(z.derivative * t) * u(p)) < 1e-7);
        }
      }
      double e = 1e-4;
      CHECK(std::abs((sigma(z.location + e) - sigma(z.location - e)) / (2 * e) + 1.0) < 1e-6);
      // the flow in the chart is linear: derivative at the zero is e^{lambda t}
      double t = 0.3;
      double gain = std::exp(z.derivative * t);
      double w = 0.1 * std::min(-u.lower_value(), u.upper_value()) / std::max(1.0, gain);
      FlowOptions<double> tight;
      tight.abs_tol = tight.rel_tol = 1e-13;
      auto conj = [&](double v) { return u(circle_flow(x, {u.inverse(v)}, t, tight)[0]); };
      double dphi = (conj(w) - conj(-w)) / (2 * w);
      CHECK(std::abs(dphi - gain) < 1e-7);
    }
  }
}

TEST_CASE("chart errors") {
  CircleField x(TrigSeries::sine(1));
  auto z = find_zeros(x);
  try {
    linearizing_coordinate(x, z[0], 3.5);
    FAIL("expected chart overlap");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::chart_overlap);
  }
  // asymmetric field: u grows faster on one side
  CircleField y(series(0.0, {0.0, -0.45}, {1.0}));
  auto zy = find_zeros(y);
  LocalInvolution sigma = local_involution(y, zy[0]);
  double d = sigma.admissible_offset();
  double beyond = zy[0].location + sigma.chart().radius();
  if (d < sigma.chart().radius() - 1e-9) {
    try {
      sigma(beyond);
      FAIL("expected chart too small");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::chart_too_small);
    }
  } else {
    try {
      sigma(zy[0].location - sigma.chart().radius());
      FAIL("expected chart too small");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::chart_too_small);
    }
  }
}

TEST_CASE("chi closed forms") {
  for (double c : {0.5, 1.0, 3.0, -2.0}) {
    CHECK(std::abs(chi(CircleField(TrigSeries::constant(c))) - 2 * pi / c) < 1e-9);
  }
  CHECK(std::abs(chi(CircleField(TrigSeries::sine(1)))) < 1e-8);
}

TEST_CASE("chi is independent of the section points") {
  CircleField x(series(0.0, {}, {1.0, 0.2}));
  double base = chi(x);
  Rng rng(4);
  double lo = base, hi = base;
  std::size_t n = find_zeros(x).size();
  for (int k = 0; k < 20; ++k) {
    std::vector<double> f(n);
    for (auto& v : f) v = rng.uniform(0.05, 1.0);
    double c = chi_with_choices(x, f);
    lo = std::min(lo, c);
    hi = std::max(hi, c);
  }
  CHECK(hi - lo < 1e-7);
}

TEST_CASE("chi is continuous") {
  CircleField x(series(0.1, {0.3}, {1.0, 0.2}));
  auto z = series(0.0, {0.5, -0.2}, {0.1, 0.3});
  double base = chi(x);
  double prev = 1e9;
  for (double eps : {1e-2, 1e-3, 1e-4}) {
    double d = std::abs(chi(CircleField(series(0.1, {0.3}, {1.0, 0.2}) + eps * z)) - base);
    CHECK(d < prev);
    prev = d;
  }
  CHECK(prev < 1e-3);
}

TEST_CASE("pushforward") {
  // first harmonics alone span sl(2), whose hyperbolic fields all have chi = 0
  CircleField x(series(0.2, {0.3}, {1.0, 0.25}));
  auto same = pushforward(CircleDiffeo::identity(), x);
  CHECK(same.aliasing_error < 1e-12);
  for (double s : {0.0, 1.0, 3.0}) CHECK(std::abs(same.field(s) - x(s)) < 1e-12);

  auto rot = pushforward(CircleDiffeo::rotation(0.7), CircleField(TrigSeries::constant(1.5)));
  CHECK(std::abs(rot.field(2.0) - 1.5) < 1e-12);

  Rng rng(9);
  double c0 = chi(x);
  for (int k = 0; k < 5; ++k) {
    TrigSeries p(0.0, {0.1 * rng.normal(), 0.05 * rng.normal()}, {0.1 * rng.normal()});
    CircleDiffeo phi(1, rng.uniform(0, 2 * pi), p);
    auto y = pushforward(phi, x);
    CHECK(y.aliasing_error < 1e-10);
    CHECK(std::abs(chi(y.field) - c0) < 1e-6);
    double s = rng.uniform(0, 2 * pi);
    CHECK(std::abs(phi(phi.inverse(s)) - s) < 1e-12);
  }
  auto refl = pushforward(CircleDiffeo::reflection(), x);
  CHECK(std::abs(chi(refl.field) + c0) < 1e-6);

  try {
    CircleDiffeo bad(1, 0.0, TrigSeries::sine(1, 1.0));
    FAIL("expected not-a-diffeomorphism");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::not_diffeomorphism);
  }
}

TEST_CASE("signature and equivalence") {
  CircleField x(series(0.2, {0.3}, {1.0, 0.25}));
  auto rotated = pushforward(CircleDiffeo::rotation(1.1), x).field;
  CHECK(equivalent(x, rotated));
  CHECK_FALSE(equivalent(CircleField(TrigSeries::sine(1)), CircleField(TrigSeries::sine(1, 2.0))));
  auto s = signature(x);
  REQUIRE(std::abs(s.chi) > 1e-3);
  auto reflected = pushforward(CircleDiffeo::reflection(), x).field;
  CHECK_FALSE(equivalent(x, reflected));
  CHECK(s.zero_count % 2 == 0);
}

TEST_CASE("gradient fields on the circle") {
  auto f = TrigSeries::cosine(1);
  auto x = gradient_field_on_circle(f, TrigSeries::constant(1.0));
  for (double s : {0.3, 2.0}) CHECK(std::abs(x(s) + std::sin(s)) < 1e-15);

  auto g = PeriodicFunction::reciprocal(series(1.0, {0.5}, {}));
  auto y = gradient_field_on_circle(f, g);
  for (double s : {0.3, 2.0, 5.0}) CHECK(std::abs(y(s) + std::sin(s) * (1 + 0.5 * std::cos(s))) < 1e-14);

  // zeros of h are critical points of f with h' = f''/g there
  auto f2 = series(0.0, {1.0, 0.1}, {0.0, 0.3});
  auto g2 = series(2.0, {0.3}, {0.2});
  auto zeros = find_zeros(gradient_field_on_circle(f2, g2));
  for (const auto& z : zeros) {
    CHECK(std::abs(f2.derivative(z.location, 1)) < 1e-12);
    CHECK(std::abs(z.derivative - f2.derivative(z.location, 2) / g2(z.location)) < 1e-10);
  }
  try {
    gradient_field_on_circle(f, series(0.1, {0.5}, {}));
    FAIL("expected metric error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::metric);
  }
}

TEST_CASE("circle genericity") {
  auto one = TrigSeries::constant(1.0);
  auto v = check_circle_genericity(series(0.0, {1.0, 0.1}, {}), one, CircleGroup::trivial());
  // critical points 0 and pi with f'' = -1.4 and 1 - 0.4 + ... distinct
  REQUIRE(v.critical_points.size() == 2);
  CHECK(v.orbit_condition);
  CHECK(v.chi_required);
  CHECK(v.generic == (std::abs(v.chi) > 1e-6));

  auto w = check_circle_genericity(TrigSeries::cosine(2), one, CircleGroup::cyclic(2));
  CHECK(v.critical_points.size() == 2);
  CHECK(w.orbit_condition);
  CHECK(w.critical_points.size() == 4);

  // cos 2x without symmetry: two maxima with equal derivative on distinct orbits
  auto u = check_circle_genericity(TrigSeries::cosine(2), one, CircleGroup::trivial());
  CHECK_FALSE(u.orbit_condition);
  CHECK_FALSE(u.generic);
  REQUIRE(u.witness.has_value());
  CHECK(std::abs(u.witness->first.derivative - u.witness->second.derivative) < 1e-6);

  try {
    check_circle_genericity(TrigSeries::cosine(1), one, CircleGroup::cyclic(2));
    FAIL("expected invariance error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::invariance);
  }
}

TEST_CASE("interval automorphism time") {
  CircleField x(series(0.0, {0.2}, {1.0}));
  auto zeros = find_zeros(x);
  double a = zeros[0].location, b = zeros[1].location;
  std::vector<double> pts;
  for (int k = 1; k < 10; ++k) pts.push_back(a + (b - a) * k / 10.0);
  auto img = circle_flow(x, pts, 0.4);
  auto fit = interval_automorphism_time(x, pts, img);
  CHECK(std::abs(fit.t - 0.4) < 1e-7);
  CHECK(fit.residual < 1e-8);
  auto id = interval_automorphism_time(x, pts, pts);
  CHECK(std::abs(id.t) < 1e-8);
  Rng rng(2);
  auto noisy = img;
  for (auto& v : noisy) v += 1e-3 * rng.uniform(-1, 1);
  noisy[3] = img[3] + 1e-3;
  auto nf = interval_automorphism_time(x, pts, noisy);
  CHECK(nf.residual > 2e-4);
  CHECK(nf.residual < 1.5e-3);
}

TEST_CASE("circle automorphism reduction") {
  const int k = 3;
  auto f = TrigSeries::cosine(k);
  auto g = series(1.0, {}, {0.0, 0.0, 0.3});
  auto x = gradient_field_on_circle(f, g);
  auto group = CircleGroup::cyclic(k);

  auto flow_only = [&](double s) { return circle_flow(x, {s}, 0.3)[0]; };
  auto r = circle_aut_reduction(x, group, flow_only);
  CHECK(r.element == 0);
  CHECK(std::abs(r.t - 0.3) < 1e-7);
  CHECK(r.residual < 1e-8);

  auto composed = [&](double s) { return circle_flow(x, {s}, 0.1)[0] + 2 * pi / k; };
  auto c = circle_aut_reduction(x, group, composed);
  CHECK(std::abs(group.elements()[c.element].shift - 2 * pi / k) < 1e-12);
  CHECK(std::abs(c.t - 0.1) < 1e-7);
  CHECK(c.residual < 1e-7);

  CircleDiffeo wobble(1, 0.2, TrigSeries::sine(2, 0.2));
  auto bad = circle_aut_reduction(x, group, [&](double s) { return wobble(s); });
  CHECK(bad.residual > 1e-2);
}
