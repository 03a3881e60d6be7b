#include "doctest.h"

#include <cmath>
#include <map>
#include <numbers>
#include <unsupported/Eigen/MatrixFunctions>

#include "eqgrad/errors.hpp"
#include "eqgrad/normal_form.hpp"

using namespace eqgrad;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double pi = std::numbers::pi;

PolyVectorField field_2d_pi() {
  PolyVectorField x(2, 2);
  x.set(0, {1, 0, 0}, -1.0);
  x.set(0, {0, 2, 0}, 1.0);
  x.set(1, {0, 1, 0}, -pi);
  return x;
}

PolyVectorField field_3d_focus() {
  PolyVectorField x(3, 2);
  x.set(0, {1, 0, 0}, -1.0);
  x.set(0, {0, 1, 0}, -2.0);
  x.set(0, {2, 0, 0}, 1.0);
  x.set(1, {1, 0, 0}, 2.0);
  x.set(1, {0, 1, 0}, -1.0);
  x.set(1, {0, 2, 0}, 1.0);
  x.set(2, {0, 0, 1}, -3.0);
  x.set(2, {1, 1, 0}, 1.0);
  x.set(2, {0, 1, 1}, 0.5);
  return x;
}

// Independent dense solver in two variables. Unknowns: coefficients of h in
// degrees 2..D; equations: coefficients of f + Dh X - L h in degrees 2..D.
using Mono = std::array<int, 2>;
using SPoly = std::map<Mono, double>;

SPoly mul(const SPoly& a, const SPoly& b, int cap) {
  SPoly r;
  for (auto& [ea, ca] : a)
    for (auto& [eb, cb] : b) {
      Mono e{ea[0] + eb[0], ea[1] + eb[1]};
      if (e[0] + e[1] <= cap) r[e] += ca * cb;
    }
  return r;
}
SPoly dif(const SPoly& a, int j) {
  SPoly r;
  for (auto& [e, c] : a)
    if (e[j] > 0) {
      Mono f = e;
      f[j] -= 1;
      r[f] += c * e[j];
    }
  return r;
}

std::map<std::pair<int, Mono>, double> dense_oracle(const std::array<SPoly, 2>& x, const MatrixXd& l, int cap) {
  std::vector<std::pair<int, Mono>> unknowns;
  for (int d = 2; d <= cap; ++d)
    for (int b = 0; b <= d; ++b)
      for (int i = 0; i < 2; ++i) unknowns.push_back({i, Mono{d - b, b}});
  const int m = static_cast<int>(unknowns.size());
  auto index = [&](int i, Mono e) {
    for (int k = 0; k < m; ++k)
      if (unknowns[k].first == i && unknowns[k].second == e) return k;
    return -1;
  };
  // residual as affine function of h: R(h) = f + Dh X - L h
  auto residual = [&](const VectorXd& coeffs, bool with_f) {
    std::array<SPoly, 2> h;
    for (int k = 0; k < m; ++k) h[unknowns[k].first][unknowns[k].second] += coeffs(k);
    VectorXd out = VectorXd::Zero(m);
    for (int i = 0; i < 2; ++i) {
      SPoly r;
      if (with_f)
        for (auto& [e, c] : x[i])
          if (e[0] + e[1] >= 2) r[e] += c;
      for (int j = 0; j < 2; ++j)
        for (auto& [e, c] : mul(dif(h[i], j), x[j], cap)) r[e] += c;
      for (int j = 0; j < 2; ++j)
        for (auto& [e, c] : h[j]) r[e] -= l(i, j) * c;
      for (auto& [e, c] : r) {
        int k = index(i, e);
        if (k >= 0) out(k) += c;
      }
    }
    return out;
  };
  MatrixXd a(m, m);
  for (int k = 0; k < m; ++k) a.col(k) = residual(VectorXd::Unit(m, k), false);
  VectorXd b = -residual(VectorXd::Zero(m), true);
  VectorXd sol = a.fullPivLu().solve(b);
  std::map<std::pair<int, Mono>, double> out;
  for (int k = 0; k < m; ++k) out[unknowns[k]] = sol(k);
  return out;
}

double fit_slope(const std::vector<double>& r, const std::vector<double>& v) {
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    mx += std::log(r[i]);
    my += std::log(v[i]);
  }
  mx /= r.size();
  my /= r.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    sxy += (std::log(r[i]) - mx) * (std::log(v[i]) - my);
    sxx += (std::log(r[i]) - mx) * (std::log(r[i]) - mx);
  }
  return sxy / sxx;
}

}  // namespace

TEST_CASE("monomial indexing round trip") {
  for (int n = 1; n <= 3; ++n) {
    MonomialBasis b(n, 7);
    for (int k = 0; k < b.size(); ++k) CHECK(b.index(b.exponent(k)) == k);
  }
  CHECK_THROWS_AS(MonomialBasis(4, 2), Error);
}

TEST_CASE("linear field gives the identity conjugator") {
  MatrixXd a(2, 2);
  a << -1.0, 0.3, 0.0, -2.5;
  PolyVectorField x = PolyVectorField::linear(a, 1);
  Linearization lin = poincare_linearize(x, 6);
  CHECK((lin.phi.coefficients() - PolyMap<double>::identity(2, 6).coefficients()).norm() < 1e-14);
  CHECK(lin.report.disk_residual < 1e-14);
}

TEST_CASE("one-dimensional closed form") {
  PolyVectorField x(1, 2);
  x.set(0, {1, 0, 0}, -1.0);
  x.set(0, {2, 0, 0}, 1.0);
  Linearization lin = poincare_linearize(x, 8);
  for (int k = 1; k <= 8; ++k) CHECK(std::abs(lin.phi.get(0, {k, 0, 0}) - 1.0) < 1e-10);
  for (double r : lin.report.degree_residual) CHECK(r < 1e-12);
  // denominators k*(-1) - (-1)
  for (int k = 2; k <= 8; ++k) CHECK(std::abs(lin.report.min_denominator[k - 2] - (k - 1)) < 1e-12);
}

TEST_CASE("dense linear system oracle in two variables") {
  PolyVectorField x = field_2d_pi();
  Linearization lin = poincare_linearize(x, 4);
  std::array<SPoly, 2> xs;
  xs[0][{1, 0}] = -1.0;
  xs[0][{0, 2}] = 1.0;
  xs[1][{0, 1}] = -pi;
  auto oracle = dense_oracle(xs, x.linear_part(), 4);
  for (auto& [key, val] : oracle) {
    Exponent e{key.second[0], key.second[1], 0};
    CHECK(std::abs(lin.phi.get(key.first, e) - val) < 1e-12);
  }
  for (double r : lin.report.degree_residual) CHECK(r < 1e-12);
}

TEST_CASE("complex eigenvalues and a mixed quadratic field") {
  PolyVectorField x = field_3d_focus();
  Linearization lin = poincare_linearize(x, 6);
  for (double r : lin.report.degree_residual) CHECK(r < 1e-12);
}

TEST_CASE("residual decays with order N + 1") {
  const std::vector<double> radii{0.4, 0.2, 0.1, 0.05};
  for (int which = 0; which < 2; ++which) {
    PolyVectorField x = which == 0 ? field_2d_pi() : field_3d_focus();
    if (which == 0) {
      // the bare field has a polynomial conjugator; couple the components
      x.set(0, {1, 1, 0}, 1.0);
      x.set(1, {2, 0, 0}, 1.0);
    }
    Linearization lin = poincare_linearize(x, 8);
    std::vector<double> res;
    for (double r : radii) res.push_back(disk_residual(lin.phi, x, lin.linear, r));
    double slope = fit_slope(radii, res);
    MESSAGE("residual slope " << slope);
    CHECK(slope >= 8.5);
  }
}

TEST_CASE("resonance and precondition errors") {
  PolyVectorField x(2, 2);
  x.set(0, {1, 0, 0}, -1.0);
  x.set(1, {0, 1, 0}, -2.0);
  x.set(1, {2, 0, 0}, 1.0);
  try {
    poincare_linearize(x, 4);
    FAIL("expected a resonance error");
  } catch (const ResonanceError& e) {
    CHECK(e.index() == 1);
    CHECK(e.alpha() == std::vector<int>{2, 0});
  }
  PolyVectorField up = PolyVectorField::linear(MatrixXd::Identity(2, 2), 1);
  CHECK_THROWS_AS(poincare_linearize(up, 4), Error);
  PolyVectorField ok = field_2d_pi();
  CHECK_THROWS_AS(poincare_linearize(ok, 13), Error);
  MatrixXd jordan(2, 2);
  jordan << -1.0, 1.0, 0.0, -1.0;
  try {
    poincare_linearize(PolyVectorField::linear(jordan, 1), 4);
    FAIL("expected a defective matrix error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::defective_matrix);
  }
}

TEST_CASE("equivariant linearization") {
  SUBCASE("trivial group") {
    PolyVectorField x = field_2d_pi();
    Linearization a = poincare_linearize(x, 6);
    Linearization b = equivariant_linearize(x, LinearAction::trivial(2), 6);
    CHECK((a.phi.coefficients() - b.phi.coefficients()).norm() < 1e-15);
  }
  SUBCASE("odd field") {
    PolyVectorField x(1, 3);
    x.set(0, {1, 0, 0}, -1.0);
    x.set(0, {3, 0, 0}, 1.0);
    Linearization lin = equivariant_linearize(x, LinearAction::negation(1), 9);
    for (int k = 0; k <= 9; ++k) {
      double c = lin.phi.get(0, {k, 0, 0});
      if (k % 2 == 0) CHECK(c == 0.0);
      else CHECK(std::abs(c) > 0.0);
    }
    CHECK(polynomial_equivariance_defect(lin.phi, LinearAction::negation(1)) < 1e-14);
  }
  SUBCASE("swap") {
    PolyVectorField x(2, 2);
    x.set(0, {1, 0, 0}, -2.0);
    x.set(0, {0, 1, 0}, 0.5);
    x.set(1, {1, 0, 0}, 0.5);
    x.set(1, {0, 1, 0}, -2.0);
    x.set(0, {0, 2, 0}, 1.0);
    x.set(1, {2, 0, 0}, 1.0);
    x.set(0, {1, 1, 0}, 0.3);
    x.set(1, {1, 1, 0}, 0.3);
    LinearAction sw = LinearAction::swap();
    REQUIRE(polynomial_equivariance_defect(x, sw) < 1e-15);
    Linearization plain = poincare_linearize(x, 8);
    Linearization eq = equivariant_linearize(x, sw, 8);
    CHECK(polynomial_equivariance_defect(eq.phi, sw) < 1e-12);
    for (double r : eq.report.degree_residual) CHECK(r < 1e-12);
    CHECK(eq.report.disk_residual <= 2.0 * plain.report.disk_residual + 1e-16);
    CHECK(plain.report.disk_residual <= 2.0 * eq.report.disk_residual + 1e-16);
    // pointwise group average of the plain conjugator also conjugates
    VectorMap f = [&](const VectorXd& p) -> VectorXd { return plain.phi(p); };
    VectorMap avg = equivariant_average(f, sw);
    for (double a = 0.0; a < 6.0; a += 0.7) {
      VectorXd p(2);
      p << 0.05 * std::cos(a), 0.05 * std::sin(a);
      MatrixXd jac = central_jacobian<double>(avg, p, 1e-5);
      VectorXd r = jac * x(p) - eq.linear * avg(p);
      CHECK(r.norm() < 1e-8);
    }
  }
  SUBCASE("non-equivariant field is rejected") {
    try {
      equivariant_linearize(field_2d_pi(), LinearAction::swap(), 4);
      FAIL("expected an equivariance error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::equivariance);
    }
  }
}

TEST_CASE("jet norms") {
  CHECK(jet_norm(PolyVectorField(2, 3), 0.5, 2).value == 0.0);
  MatrixXd a(2, 2);
  a << 2.0, 0.0, 0.0, 1.0;
  for (double rho : {0.25, 0.5}) {
    JetNorm j = jet_norm(PolyVectorField::linear(a, 1), rho, 1);
    CHECK(std::abs(j.value - (2.0 * rho + 3.0)) < 1e-12);
  }
  // rotated: top singular direction off the grid
  MatrixXd b(2, 2);
  b << 1.0, 2.0, -0.5, 0.7;
  Eigen::JacobiSVD<MatrixXd> svd(b);
  double expected = 0.5 * svd.singularValues()(0) + b.col(0).norm() + b.col(1).norm();
  JetNorm jb = jet_norm(PolyVectorField::linear(b, 1), 0.5, 1);
  CHECK(jb.value <= expected + 1e-12);
  CHECK(jb.value >= 0.99 * expected);

  PolyVectorField q(2, 2);
  q.set(0, {2, 0, 0}, 1.0);
  q.set(1, {1, 1, 0}, -3.0);
  double n_big = jet_norm(q, 0.5, 0).value, n_small = jet_norm(q, 0.25, 0).value;
  CHECK(std::abs(n_big / n_small - 4.0) < 0.04);
  double d_big = jet_norm(q, 0.5, 1).value, d_small = jet_norm(q, 0.25, 1).value;
  CHECK(d_big / d_small >= 2.0 - 1e-9);
  CHECK(d_big / d_small <= 4.0 + 1e-9);
  // second derivatives of a quadratic are constant: r = 2 adds a radius-independent term
  double s_big = jet_norm(q, 0.5, 2).value;
  CHECK(s_big > d_big);

  PolyVectorField q3(3, 2);
  q3.set(2, {0, 1, 1}, 1.0);
  CHECK(jet_norm(q3, 1.0, 0).value == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("family continuity") {
  SUBCASE("constant family") {
    auto fam = [](double) { return field_2d_pi(); };
    ContinuityReport r = family_continuity(fam, 0.0, 1.0, 6, 4);
    CHECK(r.max_jump == 0.0);
    CHECK(r.refined_max_jump == 0.0);
  }
  SUBCASE("shifting eigenvalue") {
    auto fam = [](double s) {
      PolyVectorField x(1, 2);
      x.set(0, {1, 0, 0}, -1.0 - s);
      x.set(0, {2, 0, 0}, 1.0);
      return x;
    };
    ContinuityReport r = family_continuity(fam, 0.0, 0.1, 8, 10);
    CHECK(r.max_jump > 0.0);
    CHECK(r.jump_ratio > 2.0 / 3.0);
    CHECK(r.jump_ratio < 6.0);
    CHECK(r.series.size() == 11);
  }
  SUBCASE("resonance crossing") {
    auto fam = [](double s) {
      PolyVectorField x(2, 2);
      x.set(0, {1, 0, 0}, -1.0 - s);
      x.set(1, {0, 1, 0}, -2.0);
      x.set(1, {2, 0, 0}, 1.0);
      return x;
    };
    try {
      family_continuity(fam, -0.05, 0.05, 4, 10);
      FAIL("expected a resonance error");
    } catch (const ResonanceError& e) {
      REQUIRE(e.parameter().has_value());
      CHECK(std::abs(*e.parameter()) < 1e-12);
      CHECK(e.alpha() == std::vector<int>{2, 0});
    }
  }
}

TEST_CASE("chart extension by the flow") {
  PolyVectorField poly(1, 2);
  poly.set(0, {1, 0, 0}, -1.0);
  poly.set(0, {2, 0, 0}, 1.0);
  SmoothField<double> x(1, [](const VectorXd& p) -> VectorXd { return VectorXd::Constant(1, -p(0) + p(0) * p(0)); });
  Linearization lin = poincare_linearize(poly, 8);

  ChartExtension far = extend_chart_by_flow(x, lin.phi, VectorXd::Constant(1, 0.9));
  CHECK(std::abs(far.value(0) - 9.0) < 1e-6);
  CHECK(far.discrepancy < 1e-7);
  CHECK(far.time > 0.0);

  ChartExtension near = extend_chart_by_flow(x, lin.phi, VectorXd::Constant(1, 0.03));
  CHECK(near.time == 0.0);
  CHECK(std::abs(near.value(0) - lin.phi(VectorXd::Constant(1, 0.03))(0)) < 1e-15);

  try {
    extend_chart_by_flow(x, lin.phi, VectorXd::Constant(1, 1.5));
    FAIL("expected a basin error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::basin);
  }

  // global conjugacy in two dimensions
  PolyVectorField p2 = field_2d_pi();
  SmoothField<double> x2(2, [p2](const VectorXd& p) -> VectorXd { return p2(p); });
  Linearization l2 = poincare_linearize(p2, 8);
  for (double a = 0.3; a < 6.2; a += 1.1) {
    VectorXd p(2);
    p << 0.8 * std::cos(a), 0.8 * std::sin(a);
    ChartExtension h0 = extend_chart_by_flow(x2, l2.phi, p);
    CHECK(h0.discrepancy < 1e-7);
    for (double t : {0.5, 1.7}) {
      VectorXd q = flow(x2, p, t).endpoint;
      ChartExtension ht = extend_chart_by_flow(x2, l2.phi, q);
      VectorXd expect = (t * l2.linear).exp() * h0.value;
      CHECK((ht.value - expect).norm() < 1e-6);
    }
  }
}
