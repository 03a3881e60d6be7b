#include "doctest.h"

#include <cmath>
#include <numbers>
#include <set>
#include <unsupported/Eigen/MatrixFunctions>

#include "eqgrad/errors.hpp"
#include "eqgrad/rng.hpp"
#include "eqgrad/spectra.hpp"

using namespace eqgrad;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double pi = std::numbers::pi;

// lambda_i in {sums of >= 2 entries with repetition}, found by a reachability
// sweep over values up to max |lambda| without any order bound
bool resonant_oracle(const std::vector<int>& lam) {
  int top = 0;
  for (int v : lam) top = std::max(top, std::abs(v));
  // reach[s][c]: value s reachable with c terms (c capped at 2)
  std::vector<std::array<bool, 3>> reach(top + 1, {false, false, false});
  reach[0][0] = true;
  for (int s = 0; s <= top; ++s)
    for (int c = 0; c <= 2; ++c) {
      if (!reach[s][c]) continue;
      for (int v : lam) {
        int t = s + std::abs(v);
        if (t <= top) reach[t][std::min(c + 1, 2)] = true;
      }
    }
  for (int v : lam)
    if (reach[std::abs(v)][2]) return true;
  return false;
}

MatrixXd random_spd(Rng& rng, int n) {
  MatrixXd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = rng.normal();
  return a * a.transpose() + 0.5 * MatrixXd::Identity(n, n);
}

}  // namespace

TEST_CASE("resonance examples") {
  auto r = check_nonresonant(EigenSpectrum({-1.0, -2.0}));
  CHECK(r.resonant);
  REQUIRE(r.witness);
  CHECK(r.witness->index == 1);
  CHECK(r.witness->alpha == std::vector<int>{2, 0});
  CHECK(r.exact);

  auto one = check_nonresonant(EigenSpectrum({-1.0}));
  CHECK_FALSE(one.resonant);
  CHECK(one.margin > 0.5);

  auto p = check_nonresonant(EigenSpectrum({-1.0, -pi}));
  CHECK_FALSE(p.resonant);
  CHECK(p.search_bound == 3);
  CHECK(p.margin * pi > 0.1);
  CHECK(std::abs(p.margin * pi - (pi - 3.0)) < 1e-12);

  try {
    check_nonresonant(EigenSpectrum({-1.0, 2.0}));
    FAIL("expected sign error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::sign);
  }
  CHECK_THROWS_AS(EigenSpectrum({-1.0, 0.0}), Error);

  // sources by the global sign flip
  auto src = check_nonresonant(EigenSpectrum({3.0, 1.0}));
  CHECK(src.resonant);
  CHECK(src.witness->index == 0);
  CHECK(src.witness->alpha == std::vector<int>{0, 3});

  // order cap for truncated jets
  auto capped = check_nonresonant(EigenSpectrum({-1.0, -5.0}), 1e-9, 4);
  CHECK_FALSE(capped.resonant);
  CHECK(check_nonresonant(EigenSpectrum({-1.0, -5.0}), 1e-9, 5).resonant);
}

TEST_CASE("resonance agrees with the reachability oracle on all small integer spectra") {
  int checked = 0;
  for (int n = 1; n <= 4; ++n) {
    int total = 1;
    for (int k = 0; k < n; ++k) total *= 6;
    for (int code = 0; code < total; ++code) {
      std::vector<int> lam;
      int c = code;
      for (int k = 0; k < n; ++k) {
        lam.push_back(-(1 + c % 6));
        c /= 6;
      }
      std::vector<double> neg(lam.begin(), lam.end()), pos;
      for (double v : neg) pos.push_back(-v);
      bool expect = resonant_oracle(lam);
      auto rn = check_nonresonant(EigenSpectrum(neg));
      auto rp = check_nonresonant(EigenSpectrum(pos));
      REQUIRE(rn.resonant == expect);
      REQUIRE(rp.resonant == expect);
      if (rn.witness) {
        int s = 0, order = 0;
        for (int j = 0; j < n; ++j) {
          s += rn.witness->alpha[j] * lam[j];
          order += rn.witness->alpha[j];
        }
        CHECK(order >= 2);
        CHECK(s == lam[rn.witness->index]);
      }
      ++checked;
    }
  }
  CHECK(checked == 6 + 36 + 216 + 1296);
}

TEST_CASE("resonance is scale covariant") {
  Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    int n = 1 + trial % 4;
    std::vector<double> lam;
    for (int k = 0; k < n; ++k) lam.push_back(-double(rng.integer(1, 6)));
    if (trial % 3 == 0) lam[0] = -rng.uniform(0.5, 6.0);
    auto base = check_nonresonant(EigenSpectrum(lam));
    for (double c : {0.37, 2.5, pi}) {
      std::vector<double> scaled;
      for (double v : lam) scaled.push_back(c * v);
      auto r = check_nonresonant(EigenSpectrum(scaled));
      CHECK(r.resonant == base.resonant);
      if (r.witness && base.witness) {
        CHECK(r.witness->index == base.witness->index);
        CHECK(r.witness->alpha == base.witness->alpha);
      }
    }
  }
}

TEST_CASE("gradient linearization") {
  auto quadratic = [](VectorXd lam) {
    auto grad = [lam](const VectorXd& x) { return VectorXd(lam.cwiseProduct(x)); };
    auto hess = [lam](const VectorXd&) { return MatrixXd(lam.asDiagonal()); };
    return std::make_pair(grad, hess);
  };
  VectorXd lam(3);
  lam << -1.0, -2.5, -0.7;
  auto [grad, hess] = quadratic(lam);
  auto flat = [](const VectorXd& x) { return MatrixXd(MatrixXd::Identity(x.size(), x.size())); };
  VectorXd origin = VectorXd::Zero(3);
  MatrixXd a = hessian_gradient_linearization(grad, hess, flat, origin);
  CHECK((a - MatrixXd(lam.asDiagonal())).norm() < 1e-15);

  VectorXd off = VectorXd::Constant(3, 0.1);
  try {
    hessian_gradient_linearization(grad, hess, flat, off);
    FAIL("expected precondition error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::precondition);
  }

  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    int n = 2 + trial % 3;
    MatrixXd h = random_spd(rng, n);
    double sign = trial % 2 ? 1.0 : -1.0;
    h *= sign;
    MatrixXd g = random_spd(rng, n);
    MatrixXd l = linearization_from_hessian(h, g);
    // self-adjoint for g: G L symmetric
    CHECK(((g * l) - (g * l).transpose()).norm() < 1e-8 * h.norm());
    auto s = EigenSpectrum::of(l);
    auto t = gradient_spectrum(h, g);
    REQUIRE(s.size() == t.size());
    for (int i = 0; i < s.size(); ++i) CHECK(std::abs(s.eigenvalues()[i] - t.eigenvalues()[i]) < 1e-8);
    CHECK((sign < 0 ? s.sink() : s.source()));
  }
}

TEST_CASE("condition C2") {
  EigenSpectrum a({-1.0, -pi}), b({-1.3, -2.0});
  CHECK(check_C2({{"p", a, 0}, {"q", a, 0}}).holds);
  auto bad = check_C2({{"p", a, 0}, {"q", EigenSpectrum({-pi, -1.0}), 1}});
  CHECK_FALSE(bad.holds);
  REQUIRE(bad.witness);
  CHECK(bad.witness->first == 0);
  CHECK(bad.witness->second == 1);
  auto split = check_C2({{"p", a, 0}, {"q", b, 0}});
  CHECK_FALSE(split.holds);

  // random invariant metrics at generic sinks: distinct orbits get distinct spectra
  Rng rng(12);
  std::vector<SpectrumEntry> entries;
  for (int k = 0; k < 4; ++k) {
    MatrixXd h = -random_spd(rng, 2);
    MatrixXd g = random_spd(rng, 2);
    auto s = gradient_spectrum(h, g);
    entries.push_back({"p" + std::to_string(k), s, k});
    entries.push_back({"p" + std::to_string(k) + "'", s, k});
  }
  auto v = check_C2(entries);
  CHECK(v.holds);
  CHECK(v.separation > 1e-6);
}

TEST_CASE("condition C3") {
  auto swap = LinearAction::swap();
  MatrixXd good(2, 2);
  good << -1.5, 0.5, 0.5, -1.5;
  auto v = check_C3({{"p", good, swap}, {"q", -MatrixXd::Identity(2, 2), swap}});
  CHECK_FALSE(v.holds);
  REQUIRE(v.witness);
  CHECK(v.witness->first == 1);
  CHECK(check_C3({{"p", good, swap}, {"q", -MatrixXd::Identity(2, 2), LinearAction::trivial(2)}}).holds == false);
  CHECK(check_C3({{"p", good, swap}, {"q", good, swap}}).holds);
  MatrixXd bad(2, 2);
  bad << -1, 0, 0, -2;
  CHECK_THROWS_AS(check_C3({{"p", bad, swap}}), Error);
}

TEST_CASE("genericity report") {
  auto swap = LinearAction::swap();
  MatrixXd l1(2, 2);
  l1 << -1.5, 0.5, 0.5, -1.5;  // spectrum (-1, -2): resonant
  MatrixXd l2(2, 2);
  l2 << -2.0, 0.4, 0.4, -2.0;  // (-1.6, -2.4)
  auto r = genericity_report({{"p", l1, 0, swap}, {"q", l2, 1, swap}});
  CHECK_FALSE(r.c1);
  CHECK(r.c2.holds);
  CHECK(r.c3.holds);
  CHECK_FALSE(r.overall);
  auto ok = genericity_report({{"q", l2, 1, swap}});
  CHECK(ok.overall);
}

TEST_CASE("K-separation") {
  MatrixXd x = Eigen::Vector2d(-1.0, -2.0).asDiagonal();
  MatrixXd id = MatrixXd::Identity(2, 2);
  auto triv = LinearAction::trivial(2);

  auto flow = k_separation((0.5 * x).exp(), x, triv, id, 10.0);
  CHECK(flow.distance < 1e-8);
  CHECK(std::abs(flow.t - 0.5) < 1e-6);
  CHECK_FALSE(flow.in_l_gk);

  MatrixXd psi = Eigen::Vector2d(2.0, 1.0).asDiagonal();
  auto sep = k_separation(psi, x, triv, id, 3.0);
  double grid = 1e300;
  for (double t = -10.0; t <= 10.0; t += 1e-4) {
    grid = std::min(grid, std::max(std::abs(2.0 - std::exp(-t)), std::abs(1.0 - std::exp(-2.0 * t))));
  }
  CHECK(sep.distance <= grid + 1e-12);
  // the two branches cross where e^{-t} solves u^2 + u - 3 = 0; the grid brackets the kink to O(step)
  double kink = 2.0 - 0.5 * (std::sqrt(13.0) - 1.0);
  CHECK(std::abs(sep.distance - kink) < 1e-9);
  CHECK(grid - sep.distance < 1e-3);
  CHECK(sep.in_l_gk == (sep.norm <= 3.0 && sep.inverse_norm <= 3.0 && sep.distance >= 1.0 / 3.0));
  CHECK(sep.in_l_gk);
  CHECK_FALSE(k_separation(psi, x, triv, id, 1.5).in_l_gk);

  // stabilizer elements are at distance zero
  auto d4 = LinearAction::dihedral(4);
  MatrixXd scalar = -id;
  for (int g = 0; g < 8; ++g) {
    auto v = k_separation(d4.matrix(g), scalar, d4, id, 5.0);
    CHECK(v.distance < 1e-8);
    CHECK_FALSE(v.in_l_gk);
  }

  MatrixXd shear(2, 2);
  shear << 1, 1, 0, 1;
  try {
    k_separation(shear, x, triv, id, 2.0);
    FAIL("expected membership error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::membership);
  }
}

TEST_CASE("K-separation is invariant under the stabilizer") {
  Rng rng(31);
  MatrixXd x = Eigen::Vector3d(-1.0, -1.0, -2.0).asDiagonal();
  auto rot = LinearAction::rotations(4);
  std::vector<MatrixXd> mats;
  for (const auto& m : rot.matrices()) {
    MatrixXd e = MatrixXd::Identity(3, 3);
    e.topLeftCorner(2, 2) = m;
    mats.push_back(e);
  }
  LinearAction stab(rot.group(), mats);
  MatrixXd g = MatrixXd::Identity(3, 3);
  for (int trial = 0; trial < 10; ++trial) {
    MatrixXd psi = MatrixXd::Zero(3, 3);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) psi(i, j) = rng.normal();
    psi(2, 2) = rng.uniform(0.5, 2.0);
    double base = k_separation(psi, x, stab, g, 4.0).distance;
    for (const auto& m : mats) {
      CHECK(std::abs(k_separation(psi * m, x, stab, g, 4.0).distance - base) < 1e-6);
      CHECK(std::abs(k_separation(m * psi, x, stab, g, 4.0).distance - base) < 1e-6);
    }
  }
}
