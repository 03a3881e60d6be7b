#include "doctest.h"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>
#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include "eqgrad/errors.hpp"
#include "eqgrad/group.hpp"
#include "eqgrad/rng.hpp"
#include "eqgrad/trig_series.hpp"

using namespace eqgrad;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double pi = std::numbers::pi;

MatrixXd random_orthogonal(Rng& rng, int n) {
  MatrixXd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = rng.normal();
  Eigen::HouseholderQR<MatrixXd> qr(a);
  return qr.householderQ();
}

MatrixXd block_diag(const std::vector<MatrixXd>& blocks) {
  int n = 0;
  for (const auto& b : blocks) n += static_cast<int>(b.rows());
  MatrixXd m = MatrixXd::Zero(n, n);
  int at = 0;
  for (const auto& b : blocks) {
    m.block(at, at, b.rows(), b.cols()) = b;
    at += static_cast<int>(b.rows());
  }
  return m;
}

// D4 acting on R^5 as std + std + trivial, conjugated by q
LinearAction two_planes_and_a_line(const MatrixXd& q) {
  auto d4 = LinearAction::dihedral(4);
  std::vector<MatrixXd> mats;
  for (const auto& m : d4.matrices()) {
    mats.push_back(q * block_diag({m, m, MatrixXd::Identity(1, 1)}) * q.transpose());
  }
  return LinearAction(d4.group(), mats);
}

// left multiplication by i and j on the quaternions
LinearAction quaternion_action() {
  MatrixXd li = MatrixXd::Zero(4, 4), lj = MatrixXd::Zero(4, 4);
  li(1, 0) = 1; li(0, 1) = -1; li(3, 2) = 1; li(2, 3) = -1;
  lj(2, 0) = 1; lj(3, 1) = -1; lj(0, 2) = -1; lj(1, 3) = 1;
  return LinearAction::generated({li, lj}, "Q8");
}

bool same_rows(const CharacterTable& a, const CharacterTable& b) {
  if (a.size() != b.size()) return false;
  for (int i = 0; i < a.size(); ++i) {
    bool found = false;
    for (int j = 0; j < b.size() && !found; ++j) {
      bool eq = a.indicators[i] == b.indicators[j];
      for (std::size_t k = 0; k < a.values[i].size() && eq; ++k) {
        eq = std::abs(a.values[i][k] - b.values[j][k]) < 1e-9;
      }
      found = eq;
    }
    if (!found) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("group tables") {
  for (const auto& g : {FiniteGroup::cyclic(6), FiniteGroup::dihedral(5), FiniteGroup::dihedral(4),
                        FiniteGroup::product(FiniteGroup::cyclic(2), FiniteGroup::dihedral(3))}) {
    const int n = g.order();
    for (int a = 0; a < n; ++a) {
      CHECK(g.multiply(a, g.inverse(a)) == g.identity());
      CHECK(g.multiply(g.identity(), a) == a);
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c)
          REQUIRE(g.multiply(g.multiply(a, b), c) == g.multiply(a, g.multiply(b, c)));
    }
    int total = 0;
    for (const auto& cls : g.classes()) total += static_cast<int>(cls.size());
    CHECK(total == n);
    // sum of squared degrees
    int s = 0;
    for (int d : g.characters().degrees) s += d * d;
    CHECK(s == n);
    CHECK(g.characters().size() == static_cast<int>(g.classes().size()));
  }
  CHECK(FiniteGroup::dihedral(4).classes().size() == 5);
  CHECK(FiniteGroup::dihedral(5).classes().size() == 4);

  // not associative: a Latin square without associativity
  std::vector<std::vector<int>> bad = {{0, 1, 2}, {1, 0, 2}, {2, 2, 0}};
  CHECK_THROWS_AS(FiniteGroup(bad, "bad"), Error);
  std::vector<std::vector<int>> latin = {{0, 1, 2, 3, 4}, {1, 0, 3, 4, 2}, {2, 4, 0, 1, 3},
                                         {3, 2, 4, 0, 1}, {4, 3, 1, 2, 0}};
  CHECK_THROWS_AS(FiniteGroup(latin, "latin"), Error);
}

TEST_CASE("closed-form characters agree with the class-algebra path") {
  for (int k = 1; k <= 7; ++k) {
    auto c = FiniteGroup::cyclic(k);
    CHECK(same_rows(c.characters(), class_algebra_characters(c)));
    auto d = FiniteGroup::dihedral(k);
    CHECK(same_rows(d.characters(), class_algebra_characters(d)));
  }
  // quaternion group: one quaternionic 2-dimensional irreducible
  auto q = quaternion_action();
  CHECK(q.group().order() == 8);
  const auto& t = q.group().characters();
  int quaternionic = 0;
  for (int i = 0; i < t.size(); ++i) {
    if (t.type(i) == IrrepType::quaternionic) {
      ++quaternionic;
      CHECK(t.degrees[i] == 2);
    }
  }
  CHECK(quaternionic == 1);
  // Z/3: two conjugate complex characters
  int complex = 0;
  auto c3 = FiniteGroup::cyclic(3);
  const auto& z3 = c3.characters();
  for (int i = 0; i < z3.size(); ++i) complex += z3.type(i) == IrrepType::complex;
  CHECK(complex == 2);
}

TEST_CASE("decompose examples") {
  SUBCASE("trivial group") {
    auto d = decompose(LinearAction::trivial(3));
    REQUIRE(d.blocks.size() == 1);
    CHECK(d.blocks[0].multiplicity == 3);
    CHECK(d.blocks[0].irrep_dimension == 1);
  }
  SUBCASE("swap") {
    auto d = decompose(LinearAction::swap());
    REQUIRE(d.blocks.size() == 2);
    for (const auto& b : d.blocks) {
      CHECK(b.multiplicity == 1);
      CHECK(b.irrep_dimension == 1);
      VectorXd v = b.basis.col(0);
      bool sym = std::abs(v(0) - v(1)) < 1e-12, anti = std::abs(v(0) + v(1)) < 1e-12;
      CHECK((sym || anti));
    }
  }
  SUBCASE("D4 standard") {
    auto a = LinearAction::dihedral(4);
    double s = 0.0;
    for (const auto& m : a.matrices()) s += m.trace() * m.trace();
    CHECK(std::abs(s / 8.0 - 1.0) < 1e-12);
    auto d = decompose(a);
    REQUIRE(d.blocks.size() == 1);
    CHECK(d.blocks[0].multiplicity == 1);
    CHECK(d.blocks[0].irrep_dimension == 2);
  }
  SUBCASE("non-real types") {
    auto z3 = decompose(LinearAction::rotations(3));
    REQUIRE(z3.blocks.size() == 1);
    CHECK(z3.blocks[0].type == IrrepType::complex);
    CHECK(z3.blocks[0].irrep_dimension == 2);
    CHECK(z3.blocks[0].multiplicity == 1);
    auto q = decompose(quaternion_action());
    REQUIRE(q.blocks.size() == 1);
    CHECK(q.blocks[0].type == IrrepType::quaternionic);
    CHECK(q.blocks[0].irrep_dimension == 4);
    CHECK(q.blocks[0].multiplicity == 1);
  }
}

TEST_CASE("isotypic projectors") {
  Rng rng(7);
  std::vector<LinearAction> actions{two_planes_and_a_line(random_orthogonal(rng, 5)),
                                    quaternion_action(), LinearAction::rotations(5)};
  // S3 = D3 permuting three coordinates
  MatrixXd c = MatrixXd::Zero(3, 3), t = MatrixXd::Zero(3, 3);
  c(1, 0) = c(2, 1) = c(0, 2) = 1;
  t(1, 0) = t(0, 1) = t(2, 2) = 1;
  actions.push_back(LinearAction::generated({c, t}, "S3"));
  for (const auto& a : actions) {
    auto d = decompose(a);
    const int n = a.dimension();
    MatrixXd sum = MatrixXd::Zero(n, n);
    int dim = 0;
    for (const auto& b : d.blocks) {
      const MatrixXd& p = b.projector;
      CHECK((p * p - p).norm() < 1e-10);
      for (const auto& m : a.matrices()) CHECK((p * m - m * p).norm() < 1e-10);
      sum += p;
      dim += b.irrep_dimension * b.multiplicity;
      for (const auto& o : d.blocks)
        if (&o != &b) CHECK((o.projector * p).norm() < 1e-10);
    }
    CHECK((sum - MatrixXd::Identity(n, n)).norm() < 1e-10);
    CHECK(dim == n);
  }
  auto s3 = decompose(actions.back());
  CHECK(s3.blocks.size() == 2);
}

TEST_CASE("generic automorphism examples") {
  auto swap = LinearAction::swap();
  auto r = is_generic_automorphism(MatrixXd::Identity(2, 2), swap);
  CHECK_FALSE(r.generic);
  REQUIRE(r.witness);
  CHECK(std::abs(*r.witness - 1.0) < 1e-12);

  MatrixXd lam(2, 2);
  lam << -1.5, 0.5, 0.5, -1.5;  // -1 on the symmetric line, -2 on the antisymmetric one
  CHECK(is_generic_automorphism(lam, swap).generic);

  MatrixXd off(2, 2);
  off << -1, 0, 0, -2;
  CHECK_THROWS_AS(is_generic_automorphism(off, swap), Error);
  try {
    is_generic_automorphism(off, swap);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::equivariance);
  }

  // scalar on each isotypic slot: generic exactly when the scalars are distinct
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    MatrixXd q = random_orthogonal(rng, 5);
    auto action = two_planes_and_a_line(q);
    double a = rng.uniform(-3, -1), b = rng.uniform(-3, -1), c = rng.uniform(-3, -1);
    int pattern = trial % 4;
    if (pattern == 1) b = a;
    if (pattern == 2) c = a;
    MatrixXd l = q * VectorXd((VectorXd(5) << a, a, b, b, c).finished()).asDiagonal() * q.transpose();
    auto rep = is_generic_automorphism(l, action);
    CHECK(rep.generic == (pattern == 0 || pattern == 3));
    CHECK_FALSE(rep.flagged);
  }

  // an R-irreducible plane of complex type is reported, not silently accepted
  auto z3 = is_generic_automorphism(-MatrixXd::Identity(2, 2), LinearAction::rotations(3));
  CHECK_FALSE(z3.generic);
  CHECK(z3.flagged);
  CHECK(z3.eigenspaces[0].non_real_type);
  MatrixXd rot(2, 2);
  rot << -1, -0.3, 0.3, -1;
  CHECK(is_generic_automorphism(rot, LinearAction::rotations(3)).generic);
}

TEST_CASE("generic automorphisms are dense") {
  Rng rng(99);
  MatrixXd q = random_orthogonal(rng, 5);
  auto action = two_planes_and_a_line(q);
  MatrixXd base = -MatrixXd::Identity(5, 5);
  CHECK_FALSE(is_generic_automorphism(base, action).generic);
  int generic = 0;
  for (int trial = 0; trial < 100; ++trial) {
    MatrixXd e(5, 5);
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) e(i, j) = rng.normal();
    e = action.average(e);
    e *= 1e-3 / e.norm();
    generic += is_generic_automorphism(base + e, action).generic;
  }
  CHECK(generic >= 99);
}

TEST_CASE("equivariant average") {
  auto swap = LinearAction::swap();
  MatrixXd p = swap.matrix(1);
  SUBCASE("linear map") {
    MatrixXd a(2, 2);
    a << 1, 2, 3, 4;
    auto f = equivariant_average([a](const VectorXd& x) { return VectorXd(a * x); }, swap);
    MatrixXd expect = 0.5 * (a + p * a * p);
    VectorXd x(2);
    x << 0.3, -1.1;
    CHECK((f(x) - expect * x).norm() < 1e-14);
  }
  SUBCASE("equivariant map unchanged, averaging idempotent") {
    auto g = [](const VectorXd& x) { return VectorXd(x * x.squaredNorm() + x.reverse()); };
    auto f = equivariant_average(g, swap);
    Rng rng(3);
    for (int k = 0; k < 10; ++k) {
      VectorXd x(2);
      x << rng.normal(), rng.normal();
      CHECK((f(x) - g(x)).norm() < 1e-14);
    }
  }
  SUBCASE("arbitrary map on D4") {
    auto d4 = LinearAction::dihedral(4);
    auto h = [](const VectorXd& x) {
      VectorXd y(2);
      y << std::sin(x(0)) + x(1) * x(1), std::exp(x(0) * x(1)) - 0.3 * x(1);
      return y;
    };
    auto f = equivariant_average(h, d4);
    auto ff = equivariant_average(f, d4);
    Rng rng(5);
    for (int k = 0; k < 20; ++k) {
      VectorXd x(2);
      x << rng.uniform(-1, 1), rng.uniform(-1, 1);
      for (const auto& g : d4.matrices()) CHECK((f(g * x) - g * f(x)).norm() < 1e-12);
      CHECK((ff(x) - f(x)).norm() < 1e-13);
    }
  }
  SUBCASE("negation keeps the odd part") {
    auto action = LinearAction::negation(2);
    auto f0 = [](const VectorXd& x) {
      return VectorXd(x + VectorXd::Constant(2, 0.1 * x.squaredNorm()) + 0.2 * x * x.squaredNorm());
    };
    auto f = equivariant_average(f0, action);
    VectorXd x(2);
    x << 0.2, -0.4;
    CHECK((f(x) - x - 0.2 * x * x.squaredNorm()).norm() < 1e-15);
  }
}

TEST_CASE("centralizer algebra") {
  CHECK(centralizer_algebra(Eigen::Vector2d(-1, -2).asDiagonal().toDenseMatrix()).dimension() == 2);
  CHECK(centralizer_algebra(-MatrixXd::Identity(2, 2)).dimension() == 4);

  Rng rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    int n = 2 + trial % 3;
    MatrixXd s(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) s(i, j) = rng.normal();
    s += 2.0 * MatrixXd::Identity(n, n);
    VectorXd d(n);
    for (int i = 0; i < n; ++i) d(i) = -1.0 - rng.integer(0, 2);
    MatrixXd lam = s * d.asDiagonal() * s.inverse();
    auto z = centralizer_algebra(lam);
    // kernel of B -> lam B - B lam by singular-value thresholding
    MatrixXd op = Eigen::kroneckerProduct(MatrixXd::Identity(n, n), lam) -
                  Eigen::kroneckerProduct(lam.transpose(), MatrixXd::Identity(n, n));
    Eigen::JacobiSVD<MatrixXd> svd(op);
    auto sv = svd.singularValues();
    int kernel = 0;
    for (int i = 0; i < sv.size(); ++i) kernel += sv(i) < 1e-8 * std::max(1.0, lam.norm());
    CHECK(z.dimension() == kernel);
    int expected = 0;
    for (int m : z.multiplicities) expected += m * m;
    CHECK(z.dimension() == expected);
    for (const auto& b : z.basis) CHECK((lam * b - b * lam).norm() < 1e-10 * lam.norm());
  }

  MatrixXd rot(2, 2);
  rot << 0, -1, 1, 0;
  try {
    centralizer_algebra(rot);
    FAIL("expected defective-matrix error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::defective_matrix);
  }
  MatrixXd jordan(2, 2);
  jordan << -1, 1, 0, -1;
  CHECK_THROWS_AS(centralizer_algebra(jordan), Error);
}

TEST_CASE("eigenbasis tracking") {
  SUBCASE("constant path") {
    MatrixXd lam(2, 2);
    lam << -1, 0.3, 0, -2;
    auto t = track_eigenbasis({lam, lam, lam});
    for (const auto& f : t.frames) CHECK((f - t.frames[0]).norm() < 1e-14);
    for (const auto& c : t.conjugators) CHECK((c - MatrixXd::Identity(2, 2)).norm() < 1e-12);
  }
  SUBCASE("scaling diagonal path") {
    std::vector<MatrixXd> path;
    for (int k = 0; k <= 10; ++k) {
      double s = 1.0 + 0.01 * k;
      path.push_back(Eigen::Vector2d(-s, -2 * s).asDiagonal());
    }
    auto t = track_eigenbasis(path);
    for (const auto& c : t.conjugators) {
      CHECK(std::abs(c(0, 1)) < 1e-12);
      CHECK(std::abs(c(1, 0)) < 1e-12);
    }
    for (double r : t.conjugation_residuals) CHECK(r < 1e-8);
    CHECK(std::abs(t.eigenvalues.back()(0) + 2.2) < 1e-12);
  }
  SUBCASE("rotating eigenbasis") {
    std::vector<MatrixXd> path;
    MatrixXd d = Eigen::Vector3d(-1, -2, -2).asDiagonal();
    Rng rng(23);
    MatrixXd gen(3, 3);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) gen(i, j) = rng.normal();
    gen = (0.5 * (gen - gen.transpose())).eval();
    for (int k = 0; k <= 100; ++k) {
      MatrixXd r = (gen * (0.3 * k / 100.0)).exp();
      path.push_back(r * d * r.transpose());
    }
    auto t = track_eigenbasis(path);
    CHECK(t.max_frame_jump < 1e-2);
    for (double r : t.conjugation_residuals) CHECK(r < 1e-8);
    // the frame stays an eigenbasis with the original ordering
    for (std::size_t k = 0; k < path.size(); ++k) {
      CHECK((path[k] * t.frames[k] - t.frames[k] * t.eigenvalues[k].asDiagonal()).norm() < 1e-9);
    }
    CHECK(std::abs(t.eigenvalues.back()(2) + 1.0) < 1e-12);
  }
  SUBCASE("collision") {
    std::vector<MatrixXd> path;
    for (int k = 0; k <= 10; ++k) {
      double s = 0.1 * k;
      path.push_back(Eigen::Vector2d(-1 - s, -2 + s).asDiagonal());
    }
    try {
      track_eigenbasis(path);
      FAIL("expected tracking error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::tracking);
    }
  }
  SUBCASE("equivariant path") {
    auto swap = LinearAction::swap();
    std::vector<MatrixXd> path;
    for (int k = 0; k <= 5; ++k) {
      MatrixXd l(2, 2);
      double s = 0.02 * k;
      l << -1.5 - s, 0.5, 0.5, -1.5 - s;
      path.push_back(l);
    }
    CHECK(track_eigenbasis(path, swap).frames.size() == 6);
    path.back()(0, 0) -= 0.1;
    CHECK_THROWS_AS(track_eigenbasis(path, swap), Error);
  }
}

TEST_CASE("stabilizer and orbit") {
  // Z/4 on the torus by quarter turns (x, y) -> (-y, x)
  PointAction act{FiniteGroup::cyclic(4),
                  [](int g, const VectorXd& p) {
                    VectorXd q = p;
                    for (int k = 0; k < g; ++k) q = VectorXd((VectorXd(2) << -q(1), q(0)).finished());
                    return q;
                  },
                  [](const VectorXd& a, const VectorXd& b) {
                    return std::max(circle_distance(a(0), b(0)), circle_distance(a(1), b(1)));
                  }};
  auto check = [&](double x, double y, std::vector<int> expect) {
    VectorXd p(2);
    p << x, y;
    auto s = stabilizer(act, p);
    CHECK(s == expect);
    CHECK(act.group.is_subgroup(s));
    CHECK(orbit(act, p).size() * s.size() == 4);
  };
  check(pi, pi, {0, 1, 2, 3});
  check(0.0, 0.0, {0, 1, 2, 3});
  check(pi, 0.0, {0, 2});
  check(0.3, 1.1, {0});

  auto lin = linear_point_action(LinearAction::dihedral(4));
  VectorXd axis(2);
  axis << 1.0, 0.0;
  auto s = stabilizer(lin, axis);
  CHECK(s.size() == 2);
  CHECK(orbit(lin, axis).size() == 4);
  auto sub = LinearAction::dihedral(4).restricted(s);
  CHECK(sub.group().order() == 2);
  CHECK(decompose(sub).blocks.size() == 2);
}
