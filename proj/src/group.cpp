#include "eqgrad/group.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <sstream>

#include "eqgrad/errors.hpp"
#include "eqgrad/linalg.hpp"
#include "eqgrad/rng.hpp"

namespace eqgrad {

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;
using cplx = std::complex<double>;

Error group_error(const std::string& msg) { return Error(ErrorKind::precondition, msg); }

Eigen::MatrixXd rotation(double angle) {
  Eigen::MatrixXd r(2, 2);
  r << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  return r;
}

}  // namespace

std::string to_string(IrrepType t) {
  switch (t) {
    case IrrepType::real: return "real";
    case IrrepType::complex: return "complex";
    case IrrepType::quaternionic: return "quaternionic";
  }
  return "?";
}

IrrepType CharacterTable::type(int i) const {
  if (indicators[i] > 0) return IrrepType::real;
  if (indicators[i] < 0) return IrrepType::quaternionic;
  return IrrepType::complex;
}

FiniteGroup::FiniteGroup(std::vector<std::vector<int>> table, std::string name)
    : FiniteGroup(std::move(table), std::move(name), false) {}

FiniteGroup::FiniteGroup(std::vector<std::vector<int>> table, std::string name, bool closed_form)
    : table_(std::move(table)), name_(std::move(name)) {
  const int n = order();
  if (n == 0) throw group_error("empty multiplication table");
  if (n > 64) throw Error(ErrorKind::unsupported_dimension, "groups of order > 64 are not supported");
  for (const auto& row : table_) {
    if (static_cast<int>(row.size()) != n) throw group_error("multiplication table is not square");
    std::vector<bool> seen(n, false);
    for (int v : row) {
      if (v < 0 || v >= n || seen[v]) throw group_error("multiplication table row is not a permutation");
      seen[v] = true;
    }
  }
  for (int b = 0; b < n; ++b) {
    std::vector<bool> seen(n, false);
    for (int a = 0; a < n; ++a) {
      if (seen[table_[a][b]]) throw group_error("multiplication table column is not a permutation");
      seen[table_[a][b]] = true;
    }
  }
  identity_ = -1;
  for (int e = 0; e < n && identity_ < 0; ++e) {
    bool ok = true;
    for (int a = 0; a < n && ok; ++a) ok = table_[e][a] == a && table_[a][e] == a;
    if (ok) identity_ = e;
  }
  if (identity_ < 0) throw group_error("multiplication table has no identity");
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c)
        if (table_[table_[a][b]][c] != table_[a][table_[b][c]]) {
          std::ostringstream msg;
          msg << "multiplication table is not associative at (" << a << ", " << b << ", " << c << ")";
          throw group_error(msg.str());
        }
  finish(closed_form);
}

void FiniteGroup::finish(bool closed_form) {
  const int n = order();
  inverse_.assign(n, -1);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      if (table_[a][b] == identity_) inverse_[a] = b;

  class_of_.assign(n, -1);
  classes_.clear();
  auto add_class = [&](int a) {
    std::vector<int> cls;
    for (int g = 0; g < n; ++g) cls.push_back(table_[table_[g][a]][inverse_[g]]);
    std::sort(cls.begin(), cls.end());
    cls.erase(std::unique(cls.begin(), cls.end()), cls.end());
    for (int c : cls) class_of_[c] = static_cast<int>(classes_.size());
    classes_.push_back(std::move(cls));
  };
  add_class(identity_);
  for (int a = 0; a < n; ++a)
    if (class_of_[a] < 0) add_class(a);

  if (!closed_form) characters_ = class_algebra_characters(*this);
}

int FiniteGroup::element_order(int a) const {
  int k = 1;
  for (int p = a; p != identity_; p = table_[p][a]) ++k;
  return k;
}

namespace {

void fill_indicators(const FiniteGroup& g, CharacterTable& t) {
  t.indicators.clear();
  for (int i = 0; i < t.size(); ++i) {
    cplx s = 0.0;
    for (int a = 0; a < g.order(); ++a) s += t.values[i][g.class_of(g.multiply(a, a))];
    t.indicators.push_back(static_cast<int>(std::lround(s.real() / g.order())));
  }
}

// closed forms evaluated on class representatives
CharacterTable tabulate(const FiniteGroup& g, int count,
                        const std::function<cplx(int irrep, int element)>& chi,
                        const std::function<std::string(int)>& label) {
  CharacterTable t;
  for (int i = 0; i < count; ++i) {
    std::vector<cplx> row;
    for (const auto& cls : g.classes()) row.push_back(chi(i, cls.front()));
    t.degrees.push_back(static_cast<int>(std::lround(row[0].real())));
    t.values.push_back(std::move(row));
    t.labels.push_back(label(i));
  }
  fill_indicators(g, t);
  return t;
}

}  // namespace

FiniteGroup FiniteGroup::trivial() { return cyclic(1); }

FiniteGroup FiniteGroup::cyclic(int k) {
  if (k < 1) throw Error(ErrorKind::domain, "cyclic group needs k >= 1");
  std::vector<std::vector<int>> t(k, std::vector<int>(k));
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b) t[a][b] = (a + b) % k;
  FiniteGroup g(std::move(t), k == 1 ? "trivial" : "Z/" + std::to_string(k), true);
  g.characters_ = tabulate(
      g, k, [k](int m, int a) { return std::polar(1.0, two_pi * m * a / k); },
      [](int m) { return "chi" + std::to_string(m); });
  return g;
}

FiniteGroup FiniteGroup::dihedral(int k) {
  if (k < 1) throw Error(ErrorKind::domain, "dihedral group needs k >= 1");
  const int n = 2 * k;
  std::vector<std::vector<int>> t(n, std::vector<int>(n));
  auto mod = [k](int v) { return ((v % k) + k) % k; };
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      bool sa = a >= k, sb = b >= k;
      int i = a % k, j = b % k;
      if (!sa && !sb) t[a][b] = mod(i + j);
      else if (!sa && sb) t[a][b] = k + mod(j - i);
      else if (sa && !sb) t[a][b] = k + mod(i + j);
      else t[a][b] = mod(j - i);
    }
  }
  FiniteGroup g(std::move(t), "D" + std::to_string(k), true);
  // one-dimensional: (r, s) -> (1, 1), (1, -1), and for even k (-1, 1), (-1, -1)
  int linear = k % 2 == 0 ? 4 : 2;
  int planar = (k - 1) / 2;
  g.characters_ = tabulate(
      g, linear + planar,
      [k, linear](int m, int a) -> cplx {
        bool s = a >= k;
        int i = a % k;
        if (m < linear) {
          double r = (m >= 2 && i % 2 == 1) ? -1.0 : 1.0;
          double sv = (s && (m % 2 == 1)) ? -1.0 : 1.0;
          return r * sv;
        }
        int p = m - linear + 1;
        return s ? 0.0 : 2.0 * std::cos(two_pi * p * i / k);
      },
      [linear](int m) {
        static const char* names[] = {"trivial", "sign", "alt", "alt_sign"};
        if (m < linear) return std::string(names[m]);
        return "rho" + std::to_string(m - linear + 1);
      });
  return g;
}

FiniteGroup FiniteGroup::product(const FiniteGroup& a, const FiniteGroup& b) {
  const int na = a.order(), nb = b.order();
  std::vector<std::vector<int>> t(na * nb, std::vector<int>(na * nb));
  for (int i = 0; i < na * nb; ++i)
    for (int j = 0; j < na * nb; ++j)
      t[i][j] = a.multiply(i / nb, j / nb) * nb + b.multiply(i % nb, j % nb);
  return FiniteGroup(std::move(t), a.name() + " x " + b.name());
}

bool FiniteGroup::is_subgroup(const std::vector<int>& elements) const {
  if (elements.empty()) return false;
  std::vector<bool> in(order(), false);
  for (int e : elements) {
    if (e < 0 || e >= order()) return false;
    in[e] = true;
  }
  if (!in[identity_]) return false;
  for (int a : elements) {
    if (!in[inverse_[a]]) return false;
    for (int b : elements)
      if (!in[table_[a][b]]) return false;
  }
  return true;
}

FiniteGroup FiniteGroup::subgroup(const std::vector<int>& elements) const {
  if (!is_subgroup(elements)) throw group_error("element list is not a subgroup");
  const int m = static_cast<int>(elements.size());
  std::map<int, int> index;
  for (int i = 0; i < m; ++i) index[elements[i]] = i;
  std::vector<std::vector<int>> t(m, std::vector<int>(m));
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) t[i][j] = index.at(table_[elements[i]][elements[j]]);
  return FiniteGroup(std::move(t), name_ + " subgroup");
}

CharacterTable class_algebra_characters(const FiniteGroup& g) {
  const auto& classes = g.classes();
  const int h = static_cast<int>(classes.size());
  const int n = g.order();
  // (A_i)_{jk} = #{x in C_i : x^{-1} z_k in C_j}; central characters are common eigenvectors
  std::vector<Eigen::MatrixXd> a(h, Eigen::MatrixXd::Zero(h, h));
  for (int i = 0; i < h; ++i)
    for (int k = 0; k < h; ++k) {
      int z = classes[k].front();
      for (int x : classes[i]) a[i](g.class_of(g.multiply(g.inverse(x), z)), k) += 1.0;
    }

  Rng rng(0x5eed, static_cast<std::uint64_t>(n));
  for (int attempt = 0; attempt < 8; ++attempt) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(h, h);
    for (int i = 0; i < h; ++i) m += rng.uniform(0.5, 1.5) * a[i];
    Eigen::EigenSolver<Eigen::MatrixXd> es(m);
    if (es.info() != Eigen::Success) continue;
    Eigen::VectorXcd ev = es.eigenvalues();
    double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
    bool separated = true;
    for (int p = 0; p < h && separated; ++p)
      for (int q = p + 1; q < h && separated; ++q)
        separated = std::abs(ev(p) - ev(q)) > 1e-6 * scale;
    if (!separated) continue;

    CharacterTable t;
    bool ok = true;
    for (int p = 0; p < h && ok; ++p) {
      Eigen::VectorXcd w = es.eigenvectors().col(p);
      if (std::abs(w(0)) < 1e-12) {
        ok = false;
        break;
      }
      w /= w(0);
      double s = 0.0;
      for (int k = 0; k < h; ++k) s += std::norm(w(k)) / classes[k].size();
      double d = std::sqrt(n / s);
      int deg = static_cast<int>(std::lround(d));
      if (deg < 1 || std::abs(d - deg) > 1e-6) {
        ok = false;
        break;
      }
      std::vector<cplx> row(h);
      for (int k = 0; k < h; ++k) row[k] = double(deg) * w(k) / double(classes[k].size());
      t.degrees.push_back(deg);
      t.values.push_back(std::move(row));
    }
    if (!ok) continue;
    // trivial first, then by degree, then by the values
    std::vector<int> perm(h);
    std::iota(perm.begin(), perm.end(), 0);
    auto key = [&](int p) {
      std::vector<double> kv{double(t.degrees[p])};
      double weight = 0.0;
      for (int k = 0; k < h; ++k) weight += classes[k].size() * t.values[p][k].real();
      kv.push_back(-std::round(weight * 1e6));
      for (const auto& v : t.values[p]) {
        kv.push_back(-std::round(v.real() * 1e6));
        kv.push_back(-std::round(v.imag() * 1e6));
      }
      return kv;
    };
    std::sort(perm.begin(), perm.end(), [&](int x, int y) { return key(x) < key(y); });
    CharacterTable sorted;
    for (int p : perm) {
      sorted.degrees.push_back(t.degrees[p]);
      sorted.values.push_back(t.values[p]);
      sorted.labels.push_back("chi" + std::to_string(sorted.labels.size()));
    }
    // row orthogonality
    for (int p = 0; p < h && ok; ++p)
      for (int q = 0; q < h && ok; ++q) {
        cplx s = 0.0;
        for (int k = 0; k < h; ++k)
          s += double(classes[k].size()) * sorted.values[p][k] * std::conj(sorted.values[q][k]);
        ok = std::abs(s / double(n) - (p == q ? 1.0 : 0.0)) < 1e-8;
      }
    if (!ok) continue;
    fill_indicators(g, sorted);
    return sorted;
  }
  throw Error(ErrorKind::decomposition,
              "class-sum eigenproblem did not separate the characters of " + g.name());
}

LinearAction::LinearAction(FiniteGroup group, std::vector<Eigen::MatrixXd> matrices)
    : group_(std::move(group)), matrices_(std::move(matrices)) {
  if (static_cast<int>(matrices_.size()) != group_.order()) {
    throw group_error("one matrix per group element is required");
  }
  const Eigen::Index n = matrices_.front().rows();
  for (const auto& m : matrices_) {
    if (m.rows() != n || m.cols() != n) throw group_error("representation matrices must be n x n");
    if ((m.transpose() * m - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff() > 1e-12) {
      throw group_error("representation matrix is not orthogonal");
    }
  }
  for (int a = 0; a < group_.order(); ++a)
    for (int b = 0; b < group_.order(); ++b) {
      double d = (matrices_[a] * matrices_[b] - matrices_[group_.multiply(a, b)]).cwiseAbs().maxCoeff();
      if (d > 1e-12) {
        std::ostringstream msg;
        msg << "representation is not a homomorphism at (" << a << ", " << b << "): defect " << d;
        throw group_error(msg.str());
      }
    }
}

LinearAction LinearAction::trivial(int n) {
  return LinearAction(FiniteGroup::trivial(), {Eigen::MatrixXd::Identity(n, n)});
}

LinearAction LinearAction::generated(const std::vector<Eigen::MatrixXd>& generators,
                                     const std::string& name) {
  if (generators.empty()) throw group_error("at least one generator is required");
  const Eigen::Index n = generators.front().rows();
  std::vector<Eigen::MatrixXd> elems{Eigen::MatrixXd::Identity(n, n)};
  auto find = [&elems](const Eigen::MatrixXd& m) {
    for (std::size_t i = 0; i < elems.size(); ++i)
      if ((elems[i] - m).cwiseAbs().maxCoeff() < 1e-9) return static_cast<int>(i);
    return -1;
  };
  for (std::size_t i = 0; i < elems.size(); ++i) {
    for (const auto& gen : generators) {
      Eigen::MatrixXd p = gen * elems[i];
      if (find(p) < 0) {
        if (elems.size() >= 64) {
          throw Error(ErrorKind::unsupported_dimension, "generated group has order > 64");
        }
        elems.push_back(p);
      }
    }
  }
  const int m = static_cast<int>(elems.size());
  std::vector<std::vector<int>> t(m, std::vector<int>(m));
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b) {
      t[a][b] = find(elems[a] * elems[b]);
      if (t[a][b] < 0) throw group_error("generators do not close into a finite group");
    }
  // snap to the exact products so the homomorphism check is tight
  for (int a = 0; a < m; ++a) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(elems[a]);
    Eigen::MatrixXd q = qr.householderQ();
    Eigen::VectorXd d = qr.matrixQR().diagonal().array().sign();
    elems[a] = q * d.asDiagonal();
  }
  return LinearAction(FiniteGroup(std::move(t), name), std::move(elems));
}

LinearAction LinearAction::rotations(int k) {
  std::vector<Eigen::MatrixXd> m;
  for (int i = 0; i < k; ++i) m.push_back(rotation(two_pi * i / k));
  return LinearAction(FiniteGroup::cyclic(k), std::move(m));
}

LinearAction LinearAction::dihedral(int k) {
  Eigen::MatrixXd s(2, 2);
  s << 1, 0, 0, -1;
  std::vector<Eigen::MatrixXd> m;
  for (int i = 0; i < k; ++i) m.push_back(rotation(two_pi * i / k));
  for (int i = 0; i < k; ++i) m.push_back(s * rotation(two_pi * i / k));
  return LinearAction(FiniteGroup::dihedral(k), std::move(m));
}

LinearAction LinearAction::swap() {
  Eigen::MatrixXd p(2, 2);
  p << 0, 1, 1, 0;
  return LinearAction(FiniteGroup::cyclic(2), {Eigen::MatrixXd::Identity(2, 2), p});
}

LinearAction LinearAction::negation(int n) {
  return LinearAction(FiniteGroup::cyclic(2),
                      {Eigen::MatrixXd::Identity(n, n), -Eigen::MatrixXd::Identity(n, n)});
}

LinearAction LinearAction::restricted(const std::vector<int>& elements) const {
  std::vector<Eigen::MatrixXd> m;
  for (int e : elements) m.push_back(matrices_[e]);
  return LinearAction(group_.subgroup(elements), std::move(m));
}

Eigen::MatrixXd LinearAction::average(const Eigen::MatrixXd& a) const {
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(a.rows(), a.cols());
  for (const auto& g : matrices_) s += g * a * g.transpose();
  return s / double(matrices_.size());
}

double LinearAction::equivariance_defect(const Eigen::MatrixXd& a) const {
  double d = 0.0;
  for (const auto& g : matrices_) d = std::max(d, (a * g - g * a).cwiseAbs().maxCoeff());
  return d;
}

namespace {

Eigen::MatrixXcd character_projector(const LinearAction& action, int irrep) {
  const auto& g = action.group();
  const auto& t = g.characters();
  const int n = action.dimension();
  Eigen::MatrixXcd p = Eigen::MatrixXcd::Zero(n, n);
  for (int a = 0; a < g.order(); ++a) {
    p += std::conj(t.values[irrep][g.class_of(a)]) * action.matrix(a).cast<cplx>();
  }
  return p * (double(t.degrees[irrep]) / g.order());
}

int conjugate_partner(const CharacterTable& t, int i) {
  for (int j = 0; j < t.size(); ++j) {
    bool same = true;
    for (std::size_t k = 0; k < t.values[i].size() && same; ++k)
      same = std::abs(t.values[j][k] - std::conj(t.values[i][k])) < 1e-8;
    if (same) return j;
  }
  return i;
}

}  // namespace

IsotypicDecomposition decompose(const LinearAction& action) {
  const auto& t = action.group().characters();
  const int n = action.dimension();
  IsotypicDecomposition out;
  out.dimension = n;
  int total = 0;
  for (int i = 0; i < t.size(); ++i) {
    IrrepType type = t.type(i);
    if (type == IrrepType::complex && conjugate_partner(t, i) < i) continue;
    Eigen::MatrixXd p = character_projector(action, i).real();
    if (type == IrrepType::complex) p *= 2.0;
    p = 0.5 * (p + p.transpose());
    double tr = p.trace();
    int rank = static_cast<int>(std::lround(tr));
    if (std::abs(tr - rank) > 1e-8) {
      throw Error(ErrorKind::decomposition, "isotypic projector has non-integral trace");
    }
    if (rank == 0) continue;
    IsotypicBlock b;
    b.irrep = i;
    b.label = t.labels[i];
    b.type = type;
    b.irrep_dimension = type == IrrepType::real ? t.degrees[i] : 2 * t.degrees[i];
    if (rank % b.irrep_dimension != 0) {
      throw Error(ErrorKind::decomposition, "isotypic rank is not a multiple of the irreducible dimension");
    }
    b.multiplicity = rank / b.irrep_dimension;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(p);
    b.basis = es.eigenvectors().rightCols(rank);
    b.projector = b.basis * b.basis.transpose();
    total += rank;
    out.blocks.push_back(std::move(b));
  }
  if (total != n) throw Error(ErrorKind::decomposition, "isotypic components do not span the space");
  return out;
}

double character_norm(const LinearAction& action, const Eigen::MatrixXcd& projector) {
  const auto& g = action.group();
  double s = 0.0;
  for (int a = 0; a < g.order(); ++a) s += std::norm((projector * action.matrix(a)).trace());
  return s / g.order();
}

GenericAutomorphismReport is_generic_automorphism(const Eigen::MatrixXd& lambda,
                                                  const LinearAction& action,
                                                  double equivariance_tol, double norm_tol) {
  double scale = std::max(1.0, lambda.norm());
  double defect = action.equivariance_defect(lambda);
  if (defect > equivariance_tol * scale) {
    std::ostringstream msg;
    msg << "matrix does not commute with the action (defect " << defect << ")";
    throw Error(ErrorKind::equivariance, msg.str());
  }
  SpectralSplit split = spectral_split(lambda);
  std::optional<IsotypicDecomposition> iso;
  GenericAutomorphismReport out;
  for (const auto& c : split.clusters) {
    EigenspaceCheck e;
    e.eigenvalue = c.eigenvalue;
    e.dimension = c.multiplicity;
    e.character_norm = character_norm(action, c.projector);
    e.irreducible = std::abs(e.character_norm - 1.0) < norm_tol;
    bool real_value = std::abs(c.eigenvalue.imag()) <= 1e-7 * scale;
    if (!e.irreducible && real_value) {
      if (!iso) iso = decompose(action);
      Eigen::MatrixXd p = c.projector.real();
      for (const auto& b : iso->blocks) {
        double expected = b.type == IrrepType::complex ? 2.0 : 4.0;
        if (b.type == IrrepType::real || std::abs(e.character_norm - expected) > norm_tol) continue;
        if (e.dimension == b.irrep_dimension && (b.projector * p - p).cwiseAbs().maxCoeff() < 1e-8) {
          e.non_real_type = true;
          out.flagged = true;
        }
      }
    }
    if (!e.irreducible && out.generic) {
      out.generic = false;
      out.witness = e.eigenvalue;
    }
    out.eigenspaces.push_back(e);
  }
  return out;
}

VectorMap equivariant_average(VectorMap f, const LinearAction& action) {
  return [f = std::move(f), action](const Eigen::VectorXd& x) {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(x.size());
    for (const auto& g : action.matrices()) s += g * f(g.transpose() * x);
    return Eigen::VectorXd(s / double(action.group().order()));
  };
}

Eigen::VectorXd CentralizerAlgebra::coordinates(const Eigen::MatrixXd& b, double* residual) const {
  const Eigen::Index n2 = base.size();
  Eigen::MatrixXd a(n2, dimension());
  for (int k = 0; k < dimension(); ++k) a.col(k) = basis[k].reshaped();
  Eigen::VectorXd rhs = b.reshaped();
  Eigen::VectorXd c = a.colPivHouseholderQr().solve(rhs);
  if (residual) *residual = (a * c - rhs).norm();
  return c;
}

Eigen::MatrixXd CentralizerAlgebra::combine(const Eigen::VectorXd& c) const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(base.rows(), base.cols());
  for (int k = 0; k < dimension(); ++k) m += c(k) * basis[k];
  return m;
}

CentralizerAlgebra centralizer_algebra(const Eigen::MatrixXd& lambda, double cluster_tol) {
  RealSplit s = real_split(lambda, cluster_tol);
  CentralizerAlgebra out;
  out.base = lambda;
  // in the eigenbasis, X commutes with the diagonal iff (d_i - d_j) X_ij = 0
  for (std::size_t c = 0; c < s.columns.size(); ++c) {
    out.eigenvalues.push_back(s.eigenvalues[c]);
    out.multiplicities.push_back(static_cast<int>(s.columns[c].size()));
    for (int i : s.columns[c])
      for (int j : s.columns[c]) {
        Eigen::MatrixXd b = s.vectors.col(i) * s.inverse.row(j);
        out.basis.push_back(b / b.norm());
      }
  }
  return out;
}

namespace {

double min_gap(const std::vector<double>& values) {
  double g = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < values.size(); ++i)
    for (std::size_t j = i + 1; j < values.size(); ++j) g = std::min(g, std::abs(values[i] - values[j]));
  return g;
}

}  // namespace

EigenbasisTrack track_eigenbasis(const std::vector<Eigen::MatrixXd>& path) {
  if (path.empty()) throw Error(ErrorKind::precondition, "empty path");
  EigenbasisTrack out;
  const Eigen::Index n = path.front().rows();

  RealSplit s0 = real_split(path.front());
  Eigen::MatrixXd frame(n, n);
  Eigen::VectorXd values(n);
  std::vector<std::vector<int>> blocks;
  int col = 0;
  for (std::size_t c = 0; c < s0.bases.size(); ++c) {
    std::vector<int> cols;
    for (Eigen::Index k = 0; k < s0.bases[c].cols(); ++k) {
      frame.col(col) = s0.bases[c].col(k);
      values(col) = s0.eigenvalues[c];
      cols.push_back(col++);
    }
    blocks.push_back(cols);
  }
  out.frames.push_back(frame);
  out.eigenvalues.push_back(values);
  std::vector<double> previous_values = s0.eigenvalues;

  for (std::size_t k = 1; k < path.size(); ++k) {
    const Eigen::MatrixXd& lam = path[k];
    RealSplit s = real_split(lam);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(lam - path[k - 1]);
    double step = svd.singularValues()(0);
    double gap = std::min(min_gap(s.eigenvalues), min_gap(previous_values));
    if (s.bases.size() != blocks.size() || !(gap > 10.0 * step)) {
      std::ostringstream msg;
      msg << "eigenvalue collision at step " << k << ": gap " << gap << ", step " << step;
      throw Error(ErrorKind::tracking, msg.str());
    }
    // greedy assignment of new eigenspaces to old blocks by overlap
    struct Pair { double overlap; int old_block, cluster; };
    std::vector<Pair> pairs;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      Eigen::MatrixXd old_cols(n, blocks[b].size());
      for (std::size_t i = 0; i < blocks[b].size(); ++i) old_cols.col(i) = frame.col(blocks[b][i]);
      for (std::size_t c = 0; c < s.bases.size(); ++c) {
        if (s.bases[c].cols() != old_cols.cols()) continue;
        double ov = (old_cols.transpose() * s.bases[c]).squaredNorm() / double(old_cols.cols());
        pairs.push_back({ov, static_cast<int>(b), static_cast<int>(c)});
      }
    }
    std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.overlap > b.overlap; });
    std::vector<int> match(blocks.size(), -1);
    std::vector<bool> taken(s.bases.size(), false);
    for (const auto& p : pairs) {
      if (match[p.old_block] >= 0 || taken[p.cluster]) continue;
      match[p.old_block] = p.cluster;
      taken[p.cluster] = true;
    }
    Eigen::MatrixXd next(n, n);
    Eigen::VectorXd next_values(n);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      if (match[b] < 0) throw Error(ErrorKind::tracking, "eigenspace multiplicities changed along the path");
      const Eigen::MatrixXd& basis = s.bases[match[b]];
      Eigen::MatrixXd old_cols(n, blocks[b].size());
      for (std::size_t i = 0; i < blocks[b].size(); ++i) old_cols.col(i) = frame.col(blocks[b][i]);
      // closest orthonormal basis of the new eigenspace to the previous columns
      Eigen::JacobiSVD<Eigen::MatrixXd> align(basis.transpose() * old_cols,
                                              Eigen::ComputeFullU | Eigen::ComputeFullV);
      Eigen::MatrixXd cols = basis * align.matrixU() * align.matrixV().transpose();
      for (std::size_t i = 0; i < blocks[b].size(); ++i) {
        next.col(blocks[b][i]) = cols.col(i);
        next_values(blocks[b][i]) = s.eigenvalues[match[b]];
      }
    }
    Eigen::MatrixXd conj = next * frame.inverse();
    Eigen::MatrixXd conj_inv = conj.inverse();
    CentralizerAlgebra z = centralizer_algebra(path[k - 1]);
    double res = 0.0, lam_scale = std::max(1.0, lam.norm());
    for (const auto& b : z.basis) {
      Eigen::MatrixXd m = conj * b * conj_inv;
      res = std::max(res, (m * lam - lam * m).norm() / (m.norm() * lam_scale));
    }
    out.max_frame_jump = std::max(out.max_frame_jump, (next - frame).cwiseAbs().maxCoeff());
    out.conjugators.push_back(conj);
    out.conjugation_residuals.push_back(res);
    frame = next;
    out.frames.push_back(frame);
    out.eigenvalues.push_back(next_values);
    previous_values = s.eigenvalues;
  }
  return out;
}

EigenbasisTrack track_eigenbasis(const std::vector<Eigen::MatrixXd>& path, const LinearAction& action) {
  for (std::size_t k = 0; k < path.size(); ++k) {
    double defect = action.equivariance_defect(path[k]);
    if (defect > 1e-10 * std::max(1.0, path[k].norm())) {
      std::ostringstream msg;
      msg << "path entry " << k << " does not commute with the action (defect " << defect << ")";
      throw Error(ErrorKind::equivariance, msg.str());
    }
  }
  return track_eigenbasis(path);
}

PointAction linear_point_action(const LinearAction& action) {
  return PointAction{
      action.group(),
      [action](int g, const Eigen::VectorXd& x) { return Eigen::VectorXd(action.matrix(g) * x); },
      [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return (a - b).norm(); }};
}

std::vector<int> stabilizer(const PointAction& action, const Eigen::VectorXd& x, double tol) {
  std::vector<int> out;
  for (int g = 0; g < action.group.order(); ++g)
    if (action.distance(action.apply(g, x), x) <= tol) out.push_back(g);
  if (!action.group.is_subgroup(out)) {
    throw Error(ErrorKind::precondition, "stabilizer is not closed; tolerance too loose for this action");
  }
  return out;
}

std::vector<Eigen::VectorXd> orbit(const PointAction& action, const Eigen::VectorXd& x, double tol) {
  std::vector<Eigen::VectorXd> out;
  for (int g = 0; g < action.group.order(); ++g) {
    Eigen::VectorXd y = action.apply(g, x);
    bool seen = false;
    for (const auto& z : out) seen = seen || action.distance(y, z) <= tol;
    if (!seen) out.push_back(y);
  }
  return out;
}

}  // namespace eqgrad
