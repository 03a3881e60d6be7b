#pragma once

#include <Eigen/Dense>
#include <complex>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace eqgrad {

enum class IrrepType { real, complex, quaternionic };
std::string to_string(IrrepType t);

// Complex irreducible characters, one row per irreducible, one column per class.
struct CharacterTable {
  std::vector<std::vector<std::complex<double>>> values;
  std::vector<int> degrees;
  std::vector<int> indicators;  // Frobenius-Schur: 1, 0, -1
  std::vector<std::string> labels;

  int size() const { return static_cast<int>(degrees.size()); }
  IrrepType type(int i) const;
};

class FiniteGroup {
 public:
  // table[a][b] = index of a*b; validated as a group
  explicit FiniteGroup(std::vector<std::vector<int>> table, std::string name = "table");

  static FiniteGroup trivial();
  static FiniteGroup cyclic(int k);
  // order 2k; index i is r^i, index k + i is s r^i
  static FiniteGroup dihedral(int k);
  static FiniteGroup product(const FiniteGroup& a, const FiniteGroup& b);

  int order() const { return static_cast<int>(table_.size()); }
  int identity() const { return identity_; }
  int multiply(int a, int b) const { return table_[a][b]; }
  int inverse(int a) const { return inverse_[a]; }
  int element_order(int a) const;
  const std::vector<std::vector<int>>& table() const { return table_; }
  const std::string& name() const { return name_; }

  // classes()[0] is the class of the identity
  const std::vector<std::vector<int>>& classes() const { return classes_; }
  int class_of(int a) const { return class_of_[a]; }
  const CharacterTable& characters() const { return characters_; }

  bool is_subgroup(const std::vector<int>& elements) const;
  // element i of the result is elements[i]
  FiniteGroup subgroup(const std::vector<int>& elements) const;

 private:
  FiniteGroup(std::vector<std::vector<int>> table, std::string name, bool closed_form);
  void finish(bool closed_form);

  std::vector<std::vector<int>> table_;
  std::string name_;
  int identity_ = 0;
  std::vector<int> inverse_;
  std::vector<std::vector<int>> classes_;
  std::vector<int> class_of_;
  CharacterTable characters_;
};

// Dixon-style character table from the class-sum algebra; any group of order <= 64.
CharacterTable class_algebra_characters(const FiniteGroup& g);

class LinearAction {
 public:
  LinearAction(FiniteGroup group, std::vector<Eigen::MatrixXd> matrices);

  static LinearAction trivial(int n);
  static LinearAction generated(const std::vector<Eigen::MatrixXd>& generators,
                                const std::string& name = "generated");
  static LinearAction rotations(int k);  // Z/k on R^2
  static LinearAction dihedral(int k);   // D_k on R^2
  static LinearAction swap();            // Z/2 exchanging the coordinates of R^2
  static LinearAction negation(int n);   // Z/2 acting by -Id

  const FiniteGroup& group() const { return group_; }
  int dimension() const { return static_cast<int>(matrices_.front().rows()); }
  const Eigen::MatrixXd& matrix(int g) const { return matrices_[g]; }
  const std::vector<Eigen::MatrixXd>& matrices() const { return matrices_; }

  LinearAction restricted(const std::vector<int>& elements) const;
  // (1/|G|) sum rho(g) A rho(g)^{-1}
  Eigen::MatrixXd average(const Eigen::MatrixXd& a) const;
  // max_g |A rho(g) - rho(g) A|
  double equivariance_defect(const Eigen::MatrixXd& a) const;

 private:
  FiniteGroup group_;
  std::vector<Eigen::MatrixXd> matrices_;
};

struct IsotypicBlock {
  int irrep = 0;  // row of the character table (for complex type, the first of the pair)
  std::string label;
  IrrepType type = IrrepType::real;
  int irrep_dimension = 1;  // real dimension of the real irreducible
  int multiplicity = 0;
  Eigen::MatrixXd basis;      // orthonormal columns
  Eigen::MatrixXd projector;  // real isotypic projector
};

struct IsotypicDecomposition {
  std::vector<IsotypicBlock> blocks;
  int dimension = 0;
};

IsotypicDecomposition decompose(const LinearAction& action);

// (1/|G|) sum |tr(P rho(g))|^2 for a projector P onto an invariant subspace
double character_norm(const LinearAction& action, const Eigen::MatrixXcd& projector);

struct EigenspaceCheck {
  std::complex<double> eigenvalue;
  int dimension = 0;
  double character_norm = 0.0;
  bool irreducible = false;
  // irreducible over R but of complex or quaternionic type, so reducible after complexifying
  bool non_real_type = false;
};

struct GenericAutomorphismReport {
  bool generic = true;
  std::optional<std::complex<double>> witness;
  std::vector<EigenspaceCheck> eigenspaces;
  bool flagged = false;
};

// Every eigenspace of lambda must be an irreducible G-module (character norm 1).
GenericAutomorphismReport is_generic_automorphism(const Eigen::MatrixXd& lambda,
                                                  const LinearAction& action,
                                                  double equivariance_tol = 1e-10,
                                                  double norm_tol = 1e-6);

using VectorMap = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

// x -> (1/|G|) sum g F(g^{-1} x)
VectorMap equivariant_average(VectorMap f, const LinearAction& action);

struct CentralizerAlgebra {
  Eigen::MatrixXd base;
  std::vector<double> eigenvalues;
  std::vector<int> multiplicities;
  std::vector<Eigen::MatrixXd> basis;  // S E_ij S^{-1} within each eigenspace, unit Frobenius norm

  int dimension() const { return static_cast<int>(basis.size()); }
  // least-squares coordinates in the basis and the residual of the fit
  Eigen::VectorXd coordinates(const Eigen::MatrixXd& b, double* residual = nullptr) const;
  Eigen::MatrixXd combine(const Eigen::VectorXd& c) const;
};

CentralizerAlgebra centralizer_algebra(const Eigen::MatrixXd& lambda, double cluster_tol = 1e-7);

struct EigenbasisTrack {
  std::vector<Eigen::MatrixXd> frames;       // columns are eigenvectors, order fixed along the path
  std::vector<Eigen::VectorXd> eigenvalues;  // aligned with the frame columns
  std::vector<Eigen::MatrixXd> conjugators;  // F_k F_{k-1}^{-1}, k >= 1
  std::vector<double> conjugation_residuals;
  double max_frame_jump = 0.0;
};

EigenbasisTrack track_eigenbasis(const std::vector<Eigen::MatrixXd>& path);
EigenbasisTrack track_eigenbasis(const std::vector<Eigen::MatrixXd>& path, const LinearAction& action);

struct PointAction {
  FiniteGroup group;
  std::function<Eigen::VectorXd(int, const Eigen::VectorXd&)> apply;
  std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&)> distance;
};

PointAction linear_point_action(const LinearAction& action);

std::vector<int> stabilizer(const PointAction& action, const Eigen::VectorXd& x, double tol = 1e-9);
std::vector<Eigen::VectorXd> orbit(const PointAction& action, const Eigen::VectorXd& x,
                                   double tol = 1e-9);

}  // namespace eqgrad
