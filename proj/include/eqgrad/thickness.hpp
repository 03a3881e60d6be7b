#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "eqgrad/group.hpp"

namespace eqgrad {

// V = V_1 + ... + V_k for a real-diagonalizable X, eigenvalues increasing
class EigenSplit {
 public:
  static EigenSplit of(const Eigen::MatrixXd& x, double cluster_tol = 1e-7);

  int dimension() const { return n_; }
  int count() const { return static_cast<int>(eigenvalues_.size()); }
  double eigenvalue(int j) const { return eigenvalues_[j]; }
  int eigenspace_dimension(int j) const { return static_cast<int>(bases_[j].cols()); }
  const Eigen::MatrixXd& projection(int j) const { return projections_[j]; }
  const Eigen::MatrixXd& basis(int j) const { return bases_[j]; }  // orthonormal columns
  const Eigen::MatrixXd& generator() const { return x_; }
  Eigen::MatrixXd flow(double t) const;  // e^{tX}
  // max defect of idempotence, commutation and completeness of the projections
  double projection_defect() const;

 private:
  int n_ = 0;
  Eigen::MatrixXd x_;
  std::vector<double> eigenvalues_;
  std::vector<Eigen::MatrixXd> projections_;
  std::vector<Eigen::MatrixXd> bases_;
};

int r_dimension(int n);

struct ThickReport {
  bool thick = true;
  std::optional<int> failing_space;
  std::vector<int> failing_subset;  // 0-based; empty when the count s <= d_j fails
  double margin = 1.0;              // min |det| / product of norms over all subsets checked
};

// the vectors are thick when every projection family pi_j(v_1..v_s) has s > d_j and all
// d_j-subsets independent
ThickReport is_thick(const std::vector<Eigen::VectorXd>& vectors, const EigenSplit& split, double tol = 1e-8);

struct FlowFormCheck {
  bool constraint_satisfied = false;
  double constraint_residual = 0.0;  // max_j min_t |g v_j - e^{tX} v_j| / |v_j|
  std::vector<double> times;         // per-vector t_j
  double t = 0.0;                    // best single flow time
  double distance = 0.0;             // |g - e^{tX}| (operator norm)
  bool violation = false;            // constraint holds but g is not of flow form
};

FlowFormCheck thick_free_check(const std::vector<Eigen::VectorXd>& tuple, const Eigen::MatrixXd& g,
                               const EigenSplit& split, double tol = 1e-8);

struct ThickFreeVerdict {
  int trials = 0;
  int satisfied = 0;    // constraint solved to tolerance
  int unresolved = 0;   // solver did not reach the constraint
  int violations = 0;
  double max_distance = 0.0;
  std::optional<Eigen::MatrixXd> counterexample;
};

// Samples g in Z(X) subject to g v_j = e^{t_j X} v_j (least squares in the
// centralizer coordinates and the t_j) and checks g = e^{tX}.
ThickFreeVerdict thick_free_oracle(const std::vector<Eigen::VectorXd>& tuple, const CentralizerAlgebra& z,
                                   const EigenSplit& split, int trials, std::uint64_t seed = 0);

bool f_membership(const std::vector<Eigen::VectorXd>& tuple, const EigenSplit& split, double tol = 1e-8);

struct OrbitRank {
  int rank = 0;
  int centralizer_dimension = 0;
  bool expected = false;  // rank == dim Z - 1
  Eigen::VectorXd singular_values;
};

// rank of sigma -> (sigma v_i mod span(X v_i))_i on Lie Z(X)
OrbitRank orbit_map_rank(const std::vector<Eigen::VectorXd>& tuple, const CentralizerAlgebra& z,
                         const Eigen::MatrixXd& x, double rel_tol = 1e-8);

}  // namespace eqgrad
