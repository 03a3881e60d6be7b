#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

namespace eqgrad {

using ComplexMatrix = Eigen::MatrixXcd;

// One cluster of numerically equal eigenvalues of a diagonalizable matrix.
struct SpectralCluster {
  std::complex<double> eigenvalue;
  int multiplicity = 0;
  std::vector<int> columns;  // columns of the eigenvector matrix in this cluster
  ComplexMatrix projector;   // spectral projector, commutes with the matrix
};

struct SpectralSplit {
  ComplexMatrix vectors;  // S with A = S D S^{-1}
  ComplexMatrix inverse;
  std::vector<SpectralCluster> clusters;
  double condition = 1.0;
};

// Eigenvalues closer than cluster_tol * max(1, |A|) are merged; raises a
// defective-matrix error when the eigenvector matrix is singular.
SpectralSplit spectral_split(const Eigen::MatrixXd& a, double cluster_tol = 1e-7);

// Real spectrum required; clusters sorted by eigenvalue.
struct RealSplit {
  Eigen::MatrixXd vectors;
  Eigen::MatrixXd inverse;
  std::vector<double> eigenvalues;             // per cluster
  std::vector<std::vector<int>> columns;       // per cluster
  std::vector<Eigen::MatrixXd> projectors;     // per cluster
  std::vector<Eigen::MatrixXd> bases;          // orthonormal basis of each eigenspace
};

RealSplit real_split(const Eigen::MatrixXd& a, double cluster_tol = 1e-7);

// Orthonormal basis of the complement of span(v).
Eigen::MatrixXd orthogonal_complement(const Eigen::VectorXd& v);

// Spectral norm of G^{1/2} M G^{-1/2}.
double metric_operator_norm(const Eigen::MatrixXd& m, const Eigen::MatrixXd& g);

Eigen::MatrixXd sqrt_spd(const Eigen::MatrixXd& g);

}  // namespace eqgrad
