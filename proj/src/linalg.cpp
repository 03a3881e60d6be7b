#include "eqgrad/linalg.hpp"

#include <algorithm>
#include <sstream>

#include "eqgrad/errors.hpp"

namespace eqgrad {

SpectralSplit spectral_split(const Eigen::MatrixXd& a, double cluster_tol) {
  const Eigen::Index n = a.rows();
  Eigen::EigenSolver<Eigen::MatrixXd> es(a);
  if (es.info() != Eigen::Success) {
    throw Error(ErrorKind::defective_matrix, "eigen decomposition did not converge");
  }
  SpectralSplit out;
  out.vectors = es.eigenvectors();
  Eigen::VectorXcd values = es.eigenvalues();
  for (Eigen::Index j = 0; j < n; ++j) out.vectors.col(j).normalize();
  Eigen::JacobiSVD<ComplexMatrix> svd(out.vectors);
  double smin = svd.singularValues()(n - 1), smax = svd.singularValues()(0);
  out.condition = smin > 0 ? smax / smin : std::numeric_limits<double>::infinity();
  if (!(out.condition < 1e10)) {
    std::ostringstream msg;
    msg << "eigenvector matrix has condition number " << out.condition;
    throw Error(ErrorKind::defective_matrix, msg.str());
  }
  out.inverse = out.vectors.inverse();

  double scale = std::max(1.0, a.norm());
  std::vector<bool> used(n, false);
  for (Eigen::Index j = 0; j < n; ++j) {
    if (used[j]) continue;
    SpectralCluster c;
    for (Eigen::Index k = j; k < n; ++k) {
      if (!used[k] && std::abs(values(k) - values(j)) <= cluster_tol * scale) {
        used[k] = true;
        c.columns.push_back(static_cast<int>(k));
      }
    }
    std::complex<double> mean = 0.0;
    for (int k : c.columns) mean += values(k);
    c.multiplicity = static_cast<int>(c.columns.size());
    c.eigenvalue = mean / double(c.multiplicity);
    c.projector = ComplexMatrix::Zero(n, n);
    for (int k : c.columns) c.projector += out.vectors.col(k) * out.inverse.row(k);
    out.clusters.push_back(std::move(c));
  }
  return out;
}

RealSplit real_split(const Eigen::MatrixXd& a, double cluster_tol) {
  const Eigen::Index n = a.rows();
  SpectralSplit s = spectral_split(a, cluster_tol);
  double scale = std::max(1.0, a.norm());
  for (const auto& c : s.clusters) {
    if (std::abs(c.eigenvalue.imag()) > cluster_tol * scale) {
      std::ostringstream msg;
      msg << "complex eigenvalue " << c.eigenvalue.real() << " + " << c.eigenvalue.imag()
          << "i; only real-diagonalizable matrices are supported";
      throw Error(ErrorKind::defective_matrix, msg.str());
    }
  }
  std::sort(s.clusters.begin(), s.clusters.end(), [](const auto& x, const auto& y) {
    return x.eigenvalue.real() < y.eigenvalue.real();
  });
  RealSplit out;
  out.vectors.resize(n, n);
  int col = 0;
  for (const auto& c : s.clusters) {
    Eigen::MatrixXd p = c.projector.real();
    // real basis of the eigenspace from the range of the real projector
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(p, Eigen::ComputeFullU);
    Eigen::MatrixXd basis = svd.matrixU().leftCols(c.multiplicity);
    std::vector<int> cols;
    for (int k = 0; k < c.multiplicity; ++k) {
      out.vectors.col(col) = basis.col(k);
      cols.push_back(col++);
    }
    out.eigenvalues.push_back(c.eigenvalue.real());
    out.columns.push_back(cols);
    out.projectors.push_back(p);
    out.bases.push_back(basis);
  }
  out.inverse = out.vectors.inverse();
  return out;
}

Eigen::MatrixXd orthogonal_complement(const Eigen::VectorXd& v) {
  const Eigen::Index n = v.size();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(v);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
  return q.rightCols(n - 1);
}

Eigen::MatrixXd sqrt_spd(const Eigen::MatrixXd& g) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
  if (es.eigenvalues().minCoeff() <= 0.0) {
    throw Error(ErrorKind::metric, "metric matrix is not positive definite");
  }
  return es.operatorSqrt();
}

double metric_operator_norm(const Eigen::MatrixXd& m, const Eigen::MatrixXd& g) {
  Eigen::MatrixXd r = sqrt_spd(g);
  Eigen::MatrixXd conj = r * m * r.inverse();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(conj);
  return svd.singularValues()(0);
}

}  // namespace eqgrad
