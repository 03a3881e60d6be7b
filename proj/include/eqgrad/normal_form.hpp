#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "eqgrad/group.hpp"
#include "eqgrad/ode.hpp"
#include "eqgrad/poly.hpp"

namespace eqgrad {

using PolyVectorField = PolyMap<double>;
// conjugating map y = phi(x) with phi'(0) = Id and Dphi X = L phi up to the truncation degree
using ConjugacySeries = PolyMap<double>;

constexpr double resonance_guard = 1e-8;
constexpr int max_jet_degree = 12;

struct HomologicalReport {
  std::vector<double> min_denominator;   // entry k - 2 for degree k = 2..N
  std::vector<double> degree_residual;   // coefficient norm of Dphi X - L phi, degrees 0..N
  double test_radius = 0.1;
  double disk_residual = 0.0;            // sup on the test disk
};

struct Linearization {
  ConjugacySeries phi;
  Eigen::MatrixXd linear;
  HomologicalReport report;
};

Linearization poincare_linearize(const PolyVectorField& x, int degree = 8, double test_radius = 0.1);

// Dphi(x) X(x) - L phi(x), evaluated exactly at a point
Eigen::VectorXd conjugation_residual(const ConjugacySeries& phi, const PolyVectorField& x,
                                     const Eigen::MatrixXd& linear, const Eigen::VectorXd& p);
// sup of the residual over a deterministic sample of the closed ball of radius r
double disk_residual(const ConjugacySeries& phi, const PolyVectorField& x, const Eigen::MatrixXd& linear,
                     double radius);
// coefficients of Dphi X - L phi through the degree of phi
PolyMap<double> homological_residual(const ConjugacySeries& phi, const PolyVectorField& x,
                                     const Eigen::MatrixXd& linear);

// (1/|G|) sum g P(g^{-1} x) on coefficients
PolyMap<double> average_polynomial(const PolyMap<double>& p, const LinearAction& action);
double polynomial_equivariance_defect(const PolyMap<double>& p, const LinearAction& action);

Linearization equivariant_linearize(const PolyVectorField& x, const LinearAction& action, int degree = 8,
                                    double test_radius = 0.1);

struct JetNorm {
  double value = 0.0;
  int grid = 41;  // points per axis at the accepted level
  double last_change = 0.0;
};

// sup over |x| <= radius of the summed norms of all partial derivatives of order <= r
JetNorm jet_norm(const PolyMap<double>& x, double radius, int r);

struct ContinuityReport {
  std::vector<double> parameters;
  std::vector<ConjugacySeries> series;
  double max_jump = 0.0;          // adjacent steps, coefficient norm
  double refined_max_jump = 0.0;  // with twice as many steps
  double jump_ratio = 0.0;        // max_jump / refined_max_jump
};

ContinuityReport family_continuity(const std::function<PolyVectorField(double)>& family, double s0, double s1,
                                   int degree, int steps);

struct ChartExtension {
  Eigen::VectorXd value;
  double time = 0.0;
  Eigen::VectorXd value_later;  // with time + 1
  double discrepancy = 0.0;
};

// h(x) = e^{-TL} phi(Phi_T(x)) with Phi_T(x) inside the chart ball
ChartExtension extend_chart_by_flow(const SmoothField<double>& x, const ConjugacySeries& phi,
                                    const Eigen::VectorXd& point, double chart_radius = 0.05,
                                    double max_time = 200.0);

}  // namespace eqgrad
