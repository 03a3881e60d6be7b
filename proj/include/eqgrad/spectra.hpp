#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "eqgrad/group.hpp"

namespace eqgrad {

// Real spectrum of a gradient linearization; no zero eigenvalue.
class EigenSpectrum {
 public:
  explicit EigenSpectrum(std::vector<double> eigenvalues);
  // eigenvalues of a real-diagonalizable matrix; complex pairs are rejected
  static EigenSpectrum of(const Eigen::MatrixXd& linearization);

  // in the given order; of() orders by increasing modulus
  const std::vector<double>& eigenvalues() const { return values_; }
  int size() const { return static_cast<int>(values_.size()); }
  bool sink() const;
  bool source() const;
  // clusters within tol: (value, multiplicity)
  std::vector<std::pair<double, int>> multiplicities(double tol = 1e-8) const;

 private:
  std::vector<double> values_;
};

struct ResonanceWitness {
  int index = 0;  // position in the spectrum
  std::vector<int> alpha;
};

struct ResonanceReport {
  bool resonant = false;
  std::optional<ResonanceWitness> witness;
  int search_bound = 0;  // largest |alpha| examined
  double margin = 0.0;   // min |lambda_i - <alpha, lambda>| over the search, relative to max |lambda|
  bool exact = false;    // integer arithmetic was used
};

// One-sign spectra only. Resonances of order above floor(max|l| / min|l|) are
// impossible: |<alpha, lambda>| >= |alpha| min|l| > max|l|. max_order caps the
// search further (jets truncated at that degree).
ResonanceReport check_nonresonant(const EigenSpectrum& spectrum, double tol = 1e-9,
                                  std::optional<int> max_order = {});

// G^{-1} H at a critical point of f for the metric G(p)
Eigen::MatrixXd linearization_from_hessian(const Eigen::MatrixXd& hessian, const Eigen::MatrixXd& metric);

Eigen::MatrixXd hessian_gradient_linearization(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& gradient,
    const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& hessian,
    const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& metric, const Eigen::VectorXd& p,
    double critical_tol = 1e-9);

// Spectrum through the symmetric problem G^{-1/2} H G^{-1/2}.
EigenSpectrum gradient_spectrum(const Eigen::MatrixXd& hessian, const Eigen::MatrixXd& metric);

struct SpectrumEntry {
  std::string label;
  EigenSpectrum spectrum;
  int orbit = 0;
};

struct C2Verdict {
  bool holds = true;
  std::optional<std::pair<int, int>> witness;
  std::string reason;
  double separation = 0.0;  // smallest spectral distance between different orbits
};

C2Verdict check_C2(const std::vector<SpectrumEntry>& entries, double tol = 1e-6);

struct C3Entry {
  std::string label;
  Eigen::MatrixXd linearization;
  LinearAction stabilizer_action;
};

struct C3Verdict {
  bool holds = true;
  std::optional<std::pair<int, std::complex<double>>> witness;  // entry, eigenvalue
  std::vector<GenericAutomorphismReport> reports;
};

C3Verdict check_C3(const std::vector<C3Entry>& entries);

struct GenericityReport {
  bool c1 = true;
  std::vector<ResonanceReport> resonance;
  C2Verdict c2;
  C3Verdict c3;
  bool overall = true;
};

struct ExtremumData {
  std::string label;
  Eigen::MatrixXd linearization;
  int orbit = 0;
  LinearAction stabilizer_action;
};

GenericityReport genericity_report(const std::vector<ExtremumData>& extrema, double resonance_tol = 1e-9,
                                   double c2_tol = 1e-6);

struct SeparationVerdict {
  double k = 1.0;
  bool in_l_gk = false;
  double distance = 0.0;
  double t = 0.0;
  int gamma = 0;
  bool at_infinity = false;  // infimum approached as t -> +-infinity
  double norm = 0.0, inverse_norm = 0.0;
};

// min over t, gamma of |psi - e^{tX} gamma|_g; gammas act on T_pM.
SeparationVerdict k_separation(const Eigen::MatrixXd& psi, const Eigen::MatrixXd& x,
                               const LinearAction& stabilizer, const Eigen::MatrixXd& metric, double k);

}  // namespace eqgrad
