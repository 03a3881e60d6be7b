#include "eqgrad/errors.hpp"

#include <sstream>

namespace eqgrad {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::divergence: return "divergence";
    case ErrorKind::stiffness: return "stiffness";
    case ErrorKind::singular_integrand: return "singular-integrand";
    case ErrorKind::degeneracy: return "degeneracy";
    case ErrorKind::resolution: return "resolution";
    case ErrorKind::chart_overlap: return "chart-overlap";
    case ErrorKind::chart_too_small: return "chart-too-small";
    case ErrorKind::not_diffeomorphism: return "not-a-diffeomorphism";
    case ErrorKind::metric: return "metric";
    case ErrorKind::invariance: return "invariance";
    case ErrorKind::decomposition: return "decomposition";
    case ErrorKind::equivariance: return "equivariance";
    case ErrorKind::defective_matrix: return "defective-matrix";
    case ErrorKind::tracking: return "tracking";
    case ErrorKind::sign: return "sign";
    case ErrorKind::precondition: return "precondition";
    case ErrorKind::resonance: return "resonance";
    case ErrorKind::unsupported_dimension: return "unsupported-dimension";
    case ErrorKind::membership: return "membership";
    case ErrorKind::basin: return "basin";
    case ErrorKind::transfer: return "transfer";
    case ErrorKind::window: return "window";
    case ErrorKind::support: return "support";
    case ErrorKind::morse: return "morse";
    case ErrorKind::domain: return "domain";
    case ErrorKind::arity: return "arity";
    case ErrorKind::schema: return "schema";
  }
  return "unknown";
}

Error::Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + " error: " + what), kind_(kind) {}

namespace {

std::string describe_resonance(int index, const std::vector<int>& alpha, double denominator,
                               const std::optional<double>& parameter) {
  std::ostringstream out;
  out << "lambda_" << index << " resonates with alpha = (";
  for (std::size_t j = 0; j < alpha.size(); ++j) out << (j ? ", " : "") << alpha[j];
  out << "), denominator " << denominator;
  if (parameter) out << " at s = " << *parameter;
  return out.str();
}

}  // namespace

ResonanceError::ResonanceError(int index, std::vector<int> alpha, double denominator,
                               std::optional<double> parameter)
    : Error(ErrorKind::resonance, describe_resonance(index, alpha, denominator, parameter)),
      index_(index),
      alpha_(std::move(alpha)),
      denominator_(denominator),
      parameter_(parameter) {}

ResonanceError ResonanceError::at_parameter(double s) const {
  return ResonanceError(index_, alpha_, denominator_, s);
}

}  // namespace eqgrad
