#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace eqgrad {

enum class ErrorKind {
  divergence,
  stiffness,
  singular_integrand,
  degeneracy,
  resolution,
  chart_overlap,
  chart_too_small,
  not_diffeomorphism,
  metric,
  invariance,
  decomposition,
  equivariance,
  defective_matrix,
  tracking,
  sign,
  precondition,
  resonance,
  unsupported_dimension,
  membership,
  basin,
  transfer,
  window,
  support,
  morse,
  domain,
  arity,
  schema,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what);
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Carries the offending equation: lambda_i against <alpha, lambda>, and the
// family parameter when raised from a continuation.
class ResonanceError : public Error {
 public:
  ResonanceError(int index, std::vector<int> alpha, double denominator,
                 std::optional<double> parameter = {});

  int index() const noexcept { return index_; }
  const std::vector<int>& alpha() const noexcept { return alpha_; }
  double denominator() const noexcept { return denominator_; }
  const std::optional<double>& parameter() const noexcept { return parameter_; }
  ResonanceError at_parameter(double s) const;

 private:
  int index_;
  std::vector<int> alpha_;
  double denominator_;
  std::optional<double> parameter_;
};

}  // namespace eqgrad
