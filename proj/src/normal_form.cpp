#include "eqgrad/normal_form.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>
#include <unsupported/Eigen/MatrixFunctions>

#include "eqgrad/linalg.hpp"
#include "eqgrad/spectra.hpp"

namespace eqgrad {

namespace {

using cplx = std::complex<double>;

void check_degree(int degree) {
  if (degree < 1 || degree > max_jet_degree) {
    std::ostringstream msg;
    msg << "jet degree " << degree << " outside 1.." << max_jet_degree;
    throw Error(ErrorKind::precondition, msg.str());
  }
}

std::vector<Eigen::VectorXd> ball_sample(int n, double radius) {
  std::vector<Eigen::VectorXd> dirs;
  if (n == 1) {
    dirs.push_back(Eigen::VectorXd::Constant(1, 1.0));
    dirs.push_back(Eigen::VectorXd::Constant(1, -1.0));
  } else if (n == 2) {
    for (int k = 0; k < 96; ++k) {
      double a = 2.0 * std::numbers::pi * k / 96.0;
      dirs.push_back(Eigen::Vector2d(std::cos(a), std::sin(a)));
    }
  } else {
    const int m = 300;
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int k = 0; k < m; ++k) {
      double z = 1.0 - 2.0 * (k + 0.5) / m;
      double r = std::sqrt(1.0 - z * z);
      dirs.push_back(Eigen::Vector3d(r * std::cos(golden * k), r * std::sin(golden * k), z));
    }
  }
  std::vector<Eigen::VectorXd> pts;
  for (double s : {1.0, 0.75, 0.5}) {
    for (const auto& d : dirs) pts.push_back(s * radius * d);
  }
  return pts;
}

// Poincare domain: real parts of one sign, here negative
void check_sink(const Eigen::VectorXcd& ev) {
  for (int i = 0; i < ev.size(); ++i) {
    if (!(ev(i).real() < 0.0)) {
      throw Error(ErrorKind::sign, "linear part must have all eigenvalues with negative real part");
    }
  }
}

}  // namespace

PolyMap<double> homological_residual(const ConjugacySeries& phi, const PolyVectorField& x,
                                     const Eigen::MatrixXd& linear) {
  PolyMap<double> xx = x.degree() == phi.degree() ? x : x.with_degree(phi.degree());
  return phi.apply_derivative(xx) - phi.left_multiply(linear);
}

Eigen::VectorXd conjugation_residual(const ConjugacySeries& phi, const PolyVectorField& x,
                                     const Eigen::MatrixXd& linear, const Eigen::VectorXd& p) {
  return phi.jacobian(p) * x(p) - linear * phi(p);
}

double disk_residual(const ConjugacySeries& phi, const PolyVectorField& x, const Eigen::MatrixXd& linear,
                     double radius) {
  double sup = 0.0;
  for (const auto& p : ball_sample(phi.dimension(), radius)) {
    sup = std::max(sup, conjugation_residual(phi, x, linear, p).norm());
  }
  return sup;
}

Linearization poincare_linearize(const PolyVectorField& x, int degree, double test_radius) {
  check_degree(degree);
  const int n = x.dimension();
  Eigen::MatrixXd lin = x.linear_part();
  if (x.degree_norm(0) != 0.0) throw Error(ErrorKind::precondition, "vector field must vanish at the origin");

  SpectralSplit split = spectral_split(lin);
  Eigen::VectorXcd lambda(n);
  for (const auto& c : split.clusters) {
    for (int col : c.columns) lambda(col) = c.eigenvalue;
  }
  check_sink(lambda);

  bool real_spectrum = true;
  double lmax = 0.0;
  for (int i = 0; i < n; ++i) {
    real_spectrum = real_spectrum && lambda(i).imag() == 0.0;
    lmax = std::max(lmax, std::abs(lambda(i)));
  }
  if (real_spectrum) {
    std::vector<double> vals(n);
    for (int i = 0; i < n; ++i) vals[i] = lambda(i).real();
    ResonanceReport r = check_nonresonant(EigenSpectrum(vals), resonance_guard / lmax, degree);
    if (r.resonant) {
      const auto& w = *r.witness;
      cplx den = -lambda(w.index);
      for (int j = 0; j < n; ++j) den += double(w.alpha[j]) * lambda(j);
      throw ResonanceError(w.index, w.alpha, std::abs(den));
    }
  }

  // field in eigen coordinates x = S y
  PolyMap<cplx> xc = x.with_degree(degree).cast<cplx>();
  PolyMap<cplx> y = xc.compose_linear(split.vectors).left_multiply(split.inverse);
  PolyMap<cplx> f = y - PolyMap<cplx>::linear(lambda.asDiagonal().toDenseMatrix(), degree);
  for (int j = 0; j < n; ++j) {
    Exponent e{0, 0, 0};
    e[j] = 1;
    f.set(j, e, cplx(0.0));
  }

  const MonomialBasis& basis = f.basis();
  PolyMap<cplx> h(n, degree);
  HomologicalReport report;
  report.test_radius = test_radius;
  for (int k = 2; k <= degree; ++k) {
    // (<alpha, lambda> - lambda_i) h_alpha,i = -[f + Dh f]_alpha,i ; Dh f only sees degrees < k of h
    PolyMap<cplx> rhs = f + h.apply_derivative(f);
    double min_den = std::numeric_limits<double>::infinity();
    for (int m = basis.offset(k); m < basis.offset(k + 1); ++m) {
      const Exponent& a = basis.exponent(m);
      cplx dot = 0.0;
      for (int j = 0; j < n; ++j) dot += double(a[j]) * lambda(j);
      for (int i = 0; i < n; ++i) {
        cplx den = dot - lambda(i);
        min_den = std::min(min_den, std::abs(den));
        if (std::abs(den) < resonance_guard) {
          throw ResonanceError(i, std::vector<int>(a.begin(), a.begin() + n), std::abs(den));
        }
        h.coefficients()(i, m) = -rhs.coefficients()(i, m) / den;
      }
    }
    report.min_denominator.push_back(min_den);
  }

  // back to x: phi(x) = S psi(S^{-1} x)
  PolyMap<cplx> psi = PolyMap<cplx>::identity(n, degree) + h;
  PolyMap<cplx> phic = psi.compose_linear(split.inverse).left_multiply(split.vectors);
  double imag = phic.coefficients().imag().cwiseAbs().maxCoeff();
  double scale = std::max(1.0, phic.coefficients().real().cwiseAbs().maxCoeff());
  if (imag > 1e-8 * scale) {
    std::ostringstream msg;
    msg << "conjugator has imaginary part " << imag << " after real recombination";
    throw Error(ErrorKind::decomposition, msg.str());
  }
  Linearization out{PolyMap<double>(n, degree), lin, report};
  out.phi.coefficients() = phic.coefficients().real();
  // exact identity in degree one
  for (int j = 0; j < n; ++j) {
    Exponent e{0, 0, 0};
    e[j] = 1;
    for (int i = 0; i < n; ++i) out.phi.set(i, e, i == j ? 1.0 : 0.0);
  }

  PolyMap<double> res = homological_residual(out.phi, x, lin);
  for (int d = 0; d <= degree; ++d) out.report.degree_residual.push_back(res.degree_norm(d));
  out.report.disk_residual = disk_residual(out.phi, x, lin, test_radius);
  return out;
}

PolyMap<double> average_polynomial(const PolyMap<double>& p, const LinearAction& action) {
  if (action.dimension() != p.dimension()) {
    throw Error(ErrorKind::precondition, "action and polynomial map have different dimensions");
  }
  PolyMap<double> sum(p.dimension(), p.degree());
  for (const auto& g : action.matrices()) {
    sum = sum + p.compose_linear(g.transpose()).left_multiply(g);
  }
  return sum * (1.0 / static_cast<double>(action.matrices().size()));
}

double polynomial_equivariance_defect(const PolyMap<double>& p, const LinearAction& action) {
  double d = 0.0;
  for (const auto& g : action.matrices()) {
    PolyMap<double> q = p.compose_linear(g.transpose()).left_multiply(g) - p;
    d = std::max(d, q.coefficient_norm());
  }
  return d;
}

Linearization equivariant_linearize(const PolyVectorField& x, const LinearAction& action, int degree,
                                    double test_radius) {
  double defect = polynomial_equivariance_defect(x, action);
  if (defect > 1e-10) {
    std::ostringstream msg;
    msg << "vector field is not equivariant (defect " << defect << ")";
    throw Error(ErrorKind::equivariance, msg.str());
  }
  Linearization out = poincare_linearize(x, degree, test_radius);
  out.phi = average_polynomial(out.phi, action);
  PolyMap<double> res = homological_residual(out.phi, x, out.linear);
  for (int d = 0; d <= degree; ++d) out.report.degree_residual[d] = res.degree_norm(d);
  out.report.disk_residual = disk_residual(out.phi, x, out.linear, test_radius);
  return out;
}

JetNorm jet_norm(const PolyMap<double>& x, double radius, int r) {
  const int n = x.dimension();
  if (n > 3) throw Error(ErrorKind::unsupported_dimension, "jet norms are sampled for n <= 3 only");
  if (r < 0) throw Error(ErrorKind::precondition, "derivative order must be nonnegative");

  // every partial derivative of order <= r, as polynomial maps
  std::vector<PolyMap<double>> parts{x};
  std::vector<PolyMap<double>> frontier{x};
  std::vector<Exponent> front_idx{{0, 0, 0}};
  for (int k = 1; k <= r; ++k) {
    std::vector<PolyMap<double>> next;
    std::vector<Exponent> next_idx;
    for (std::size_t f = 0; f < frontier.size(); ++f) {
      // differentiate only in variables >= the last one used, so each multi-index appears once
      int start = 0;
      for (int j = 0; j < n; ++j)
        if (front_idx[f][j] > 0) start = j;
      for (int j = start; j < n; ++j) {
        Exponent e = front_idx[f];
        e[j] += 1;
        next.push_back(frontier[f].derivative(j));
        next_idx.push_back(e);
      }
    }
    parts.insert(parts.end(), next.begin(), next.end());
    frontier = std::move(next);
    front_idx = std::move(next_idx);
  }

  auto sup_on_grid = [&](int m) {
    double sup = 0.0;
    const int total = static_cast<int>(std::pow(m, n));
    Eigen::VectorXd p(n);
    for (int idx = 0; idx < total; ++idx) {
      int rem = idx;
      for (int j = 0; j < n; ++j) {
        p(j) = -radius + 2.0 * radius * (rem % m) / (m - 1);
        rem /= m;
      }
      if (p.norm() > radius * (1.0 + 1e-12)) continue;
      double s = 0.0;
      for (const auto& q : parts) s += q(p).norm();
      sup = std::max(sup, s);
    }
    return sup;
  };

  JetNorm out;
  out.value = sup_on_grid(out.grid);
  const int max_grid = n == 3 ? 81 : 161;
  while (out.grid * 2 - 1 <= max_grid) {
    int m = out.grid * 2 - 1;
    double v = sup_on_grid(m);
    out.last_change = out.value > 0.0 ? std::abs(v - out.value) / out.value : std::abs(v - out.value);
    out.value = std::max(v, out.value);
    out.grid = m;
    if (out.last_change < 0.01) break;
  }
  return out;
}

ContinuityReport family_continuity(const std::function<PolyVectorField(double)>& family, double s0, double s1,
                                   int degree, int steps) {
  if (steps < 1) throw Error(ErrorKind::precondition, "family continuity needs at least one step");
  auto sweep = [&](int m, std::vector<double>* params, std::vector<ConjugacySeries>* out) {
    double jump = 0.0;
    std::optional<ConjugacySeries> prev;
    for (int k = 0; k <= m; ++k) {
      double s = s0 + (s1 - s0) * k / m;
      Linearization lin = [&] {
        try {
          return poincare_linearize(family(s), degree);
        } catch (const ResonanceError& e) {
          throw e.at_parameter(s);
        }
      }();
      if (prev) jump = std::max(jump, (lin.phi - *prev).coefficient_norm());
      if (params) params->push_back(s);
      if (out) out->push_back(lin.phi);
      prev = lin.phi;
    }
    return jump;
  };
  ContinuityReport rep;
  rep.max_jump = sweep(steps, &rep.parameters, &rep.series);
  rep.refined_max_jump = sweep(2 * steps, nullptr, nullptr);
  rep.jump_ratio = rep.refined_max_jump > 0.0 ? rep.max_jump / rep.refined_max_jump : 0.0;
  return rep;
}

ChartExtension extend_chart_by_flow(const SmoothField<double>& x, const ConjugacySeries& phi,
                                    const Eigen::VectorXd& point, double chart_radius, double max_time) {
  const int n = static_cast<int>(x.dimension());
  Eigen::MatrixXd lin = x.jacobian(Eigen::VectorXd::Zero(n));
  check_sink(lin.eigenvalues());

  FlowOptions<double> opt;
  opt.abs_tol = 1e-13;
  opt.rel_tol = 1e-12;
  opt.max_norm = 100.0 * std::max(1.0, point.norm());
  auto advance = [&](const Eigen::VectorXd& p, double t) -> Eigen::VectorXd {
    try {
      return flow(x, p, t, opt).endpoint;
    } catch (const Error& e) {
      throw Error(ErrorKind::basin, std::string("trajectory left the search region: ") + e.what());
    }
  };

  const double dt = 0.25;
  Eigen::VectorXd y = point;
  double t = 0.0;
  while (y.norm() > chart_radius) {
    if (t >= max_time) {
      std::ostringstream msg;
      msg << "point did not reach the chart ball of radius " << chart_radius << " within time " << max_time;
      throw Error(ErrorKind::basin, msg.str());
    }
    y = advance(y, dt);
    t += dt;
  }
  ChartExtension out;
  out.time = t;
  out.value = (-t * lin).exp() * phi(y);
  Eigen::VectorXd z = advance(y, 1.0);
  out.value_later = (-(t + 1.0) * lin).exp() * phi(z);
  out.discrepancy = (out.value - out.value_later).norm();
  return out;
}

}  // namespace eqgrad
