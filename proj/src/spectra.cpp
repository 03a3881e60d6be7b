#include "eqgrad/spectra.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <unsupported/Eigen/MatrixFunctions>

#include "eqgrad/errors.hpp"
#include "eqgrad/linalg.hpp"

namespace eqgrad {

EigenSpectrum::EigenSpectrum(std::vector<double> eigenvalues) : values_(std::move(eigenvalues)) {
  if (values_.empty()) throw Error(ErrorKind::precondition, "empty spectrum");
  for (double v : values_) {
    if (!std::isfinite(v)) throw Error(ErrorKind::precondition, "non-finite eigenvalue");
    if (v == 0.0) throw Error(ErrorKind::morse, "zero eigenvalue: critical point is degenerate");
  }
}

EigenSpectrum EigenSpectrum::of(const Eigen::MatrixXd& linearization) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(linearization, false);
  double scale = std::max(1.0, linearization.norm());
  std::vector<double> v;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    auto z = es.eigenvalues()(i);
    if (std::abs(z.imag()) > 1e-8 * scale) {
      throw Error(ErrorKind::precondition, "linearization has complex eigenvalues");
    }
    if (std::abs(z.real()) < 1e-12 * scale) {
      throw Error(ErrorKind::morse, "zero eigenvalue: critical point is degenerate");
    }
    v.push_back(z.real());
  }
  std::sort(v.begin(), v.end(), [](double a, double b) { return std::abs(a) < std::abs(b); });
  return EigenSpectrum(std::move(v));
}

bool EigenSpectrum::sink() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return v < 0.0; });
}

bool EigenSpectrum::source() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return v > 0.0; });
}

std::vector<std::pair<double, int>> EigenSpectrum::multiplicities(double tol) const {
  std::vector<double> s = values_;
  std::sort(s.begin(), s.end());
  std::vector<std::pair<double, int>> out;
  for (double v : s) {
    if (!out.empty() && std::abs(v - out.back().first) <= tol) {
      ++out.back().second;
    } else {
      out.emplace_back(v, 1);
    }
  }
  return out;
}

namespace {

struct ResonanceSearch {
  std::vector<double> a;  // |lambda|
  std::vector<long long> ai;
  bool exact = false;
  double top = 0.0, tol = 0.0;
  double margin = std::numeric_limits<double>::infinity();
  std::vector<int> alpha;
  std::optional<ResonanceWitness> witness;

  // alpha_j for j >= pos with remaining total `left`, partial sum s
  bool run(std::size_t pos, int left, double s, long long si) {
    const std::size_t n = a.size();
    if (pos + 1 == n) {
      alpha[pos] = left;
      s += left * a[pos];
      si += left * (exact ? ai[pos] : 0);
      for (std::size_t i = 0; i < n; ++i) {
        double d = exact ? std::abs(double(ai[i] - si)) / top : std::abs(a[i] - s) / top;
        margin = std::min(margin, d);
        if (exact ? ai[i] == si : d < tol) {
          witness = ResonanceWitness{static_cast<int>(i), alpha};
          return true;
        }
      }
      return false;
    }
    for (int v = left; v >= 0; --v) {
      // every completion adds at least (left - v) * min|lambda|
      double least = s + v * a[pos] + (left - v) * min_tail(pos + 1);
      if ((least - top) / top > margin) continue;
      alpha[pos] = v;
      if (run(pos + 1, left - v, s + v * a[pos], si + v * (exact ? ai[pos] : 0))) return true;
    }
    alpha[pos] = 0;
    return false;
  }

  double min_tail(std::size_t from) const {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t j = from; j < a.size(); ++j) m = std::min(m, a[j]);
    return m;
  }
};

}  // namespace

ResonanceReport check_nonresonant(const EigenSpectrum& spectrum, double tol, std::optional<int> max_order) {
  const auto& l = spectrum.eigenvalues();
  bool neg = l.front() < 0.0;
  for (double v : l) {
    if ((v < 0.0) != neg) {
      throw Error(ErrorKind::sign, "spectrum has eigenvalues of both signs; no Poincare domain");
    }
  }
  ResonanceSearch s;
  s.tol = tol;
  s.exact = true;
  for (double v : l) {
    s.a.push_back(std::abs(v));
    s.exact = s.exact && std::abs(v - std::round(v)) < 1e-12 && std::abs(v) < 1e15;
    s.ai.push_back(std::llround(std::abs(v)));
  }
  s.top = *std::max_element(s.a.begin(), s.a.end());
  double bottom = *std::min_element(s.a.begin(), s.a.end());
  int bound = static_cast<int>(std::floor(s.top / bottom * (1.0 + 1e-12)));
  if (max_order) bound = std::min(bound, *max_order);

  ResonanceReport out;
  out.exact = s.exact;
  out.search_bound = bound;
  s.alpha.assign(l.size(), 0);
  if (max_order && *max_order < 2) {
    out.margin = std::numeric_limits<double>::infinity();
    return out;
  }
  // order 2 is always examined so the margin is defined
  for (int k = 2; k <= std::max(2, bound); ++k) {
    if (s.run(0, k, 0.0, 0)) break;
  }
  out.margin = s.margin;
  if (s.witness) {
    out.resonant = true;
    out.witness = s.witness;
  }
  return out;
}

Eigen::MatrixXd linearization_from_hessian(const Eigen::MatrixXd& hessian, const Eigen::MatrixXd& metric) {
  Eigen::LLT<Eigen::MatrixXd> llt(metric);
  if (llt.info() != Eigen::Success) throw Error(ErrorKind::metric, "metric is not positive definite");
  return llt.solve(hessian);
}

Eigen::MatrixXd hessian_gradient_linearization(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& gradient,
    const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& hessian,
    const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& metric, const Eigen::VectorXd& p,
    double critical_tol) {
  double df = gradient(p).norm();
  if (df >= critical_tol) {
    std::ostringstream msg;
    msg << "point is not critical: |df| = " << df;
    throw Error(ErrorKind::precondition, msg.str());
  }
  Eigen::MatrixXd h = hessian(p);
  return linearization_from_hessian(0.5 * (h + h.transpose()), metric(p));
}

EigenSpectrum gradient_spectrum(const Eigen::MatrixXd& hessian, const Eigen::MatrixXd& metric) {
  Eigen::MatrixXd r = sqrt_spd(metric);
  Eigen::MatrixXd ri = r.inverse();
  Eigen::MatrixXd s = ri * hessian * ri;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (s + s.transpose()), Eigen::EigenvaluesOnly);
  std::vector<double> v(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  std::sort(v.begin(), v.end(), [](double a, double b) { return std::abs(a) < std::abs(b); });
  return EigenSpectrum(std::move(v));
}

namespace {

double spectral_distance(const EigenSpectrum& a, const EigenSpectrum& b) {
  if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
  std::vector<double> x = a.eigenvalues(), y = b.eigenvalues();
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) d = std::max(d, std::abs(x[i] - y[i]));
  return d;
}

}  // namespace

C2Verdict check_C2(const std::vector<SpectrumEntry>& entries, double tol) {
  C2Verdict out;
  out.separation = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    for (std::size_t j = i + 1; j < entries.size(); ++j) {
      double d = spectral_distance(entries[i].spectrum, entries[j].spectrum);
      bool same_orbit = entries[i].orbit == entries[j].orbit;
      if (!same_orbit) out.separation = std::min(out.separation, d);
      if (!out.holds) continue;
      if (same_orbit && d > tol) {
        out.holds = false;
        out.witness = {static_cast<int>(i), static_cast<int>(j)};
        out.reason = entries[i].label + " and " + entries[j].label +
                     " share an orbit but have different spectra";
      } else if (!same_orbit && d <= tol) {
        out.holds = false;
        out.witness = {static_cast<int>(i), static_cast<int>(j)};
        out.reason = entries[i].label + " and " + entries[j].label +
                     " lie in different orbits but have equal spectra";
      }
    }
  }
  return out;
}

C3Verdict check_C3(const std::vector<C3Entry>& entries) {
  C3Verdict out;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto r = is_generic_automorphism(entries[i].linearization, entries[i].stabilizer_action);
    if (!r.generic && out.holds) {
      out.holds = false;
      out.witness = {static_cast<int>(i), *r.witness};
    }
    out.reports.push_back(std::move(r));
  }
  return out;
}

GenericityReport genericity_report(const std::vector<ExtremumData>& extrema, double resonance_tol,
                                   double c2_tol) {
  GenericityReport out;
  std::vector<SpectrumEntry> c2;
  std::vector<C3Entry> c3;
  for (const auto& e : extrema) {
    EigenSpectrum s = EigenSpectrum::of(e.linearization);
    auto r = check_nonresonant(s, resonance_tol);
    out.c1 = out.c1 && !r.resonant;
    out.resonance.push_back(r);
    c2.push_back({e.label, s, e.orbit});
    c3.push_back({e.label, e.linearization, e.stabilizer_action});
  }
  out.c2 = check_C2(c2, c2_tol);
  out.c3 = check_C3(c3);
  out.overall = out.c1 && out.c2.holds && out.c3.holds;
  return out;
}

namespace {

// the distance is a max of singular values and has kinks, where parabolic
// steps stall; plain golden section keeps shrinking the bracket
std::pair<double, double> golden_section(const std::function<double(double)>& f, double a, double b) {
  const double r = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - r * (b - a), d = a + r * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > 1e-13 * (1.0 + std::abs(a) + std::abs(b))) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = f(d);
    }
  }
  return fc <= fd ? std::make_pair(c, fc) : std::make_pair(d, fd);
}

}  // namespace

SeparationVerdict k_separation(const Eigen::MatrixXd& psi, const Eigen::MatrixXd& x,
                               const LinearAction& stabilizer, const Eigen::MatrixXd& metric, double k) {
  double scale = std::max(1.0, psi.norm() * x.norm());
  double comm = (psi * x - x * psi).norm();
  if (comm > 1e-8 * scale) {
    std::ostringstream msg;
    msg << "psi does not commute with the linearization (defect " << comm << ")";
    throw Error(ErrorKind::membership, msg.str());
  }
  Eigen::MatrixXd r = sqrt_spd(metric);
  Eigen::MatrixXd ri = r.inverse();
  auto gnorm = [&](const Eigen::MatrixXd& m) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(r * m * ri);
    return svd.singularValues()(0);
  };

  SeparationVerdict out;
  out.k = k;
  out.norm = gnorm(psi);
  out.inverse_norm = gnorm(psi.inverse());

  RealSplit split = real_split(x);
  double lo = split.eigenvalues.front(), hi = split.eigenvalues.back();
  double smallest = std::numeric_limits<double>::infinity();
  for (double v : split.eigenvalues) smallest = std::min(smallest, std::abs(v));
  if (smallest == 0.0) throw Error(ErrorKind::morse, "linearization has a zero eigenvalue");
  Eigen::MatrixXd rs = r * split.vectors;
  Eigen::JacobiSVD<Eigen::MatrixXd> csvd(rs);
  double kappa = csvd.singularValues()(0) / csvd.singularValues()(csvd.singularValues().size() - 1);
  double bound = std::max({k, out.norm, 1.0});
  // |e^{tX}| >= e^{t hi} for t > 0: beyond ln(2 bound)/hi the distance exceeds bound.
  // When all exponents decay on one side the distance tends to |psi| within
  // kappa e^{-|t| smallest}, which falls under 1e-12 bound past the cutoff.
  double decay = std::log(std::max(kappa, 1.0) / (1e-12 * bound)) / smallest;
  double t_plus = hi > 0 ? std::log(2.0 * bound) / hi + 1.0 : decay;
  double t_minus = lo < 0 ? std::log(2.0 * bound) / -lo + 1.0 : decay;

  out.distance = std::numeric_limits<double>::infinity();
  const int grid = 800;
  for (int g = 0; g < stabilizer.group().order(); ++g) {
    const Eigen::MatrixXd& gm = stabilizer.matrix(g);
    auto dist = [&](double t) { return gnorm(psi - (x * t).exp() * gm); };
    std::vector<double> ts(grid + 1), ds(grid + 1);
    for (int i = 0; i <= grid; ++i) {
      ts[i] = -t_minus + (t_plus + t_minus) * i / grid;
      ds[i] = dist(ts[i]);
    }
    // refine the three best interior grid minima
    std::vector<int> mins;
    for (int i = 0; i <= grid; ++i) {
      bool left = i == 0 || ds[i] <= ds[i - 1];
      bool right = i == grid || ds[i] <= ds[i + 1];
      if (left && right) mins.push_back(i);
    }
    std::sort(mins.begin(), mins.end(), [&](int a, int b) { return ds[a] < ds[b]; });
    if (mins.size() > 3) mins.resize(3);
    for (int i : mins) {
      double a = ts[std::max(0, i - 1)], b = ts[std::min(grid, i + 1)];
      auto m = golden_section(dist, a, b);
      double best_t = ds[i] < m.second ? ts[i] : m.first;
      double best_d = std::min(ds[i], m.second);
      if (best_d < out.distance) {
        out.distance = best_d;
        out.t = best_t;
        out.gamma = g;
        out.at_infinity = false;
      }
    }
  }
  // decaying ends approach |psi| (the e^{tX} gamma term vanishes)
  if ((hi < 0 || lo > 0) && out.norm < out.distance) {
    out.distance = out.norm;
    out.at_infinity = true;
    out.t = hi < 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
  }
  out.in_l_gk = out.norm <= k && out.inverse_norm <= k && out.distance >= 1.0 / k;
  return out;
}

}  // namespace eqgrad
