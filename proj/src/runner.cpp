#include "eqgrad/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <numbers>
#include <sstream>
#include <thread>

#include "eqgrad/circle.hpp"
#include "eqgrad/errors.hpp"
#include "eqgrad/normal_form.hpp"
#include "eqgrad/rng.hpp"
#include "eqgrad/spectra.hpp"
#include "eqgrad/thickness.hpp"
#include "eqgrad/torus.hpp"

namespace eqgrad {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double pi = std::numbers::pi;

[[noreturn]] void input_error(const std::string& what) { throw Error(ErrorKind::schema, what); }

bool input_kind(ErrorKind k) {
  return k == ErrorKind::schema || k == ErrorKind::precondition || k == ErrorKind::domain ||
         k == ErrorKind::arity || k == ErrorKind::unsupported_dimension || k == ErrorKind::invariance;
}

class Context {
 public:
  Context(const Scenario& s, const RunOptions& opt)
      : s_(s), seed_(opt.seed.value_or(s.seed)), verdicts_(json::array()), results_(json::object()) {
    const KindSpec& spec = kind_spec(s.kind);
    for (const auto& [k, v] : opt.tolerances)
      if (!spec.tolerances.count(k)) input_error("unknown tolerance key '" + k + "' for kind " + s.kind);
    for (const auto& [k, def] : spec.tolerances) {
      double v = def;
      std::string src = "default";
      if (auto it = s.tolerances.find(k); it != s.tolerances.end()) v = it->second, src = "scenario";
      if (auto it = opt.tolerances.find(k); it != opt.tolerances.end()) v = it->second, src = "command-line";
      tol_[k] = v;
      tolerances_[k] = {{"value", v}, {"source", src}};
    }
  }

  const json& p() const { return s_.payload; }
  bool has(const std::string& k) const { return s_.payload.contains(k); }
  double num(const std::string& k, double def) const { return has(k) ? p()[k].get<double>() : def; }
  int integer(const std::string& k, int def) const { return has(k) ? static_cast<int>(p()[k].get<double>()) : def; }
  std::string word(const std::string& k, const std::string& def) const {
    return has(k) ? p()[k].get<std::string>() : def;
  }
  std::vector<double> numbers(const std::string& k) const {
    return has(k) ? p()[k].get<std::vector<double>>() : std::vector<double>{};
  }
  std::vector<std::vector<double>> matrix(const std::string& k) const {
    return has(k) ? p()[k].get<std::vector<std::vector<double>>>() : std::vector<std::vector<double>>{};
  }
  double tol(const std::string& k) const { return tol_.at(k); }
  std::uint64_t seed() const { return seed_; }

  void verdict(const std::string& name, bool pass, json value = nullptr, json threshold = nullptr) {
    json v;
    v["name"] = name;
    v["pass"] = pass;
    if (!value.is_null()) v["value"] = value;
    if (!threshold.is_null()) v["threshold"] = threshold;
    verdicts_.push_back(v);
  }
  json& results() { return results_; }
  const json& verdicts() const { return verdicts_; }
  const json& tolerances() const { return tolerances_; }

 private:
  const Scenario& s_;
  std::uint64_t seed_;
  std::map<std::string, double> tol_;
  json tolerances_ = json::object();
  json verdicts_;
  json results_;
};

json vec_json(const VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json mat_json(const MatrixXd& m) {
  json a = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(vec_json(m.row(i).transpose()));
  return a;
}

bool has_prefix(const Context& c, const std::string& p) {
  return c.has(p + ".a0") || c.has(p + ".cos") || c.has(p + ".sin");
}

TrigSeries series(const Context& c, const std::string& p, std::optional<double> fallback = {}) {
  if (!has_prefix(c, p)) {
    if (fallback) return TrigSeries::constant(*fallback);
    input_error("missing coefficients for '" + p + "' (" + p + ".a0, " + p + ".cos, " + p + ".sin)");
  }
  std::vector<double> a = c.numbers(p + ".cos"), b = c.numbers(p + ".sin");
  std::size_t d = std::max(a.size(), b.size());
  a.resize(d, 0.0);
  b.resize(d, 0.0);
  return TrigSeries(c.num(p + ".a0", 0.0), a, b);
}

CircleGroup circle_group(const Context& c) {
  std::string g = c.word("group", "trivial");
  int k = c.integer("group_order", 1);
  if (g == "trivial") return CircleGroup::trivial();
  if (g == "reflection") return CircleGroup::reflection();
  if (k < 1) input_error("key 'group_order': must be >= 1");
  if (g == "cyclic") return CircleGroup::cyclic(k);
  if (g == "dihedral") return CircleGroup::dihedral(k);
  input_error("key 'group': unknown circle group '" + g + "' (trivial, cyclic, dihedral, reflection)");
}

json zeros_json(const std::vector<ZeroDatum>& zs) {
  json a = json::array();
  for (const auto& z : zs) a.push_back({{"location", z.location}, {"derivative", z.derivative}});
  return a;
}

json signature_json(const CircleSignature& s) {
  return {{"zero_count", s.zero_count}, {"derivatives", s.derivatives}, {"chi", s.chi}};
}

// ---- circle kinds

void run_chi(Context& c) {
  CircleField x(series(c, "h"));
  ChiBreakdown b = chi_breakdown(x, c.numbers("fractions"));
  c.results()["chi"] = b.chi;
  c.results()["zeros"] = zeros_json(b.zeros);
  c.results()["t_plus"] = b.t_plus;
  c.results()["t_minus"] = b.t_minus;
  c.results()["rho"] = b.rho;
  if (c.has("expect_chi")) {
    double d = std::abs(b.chi - c.num("expect_chi", 0.0));
    c.verdict("chi_matches", d < c.tol("chi.match"), d, c.tol("chi.match"));
  }
}

void run_classify(Context& c) {
  CircleSignature a = signature(CircleField(series(c, "h")));
  CircleSignature b = signature(CircleField(series(c, "k")));
  bool eq = equivalent(a, b, c.tol("classify.match"));
  c.results()["h"] = signature_json(a);
  c.results()["k"] = signature_json(b);
  c.results()["equivalent"] = eq;
  if (c.has("expect_equivalent")) c.verdict("classification", eq == c.p()["expect_equivalent"].get<bool>(), eq);
}

void run_aut_reduce(Context& c) {
  PeriodicFunction f = series(c, "f");
  PeriodicFunction g = series(c, "g", 1.0);
  CircleGroup group = circle_group(c);
  CircleField x = gradient_field_on_circle(f, g);
  CircleGenericity gen = check_circle_genericity(f, g, group);
  c.results()["chi"] = gen.chi;
  c.results()["generic"] = gen.generic;

  std::string kind = c.word("phi", "");
  std::function<double(double)> phi;
  if (kind == "flow") {
    int e = c.integer("phi.element", 0);
    if (e < 0 || e >= group.order()) input_error("key 'phi.element': out of range for the group");
    CircleIsometry gamma = group.elements()[e];
    double t = c.num("phi.t", 0.0);
    phi = [x, gamma, t](double p) { return gamma(circle_flow(x, {p}, t)[0]); };
  } else if (kind == "diffeo") {
    std::vector<double> a = c.numbers("phi.cos"), b = c.numbers("phi.sin");
    std::size_t d = std::max(a.size(), b.size());
    a.resize(d, 0.0);
    b.resize(d, 0.0);
    CircleDiffeo diffeo(c.integer("phi.orientation", 1), c.num("phi.shift", 0.0), TrigSeries(0.0, a, b));
    phi = [diffeo](double p) { return wrap_angle(diffeo(p)); };
  } else {
    input_error("key 'phi': expected flow or diffeo");
  }
  AutReduction r = circle_aut_reduction(x, group, phi, c.integer("samples", 64));
  c.results()["element"] = r.element;
  c.results()["gamma"] = {{"orientation", r.gamma.orientation}, {"shift", r.gamma.shift}};
  c.results()["t"] = r.t;
  c.results()["residual"] = r.residual;
  c.results()["residual_per_element"] = r.residual_per_element;
  std::string expect = c.word("expect", "");
  if (expect == "automorphism") {
    c.verdict("recovered", r.residual < c.tol("aut.accept"), r.residual, c.tol("aut.accept"));
  } else if (expect == "non-automorphism") {
    c.verdict("rejected", r.residual > c.tol("aut.reject"), r.residual, c.tol("aut.reject"));
  } else {
    input_error("key 'expect': expected automorphism or non-automorphism");
  }
}

// ---- spectra

json resonance_json(const ResonanceReport& r, const EigenSpectrum& s) {
  json j;
  j["resonant"] = r.resonant;
  if (r.witness) {
    j["witness"] = {{"index", r.witness->index},
                    {"eigenvalue", s.eigenvalues()[r.witness->index]},
                    {"alpha", r.witness->alpha}};
  } else {
    j["witness"] = nullptr;
  }
  j["search_bound"] = r.search_bound;
  j["margin"] = r.margin;
  j["exact"] = r.exact;
  return j;
}

void run_resonance(Context& c) {
  EigenSpectrum s(c.numbers("spectrum"));
  std::optional<int> cap;
  if (c.has("max_order")) cap = c.integer("max_order", 0);
  ResonanceReport r = check_nonresonant(s, c.tol("resonance"), cap);
  c.results() = resonance_json(r, s);
  if (c.has("expect_resonant")) c.verdict("resonance", r.resonant == c.p()["expect_resonant"].get<bool>(), r.resonant);
}

// ---- torus system

TorusFunction torus_function(const std::vector<std::vector<double>>& rows, const std::string& key) {
  std::vector<FourierTerm> terms;
  for (const auto& r : rows) {
    if (r.size() != 4) input_error("key '" + key + "': rows are [kx, ky, a, b]");
    if (r[0] != std::floor(r[0]) || r[1] != std::floor(r[1]))
      input_error("key '" + key + "': frequencies must be integers");
    terms.push_back({static_cast<int>(r[0]), static_cast<int>(r[1]), r[2], r[3]});
  }
  return TorusFunction(terms);
}

struct TorusSystem {
  TorusFunction f;
  TorusMetric g;
  TorusGroup group;
};

TorusSystem torus_system(const Context& c) {
  TorusSystem s;
  s.f = torus_function(c.matrix("f"), "f");
  int metric_keys = c.has("g11") + c.has("g12") + c.has("g22");
  if (metric_keys != 0 && metric_keys != 3) input_error("metric needs all of g11, g12, g22");
  s.g = metric_keys ? TorusMetric::fourier(torus_function(c.matrix("g11"), "g11"),
                                           torus_function(c.matrix("g12"), "g12"),
                                           torus_function(c.matrix("g22"), "g22"))
                    : TorusMetric::flat();
  std::vector<TorusAffine> gens;
  for (const auto& r : c.matrix("generators")) {
    if (r.size() != 6) input_error("key 'generators': rows are [a11, a12, a21, a22, s1, s2] (shift in units of pi)");
    TorusAffine a;
    for (int i = 0; i < 4; ++i) {
      if (r[i] != std::floor(r[i])) input_error("key 'generators': linear part must be integral");
      a.linear(i / 2, i % 2) = static_cast<int>(r[i]);
    }
    a.shift = wrap_torus(Vector2d(r[4] * pi, r[5] * pi));
    gens.push_back(a);
  }
  if (!gens.empty()) s.group = TorusGroup::generated(gens);
  return s;
}

Vector2d vec2(const Context& c, const std::string& k) {
  auto v = c.numbers(k);
  if (v.size() != 2) input_error("key '" + k + "': expected 2 entries");
  return {v[0], v[1]};
}

double function_invariance(const TorusSystem& s) {
  double d = 0.0;
  const int m = 32;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      Vector2d p(2 * pi * (i + 0.3) / m, 2 * pi * (j + 0.7) / m);
      for (const auto& e : s.group.elements()) d = std::max(d, std::abs(s.f(e(p)) - s.f(p)));
    }
  return d;
}

json points_json(const std::vector<CriticalPointDatum>& pts) {
  json a = json::array();
  for (const auto& p : pts) {
    json j;
    j["label"] = p.label;
    j["location"] = vec_json(p.location);
    j["index"] = p.index;
    j["eigenvalues"] = p.spectrum ? json(p.spectrum->eigenvalues()) : json(nullptr);
    a.push_back(j);
  }
  return a;
}

void structural_checks(Context& c, const TorusSystem& s, const std::vector<CriticalPointDatum>& pts) {
  c.verdict("euler_sum", euler_sum(pts) == 0, euler_sum(pts));
  bool signs = true;
  for (const auto& p : pts) {
    if (!p.spectrum) continue;
    if (p.sink()) signs = signs && p.spectrum->sink();
    if (p.source()) signs = signs && p.spectrum->source();
  }
  c.verdict("extremum_spectra_signs", signs);
  double margin = s.g.positivity_margin();
  c.results()["positivity_margin"] = margin;
  c.verdict("metric_positive", margin > c.tol("torus.positivity"), margin, c.tol("torus.positivity"));
  if (s.group.order() > 1) {
    double fd = function_invariance(s), gd = s.g.invariance_defect(s.group);
    c.verdict("function_invariant", fd < c.tol("torus.invariance"), fd, c.tol("torus.invariance"));
    c.verdict("metric_invariant", gd < c.tol("torus.invariance"), gd, c.tol("torus.invariance"));
  }
}

void omega_and_transfer(Context& c, const TorusSystem& s, const std::vector<CriticalPointDatum>& pts,
                        bool transfer) {
  const int n = c.integer("directions", 256);
  const double radius = c.num("radius", 1e-2);
  if (n < 4) input_error("key 'directions': at least 4");
  json omega = json::array();
  json transfers = json::array();
  double worst_agreement = 1.0, worst_roundtrip = 0.0;
  int mismatches = 0;
  for (int k = 0; k < static_cast<int>(pts.size()); ++k) {
    if (!pts[k].sink()) continue;
    BasinSample b = omega_sample(s.f, s.g, pts, k, n, radius);
    json j;
    j["sink"] = pts[k].label;
    json fr = json::object();
    for (const auto& [q, v] : b.fractions) fr[pts[q].label] = v;
    j["fractions"] = fr;
    j["undecided_fraction"] = b.undecided_fraction;
    j["adjacent_agreement"] = b.adjacent_agreement;
    worst_agreement = std::min(worst_agreement, b.adjacent_agreement);

    // equivariance under the stabilizer of the sink
    for (int e : s.group.stabilizer(pts[k].location, 1e-7)) {
      const TorusAffine& gamma = s.group.element(e);
      for (int d = 0; d < n; ++d) {
        Vector2d image = gamma.differential() * b.directions[d];
        int match = -1;
        for (int d2 = 0; d2 < n; ++d2)
          if ((b.directions[d2] - image).norm() < 1e-9) match = d2;
        if (match < 0) continue;
        const BasinLabel& a = b.labels[d];
        const BasinLabel& m = b.labels[match];
        bool da = a.point && !a.saddle, dm = m.point && !m.saddle;
        if (da != dm) {
          ++mismatches;
          continue;
        }
        if (!da) continue;
        auto expected = nearest_critical(pts, gamma(pts[*a.point].location), 1e-7);
        if (!expected || *expected != *m.point) ++mismatches;
      }
    }
    omega.push_back(j);

    if (!transfer) continue;
    for (const auto& [q, frac] : b.fractions) {
      if (!pts[q].source() || frac <= 0.0) continue;
      // middle of the longest run of directions labelled q
      auto labelled = [&](int i) {
        const BasinLabel& l = b.labels[((i % n) + n) % n];
        return l.point == q && !l.saddle;
      };
      int d = 0, best = 0;
      for (int i = 0; i < n; ++i) {
        if (!labelled(i) || labelled(i - 1)) continue;
        int len = 0;
        while (len < n && labelled(i + len)) ++len;
        if (len > best) best = len, d = (i + len / 2) % n;
      }
      if (best == 0) d = static_cast<int>(std::find_if(b.labels.begin(), b.labels.end(), [&](const BasinLabel& l) {
                                             return l.point == q && !l.saddle;
                                           }) - b.labels.begin());
      Transfer there = sigma_transfer(s.f, s.g, pts, k, q, b.directions[d], radius);
      Transfer back = sigma_transfer(s.f, s.g, pts, q, k, there.direction, radius);
      double err = (back.direction - b.directions[d]).norm();
      worst_roundtrip = std::max(worst_roundtrip, err);
      transfers.push_back({{"from", pts[k].label},
                           {"to", pts[q].label},
                           {"direction", vec_json(b.directions[d])},
                           {"image", vec_json(there.direction)},
                           {"time", there.time},
                           {"roundtrip_error", err}});
    }
  }
  c.results()["omega"] = omega;
  c.verdict("omega_openness", worst_agreement >= c.tol("torus.agreement"), worst_agreement,
            c.tol("torus.agreement"));
  c.verdict("omega_equivariance", mismatches == 0, mismatches);
  if (transfer) {
    c.results()["transfers"] = transfers;
    c.verdict("sigma_roundtrip", worst_roundtrip < c.tol("torus.roundtrip"), worst_roundtrip,
              c.tol("torus.roundtrip"));
  }
}

void metric_family_check(Context& c, const TorusSystem& s, const std::vector<CriticalPointDatum>& pts) {
  if (!c.has("family_center") || !c.has("family_radius") || !c.has("family_direction"))
    input_error("metric-family needs family_center, family_radius and family_direction");
  SmoothField<double> y = symmetric_bump(s.group, vec2(c, "family_center"), c.num("family_radius", 0.0),
                                         vec2(c, "family_direction"));
  MetricFamily fam = build_metric_family(s.g, s.f, y, pts);
  double eps = c.num("family_eps", 1e-2);
  eps = std::min({eps, 0.5 * fam.eps_high(), -0.5 * fam.eps_low()});
  TorusMetric ge = fam.at(eps);
  SmoothField<double> xe = gradient_field(s.f, ge), x0 = gradient_field(s.f, s.g);
  double defect = 0.0, margin = std::numeric_limits<double>::infinity();
  const int m = 128;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      VectorXd p = Vector2d(2 * pi * i / m, 2 * pi * j / m);
      defect = std::max(defect, (xe(p) - x0(p) - eps * y(p)).cwiseAbs().maxCoeff());
      margin = std::min(margin, Eigen::SelfAdjointEigenSolver<Matrix2d>(ge(Vector2d(p))).eigenvalues()(0));
    }
  c.results()["metric_family"] = {{"eps_low", fam.eps_low()},   {"eps_high", fam.eps_high()},
                                  {"eps", eps},                 {"gradient_defect", defect},
                                  {"positivity_margin", margin}};
  c.verdict("metric_family_gradient", defect < c.tol("torus.metric"), defect, c.tol("torus.metric"));
  c.verdict("metric_family_positive", margin > c.tol("torus.positivity"), margin, c.tol("torus.positivity"));
}

void run_torus(Context& c) {
  TorusSystem s = torus_system(c);
  std::vector<std::string> exps{"critical", "omega", "transfer"};
  if (c.has("experiments")) exps = c.p()["experiments"].get<std::vector<std::string>>();
  for (const auto& e : exps)
    if (e != "critical" && e != "omega" && e != "transfer" && e != "metric-family")
      input_error("key 'experiments': unknown experiment '" + e + "'");
  auto has = [&](const char* e) { return std::find(exps.begin(), exps.end(), e) != exps.end(); };
  auto pts = find_critical_points(s.f, s.g);
  c.results()["group_order"] = s.group.order();
  c.results()["critical_points"] = points_json(pts);
  if (has("critical")) structural_checks(c, s, pts);
  if (has("omega") || has("transfer")) omega_and_transfer(c, s, pts, has("transfer"));
  if (has("metric-family")) metric_family_check(c, s, pts);
}

json variation_json(const VariationReport& r) {
  return {{"y", vec_json(r.y)},
          {"window_center", vec_json(r.window_center)},
          {"window_radius", r.window_radius},
          {"target", vec_json(r.target)},
          {"predicted", vec_json(r.predicted)},
          {"finite_difference", vec_json(r.finite_difference)},
          {"relative_error", r.relative_error},
          {"eps", r.eps},
          {"amplitude", vec_json(r.amplitude)}};
}

void run_variation(Context& c) {
  TorusSystem s = torus_system(c);
  auto pts = find_critical_points(s.f, s.g);
  VariationOptions opt;
  opt.group = s.group;
  opt.t_fraction = c.num("t_fraction", opt.t_fraction);
  opt.window_radius = c.num("window_radius", opt.window_radius);
  opt.eps = c.num("eps", opt.eps);
  Vector2d x = vec2(c, "x"), v = vec2(c, "v");
  double t = c.num("t", 1.0);
  VariationReport r = point_variation(s.f, s.g, pts, x, t, v, opt);
  c.results()["point"] = variation_json(r);
  c.verdict("point_variation", r.relative_error < c.tol("variation.relative"), r.relative_error,
            c.tol("variation.relative"));
  if (c.has("u")) {
    auto u = c.numbers("u");
    if (u.size() != 4) input_error("key 'u': expected 4 entries");
    VariationReport d = derivative_variation(s.f, s.g, pts, x, t, v, Eigen::Vector4d(u[0], u[1], u[2], u[3]), opt);
    c.results()["derivative"] = variation_json(d);
    c.verdict("derivative_variation", d.relative_error < c.tol("variation.relative"), d.relative_error,
              c.tol("variation.relative"));
  }
}

// ---- genericity

void run_genericity(Context& c) {
  std::string space = c.word("space", "");
  bool expect = c.has("expect_generic") ? c.p()["expect_generic"].get<bool>() : true;
  if (space == "circle") {
    CircleGenericity g = check_circle_genericity(series(c, "f"), series(c, "g", 1.0), circle_group(c),
                                                 c.tol("circle"));
    c.results()["critical_points"] = zeros_json(g.critical_points);
    c.results()["orbit_condition"] = g.orbit_condition;
    c.results()["chi_required"] = g.chi_required;
    c.results()["chi"] = g.chi;
    c.results()["chi_condition"] = g.chi_condition;
    if (g.witness) c.results()["witness"] = zeros_json({g.witness->first, g.witness->second});
    c.results()["generic"] = g.generic;
    c.verdict("generic", g.generic == expect, g.generic);
    return;
  }
  if (space != "torus") input_error("key 'space': expected circle or torus");
  TorusSystem s = torus_system(c);
  auto pts = find_critical_points(s.f, s.g);
  std::vector<ExtremumData> ext;
  std::vector<int> ext_index;
  for (int k = 0; k < static_cast<int>(pts.size()); ++k) {
    const auto& p = pts[k];
    if (!p.sink() && !p.source()) continue;
    std::vector<MatrixXd> mats;
    for (int e : s.group.stabilizer(p.location, 1e-7)) mats.push_back(s.group.element(e).differential());
    ExtremumData d{p.label, p.linearization, 0, LinearAction::generated(mats, "stabilizer")};
    ext.push_back(d);
    ext_index.push_back(k);
  }
  for (std::size_t a = 0; a < ext.size(); ++a) {
    ext[a].orbit = static_cast<int>(a);
    for (std::size_t b = 0; b < a; ++b) {
      bool same = false;
      for (const auto& e : s.group.elements())
        same = same || torus_distance(e(pts[ext_index[b]].location), pts[ext_index[a]].location) < 1e-7;
      if (same) {
        ext[a].orbit = ext[b].orbit;
        break;
      }
    }
  }
  GenericityReport r = genericity_report(ext, c.tol("resonance"), c.tol("c2"));
  c.results()["critical_points"] = points_json(pts);
  json res = json::array();
  for (std::size_t a = 0; a < ext.size(); ++a) {
    EigenSpectrum sp = EigenSpectrum::of(ext[a].linearization);
    json j = resonance_json(r.resonance[a], sp);
    j["label"] = ext[a].label;
    j["orbit"] = ext[a].orbit;
    res.push_back(j);
  }
  c.results()["c1"] = {{"holds", r.c1}, {"points", res}};
  json c2 = {{"holds", r.c2.holds}, {"separation", r.c2.separation}, {"reason", r.c2.reason}};
  if (r.c2.witness) c2["witness"] = {ext[r.c2.witness->first].label, ext[r.c2.witness->second].label};
  c.results()["c2"] = c2;
  json c3 = {{"holds", r.c3.holds}};
  if (r.c3.witness) {
    c3["witness"] = {{"label", ext[r.c3.witness->first].label},
                     {"eigenvalue", {r.c3.witness->second.real(), r.c3.witness->second.imag()}}};
  }
  c.results()["c3"] = c3;
  c.results()["generic"] = r.overall;
  c.verdict("generic", r.overall == expect, r.overall);
}

// ---- normal form

void run_normal_form(Context& c) {
  const int n = c.integer("dimension", 0);
  if (n < 1 || n > 3) input_error("key 'dimension': 1, 2 or 3");
  auto lin = c.matrix("linear");
  if (static_cast<int>(lin.size()) != n) input_error("key 'linear': expected " + std::to_string(n) + " rows");
  MatrixXd a(n, n);
  for (int i = 0; i < n; ++i) {
    if (static_cast<int>(lin[i].size()) != n) input_error("key 'linear': rows must have length dimension");
    for (int j = 0; j < n; ++j) a(i, j) = lin[i][j];
  }
  auto terms = c.matrix("terms");
  int field_degree = 1;
  for (const auto& t : terms) {
    if (static_cast<int>(t.size()) != n + 2) input_error("key 'terms': rows are [component, exponents..., coefficient]");
    int d = 0;
    for (int j = 0; j < n; ++j) {
      if (t[1 + j] < 0 || t[1 + j] != std::floor(t[1 + j])) input_error("key 'terms': bad exponent");
      d += static_cast<int>(t[1 + j]);
    }
    if (d < 2) input_error("key 'terms': only nonlinear terms (degree >= 2); use 'linear'");
    if (t[0] < 0 || t[0] >= n || t[0] != std::floor(t[0])) input_error("key 'terms': bad component");
    field_degree = std::max(field_degree, d);
  }
  const int degree = c.integer("degree", 8);
  PolyVectorField x = PolyVectorField::linear(a, std::max(field_degree, degree));
  for (const auto& t : terms) {
    Exponent e{0, 0, 0};
    for (int j = 0; j < n; ++j) e[j] = static_cast<int>(t[1 + j]);
    x.add(static_cast<int>(t[0]), e, t[n + 1]);
  }
  x = x.with_degree(degree);
  const double radius = c.num("radius", 0.1);
  std::string action = c.word("action", "none");
  auto solve = [&]() -> Linearization {
    if (action == "none") return poincare_linearize(x, degree, radius);
    if (action == "negation") return equivariant_linearize(x, LinearAction::negation(n), degree, radius);
    if (action == "swap") {
      if (n != 2) input_error("key 'action': swap needs dimension 2");
      return equivariant_linearize(x, LinearAction::swap(), degree, radius);
    }
    input_error("key 'action': expected none, negation or swap");
  };
  Linearization lz = solve();
  json coeffs = json::array();
  const auto& basis = lz.phi.basis();
  for (int k = 0; k < basis.size(); ++k) {
    Exponent e = basis.exponent(k);
    int d = e[0] + e[1] + e[2];
    if (d < 2) continue;
    for (int i = 0; i < n; ++i) {
      double v = lz.phi.coefficients()(i, k);
      if (std::abs(v) < 1e-15) continue;
      coeffs.push_back({{"component", i}, {"exponent", std::vector<int>(e.begin(), e.begin() + n)}, {"value", v}});
    }
  }
  c.results()["linear"] = mat_json(lz.linear);
  c.results()["coefficients"] = coeffs;
  c.results()["min_denominator"] = lz.report.min_denominator;
  c.results()["degree_residual"] = lz.report.degree_residual;
  c.results()["disk_residual"] = lz.report.disk_residual;
  c.results()["test_radius"] = lz.report.test_radius;
  c.verdict("conjugation_residual", lz.report.disk_residual < c.tol("normal_form.residual"), lz.report.disk_residual,
            c.tol("normal_form.residual"));
}

// ---- thickness

void run_thick(Context& c) {
  auto ev = c.numbers("eigenvalues");
  const int n = static_cast<int>(ev.size());
  if (n < 2) input_error("key 'eigenvalues': at least 2 entries");
  Rng rng(c.seed(), 0);
  MatrixXd x = Eigen::Map<VectorXd>(ev.data(), n).asDiagonal();
  if (c.has("conjugate") && c.p()["conjugate"].get<bool>()) {
    MatrixXd sm(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) sm(i, j) = rng.normal();
    sm += 3.0 * MatrixXd::Identity(n, n);
    x = sm * x * sm.inverse();
  }
  EigenSplit split = EigenSplit::of(x);
  const int r = r_dimension(n);
  std::vector<VectorXd> tuple;
  if (c.has("vectors")) {
    for (const auto& row : c.matrix("vectors")) {
      if (static_cast<int>(row.size()) != n) input_error("key 'vectors': each vector needs dimension entries");
      tuple.push_back(Eigen::Map<const VectorXd>(row.data(), n));
    }
  } else {
    Rng vr(c.seed(), 1);
    for (int k = 0; k < r; ++k) {
      VectorXd v(n);
      for (int j = 0; j < n; ++j) v(j) = vr.normal();
      tuple.push_back(v);
    }
  }
  if (tuple.empty()) input_error("key 'vectors': empty tuple");
  ThickReport t = is_thick(tuple, split, c.tol("thick"));
  c.results()["r"] = r;
  c.results()["generator"] = mat_json(x);
  c.results()["tuple"] = json::array();
  for (const auto& v : tuple) c.results()["tuple"].push_back(vec_json(v));
  json tj = {{"thick", t.thick}, {"margin", t.margin}};
  if (t.failing_space) tj["failing_eigenvalue"] = split.eigenvalue(*t.failing_space);
  tj["failing_subset"] = t.failing_subset;
  c.results()["thickness"] = tj;
  if (c.has("expect_thick"))
    c.verdict("thickness", t.thick == c.p()["expect_thick"].get<bool>(), t.thick);

  CentralizerAlgebra z = centralizer_algebra(x);
  ThickFreeVerdict v = thick_free_oracle(tuple, z, split, c.integer("trials", 10), c.seed());
  c.results()["oracle"] = {{"trials", v.trials},         {"satisfied", v.satisfied},
                           {"unresolved", v.unresolved}, {"violations", v.violations},
                           {"max_distance", v.max_distance}};
  if (v.counterexample) c.results()["oracle"]["counterexample"] = mat_json(*v.counterexample);
  if (t.thick) c.verdict("thick_free", v.violations == 0, v.violations);
  if (static_cast<int>(tuple.size()) == r) {
    bool in_f = f_membership(tuple, split, c.tol("thick"));
    c.results()["in_F"] = in_f;
    if (in_f) {
      OrbitRank o = orbit_map_rank(tuple, z, x);
      c.results()["orbit_rank"] = {{"rank", o.rank}, {"centralizer_dimension", o.centralizer_dimension}};
      c.verdict("orbit_rank", o.expected, o.rank, o.centralizer_dimension - 1);
    }
  }
}

void dispatch(Context& c, const std::string& kind) {
  if (kind == "chi") return run_chi(c);
  if (kind == "classify") return run_classify(c);
  if (kind == "genericity") return run_genericity(c);
  if (kind == "resonance") return run_resonance(c);
  if (kind == "normal-form") return run_normal_form(c);
  if (kind == "thick") return run_thick(c);
  if (kind == "torus") return run_torus(c);
  if (kind == "variation") return run_variation(c);
  if (kind == "aut-reduce") return run_aut_reduce(c);
  input_error("unknown scenario kind '" + kind + "'");
}

json error_json(const std::exception& e) {
  json j;
  if (auto* err = dynamic_cast<const Error*>(&e)) j["kind"] = std::string(to_string(err->kind()));
  else j["kind"] = "internal";
  j["message"] = e.what();
  return j;
}

RunResult finish(json report, int code) {
  report["exit_code"] = code;
  report["status"] = code == exit_pass ? "pass" : code == exit_fail ? "fail" : "error";
  return {std::move(report), code};
}

RunResult input_failure(const std::string& source, const std::exception& e) {
  json report;
  report["version"] = eqgrad_version;
  report["scenario"] = {{"source", source}};
  report["error"] = error_json(e);
  return finish(std::move(report), exit_input);
}

}  // namespace

RunResult run_scenario(const Scenario& scenario, const RunOptions& opt) {
  auto start = std::chrono::steady_clock::now();
  json report;
  report["version"] = eqgrad_version;
  report["scenario"] = scenario_echo(scenario);
  int code = exit_pass;
  try {
    Context c(scenario, opt);
    report["seed"] = c.seed();
    report["tolerances"] = c.tolerances();
    try {
      dispatch(c, scenario.kind);
      for (const auto& v : c.verdicts())
        if (!v["pass"].get<bool>()) code = exit_fail;
    } catch (const Error& e) {
      if (input_kind(e.kind())) throw;
      report["error"] = error_json(e);
      code = exit_fail;
    }
    report["verdicts"] = c.verdicts();
    report["results"] = c.results();
  } catch (const Error& e) {
    report["error"] = error_json(e);
    code = exit_input;
  } catch (const std::exception& e) {
    report["error"] = error_json(e);
    code = exit_fail;
  }
  if (opt.timing) {
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    report["timing"] = {{"seconds", secs}};
  }
  return finish(std::move(report), code);
}

RunResult run_file(const std::filesystem::path& path, const RunOptions& opt,
                   const std::optional<std::string>& expected_kind) {
  Scenario s;
  try {
    s = load_scenario(path);
  } catch (const std::exception& e) {
    return input_failure(path.filename().string(), e);
  }
  if (expected_kind && s.kind != *expected_kind) {
    Error e(ErrorKind::schema, "key 'kind': scenario is '" + s.kind + "', command expects '" + *expected_kind + "'");
    return input_failure(path.filename().string(), e);
  }
  return run_scenario(s, opt);
}

RunResult run_suite(const std::filesystem::path& directory, const RunOptions& opt, int parallel) {
  auto start = std::chrono::steady_clock::now();
  json report;
  report["version"] = eqgrad_version;
  report["suite"] = directory.filename().string();
  if (!std::filesystem::is_directory(directory)) {
    report["error"] = {{"kind", "schema"}, {"message", "not a directory: " + directory.string()}};
    return finish(std::move(report), exit_input);
  }
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(directory))
    if (e.is_regular_file() && e.path().extension() == ".scn") files.push_back(e.path());
  std::sort(files.begin(), files.end(),
            [](const auto& a, const auto& b) { return a.filename().string() < b.filename().string(); });

  std::vector<RunResult> results(files.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < files.size(); i = next++) results[i] = run_file(files[i], opt);
  };
  const int threads = std::clamp(parallel, 1, 64);
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  json entries = json::array();
  int passed = 0, failed = 0, errors = 0;
  json failures = json::array();
  for (std::size_t i = 0; i < files.size(); ++i) {
    const RunResult& r = results[i];
    passed += r.exit_code == exit_pass;
    failed += r.exit_code == exit_fail;
    errors += r.exit_code == exit_input;
    if (r.exit_code != exit_pass) failures.push_back(files[i].filename().string());
    entries.push_back({{"file", files[i].filename().string()}, {"exit_code", r.exit_code}, {"report", r.report}});
  }
  report["scenarios"] = entries;
  report["summary"] = {{"total", files.size()}, {"passed", passed}, {"failed", failed}, {"errors", errors},
                       {"failures", failures}};
  if (opt.timing) {
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    report["timing"] = {{"seconds", secs}};
  }
  return finish(std::move(report), failures.empty() ? exit_pass : exit_fail);
}

json strip_timing(json report) {
  if (report.is_object()) {
    report.erase("timing");
    for (auto& [k, v] : report.items()) v = strip_timing(v);
  } else if (report.is_array()) {
    for (auto& v : report) v = strip_timing(v);
  }
  return report;
}

}  // namespace eqgrad
