#pragma once

// Closed-form CR charts with immersions, and the calibration utilities that
// fix their free scales.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

#include "crverify/chart_calculus.hpp"
#include "crverify/immersion_geometry.hpp"
#include "crverify/pseudohermitian.hpp"

namespace crverify {

struct ModelDescriptor {
  std::string name;
  std::map<std::string, double> params;
  CRChartSpec spec;
  ScalarField v;  // frame change to an adapted frame
  std::optional<ImmersionSpec> immersion;
};

namespace detail {

inline GridBox box(std::array<double, 3> lo, std::array<double, 3> hi, int n = 5) {
  GridBox g;
  g.lo = lo;
  g.hi = hi;
  g.resolution = n;
  return g;
}

}  // namespace detail

/// θ = du3 + u1 du2, Z = (∂1 − i(∂2 − u1∂3))/√2; intrinsic only.
inline ModelDescriptor heisenberg() {
  const cplx I(0.0, 1.0);
  const double k = 1.0 / std::sqrt(2.0);
  const ScalarField u1 = coordinate(0), u3 = coordinate(2);
  ModelDescriptor m;
  m.name = "heisenberg";
  m.spec.Z_raw = {{ScalarField(k), ScalarField(-I * k), ScalarField(I * k) * u1}, false};
  m.spec.theta_raw = {{ScalarField(0.0), u1, ScalarField(1.0)}, true};
  m.spec.grid = detail::box({-1, -1, -1}, {1, 1, 1});
  m.v = ScalarField(0.5) * u3;
  return m;
}

/// Round sphere |z| = r in ℂ² ≅ ℝ⁴ on the chart (η, ξ1, ξ2) with
/// z = (r cos η e^{iξ1}, r sin η e^{iξ2}) and θ = s Σ (x_j dy_j − y_j dx_j).
inline ModelDescriptor sphere(double r, double s, std::optional<GridBox> grid = std::nullopt) {
  if (!(r > 0) || !(s > 0)) throw std::invalid_argument("sphere: radius and scale must be positive");
  const GridBox g = grid.value_or(detail::box({0.3, -1, -1}, {1.2, 1, 1}));
  const double pi = std::numbers::pi;
  if (g.lo[0] < 1e-2 || g.hi[0] > pi / 2 - 1e-2)
    throw DegenerateChart("sphere chart needs 0 < eta < pi/2 away from the poles");
  const cplx I(0.0, 1.0);
  auto cos2 = make_field([](const auto& u) {
    using std::cos;
    return cos(u[0]) * cos(u[0]);
  });
  auto sin2 = make_field([](const auto& u) {
    using std::sin;
    return sin(u[0]) * sin(u[0]);
  });
  auto tan_ = make_field([](const auto& u) {
    using std::cos;
    using std::sin;
    return sin(u[0]) / cos(u[0]);
  });
  auto cot_ = make_field([](const auto& u) {
    using std::cos;
    using std::sin;
    return cos(u[0]) / sin(u[0]);
  });
  ModelDescriptor m;
  m.name = "sphere";
  m.params = {{"r", r}, {"s", s}};
  const double k = s * r * r;
  m.spec.theta_raw = {{ScalarField(0.0), ScalarField(k) * cos2, ScalarField(k) * sin2}, true};
  m.spec.Z_raw = {{ScalarField(1.0), ScalarField(I) * tan_, ScalarField(-I) * cot_}, false};
  m.spec.grid = g;
  m.v = ScalarField(k / 4.0) * (coordinate(1) + coordinate(2));
  ImmersionSpec imm;
  imm.n = 4;
  imm.f = {make_field([r](const auto& u) {
             using std::cos;
             return r * cos(u[0]) * cos(u[1]);
           }),
           make_field([r](const auto& u) {
             using std::cos;
             using std::sin;
             return r * cos(u[0]) * sin(u[1]);
           }),
           make_field([r](const auto& u) {
             using std::cos;
             using std::sin;
             return r * sin(u[0]) * cos(u[2]);
           }),
           make_field([r](const auto& u) {
             using std::sin;
             return r * sin(u[0]) * sin(u[2]);
           })};
  m.immersion = std::move(imm);
  return m;
}

/// Cylinder (α, y1, y2) ↦ (r cos α + i y1, r sin α + i y2) ∈ ℂ², θ = Σ x_j dy_j.
inline ModelDescriptor cylinder(double r, std::optional<GridBox> grid = std::nullopt) {
  if (!(r > 0)) throw std::invalid_argument("cylinder: radius must be positive");
  const cplx I(0.0, 1.0);
  auto rcos = make_field([r](const auto& u) {
    using std::cos;
    return r * cos(u[0]);
  });
  auto rsin = make_field([r](const auto& u) {
    using std::sin;
    return r * sin(u[0]);
  });
  ModelDescriptor m;
  m.name = "cylinder";
  m.params = {{"r", r}};
  m.spec.theta_raw = {{ScalarField(0.0), rcos, rsin}, true};
  m.spec.Z_raw = {{ScalarField(1.0), ScalarField(I) * rsin, ScalarField(-I) * rcos}, false};
  m.spec.grid = grid.value_or(detail::box({0.2, -0.5, -0.5}, {1.4, 0.5, 0.5}));
  m.v = ScalarField(0.0);
  ImmersionSpec imm;
  imm.n = 4;
  imm.f = {rcos, coordinate(1), rsin, coordinate(2)};
  m.immersion = std::move(imm);
  return m;
}

/// Webster metric coefficients g(∂_i, ∂_j) at a point.
inline Eigen::Matrix3d webster_gram(const PseudohermitianFrame& frame, const ChartPoint& p,
                                    DiffMode mode = DiffMode::ad) {
  const WebsterMetric g(frame);
  EvalContext ctx(p, mode);
  Eigen::Matrix3d G;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) G(i, j) = g.coefficient(i, j).value(ctx).real();
  return G;
}

/// Linear isometric immersion of a flat model: f = S(u − u_center) with
/// S = √G, padded with zeros into ℝⁿ.
inline ModelDescriptor flatten(const ModelDescriptor& model, int n = 3, double tol = 1e-8) {
  if (n < 3) throw std::invalid_argument("flatten: ambient dimension must be at least 3");
  const PseudohermitianFrame frame = normalize(model.spec);
  const ChartPoint c = model.spec.grid.center();
  const Eigen::Matrix3d G0 = webster_gram(frame, c);
  double var = 0.0;
  for (const auto& p : model.spec.grid.points()) var = std::max(var, (webster_gram(frame, p) - G0).cwiseAbs().maxCoeff());
  if (var > tol) throw NotFlat("Webster metric coefficients vary by " + std::to_string(var));
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(G0);
  const Eigen::Matrix3d S = es.operatorSqrt();
  ModelDescriptor out = model;
  out.name = model.name + "-flat";
  out.params["n"] = n;
  ImmersionSpec imm;
  imm.n = n;
  for (int k = 0; k < n; ++k) {
    if (k >= 3) {
      imm.f.emplace_back(0.0);
      continue;
    }
    const std::array<double, 3> row{S(k, 0), S(k, 1), S(k, 2)};
    const std::array<double, 3> center{c[0], c[1], c[2]};
    imm.f.push_back(make_field([row, center](const auto& u) {
      return row[0] * (u[0] - center[0]) + row[1] * (u[1] - center[1]) + row[2] * (u[2] - center[2]);
    }));
  }
  out.immersion = std::move(imm);
  return out;
}

/// The flat chart of `base` mapped into ℝ⁶ as a product of circles of
/// curvature λ_j (lines where λ_j = 0), arclength parametrized.
inline ModelDescriptor t_lambda(double l1, double l2, double l3, const ModelDescriptor& base) {
  if (!(0 <= l1 && l1 <= l2 && l2 <= l3)) throw std::invalid_argument("t_lambda: need 0 <= l1 <= l2 <= l3");
  ModelDescriptor flat;
  try {
    flat = flatten(base, 3);
  } catch (const NotFlat& e) {
    throw MetricMismatch(std::string("flat coordinates unavailable: ") + e.what());
  }
  ModelDescriptor out = base;
  out.name = "t_lambda";
  out.params = {{"lambda1", l1}, {"lambda2", l2}, {"lambda3", l3}};
  const std::array<double, 3> lam{l1, l2, l3};
  ImmersionSpec imm;
  imm.n = 6;
  for (int j = 0; j < 3; ++j) {
    const ScalarField w = flat.immersion->f[j];
    const double l = lam[j];
    if (l > 0) {
      imm.f.push_back(map_fields({w}, [l](const std::vector<Jet>& x) { return sin(l * x[0]) * (1.0 / l); }));
      imm.f.push_back(
          map_fields({w}, [l](const std::vector<Jet>& x) { return (1.0 - cos(l * x[0])) * (1.0 / l); }));
    } else {
      imm.f.emplace_back(0.0);
      imm.f.push_back(w);
    }
  }
  out.immersion = std::move(imm);
  return out;
}

struct CalibrationResult {
  std::string family;
  std::map<std::string, double> params;
  double defect = 0.0;
  double k_mix = 0.0;         // formula value 1/4 − |c|² at the optimum
  double k_mix_oracle = 0.0;  // Gauss-equation value at the grid center
  double c_abs = 0.0;         // max |c| on the sample grid
};

namespace detail {

/// Golden-section minimization of a unimodal function on [lo, hi].
inline double golden_min(const std::function<double(double)>& f, double lo, double hi, double xtol = 1e-11) {
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double x1 = b - g * (b - a), x2 = a + g * (b - a);
  double f1 = f(x1), f2 = f(x2);
  while (b - a > xtol * std::max(1.0, std::abs(a) + std::abs(b))) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - g * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + g * (b - a);
      f2 = f(x2);
    }
  }
  return 0.5 * (a + b);
}

/// Coarse scan of n points, then golden section on the bracket around the best.
inline double scan_then_refine(const std::function<double(double)>& f, double lo, double hi, int n = 17) {
  int best = 0;
  double best_val = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    const double x = lo + (hi - lo) * i / (n - 1);
    const double v = f(x);
    if (v < best_val) {
      best_val = v;
      best = i;
    }
  }
  const double step = (hi - lo) / (n - 1);
  return golden_min(f, std::max(lo, lo + (best - 1) * step), std::min(hi, lo + (best + 1) * step));
}

inline double model_isometry_defect(const ModelDescriptor& m, DiffMode mode = DiffMode::ad) {
  CRChartSpec spec = m.spec;
  spec.grid = spec.grid.with_resolution(3);
  const PseudohermitianFrame frame = normalize(spec, mode);
  const ImmersionGeometry g(frame, StructureFunctions{}, *m.immersion);
  return grid_max(spec.grid, mode, [&](EvalContext& ctx) { return isometry_defect(g, ctx); });
}

}  // namespace detail

struct SearchBox {
  double r_lo = 0.5, r_hi = 4.0;
  double s_lo = 0.1, s_hi = 2.0;
};

/// Minimizes the grid-max isometry defect over the family parameters.
/// Families: "sphere" (r, s) and "cylinder" (r).
inline CalibrationResult calibrate(const std::string& family, std::optional<SearchBox> search = std::nullopt) {
  CalibrationResult res;
  res.family = family;
  if (family == "sphere") {
    const SearchBox b = search.value_or(SearchBox{});
    auto inner_r = [&](double s) {
      return detail::scan_then_refine(
          [&](double r) { return detail::model_isometry_defect(sphere(r, s)); }, b.r_lo, b.r_hi, 9);
    };
    auto outer = [&](double s) { return detail::model_isometry_defect(sphere(inner_r(s), s)); };
    const double s = detail::scan_then_refine(outer, b.s_lo, b.s_hi, 9);
    const double r = inner_r(s);
    res.params = {{"r", r}, {"s", s}};
    const ModelDescriptor m = sphere(r, s);
    res.defect = detail::model_isometry_defect(m);
    if (res.defect > 1e-3) throw NoFeasiblePoint("sphere calibration defect " + std::to_string(res.defect));
    const PseudohermitianFrame frame = normalize(m.spec);
    const StructureFunctions fns = structure_functions(frame);
    const ImmersionGeometry g(frame, fns, *m.immersion);
    res.c_abs = field_max_abs(fns.c, m.spec.grid.with_resolution(3), DiffMode::ad);
    res.k_mix = 0.25 - res.c_abs * res.c_abs;
    EvalContext ctx(m.spec.grid.center());
    res.k_mix_oracle = gauss_curvature_term(g, Dir::Z, Dir::T, Dir::T, Dir::Zbar, ctx).real();
    if (std::abs(res.k_mix_oracle - res.k_mix) > 1e-4)
      throw OracleMismatch("calibrated sphere has K_mix " + std::to_string(res.k_mix_oracle) + ", formula gives " +
                           std::to_string(res.k_mix));
    return res;
  }
  if (family == "cylinder") {
    SearchBox b = search.value_or(SearchBox{0.25, 4.0, 1.0, 1.0});
    const double r =
        detail::scan_then_refine([&](double x) { return detail::model_isometry_defect(cylinder(x)); }, b.r_lo, b.r_hi);
    res.params = {{"r", r}};
    const ModelDescriptor m = cylinder(r);
    res.defect = detail::model_isometry_defect(m);
    if (res.defect > 1e-3) throw NoFeasiblePoint("cylinder calibration defect " + std::to_string(res.defect));
    const PseudohermitianFrame frame = normalize(m.spec);
    const StructureFunctions fns = structure_functions(frame);
    res.c_abs = field_max_abs(fns.c, m.spec.grid.with_resolution(3), DiffMode::ad);
    res.k_mix = 0.25 - res.c_abs * res.c_abs;
    const ImmersionGeometry g(frame, fns, *m.immersion);
    EvalContext ctx(m.spec.grid.center());
    res.k_mix_oracle = gauss_curvature_term(g, Dir::Z, Dir::T, Dir::T, Dir::Zbar, ctx).real();
    return res;
  }
  throw std::invalid_argument("calibrate: unknown family '" + family + "'");
}

/// Calibrated members, computed once per process.
inline const CalibrationResult& calibrated(const std::string& family) {
  static std::map<std::string, CalibrationResult> cache;
  auto it = cache.find(family);
  if (it == cache.end()) it = cache.emplace(family, calibrate(family)).first;
  return it->second;
}

inline ModelDescriptor calibrated_sphere() {
  const auto& c = calibrated("sphere");
  return sphere(c.params.at("r"), c.params.at("s"));
}

inline ModelDescriptor calibrated_cylinder() { return cylinder(calibrated("cylinder").params.at("r")); }

inline ModelDescriptor t_lambda(double l1, double l2, double l3) {
  return t_lambda(l1, l2, l3, calibrated_cylinder());
}

}  // namespace crverify
