#pragma once

// Necessary conditions for an associated family, the gate pipeline and the
// sphere/cylinder verdict; plus the finite Killing-field obstruction for T_λ.

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "crverify/chart_calculus.hpp"
#include "crverify/immersion_geometry.hpp"
#include "crverify/pseudohermitian.hpp"
#include "crverify/tolerances.hpp"

namespace crverify {

// ---------------------------------------------------------------------------
// Pointwise measurements

struct GaussDefect {
  double explicit_residual = 0.0;  // max(|Tc̄ − ic̄ + 2bc̄|, |Z̄c̄ − 2iac̄|)
  double raw_residual = 0.0;       // max over · ∈ {T, Z̄} of |⟨A(T,Z),A(Z,·)⟩ − ⟨A(Z,Z),A(T,·)⟩|
  bool consistent = true;          // both vanish or both do not, at the tolerance used
};

inline double explicit_gauss_residual(const PseudohermitianFrame& f, const StructureFunctions& s, EvalContext& ctx) {
  const cplx I(0.0, 1.0);
  const ScalarField cb = conj(s.c);
  const cplx a = s.a.value(ctx), b = s.b.value(ctx), c_bar = cb.value(ctx);
  const cplx e1 = derive(f.T, cb).value(ctx) - I * c_bar + 2.0 * b * c_bar;
  const cplx e2 = derive(f.Zbar, cb).value(ctx) - 2.0 * I * a * c_bar;
  return std::max(std::abs(e1), std::abs(e2));
}

inline double raw_gauss_residual(const ImmersionGeometry& g, EvalContext& ctx) {
  double m = 0.0;
  for (Dir x : {Dir::T, Dir::Zbar}) {
    const cplx r = bilinear(g.A(Dir::T, Dir::Z).value(ctx), g.A(Dir::Z, x).value(ctx)) -
                   bilinear(g.A(Dir::Z, Dir::Z).value(ctx), g.A(Dir::T, x).value(ctx));
    m = std::max(m, std::abs(r));
  }
  return m;
}

inline GaussDefect gauss_defect(const ImmersionGeometry& g, EvalContext& ctx, double tol = 1e-6) {
  GaussDefect d;
  d.explicit_residual = explicit_gauss_residual(g.frame(), g.fns(), ctx);
  d.raw_residual = raw_gauss_residual(g, ctx);
  d.consistent = (d.explicit_residual < tol) == (d.raw_residual < tol);
  return d;
}

inline GaussDefect gauss_defect(const PseudohermitianFrame& frame, const StructureFunctions& fns,
                                const ImmersionSpec& imm, const ChartPoint& p, DiffMode mode = DiffMode::ad,
                                double tol = 1e-6) {
  const ImmersionGeometry g(frame, fns, imm);
  EvalContext ctx(p, mode);
  return gauss_defect(g, ctx, tol);
}

/// Pointwise adaptedness: max(|b − i/2|, |Re c|, |ac|, |Ta − (i/2)a|).
inline double pointwise_adaptedness(const PseudohermitianFrame& f, const StructureFunctions& s, EvalContext& ctx) {
  const cplx I(0.0, 1.0);
  const cplx a = s.a.value(ctx), b = s.b.value(ctx), c = s.c.value(ctx);
  return std::max({std::abs(b - 0.5 * I), std::abs(c.real()), std::abs(a * c),
                   std::abs(derive(f.T, s.a).value(ctx) - 0.5 * I * a)});
}

/// The eight Codazzi identities in an adapted frame, each as (LHS, RHS) with
/// LHS = D_U(A(V,W)).
inline std::array<std::pair<AmbientField, AmbientField>, 8> codazzi_identities(const ImmersionGeometry& g) {
  const ScalarField I(cplx(0.0, 1.0));
  const ScalarField half_i(cplx(0.0, 0.5));
  const ScalarField& a = g.fns().a;
  const ScalarField& c = g.fns().c;
  const ScalarField ab = conj(a), cb = conj(c);
  const auto& Zf = g.first(Dir::Z);
  const auto& Zbf = g.first(Dir::Zbar);
  const auto& Tf = g.first(Dir::T);
  auto s = [&](Dir u, Dir v) -> const AmbientField& { return g.second(u, v); };
  auto lhs = [&](Dir u, Dir v, Dir w) { return g.D(u, g.A(v, w)); };
  AmbientField zero;
  zero.c.assign(static_cast<std::size_t>(g.ambient_dim()), ScalarField(0.0));
  using D = Dir;
  return {{
      {lhs(D::T, D::Z, D::Z), zero},
      {lhs(D::Zbar, D::Z, D::Z),
       ScalarField(2.0) * I * a * s(D::Z, D::Z) + ScalarField(2.0) * a * ab * Zf + I * s(D::T, D::Z)},
      {lhs(D::Z, D::Z, D::T), ScalarField(-1.0) * cb * s(D::T, D::T) +
                                  half_i * (s(D::Z, D::Z) + cb * Tf - I * ab * Zf) +
                                  cb * (s(D::Z, D::Zbar) + half_i * Tf) + I * ab * s(D::T, D::Z)},
      {lhs(D::Zbar, D::Z, D::T), half_i * s(D::T, D::T) + c * (s(D::Z, D::Z) + cb * Tf) -
                                     half_i * (s(D::Z, D::Zbar) + half_i * Tf + I * ab * Zbf) +
                                     I * a * s(D::T, D::Z)},
      {lhs(D::T, D::Z, D::T), zero},
      {lhs(D::Z, D::T, D::T), I * s(D::T, D::Z) + ScalarField(2.0) * cb * s(D::T, D::Zbar)},
      {lhs(D::Z, D::Z, D::Zbar), ScalarField(-1.0) * cb * s(D::T, D::Zbar) - half_i * s(D::T, D::Z)},
      {lhs(D::T, D::Z, D::Zbar), zero},
  }};
}

/// Max over the eight identities of ‖LHS − RHS‖ at the point. NotAdapted when
/// the frame fails the pointwise adaptedness screen.
inline double codazzi_defect(const ImmersionGeometry& g, EvalContext& ctx, double adapted_tol = 1e-6) {
  const double ad = pointwise_adaptedness(g.frame(), g.fns(), ctx);
  if (!(ad <= adapted_tol)) throw NotAdapted("frame adaptedness defect " + std::to_string(ad));
  double m = 0.0;
  for (const auto& [l, r] : codazzi_identities(g)) m = std::max(m, (l.value(ctx) - r.value(ctx)).norm());
  return m;
}

inline double codazzi_defect(const PseudohermitianFrame& frame, const StructureFunctions& fns,
                             const ImmersionSpec& imm, const ChartPoint& p, DiffMode mode = DiffMode::ad,
                             double adapted_tol = 1e-6) {
  const ImmersionGeometry g(frame, fns, imm);
  EvalContext ctx(p, mode);
  return codazzi_defect(g, ctx, adapted_tol);
}

struct ParallelismDefects {
  double DA = 0.0, DH = 0.0, ricci = 0.0;
};

inline ParallelismDefects parallelism_defects(const ImmersionGeometry& g, EvalContext& ctx) {
  ParallelismDefects d;
  for (Dir u : kDirs)
    for (Dir v : kDirs)
      for (Dir w : kDirs) d.DA = std::max(d.DA, g.covariant_A(u, v, w).value(ctx).norm());
  const AmbientField H = g.mean_curvature();
  for (Dir u : kDirs) d.DH = std::max(d.DH, g.D(u, H).value(ctx).norm());
  for (const auto& xi : g.normal_basis()) {
    d.ricci = std::max(d.ricci, g.normal_curvature(Dir::Z, Dir::T, xi).value(ctx).norm());
    const Eigen::Matrix3cd M = g.shape_operator(xi.value(ctx), ctx);
    // A(A_ξ Z, T) − A(Z, A_ξ T) with A_ξ E_i = Σ_j M(j,i) E_j
    AmbientVector r = AmbientVector::Zero(g.ambient_dim());
    for (int j = 0; j < 3; ++j) {
      r += M(j, 0) * g.A(kDirs[j], Dir::T).value(ctx);
      r -= M(j, 2) * g.A(Dir::Z, kDirs[j]).value(ctx);
    }
    d.ricci = std::max(d.ricci, r.norm());
  }
  return d;
}

inline ParallelismDefects parallelism_defects(const PseudohermitianFrame& frame, const StructureFunctions& fns,
                                              const ImmersionSpec& imm, const ChartPoint& p,
                                              DiffMode mode = DiffMode::ad) {
  const ImmersionGeometry g(frame, fns, imm);
  g.check_rank_stable(p, mode);
  EvalContext ctx(p, mode);
  return parallelism_defects(g, ctx);
}

struct SectionalCurvatures {
  double K_H = 0.0;    // K(Z, Z̄)
  double K_mix = 0.0;  // K(Z, T)
};

/// K_mix = 1/4 − |c|², K_H = |c|² − 1/4 − 2|a|² + iZa − iZ̄ā.
inline SectionalCurvatures sectional_formula(const PseudohermitianFrame& f, const StructureFunctions& s,
                                             EvalContext& ctx) {
  const cplx I(0.0, 1.0);
  const cplx a = s.a.value(ctx), c = s.c.value(ctx);
  const cplx Za = derive(f.Z, s.a).value(ctx);
  const cplx Zbab = derive(f.Zbar, conj(s.a)).value(ctx);
  SectionalCurvatures k;
  k.K_mix = 0.25 - std::norm(c);
  k.K_H = (std::norm(c) - 0.25 - 2.0 * std::norm(a) + I * Za - I * Zbab).real();
  return k;
}

/// K(U,V) = ⟨A(V,V̄),A(U,Ū)⟩ − ⟨A(U,V̄),A(V,Ū)⟩ for (Z,Z̄) and (Z,T).
inline SectionalCurvatures sectional_gauss_oracle(const ImmersionGeometry& g, EvalContext& ctx) {
  SectionalCurvatures k;
  k.K_H = gauss_curvature_term(g, Dir::Z, Dir::Zbar, Dir::Z, Dir::Zbar, ctx).real();
  k.K_mix = gauss_curvature_term(g, Dir::Z, Dir::T, Dir::T, Dir::Zbar, ctx).real();
  return k;
}

/// The same sectional curvatures from coordinate Christoffel symbols.
inline SectionalCurvatures sectional_intrinsic(const PseudohermitianFrame& f, EvalContext& ctx) {
  const WebsterMetric g(f);
  SectionalCurvatures k;
  k.K_H = g.riemann(f.Z, f.Zbar, f.Z, f.Zbar, ctx).real();
  k.K_mix = g.riemann(f.Z, f.T, f.T, f.Zbar, ctx).real();
  return k;
}

/// Formula values; with an immersion each is checked against the Gauss oracle.
inline SectionalCurvatures sectional_curvatures(const PseudohermitianFrame& frame, const StructureFunctions& fns,
                                                const std::optional<ImmersionSpec>& imm, const ChartPoint& p,
                                                DiffMode mode = DiffMode::ad, double tol = 1e-5) {
  EvalContext ctx(p, mode);
  const SectionalCurvatures k = sectional_formula(frame, fns, ctx);
  if (imm) {
    const ImmersionGeometry g(frame, fns, *imm);
    const SectionalCurvatures o = sectional_gauss_oracle(g, ctx);
    const double d = std::max(std::abs(k.K_H - o.K_H), std::abs(k.K_mix - o.K_mix));
    if (!(d <= tol))
      throw OracleMismatch("sectional curvature formula differs from the Gauss oracle by " + std::to_string(d));
  }
  return k;
}

/// Max over frame 4-tuples of |⟨A(r_φU,r_φV),A(r_φW,r_φX)⟩ − ⟨A(U,V),A(W,X)⟩|
/// with r_φZ = e^{iφ}Z, r_φZ̄ = e^{−iφ}Z̄, r_φT = T.
inline double rotation_congruence_defect(const ImmersionGeometry& g, double phi, EvalContext& ctx) {
  auto weight = [](Dir d) { return d == Dir::Z ? 1 : d == Dir::Zbar ? -1 : 0; };
  std::array<std::array<AmbientVector, 3>, 3> A;
  for (Dir u : kDirs)
    for (Dir v : kDirs) A[static_cast<int>(u)][static_cast<int>(v)] = g.A(u, v).value(ctx);
  double m = 0.0;
  for (Dir u : kDirs)
    for (Dir v : kDirs)
      for (Dir w : kDirs)
        for (Dir x : kDirs) {
          const int k = weight(u) + weight(v) + weight(w) + weight(x);
          if (k == 0) continue;
          const cplx base = bilinear(A[static_cast<int>(u)][static_cast<int>(v)],
                                     A[static_cast<int>(w)][static_cast<int>(x)]);
          m = std::max(m, std::abs((std::polar(1.0, k * phi) - 1.0) * base));
        }
  return m;
}

inline double rotation_congruence_defect(const PseudohermitianFrame& frame, const StructureFunctions& fns,
                                         const ImmersionSpec& imm, double phi, const ChartPoint& p,
                                         DiffMode mode = DiffMode::ad) {
  const ImmersionGeometry g(frame, fns, imm);
  EvalContext ctx(p, mode);
  return rotation_congruence_defect(g, phi, ctx);
}

// ---------------------------------------------------------------------------
// Reports and the verdict

enum class CheckStatus { pass, fail, skipped, error };

inline const char* to_string(CheckStatus s) {
  switch (s) {
    case CheckStatus::pass: return "pass";
    case CheckStatus::fail: return "fail";
    case CheckStatus::skipped: return "skipped";
    case CheckStatus::error: return "error";
  }
  return "?";
}

struct CheckResult {
  std::string name;
  double defect = 0.0;
  double tolerance = 0.0;
  CheckStatus status = CheckStatus::skipped;
  std::string message;
  std::vector<double> samples;  // per grid point for pointwise checks
};

/// Every check in pipeline order; each appears exactly once in a report.
inline const std::vector<std::string>& check_names() {
  static const std::vector<std::string> names{
      "levi_normalization", "reeb_residual", "structure_expansion", "jacobi",       "frame_change",
      "adaptedness",        "isometry",      "first_order_identities", "second_form_modes", "gauss",
      "codazzi",            "parallel_A",    "parallel_H",          "ricci",        "curvature_oracle",
      "rotation_congruence", "affine_image"};
  return names;
}

inline double tolerance_for(const std::string& name, const Tolerances& t) {
  static const std::map<std::string, double Tolerances::*> table{
      {"levi_normalization", &Tolerances::levi},
      {"reeb_residual", &Tolerances::reeb},
      {"structure_expansion", &Tolerances::structure},
      {"jacobi", &Tolerances::jacobi},
      {"frame_change", &Tolerances::frame_change},
      {"adaptedness", &Tolerances::adapted},
      {"isometry", &Tolerances::isometry},
      {"first_order_identities", &Tolerances::identities},
      {"second_form_modes", &Tolerances::modes},
      {"gauss", &Tolerances::gauss},
      {"codazzi", &Tolerances::codazzi},
      {"parallel_A", &Tolerances::parallel},
      {"parallel_H", &Tolerances::parallel},
      {"ricci", &Tolerances::parallel},
      {"curvature_oracle", &Tolerances::curvature},
      {"rotation_congruence", &Tolerances::congruence},
      {"affine_image", &Tolerances::affine},
  };
  return t.*table.at(name);
}

struct CheckReport {
  std::string scene;
  DiffMode mode = DiffMode::ad;
  bool has_immersion = false;
  double phi = std::numbers::pi / 4;
  std::vector<ChartPoint> points;
  std::vector<CheckResult> checks;
  std::map<std::string, double> measurements;

  std::size_t grid_size() const { return points.size(); }

  const CheckResult& at(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return c;
    throw std::out_of_range("no check named " + name);
  }
  CheckResult& at(const std::string& name) {
    return const_cast<CheckResult&>(static_cast<const CheckReport&>(*this).at(name));
  }
  double measurement(const std::string& key) const {
    auto it = measurements.find(key);
    return it == measurements.end() ? std::numeric_limits<double>::quiet_NaN() : it->second;
  }
};

enum class VerdictKind { sphere_type, flat_cylinder_type, rejected };

inline const char* to_string(VerdictKind k) {
  switch (k) {
    case VerdictKind::sphere_type: return "SphereType";
    case VerdictKind::flat_cylinder_type: return "FlatCylinderType";
    case VerdictKind::rejected: return "Rejected";
  }
  return "?";
}

struct Verdict {
  VerdictKind kind = VerdictKind::rejected;
  std::string reason;
  double c_abs = 0.0;
  double K_H = 0.0;
  double K_mix = 0.0;
  double rotation_defect = 0.0;

  std::string describe() const {
    return kind == VerdictKind::rejected ? std::string("Rejected(\"") + reason + "\")" : to_string(kind);
  }
};

namespace detail {

inline std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

}  // namespace detail

/// Whether a check clears `tol`; skipped checks do not block, errors do.
inline bool check_passes(const CheckReport& report, const std::string& name, const Tolerances& tol) {
  const CheckResult& c = report.at(name);
  if (c.status == CheckStatus::skipped) return true;
  if (c.status == CheckStatus::error) return false;
  return c.defect < tolerance_for(name, tol);
}

/// Verdict from the report's defects and the given tolerances. Gates in
/// order: isometry, structure functions, Gauss, Codazzi, parallelism,
/// curvature screen, rotation congruence, then the sphere/cylinder split.
inline Verdict classify(const CheckReport& report, const Tolerances& tol) {
  Verdict v;
  v.c_abs = report.measurement("c_abs_max");
  v.K_H = report.measurement("K_H_min");
  v.K_mix = report.measurement("K_mix_min");
  v.rotation_defect = report.measurement("rotation_defect");
  auto passes = [&](const std::string& name) { return check_passes(report, name, tol); };
  auto reject = [&](std::string reason) {
    v.kind = VerdictKind::rejected;
    v.reason = std::move(reason);
    return v;
  };
  for (const char* n : {"isometry", "first_order_identities", "second_form_modes"})
    if (!passes(n)) return reject(std::string("isometry fails (") + n + ")");
  for (const char* n : {"levi_normalization", "reeb_residual", "structure_expansion", "jacobi", "frame_change",
                        "adaptedness"})
    if (!passes(n)) return reject(std::string("structure functions fail (") + n + ")");
  if (!passes("gauss")) return reject("Gauss equation fails");
  if (!passes("codazzi")) return reject("Codazzi equations fail");
  for (const char* n : {"parallel_A", "parallel_H", "ricci"})
    if (!passes(n)) return reject(std::string("parallelism fails (") + n + ")");
  if (!passes("curvature_oracle")) return reject("curvature oracle mismatch");
  if (v.K_H < -tol.curvature) return reject("negative horizontal curvature " + detail::fmt(v.K_H));
  if (v.K_mix < -tol.curvature) return reject("negative mixed curvature " + detail::fmt(v.K_mix));
  const double c_min = report.measurement("c_abs_min");
  if ((v.c_abs > 0.1 && v.c_abs < 0.4) || (c_min > 0.1 && c_min < 0.4) || (c_min < 0.1 && v.c_abs > 0.4))
    return reject("c neither 0 nor 1/2");
  if (!passes("rotation_congruence")) return reject("rotation congruence fails");
  const double kh_max = report.measurement("K_H_max"), kmix_max = report.measurement("K_mix_max");
  if (v.c_abs < 0.1) {
    const double dev = std::max({std::abs(v.K_H - 0.25), std::abs(kh_max - 0.25), std::abs(v.K_mix - 0.25),
                                 std::abs(kmix_max - 0.25)});
    if (!(dev < tol.curvature)) return reject("sphere curvature pattern fails (K != 1/4)");
    v.kind = VerdictKind::sphere_type;
    return v;
  }
  const double dev = std::max({std::abs(v.K_H), std::abs(kh_max), std::abs(v.K_mix), std::abs(kmix_max)});
  if (!(dev < tol.curvature)) return reject("flat curvature pattern fails (K != 0)");
  if (!passes("affine_image")) return reject("non-affine flat image");
  v.kind = VerdictKind::flat_cylinder_type;
  return v;
}

// ---------------------------------------------------------------------------
// The gate pipeline

struct PipelineInput {
  std::string name;
  CRChartSpec spec;
  ScalarField v;  // frame change to an adapted frame
  std::optional<ImmersionSpec> immersion;
  DiffMode mode = DiffMode::ad;
  Tolerances tol;
  double phi = std::numbers::pi / 4;
  bool keep_samples = false;
};

struct PipelineResult {
  CheckReport report;
  Verdict verdict;
};

namespace detail {

class PointwiseCheck {
 public:
  PointwiseCheck(CheckResult& r, bool keep, std::size_t n) : r_(r), keep_(keep) {
    r_.status = CheckStatus::pass;
    if (keep_) r_.samples.assign(n, std::numeric_limits<double>::quiet_NaN());
  }

  template <class F>
  void measure(std::size_t i, F&& f) {
    if (r_.status == CheckStatus::error) return;
    try {
      const double d = f();
      r_.defect = std::max(r_.defect, std::isnan(d) ? std::numeric_limits<double>::infinity() : d);
      if (keep_) r_.samples[i] = d;
    } catch (const Error& e) {
      r_.status = CheckStatus::error;
      r_.message = e.what();
    }
  }

 private:
  CheckResult& r_;
  bool keep_;
};

inline void finalize(CheckResult& r) {
  if (r.status == CheckStatus::pass && !(r.defect < r.tolerance)) r.status = CheckStatus::fail;
}

}  // namespace detail

inline PipelineResult run_pipeline(const PipelineInput& in) {
  PipelineResult out;
  CheckReport& rep = out.report;
  rep.scene = in.name;
  rep.mode = in.mode;
  rep.phi = in.phi;
  rep.has_immersion = in.immersion.has_value();
  rep.points = in.spec.grid.points();
  for (const auto& n : check_names()) {
    CheckResult r;
    r.name = n;
    r.tolerance = tolerance_for(n, in.tol);
    rep.checks.push_back(std::move(r));
  }
  const DiffMode mode = in.mode;
  const std::size_t np = rep.points.size();

  const PseudohermitianFrame f0 = normalize(in.spec, mode, std::max(in.tol.structure, 1e-8));
  rep.measurements["levi_sign_flipped"] = f0.sign_flipped ? 1.0 : 0.0;
  const double inf = std::numeric_limits<double>::infinity();
  const StructureFunctions s0 = structure_functions(f0, mode, inf);
  const FrameChange fc = change_frame(f0, s0, in.v, mode, inf, inf);
  const PseudohermitianFrame& f1 = fc.frame;
  const StructureFunctions& s1 = fc.fns;

  auto set = [&](const std::string& name, double d) {
    CheckResult& r = rep.at(name);
    r.status = CheckStatus::pass;
    r.defect = d;
    detail::finalize(r);
  };
  set("levi_normalization", levi_normalization_defect(f0, mode));
  set("reeb_residual", reeb_residual(f0, mode));
  set("structure_expansion", std::max(s0.max_residual, s1.max_residual));
  set("frame_change", fc.mismatch);
  set("adaptedness", adaptedness_defect(f1, s1, mode));

  std::optional<ImmersionGeometry> geo;
  if (in.immersion) geo.emplace(f1, s1, *in.immersion);
  const bool imm = geo.has_value();
  const bool keep = in.keep_samples;
  const bool adapted = rep.at("adaptedness").status == CheckStatus::pass;

  detail::PointwiseCheck jacobi(rep.at("jacobi"), keep, np);
  detail::PointwiseCheck gauss(rep.at("gauss"), keep, np);
  detail::PointwiseCheck curv(rep.at("curvature_oracle"), keep, np);
  std::optional<detail::PointwiseCheck> iso, ids, modes, codazzi, pA, pH, ricci, rot, affine;
  if (imm) {
    iso.emplace(rep.at("isometry"), keep, np);
    ids.emplace(rep.at("first_order_identities"), keep, np);
    modes.emplace(rep.at("second_form_modes"), keep, np);
    codazzi.emplace(rep.at("codazzi"), keep, np);
    pA.emplace(rep.at("parallel_A"), keep, np);
    pH.emplace(rep.at("parallel_H"), keep, np);
    ricci.emplace(rep.at("ricci"), keep, np);
    rot.emplace(rep.at("rotation_congruence"), keep, np);
    affine.emplace(rep.at("affine_image"), keep, np);
    if (!adapted) {
      CheckResult& c = rep.at("codazzi");
      c.status = CheckStatus::error;
      c.message = "NotAdapted: frame fails the adaptedness screen";
    }
  } else {
    for (const char* n : {"isometry", "first_order_identities", "second_form_modes", "codazzi", "parallel_A",
                          "parallel_H", "ricci", "rotation_congruence", "affine_image"})
      rep.at(n).message = "no immersion";
  }

  double c_max = 0.0, c_min = inf, kh_min = inf, kh_max = -inf, km_min = inf, km_max = -inf;
  double g_explicit = 0.0, g_raw = 0.0;
  bool g_consistent = true;
  for (std::size_t i = 0; i < np; ++i) {
    EvalContext ctx(rep.points[i], mode);
    jacobi.measure(i, [&] {
      const auto [d1, d2] = jacobi_defect(f0, s0, ctx);
      return std::max(d1, d2);
    });
    const double cabs = std::abs(s1.c.value(ctx));
    c_max = std::max(c_max, cabs);
    c_min = std::min(c_min, cabs);
    const SectionalCurvatures k = sectional_formula(f1, s1, ctx);
    kh_min = std::min(kh_min, k.K_H);
    kh_max = std::max(kh_max, k.K_H);
    km_min = std::min(km_min, k.K_mix);
    km_max = std::max(km_max, k.K_mix);
    gauss.measure(i, [&] {
      const double e = explicit_gauss_residual(f1, s1, ctx);
      g_explicit = std::max(g_explicit, e);
      if (!imm) return e;
      const double r = raw_gauss_residual(*geo, ctx);
      g_raw = std::max(g_raw, r);
      g_consistent = g_consistent && ((e < in.tol.gauss) == (r < in.tol.gauss));
      return std::max(e, r);
    });
    curv.measure(i, [&] {
      const SectionalCurvatures o = imm ? sectional_gauss_oracle(*geo, ctx) : sectional_intrinsic(f1, ctx);
      return std::max(std::abs(k.K_H - o.K_H), std::abs(k.K_mix - o.K_mix));
    });
    if (!imm) continue;
    const ImmersionGeometry& g = *geo;
    iso->measure(i, [&] { return isometry_defect(g, ctx); });
    ids->measure(i, [&] { return first_order_identities_defect(g, ctx); });
    modes->measure(i, [&] { return second_form_mode_defect(g, ctx); });
    if (adapted) codazzi->measure(i, [&] { return codazzi_defect(g, ctx, in.tol.adapted); });
    const auto rank_guard = [&](auto&& fn) {
      return [&, fn] {
        g.check_rank_stable(rep.points[i], mode);
        return fn();
      };
    };
    std::optional<ParallelismDefects> par;
    auto par_of = [&]() -> const ParallelismDefects& {
      if (!par) par = parallelism_defects(g, ctx);
      return *par;
    };
    pA->measure(i, rank_guard([&] { return par_of().DA; }));
    pH->measure(i, rank_guard([&] { return par_of().DH; }));
    ricci->measure(i, rank_guard([&] { return par_of().ricci; }));
    rot->measure(i, [&] { return rotation_congruence_defect(g, in.phi, ctx); });
    affine->measure(i, [&] {
      double m = 0.0;
      for (Dir u : kDirs)
        for (Dir v : kDirs) m = std::max(m, g.A(u, v).value(ctx).norm());
      return m;
    });
  }
  for (auto& r : rep.checks)
    if (r.status != CheckStatus::skipped) detail::finalize(r);

  rep.measurements["c_abs_max"] = c_max;
  rep.measurements["c_abs_min"] = c_min;
  rep.measurements["K_H_min"] = kh_min;
  rep.measurements["K_H_max"] = kh_max;
  rep.measurements["K_mix_min"] = km_min;
  rep.measurements["K_mix_max"] = km_max;
  rep.measurements["gauss_explicit"] = g_explicit;
  if (imm) {
    rep.measurements["gauss_raw"] = g_raw;
    rep.measurements["gauss_consistent"] = g_consistent ? 1.0 : 0.0;
    rep.measurements["rotation_defect"] = rep.at("rotation_congruence").defect;
  }
  out.verdict = classify(rep, in.tol);
  return out;
}

// ---------------------------------------------------------------------------
// Killing obstruction for T_λ

/// Dimension of the space of skew maps B of ℝ⁶ (with factors μ_k) satisfying
/// G_k B − B G_k = μ_k G_k for the three diagonal forms and B o = 0; a factor
/// with λ_j = 0 is a line, whose in-plane rotation B_{2j−1,2j} is excluded.
inline int killing_obstruction(double l1, double l2, double l3, double threshold = 1e-10) {
  if (!(l2 > 0)) throw HypothesisViolated("killing obstruction requires lambda2 > 0");
  if (!(0 <= l1 && l1 <= l2 && l2 <= l3)) throw HypothesisViolated("killing obstruction requires 0 <= l1 <= l2 <= l3");
  const std::array<double, 3> lam{l1, l2, l3};
  std::array<std::array<double, 6>, 3> G;
  for (int k = 0; k < 3; ++k)
    for (int j = 0; j < 3; ++j) G[k][2 * j] = G[k][2 * j + 1] = (j == k ? -2.0 : 1.0) * lam[j];
  std::array<double, 6> o{};
  for (int j = 0; j < 3; ++j) o[2 * j + 1] = lam[j] > 0 ? 1.0 / lam[j] : 0.0;

  int var[6][6];
  int nv = 0;
  for (int i = 0; i < 6; ++i)
    for (int j = i + 1; j < 6; ++j) var[i][j] = nv++;
  const int unknowns = nv + 3;
  // B_ij as (variable, sign)
  auto entry = [&](int i, int j) -> std::pair<int, double> {
    if (i == j) return {-1, 0.0};
    return i < j ? std::pair{var[i][j], 1.0} : std::pair{var[j][i], -1.0};
  };
  std::vector<Eigen::VectorXd> rows;
  for (int k = 0; k < 3; ++k) {
    for (int i = 0; i < 6; ++i) {
      for (int j = 0; j < 6; ++j) {
        Eigen::VectorXd r = Eigen::VectorXd::Zero(unknowns);
        // (G B − B G)_ij = (g_i − g_j) B_ij
        const auto [v, s] = entry(i, j);
        if (v >= 0) r(v) += s * (G[k][i] - G[k][j]);
        if (i == j) r(nv + k) -= G[k][i];
        if (r.norm() > 0) rows.push_back(r);
      }
    }
  }
  for (int i = 0; i < 6; ++i) {
    Eigen::VectorXd r = Eigen::VectorXd::Zero(unknowns);
    for (int j = 0; j < 6; ++j) {
      const auto [v, s] = entry(i, j);
      if (v >= 0) r(v) += s * o[j];
    }
    if (r.norm() > 0) rows.push_back(r);
  }
  for (int j = 0; j < 3; ++j) {
    if (lam[j] > 0) continue;
    Eigen::VectorXd r = Eigen::VectorXd::Zero(unknowns);
    r(var[2 * j][2 * j + 1]) = 1.0;
    rows.push_back(r);
  }
  Eigen::MatrixXd M(static_cast<Eigen::Index>(std::max<std::size_t>(rows.size(), unknowns)), unknowns);
  M.setZero();
  for (std::size_t r = 0; r < rows.size(); ++r) M.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
  const auto s = svd.singularValues();
  int rank = 0;
  for (Eigen::Index k = 0; k < s.size(); ++k)
    if (s(k) > threshold) ++rank;
  return unknowns - rank;
}

}  // namespace crverify
