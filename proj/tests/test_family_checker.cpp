#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "crverify/family_checker.hpp"
#include "crverify/models.hpp"

using namespace crverify;

namespace {

const double pi = std::numbers::pi;

struct Adapted {
  PseudohermitianFrame frame;
  StructureFunctions fns;
  std::optional<ImmersionSpec> imm;
  GridBox grid;
};

Adapted adapted(const ModelDescriptor& m) {
  const auto f = normalize(m.spec);
  const auto s = structure_functions(f);
  auto fc = change_frame(f, s, m.v);
  return {std::move(fc.frame), std::move(fc.fns), m.immersion, m.spec.grid};
}

PipelineResult pipeline(const ModelDescriptor& m, DiffMode mode = DiffMode::ad) {
  PipelineInput in;
  in.name = m.name;
  in.spec = m.spec;
  in.v = m.v;
  in.immersion = m.immersion;
  in.mode = mode;
  in.tol = Tolerances::defaults(mode);
  return run_pipeline(in);
}

// sphere(2, 1/2) and cylinder(1) are the calibrated members.
ModelDescriptor sph() { return sphere(2.0, 0.5); }
ModelDescriptor cyl() { return cylinder(1.0); }

std::vector<ChartPoint> coarse(const GridBox& g) { return g.with_resolution(3).points(); }

}  // namespace

TEST(Gauss, VanishesWhenCIsZero) {
  const auto a = adapted(sph());
  for (const auto& p : coarse(a.grid)) {
    const auto d = gauss_defect(a.frame, a.fns, *a.imm, p);
    EXPECT_LT(d.explicit_residual, 1e-14);
    EXPECT_LT(d.raw_residual, 1e-14);
    EXPECT_TRUE(d.consistent);
  }
}

TEST(Gauss, CylinderAdaptedFrameCancels) {
  const auto a = adapted(cyl());
  for (const auto& p : a.grid.points()) {
    const auto d = gauss_defect(a.frame, a.fns, *a.imm, p);
    EXPECT_LT(std::max(d.explicit_residual, d.raw_residual), 1e-6);
    EXPECT_TRUE(d.consistent);
  }
}

TEST(Gauss, CorruptedTorsionRegression) {
  auto a = adapted(cyl());
  a.fns.c = a.fns.c * exp(coordinate(2));
  double worst = 0.0;
  for (const auto& p : a.grid.points()) {
    const auto d = gauss_defect(a.frame, a.fns, *a.imm, p);
    worst = std::max(worst, d.explicit_residual);
    EXPECT_LT(d.raw_residual, 1e-6);  // the immersion itself is untouched
  }
  EXPECT_GT(worst, 0.4);
}

TEST(Codazzi, ModelsSatisfyAllEight) {
  for (const auto& m : {sph(), cyl(), t_lambda(0, 0, 1, cyl())}) {
    const auto a = adapted(m);
    for (const auto& p : a.grid.points()) EXPECT_LT(codazzi_defect(a.frame, a.fns, *a.imm, p), 1e-5) << m.name;
  }
  const auto a = adapted(t_lambda(0, 0, 0, cyl()));
  for (const auto& p : a.grid.points()) EXPECT_LT(codazzi_defect(a.frame, a.fns, *a.imm, p), 1e-8);
}

TEST(Codazzi, EachIdentityOnSphere) {
  const auto a = adapted(sph());
  const ImmersionGeometry g(a.frame, a.fns, *a.imm);
  const auto ids = codazzi_identities(g);
  for (const auto& p : coarse(a.grid)) {
    EvalContext ctx(p);
    for (std::size_t k = 0; k < ids.size(); ++k)
      EXPECT_LT((ids[k].first.value(ctx) - ids[k].second.value(ctx)).norm(), 1e-5) << "identity " << k;
  }
}

TEST(Codazzi, UnadaptedFrameIsRejected) {
  const auto m = sph();
  const auto f = normalize(m.spec);
  const auto s = structure_functions(f);
  EXPECT_THROW(codazzi_defect(f, s, *m.immersion, m.spec.grid.center()), NotAdapted);
}

TEST(Parallelism, SymmetricModels) {
  for (const auto& m : {sph(), t_lambda(0, 0, 1, cyl())}) {
    const auto a = adapted(m);
    for (const auto& p : coarse(a.grid)) {
      const auto d = parallelism_defects(a.frame, a.fns, *a.imm, p);
      EXPECT_LT(d.DA, 1e-5) << m.name;
      EXPECT_LT(d.DH, 1e-5) << m.name;
      EXPECT_LT(d.ricci, 1e-5) << m.name;
    }
  }
}

TEST(Parallelism, PropagatesRankDrop) {
  const auto m = flatten(cyl());
  auto a = adapted(m);
  const double c1 = m.spec.grid.center()[0];
  a.imm->f.push_back(make_field([c1](const auto& u) { return (u[0] - c1) * (u[0] - c1) * (u[0] - c1); }));
  a.imm->n = 4;
  EXPECT_THROW(parallelism_defects(a.frame, a.fns, *a.imm, m.spec.grid.center()), RankDrop);
}

TEST(Pipeline, ShearedSphereFailsIsometryFirst) {
  auto m = sph();
  // compose with the non-isometric shear x1 ↦ x1 + 0.3 x2
  m.immersion->f[0] = m.immersion->f[0] + ScalarField(0.3) * m.immersion->f[1];
  const auto r = pipeline(m);
  EXPECT_EQ(r.verdict.kind, VerdictKind::rejected);
  EXPECT_EQ(r.verdict.reason.rfind("isometry fails", 0), 0u) << r.verdict.reason;
}

TEST(Sectional, Cylinder) {
  const auto a = adapted(cyl());
  for (const auto& p : coarse(a.grid)) {
    const auto k = sectional_curvatures(a.frame, a.fns, a.imm, p);
    EXPECT_NEAR(k.K_H, 0.0, 1e-5);
    EXPECT_NEAR(k.K_mix, 0.0, 1e-5);
  }
}

TEST(Sectional, Sphere) {
  const auto a = adapted(sph());
  for (const auto& p : coarse(a.grid)) {
    const auto k = sectional_curvatures(a.frame, a.fns, a.imm, p);
    EXPECT_NEAR(k.K_mix, 0.25, 1e-6);
    EXPECT_NEAR(k.K_H, 0.25, 1e-5);
  }
}

TEST(Sectional, HeisenbergNormalizedFrame) {
  const auto m = heisenberg();
  const auto f = normalize(m.spec);
  const auto s = structure_functions(f);
  for (const auto& p : coarse(m.spec.grid)) {
    const auto k = sectional_curvatures(f, s, std::nullopt, p);
    EXPECT_NEAR(k.K_H, -0.25, 1e-6);
    EXPECT_NEAR(k.K_mix, 0.25, 1e-6);
  }
}

TEST(Sectional, IntrinsicOracleInAdaptedFrame) {
  // the formula with the a-dependent terms matches the Christoffel curvature
  for (const auto& m : {heisenberg(), sph(), cyl()}) {
    const auto a = adapted(m);
    for (const auto& p : coarse(a.grid)) {
      EvalContext ctx(p);
      const auto k = sectional_formula(a.frame, a.fns, ctx);
      const auto o = sectional_intrinsic(a.frame, ctx);
      EXPECT_NEAR(k.K_H, o.K_H, 1e-5) << m.name;
      EXPECT_NEAR(k.K_mix, o.K_mix, 1e-5) << m.name;
    }
  }
}

TEST(Sectional, OracleMismatchOnWrongImmersion) {
  const auto a = adapted(sph());
  EXPECT_THROW(sectional_curvatures(a.frame, a.fns, sphere(3.0, 0.5).immersion, a.grid.center()), OracleMismatch);
}

TEST(Rotation, IdentityAtZero) {
  for (const auto& m : {sph(), cyl(), t_lambda(0, 0, 1, cyl())}) {
    const auto a = adapted(m);
    for (const auto& p : coarse(a.grid)) EXPECT_EQ(rotation_congruence_defect(a.frame, a.fns, *a.imm, 0.0, p), 0.0);
  }
}

TEST(Rotation, SphereIsCongruent) {
  const auto a = adapted(sph());
  for (const auto& p : a.grid.points()) EXPECT_LT(rotation_congruence_defect(a.frame, a.fns, *a.imm, pi / 3, p), 1e-7);
}

TEST(Rotation, CylinderBaseline) {
  const auto a = adapted(cyl());
  double worst = 0.0;
  for (const auto& p : a.grid.points())
    worst = std::max(worst, rotation_congruence_defect(a.frame, a.fns, *a.imm, pi / 4, p));
  EXPECT_GT(worst, 0.05);
  // ⟨A(Z,Z),A(Z,Z)⟩ picks up e^{4iφ} − 1 = −2 at φ = π/4
  EXPECT_NEAR(worst, 0.5, 1e-9);
}

TEST(Rotation, PeriodicInPhi) {
  const auto a = adapted(t_lambda(0, 0, 1, cyl()));
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> d(-pi, pi);
  const ChartPoint p = a.grid.center();
  for (int k = 0; k < 10; ++k) {
    const double phi = d(rng);
    const double x = rotation_congruence_defect(a.frame, a.fns, *a.imm, phi, p);
    EXPECT_NEAR(rotation_congruence_defect(a.frame, a.fns, *a.imm, phi + 2 * pi, p), x, 1e-12);
    EXPECT_NEAR(rotation_congruence_defect(a.frame, a.fns, *a.imm, phi - 2 * pi, p), x, 1e-12);
  }
}

TEST(Report, EveryCheckOnce) {
  const auto r = pipeline(cyl());
  std::multiset<std::string> names;
  for (const auto& c : r.report.checks) names.insert(c.name);
  for (const auto& n : check_names()) EXPECT_EQ(names.count(n), 1u) << n;
  EXPECT_EQ(names.size(), check_names().size());
  for (const auto& c : r.report.checks) {
    EXPECT_GE(c.defect, 0.0);
    if (c.status == CheckStatus::pass || c.status == CheckStatus::fail)
      EXPECT_EQ(c.status == CheckStatus::pass, c.defect < c.tolerance) << c.name;
  }
  EXPECT_EQ(r.report.grid_size(), 125u);
}

TEST(Report, IntrinsicModeSkipsImmersionChecks) {
  const auto r = pipeline(heisenberg());
  for (const char* n : {"isometry", "codazzi", "parallel_A", "rotation_congruence", "affine_image"})
    EXPECT_EQ(r.report.at(n).status, CheckStatus::skipped) << n;
  EXPECT_EQ(r.report.at("curvature_oracle").status, CheckStatus::pass);
}

TEST(Report, UnadaptedFrameMakesCodazziAnError) {
  auto m = sph();
  m.v = ScalarField(0.0);
  const auto r = pipeline(m);
  EXPECT_EQ(r.report.at("codazzi").status, CheckStatus::error);
  EXPECT_EQ(r.verdict.reason.rfind("structure functions fail (adaptedness)", 0), 0u) << r.verdict.reason;
}

TEST(Classify, ModelVerdicts) {
  EXPECT_EQ(pipeline(sph()).verdict.kind, VerdictKind::sphere_type);
  EXPECT_EQ(pipeline(flatten(cyl())).verdict.kind, VerdictKind::flat_cylinder_type);
  EXPECT_EQ(pipeline(cyl()).verdict.describe(), "Rejected(\"rotation congruence fails\")");
  const auto h = pipeline(heisenberg()).verdict;
  EXPECT_EQ(h.describe(), "Rejected(\"negative horizontal curvature -0.75\")");
}

TEST(Classify, PureAndDeterministic) {
  const auto r = pipeline(cyl());
  const auto tol = Tolerances::defaults(DiffMode::ad);
  const Verdict v1 = classify(r.report, tol), v2 = classify(r.report, tol);
  EXPECT_EQ(v1.describe(), r.verdict.describe());
  EXPECT_EQ(v1.describe(), v2.describe());
  EXPECT_EQ(v1.c_abs, v2.c_abs);
}

TEST(Classify, TorsionDeadZone) {
  auto r = pipeline(flatten(cyl())).report;
  r.measurements["c_abs_max"] = 0.25;
  r.measurements["c_abs_min"] = 0.25;
  EXPECT_EQ(classify(r, Tolerances{}).describe(), "Rejected(\"c neither 0 nor 1/2\")");
}

TEST(Classify, NonAffineFlatImage) {
  auto r = pipeline(flatten(cyl())).report;
  r.at("affine_image").defect = 0.3;
  EXPECT_EQ(classify(r, Tolerances{}).describe(), "Rejected(\"non-affine flat image\")");
}

TEST(Classify, LooseningNeverTurnsPassIntoFail) {
  for (const auto& m : {sph(), cyl(), t_lambda(0, 0, 1, cyl())}) {
    const auto r = pipeline(m).report;
    Tolerances tight;
    for (double scale : {1.0, 10.0, 1e3, 1e6}) {
      Tolerances loose = tight;
      for (double* x : loose.fields()) *x *= scale;
      for (const auto& n : check_names())
        if (check_passes(r, n, tight)) EXPECT_TRUE(check_passes(r, n, loose)) << m.name << " " << n;
    }
  }
}

TEST(Classify, FiniteDifferenceModeAgrees) {
  EXPECT_EQ(pipeline(sph(), DiffMode::fd).verdict.kind, VerdictKind::sphere_type);
  EXPECT_EQ(pipeline(cyl(), DiffMode::fd).verdict.describe(), "Rejected(\"rotation congruence fails\")");
}

TEST(Killing, Examples) {
  EXPECT_EQ(killing_obstruction(1, 1, 1), 0);
  EXPECT_EQ(killing_obstruction(0, 1, 2), 0);
  EXPECT_THROW(killing_obstruction(0, 0, 1), HypothesisViolated);
  EXPECT_THROW(killing_obstruction(1, 2, 1.5), HypothesisViolated);
}

TEST(Killing, RandomAdmissibleLambda) {
  std::mt19937 rng(42);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 100; ++k) {
    const double l2 = 0.1 + 2.9 * u(rng);
    const double l3 = l2 + 3.0 * u(rng);
    const double l1 = (k % 4 == 0) ? 0.0 : l2 * u(rng);
    EXPECT_EQ(killing_obstruction(l1, l2, l3), 0) << l1 << " " << l2 << " " << l3;
  }
}

TEST(Killing, LineFactorRotationIsExcluded) {
  // without the line row, rotations in the line factor's plane survive
  EXPECT_EQ(killing_obstruction(0, 1, 2), 0);
  EXPECT_EQ(killing_obstruction(0, 1, 1), 0);
}
