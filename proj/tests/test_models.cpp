#include <gtest/gtest.h>

#include <cmath>

#include "crverify/family_checker.hpp"
#include "crverify/models.hpp"

using namespace crverify;

namespace {

const cplx I(0.0, 1.0);

double max_jacobi(const ModelDescriptor& m) {
  const auto f = normalize(m.spec);
  const auto s = structure_functions(f);
  double worst = 0.0;
  for (const auto& p : m.spec.grid.points()) {
    const auto [d1, d2] = jacobi_defect(f, s, p);
    worst = std::max({worst, d1, d2});
  }
  return worst;
}

PipelineResult pipeline(const ModelDescriptor& m) {
  PipelineInput in;
  in.name = m.name;
  in.spec = m.spec;
  in.v = m.v;
  in.immersion = m.immersion;
  return run_pipeline(in);
}

}  // namespace

TEST(Heisenberg, StructureAndAdaptedFrame) {
  const auto m = heisenberg();
  EXPECT_FALSE(m.immersion.has_value());
  const auto f = normalize(m.spec);
  const auto s = structure_functions(f);
  const auto fc = change_frame(f, s, m.v);
  for (const auto& p : m.spec.grid.points()) {
    EXPECT_EQ(std::abs(s.a(p)) + std::abs(s.b(p)) + std::abs(s.c(p)), 0.0);
    EXPECT_NEAR(std::abs(fc.fns.b(p) - 0.5 * I), 0.0, 1e-13);
    EXPECT_NEAR(std::abs(fc.fns.c(p)), 0.0, 1e-13);
  }
}

TEST(Heisenberg, IntrinsicVerdictIsNegativeCurvature) {
  const auto r = pipeline(heisenberg());
  EXPECT_EQ(r.verdict.kind, VerdictKind::rejected);
  EXPECT_EQ(r.verdict.reason.rfind("negative horizontal curvature", 0), 0u) << r.verdict.reason;
}

TEST(Sphere, ParameterValidation) {
  EXPECT_THROW(sphere(-1.0, 0.5), std::invalid_argument);
  EXPECT_THROW(sphere(2.0, 0.0), std::invalid_argument);
  GridBox polar = sphere(2.0, 0.5).spec.grid;
  polar.lo[0] = 0.0;
  EXPECT_THROW(sphere(2.0, 0.5, polar), DegenerateChart);
  polar.lo[0] = 0.3;
  polar.hi[0] = std::numbers::pi / 2;
  EXPECT_THROW(sphere(2.0, 0.5, polar), DegenerateChart);
}

TEST(Cylinder, ParameterValidation) { EXPECT_THROW(cylinder(0.0), std::invalid_argument); }

TEST(Models, JacobiOnEveryShippedModel) {
  for (const auto& m : {heisenberg(), sphere(2.0, 0.5), cylinder(1.0), flatten(cylinder(1.0)),
                        t_lambda(0, 0, 1, cylinder(1.0)), t_lambda(0, 1, 1, cylinder(1.0))})
    EXPECT_LT(max_jacobi(m), 1e-7) << m.name;
}

TEST(Calibration, SphereRadiusAndScale) {
  const auto& c = calibrated("sphere");
  EXPECT_LT(c.defect, 1e-7);
  const double r = c.params.at("r");
  EXPECT_NEAR(1.0 / (r * r), 0.25, 1e-4);
  EXPECT_NEAR(c.params.at("s"), 0.5, 1e-4);
  EXPECT_LT(c.c_abs, 1e-7);
  EXPECT_NEAR(c.k_mix, 0.25, 1e-6);
  EXPECT_NEAR(c.k_mix_oracle, 0.25, 1e-5);
}

TEST(Calibration, IsReproducible) {
  const auto& first = calibrated("cylinder");
  const auto second = calibrate("cylinder");
  EXPECT_NEAR(first.params.at("r"), second.params.at("r"), 1e-9);
  const auto& s1 = calibrated("sphere");
  const auto s2 = calibrate("sphere");
  EXPECT_NEAR(s1.params.at("r"), s2.params.at("r"), 1e-9);
  EXPECT_NEAR(s1.params.at("s"), s2.params.at("s"), 1e-9);
}

TEST(Calibration, CylinderRadius) {
  const auto& c = calibrated("cylinder");
  EXPECT_LT(c.defect, 1e-7);
  EXPECT_NEAR(c.c_abs, 0.5, 1e-6);
  EXPECT_NEAR(c.k_mix, 0.0, 1e-5);
  EXPECT_NEAR(c.k_mix_oracle, 0.0, 1e-5);
}

TEST(Calibration, InfeasibleBox) {
  SearchBox box;
  box.r_lo = 10.0;
  box.r_hi = 11.0;
  EXPECT_THROW(calibrate("sphere", box), NoFeasiblePoint);
  EXPECT_THROW(calibrate("torus"), std::invalid_argument);
}

TEST(CalibratedModels, SphereCurvatures) {
  const auto m = calibrated_sphere();
  const auto r = pipeline(m);
  EXPECT_LT(r.report.at("isometry").defect, 1e-7);
  EXPECT_NEAR(r.report.measurement("K_mix_min"), 0.25, 1e-5);
  EXPECT_NEAR(r.report.measurement("K_mix_max"), 0.25, 1e-5);
  EXPECT_EQ(r.verdict.kind, VerdictKind::sphere_type) << r.verdict.describe();
}

TEST(CalibratedModels, CylinderCurvaturesAndVerdict) {
  const auto m = calibrated_cylinder();
  const auto r = pipeline(m);
  EXPECT_NEAR(r.report.measurement("c_abs_max"), 0.5, 1e-6);
  for (const char* k : {"K_H_min", "K_H_max", "K_mix_min", "K_mix_max"})
    EXPECT_NEAR(r.report.measurement(k), 0.0, 1e-5) << k;
  for (const char* c : {"parallel_A", "parallel_H", "ricci"}) EXPECT_LT(r.report.at(c).defect, 1e-5) << c;
  EXPECT_EQ(r.verdict.describe(), "Rejected(\"rotation congruence fails\")");
}

TEST(Flatten, CylinderBecomesAffine) {
  const auto m = flatten(calibrated_cylinder());
  const auto r = pipeline(m);
  EXPECT_LT(r.report.at("isometry").defect, 1e-8);
  EXPECT_LT(r.report.at("affine_image").defect, 1e-9);
  EXPECT_EQ(r.verdict.kind, VerdictKind::flat_cylinder_type) << r.verdict.describe();
}

TEST(Flatten, SphereIsNotFlat) { EXPECT_THROW(flatten(sphere(2.0, 0.5)), NotFlat); }

TEST(Flatten, AffineInclusionKeepsVerdict) {
  const auto r3 = pipeline(flatten(calibrated_cylinder(), 3));
  const auto r6 = pipeline(flatten(calibrated_cylinder(), 6));
  EXPECT_EQ(r3.verdict.describe(), r6.verdict.describe());
  EXPECT_EQ(r6.verdict.kind, VerdictKind::flat_cylinder_type);
}

TEST(TLambda, Validation) {
  EXPECT_THROW(t_lambda(1, 0, 2), std::invalid_argument);
  EXPECT_THROW(t_lambda(-1, 0, 2), std::invalid_argument);
  EXPECT_THROW(t_lambda(0, 0, 1, sphere(2.0, 0.5)), MetricMismatch);
}

TEST(TLambda, AllLinesIsFlatCylinderType) {
  const auto r = pipeline(t_lambda(0, 0, 0));
  EXPECT_EQ(r.verdict.kind, VerdictKind::flat_cylinder_type) << r.verdict.describe();
}

TEST(TLambda, OneCircleIsParallelButNotCongruent) {
  const auto r = pipeline(t_lambda(0, 0, 1));
  for (const char* c : {"isometry", "parallel_A", "parallel_H", "ricci"}) EXPECT_LT(r.report.at(c).defect, 1e-5) << c;
  EXPECT_GT(r.report.at("rotation_congruence").defect, 0.01);
  EXPECT_EQ(r.verdict.describe(), "Rejected(\"rotation congruence fails\")");
}

TEST(TLambda, TwoCirclesNotCongruent) {
  const auto r = pipeline(t_lambda(0, 1, 1));
  EXPECT_GT(r.report.at("rotation_congruence").defect, 0.01);
  EXPECT_EQ(r.verdict.kind, VerdictKind::rejected);
}
