// Acceptance gate: one PASS/FAIL line per criterion, exit status 0 iff all pass.
// Criteria 1 to 9 run with automatic differentiation; criterion 10 repeats them
// with the finite-difference oracle and every threshold relaxed to 1e-3.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "crverify/family_checker.hpp"
#include "crverify/models.hpp"

using namespace crverify;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Outcome {
  bool ok = true;
  std::ostringstream detail;

  // Records `value < limit` under `label`.
  void below(const std::string& label, double value, double limit) {
    const bool pass = value < limit;
    ok = ok && pass;
    detail << " " << label << "=" << fmt(value) << (pass ? "<" : "!<") << fmt(limit);
  }
  void within(const std::string& label, double value, double target, double tol) {
    const bool pass = std::abs(value - target) <= tol;
    ok = ok && pass;
    detail << " " << label << "=" << fmt(value) << (pass ? "~" : "!~") << fmt(target);
  }
  void expect(const std::string& label, bool pass) {
    ok = ok && pass;
    detail << " " << label << (pass ? "" : "(FAILED)");
  }
  static std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", x);
    return buf;
  }
};

class Gate {
 public:
  explicit Gate(DiffMode mode) : mode_(mode) {}

  DiffMode mode() const { return mode_; }

  // Threshold under the current mode.
  double lim(double t) const { return mode_ == DiffMode::fd ? std::max(t, 1e-3) : t; }

  const PipelineResult& run(const std::string& key) {
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    const ModelDescriptor m = model(key);
    PipelineInput in;
    in.name = key;
    in.spec = m.spec;
    in.v = m.v;
    in.immersion = m.immersion;
    in.mode = mode_;
    in.tol = Tolerances::defaults(mode_);
    return cache_.emplace(key, run_pipeline(in)).first->second;
  }

  static ModelDescriptor model(const std::string& key) {
    if (key == "heisenberg") return heisenberg();
    if (key == "sphere") return calibrated_sphere();
    if (key == "cylinder") return calibrated_cylinder();
    if (key == "cylinder-flat") return flatten(calibrated_cylinder());
    if (key == "t001") return t_lambda(0, 0, 1);
    if (key == "t000") return t_lambda(0, 0, 0);
    throw std::invalid_argument(key);
  }

 private:
  DiffMode mode_;
  std::map<std::string, PipelineResult> cache_;
};

ScalarField random_poly(std::mt19937& rng) {
  std::uniform_real_distribution<double> d(-0.5, 0.5);
  const ScalarField u1 = coordinate(0), u2 = coordinate(1), u3 = coordinate(2);
  const std::array<ScalarField, 10> monomials{ScalarField(1.0), u1, u2, u3, u1 * u1, u2 * u2, u3 * u3,
                                              u1 * u2, u2 * u3, u1 * u3};
  ScalarField v(0.0);
  for (const auto& m : monomials) v = v + ScalarField(d(rng)) * m;
  return v;
}

void jacobi(Gate& g, Outcome& o) {
  for (const char* m : {"heisenberg", "sphere", "cylinder"}) o.below(m, g.run(m).report.at("jacobi").defect, g.lim(1e-7));
}

void frame_change(Gate& g, Outcome& o) {
  for (const char* m : {"heisenberg", "sphere", "cylinder"})
    o.below(m, g.run(m).report.at("frame_change").defect, g.lim(1e-7));
  const ModelDescriptor s = Gate::model("sphere");
  const auto f = normalize(s.spec, g.mode(), kInf);
  const auto fns = structure_functions(f, g.mode(), kInf);
  std::mt19937 rng(20261016);
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) worst = std::max(worst, change_frame(f, fns, random_poly(rng), g.mode(), kInf, kInf).mismatch);
  o.below("random-v", worst, g.lim(1e-7));
}

void second_form(Gate& g, Outcome& o) {
  for (const char* m : {"sphere", "cylinder"}) o.below(m, g.run(m).report.at("second_form_modes").defect, g.lim(1e-6));
}

void gauss(Gate& g, Outcome& o) {
  for (const char* m : {"sphere", "cylinder", "cylinder-flat", "t001", "t000"}) {
    const auto& r = g.run(m).report;
    o.below(std::string(m) + ".explicit", r.measurement("gauss_explicit"), g.lim(1e-6));
    o.below(std::string(m) + ".raw", r.measurement("gauss_raw"), g.lim(1e-6));
  }
  // c scaled by exp(u3) on the embedded cylinder: the immersion still
  // satisfies the raw equation while the explicit form must fail.
  const ModelDescriptor c = Gate::model("cylinder");
  const auto f = normalize(c.spec, g.mode(), kInf);
  const auto fns = structure_functions(f, g.mode(), kInf);
  auto fc = change_frame(f, fns, c.v, g.mode(), kInf, kInf);
  fc.fns.c = fc.fns.c * exp(coordinate(2));
  double worst = 0.0;
  for (const auto& p : c.spec.grid.points())
    worst = std::max(worst, gauss_defect(fc.frame, fc.fns, *c.immersion, p, g.mode()).explicit_residual);
  o.expect("corrupted-c=" + Outcome::fmt(worst) + ">0.4", worst > 0.4);
}

void codazzi(Gate& g, Outcome& o) {
  for (const char* m : {"sphere", "cylinder", "t001"}) o.below(m, g.run(m).report.at("codazzi").defect, g.lim(1e-5));
}

void parallelism(Gate& g, Outcome& o) {
  for (const char* m : {"sphere", "cylinder", "t001"})
    for (const char* c : {"parallel_A", "parallel_H", "ricci"})
      o.below(std::string(m) + "." + c, g.run(m).report.at(c).defect, g.lim(1e-5));
}

void curvature(Gate& g, Outcome& o) {
  const auto& s = g.run("sphere").report;
  o.below("sphere|c|", s.measurement("c_abs_max"), g.lim(1e-6));
  for (const char* k : {"K_mix_min", "K_mix_max"}) o.within(std::string("sphere.") + k, s.measurement(k), 0.25, g.lim(1e-5));
  for (const char* k : {"K_H_min", "K_H_max"}) o.within(std::string("sphere.") + k, s.measurement(k), 0.25, g.lim(1e-4));
  const auto& c = g.run("cylinder").report;
  for (const char* k : {"c_abs_min", "c_abs_max"}) o.within(std::string("cyl.") + k, c.measurement(k), 0.5, g.lim(1e-6));
  for (const char* k : {"K_H_min", "K_H_max", "K_mix_min", "K_mix_max"})
    o.within(std::string("cyl.") + k, c.measurement(k), 0.0, g.lim(1e-5));
  // Heisenberg in the Levi-normalized frame, before the adapting frame change
  const ModelDescriptor h = Gate::model("heisenberg");
  const auto f = normalize(h.spec, g.mode());
  const auto fns = structure_functions(f, g.mode());
  double lo = kInf, hi = -kInf;
  for (const auto& p : h.spec.grid.points()) {
    const double k = sectional_curvatures(f, fns, std::nullopt, p, g.mode(), g.lim(1e-5)).K_H;
    lo = std::min(lo, k);
    hi = std::max(hi, k);
  }
  o.within("heis.K_H_min", lo, -0.25, g.lim(1e-6));
  o.within("heis.K_H_max", hi, -0.25, g.lim(1e-6));
  o.expect("heis.Rejected", g.run("heisenberg").verdict.kind == VerdictKind::rejected);
}

void classification(Gate& g, Outcome& o) {
  auto kind = [&](const char* m, VerdictKind k) {
    const auto& v = g.run(m).verdict;
    o.expect(std::string(m) + "=" + v.describe(), v.kind == k);
  };
  kind("sphere", VerdictKind::sphere_type);
  kind("cylinder-flat", VerdictKind::flat_cylinder_type);
  kind("t000", VerdictKind::flat_cylinder_type);
  for (const char* m : {"cylinder", "t001"}) {
    const auto& r = g.run(m);
    o.expect(std::string(m) + "=" + r.verdict.describe(), r.verdict.reason == "rotation congruence fails");
    const double d = r.report.at("rotation_congruence").defect;
    o.expect(std::string(m) + ".rotation=" + Outcome::fmt(d) + ">0.01", d > 0.01);
  }
}

void killing(Gate&, Outcome& o) {
  o.expect("(1,1,1)", killing_obstruction(1, 1, 1) == 0);
  o.expect("(0,1,2)", killing_obstruction(0, 1, 2) == 0);
  std::mt19937 rng(42);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int bad = 0;
  for (int k = 0; k < 100; ++k) {
    const double l2 = 0.1 + 2.9 * u(rng);
    const double l1 = k % 4 == 0 ? 0.0 : l2 * u(rng);
    const double l3 = l2 + 3.0 * u(rng);
    if (killing_obstruction(l1, l2, l3) != 0) ++bad;
  }
  o.expect("random-100(nonzero=" + std::to_string(bad) + ")", bad == 0);
}

struct Criterion {
  const char* title;
  std::function<void(Gate&, Outcome&)> body;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> list{
      {"Jacobi identities", jacobi},
      {"frame-change covariance", frame_change},
      {"second fundamental form modes agree", second_form},
      {"explicit Gauss equivalence", gauss},
      {"Codazzi suite", codazzi},
      {"parallelism", parallelism},
      {"curvature dichotomy", curvature},
      {"classification", classification},
      {"Killing obstruction", killing},
  };
  return list;
}

Outcome evaluate(const Criterion& c, Gate& g) {
  Outcome o;
  try {
    c.body(g, o);
  } catch (const std::exception& e) {
    o.ok = false;
    o.detail << " threw " << e.what();
  }
  return o;
}

void line(int index, const std::string& title, const Outcome& o) {
  std::printf("[%s] %2d %s:%s\n", o.ok ? "PASS" : "FAIL", index, title.c_str(), o.detail.str().c_str());
}

}  // namespace

int main() {
  int failed = 0;
  Gate ad(DiffMode::ad);
  int index = 1;
  for (const auto& c : criteria()) {
    const Outcome o = evaluate(c, ad);
    line(index++, c.title, o);
    failed += o.ok ? 0 : 1;
  }

  Gate fd(DiffMode::fd);
  Outcome audit;
  int k = 1;
  for (const auto& c : criteria()) {
    const Outcome o = evaluate(c, fd);
    std::printf("       fd %d %s: %s%s\n", k, c.title, o.ok ? "pass" : "FAIL", o.detail.str().c_str());
    audit.expect(std::to_string(k++), o.ok);
  }
  line(index++, "AD/FD oracle audit (criteria 1-9 in fd mode, tolerance 1e-3)", audit);
  failed += audit.ok ? 0 : 1;

  Outcome radius;
  try {
    const auto& cal = calibrated("sphere");
    const double r = cal.params.at("r");
    const double reference = std::numbers::sqrt2;
    char buf[160];
    std::snprintf(buf, sizeof buf, " calibrated_radius=%.12g reference_radius=%.12g ratio=%.12g (informational)", r,
                  reference, r / reference);
    radius.detail << buf;
  } catch (const std::exception& e) {
    radius.ok = false;
    radius.detail << " threw " << e.what();
  }
  line(index, "calibrated sphere radius vs reference", radius);
  failed += radius.ok ? 0 : 1;

  std::printf("%s: %d of %d criteria failed\n", failed ? "FAIL" : "PASS", failed, index);
  return failed ? 1 : 0;
}
