// crverify: command-line front end for scenes and built-in models.
//
//   crverify check    --model sphere --grid 7 --json
//   crverify check    --config scenes/heisenberg.scene --dump-grid defects.csv
//   crverify classify --model t-lambda --lambda 0,0,1
//   crverify calibrate --model sphere
//   crverify killing  --lambda 1,1,1
//   crverify models
//
// Exit codes: 0 for SphereType or FlatCylinderType, 2 for Rejected, 1 on errors.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "crverify/scene.hpp"

namespace {

using namespace crverify;

struct SceneOptions {
  std::string model;
  std::string config;
  std::optional<int> grid;
  std::optional<double> tol;
  std::optional<std::string> mode;
  std::vector<double> lambda{0.0, 0.0, 1.0};
  bool json = false;
  std::string dump_grid;
};

void add_scene_options(CLI::App* cmd, SceneOptions& o) {
  auto* model = cmd->add_option("--model", o.model, "built-in model name (see 'crverify models')");
  auto* config = cmd->add_option("--config", o.config, "scene file")->check(CLI::ExistingFile);
  model->excludes(config);
  cmd->add_option("--grid", o.grid, "grid points per axis")->check(CLI::Range(2, 64));
  cmd->add_option("--tol", o.tol, "set every tolerance to X")->check(CLI::PositiveNumber);
  cmd->add_option("--mode", o.mode, "differentiation mode")->check(CLI::IsMember({"ad", "fd"}));
  cmd->add_option("--lambda", o.lambda, "t-lambda curvatures a,b,c")->delimiter(',')->expected(3);
  cmd->add_flag("--json", o.json, "print the JSON report instead of the table");
  cmd->add_option("--dump-grid", o.dump_grid, "write per-point defects as CSV");
}

Scene load(const SceneOptions& o) {
  Scene s;
  if (!o.config.empty()) {
    SceneConfig cfg = load_scene(o.config);
    if (o.grid) cfg.grid.resolution = *o.grid;
    if (o.mode) cfg.mode = detail::parse_mode(*o.mode);
    s = build_scene(cfg);
  } else {
    if (o.model.empty()) throw ConfigError("one of --model or --config is required");
    ModelOptions mo;
    mo.grid = o.grid;
    mo.lambda = {o.lambda[0], o.lambda[1], o.lambda[2]};
    s = scene_from_model(make_model(o.model, mo), o.mode ? detail::parse_mode(*o.mode) : DiffMode::ad);
  }
  if (o.tol) s.tol.set_all(*o.tol);
  return s;
}

int run_check(const SceneOptions& o, bool verdict_only) {
  const Scene scene = load(o);
  const PipelineResult r = run_checks(scene, !o.dump_grid.empty());
  if (!o.dump_grid.empty()) {
    std::ofstream out(o.dump_grid);
    if (!out) throw ConfigError("cannot write '" + o.dump_grid + "'");
    emit_csv(out, r);
  }
  if (verdict_only) {
    if (o.json)
      std::cout << verdict_json(r.verdict).dump(2) << "\n";
    else
      std::cout << r.verdict.describe() << "\n";
  } else if (o.json) {
    std::cout << report_json(scene, r).dump(2) << "\n";
  } else {
    emit_table(std::cout, scene, r);
  }
  return exit_code(r.verdict);
}

int run_calibrate(const std::string& family, bool json) {
  const std::string fam = family == "cylinder-embedded" ? "cylinder" : family;
  const CalibrationResult c = calibrated(fam);
  const double r = c.params.at("r");
  const double reference = fam == "sphere" ? std::numbers::sqrt2 : 1.0;
  if (json) {
    nlohmann::json j;
    j["schema_version"] = kSchemaVersion;
    j["family"] = c.family;
    j["params"] = c.params;
    j["defect"] = c.defect;
    j["c_abs"] = c.c_abs;
    j["k_mix"] = c.k_mix;
    j["k_mix_oracle"] = c.k_mix_oracle;
    j["reference_radius"] = reference;
    j["radius_ratio"] = r / reference;
    std::cout << j.dump(2) << "\n";
    return 0;
  }
  std::printf("family            %s\n", c.family.c_str());
  for (const auto& [k, x] : c.params) std::printf("%-17s %.12g\n", k.c_str(), x);
  std::printf("isometry defect   %.3e\n", c.defect);
  std::printf("max |c|           %.3e\n", c.c_abs);
  std::printf("K_mix             %.12g (oracle %.12g)\n", c.k_mix, c.k_mix_oracle);
  std::printf("reference radius  %.12g\n", reference);
  std::printf("radius ratio      %.12g\n", r / reference);
  return 0;
}

int run_killing(const std::vector<double>& l, bool json) {
  const int dim = killing_obstruction(l[0], l[1], l[2]);
  if (json) {
    nlohmann::json j;
    j["schema_version"] = kSchemaVersion;
    j["lambda"] = l;
    j["nullspace_dimension"] = dim;
    std::cout << j.dump(2) << "\n";
  } else {
    std::printf("lambda = (%g, %g, %g)\nnullspace dimension %d\n", l[0], l[1], l[2], dim);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical verification of pseudohermitian immersions"};
  app.require_subcommand(1);

  SceneOptions check_opts, classify_opts;
  auto* check = app.add_subcommand("check", "run every check and print the report");
  add_scene_options(check, check_opts);
  auto* classify = app.add_subcommand("classify", "run every check and print only the verdict");
  add_scene_options(classify, classify_opts);

  std::string family = "sphere";
  bool calibrate_json = false;
  auto* calibrate_cmd = app.add_subcommand("calibrate", "fit model parameters to the Webster metric");
  calibrate_cmd->add_option("--model", family, "sphere or cylinder-embedded")
      ->check(CLI::IsMember({"sphere", "cylinder", "cylinder-embedded"}));
  calibrate_cmd->add_flag("--json", calibrate_json, "print JSON");

  std::vector<double> lambda;
  bool killing_json = false;
  auto* killing = app.add_subcommand("killing", "dimension of the Killing system nullspace");
  killing->add_option("--lambda", lambda, "curvatures 0 <= a <= b <= c, b > 0")
      ->delimiter(',')
      ->expected(3)
      ->required();
  killing->add_flag("--json", killing_json, "print JSON");

  auto* models = app.add_subcommand("models", "list built-in models");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (check->parsed()) return run_check(check_opts, false);
    if (classify->parsed()) return run_check(classify_opts, true);
    if (calibrate_cmd->parsed()) return run_calibrate(family, calibrate_json);
    if (killing->parsed()) return run_killing(lambda, killing_json);
    if (models->parsed()) {
      for (const auto& m : model_catalog()) std::printf("%-18s %s\n", m.name.c_str(), m.summary.c_str());
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "crverify: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
