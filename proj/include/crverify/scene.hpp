#pragma once

// Scenes: the built-in model registry, the flat key = "string" config format,
// and report emission as JSON, a summary table, or a per-point CSV dump.

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "crverify/expr.hpp"
#include "crverify/family_checker.hpp"
#include "crverify/models.hpp"

namespace crverify {

/// Version of both the config format and the JSON report layout.
inline constexpr int kSchemaVersion = 1;

/// One runnable verification problem.
struct Scene {
  std::string name;
  std::map<std::string, double> params;
  CRChartSpec spec;
  ScalarField v;
  std::optional<ImmersionSpec> immersion;
  DiffMode mode = DiffMode::ad;
  Tolerances tol;
};

// ---------------------------------------------------------------------------
// Built-in models

struct ModelInfo {
  std::string name;
  std::string summary;
};

inline const std::vector<ModelInfo>& model_catalog() {
  static const std::vector<ModelInfo> catalog{
      {"sphere", "round sphere in C^2 = R^4, calibrated radius and contact scale"},
      {"cylinder-embedded", "circle x plane in C^2 = R^4, calibrated radius"},
      {"cylinder-flat", "the calibrated cylinder mapped linearly and isometrically into R^3"},
      {"heisenberg", "Heisenberg group, intrinsic only (no immersion)"},
      {"t-lambda", "the flat cylinder as a product of circles of curvature lambda_j in R^6 (--lambda)"},
  };
  return catalog;
}

struct ModelOptions {
  std::optional<int> grid;                         // points per axis
  std::array<double, 3> lambda{0.0, 0.0, 1.0};     // t-lambda curvatures
  DiffMode mode = DiffMode::ad;
};

inline ModelDescriptor make_model(const std::string& name, const ModelOptions& opt = {}) {
  ModelDescriptor m;
  if (name == "sphere") {
    m = calibrated_sphere();
    m.params["reference_radius"] = std::numbers::sqrt2;
    m.params["radius_ratio"] = m.params.at("r") / std::numbers::sqrt2;
  } else if (name == "cylinder-embedded" || name == "cylinder") {
    m = calibrated_cylinder();
    m.params["reference_radius"] = 1.0;
    m.params["radius_ratio"] = m.params.at("r");
  } else if (name == "cylinder-flat") {
    m = flatten(calibrated_cylinder());
  } else if (name == "heisenberg") {
    m = heisenberg();
  } else if (name == "t-lambda" || name == "t_lambda") {
    m = t_lambda(opt.lambda[0], opt.lambda[1], opt.lambda[2]);
  } else {
    throw ConfigError("unknown model '" + name + "'");
  }
  if (opt.grid) {
    if (*opt.grid < 2) throw ConfigError("grid resolution must be at least 2");
    m.spec.grid.resolution = *opt.grid;
  }
  return m;
}

inline Scene scene_from_model(const ModelDescriptor& m, DiffMode mode = DiffMode::ad) {
  Scene s;
  s.name = m.name;
  s.params = m.params;
  s.spec = m.spec;
  s.v = m.v;
  s.immersion = m.immersion;
  s.mode = mode;
  s.tol = Tolerances::defaults(mode);
  return s;
}

// ---------------------------------------------------------------------------
// Config files

/// A scene file before expression compilation. Expressions are kept with
/// their file location so parse errors point into the file.
struct SceneConfig {
  struct Value {
    std::string text;
    int line = 0, column = 0;
  };
  std::string name = "scene";
  int n = 0;
  std::array<Value, 3> z, theta;
  std::vector<Value> f;
  std::optional<Value> v;
  GridBox grid;
  DiffMode mode = DiffMode::ad;
  std::map<std::string, double> tol;  // "all" or a Tolerances field name
  int max_order = kDefaultExprOrder;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline double parse_double(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  double x = 0.0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), x);
  if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size() || !std::isfinite(x))
    throw ConfigError(key + ": expected a number, got '" + text + "'");
  return x;
}

inline int parse_int(const std::string& key, const std::string& text) {
  const double x = parse_double(key, text);
  if (x != std::floor(x) || std::abs(x) > 1e6) throw ConfigError(key + ": expected an integer, got '" + text + "'");
  return static_cast<int>(x);
}

inline std::array<double, 3> parse_triple(const std::string& key, const std::string& text) {
  std::array<double, 3> out{};
  std::stringstream ss(text);
  std::string item;
  int k = 0;
  while (std::getline(ss, item, ',')) {
    if (k >= 3) throw ConfigError(key + ": expected three comma-separated numbers");
    out[static_cast<std::size_t>(k++)] = parse_double(key, item);
  }
  if (k != 3) throw ConfigError(key + ": expected three comma-separated numbers");
  return out;
}

inline DiffMode parse_mode(const std::string& text) {
  if (text == "ad") return DiffMode::ad;
  if (text == "fd") return DiffMode::fd;
  throw ConfigError("mode: expected 'ad' or 'fd', got '" + text + "'");
}

}  // namespace detail

/// Parses the key = "value" format. Lines starting with # are comments;
/// values may be quoted (required when they contain #) or bare.
inline SceneConfig parse_scene(std::string_view text) {
  SceneConfig cfg;
  std::map<std::string, SceneConfig::Value> kv;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = \"value\"");
    const std::string key = detail::trim(std::string_view(line).substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    std::size_t pos = line.find_first_not_of(" \t", eq + 1);
    SceneConfig::Value val;
    val.line = lineno;
    if (pos != std::string::npos && line[pos] == '"') {
      const auto close = line.find('"', pos + 1);
      if (close == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": unterminated string");
      val.text = line.substr(pos + 1, close - pos - 1);
      val.column = static_cast<int>(pos) + 2;
      const std::string rest = detail::trim(std::string_view(line).substr(close + 1));
      if (!rest.empty() && rest[0] != '#')
        throw ConfigError("line " + std::to_string(lineno) + ": unexpected text after value");
    } else {
      if (pos == std::string::npos) pos = line.size();
      const auto hash = line.find('#', pos);
      val.text = detail::trim(std::string_view(line).substr(pos, hash == std::string::npos ? std::string::npos : hash - pos));
      val.column = static_cast<int>(pos) + 1;
    }
    if (!kv.emplace(key, val).second)
      throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
  }

  std::set<std::string> used;
  auto get = [&](const std::string& key) -> const SceneConfig::Value* {
    auto it = kv.find(key);
    if (it == kv.end()) return nullptr;
    used.insert(key);
    return &it->second;
  };
  auto require = [&](const std::string& key) -> const SceneConfig::Value& {
    const auto* v = get(key);
    if (!v) throw ConfigError("missing key '" + key + "'");
    return *v;
  };

  if (const auto* v = get("name")) cfg.name = v->text;
  for (int k = 0; k < 3; ++k) {
    cfg.z[static_cast<std::size_t>(k)] = require("z" + std::to_string(k + 1));
    cfg.theta[static_cast<std::size_t>(k)] = require("theta" + std::to_string(k + 1));
  }
  if (const auto* v = get("n")) {
    cfg.n = detail::parse_int("n", v->text);
    if (cfg.n < 3) throw ConfigError("n: ambient dimension must be at least 3");
    for (int k = 1; k <= cfg.n; ++k) cfg.f.push_back(require("f" + std::to_string(k)));
  }
  for (const auto& [key, val] : kv)
    if (key.size() > 1 && key[0] == 'f' && key.find_first_not_of("0123456789", 1) == std::string::npos && !used.count(key))
      throw ConfigError("'" + key + "' does not match the ambient dimension n = " + std::to_string(cfg.n));
  if (const auto* v = get("v")) cfg.v = *v;
  if (const auto* v = get("grid_lo")) cfg.grid.lo = detail::parse_triple("grid_lo", v->text);
  if (const auto* v = get("grid_hi")) cfg.grid.hi = detail::parse_triple("grid_hi", v->text);
  if (const auto* v = get("grid_n")) cfg.grid.resolution = detail::parse_int("grid_n", v->text);
  if (cfg.grid.resolution < 2) throw ConfigError("grid_n: resolution must be at least 2 per axis");
  for (int k = 0; k < 3; ++k)
    if (!(cfg.grid.lo[static_cast<std::size_t>(k)] < cfg.grid.hi[static_cast<std::size_t>(k)]))
      throw ConfigError("grid_lo must be below grid_hi on every axis");
  if (const auto* v = get("mode")) cfg.mode = detail::parse_mode(v->text);
  if (const auto* v = get("max_order")) {
    cfg.max_order = detail::parse_int("max_order", v->text);
    if (cfg.max_order < 3 || cfg.max_order > 8) throw ConfigError("max_order must lie in [3, 8]");
  }
  Tolerances probe;
  for (const auto& [key, val] : kv) {
    if (key == "tol") {
      used.insert(key);
      cfg.tol["all"] = detail::parse_double(key, val.text);
    } else if (key.rfind("tol.", 0) == 0) {
      const std::string field = key.substr(4);
      if (!probe.field(field)) throw ConfigError("unknown tolerance '" + key + "'");
      used.insert(key);
      cfg.tol[field] = detail::parse_double(key, val.text);
    }
  }
  for (const auto& [key, val] : kv)
    if (!used.count(key)) throw ConfigError("line " + std::to_string(val.line) + ": unknown key '" + key + "'");
  for (const auto& [key, x] : cfg.tol)
    if (!(x > 0)) throw ConfigError("tolerance '" + key + "' must be positive");
  return cfg;
}

inline SceneConfig load_scene(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scene file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scene(buf.str());
}

namespace detail {

/// Compiles one config expression, relocating parse errors into the file.
inline ScalarField compile(const SceneConfig::Value& v, int max_order) {
  try {
    return parse_field(v.text, max_order);
  } catch (const SyntaxError& e) {
    const int col = e.line() == 1 ? v.column + e.column() - 1 : e.column();
    std::string what = e.what();
    what = what.substr(0, what.rfind(" at line "));
    what = what.substr(what.find(": ") + 2);
    throw SyntaxError(what, v.line + e.line() - 1, col);
  } catch (const UnknownSymbol& e) {
    const int col = e.line() == 1 ? v.column + e.column() - 1 : e.column();
    throw UnknownSymbol(e.symbol(), v.line + e.line() - 1, col);
  }
}

/// Real-valued expressions are checked on the sample grid.
inline bool real_on_grid(const ScalarField& h, const GridBox& grid) {
  for (const auto& p : grid.points())
    if (std::abs(h(p).imag()) > 1e-12) return false;
  return true;
}

}  // namespace detail

inline Scene build_scene(const SceneConfig& cfg) {
  Scene s;
  s.name = cfg.name;
  s.mode = cfg.mode;
  s.tol = Tolerances::defaults(cfg.mode);
  if (auto it = cfg.tol.find("all"); it != cfg.tol.end()) s.tol.set_all(it->second);
  for (const auto& [key, x] : cfg.tol)
    if (key != "all") *s.tol.field(key) = x;
  s.spec.grid = cfg.grid;
  std::array<ScalarField, 3> z, th;
  for (std::size_t k = 0; k < 3; ++k) {
    z[k] = detail::compile(cfg.z[k], cfg.max_order);
    th[k] = detail::compile(cfg.theta[k], cfg.max_order);
  }
  for (std::size_t k = 0; k < 3; ++k)
    if (!detail::real_on_grid(th[k], cfg.grid)) throw ConfigError("theta" + std::to_string(k + 1) + " must be real-valued");
  s.spec.Z_raw = {z, false};
  s.spec.theta_raw = {th, true};
  s.v = cfg.v ? detail::compile(*cfg.v, cfg.max_order) : ScalarField(0.0);
  if (cfg.v && !detail::real_on_grid(s.v, cfg.grid)) throw ConfigError("v must be real-valued");
  if (!cfg.f.empty()) {
    ImmersionSpec imm;
    imm.n = cfg.n;
    for (std::size_t k = 0; k < cfg.f.size(); ++k) {
      imm.f.push_back(detail::compile(cfg.f[k], cfg.max_order));
      if (!detail::real_on_grid(imm.f.back(), cfg.grid))
        throw ConfigError("f" + std::to_string(k + 1) + " must be real-valued");
    }
    s.immersion = std::move(imm);
  }
  return s;
}

inline PipelineResult run_checks(const Scene& scene, bool keep_samples = false) {
  PipelineInput in;
  in.name = scene.name;
  in.spec = scene.spec;
  in.v = scene.v;
  in.immersion = scene.immersion;
  in.mode = scene.mode;
  in.tol = scene.tol;
  in.keep_samples = keep_samples;
  return run_pipeline(in);
}

// ---------------------------------------------------------------------------
// Emission

inline int exit_code(const Verdict& v) { return v.kind == VerdictKind::rejected ? 2 : 0; }

namespace detail {

inline nlohmann::json number(double x) {
  if (std::isfinite(x)) return x;
  return std::isnan(x) ? nlohmann::json("nan") : nlohmann::json(x > 0 ? "inf" : "-inf");
}

}  // namespace detail

inline nlohmann::json verdict_json(const Verdict& v) {
  nlohmann::json j;
  j["kind"] = to_string(v.kind);
  j["reason"] = v.kind == VerdictKind::rejected ? nlohmann::json(v.reason) : nlohmann::json(nullptr);
  j["c_abs"] = detail::number(v.c_abs);
  j["K_H"] = detail::number(v.K_H);
  j["K_mix"] = detail::number(v.K_mix);
  j["rotation_defect"] = detail::number(v.rotation_defect);
  return j;
}

inline nlohmann::json report_json(const Scene& scene, const PipelineResult& r) {
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["scene"] = r.report.scene;
  j["mode"] = r.report.mode == DiffMode::fd ? "fd" : "ad";
  j["grid_size"] = r.report.grid_size();
  j["grid"] = {{"lo", scene.spec.grid.lo}, {"hi", scene.spec.grid.hi}, {"n", scene.spec.grid.resolution}};
  j["has_immersion"] = r.report.has_immersion;
  j["phi"] = r.report.phi;
  nlohmann::json params = nlohmann::json::object();
  for (const auto& [k, x] : scene.params) params[k] = detail::number(x);
  j["params"] = params;
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : r.report.checks)
    checks.push_back({{"name", c.name},
                      {"defect", detail::number(c.defect)},
                      {"tolerance", detail::number(c.tolerance)},
                      {"status", to_string(c.status)},
                      {"pass", c.status == CheckStatus::pass},
                      {"message", c.message}});
  j["checks"] = checks;
  nlohmann::json meas = nlohmann::json::object();
  for (const auto& [k, x] : r.report.measurements) meas[k] = detail::number(x);
  j["measurements"] = meas;
  j["verdict"] = verdict_json(r.verdict);
  return j;
}

inline void emit_table(std::ostream& os, const Scene& scene, const PipelineResult& r) {
  char buf[160];
  os << "scene " << r.report.scene << " (" << (r.report.mode == DiffMode::fd ? "fd" : "ad") << ", "
     << r.report.grid_size() << " points)\n";
  for (const auto& [k, x] : scene.params) {
    std::snprintf(buf, sizeof buf, "  %-22s %.12g\n", k.c_str(), x);
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "  %-24s %-12s %-10s %s\n", "check", "defect", "tolerance", "status");
  os << buf;
  for (const auto& c : r.report.checks) {
    std::snprintf(buf, sizeof buf, "  %-24s %-12.3e %-10.1e %s", c.name.c_str(), c.defect, c.tolerance,
                  to_string(c.status));
    os << buf;
    if (!c.message.empty()) os << "  (" << c.message << ")";
    os << "\n";
  }
  for (const auto& [k, x] : r.report.measurements) {
    std::snprintf(buf, sizeof buf, "  %-24s %.12g\n", k.c_str(), x);
    os << buf;
  }
  os << "verdict: " << r.verdict.describe() << "\n";
}

/// Per-point defects as CSV; grid-level checks have no samples and are omitted.
inline void emit_csv(std::ostream& os, const PipelineResult& r) {
  os << "u1,u2,u3,check,defect\n";
  char buf[200];
  for (const auto& c : r.report.checks) {
    if (c.samples.size() != r.report.points.size()) continue;
    for (std::size_t i = 0; i < c.samples.size(); ++i) {
      if (std::isnan(c.samples[i])) continue;
      const ChartPoint& p = r.report.points[i];
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%s,%.17g\n", p[0], p[1], p[2], c.name.c_str(), c.samples[i]);
      os << buf;
    }
  }
}

}  // namespace crverify
