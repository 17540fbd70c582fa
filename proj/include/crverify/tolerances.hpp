#pragma once

#include <algorithm>
#include <array>
#include <string_view>

#include "crverify/chart_calculus.hpp"

namespace crverify {

/// Per-check thresholds. A check passes when its grid-max defect is strictly
/// below the threshold.
struct Tolerances {
  double levi = 1e-8;
  double reeb = 1e-8;
  double structure = 1e-8;
  double jacobi = 1e-7;
  double frame_change = 1e-7;
  double adapted = 1e-6;
  double isometry = 1e-7;
  double identities = 1e-6;
  double modes = 1e-6;
  double gauss = 1e-6;
  double codazzi = 1e-5;
  double parallel = 1e-5;
  double curvature = 1e-5;
  double congruence = 1e-6;
  double affine = 1e-6;

  static Tolerances defaults(DiffMode mode) {
    Tolerances t;
    if (mode == DiffMode::fd) t.relax_to(1e-3);
    return t;
  }

  /// Raises every threshold to at least `x`.
  void relax_to(double x) {
    for (double* v : fields()) *v = std::max(*v, x);
  }

  /// Sets every threshold to `x`.
  void set_all(double x) {
    for (double* v : fields()) *v = x;
  }

  static constexpr std::array<const char*, 15> names{
      "levi",     "reeb",     "structure", "jacobi",  "frame_change",
      "adapted",  "isometry", "identities", "modes",  "gauss",
      "codazzi",  "parallel", "curvature", "congruence", "affine"};

  /// Threshold by name; nullptr for an unknown name.
  double* field(std::string_view name) {
    for (std::size_t k = 0; k < names.size(); ++k)
      if (name == names[k]) return fields()[k];
    return nullptr;
  }

  std::array<double*, 15> fields() {
    return {&levi,     &reeb,     &structure, &jacobi,   &frame_change,
            &adapted,  &isometry, &identities, &modes,   &gauss,
            &codazzi,  &parallel, &curvature, &congruence, &affine};
  }
};

/// Grid-max of |h| over `grid`.
inline double field_max_abs(const ScalarField& h, const GridBox& grid, DiffMode mode) {
  return grid_max(grid, mode, [&](EvalContext& ctx) { return std::abs(h.value(ctx)); });
}

}  // namespace crverify
