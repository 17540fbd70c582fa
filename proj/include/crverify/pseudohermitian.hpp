#pragma once

// Pseudohermitian frames of a three-dimensional CR chart.
//
// Conventions: dθ(U,V) = Uθ(V) − Vθ(U) − θ([U,V]) and the structure equation
// i[Z,Z̄] = T + aZ + āZ̄ is normative. The Levi density of a raw frame is
// λ = iθ([Z_raw, Z̄_raw]); θ is negated when λ < 0 and Z = Z_raw/√λ.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <string>
#include <utility>

#include "crverify/chart_calculus.hpp"
#include "crverify/tolerances.hpp"

namespace crverify {

struct CRChartSpec {
  CVectorField Z_raw;
  OneForm theta_raw;
  GridBox grid;
};

struct PseudohermitianFrame {
  CVectorField Z, Zbar, T;
  OneForm zeta, zetabar, theta;
  bool sign_flipped = false;
  ScalarField levi;  // positive density used for the normalization
  GridBox grid;
};

struct StructureFunctions {
  ScalarField a, b, c;
  // θ([Z,T]), θ(i[Z,Z̄]) − 1, ζ̄(i[Z,Z̄]) − ā
  std::array<ScalarField, 3> residuals;
  double max_residual = 0.0;
};

namespace detail {

/// Inverse of a 3x3 jet matrix given row-major.
inline std::array<Jet, 9> inverse3(const std::array<Jet, 9>& m) {
  auto at = [&](int r, int c) -> const Jet& { return m[3 * r + c]; };
  std::array<Jet, 9> cof;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      const int r1 = (r + 1) % 3, r2 = (r + 2) % 3, c1 = (c + 1) % 3, c2 = (c + 2) % 3;
      cof[3 * r + c] = at(r1, c1) * at(r2, c2) - at(r1, c2) * at(r2, c1);
    }
  }
  const Jet det = at(0, 0) * cof[0] + at(0, 1) * cof[1] + at(0, 2) * cof[2];
  if (std::abs(det.value()) < 1e-300) throw SingularSystem("frame matrix is singular");
  const Jet inv_det = det.reciprocal();
  std::array<Jet, 9> out;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) out[3 * r + c] = cof[3 * c + r] * inv_det;
  return out;
}

/// Ω_ij = ∂_iθ_j − ∂_jθ_i as fields.
inline std::array<std::array<ScalarField, 3>, 3> exterior_coefficients(const OneForm& theta) {
  std::array<std::array<ScalarField, 3>, 3> omega;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      omega[i][j] = i == j ? ScalarField(0.0)
                           : derive(coordinate_field(i), theta[j]) - derive(coordinate_field(j), theta[i]);
  return omega;
}

/// Kernel direction of dθ: w = (Ω_23, Ω_31, Ω_12).
inline CVectorField reeb_direction(const OneForm& theta) {
  const auto omega = exterior_coefficients(theta);
  return {{omega[1][2], omega[2][0], omega[0][1]}, true};
}

}  // namespace detail

/// λ_raw = iθ_raw([Z_raw, Z̄_raw]) as a field (before any sign flip).
inline ScalarField levi_density_field(const CRChartSpec& spec) {
  const CVectorField br = lie_bracket(spec.Z_raw, conj(spec.Z_raw));
  return ScalarField(cplx(0.0, 1.0)) * spec.theta_raw(br);
}

/// The Levi density |λ(p)|: the normalized frame is Z_raw/√|λ| after the sign flip.
inline double levi_form(const CRChartSpec& spec, const ChartPoint& p, DiffMode mode = DiffMode::ad) {
  const double lam = levi_density_field(spec)(p, mode).real();
  if (std::abs(lam) < 1e-10) throw Degenerate("Levi form vanishes at the point");
  return std::abs(lam);
}

/// Reeb field of θ: T = w/θ(w) with w spanning the kernel of dθ.
inline CVectorField reeb_field_of(const OneForm& theta) {
  const CVectorField w = detail::reeb_direction(theta);
  const ScalarField inv = ScalarField(1.0) / theta(w);
  CVectorField T = inv * w;
  T.real = true;
  return T;
}

struct ReebDiagnostics {
  double residual = 0.0;   // ‖M T − e₁‖ for the pointwise system M
  double condition = 0.0;  // 2-norm condition number of M
};

/// Pointwise 3x3 system [θ; dθ(·,∂_j); dθ(·,∂_k)] T = e₁ solved directly and
/// compared with the closed-form Reeb field.
inline ReebDiagnostics reeb_diagnostics(const OneForm& theta, const CVectorField& T, EvalContext& ctx) {
  const auto omega = detail::exterior_coefficients(theta);
  Eigen::Matrix3d full;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) full(i, j) = omega[i][j].value(ctx).real();
  // dθ(T, ∂_j) = Σ_i T^i Ω_ij: use the two columns of Ω with largest norm.
  int drop = 0;
  for (int j = 1; j < 3; ++j)
    if (full.col(j).norm() < full.col(drop).norm()) drop = j;
  Eigen::Matrix3d M;
  for (int k = 0; k < 3; ++k) M(0, k) = theta[k].value(ctx).real();
  int row = 1;
  for (int j = 0; j < 3; ++j) {
    if (j == drop) continue;
    for (int i = 0; i < 3; ++i) M(row, i) = full(i, j);
    ++row;
  }
  Eigen::Vector3d t;
  for (int k = 0; k < 3; ++k) t(k) = T[k].value(ctx).real();
  ReebDiagnostics d;
  d.residual = (M * t - Eigen::Vector3d::UnitX()).norm();
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(M);
  const auto s = svd.singularValues();
  d.condition = s(2) > 0 ? s(0) / s(2) : std::numeric_limits<double>::infinity();
  return d;
}

/// Reeb field of the raw contact form; SingularSystem where dθ degenerates.
inline CVectorField reeb_field(const CRChartSpec& spec, DiffMode mode = DiffMode::ad) {
  const CVectorField w = detail::reeb_direction(spec.theta_raw);
  const ScalarField tw = spec.theta_raw(w);
  for (const auto& p : spec.grid.points()) {
    EvalContext ctx(p, mode);
    const double wn = std::sqrt(std::norm(w[0].value(ctx)) + std::norm(w[1].value(ctx)) +
                                std::norm(w[2].value(ctx)));
    const double th = std::sqrt(std::norm(spec.theta_raw[0].value(ctx)) +
                                std::norm(spec.theta_raw[1].value(ctx)) +
                                std::norm(spec.theta_raw[2].value(ctx)));
    if (wn < 1e-12 || std::abs(tw.value(ctx)) <= 1e-10 * wn * th)
      throw SingularSystem("Reeb system is rank deficient (dθ degenerate)");
  }
  return reeb_field_of(spec.theta_raw);
}

/// Builds the coframe (ζ, ζ̄, θ) dual to (Z, Z̄, T).
inline PseudohermitianFrame make_frame(const CVectorField& Z, const CVectorField& T, bool sign_flipped,
                                       ScalarField levi, GridBox grid) {
  PseudohermitianFrame f;
  f.Z = Z;
  f.Z.real = false;
  f.Zbar = conj(f.Z);
  f.T = T;
  f.sign_flipped = sign_flipped;
  f.levi = std::move(levi);
  f.grid = grid;
  const CVectorField Zb = f.Zbar;
  const CVectorField Tc = T;
  const CVectorField Zc = f.Z;
  auto rows = make_node(9, [Zc, Zb, Tc](EvalContext& ctx, int order) {
    // F(k, col) = component k of column field
    std::array<Jet, 9> m;
    for (int k = 0; k < 3; ++k) {
      m[3 * k + 0] = Zc[k].jet(ctx, order);
      m[3 * k + 1] = Zb[k].jet(ctx, order);
      m[3 * k + 2] = Tc[k].jet(ctx, order);
    }
    const auto inv = detail::inverse3(m);
    return std::vector<Jet>(inv.begin(), inv.end());
  });
  f.zeta = {{rows[0], rows[1], rows[2]}, false};
  f.zetabar = {{rows[3], rows[4], rows[5]}, false};
  f.theta = {{rows[6], rows[7], rows[8]}, true};
  return f;
}

/// Levi-normalized frame of a raw CR chart. Checks θ(Z_raw) = 0, Levi
/// nondegeneracy and a constant Levi sign on the grid.
inline PseudohermitianFrame normalize(const CRChartSpec& spec, DiffMode mode = DiffMode::ad,
                                      double tol = 1e-8) {
  const ScalarField lam_raw = levi_density_field(spec);
  const ScalarField tz = spec.theta_raw(spec.Z_raw);
  int sign = 0;
  for (const auto& p : spec.grid.points()) {
    EvalContext ctx(p, mode);
    if (std::abs(tz.value(ctx)) > tol)
      throw Degenerate("Z_raw is not annihilated by theta");
    const double lam = lam_raw.value(ctx).real();
    if (std::abs(lam) < 1e-10) throw Degenerate("Levi form vanishes on the grid");
    const int s = lam > 0 ? 1 : -1;
    if (sign != 0 && s != sign) throw Degenerate("Levi form changes sign on the grid");
    sign = s;
  }
  const bool flipped = sign < 0;
  const OneForm theta = flipped ? OneForm{{-spec.theta_raw[0], -spec.theta_raw[1], -spec.theta_raw[2]}, true}
                                : spec.theta_raw;
  const ScalarField lam = flipped ? -lam_raw : lam_raw;
  const CVectorField Z = (ScalarField(1.0) / sqrt(lam)) * spec.Z_raw;
  (void)reeb_field(CRChartSpec{spec.Z_raw, theta, spec.grid}, mode);
  return make_frame(Z, reeb_field_of(theta), flipped, lam, spec.grid);
}

class WebsterMetric {
 public:
  explicit WebsterMetric(const PseudohermitianFrame& f) : zeta_(f.zeta), zetabar_(f.zetabar), theta_(f.theta) {}

  /// Bilinear symmetric extension g(U,V) = ζ(U)ζ̄(V) + ζ̄(U)ζ(V) + θ(U)θ(V).
  ScalarField operator()(const CVectorField& U, const CVectorField& V) const {
    return zeta_(U) * zetabar_(V) + zetabar_(U) * zeta_(V) + theta_(U) * theta_(V);
  }

  /// Coordinate coefficient g(∂_i, ∂_j).
  ScalarField coefficient(int i, int j) const {
    return zeta_[i] * zetabar_[j] + zetabar_[i] * zeta_[j] + theta_[i] * theta_[j];
  }

  /// ⟨R(U,V)W,X⟩ from coordinate Christoffel symbols of the metric,
  /// R(U,V) = ∇_U∇_V − ∇_V∇_U − ∇_[U,V].
  cplx riemann(const CVectorField& U, const CVectorField& V, const CVectorField& W, const CVectorField& X,
               EvalContext& ctx) const {
    std::array<Jet, 9> g;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) g[3 * i + j] = coefficient(i, j).jet(ctx, 2);
    std::array<Jet, 9> g1;
    for (int k = 0; k < 9; ++k) g1[k] = g[k].truncated(1);
    const auto ginv = detail::inverse3(g1);
    // Γ^k_ij, order 1
    Jet gamma[3][3][3];
    for (int k = 0; k < 3; ++k) {
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
          Jet acc(0.0);
          for (int l = 0; l < 3; ++l) {
            const Jet s = g[3 * j + l].partial(i) + g[3 * i + l].partial(j) - g[3 * i + j].partial(l);
            acc += ginv[3 * k + l] * s;
          }
          gamma[k][i][j] = 0.5 * acc;
        }
      }
    }
    cplx u[3], v[3], w[3], x[3];
    for (int k = 0; k < 3; ++k) {
      u[k] = U[k].value(ctx);
      v[k] = V[k].value(ctx);
      w[k] = W[k].value(ctx);
      x[k] = X[k].value(ctx);
    }
    cplx total{};
    for (int l = 0; l < 3; ++l) {
      cplx lower{};  // Σ_m g_lm X^m
      for (int m = 0; m < 3; ++m) lower += g[3 * l + m].value() * x[m];
      if (lower == cplx{}) continue;
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
          const cplx uv = u[i] * v[j];
          if (uv == cplx{}) continue;
          for (int k = 0; k < 3; ++k) {
            cplx r = gamma[l][j][k].partial(i).value() - gamma[l][i][k].partial(j).value();
            for (int m = 0; m < 3; ++m)
              r += gamma[l][i][m].value() * gamma[m][j][k].value() -
                   gamma[l][j][m].value() * gamma[m][i][k].value();
            total += uv * w[k] * lower * r;
          }
        }
      }
    }
    return total;
  }

 private:
  OneForm zeta_, zetabar_, theta_;
};

/// Max over the grid of the five frame identities of the Webster metric and
/// |L(Z,Z) − 1|.
inline double levi_normalization_defect(const PseudohermitianFrame& f, DiffMode mode = DiffMode::ad) {
  const WebsterMetric g(f);
  const ScalarField L = ScalarField(cplx(0.0, 1.0)) * f.theta(lie_bracket(f.Z, f.Zbar));
  const std::array<std::pair<ScalarField, double>, 6> ids{{{g(f.Z, f.Z), 0.0},
                                                          {g(f.Zbar, f.Zbar), 0.0},
                                                          {g(f.Z, f.Zbar), 1.0},
                                                          {g(f.Z, f.T), 0.0},
                                                          {g(f.T, f.T), 1.0},
                                                          {L, 1.0}}};
  return grid_max(f.grid, mode, [&](EvalContext& ctx) {
    double m = 0.0;
    for (const auto& [h, target] : ids) m = std::max(m, std::abs(h.value(ctx) - target));
    return m;
  });
}

/// Max over the grid of the Reeb residuals: |θ(T) − 1| and |dθ(T, ∂_j)|.
inline double reeb_residual(const PseudohermitianFrame& f, DiffMode mode = DiffMode::ad) {
  const auto omega = detail::exterior_coefficients(f.theta);
  const ScalarField tT = f.theta(f.T);
  return grid_max(f.grid, mode, [&](EvalContext& ctx) {
    double m = std::abs(tT.value(ctx) - 1.0);
    for (int j = 0; j < 3; ++j) {
      cplx s{};
      for (int i = 0; i < 3; ++i) s += f.T[i].value(ctx) * omega[i][j].value(ctx);
      m = std::max(m, std::abs(s));
    }
    return m;
  });
}

/// a = ζ(i[Z,Z̄]), b = ζ([Z,T]), c = ζ([Z̄,T]). The remaining components of
/// the expansions are kept as residual fields and checked on the grid.
inline StructureFunctions structure_functions(const PseudohermitianFrame& f, DiffMode mode = DiffMode::ad,
                                              double tol = 1e-8) {
  const cplx I(0.0, 1.0);
  const CVectorField iZZb = ScalarField(I) * lie_bracket(f.Z, f.Zbar);
  const CVectorField ZT = lie_bracket(f.Z, f.T);
  const CVectorField ZbT = lie_bracket(f.Zbar, f.T);
  StructureFunctions s;
  s.a = f.zeta(iZZb);
  s.b = f.zeta(ZT);
  s.c = f.zeta(ZbT);
  s.residuals = {f.theta(ZT), f.theta(iZZb) - ScalarField(1.0), f.zetabar(iZZb) - conj(s.a)};
  s.max_residual = grid_max(f.grid, mode, [&](EvalContext& ctx) {
    double m = 0.0;
    for (const auto& r : s.residuals) m = std::max(m, std::abs(r.value(ctx)));
    return m;
  });
  if (!(s.max_residual <= tol))
    throw FrameExpansionFailure("frame expansion residual " + std::to_string(s.max_residual) +
                                " exceeds tolerance " + std::to_string(tol));
  return s;
}

/// (|b + b̄|, |iZc − iZ̄b + Ta − ab − āc|) at the point.
inline std::pair<double, double> jacobi_defect(const PseudohermitianFrame& f, const StructureFunctions& s,
                                               EvalContext& ctx) {
  const cplx I(0.0, 1.0);
  const cplx a = s.a.value(ctx), b = s.b.value(ctx), c = s.c.value(ctx);
  const cplx second = I * derive(f.Z, s.c).value(ctx) - I * derive(f.Zbar, s.b).value(ctx) +
                      derive(f.T, s.a).value(ctx) - a * b - std::conj(a) * c;
  return {std::abs(b + std::conj(b)), std::abs(second)};
}

inline std::pair<double, double> jacobi_defect(const PseudohermitianFrame& f, const StructureFunctions& s,
                                               const ChartPoint& p, DiffMode mode = DiffMode::ad) {
  EvalContext ctx(p, mode);
  return jacobi_defect(f, s, ctx);
}

struct FrameChange {
  PseudohermitianFrame frame;
  StructureFunctions fns;
  ScalarField a_pred, b_pred, c_pred;
  double mismatch = 0.0;  // grid max over the three predictions
};

/// Z' = e^{−iv}Z, T' = T; structure functions recomputed from brackets and
/// compared with (e^{iv}(a − Z̄v), b + iTv, e^{2iv}c).
inline FrameChange change_frame(const PseudohermitianFrame& f, const StructureFunctions& s, const ScalarField& v,
                                DiffMode mode = DiffMode::ad, double tol = 1e-7, double structure_tol = 1e-8) {
  const cplx I(0.0, 1.0);
  const ScalarField phase = exp(ScalarField(I) * v);
  const CVectorField Zp = conj(phase) * f.Z;
  FrameChange out;
  out.frame = make_frame(Zp, f.T, f.sign_flipped, f.levi, f.grid);
  out.fns = structure_functions(out.frame, mode, structure_tol);
  out.a_pred = phase * (s.a - derive(f.Zbar, v));
  out.b_pred = s.b + ScalarField(I) * derive(f.T, v);
  out.c_pred = phase * phase * s.c;
  out.mismatch = grid_max(f.grid, mode, [&](EvalContext& ctx) {
    return std::max({std::abs(out.fns.a.value(ctx) - out.a_pred.value(ctx)),
                     std::abs(out.fns.b.value(ctx) - out.b_pred.value(ctx)),
                     std::abs(out.fns.c.value(ctx) - out.c_pred.value(ctx))});
  });
  if (!(out.mismatch <= tol))
    throw PredictionMismatch("recomputed structure functions differ from the transform by " +
                             std::to_string(out.mismatch));
  return out;
}

/// Tanaka–Webster coefficients against Z: ∇_Z Z = −iāZ, ∇_Z̄ Z = iaZ,
/// ∇_T Z = −bZ, T(T, Z̄) = cZ.
struct TWCoefficients {
  cplx nabla_Z_Z, nabla_Zbar_Z, nabla_T_Z, torsion_T_Zbar;
  double sasakian_defect = 0.0;
};

inline TWCoefficients tw_connection(const PseudohermitianFrame&, const StructureFunctions& s, EvalContext& ctx) {
  const cplx I(0.0, 1.0);
  const cplx a = s.a.value(ctx), b = s.b.value(ctx), c = s.c.value(ctx);
  return {-I * std::conj(a), I * a, -b, c, std::abs(c)};
}

inline TWCoefficients tw_connection(const PseudohermitianFrame& f, const StructureFunctions& s, const ChartPoint& p,
                                    DiffMode mode = DiffMode::ad) {
  EvalContext ctx(p, mode);
  return tw_connection(f, s, ctx);
}

/// Adaptedness screen: max over the grid of |b − i/2|, |Re c|, |c − c(center)|,
/// |ac| and |Ta − (i/2)a|.
inline double adaptedness_defect(const PseudohermitianFrame& f, const StructureFunctions& s,
                                 DiffMode mode = DiffMode::ad) {
  const cplx I(0.0, 1.0);
  const cplx c0 = s.c(f.grid.center(), mode);
  const ScalarField Ta = derive(f.T, s.a);
  return grid_max(f.grid, mode, [&](EvalContext& ctx) {
    const cplx a = s.a.value(ctx), b = s.b.value(ctx), c = s.c.value(ctx);
    return std::max({std::abs(b - 0.5 * I), std::abs(c.real()), std::abs(c - c0), std::abs(a * c),
                     std::abs(Ta.value(ctx) - 0.5 * I * a)});
  });
}

}  // namespace crverify
