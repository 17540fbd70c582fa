#pragma once

// Isometric immersions f: chart → ℝⁿ of a pseudohermitian frame.
//
// Ambient vectors are complex n-vectors; the pairing ⟨x,y⟩ = Σ x_k y_k is the
// bilinear extension of the real dot product. Hermitian norms are used only to
// measure defects. Tangential projections use the bilinear Gram matrix of
// (Zf, Z̄f, Tf).

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "crverify/chart_calculus.hpp"
#include "crverify/pseudohermitian.hpp"

namespace crverify {

struct ImmersionSpec {
  int n = 0;
  std::vector<ScalarField> f;
};

/// Point value of an ambient vector.
using AmbientVector = Eigen::VectorXcd;

/// Bilinear pairing (no conjugation).
inline cplx bilinear(const AmbientVector& x, const AmbientVector& y) { return (x.array() * y.array()).sum(); }

/// An ℂⁿ-valued field.
struct AmbientField {
  std::vector<ScalarField> c;

  std::size_t size() const { return c.size(); }
  const ScalarField& operator[](std::size_t k) const { return c[k]; }

  AmbientVector value(EvalContext& ctx) const {
    AmbientVector v(static_cast<Eigen::Index>(c.size()));
    for (std::size_t k = 0; k < c.size(); ++k) v(static_cast<Eigen::Index>(k)) = c[k].value(ctx);
    return v;
  }
};

inline AmbientField operator+(const AmbientField& x, const AmbientField& y) {
  AmbientField r;
  for (std::size_t k = 0; k < x.size(); ++k) r.c.push_back(x[k] + y[k]);
  return r;
}
inline AmbientField operator-(const AmbientField& x, const AmbientField& y) {
  AmbientField r;
  for (std::size_t k = 0; k < x.size(); ++k) r.c.push_back(x[k] - y[k]);
  return r;
}
inline AmbientField operator*(const ScalarField& s, const AmbientField& x) {
  AmbientField r;
  for (std::size_t k = 0; k < x.size(); ++k) r.c.push_back(s * x[k]);
  return r;
}
inline AmbientField conj(const AmbientField& x) {
  AmbientField r;
  for (const auto& s : x.c) r.c.push_back(conj(s));
  return r;
}

/// Componentwise U(x).
inline AmbientField apply(const CVectorField& U, const AmbientField& x) {
  AmbientField r;
  for (const auto& s : x.c) r.c.push_back(derive(U, s));
  return r;
}

inline ScalarField pairing(const AmbientField& x, const AmbientField& y) {
  std::vector<ScalarField> in(x.c);
  in.insert(in.end(), y.c.begin(), y.c.end());
  const std::size_t n = x.size();
  return map_fields(std::move(in), [n](const std::vector<Jet>& v) {
    Jet acc = v[0] * v[n];
    for (std::size_t k = 1; k < n; ++k) acc += v[k] * v[n + k];
    return acc;
  });
}

/// Frame directions Z, Z̄, T.
enum class Dir { Z = 0, Zbar = 1, T = 2 };
inline constexpr std::array<Dir, 3> kDirs{Dir::Z, Dir::Zbar, Dir::T};

inline const char* to_string(Dir d) {
  switch (d) {
    case Dir::Z: return "Z";
    case Dir::Zbar: return "Zbar";
    case Dir::T: return "T";
  }
  return "?";
}

inline Dir conj(Dir d) { return d == Dir::Z ? Dir::Zbar : d == Dir::Zbar ? Dir::Z : Dir::T; }

enum class SecondFormMode { formula, projection };

struct SecondFormTable {
  std::array<std::array<AmbientVector, 3>, 3> A;  // indexed by Dir
  std::vector<Eigen::VectorXd> normal_basis;
  int first_normal_rank = 0;

  const AmbientVector& operator()(Dir u, Dir v) const {
    return A[static_cast<int>(u)][static_cast<int>(v)];
  }
};

/// Builds and caches every derived field of one (frame, immersion) pair.
class ImmersionGeometry {
 public:
  ImmersionGeometry(PseudohermitianFrame frame, StructureFunctions fns, ImmersionSpec imm)
      : frame_(std::move(frame)), fns_(std::move(fns)), imm_(std::move(imm)) {
    f_.c = imm_.f;
    for (Dir d : kDirs) first_[idx(d)] = apply(vec(d), f_);
    std::vector<ScalarField> gram;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) gram.push_back(pairing(first_[i], first_[j]));
    auto inv = make_node(9, [gram](EvalContext& ctx, int order) {
      std::array<Jet, 9> m;
      for (int k = 0; k < 9; ++k) m[k] = gram[k].jet(ctx, order);
      const auto r = detail::inverse3(m);
      return std::vector<Jet>(r.begin(), r.end());
    });
    for (int k = 0; k < 9; ++k) {
      gram_[k] = gram[k];
      gram_inv_[k] = inv[k];
    }
  }

  const PseudohermitianFrame& frame() const { return frame_; }
  const StructureFunctions& fns() const { return fns_; }
  const ImmersionSpec& immersion() const { return imm_; }
  int ambient_dim() const { return imm_.n; }

  const CVectorField& vec(Dir d) const {
    return d == Dir::Z ? frame_.Z : d == Dir::Zbar ? frame_.Zbar : frame_.T;
  }

  const AmbientField& first(Dir u) const { return first_[idx(u)]; }

  /// UVf = U(V(f)).
  const AmbientField& second(Dir u, Dir v) const {
    const int key = 3 * idx(u) + idx(v);
    auto it = second_.find(key);
    if (it == second_.end()) it = second_.emplace(key, apply(vec(u), first(v))).first;
    return it->second;
  }

  AmbientField third(Dir u, Dir v, Dir w) const { return apply(vec(u), second(v, w)); }

  const ScalarField& gram(int i, int j) const { return gram_[3 * i + j]; }
  const ScalarField& gram_inverse(int i, int j) const { return gram_inv_[3 * i + j]; }

  /// Coefficients α with tangential part Σ_j α_j E_j f of x.
  std::array<ScalarField, 3> tangential(const AmbientField& x) const {
    std::array<ScalarField, 3> p;
    for (int i = 0; i < 3; ++i) p[i] = pairing(x, first_[i]);
    std::array<ScalarField, 3> alpha;
    for (int j = 0; j < 3; ++j)
      alpha[j] = gram_inv_[3 * j + 0] * p[0] + gram_inv_[3 * j + 1] * p[1] + gram_inv_[3 * j + 2] * p[2];
    return alpha;
  }

  AmbientField normal_part(const AmbientField& x) const {
    const auto alpha = tangential(x);
    return x - (alpha[0] * first_[0] + alpha[1] * first_[1] + alpha[2] * first_[2]);
  }

  /// Levi-Civita ∇_U V as coefficients against (Z, Z̄, T).
  std::array<ScalarField, 3> levi_civita(Dir u, Dir v) const { return tangential(second(u, v)); }

  /// A(U,V) in the chosen mode.
  const AmbientField& A(Dir u, Dir v, SecondFormMode mode = SecondFormMode::projection) const {
    const int key = (mode == SecondFormMode::formula ? 9 : 0) + 3 * idx(u) + idx(v);
    auto it = A_.find(key);
    if (it != A_.end()) return it->second;
    AmbientField val = mode == SecondFormMode::projection ? normal_part(second(u, v)) : formula(u, v);
    return A_.emplace(key, std::move(val)).first->second;
  }

  /// A(Σ α_j E_j, W) for a tangent vector given by frame coefficients.
  AmbientField A_combination(const std::array<ScalarField, 3>& alpha, Dir w) const {
    return alpha[0] * A(Dir::Z, w) + alpha[1] * A(Dir::Zbar, w) + alpha[2] * A(Dir::T, w);
  }

  /// D_U ξ = normal part of U(ξ).
  AmbientField D(Dir u, const AmbientField& xi) const { return normal_part(apply(vec(u), xi)); }
  AmbientField D(const CVectorField& U, const AmbientField& xi) const { return normal_part(apply(U, xi)); }

  /// (D_U A)(V,W) = D_U(A(V,W)) − A(∇_U V, W) − A(V, ∇_U W).
  AmbientField covariant_A(Dir u, Dir v, Dir w) const {
    return D(u, A(v, w)) - A_combination(levi_civita(u, v), w) - A_combination(levi_civita(u, w), v);
  }

  AmbientField mean_curvature() const {
    return ScalarField(2.0) * A(Dir::Z, Dir::Zbar) + A(Dir::T, Dir::T);
  }

  /// Orthonormal real normal frame from Gram–Schmidt over e_1..e_n, as fields.
  const std::vector<AmbientField>& normal_basis() const {
    if (!normal_) normal_ = std::make_shared<std::vector<AmbientField>>(build_normal_basis());
    return *normal_;
  }

  /// Frame matrix M of the shape operator: A_ξ E_i = Σ_j M(j,i) E_j.
  Eigen::Matrix3cd shape_operator(const AmbientVector& xi, EvalContext& ctx) const {
    Eigen::Matrix3cd S, Ginv;
    for (int i = 0; i < 3; ++i) {
      for (int k = 0; k < 3; ++k) {
        S(i, k) = bilinear(xi, A(kDirs[i], kDirs[k]).value(ctx));
        Ginv(i, k) = gram_inv_[3 * i + k].value(ctx);
      }
    }
    return Ginv * S;
  }

  /// R^⊥(U,V)ξ = D_U D_V ξ − D_V D_U ξ − D_[U,V] ξ.
  AmbientField normal_curvature(Dir u, Dir v, const AmbientField& xi) const {
    const CVectorField br = lie_bracket(vec(u), vec(v));
    return D(u, D(v, xi)) - D(v, D(u, xi)) - D(br, xi);
  }

  /// Tangent-space SVD rank of the A-values at the point (threshold 1e-6).
  int first_normal_rank(EvalContext& ctx) const {
    const Eigen::Index n = imm_.n;
    Eigen::MatrixXd M(n, 12);
    int col = 0;
    for (auto [u, v] : {std::pair{Dir::Z, Dir::Z}, std::pair{Dir::Z, Dir::Zbar}, std::pair{Dir::Z, Dir::T},
                        std::pair{Dir::T, Dir::T}, std::pair{Dir::Zbar, Dir::Zbar}, std::pair{Dir::Zbar, Dir::T}}) {
      const AmbientVector a = A(u, v).value(ctx);
      M.col(col++) = a.real();
      M.col(col++) = a.imag();
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
    const auto s = svd.singularValues();
    int rank = 0;
    for (Eigen::Index k = 0; k < s.size(); ++k)
      if (s(k) > 1e-6) ++rank;
    return rank;
  }

  /// RankDrop when the first normal rank differs between p and p ± h e_k.
  void check_rank_stable(const ChartPoint& p, DiffMode mode, double h = 1e-3) const {
    EvalContext c0(p, mode);
    const int r0 = first_normal_rank(c0);
    for (int k = 0; k < 3; ++k) {
      for (double s : {-h, h}) {
        ChartPoint q = p;
        q.u[k] += s;
        EvalContext cq(q, mode);
        const int rq = first_normal_rank(cq);
        if (rq != r0)
          throw RankDrop("first normal rank changes from " + std::to_string(r0) + " to " + std::to_string(rq) +
                         " near the point");
      }
    }
  }

  SecondFormTable table(EvalContext& ctx, SecondFormMode mode) const {
    SecondFormTable t;
    for (Dir u : kDirs)
      for (Dir v : kDirs) t.A[idx(u)][idx(v)] = A(u, v, mode).value(ctx);
    for (const auto& nu : normal_basis()) t.normal_basis.push_back(nu.value(ctx).real());
    t.first_normal_rank = first_normal_rank(ctx);
    return t;
  }

 private:
  static int idx(Dir d) { return static_cast<int>(d); }

  AmbientField formula(Dir u, Dir v) const {
    const cplx I(0.0, 1.0);
    const ScalarField& a = fns_.a;
    const ScalarField& b = fns_.b;
    const ScalarField& c = fns_.c;
    const auto& Zf = first(Dir::Z);
    const auto& Zbf = first(Dir::Zbar);
    const auto& Tf = first(Dir::T);
    auto key = [](Dir x, Dir y) { return std::pair{std::min(idx(x), idx(y)), std::max(idx(x), idx(y))}; };
    const auto k = key(u, v);
    if (k == key(Dir::Z, Dir::Z)) return second(Dir::Z, Dir::Z) - ScalarField(I) * conj(a) * Zf + conj(c) * Tf;
    if (k == key(Dir::Zbar, Dir::Zbar))
      return second(Dir::Zbar, Dir::Zbar) + ScalarField(I) * a * Zbf + c * Tf;
    if (k == key(Dir::Z, Dir::Zbar))
      return second(Dir::Z, Dir::Zbar) + ScalarField(I) * conj(a) * Zbf + ScalarField(0.5 * I) * Tf;
    if (k == key(Dir::Z, Dir::T)) return second(Dir::T, Dir::Z) + (b - ScalarField(0.5 * I)) * Zf;
    if (k == key(Dir::Zbar, Dir::T)) return second(Dir::T, Dir::Zbar) + (conj(b) + ScalarField(0.5 * I)) * Zbf;
    return second(Dir::T, Dir::T);
  }

  std::vector<AmbientField> build_normal_basis() const {
    const int n = imm_.n;
    const int want = n - 3;
    std::vector<ScalarField> inputs;
    for (int i = 0; i < 3; ++i) inputs.insert(inputs.end(), first_[i].c.begin(), first_[i].c.end());
    inputs.insert(inputs.end(), gram_inv_.begin(), gram_inv_.end());
    if (want <= 0) return {};
    auto out = make_node(static_cast<std::size_t>(n * want), [inputs, n, want](EvalContext& ctx, int order) {
      std::vector<Jet> in;
      in.reserve(inputs.size());
      for (const auto& s : inputs) in.push_back(s.jet(ctx, order));
      auto Ef = [&](int i, int k) -> const Jet& { return in[i * n + k]; };
      auto Gi = [&](int i, int j) -> const Jet& { return in[3 * n + 3 * i + j]; };
      std::vector<std::vector<Jet>> basis;
      for (int seed = 0; seed < n && static_cast<int>(basis.size()) < want; ++seed) {
        std::vector<Jet> r(n, Jet(0.0));
        r[seed] = Jet(1.0);
        // remove tangential part: α_j = Σ_i Ginv_ji ⟨e_seed, E_i f⟩
        for (int j = 0; j < 3; ++j) {
          Jet alpha = Gi(j, 0) * Ef(0, seed) + Gi(j, 1) * Ef(1, seed) + Gi(j, 2) * Ef(2, seed);
          for (int k = 0; k < n; ++k) r[k] -= alpha * Ef(j, k);
        }
        for (const auto& nu : basis) {
          Jet d = r[0] * nu[0];
          for (int k = 1; k < n; ++k) d += r[k] * nu[k];
          for (int k = 0; k < n; ++k) r[k] -= d * nu[k];
        }
        Jet nn = r[0] * r[0];
        for (int k = 1; k < n; ++k) nn += r[k] * r[k];
        if (nn.value().real() <= 0.05) continue;
        const Jet inv = sqrt(nn).reciprocal();
        for (auto& x : r) x = x * inv;
        basis.push_back(std::move(r));
      }
      if (static_cast<int>(basis.size()) < want) throw RankDrop("differential of f has rank below 3");
      std::vector<Jet> flat;
      for (auto& v : basis) flat.insert(flat.end(), v.begin(), v.end());
      return flat;
    });
    std::vector<AmbientField> result(want);
    for (int m = 0; m < want; ++m)
      for (int k = 0; k < n; ++k) result[m].c.push_back(out[static_cast<std::size_t>(m * n + k)]);
    return result;
  }

  PseudohermitianFrame frame_;
  StructureFunctions fns_;
  ImmersionSpec imm_;
  AmbientField f_;
  std::array<AmbientField, 3> first_;
  std::array<ScalarField, 9> gram_, gram_inv_;
  mutable std::map<int, AmbientField> second_;
  mutable std::map<int, AmbientField> A_;
  mutable std::shared_ptr<std::vector<AmbientField>> normal_;
};

/// max(|⟨Zf,Zf⟩|, |⟨Tf,Zf⟩|, |‖Tf‖² − 1|, |‖Zf‖² − 1|) at the point.
inline double isometry_defect(const ImmersionGeometry& g, EvalContext& ctx) {
  const AmbientVector Zf = g.first(Dir::Z).value(ctx);
  const AmbientVector Tf = g.first(Dir::T).value(ctx);
  return std::max({std::abs(bilinear(Zf, Zf)), std::abs(bilinear(Tf, Zf)), std::abs(bilinear(Tf, Tf) - 1.0),
                   std::abs(bilinear(Zf, Zf.conjugate()) - 1.0)});
}

inline double isometry_defect(const PseudohermitianFrame& frame, const ImmersionSpec& imm, const ChartPoint& p,
                              DiffMode mode = DiffMode::ad) {
  const ImmersionGeometry g(frame, StructureFunctions{}, imm);
  EvalContext ctx(p, mode);
  return isometry_defect(g, ctx);
}

/// The nine first-order identities relating f's derivatives to a, b, c.
inline double first_order_identities_defect(const ImmersionGeometry& g, EvalContext& ctx) {
  const cplx I(0.0, 1.0);
  const cplx a = g.fns().a.value(ctx), b = g.fns().b.value(ctx), c = g.fns().c.value(ctx);
  const AmbientVector Zf = g.first(Dir::Z).value(ctx), Tf = g.first(Dir::T).value(ctx);
  auto s = [&](Dir u, Dir v) { return g.second(u, v).value(ctx); };
  const std::array<cplx, 9> r{
      bilinear(Zf, s(Dir::Z, Dir::T)) - std::conj(c),
      bilinear(Zf, s(Dir::Zbar, Dir::T)) + 0.5 * I,
      bilinear(Zf, s(Dir::T, Dir::T)),
      bilinear(Zf, s(Dir::Z, Dir::Zbar)) + I * std::conj(a),
      bilinear(Zf, s(Dir::Zbar, Dir::Zbar)) + I * a,
      bilinear(Zf, s(Dir::T, Dir::Zbar)) - (b - 0.5 * I),
      bilinear(Tf, s(Dir::T, Dir::Z)),
      bilinear(Tf, s(Dir::Z, Dir::Z)) + std::conj(c),
      bilinear(Tf, s(Dir::Zbar, Dir::Z)) - 0.5 * I,
  };
  double m = 0.0;
  for (const cplx& x : r) m = std::max(m, std::abs(x));
  return m;
}

inline double first_order_identities_defect(const PseudohermitianFrame& frame, const StructureFunctions& fns,
                                            const ImmersionSpec& imm, const ChartPoint& p,
                                            DiffMode mode = DiffMode::ad) {
  const ImmersionGeometry g(frame, fns, imm);
  EvalContext ctx(p, mode);
  return first_order_identities_defect(g, ctx);
}

/// Max entrywise |A_formula − A_projection| plus the tangency defect
/// max |⟨A(U,V), Wf⟩| of the projection values.
inline double second_form_mode_defect(const ImmersionGeometry& g, EvalContext& ctx) {
  double m = 0.0;
  for (Dir u : kDirs) {
    for (Dir v : kDirs) {
      const AmbientVector ap = g.A(u, v, SecondFormMode::projection).value(ctx);
      const AmbientVector af = g.A(u, v, SecondFormMode::formula).value(ctx);
      m = std::max(m, (ap - af).norm());
      for (Dir w : kDirs) m = std::max(m, std::abs(bilinear(ap, g.first(w).value(ctx))));
    }
  }
  return m;
}

/// The table in the requested mode; ModeMismatch when the two modes disagree
/// beyond `tol` at the point.
inline SecondFormTable second_fundamental_form(const ImmersionGeometry& g, EvalContext& ctx, SecondFormMode mode,
                                               double tol = 1e-6) {
  const double d = second_form_mode_defect(g, ctx);
  if (!(d <= tol))
    throw ModeMismatch("formula and projection second forms differ by " + std::to_string(d));
  return g.table(ctx, mode);
}

inline SecondFormTable second_fundamental_form(const PseudohermitianFrame& frame, const StructureFunctions& fns,
                                               const ImmersionSpec& imm, const ChartPoint& p, SecondFormMode mode,
                                               DiffMode dmode = DiffMode::ad, double tol = 1e-6) {
  const ImmersionGeometry g(frame, fns, imm);
  EvalContext ctx(p, dmode);
  return second_fundamental_form(g, ctx, mode, tol);
}

/// D_U of the normal basis vector ξ_index at p; RankDrop if the first normal
/// rank is not locally constant.
inline AmbientVector normal_connection(const ImmersionGeometry& g, Dir u, int xi_index, const ChartPoint& p,
                                       DiffMode mode = DiffMode::ad) {
  g.check_rank_stable(p, mode);
  const auto& basis = g.normal_basis();
  if (xi_index < 0 || xi_index >= static_cast<int>(basis.size()))
    throw std::out_of_range("normal basis index out of range");
  EvalContext ctx(p, mode);
  return g.D(u, basis[xi_index]).value(ctx);
}

inline AmbientVector covariant_A(const ImmersionGeometry& g, Dir u, Dir v, Dir w, const ChartPoint& p,
                                 DiffMode mode = DiffMode::ad) {
  g.check_rank_stable(p, mode);
  EvalContext ctx(p, mode);
  return g.covariant_A(u, v, w).value(ctx);
}

inline AmbientVector mean_curvature(const ImmersionGeometry& g, const ChartPoint& p, DiffMode mode = DiffMode::ad) {
  EvalContext ctx(p, mode);
  return g.mean_curvature().value(ctx);
}

inline Eigen::Matrix3cd shape_operator(const ImmersionGeometry& g, const AmbientVector& xi, const ChartPoint& p,
                                       DiffMode mode = DiffMode::ad) {
  EvalContext ctx(p, mode);
  return g.shape_operator(xi, ctx);
}

inline AmbientVector normal_curvature(const ImmersionGeometry& g, Dir u, Dir v, int xi_index, const ChartPoint& p,
                                      DiffMode mode = DiffMode::ad) {
  g.check_rank_stable(p, mode);
  EvalContext ctx(p, mode);
  return g.normal_curvature(u, v, g.normal_basis().at(xi_index)).value(ctx);
}

/// ⟨R(U1,U2)U3,U4⟩ from the second fundamental form (Gauss equation).
inline cplx gauss_curvature_term(const ImmersionGeometry& g, Dir u1, Dir u2, Dir u3, Dir u4, EvalContext& ctx) {
  return bilinear(g.A(u2, u3).value(ctx), g.A(u1, u4).value(ctx)) -
         bilinear(g.A(u1, u3).value(ctx), g.A(u2, u4).value(ctx));
}

/// Max over frame 4-tuples of |intrinsic ⟨R(U1,U2)U3,U4⟩ − Gauss-equation value|.
inline double gauss_equation_defect(const ImmersionGeometry& g, EvalContext& ctx) {
  const WebsterMetric metric(g.frame());
  double m = 0.0;
  for (Dir u1 : kDirs)
    for (Dir u2 : kDirs) {
      if (u1 == u2) continue;
      for (Dir u3 : kDirs)
        for (Dir u4 : kDirs) {
          if (u3 == u4) continue;
          const cplx intrinsic = metric.riemann(g.vec(u1), g.vec(u2), g.vec(u3), g.vec(u4), ctx);
          m = std::max(m, std::abs(intrinsic - gauss_curvature_term(g, u1, u2, u3, u4, ctx)));
        }
    }
  return m;
}

}  // namespace crverify
