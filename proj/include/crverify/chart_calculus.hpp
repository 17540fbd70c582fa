#pragma once

// Differentiable scalar/vector/one-form fields on a single three-dimensional
// coordinate chart.
//
// Fields form an immutable expression graph. Evaluating a field at a point
// produces a Jet of a requested order; derivation nodes request one more order
// from their operands, so arbitrarily nested derivatives stay exact. An
// EvalContext memoizes node values at one point, so shared subexpressions (a
// normalized frame used by every downstream formula) are expanded once.
//
// In DiffMode::fd the leaves are expanded by central finite differences with
// one Richardson step instead of automatic differentiation. Everything above
// the leaves is unchanged, so any check can be re-run against the oracle.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "crverify/errors.hpp"
#include "crverify/jet.hpp"

namespace crverify {

enum class DiffMode { ad, fd };

inline const char* to_string(DiffMode m) { return m == DiffMode::ad ? "ad" : "fd"; }

struct ChartPoint {
  std::array<double, 3> u{};

  ChartPoint() = default;
  ChartPoint(double u1, double u2, double u3) : u{u1, u2, u3} {}

  double operator[](std::size_t k) const { return u[k]; }
  bool finite() const {
    return std::isfinite(u[0]) && std::isfinite(u[1]) && std::isfinite(u[2]);
  }
};

/// Axis-aligned sample box with `resolution` points per axis, endpoints included.
struct GridBox {
  std::array<double, 3> lo{-1.0, -1.0, -1.0};
  std::array<double, 3> hi{1.0, 1.0, 1.0};
  int resolution = 5;

  std::vector<ChartPoint> points() const {
    std::vector<ChartPoint> pts;
    const int n = std::max(resolution, 1);
    pts.reserve(static_cast<std::size_t>(n) * n * n);
    auto coord = [&](int axis, int i) {
      return n == 1 ? 0.5 * (lo[axis] + hi[axis]) : lo[axis] + (hi[axis] - lo[axis]) * i / (n - 1);
    };
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) pts.emplace_back(coord(0, i), coord(1, j), coord(2, k));
    return pts;
  }

  ChartPoint center() const {
    return {0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1]), 0.5 * (lo[2] + hi[2])};
  }

  GridBox with_resolution(int n) const {
    GridBox g = *this;
    g.resolution = n;
    return g;
  }

  std::size_t size() const {
    const auto n = static_cast<std::size_t>(std::max(resolution, 1));
    return n * n * n;
  }
};

class EvalContext;

class FieldNode {
 public:
  virtual ~FieldNode() = default;
  virtual std::size_t width() const { return 1; }
  /// Jets of every output, each valid to at least `order`.
  virtual std::vector<Jet> compute(EvalContext& ctx, int order) const = 0;
};

using NodePtr = std::shared_ptr<const FieldNode>;

class EvalContext {
 public:
  explicit EvalContext(ChartPoint p, DiffMode mode = DiffMode::ad) : point_(p), mode_(mode) {}

  const ChartPoint& point() const noexcept { return point_; }
  DiffMode mode() const noexcept { return mode_; }

  std::shared_ptr<const std::vector<Jet>> evaluate(const NodePtr& node, int order) {
    auto it = cache_.find(node.get());
    if (it != cache_.end() && it->second.order >= order) return it->second.jets;
    auto jets = std::make_shared<const std::vector<Jet>>(node->compute(*this, order));
    for (const Jet& j : *jets) {
      if (j.order() < order)
        throw DepthExceeded("field expansion reached order " + std::to_string(j.order()) +
                            ", " + std::to_string(order) + " required");
    }
    // The entry also owns the node so its address cannot be recycled while cached.
    cache_[node.get()] = Entry{order, jets, node};
    return jets;
  }

 private:
  struct Entry {
    int order;
    std::shared_ptr<const std::vector<Jet>> jets;
    NodePtr owner;
  };

  ChartPoint point_;
  DiffMode mode_;
  std::unordered_map<const FieldNode*, Entry> cache_;
};

namespace detail {

class ConstantNode final : public FieldNode {
 public:
  explicit ConstantNode(cplx c) : c_(c) {}
  std::vector<Jet> compute(EvalContext&, int) const override { return {Jet(c_)}; }

 private:
  cplx c_;
};

class FunctionNode final : public FieldNode {
 public:
  using Fn = std::function<std::vector<Jet>(EvalContext&, int)>;
  FunctionNode(std::size_t width, Fn fn) : width_(width), fn_(std::move(fn)) {}
  std::size_t width() const override { return width_; }
  std::vector<Jet> compute(EvalContext& ctx, int order) const override { return fn_(ctx, order); }

 private:
  std::size_t width_;
  Fn fn_;
};

inline double fd_step(int degree) {
  static constexpr double steps[] = {0.0, 1e-3, 3e-3, 6e-3, 1e-2, 2e-2, 3e-2, 4e-2, 5e-2};
  return steps[std::clamp(degree, 0, detail::kMaxJetOrder)];
}

/// Taylor coefficients of `f` at `p` from tensor-product central differences,
/// one Richardson step (error O(h^4)) per mixed partial.
template <class ValueFn>
Jet finite_difference_jet(const ValueFn& f, const ChartPoint& p, int order) {
  const auto& tab = monomials();
  const int count = monomial_count(order);
  std::vector<cplx> coeffs(count);
  auto binom = [](int n, int k) {
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
  };
  for (int idx = 0; idx < count; ++idx) {
    const auto& e = tab.exps[idx];
    const int deg = tab.degree[idx];
    if (deg == 0) {
      coeffs[idx] = f(std::array<cplx, 3>{p.u[0], p.u[1], p.u[2]});
      continue;
    }
    auto central = [&](double h) {
      cplx acc{};
      for (int j0 = 0; j0 <= e[0]; ++j0) {
        for (int j1 = 0; j1 <= e[1]; ++j1) {
          for (int j2 = 0; j2 <= e[2]; ++j2) {
            const double w = ((j0 + j1 + j2) % 2 ? -1.0 : 1.0) * binom(e[0], j0) *
                             binom(e[1], j1) * binom(e[2], j2);
            const std::array<cplx, 3> q{p.u[0] + (0.5 * e[0] - j0) * h,
                                        p.u[1] + (0.5 * e[1] - j1) * h,
                                        p.u[2] + (0.5 * e[2] - j2) * h};
            acc += w * f(q);
          }
        }
      }
      return acc / std::pow(h, deg);
    };
    const double h = fd_step(deg);
    const cplx d = (4.0 * central(0.5 * h) - central(h)) / 3.0;
    coeffs[idx] = d / tab.factorial[idx];
  }
  return Jet::from_coefficients(std::move(coeffs), order);
}

}  // namespace detail

/// Sentinel for leaves that can be differentiated to any order.
inline constexpr int kUnlimitedOrder = Jet::kExact;

class ScalarField {
 public:
  ScalarField() : ScalarField(cplx{}) {}
  ScalarField(cplx c) : node_(std::make_shared<detail::ConstantNode>(c)) {}  // NOLINT(implicit)
  ScalarField(double c) : ScalarField(cplx(c)) {}                           // NOLINT(implicit)
  ScalarField(NodePtr node, std::size_t slot = 0) : node_(std::move(node)), slot_(slot) {}

  Jet jet(EvalContext& ctx, int order) const { return (*ctx.evaluate(node_, order))[slot_]; }

  cplx value(EvalContext& ctx) const { return jet(ctx, 0).value(); }

  cplx operator()(const ChartPoint& p, DiffMode mode = DiffMode::ad) const {
    EvalContext ctx(p, mode);
    return value(ctx);
  }

  const NodePtr& node() const noexcept { return node_; }
  std::size_t slot() const noexcept { return slot_; }

 private:
  NodePtr node_;
  std::size_t slot_ = 0;
};

/// Builds a multi-output field node; `fn` returns `width` jets.
inline std::vector<ScalarField> make_node(std::size_t width, detail::FunctionNode::Fn fn) {
  auto node = std::make_shared<detail::FunctionNode>(width, std::move(fn));
  std::vector<ScalarField> out;
  out.reserve(width);
  for (std::size_t i = 0; i < width; ++i) out.emplace_back(node, i);
  return out;
}

/// Pointwise map of input fields, evaluated at the same order as requested.
inline ScalarField map_fields(std::vector<ScalarField> inputs,
                              std::function<Jet(const std::vector<Jet>&)> fn) {
  return make_node(1, [inputs = std::move(inputs), fn = std::move(fn)](EvalContext& ctx, int order) {
    std::vector<Jet> args;
    args.reserve(inputs.size());
    for (const auto& f : inputs) args.push_back(f.jet(ctx, order));
    return std::vector<Jet>{fn(args)};
  })[0];
}

/// A leaf field from a callable generic over the scalar type: it must accept
/// `std::array<Jet,3>` and `std::array<cplx,3>` coordinate arrays.
/// `max_order` bounds how often the leaf may be differentiated.
template <class F>
ScalarField make_field(F f, int max_order = kUnlimitedOrder) {
  return make_node(1, [f = std::move(f), max_order](EvalContext& ctx, int order) {
    if (order > max_order)
      throw DepthExceeded("field differentiable to order " + std::to_string(max_order) +
                          ", order " + std::to_string(order) + " requested");
    const ChartPoint& p = ctx.point();
    if (ctx.mode() == DiffMode::fd) {
      auto value = [&](const std::array<cplx, 3>& q) -> cplx { return f(q); };
      return std::vector<Jet>{detail::finite_difference_jet(value, p, order)};
    }
    const std::array<Jet, 3> u{Jet::variable(0, p.u[0], order), Jet::variable(1, p.u[1], order),
                               Jet::variable(2, p.u[2], order)};
    return std::vector<Jet>{Jet(f(u)).truncated(order)};
  })[0];
}

inline ScalarField coordinate(int axis) {
  return make_field([axis](const auto& u) { return u[axis]; });
}

inline ScalarField operator+(const ScalarField& a, const ScalarField& b) {
  return map_fields({a, b}, [](const std::vector<Jet>& x) { return x[0] + x[1]; });
}
inline ScalarField operator-(const ScalarField& a, const ScalarField& b) {
  return map_fields({a, b}, [](const std::vector<Jet>& x) { return x[0] - x[1]; });
}
inline ScalarField operator*(const ScalarField& a, const ScalarField& b) {
  return map_fields({a, b}, [](const std::vector<Jet>& x) { return x[0] * x[1]; });
}
inline ScalarField operator/(const ScalarField& a, const ScalarField& b) {
  return map_fields({a, b}, [](const std::vector<Jet>& x) { return x[0] / x[1]; });
}
inline ScalarField operator-(const ScalarField& a) {
  return map_fields({a}, [](const std::vector<Jet>& x) { return -x[0]; });
}
inline ScalarField conj(const ScalarField& a) {
  return map_fields({a}, [](const std::vector<Jet>& x) { return x[0].conj(); });
}
inline ScalarField sqrt(const ScalarField& a) {
  return map_fields({a}, [](const std::vector<Jet>& x) { return sqrt(x[0]); });
}
inline ScalarField exp(const ScalarField& a) {
  return map_fields({a}, [](const std::vector<Jet>& x) { return exp(x[0]); });
}
inline ScalarField sin(const ScalarField& a) {
  return map_fields({a}, [](const std::vector<Jet>& x) { return sin(x[0]); });
}
inline ScalarField cos(const ScalarField& a) {
  return map_fields({a}, [](const std::vector<Jet>& x) { return cos(x[0]); });
}

/// Complex vector field: coefficients against the coordinate frame d/du_k.
struct CVectorField {
  std::array<ScalarField, 3> comp;
  bool real = false;

  const ScalarField& operator[](std::size_t k) const { return comp[k]; }
};

/// Complex one-form: coefficients against du_k.
struct OneForm {
  std::array<ScalarField, 3> comp;
  bool real = false;

  const ScalarField& operator[](std::size_t k) const { return comp[k]; }

  ScalarField operator()(const CVectorField& v) const {
    return map_fields({comp[0], comp[1], comp[2], v[0], v[1], v[2]}, [](const std::vector<Jet>& x) {
      return x[0] * x[3] + x[1] * x[4] + x[2] * x[5];
    });
  }
};

inline CVectorField coordinate_field(int axis) {
  CVectorField v;
  v.real = true;
  for (int k = 0; k < 3; ++k) v.comp[k] = ScalarField(k == axis ? 1.0 : 0.0);
  return v;
}

inline CVectorField conj(const CVectorField& v) {
  if (v.real) return v;
  return {{conj(v[0]), conj(v[1]), conj(v[2])}, false};
}

inline OneForm conj(const OneForm& w) {
  if (w.real) return w;
  return {{conj(w[0]), conj(w[1]), conj(w[2])}, false};
}

inline CVectorField operator*(const ScalarField& s, const CVectorField& v) {
  return {{s * v[0], s * v[1], s * v[2]}, false};
}
inline CVectorField operator+(const CVectorField& a, const CVectorField& b) {
  return {{a[0] + b[0], a[1] + b[1], a[2] + b[2]}, a.real && b.real};
}
inline CVectorField operator-(const CVectorField& a, const CVectorField& b) {
  return {{a[0] - b[0], a[1] - b[1], a[2] - b[2]}, a.real && b.real};
}
inline OneForm operator*(const ScalarField& s, const OneForm& w) {
  return {{s * w[0], s * w[1], s * w[2]}, false};
}

/// U(h) = sum_k U^k dh/du_k, itself a field.
inline ScalarField derive(const CVectorField& U, const ScalarField& h) {
  return make_node(1, [U, h](EvalContext& ctx, int order) {
    const Jet dh = h.jet(ctx, order + 1);
    Jet acc = U[0].jet(ctx, order) * dh.partial(0);
    acc += U[1].jet(ctx, order) * dh.partial(1);
    acc += U[2].jet(ctx, order) * dh.partial(2);
    return std::vector<Jet>{acc};
  })[0];
}

inline cplx derive(const CVectorField& U, const ScalarField& h, const ChartPoint& p,
                   DiffMode mode = DiffMode::ad) {
  return derive(U, h)(p, mode);
}

/// Component k of [U,V] is U(V^k) - V(U^k).
inline CVectorField lie_bracket(const CVectorField& U, const CVectorField& V) {
  CVectorField r;
  r.real = U.real && V.real;
  for (int k = 0; k < 3; ++k) r.comp[k] = derive(U, V[k]) - derive(V, U[k]);
  return r;
}

/// dw(U,V) = U(w(V)) - V(w(U)) - w([U,V]); full Cartan convention, no 1/2.
inline ScalarField cartan_d(const OneForm& w, const CVectorField& U, const CVectorField& V) {
  return derive(U, w(V)) - derive(V, w(U)) - w(lie_bracket(U, V));
}

inline cplx cartan_d(const OneForm& w, const CVectorField& U, const CVectorField& V,
                     const ChartPoint& p, DiffMode mode = DiffMode::ad) {
  return cartan_d(w, U, V)(p, mode);
}

/// Max of a per-point measurement over the grid (order-independent reduction).
template <class F>
double grid_max(const GridBox& grid, DiffMode mode, F&& measure) {
  double m = 0.0;
  for (const auto& p : grid.points()) {
    EvalContext ctx(p, mode);
    m = std::max(m, static_cast<double>(measure(ctx)));
  }
  return m;
}

}  // namespace crverify
