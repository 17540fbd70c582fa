#pragma once

// Truncated multivariate Taylor arithmetic in the three chart coordinates.
//
// A Jet of order n holds the Taylor coefficients of a complex scalar field up
// to total degree n around a fixed point. Arithmetic propagates the order
// (min of the operands); differentiation lowers it by one. This plays the role
// of arbitrarily nested forward-mode dual numbers without the 2^depth blowup
// of nesting them.

#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "crverify/errors.hpp"

namespace crverify {

using cplx = std::complex<double>;

namespace detail {

inline constexpr int kMaxJetOrder = 8;

constexpr int monomial_count(int order) {
  return order < 0 ? 0 : (order + 1) * (order + 2) * (order + 3) / 6;
}

struct MonomialTable {
  std::vector<std::array<int, 3>> exps;
  std::vector<int> degree;
  std::vector<double> factorial;  // e1! e2! e3!
  int index[kMaxJetOrder + 1][kMaxJetOrder + 1][kMaxJetOrder + 1];
  // products[n]: (i, j, k) with deg(i) + deg(j) <= n and exps[k] = exps[i] + exps[j]
  std::array<std::vector<std::array<int, 3>>, kMaxJetOrder + 1> products;
  // shift[axis][t]: index of exps[t] + unit(axis), or -1 beyond the table
  std::array<std::vector<int>, 3> shift;

  MonomialTable() {
    for (auto& a : index)
      for (auto& b : a)
        for (int& c : b) c = -1;
    for (int d = 0; d <= kMaxJetOrder; ++d) {
      for (int e1 = d; e1 >= 0; --e1) {
        for (int e2 = d - e1; e2 >= 0; --e2) {
          const int e3 = d - e1 - e2;
          index[e1][e2][e3] = static_cast<int>(exps.size());
          exps.push_back({e1, e2, e3});
          degree.push_back(d);
          factorial.push_back(fact(e1) * fact(e2) * fact(e3));
        }
      }
    }
    for (int n = 0; n <= kMaxJetOrder; ++n) {
      const int count = monomial_count(n);
      for (int i = 0; i < count; ++i) {
        for (int j = 0; j < count; ++j) {
          if (degree[i] + degree[j] > n) continue;
          const auto& a = exps[i];
          const auto& b = exps[j];
          products[n].push_back({i, j, index[a[0] + b[0]][a[1] + b[1]][a[2] + b[2]]});
        }
      }
    }
    for (int axis = 0; axis < 3; ++axis) {
      for (std::size_t t = 0; t < exps.size(); ++t) {
        auto e = exps[t];
        ++e[axis];
        const bool inside = e[0] + e[1] + e[2] <= kMaxJetOrder;
        shift[axis].push_back(inside ? index[e[0]][e[1]][e[2]] : -1);
      }
    }
  }

  static double fact(int k) {
    double r = 1.0;
    for (int i = 2; i <= k; ++i) r *= i;
    return r;
  }
};

inline const MonomialTable& monomials() {
  static const MonomialTable table;
  return table;
}

}  // namespace detail

class Jet {
 public:
  /// Order carried by exact constants; any finite order wins a min against it.
  static constexpr int kExact = std::numeric_limits<int>::max() / 4;

  Jet() : order_(kExact), degree_(0), c_(1, cplx{}) {}
  Jet(cplx c) : order_(kExact), degree_(0), c_(1, c) {}  // NOLINT(implicit)
  Jet(double c) : Jet(cplx(c)) {}                        // NOLINT(implicit)

  /// The coordinate function u_axis expanded around `at`, valid to `order`.
  static Jet variable(int axis, double at, int order) {
    check_order(order);
    Jet j = empty(order, std::min(order, 1));
    j.c_[0] = at;
    if (order >= 1) j.c_[1 + axis] = 1.0;
    return j;
  }

  /// Coefficients in graded monomial order; size must be monomial_count(order).
  static Jet from_coefficients(std::vector<cplx> coeffs, int order) {
    check_order(order);
    if (static_cast<int>(coeffs.size()) != detail::monomial_count(order))
      throw std::invalid_argument("Jet::from_coefficients: size does not match order");
    Jet j;
    j.order_ = order;
    j.degree_ = order;
    j.c_ = std::move(coeffs);
    return j;
  }

  /// A jet that carries no information (result of differentiating order 0).
  static Jet invalid() { return empty(-1, -1); }

  int order() const noexcept { return order_; }
  bool exact() const noexcept { return order_ >= kExact; }
  bool valid() const noexcept { return order_ >= 0; }

  cplx value() const {
    if (order_ < 0) throw DepthExceeded("jet has no valid coefficients left");
    return c_[0];
  }

  cplx coeff(int idx) const {
    return idx < static_cast<int>(c_.size()) ? c_[idx] : cplx{};
  }

  cplx coeff(const std::array<int, 3>& e) const {
    const int deg = e[0] + e[1] + e[2];
    if (deg > order_) throw DepthExceeded("coefficient of degree " + std::to_string(deg) +
                                          " requested from jet of order " + std::to_string(order_));
    if (deg > detail::kMaxJetOrder) return {};
    return coeff(detail::monomials().index[e[0]][e[1]][e[2]]);
  }

  /// The mixed partial derivative d^e at the expansion point.
  cplx derivative(const std::array<int, 3>& e) const {
    return coeff(e) * detail::MonomialTable::fact(e[0]) * detail::MonomialTable::fact(e[1]) *
           detail::MonomialTable::fact(e[2]);
  }

  Jet partial(int axis) const {
    if (order_ < 0) return invalid();
    if (exact() && degree_ == 0) return Jet(0.0);
    const auto& tab = detail::monomials();
    const int new_order = exact() ? kExact : order_ - 1;
    const int new_degree = std::max(degree_ - 1, 0);
    if (new_order < 0) return invalid();
    Jet r = empty(new_order, std::min(new_degree, new_order));
    for (int t = 0; t < static_cast<int>(r.c_.size()); ++t) {
      const int s = tab.shift[axis][t];
      if (s >= 0 && s < static_cast<int>(c_.size())) r.c_[t] = c_[s] * double(tab.exps[t][axis] + 1);
    }
    return r;
  }

  Jet truncated(int order) const {
    if (order >= order_) return *this;
    if (order < 0) return invalid();
    Jet r = *this;
    r.order_ = order;
    r.degree_ = std::min(degree_, order);
    r.c_.resize(detail::monomial_count(r.degree_));
    return r;
  }

  Jet conj() const {
    Jet r = *this;
    for (auto& x : r.c_) x = std::conj(x);
    return r;
  }

  Jet operator-() const {
    Jet r = *this;
    for (auto& x : r.c_) x = -x;
    return r;
  }

  Jet& operator+=(const Jet& o) { return *this = add(*this, o, 1.0); }
  Jet& operator-=(const Jet& o) { return *this = add(*this, o, -1.0); }
  Jet& operator*=(const Jet& o) { return *this = mul(*this, o); }
  Jet& operator/=(const Jet& o) { return *this = mul(*this, o.reciprocal()); }

  friend Jet operator+(const Jet& a, const Jet& b) { return add(a, b, 1.0); }
  friend Jet operator-(const Jet& a, const Jet& b) { return add(a, b, -1.0); }
  friend Jet operator*(const Jet& a, const Jet& b) { return mul(a, b); }
  friend Jet operator/(const Jet& a, const Jet& b) { return mul(a, b.reciprocal()); }

  Jet reciprocal() const {
    return compose([](cplx x0, int n, std::vector<cplx>& t) {
      t[0] = 1.0 / x0;
      for (int k = 1; k <= n; ++k) t[k] = -t[k - 1] / x0;
    });
  }

  friend Jet sqrt(const Jet& x) {
    return x.compose([](cplx x0, int n, std::vector<cplx>& t) {
      t[0] = std::sqrt(x0);
      for (int k = 1; k <= n; ++k) t[k] = t[k - 1] * ((0.5 - (k - 1)) / k) / x0;
    });
  }

  friend Jet exp(const Jet& x) {
    return x.compose([](cplx x0, int n, std::vector<cplx>& t) {
      t[0] = std::exp(x0);
      for (int k = 1; k <= n; ++k) t[k] = t[k - 1] / double(k);
    });
  }

  friend Jet sin(const Jet& x) {
    return x.compose([](cplx x0, int n, std::vector<cplx>& t) {
      const cplx cyc[4] = {std::sin(x0), std::cos(x0), -std::sin(x0), -std::cos(x0)};
      double f = 1.0;
      for (int k = 0; k <= n; ++k) {
        if (k > 0) f *= k;
        t[k] = cyc[k % 4] / f;
      }
    });
  }

  friend Jet cos(const Jet& x) {
    return x.compose([](cplx x0, int n, std::vector<cplx>& t) {
      const cplx cyc[4] = {std::cos(x0), -std::sin(x0), -std::cos(x0), std::sin(x0)};
      double f = 1.0;
      for (int k = 0; k <= n; ++k) {
        if (k > 0) f *= k;
        t[k] = cyc[k % 4] / f;
      }
    });
  }

  friend Jet conj(const Jet& x) { return x.conj(); }

  friend Jet pow(const Jet& x, int k) {
    if (k < 0) return pow(x, -k).reciprocal();
    Jet result(1.0);
    Jet base = x;
    while (k > 0) {
      if (k & 1) result = result * base;
      k >>= 1;
      if (k > 0) base = base * base;
    }
    return result;
  }

 private:
  static void check_order(int order) {
    if (order > detail::kMaxJetOrder)
      throw DepthExceeded("jet order " + std::to_string(order) + " exceeds engine limit " +
                          std::to_string(detail::kMaxJetOrder));
  }

  static Jet empty(int order, int degree) {
    Jet j;
    j.order_ = order;
    j.degree_ = degree;
    j.c_.assign(detail::monomial_count(degree), cplx{});
    return j;
  }

  static Jet add(const Jet& a, const Jet& b, double sign) {
    const int order = std::min(a.order_, b.order_);
    if (order < 0) return invalid();
    const int degree = std::min(order, std::max(a.degree_, b.degree_));
    Jet r = empty(order, degree);
    const auto n = r.c_.size();
    for (std::size_t i = 0; i < n && i < a.c_.size(); ++i) r.c_[i] = a.c_[i];
    for (std::size_t i = 0; i < n && i < b.c_.size(); ++i) r.c_[i] += sign * b.c_[i];
    return r;
  }

  static Jet mul(const Jet& a, const Jet& b) {
    const int order = std::min(a.order_, b.order_);
    if (order < 0) return invalid();
    if (b.degree_ == 0) return scaled(a.truncated(order), b.c_[0]);
    if (a.degree_ == 0) return scaled(b.truncated(order), a.c_[0]);
    const int degree = std::min({order, a.degree_ + b.degree_, detail::kMaxJetOrder});
    Jet r = empty(order, degree);
    const int na = static_cast<int>(a.c_.size());
    const int nb = static_cast<int>(b.c_.size());
    for (const auto& p : detail::monomials().products[degree]) {
      if (p[0] < na && p[1] < nb) r.c_[p[2]] += a.c_[p[0]] * b.c_[p[1]];
    }
    return r;
  }

  static Jet scaled(Jet a, cplx s) {
    for (auto& x : a.c_) x *= s;
    return a;
  }

  // f(x0 + h) = sum_k t_k h^k with h the non-constant part of this jet.
  template <class Series>
  Jet compose(Series series) const {
    if (order_ < 0) return invalid();
    const cplx x0 = c_[0];
    if (degree_ == 0) {
      std::vector<cplx> t(1);
      series(x0, 0, t);
      Jet r = *this;
      r.c_[0] = t[0];
      return r;
    }
    if (exact())
      throw std::logic_error("transcendental function of an exact non-constant jet");
    const int n = order_;
    std::vector<cplx> t(n + 1);
    series(x0, n, t);
    Jet h = *this;
    h.c_[0] = 0.0;
    Jet r(t[n]);
    for (int k = n - 1; k >= 0; --k) r = r * h + Jet(t[k]);
    return r;
  }

  int order_;
  int degree_;
  std::vector<cplx> c_;
};

}  // namespace crverify
