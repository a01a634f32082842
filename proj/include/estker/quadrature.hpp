#ifndef ESTKER_QUADRATURE_HPP
#define ESTKER_QUADRATURE_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <vector>

#include "estker/errors.hpp"

namespace estker {

// Gauss-Legendre nodes/weights on [-1, 1], computed once per order by
// Newton iteration on the Legendre recurrence.
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  static const GaussRule& get(int n) {
    static std::map<int, GaussRule> cache;
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, make(n)).first;
    return it->second;
  }

  static GaussRule make(int n) {
    GaussRule r;
    r.nodes.resize(std::size_t(n));
    r.weights.resize(std::size_t(n));
    for (int i = 0; i < n; ++i) {
      double x = std::cos(M_PI * (double(i) + 0.75) / (double(n) + 0.5));
      double dp = 0.0;
      for (int iter = 0; iter < 100; ++iter) {
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
          double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / double(k);
          p0 = p1;
          p1 = p2;
        }
        dp = double(n) * (x * p1 - p0) / (x * x - 1.0);
        double dx = p1 / dp;
        x -= dx;
        if (std::abs(dx) < 1e-15) break;
      }
      r.nodes[std::size_t(n - 1 - i)] = x;
      r.weights[std::size_t(n - 1 - i)] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    return r;
  }
};

template <class F>
double gauss_panel(F&& f, double a, double b, int order = 16) {
  const GaussRule& rule = GaussRule::get(order);
  double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  double s = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) s += rule.weights[i] * f(mid + half * rule.nodes[i]);
  return s * half;
}

namespace detail {

template <class F>
double abs_gauss_panel(F& f, double a, double b, int order = 16) {
  const GaussRule& rule = GaussRule::get(order);
  double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  double s = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i)
    s += rule.weights[i] * std::abs(f(mid + half * rule.nodes[i]));
  return s * half;
}

template <class F>
double adaptive_segment(F& f, double a, double b, double tol, int depth) {
  double coarse = gauss_panel(f, a, b, 16);
  double mid = 0.5 * (a + b);
  double fine = gauss_panel(f, a, mid, 16) + gauss_panel(f, mid, b, 16);
  double err = std::abs(fine - coarse);
  // attainable accuracy floor: roundoff of the magnitude integral
  double floor = 64.0 * std::numeric_limits<double>::epsilon() * abs_gauss_panel(f, a, b);
  if (err <= std::max(tol, floor) || (b - a) < 1e-14) return fine;
  if (depth >= 30) {
    if (err > 1e6 * std::max(tol, floor))
      throw QuadratureFailure("adaptive quadrature failed to converge on [" + std::to_string(a) +
                              ", " + std::to_string(b) + "]");
    return fine;
  }
  return adaptive_segment(f, a, mid, 0.5 * tol, depth + 1) +
         adaptive_segment(f, mid, b, 0.5 * tol, depth + 1);
}

}  // namespace detail

// Adaptive Gauss-Legendre integration of f over [a, b].  Every breakpoint
// inside (a, b) becomes a panel boundary, so integrands with kinks at known
// locations keep full Gauss accuracy.
template <class F>
double integrate_adaptive(F&& f, double a, double b, double abs_tol = 1e-12,
                          std::vector<double> breakpoints = {}) {
  if (a == b) return 0.0;
  double sign = 1.0;
  if (a > b) {
    std::swap(a, b);
    sign = -1.0;
  }
  breakpoints.push_back(a);
  breakpoints.push_back(b);
  std::sort(breakpoints.begin(), breakpoints.end());
  double total = 0.0;
  double prev = a;
  for (double p : breakpoints) {
    if (p <= prev || p > b) continue;
    total += detail::adaptive_segment(f, prev, std::min(p, b), abs_tol, 0);
    prev = p;
  }
  return sign * total;
}

// Finite-difference weights for the d-th derivative on the given stencil
// offsets (relative to the evaluation point), by solving the Vandermonde
// moment system.
inline std::vector<double> fd_weights(const std::vector<double>& offsets, int d) {
  int n = int(offsets.size());
  std::vector<std::vector<double>> a(static_cast<std::size_t>(n),
                                     std::vector<double>(static_cast<std::size_t>(n), 0.0));
  std::vector<double> rhs(std::size_t(n), 0.0);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      double v = 1.0;
      for (int k = 0; k < r; ++k) v *= offsets[std::size_t(c)];
      a[std::size_t(r)][std::size_t(c)] = v;
    }
  double fact = 1.0;
  for (int k = 2; k <= d; ++k) fact *= k;
  rhs[std::size_t(d)] = fact;
  // Gaussian elimination with partial pivoting; the system is tiny.
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(a[std::size_t(r)][std::size_t(col)]) > std::abs(a[std::size_t(piv)][std::size_t(col)]))
        piv = r;
    std::swap(a[std::size_t(col)], a[std::size_t(piv)]);
    std::swap(rhs[std::size_t(col)], rhs[std::size_t(piv)]);
    double d0 = a[std::size_t(col)][std::size_t(col)];
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      double fac = a[std::size_t(r)][std::size_t(col)] / d0;
      for (int c = col; c < n; ++c) a[std::size_t(r)][std::size_t(c)] -= fac * a[std::size_t(col)][std::size_t(c)];
      rhs[std::size_t(r)] -= fac * rhs[std::size_t(col)];
    }
  }
  std::vector<double> w(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) w[std::size_t(i)] = rhs[std::size_t(i)] / a[std::size_t(i)][std::size_t(i)];
  return w;
}

// One-sided derivative estimate d^d/dx^d f(x0 + 0) using `points` nodes
// spaced by h to the right of x0.
template <class F>
double one_sided_derivative(F&& f, double x0, int d, double h, int points = 8) {
  std::vector<double> offsets(static_cast<std::size_t>(points), 0.0);
  for (int i = 0; i < points; ++i) offsets[std::size_t(i)] = double(i) * h;
  std::vector<double> w = fd_weights(offsets, d);
  double s = 0.0;
  for (int i = 0; i < points; ++i) s += w[std::size_t(i)] * f(x0 + offsets[std::size_t(i)]);
  return s;
}

}  // namespace estker

#endif  // ESTKER_QUADRATURE_HPP
