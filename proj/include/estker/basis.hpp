#ifndef ESTKER_BASIS_HPP
#define ESTKER_BASIS_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <boost/numeric/odeint.hpp>
#include <cmath>
#include <functional>
#include <memory>
#include <vector>

#include "estker/errors.hpp"
#include "estker/expression.hpp"
#include "estker/operators.hpp"

namespace estker {

/**
 * View of a differential operator with the leading coefficient divided
 * through: coeff(k, x) = p_k(x) / p_m(x).  Taylor data of the normalized
 * coefficients is computed by truncated power-series division, so it is
 * exact (up to roundoff) even when the leading coefficient varies.
 */
class MonicView {
 public:
  explicit MonicView(const DifferentialOperator& op)
      : op_(std::make_shared<DifferentialOperator>(op)) {
    leading_constant_ = op.leading_is_constant(&leading_value_);
  }

  int order() const { return op_->order(); }
  const DifferentialOperator& underlying() const { return *op_; }
  bool leading_constant() const { return leading_constant_; }
  double leading_value(double x = 0.0) const {
    return leading_constant_ ? leading_value_ : op_->coeff_value(order(), x);
  }

  bool constant() const {
    if (!leading_constant_) return false;
    return op_->constant_coefficients();
  }

  // Normalized characteristic coefficients (monic).
  std::vector<double> constant_coeffs() const {
    std::vector<double> v = op_->constant_coeff_values();
    for (double& c : v) c /= v.back();
    return v;
  }

  SmoothExpression coeff_expr(int k) const {
    if (!leading_constant_)
      throw NonConstantCoefficients("normalized coefficients need a constant leading coefficient");
    return op_->coeff_expr(k) * (1.0 / leading_value_);
  }

  double coeff(int k, double x) const { return op_->coeff_value(k, x) / op_->coeff_value(order(), x); }

  // Derivative values (p_k/p_m)^(t)(x) for t = 0..T.
  std::vector<double> coeff_taylor(int k, double x, int T) const {
    std::vector<double> num(std::size_t(T) + 1), den(std::size_t(T) + 1);
    double fact = 1.0;
    for (int t = 0; t <= T; ++t) {
      if (t > 1) fact *= t;
      num[std::size_t(t)] = op_->coeff_derivative(k, t, x) / fact;
      den[std::size_t(t)] = op_->coeff_derivative(order(), t, x) / fact;
    }
    std::vector<double> w(std::size_t(T) + 1);
    for (int t = 0; t <= T; ++t) {
      double s = num[std::size_t(t)];
      for (int r = 1; r <= t; ++r) s -= den[std::size_t(r)] * w[std::size_t(t - r)];
      w[std::size_t(t)] = s / den[0];
    }
    fact = 1.0;
    for (int t = 0; t <= T; ++t) {
      if (t > 1) fact *= t;
      w[std::size_t(t)] *= fact;
    }
    return w;
  }

  double coeff_derivative(int k, int t, double x) const {
    if (leading_constant_) return op_->coeff_derivative(k, t, x) / leading_value_;
    return coeff_taylor(k, x, t)[std::size_t(t)];
  }

 private:
  std::shared_ptr<const DifferentialOperator> op_;
  bool leading_constant_ = false;
  double leading_value_ = 1.0;
};

/**
 * Linear ODE in normalized form u^{(m)} = -sum_k c_k(x) u^{(k)} + r(x).
 * coeff_derivative(k, t, x) returns c_k^{(t)}(x); rhs_derivative may be
 * empty for homogeneous problems.  Both must be exact to the order the
 * Taylor evaluator requests.
 */
struct LinearOde {
  int order = 0;
  std::function<double(int k, int t, double x)> coeff_derivative;
  std::function<double(int t, double x)> rhs_derivative;  // right-sided at breakpoints
};

/**
 * Numerically integrated ODE solution stored as Cauchy data on a grid.
 * Values between grid points come from a local Taylor expansion whose
 * higher derivatives are generated by the ODE recurrence, so the stored
 * accuracy is preserved at every requested derivative order.
 */
class OdeSolution {
 public:
  static constexpr int kTaylorOrder = 12;

  // init holds u(anchor), ..., u^{(order-1)}(anchor).
  OdeSolution(LinearOde ode, double anchor, std::vector<double> init, double lo, double hi,
              std::vector<double> breakpoints = {}, double step_hint = 0.0)
      : ode_(std::move(ode)) {
    build_grid(lo, hi, anchor, breakpoints, step_hint);
    integrate(anchor, std::move(init));
  }

  double lo() const { return grid_.front(); }
  double hi() const { return grid_.back(); }

  double eval(double x, int d = 0) const {
    if (x < grid_.front() - 1e-12 || x > grid_.back() + 1e-12)
      throw IntegrationFailure("evaluation outside integrated range");
    x = std::clamp(x, grid_.front(), grid_.back());
    std::size_t i = std::size_t(std::upper_bound(grid_.begin(), grid_.end(), x) - grid_.begin());
    if (i > 0) --i;
    if (i + 1 >= grid_.size()) i = grid_.size() - 2;
    double xb = grid_[i];
    std::vector<double> der = derivative_table(i, kTaylorOrder);
    double dx = x - xb;
    double s = 0.0;
    double p = 1.0;
    for (int r = d; r <= kTaylorOrder; ++r) {
      s += der[std::size_t(r)] * p;
      p *= dx / double(r - d + 1);
    }
    return s;
  }

  // Integration self-check: Taylor prediction across each grid interval vs
  // the stored value; returns the largest absolute mismatch.
  double consistency_residual() const {
    double worst = 0.0;
    for (std::size_t i = 0; i + 1 < grid_.size(); ++i) {
      std::vector<double> der = derivative_table(i, kTaylorOrder);
      double dx = grid_[i + 1] - grid_[i];
      double s = 0.0, p = 1.0;
      for (int r = 0; r <= kTaylorOrder; ++r) {
        s += der[std::size_t(r)] * p;
        p *= dx / double(r + 1);
      }
      worst = std::max(worst, std::abs(s - data_[i + 1][0]));
    }
    return worst;
  }

 private:
  LinearOde ode_;
  std::vector<double> grid_;
  std::vector<std::vector<double>> data_;  // per grid point: u, u', ..., u^{(m-1)}

  void build_grid(double lo, double hi, double anchor, std::vector<double> breakpoints,
                  double step_hint) {
    breakpoints.push_back(lo);
    breakpoints.push_back(hi);
    breakpoints.push_back(anchor);
    std::sort(breakpoints.begin(), breakpoints.end());
    breakpoints.erase(std::unique(breakpoints.begin(), breakpoints.end()), breakpoints.end());
    double step = step_hint > 0.0 ? step_hint : (hi - lo) / 2048.0;
    for (std::size_t s = 0; s + 1 < breakpoints.size(); ++s) {
      double a = breakpoints[s], b = breakpoints[s + 1];
      if (b < lo || a > hi) continue;
      int pieces = std::max(1, int(std::ceil((b - a) / step)));
      for (int i = 0; i < pieces; ++i) grid_.push_back(a + (b - a) * double(i) / double(pieces));
    }
    grid_.push_back(breakpoints.back());
    data_.assign(grid_.size(), std::vector<double>(std::size_t(ode_.order), 0.0));
  }

  void integrate(double anchor, std::vector<double> init) {
    namespace odeint = boost::numeric::odeint;
    using state_type = std::vector<double>;
    const int m = ode_.order;
    auto system = [this, m](const state_type& u, state_type& dudx, double x) {
      for (int k = 0; k + 1 < m; ++k) dudx[std::size_t(k)] = u[std::size_t(k) + 1];
      double acc = ode_.rhs_derivative ? ode_.rhs_derivative(0, x) : 0.0;
      for (int k = 0; k < m; ++k) acc -= ode_.coeff_derivative(k, 0, x) * u[std::size_t(k)];
      dudx[std::size_t(m - 1)] = acc;
    };
    auto stepper = odeint::make_controlled(1e-12, 1e-10, odeint::runge_kutta_fehlberg78<state_type>());

    std::size_t ia = std::size_t(std::lower_bound(grid_.begin(), grid_.end(), anchor) - grid_.begin());
    if (ia >= grid_.size() || std::abs(grid_[ia] - anchor) > 1e-12)
      throw IntegrationFailure("anchor is not a grid point");
    data_[ia] = init;

    try {
      state_type u = init;
      for (std::size_t i = ia; i + 1 < grid_.size(); ++i) {
        // clamp stage abscissae into the open segment so piecewise right-hand
        // sides keep the branch of this segment at its right endpoint
        double b = grid_[i + 1];
        auto seg = [&system, b](const state_type& s, state_type& ds, double x) {
          system(s, ds, x >= b ? std::nextafter(b, -1e300) : x);
        };
        odeint::integrate_adaptive(stepper, seg, u, grid_[i], b, (b - grid_[i]) / 8.0);
        data_[i + 1] = u;
      }
      u = init;
      for (std::size_t i = ia; i > 0; --i) {
        double b = grid_[i - 1];
        auto seg = [&system, b](const state_type& s, state_type& ds, double x) {
          system(s, ds, x <= b ? std::nextafter(b, 1e300) : x);
        };
        odeint::integrate_adaptive(stepper, seg, u, grid_[i], b, (b - grid_[i]) / 8.0);
        data_[i - 1] = u;
      }
    } catch (const std::exception& e) {
      throw IntegrationFailure(std::string("adaptive ODE integration failed: ") + e.what());
    }
  }

  std::vector<double> derivative_table(std::size_t i, int upto) const {
    const int m = ode_.order;
    double xb = grid_[i];
    std::vector<double> der(std::size_t(upto) + 1, 0.0);
    for (int r = 0; r < m && r <= upto; ++r) der[std::size_t(r)] = data_[i][std::size_t(r)];
    for (int r = m; r <= upto; ++r) {
      int s = r - m;
      double acc = ode_.rhs_derivative ? ode_.rhs_derivative(s, xb) : 0.0;
      for (int k = 0; k < m; ++k) {
        double binom = 1.0;
        for (int t = 0; t <= s; ++t) {
          if (t > 0) binom = binom * double(s - t + 1) / double(t);
          acc -= binom * ode_.coeff_derivative(k, t, xb) * der[std::size_t(k + s - t)];
        }
      }
      der[std::size_t(r)] = acc;
    }
    return der;
  }
};

// A single basis solution: either a closed-form expression (derivatives
// precomputed) or a numerically integrated record.
class BasisFunction {
 public:
  static constexpr int kPrecomputedDerivatives = 20;

  static BasisFunction from_expression(SmoothExpression e) {
    BasisFunction f;
    f.derivs_.reserve(kPrecomputedDerivatives + 1);
    f.derivs_.push_back(std::move(e));
    for (int i = 0; i < kPrecomputedDerivatives; ++i) f.derivs_.push_back(f.derivs_.back().derivative());
    return f;
  }

  static BasisFunction from_ode(std::shared_ptr<const OdeSolution> s) {
    BasisFunction f;
    f.ode_ = std::move(s);
    return f;
  }

  bool closed_form() const { return ode_ == nullptr; }

  const SmoothExpression& expr() const {
    if (!closed_form()) throw ValidationError("basis function has no closed form");
    return derivs_.front();
  }

  double eval(double x, int d = 0) const {
    if (ode_) return ode_->eval(x, d);
    if (d < int(derivs_.size())) return derivs_[std::size_t(d)](x);
    return derivs_.back().derivative(d - kPrecomputedDerivatives)(x);
  }

 private:
  std::vector<SmoothExpression> derivs_;
  std::shared_ptr<const OdeSolution> ode_;
};

struct SolutionBasis {
  std::vector<BasisFunction> functions;
  double anchor = 0.0;

  int size() const { return int(functions.size()); }
  double eval(int j, double x, int d = 0) const { return functions[std::size_t(j)].eval(x, d); }
};

// Determinant of the derivative matrix [phi_j^{(k)}(x)].
inline double wronskian(const SolutionBasis& basis, double x) {
  int m = basis.size();
  Eigen::MatrixXd w(m, m);
  for (int k = 0; k < m; ++k)
    for (int j = 0; j < m; ++j) w(k, j) = basis.eval(j, x, k);
  return w.determinant();
}

namespace detail {

// Real solutions x^t e^{ax} cos(bx), x^t e^{ax} sin(bx) spanned by a set of
// characteristic root clusters (conjugate pairs contribute through their
// upper-half representative).
inline std::vector<SmoothExpression> modes_from_roots(const std::vector<RootCluster>& roots) {
  std::vector<SmoothExpression> out;
  for (const RootCluster& r : roots) {
    if (r.root.imag() < 0.0) continue;
    for (int t = 0; t < r.multiplicity; ++t) {
      if (r.root.imag() == 0.0) {
        out.push_back(SmoothExpression::mode(1.0, t, r.root.real()));
      } else {
        out.push_back(SmoothExpression::mode(1.0, t, r.root.real(), Trig::Cos, r.root.imag()));
        out.push_back(SmoothExpression::mode(1.0, t, r.root.real(), Trig::Sin, r.root.imag()));
      }
    }
  }
  return out;
}

inline LinearOde monic_ode(std::shared_ptr<const MonicView> view) {
  LinearOde ode;
  ode.order = view->order();
  ode.coeff_derivative = [view](int k, int t, double x) { return view->coeff_derivative(k, t, x); };
  return ode;
}

}  // namespace detail

/**
 * Fundamental system for P anchored at `anchor`: m solutions with identity
 * Cauchy data phi_j^{(k)}(anchor) = delta_{j,k}.  Constant-coefficient
 * operators get closed forms; otherwise (or when forced) the Cauchy
 * problems are integrated adaptively over [lo, hi].
 */
inline SolutionBasis fundamental_system(const DifferentialOperator& P, double anchor, double lo,
                                        double hi, bool force_numeric = false) {
  const int m = P.order();
  if (m < 2) throw ValidationError("fundamental system needs order >= 2");
  SolutionBasis basis;
  basis.anchor = anchor;

  if (P.constant_coefficients() && !force_numeric) {
    std::vector<SmoothExpression> nat = detail::modes_from_roots(characteristic_roots(P));
    if (int(nat.size()) != m) throw NumericError("characteristic root multiplicities do not sum to order");
    Eigen::MatrixXd w(m, m);
    for (int j = 0; j < m; ++j) {
      SmoothExpression d = nat[std::size_t(j)];
      for (int k = 0; k < m; ++k) {
        w(k, j) = d(anchor);
        d = d.derivative();
      }
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(w);
    if (std::abs(lu.determinant()) < 1e-12)
      throw SingularWronskian("natural mode Wronskian is singular");
    Eigen::MatrixXd coeff = lu.solve(Eigen::MatrixXd::Identity(m, m));
    for (int j = 0; j < m; ++j) {
      SmoothExpression phi;
      for (int i = 0; i < m; ++i) phi += nat[std::size_t(i)] * coeff(i, j);
      basis.functions.push_back(BasisFunction::from_expression(std::move(phi)));
    }
    return basis;
  }

  auto view = std::make_shared<const MonicView>(P);
  LinearOde ode = detail::monic_ode(view);
  for (int j = 0; j < m; ++j) {
    std::vector<double> init(std::size_t(m), 0.0);
    init[std::size_t(j)] = 1.0;
    auto sol = std::make_shared<const OdeSolution>(ode, anchor, std::move(init), lo, hi);
    if (sol->consistency_residual() > 1e-8)
      throw IntegrationFailure("ODE integration inconsistent with local Taylor model");
    basis.functions.push_back(BasisFunction::from_ode(std::move(sol)));
  }
  return basis;
}

enum class Side { Left, Right };

/**
 * The n/2 solutions of Qu = 0 that decay on the requested half-line:
 * modes x^t e^{lambda x} over roots with Re(lambda) < 0 for the right
 * half-line, Re(lambda) > 0 for the left.
 */
inline SolutionBasis decaying_basis(const DifferentialOperator& Q, Side side) {
  std::vector<RootCluster> roots = characteristic_roots(Q);
  DichotomyReport rep = dichotomy_check(roots);
  if (!rep.pass) throw DichotomyViolation(rep.describe());
  std::vector<RootCluster> keep;
  for (const RootCluster& r : roots) {
    bool want = (side == Side::Right) ? (r.root.real() < 0.0) : (r.root.real() > 0.0);
    if (want) keep.push_back(r);
  }
  SolutionBasis basis;
  basis.anchor = 0.0;
  for (SmoothExpression& e : detail::modes_from_roots(keep))
    basis.functions.push_back(BasisFunction::from_expression(std::move(e)));
  if (basis.size() != Q.order() / 2)
    throw NumericError("decaying basis size does not match half the order");
  return basis;
}

inline SolutionBasis basis_from_expressions(const std::vector<SmoothExpression>& fns) {
  SolutionBasis basis;
  for (const SmoothExpression& e : fns) basis.functions.push_back(BasisFunction::from_expression(e));
  return basis;
}

}  // namespace estker

#endif  // ESTKER_BASIS_HPP
