#ifndef ESTKER_GREEN_HPP
#define ESTKER_GREEN_HPP

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <memory>
#include <vector>

#include "estker/basis.hpp"
#include "estker/errors.hpp"
#include "estker/expression.hpp"
#include "estker/operators.hpp"

namespace estker {

struct DeltaTerm {
  int order = 0;
  double coeff = 0.0;
};

// Causal solution of (monic P) w = delta^{(j)}(x - site): a function part
// supported on x > site plus endpoint delta layers.
struct CausalResponse {
  double site = 0.0;
  int order = 0;
  std::function<double(double x, int d)> regular_deriv;  // valid for x > site
  bool has_expr = false;
  SmoothExpression expr;  // function part as a closed form, when available
  std::vector<DeltaTerm> singular;

  double regular(double x) const { return x > site ? regular_deriv(x, 0) : 0.0; }
};

/**
 * Causal fundamental solution of the monic normalization of P:
 * G(x, y) = 0 for x < y, and for x > y a solution of PG = 0 in x whose
 * Cauchy data at x = y+0 is (0, ..., 0, 1).
 *
 * Constant-coefficient operators use the translation form
 * G(x, y) = g0(x - y) with g0 the impulse response; otherwise G is
 * assembled as sum_k c_k(y) phi_k(x) with c_k(y) solving the Wronskian
 * system afresh at each y.
 */
class CausalGreen {
 public:
  static CausalGreen build(const DifferentialOperator& P, double lo = -1.0, double hi = 2.0,
                           bool force_numeric = false) {
    CausalGreen g;
    g.op_ = std::make_shared<DifferentialOperator>(P);
    g.view_ = std::make_shared<MonicView>(*g.op_);
    g.lo_ = lo;
    g.hi_ = hi;
    g.m_ = P.order();
    if (g.m_ == 0) {
      g.degenerate_ = true;
      return g;
    }
    g.basis_ = std::make_shared<SolutionBasis>(fundamental_system(P, 0.0, lo, hi, force_numeric));
    g.constant_ = g.view_->constant() && !force_numeric;
    if (g.constant_) {
      // impulse response: Cauchy data (0, ..., 0, 1) at the origin
      std::vector<double> data(std::size_t(g.m_), 0.0);
      data.back() = 1.0;
      g.impulse_ = std::make_shared<BasisFunction>(
          BasisFunction::from_expression(g.solution_from_cauchy_expr(0.0, data)));
    }
    g.self_check();
    return g;
  }

  bool degenerate() const { return degenerate_; }
  int order() const { return m_; }
  bool constant_coefficient() const { return constant_; }
  const SolutionBasis& basis() const { return *basis_; }
  const MonicView& monic() const { return *view_; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }

  // d^dy/dy^dy G(x, y); exactly zero for x < y.
  double eval(double x, double y, int dy_order = 0) const {
    if (degenerate_) throw DegenerateGreen("order-zero operator has no classical Green function");
    if (std::abs(x - y) < 1e-12) throw OnDiagonal("Green function evaluation on the diagonal");
    if (dy_order < 0 || dy_order > kMaxDyOrder)
      throw OrderOutOfRange("y-derivative order " + std::to_string(dy_order) + " out of range");
    if (x < y) return 0.0;
    if (constant_) {
      double sign = (dy_order % 2 == 0) ? 1.0 : -1.0;
      return sign * impulse_->eval(x - y, dy_order);
    }
    std::vector<Eigen::VectorXd> c = coefficients_with_derivatives(y, dy_order);
    double s = 0.0;
    for (int k = 0; k < m_; ++k) s += c[std::size_t(dy_order)](k) * basis_->eval(k, x, 0);
    return s;
  }

  // Coefficient function c_k (1-based k in the representation
  // G = sum_k c_k(y) phi_k(x)) and its y-derivatives.
  double coeff_fn(int k, double y, int dy_order = 0) const {
    if (degenerate_) throw DegenerateGreen("degenerate Green function has no coefficients");
    if (constant_) {
      double sign = (dy_order % 2 == 0) ? 1.0 : -1.0;
      return sign * impulse_->eval(-y, k - 1 + dy_order);
    }
    return coefficients_with_derivatives(y, dy_order)[std::size_t(dy_order)](k - 1);
  }

  // c_k as a closed form (constant-coefficient operators only).
  SmoothExpression coeff_expr(int k) const {
    if (!constant_) throw ValidationError("coefficient closed form needs constant coefficients");
    return impulse_->expr().derivative(k - 1).reflected();
  }

  /**
   * Causal solution of (monic P) w = delta^{(j)}(x - site), decomposed as
   * regular function part + delta layers at the site.  The coefficients
   * solve the distributional matching system: expanding P applied to
   * [sum_i c_i delta^{(i)}(x-site) + theta(x-site) v(x)] and equating
   * delta coefficients of every order, which fixes the c_i and the Cauchy
   * data of v.  Coefficients of P multiply delta layers through the exact
   * Leibniz expansion, so variable coefficients are handled exactly.
   */
  CausalResponse delta_response(int j, double site) const {
    if (j < 0 || j > kMaxDyOrder)
      throw OrderOutOfRange("delta response order " + std::to_string(j) + " out of range");
    CausalResponse resp;
    resp.site = site;
    resp.order = j;
    if (degenerate_) {
      resp.singular.push_back({j, 1.0});
      resp.regular_deriv = [](double, int) { return 0.0; };
      return resp;
    }

    const int m = m_;
    const int norders = std::max(j, m - 1) + 1;
    const int nc = std::max(0, j - m + 1);
    // Exact Taylor data of the normalized coefficients at the site.
    std::vector<std::vector<double>> ptay(std::size_t(m) + 1);
    for (int k = 0; k <= m; ++k) {
      if (k == m)
        ptay[std::size_t(k)] = std::vector<double>(std::size_t(norders) + 1, 0.0), ptay[std::size_t(k)][0] = 1.0;
      else
        ptay[std::size_t(k)] = view_->coeff_taylor(k, site, norders);
    }

    Eigen::MatrixXd sys = Eigen::MatrixXd::Zero(norders, norders);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(norders);
    rhs(j) = 1.0;
    auto add = [&](int col, int d, double scale) {
      // scale * p~_k-like Taylor factor already folded by the caller
      sys(d, col) += scale;
    };
    for (int i = 0; i < nc; ++i) {
      for (int k = 0; k <= m; ++k) {
        int d = i + k;
        double binom = 1.0;
        for (int t = 0; t <= d; ++t) {
          if (t > 0) binom = binom * double(d - t + 1) / double(t);
          double sign = (t % 2 == 0) ? 1.0 : -1.0;
          add(i, d - t, binom * sign * ptay[std::size_t(k)][std::size_t(t)]);
        }
      }
    }
    for (int r = 0; r < m; ++r) {
      int col = nc + r;
      for (int k = r + 1; k <= m; ++k) {
        int d = k - 1 - r;
        double binom = 1.0;
        for (int t = 0; t <= d; ++t) {
          if (t > 0) binom = binom * double(d - t + 1) / double(t);
          double sign = (t % 2 == 0) ? 1.0 : -1.0;
          add(col, d - t, binom * sign * ptay[std::size_t(k)][std::size_t(t)]);
        }
      }
    }

    Eigen::PartialPivLU<Eigen::MatrixXd> lu(sys);
    if (std::abs(lu.determinant()) < 1e-12)
      throw SingularWronskian("delta response matching system is singular");
    Eigen::VectorXd sol = lu.solve(rhs);

    for (int i = 0; i < nc; ++i)
      if (sol(i) != 0.0) resp.singular.push_back({i, sol(i)});
    std::vector<double> cauchy(static_cast<std::size_t>(m), 0.0);
    for (int r = 0; r < m; ++r) cauchy[std::size_t(r)] = sol(nc + r);

    if (constant_) {
      resp.expr = solution_from_cauchy_expr(site, cauchy);
      resp.has_expr = true;
      auto fn = std::make_shared<BasisFunction>(BasisFunction::from_expression(resp.expr));
      resp.regular_deriv = [fn](double x, int d) { return fn->eval(x, d); };
    } else {
      auto view = view_;
      LinearOde ode = detail::monic_ode(view);
      auto sol_ode = std::make_shared<const OdeSolution>(ode, site, cauchy, site, hi_);
      resp.regular_deriv = [sol_ode](double x, int d) { return sol_ode->eval(x, d); };
    }
    return resp;
  }

  // Closed-form homogeneous solution with the given Cauchy data at x0.
  SmoothExpression solution_from_cauchy_expr(double x0, const std::vector<double>& data) const {
    const int m = m_;
    Eigen::MatrixXd w(m, m);
    for (int k = 0; k < m; ++k)
      for (int jj = 0; jj < m; ++jj) w(k, jj) = basis_->eval(jj, x0, k);
    Eigen::VectorXd d(m);
    for (int k = 0; k < m; ++k) d(k) = data[std::size_t(k)];
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(w);
    if (std::abs(lu.determinant()) < 1e-12) throw SingularWronskian("Cauchy data system is singular");
    Eigen::VectorXd beta = lu.solve(d);
    SmoothExpression v;
    for (int jj = 0; jj < m; ++jj) v += basis_->functions[std::size_t(jj)].expr() * beta(jj);
    return v;
  }

  static constexpr int kMaxDyOrder = 18;

 private:
  std::shared_ptr<DifferentialOperator> op_;
  std::shared_ptr<MonicView> view_;
  std::shared_ptr<SolutionBasis> basis_;
  std::shared_ptr<BasisFunction> impulse_;
  double lo_ = 0.0, hi_ = 0.0;
  int m_ = 0;
  bool degenerate_ = false;
  bool constant_ = false;

  // Solve the Wronskian system at y for c(y) and its y-derivatives up to
  // `upto`, by differentiating A(y) c(y) = e_{m-1} and reusing the factored
  // matrix against derivative right-hand sides.
  std::vector<Eigen::VectorXd> coefficients_with_derivatives(double y, int upto) const {
    const int m = m_;
    std::vector<Eigen::MatrixXd> aderiv(std::size_t(upto) + 1, Eigen::MatrixXd(m, m));
    for (int t = 0; t <= upto; ++t)
      for (int k = 0; k < m; ++k)
        for (int jj = 0; jj < m; ++jj) aderiv[std::size_t(t)](k, jj) = basis_->eval(jj, y, k + t);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(aderiv[0]);
    if (std::abs(lu.determinant()) < 1e-12)
      throw SingularWronskian("Wronskian matrix is singular at y = " + std::to_string(y));
    std::vector<Eigen::VectorXd> c(std::size_t(upto) + 1);
    Eigen::VectorXd e = Eigen::VectorXd::Zero(m);
    e(m - 1) = 1.0;
    c[0] = lu.solve(e);
    for (int r = 1; r <= upto; ++r) {
      Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
      double binom = 1.0;
      for (int t = 1; t <= r; ++t) {
        binom = binom * double(r - t + 1) / double(t);
        rhs -= binom * aderiv[std::size_t(t)] * c[std::size_t(r - t)];
      }
      c[std::size_t(r)] = lu.solve(rhs);
    }
    return c;
  }

  void self_check() const {
    // Cauchy data of G at x = y+0 and the homogeneous residual for x > y.
    for (double y : {0.1, 0.7}) {
      if (y < lo_ || y > hi_ - 0.2) continue;
      for (int k = 0; k < m_; ++k) {
        double want = (k == m_ - 1) ? 1.0 : 0.0;
        double got = constant_ ? impulse_->eval(0.0, k)
                               : coefficients_times_basis_deriv(y, y + 0.0, k);
        if (std::abs(got - want) > 1e-8)
          throw NumericError("causal Green function violates its Cauchy data");
      }
    }
  }

  double coefficients_times_basis_deriv(double y, double x, int k) const {
    std::vector<Eigen::VectorXd> c = coefficients_with_derivatives(y, 0);
    double s = 0.0;
    for (int jj = 0; jj < m_; ++jj) s += c[0](jj) * basis_->eval(jj, x, k);
    return s;
  }
};

inline CausalGreen build_causal_green(const DifferentialOperator& P, double lo = -1.0,
                                      double hi = 2.0, bool force_numeric = false) {
  return CausalGreen::build(P, lo, hi, force_numeric);
}

}  // namespace estker

#endif  // ESTKER_GREEN_HPP
