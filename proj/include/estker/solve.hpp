#ifndef ESTKER_SOLVE_HPP
#define ESTKER_SOLVE_HPP

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <memory>
#include <vector>

#include "estker/extension.hpp"
#include "estker/green.hpp"
#include "estker/operators.hpp"

namespace estker {

struct SolveOptions {
  int samples = 2048;
  bool force_numeric_green = false;
  double endpoint_offset = 1e-9;
};

struct SolveDiagnostics {
  int n = 0, m = 0, alpha = 0;
  double cond_matching_minus = 0.0, cond_matching_plus = 0.0;
  double cond_constants = 0.0;
  double tail_residual = 0.0;
};

// Function part of h on (0, L); closed form kept when every ingredient has one.
struct RegularPart {
  std::function<double(double)> fn;
  bool closed_form = false;
  SmoothExpression expr;

  double operator()(double x) const { return fn(x); }
};

/**
 * The minimal-singularity solution: a regular function on (0, L) plus
 * delta layers of order at most alpha-1 at both endpoints,
 *   h = regular + sum_k delta0[k] d^k/dx^k delta(x)
 *               + sum_k deltaL[k] d^k/dx^k delta(x - L).
 */
struct DistributionalSolution {
  double L = 0.0;
  int alpha = 0;
  std::vector<double> delta0, deltaL;
  RegularPart regular_part;
  std::vector<double> sample_x, sample_h;
  SolveDiagnostics diag;

  // ungated function part of the assembly, used for support diagnostics
  std::function<double(double)> assembly;
  // same assembly with one delta-layer constant of g perturbed
  std::function<std::function<double(double)>(Side, int, double)> perturbed_assembly;

  // Regular evaluator with support gating: zero outside (0, L).
  double regular(double x) const {
    if (x <= 0.0 || x >= L) return 0.0;
    return regular_part(x);
  }
};

namespace detail {

// Derivative values of 1/p_lead at x, orders 0..T, by reciprocal series.
inline std::vector<double> reciprocal_taylor(const DifferentialOperator& P, double x, int T) {
  const int m = P.order();
  std::vector<double> den(std::size_t(T) + 1), w(std::size_t(T) + 1);
  double fact = 1.0;
  for (int t = 0; t <= T; ++t) {
    if (t > 1) fact *= t;
    den[std::size_t(t)] = P.coeff_derivative(m, t, x) / fact;
  }
  for (int t = 0; t <= T; ++t) {
    double s = (t == 0) ? 1.0 : 0.0;
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

// Matrix of the map a -> delta layers of a(x)/p_lead(x): dividing
// sum_k a_k delta^{(k)}(x-s) by the leading coefficient, Leibniz-expanded.
inline Eigen::MatrixXd delta_scale_transform(const DifferentialOperator& P, double site, int na) {
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(na, na);
  double lead = 0.0;
  if (P.leading_is_constant(&lead)) {
    T.diagonal().setConstant(1.0 / lead);
    return T;
  }
  std::vector<double> rec = reciprocal_taylor(P, site, na - 1);
  for (int k = 0; k < na; ++k) {
    double binom = 1.0;
    for (int t = 0; t <= k; ++t) {
      if (t > 0) binom = binom * double(k - t + 1) / double(t);
      double sign = (t % 2 == 0) ? 1.0 : -1.0;
      T(k - t, k) += binom * sign * rec[std::size_t(t)];
    }
  }
  return T;
}

// Interior right-hand side of the monic problem: r = Qf / p_lead on (0, L).
struct MonicRhs {
  bool closed_form = false;
  SmoothExpression expr;  // valid when closed_form
  std::function<double(double)> eval;
  std::function<double(int, double)> deriv;  // right-sided, for ODE Taylor models
};

inline MonicRhs make_monic_rhs(const DifferentialOperator& P, const SmoothExpression& qf) {
  MonicRhs r;
  double lead = 0.0;
  if (P.leading_is_constant(&lead)) {
    r.closed_form = true;
    r.expr = qf * (1.0 / lead);
    auto fn = std::make_shared<BasisFunction>(BasisFunction::from_expression(r.expr));
    r.eval = [fn](double x) { return fn->eval(x, 0); };
    r.deriv = [fn](int t, double x) { return fn->eval(x, t); };
  } else {
    auto op = std::make_shared<DifferentialOperator>(P);
    auto qfp = std::make_shared<BasisFunction>(BasisFunction::from_expression(qf));
    const int m = P.order();
    r.eval = [op, qfp, m](double x) { return qfp->eval(x, 0) / op->coeff_value(m, x); };
    r.deriv = [op, qfp](int t, double x) {
      std::vector<double> rec = reciprocal_taylor(*op, x, t);
      double s = 0.0;
      double binom = 1.0;
      for (int i = 0; i <= t; ++i) {
        if (i > 0) binom = binom * double(t - i + 1) / double(i);
        s += binom * qfp->eval(x, t - i) * rec[std::size_t(i)];
      }
      return s;
    };
  }
  return r;
}

}  // namespace detail

/**
 * Causal particular solution: w with P w = rhs on (0, L) (rhs extended by
 * zero), w = 0 for x <= 0.  Variation of parameters through the causal
 * Green function when closed forms exist, adaptive causal ODE integration
 * otherwise (`via_ode` forces the second route for cross-checking).
 */
struct CausalParticular {
  std::function<double(double)> fn;      // value anywhere (0 for x <= 0)
  bool closed_form = false;
  SmoothExpression expr_interior;        // valid on (0, L]
  SmoothExpression expr_tail;            // valid on [L, inf)
};

inline CausalParticular causal_particular(const CausalGreen& green, const detail::MonicRhs& rhs,
                                          double L, bool via_ode = false) {
  CausalParticular w;
  if (green.degenerate()) {
    auto r = rhs;
    w.fn = [r, L](double x) { return (x > 0.0 && x < L) ? r.eval(x) : 0.0; };
    if (rhs.closed_form) {
      w.closed_form = true;
      w.expr_interior = rhs.expr;
      w.expr_tail = SmoothExpression();
    }
    return w;
  }

  const int m = green.order();
  if (green.constant_coefficient() && rhs.closed_form && !via_ode) {
    SmoothExpression interior, tail;
    for (int k = 1; k <= m; ++k) {
      SmoothExpression ik = (green.coeff_expr(k) * rhs.expr).antiderivative();
      const SmoothExpression& phi = green.basis().functions[std::size_t(k - 1)].expr();
      interior += phi * ik - phi * ik(0.0);
      tail += phi * (ik(L) - ik(0.0));
    }
    w.closed_form = true;
    w.expr_interior = interior;
    w.expr_tail = tail;
    auto fi = std::make_shared<SmoothExpression>(interior);
    auto ft = std::make_shared<SmoothExpression>(tail);
    w.fn = [fi, ft, L](double x) {
      if (x <= 0.0) return 0.0;
      return x <= L ? (*fi)(x) : (*ft)(x);
    };
    return w;
  }

  auto view = std::make_shared<const MonicView>(green.monic());
  LinearOde ode = detail::monic_ode(view);
  auto r = rhs;
  ode.rhs_derivative = [r, L](int t, double x) { return (x >= 0.0 && x < L) ? r.deriv(t, x) : 0.0; };
  std::vector<double> zero(std::size_t(m), 0.0);
  auto sol = std::make_shared<const OdeSolution>(ode, 0.0, zero, 0.0, green.hi(),
                                                 std::vector<double>{L});
  w.fn = [sol](double x) { return x <= 0.0 ? 0.0 : sol->eval(x, 0); };
  return w;
}

// Convenience overload matching the operator-level signature.
inline std::function<double(double)> causal_particular(const DifferentialOperator& P,
                                                       const SmoothExpression& rhs, double L,
                                                       bool via_ode = false) {
  CausalGreen green = CausalGreen::build(P, -1.0, L + 1.5);
  detail::MonicRhs r = detail::make_monic_rhs(P, rhs);
  // undo the monic normalization so that P w = rhs exactly
  return causal_particular(green, r, L, via_ode).fn;
}

/**
 * Full constructive solve.  Steps: extend f across the endpoints with
 * decaying solutions of Q, read off the delta layers of g = QF from the
 * endpoint jumps, build the causal Green function of P, determine the free
 * constants from the support condition beyond L, then assemble the causal
 * particular solution and the delta responses into the final distribution.
 */
inline DistributionalSolution solve(const ProblemSpec& problem, SolveOptions opts = {}) {
  problem.validate();
  const int n = problem.n();
  const int m = problem.m();
  const int alpha = problem.alpha();
  const double L = problem.L;
  const int na = (n + m) / 2;

  SmoothExpression qf = apply_operator(problem.Q, problem.f);

  ExtensionParam ext = match_extension(problem.Q, problem.f, L, problem.custom_bases);
  resolve_extension(ext, alpha);
  AffineDelta araw = delta_coefficients_from_jumps(problem.Q, ext, m);

  CausalGreen green = CausalGreen::build(problem.P, -1.0, L + 1.5, opts.force_numeric_green);
  detail::MonicRhs rhs = detail::make_monic_rhs(problem.P, qf);

  // move the delta data of g across the leading coefficient of P
  Eigen::MatrixXd t0 = detail::delta_scale_transform(problem.P, 0.0, na);
  Eigen::MatrixXd tL = detail::delta_scale_transform(problem.P, L, na);
  AffineDelta amon = araw;
  amon.base_minus = t0 * araw.base_minus;
  amon.map_minus = t0 * araw.map_minus;
  amon.base_plus = tL * araw.base_plus;
  amon.map_plus = tL * araw.map_plus;

  SolvedConstants constants = solve_free_constants(
      green, rhs.eval, rhs.closed_form ? &rhs.expr : nullptr, L, amon);

  CausalParticular particular = causal_particular(green, rhs, L);

  auto resp0 = std::make_shared<std::vector<CausalResponse>>();
  auto respL = std::make_shared<std::vector<CausalResponse>>();
  for (int j = 0; j < na; ++j) {
    resp0->push_back(green.delta_response(j, 0.0));
    respL->push_back(green.delta_response(j, L));
  }

  DistributionalSolution sol;
  sol.L = L;
  sol.alpha = alpha;
  sol.delta0.assign(std::size_t(alpha), 0.0);
  sol.deltaL.assign(std::size_t(alpha), 0.0);
  for (int j = 0; j < na; ++j) {
    for (const DeltaTerm& dt : (*resp0)[std::size_t(j)].singular) {
      if (dt.order >= alpha) throw NumericError("delta layer exceeds the minimal singularity order");
      sol.delta0[std::size_t(dt.order)] += constants.a_minus(j) * dt.coeff;
    }
    for (const DeltaTerm& dt : (*respL)[std::size_t(j)].singular) {
      if (dt.order >= alpha) throw NumericError("delta layer exceeds the minimal singularity order");
      sol.deltaL[std::size_t(dt.order)] += constants.a_plus(j) * dt.coeff;
    }
  }

  // function part of the assembly, valid for any x > 0 (responses and the
  // particular term vanish below their sites by causality)
  Eigen::VectorXd am = constants.a_minus, ap = constants.a_plus;
  auto wfn = particular.fn;
  auto assembly_with = [resp0, respL, wfn, na](Eigen::VectorXd amv, Eigen::VectorXd apv) {
    return [resp0, respL, wfn, na, amv, apv](double x) {
      double s = wfn(x);
      for (int j = 0; j < na; ++j) {
        s += amv(j) * (*resp0)[std::size_t(j)].regular(x);
        s += apv(j) * (*respL)[std::size_t(j)].regular(x);
      }
      return s;
    };
  };
  sol.assembly = assembly_with(am, ap);

  if (green.degenerate()) {
    // h = QF / p0: beyond L the function part is Q u_plus / p0, which is
    // the honest extension residual rather than the (empty) response sum.
    SmoothExpression uplus = ext.u_plus_expr(constants.free_params.tail(ext.free_per_side));
    SmoothExpression quplus = apply_operator(problem.Q, uplus);
    auto op = std::make_shared<DifferentialOperator>(problem.P);
    auto reval = rhs.eval;
    sol.assembly = [quplus, reval, op, L](double x) {
      if (x <= 0.0) return 0.0;
      if (x < L) return reval(x);
      return quplus(x) / op->coeff_value(0, x);
    };
  }

  // perturbation of a single delta constant of g, for sensitivity checks
  Eigen::MatrixXd t0m = t0, tLm = tL;
  auto base_assembly = assembly_with;
  sol.perturbed_assembly = [am, ap, t0m, tLm, base_assembly](Side side, int j, double amount) {
    Eigen::VectorXd amv = am, apv = ap;
    if (side == Side::Left)
      amv += amount * t0m.col(j);
    else
      apv += amount * tLm.col(j);
    return base_assembly(amv, apv);
  };

  // regular part on (0, L)
  bool all_expr = particular.closed_form;
  for (const CausalResponse& r : *resp0)
    if (!r.has_expr && !green.degenerate()) all_expr = false;
  if (all_expr) {
    SmoothExpression reg = particular.expr_interior;
    for (int j = 0; j < na; ++j)
      if ((*resp0)[std::size_t(j)].has_expr) reg += (*resp0)[std::size_t(j)].expr * am(j);
    sol.regular_part.closed_form = true;
    sol.regular_part.expr = reg;
    auto re = std::make_shared<SmoothExpression>(reg);
    sol.regular_part.fn = [re](double x) { return (*re)(x); };
  } else {
    sol.regular_part.fn = sol.assembly;
  }

  // dense samples of the regular part on the open interval
  double off = std::max(opts.endpoint_offset, opts.endpoint_offset * L);
  int ns = std::max(2, opts.samples);
  sol.sample_x.resize(std::size_t(ns));
  sol.sample_h.resize(std::size_t(ns));
  for (int i = 0; i < ns; ++i) {
    double x = off + (L - 2.0 * off) * double(i) / double(ns - 1);
    sol.sample_x[std::size_t(i)] = x;
    sol.sample_h[std::size_t(i)] = sol.regular_part(x);
  }

  sol.diag.n = n;
  sol.diag.m = m;
  sol.diag.alpha = alpha;
  sol.diag.cond_matching_minus = ext.cond_minus;
  sol.diag.cond_matching_plus = ext.cond_plus;
  sol.diag.cond_constants = constants.cond;
  double tr = 0.0;
  for (int i = 1; i <= 101; ++i) {
    double x = L + double(i) / 101.0;
    tr = std::max(tr, std::abs(sol.assembly(x)));
  }
  sol.diag.tail_residual = tr;
  return sol;
}

// Largest magnitude of the assembled function part on (L, L+1].
inline double tail_residual(const DistributionalSolution& sol, int grid_points = 101) {
  double worst = 0.0;
  for (int i = 1; i <= grid_points; ++i) {
    double x = sol.L + double(i) / double(grid_points);
    worst = std::max(worst, std::abs(sol.assembly(x)));
  }
  return worst;
}

inline double tail_residual_perturbed(const DistributionalSolution& sol, Side side, int j,
                                      double amount, int grid_points = 101) {
  auto fn = sol.perturbed_assembly(side, j, amount);
  double worst = 0.0;
  for (int i = 1; i <= grid_points; ++i) {
    double x = sol.L + double(i) / double(grid_points);
    worst = std::max(worst, std::abs(fn(x)));
  }
  return worst;
}

/**
 * Fast path for order-zero P: h = QF / p0 read directly off the extension
 * and the endpoint jump algebra, bypassing the Green-function assembly.
 */
inline DistributionalSolution solve_direct_qf(const ProblemSpec& problem, SolveOptions opts = {}) {
  problem.validate();
  if (problem.m() != 0) throw ValidationError("direct QF path requires an order-zero P");
  const int alpha = problem.alpha();
  const double L = problem.L;

  SmoothExpression qf = apply_operator(problem.Q, problem.f);
  ExtensionParam ext = match_extension(problem.Q, problem.f, L, problem.custom_bases);
  resolve_extension(ext, alpha);
  AffineDelta araw = delta_coefficients_from_jumps(problem.Q, ext, 0);

  Eigen::MatrixXd t0 = detail::delta_scale_transform(problem.P, 0.0, alpha);
  Eigen::MatrixXd tL = detail::delta_scale_transform(problem.P, L, alpha);
  Eigen::VectorXd d0 = t0 * araw.base_minus;
  Eigen::VectorXd dL = tL * araw.base_plus;

  detail::MonicRhs rhs = detail::make_monic_rhs(problem.P, qf);

  DistributionalSolution sol;
  sol.L = L;
  sol.alpha = alpha;
  sol.delta0.assign(d0.data(), d0.data() + alpha);
  sol.deltaL.assign(dL.data(), dL.data() + alpha);
  sol.regular_part.closed_form = rhs.closed_form;
  sol.regular_part.expr = rhs.expr;
  auto reval = rhs.eval;
  sol.regular_part.fn = [reval](double x) { return reval(x); };

  SmoothExpression quplus = apply_operator(problem.Q, ext.u_plus_expr(Eigen::VectorXd()));
  auto op = std::make_shared<DifferentialOperator>(problem.P);
  sol.assembly = [quplus, reval, op, L](double x) {
    if (x <= 0.0) return 0.0;
    if (x < L) return reval(x);
    return quplus(x) / op->coeff_value(0, x);
  };
  sol.perturbed_assembly = [asm_ = sol.assembly](Side, int, double) { return asm_; };

  double off = std::max(opts.endpoint_offset, opts.endpoint_offset * L);
  int ns = std::max(2, opts.samples);
  sol.sample_x.resize(std::size_t(ns));
  sol.sample_h.resize(std::size_t(ns));
  for (int i = 0; i < ns; ++i) {
    double x = off + (L - 2.0 * off) * double(i) / double(ns - 1);
    sol.sample_x[std::size_t(i)] = x;
    sol.sample_h[std::size_t(i)] = sol.regular_part(x);
  }
  sol.diag.n = problem.n();
  sol.diag.m = 0;
  sol.diag.alpha = alpha;
  sol.diag.cond_matching_minus = ext.cond_minus;
  sol.diag.cond_matching_plus = ext.cond_plus;
  sol.diag.cond_constants = 1.0;
  sol.diag.tail_residual = tail_residual(sol);
  return sol;
}

}  // namespace estker

#endif  // ESTKER_SOLVE_HPP
