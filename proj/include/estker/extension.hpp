#ifndef ESTKER_EXTENSION_HPP
#define ESTKER_EXTENSION_HPP

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <vector>

#include "estker/basis.hpp"
#include "estker/errors.hpp"
#include "estker/expression.hpp"
#include "estker/green.hpp"
#include "estker/operators.hpp"
#include "estker/quadrature.hpp"

namespace estker {

/**
 * Affine parametrization of the smooth extension F of f:
 * F = u_minus on x < 0, f on [0, L], u_plus on x > L, with
 * u_minus/u_plus combinations of the decaying half-line bases whose
 * derivatives match f at the endpoints up to order alpha-1.  The m/2
 * remaining coefficients per side stay free; dependent coefficients are
 * affine in them.
 */
struct ExtensionParam {
  int n = 0;
  int alpha = 0;
  int free_per_side = 0;
  double L = 0.0;

  SolutionBasis basis_minus, basis_plus;
  Eigen::MatrixXd dtab_minus, dtab_plus;  // u_j^{(k)}(site), k = 0..n-1
  Eigen::VectorXd fder0, fderL;           // f^{(k)}(site), k = 0..n-1

  // b_side(p) = offset + map * p, p of length free_per_side
  Eigen::VectorXd offset_minus, offset_plus;
  Eigen::MatrixXd map_minus, map_plus;
  std::vector<int> free_minus, free_plus;  // indices of the free basis columns
  double cond_minus = 0.0, cond_plus = 0.0;

  Eigen::VectorXd b_minus(const Eigen::VectorXd& p) const { return offset_minus + map_minus * p; }
  Eigen::VectorXd b_plus(const Eigen::VectorXd& p) const { return offset_plus + map_plus * p; }

  SmoothExpression u_minus_expr(const Eigen::VectorXd& p) const {
    return combine(basis_minus, b_minus(p));
  }
  SmoothExpression u_plus_expr(const Eigen::VectorXd& p) const {
    return combine(basis_plus, b_plus(p));
  }

  static SmoothExpression combine(const SolutionBasis& basis, const Eigen::VectorXd& b) {
    SmoothExpression u;
    for (int j = 0; j < basis.size(); ++j) u += basis.functions[std::size_t(j)].expr() * b(j);
    return u;
  }
};

namespace detail {

struct SideMatch {
  Eigen::VectorXd offset;
  Eigen::MatrixXd map;
  std::vector<int> free_cols;
  double cond = 0.0;
};

// Solve the alpha x (n/2) matching system for one side, choosing the pivot
// columns by column-pivoted QR so the dependent block is well conditioned.
inline SideMatch match_side(const Eigen::MatrixXd& match, const Eigen::VectorXd& rhs, int alpha) {
  const int cols = int(match.cols());
  const int nfree = cols - alpha;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(match);
  qr.setThreshold(1e-10);
  if (qr.rank() < alpha)
    throw RankDeficientMatching("endpoint matching matrix is rank deficient (rank " +
                                std::to_string(qr.rank()) + " < " + std::to_string(alpha) + ")");
  Eigen::VectorXi perm = qr.colsPermutation().indices();
  std::vector<int> dep(perm.data(), perm.data() + alpha);
  std::vector<int> fre(perm.data() + alpha, perm.data() + cols);

  Eigen::MatrixXd mdep(alpha, alpha), mfree(alpha, nfree);
  for (int c = 0; c < alpha; ++c) mdep.col(c) = match.col(dep[std::size_t(c)]);
  for (int c = 0; c < nfree; ++c) mfree.col(c) = match.col(fre[std::size_t(c)]);

  Eigen::PartialPivLU<Eigen::MatrixXd> lu(mdep);
  Eigen::VectorXd bdep0 = lu.solve(rhs);
  Eigen::MatrixXd bdepm = -lu.solve(mfree);

  SideMatch out;
  out.free_cols = fre;
  out.offset = Eigen::VectorXd::Zero(cols);
  out.map = Eigen::MatrixXd::Zero(cols, nfree);
  for (int c = 0; c < alpha; ++c) {
    out.offset(dep[std::size_t(c)]) = bdep0(c);
    out.map.row(dep[std::size_t(c)]) = bdepm.row(c);
  }
  for (int c = 0; c < nfree; ++c) out.map(fre[std::size_t(c)], c) += 1.0;

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(mdep);
  out.cond = svd.singularValues()(0) / svd.singularValues()(alpha - 1);
  return out;
}

}  // namespace detail

inline ExtensionParam match_extension(const DifferentialOperator& Q, const SmoothExpression& f,
                                      double L,
                                      const std::optional<CustomDecayingBases>& custom = {}) {
  ExtensionParam ext;
  ext.n = Q.order();
  ext.L = L;

  if (custom) {
    ext.basis_minus = basis_from_expressions(custom->left);
    ext.basis_plus = basis_from_expressions(custom->right);
  } else {
    ext.basis_minus = decaying_basis(Q, Side::Left);
    // anchor the right-side modes at L so the matching block stays scaled
    SolutionBasis right = decaying_basis(Q, Side::Right);
    std::vector<SmoothExpression> shifted;
    for (int j = 0; j < right.size(); ++j)
      shifted.push_back(right.functions[std::size_t(j)].expr().translated(L));
    ext.basis_plus = basis_from_expressions(shifted);
  }

  const int half = ext.basis_minus.size();
  ext.fder0.resize(ext.n);
  ext.fderL.resize(ext.n);
  SmoothExpression fd = f;
  for (int k = 0; k < ext.n; ++k) {
    ext.fder0(k) = fd(0.0);
    ext.fderL(k) = fd(L);
    fd = fd.derivative();
  }
  ext.dtab_minus.resize(ext.n, half);
  ext.dtab_plus.resize(ext.n, half);
  for (int j = 0; j < half; ++j)
    for (int k = 0; k < ext.n; ++k) {
      ext.dtab_minus(k, j) = ext.basis_minus.eval(j, 0.0, k);
      ext.dtab_plus(k, j) = ext.basis_plus.eval(j, L, k);
    }
  return ext;
}

// Completes match_extension once alpha is known (it depends on P's order).
inline void resolve_extension(ExtensionParam& ext, int alpha) {
  ext.alpha = alpha;
  const int half = ext.basis_minus.size();
  ext.free_per_side = half - alpha;
  if (ext.free_per_side < 0)
    throw ValidationError("matching requires alpha <= n/2");
  detail::SideMatch sm = detail::match_side(ext.dtab_minus.topRows(alpha), ext.fder0.head(alpha), alpha);
  detail::SideMatch sp = detail::match_side(ext.dtab_plus.topRows(alpha), ext.fderL.head(alpha), alpha);
  ext.offset_minus = sm.offset;
  ext.map_minus = sm.map;
  ext.free_minus = sm.free_cols;
  ext.cond_minus = sm.cond;
  ext.offset_plus = sp.offset;
  ext.map_plus = sp.map;
  ext.free_plus = sp.free_cols;
  ext.cond_plus = sp.cond;
}

/**
 * Delta-layer coefficients of g = QF at both endpoints, affine in the free
 * extension parameters p = [p_minus; p_plus].  A jump J_k in F^{(k)} at a
 * site contributes J_k * delta^{(j-1-k)} to the distributional part of
 * F^{(j)}; multiplying by the coefficients of Q (Leibniz-expanded at the
 * site when they vary) and collecting orders gives a_i.
 */
struct AffineDelta {
  int size = 0;        // (n+m)/2 coefficients per site
  int free_total = 0;  // m
  Eigen::VectorXd base_minus, base_plus;
  Eigen::MatrixXd map_minus, map_plus;  // size x free_total

  Eigen::VectorXd minus_at(const Eigen::VectorXd& p) const { return base_minus + map_minus * p; }
  Eigen::VectorXd plus_at(const Eigen::VectorXd& p) const { return base_plus + map_plus * p; }
};

namespace detail {

inline Eigen::MatrixXd delta_from_jump_matrix(const DifferentialOperator& Q, double site, int na) {
  // entry (i, k): coefficient with which jump J_k feeds a_i
  const int n = Q.order();
  Eigen::MatrixXd conv = Eigen::MatrixXd::Zero(na, n);
  for (int j = 1; j <= n; ++j) {
    double qconst = 0.0;
    bool is_const = Q.coeff_is_constant(j, &qconst);
    for (int k = 0; k < j; ++k) {
      int d = j - 1 - k;
      if (is_const) {
        if (d < na && qconst != 0.0) conv(d, k) += qconst;
        continue;
      }
      double binom = 1.0;
      for (int t = 0; t <= d; ++t) {
        if (t > 0) binom = binom * double(d - t + 1) / double(t);
        int ord = d - t;
        if (ord >= na) continue;
        double sign = (t % 2 == 0) ? 1.0 : -1.0;
        conv(ord, k) += binom * sign * Q.coeff_derivative(j, t, site);
      }
    }
  }
  return conv;
}

}  // namespace detail

inline AffineDelta delta_coefficients_from_jumps(const DifferentialOperator& Q,
                                                 const ExtensionParam& ext, int m) {
  const int n = Q.order();
  const int na = (n + m) / 2;
  const int fps = ext.free_per_side;
  AffineDelta ad;
  ad.size = na;
  ad.free_total = 2 * fps;

  // site 0: J_k = f^{(k)}(0) - u_minus^{(k)}(0)
  Eigen::VectorXd jm_base = ext.fder0 - ext.dtab_minus * ext.offset_minus;
  Eigen::MatrixXd jm_map = -ext.dtab_minus * ext.map_minus;
  // site L: J_k = u_plus^{(k)}(L) - f^{(k)}(L)
  Eigen::VectorXd jp_base = ext.dtab_plus * ext.offset_plus - ext.fderL;
  Eigen::MatrixXd jp_map = ext.dtab_plus * ext.map_plus;

  Eigen::MatrixXd conv0 = detail::delta_from_jump_matrix(Q, 0.0, na);
  Eigen::MatrixXd convL = detail::delta_from_jump_matrix(Q, ext.L, na);

  ad.base_minus = conv0 * jm_base;
  ad.base_plus = convL * jp_base;
  ad.map_minus = Eigen::MatrixXd::Zero(na, ad.free_total);
  ad.map_plus = Eigen::MatrixXd::Zero(na, ad.free_total);
  if (fps > 0) {
    ad.map_minus.leftCols(fps) = conv0 * jm_map;
    ad.map_plus.rightCols(fps) = convL * jp_map;
  }
  return ad;
}

struct SolvedConstants {
  Eigen::VectorXd a_minus, a_plus;  // concrete coefficients
  Eigen::VectorXd free_params;
  double cond = 0.0;  // condition estimate of the constants system
};

/**
 * Determines the free extension parameters from the support condition
 * h = 0 beyond L: for each basis function phi_k of P the combination
 *   integral_0^L c_k(y) r(y) dy
 *     + sum_j (-1)^j [c_k^{(j)}(0) a^-_j + c_k^{(j)}(L) a^+_j] = 0.
 * r is the monic-normalized interior right-hand side; `a` must already be
 * expressed for the monic operator.
 */
inline SolvedConstants solve_free_constants(
    const CausalGreen& green, const std::function<double(double)>& rhs_eval,
    const SmoothExpression* rhs_expr, double L, const AffineDelta& a) {
  SolvedConstants out;
  out.free_params = Eigen::VectorXd::Zero(a.free_total);
  if (a.free_total == 0) {
    out.a_minus = a.base_minus;
    out.a_plus = a.base_plus;
    out.cond = 1.0;
    return out;
  }

  const int m = green.order();
  if (a.free_total != m)
    throw ValidationError("free parameter count must equal the order of P");

  Eigen::VectorXd integrals(m);
  for (int k = 1; k <= m; ++k) {
    if (green.constant_coefficient() && rhs_expr) {
      integrals(k - 1) = (green.coeff_expr(k) * (*rhs_expr)).integrate(0.0, L);
    } else {
      integrals(k - 1) = integrate_adaptive(
          [&](double y) { return green.coeff_fn(k, y, 0) * rhs_eval(y); }, 0.0, L, 1e-12);
    }
  }

  const int na = a.size;
  Eigen::MatrixXd ck0(m, na), ckL(m, na);
  for (int k = 1; k <= m; ++k)
    for (int j = 0; j < na; ++j) {
      ck0(k - 1, j) = green.coeff_fn(k, 0.0, j);
      ckL(k - 1, j) = green.coeff_fn(k, L, j);
    }
  Eigen::VectorXd signs(na);
  for (int j = 0; j < na; ++j) signs(j) = (j % 2 == 0) ? 1.0 : -1.0;
  Eigen::MatrixXd s0 = ck0 * signs.asDiagonal();
  Eigen::MatrixXd sL = ckL * signs.asDiagonal();

  Eigen::MatrixXd sys = s0 * a.map_minus + sL * a.map_plus;
  Eigen::VectorXd rhs = -(integrals + s0 * a.base_minus + sL * a.base_plus);

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(sys, Eigen::ComputeThinU | Eigen::ComputeThinV);
  double smin = svd.singularValues()(m - 1);
  double smax = svd.singularValues()(0);
  if (smin <= smax * 1e-13)
    throw SingularMatchingSystem("constants system is singular (condition estimate " +
                                 std::to_string(smax / std::max(smin, 1e-300)) + ")");
  out.cond = smax / smin;
  out.free_params = svd.solve(rhs);
  out.a_minus = a.minus_at(out.free_params);
  out.a_plus = a.plus_at(out.free_params);
  return out;
}

}  // namespace estker

#endif  // ESTKER_EXTENSION_HPP
