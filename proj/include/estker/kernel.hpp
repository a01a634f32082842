#ifndef ESTKER_KERNEL_HPP
#define ESTKER_KERNEL_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <vector>

#include "estker/errors.hpp"
#include "estker/expression.hpp"
#include "estker/operators.hpp"
#include "estker/quadrature.hpp"
#include "estker/solve.hpp"

namespace estker {

namespace detail {

// Taylor-shift a real polynomial to expansion point z0 (complex output).
inline std::vector<std::complex<double>> shift_poly(const std::vector<double>& c,
                                                    std::complex<double> z0) {
  std::vector<std::complex<double>> out(c.begin(), c.end());
  const int n = int(out.size());
  for (int i = 0; i < n; ++i)
    for (int j = n - 2; j >= i; --j) out[std::size_t(j)] += z0 * out[std::size_t(j) + 1];
  return out;
}

// Truncated power-series quotient num/den (den[0] != 0).
inline std::vector<std::complex<double>> series_divide(const std::vector<std::complex<double>>& num,
                                                       const std::vector<std::complex<double>>& den,
                                                       int terms) {
  std::vector<std::complex<double>> w(std::size_t(terms), 0.0);
  for (int t = 0; t < terms; ++t) {
    std::complex<double> s = (t < int(num.size())) ? num[std::size_t(t)] : 0.0;
    for (int r = 1; r <= t && r < int(den.size()); ++r) s -= den[std::size_t(r)] * w[std::size_t(t - r)];
    w[std::size_t(t)] = s / den[0];
  }
  return w;
}

// Closed-form inverse Fourier transform of (1 + xi^2)^{-p}: e^{-|t|} times a
// polynomial in |t| with combinatorial coefficients.  Hardcoded here so the
// numerical inversion stays independent of the residue machinery.
inline double half_integer_bessel_form(int p, double t) {
  double at = std::abs(t);
  auto factorial = [](int v) {
    double f = 1.0;
    for (int i = 2; i <= v; ++i) f *= i;
    return f;
  };
  double s = 0.0;
  for (int k = 0; k <= p - 1; ++k) {
    double coeff = factorial(2 * p - 2 - k) /
                   (factorial(p - 1 - k) * factorial(k) * std::pow(2.0, 2 * p - 1 - k) * factorial(p - 1));
    s += coeff * std::pow(at, k);
  }
  return s * std::exp(-at);
}

}  // namespace detail

struct KernelOptions {
  double cluster_tol = 1e-8;
  bool check_inversion = true;
  int check_points = 9;
  double check_tol = 1e-6;
};

/**
 * Convolution kernel R(x - y) determined by the symbol P(i xi)/Q(i xi):
 * the unique decaying solution of Q R = P delta(x - y).  Built by residue
 * calculus: partial fractions of p(lambda)/q(lambda) become
 * polynomial-times-exponential pieces, left-half-plane roots feeding
 * t > 0 and right-half-plane roots feeding t < 0.
 */
class RationalKernel {
 public:
  static RationalKernel build(const DifferentialOperator& Q, const DifferentialOperator& P,
                              KernelOptions opts = {}) {
    RationalKernel k;
    k.q_ = Q.constant_coeff_values();
    k.p_ = P.constant_coeff_values();
    k.gap_ = Q.order() - P.order();
    if (k.gap_ < 2) throw GapTooSmall("kernel construction needs order gap n - m >= 2");

    std::vector<RootCluster> roots = polynomial_roots(k.q_, opts.cluster_tol);
    for (const RootCluster& r : roots)
      if (std::abs(r.root.real()) <= 1e-8)
        throw SymbolZeroOnAxis("Q(i xi) vanishes on the real axis near xi = " +
                               std::to_string(r.root.imag()));

    SmoothExpression pos_im, neg_im;
    for (const RootCluster& r : roots) {
      int mu = r.multiplicity;
      std::vector<std::complex<double>> pnum = detail::shift_poly(k.p_, r.root);
      std::vector<std::complex<double>> pden = detail::shift_poly(k.q_, r.root);
      pden.erase(pden.begin(), pden.begin() + mu);  // the vanishing block
      std::vector<std::complex<double>> series = detail::series_divide(pnum, pden, mu);
      double factorial = 1.0;
      for (int kk = 1; kk <= mu; ++kk) {
        if (kk > 1) factorial *= double(kk - 1);
        std::complex<double> c = series[std::size_t(mu - kk)] / factorial;
        bool left = r.root.real() < 0.0;
        if (!left) c = -c;
        SmoothExpression re = SmoothExpression::complex_mode(c, kk - 1, r.root);
        SmoothExpression im =
            SmoothExpression::complex_mode(c * std::complex<double>(0.0, -1.0), kk - 1, r.root);
        if (left) {
          k.pos_ += re;
          pos_im += im;
        } else {
          k.neg_ += re;
          neg_im += im;
        }
      }
    }

    int max_deriv = 2 * k.gap_ + 2;
    k.pos_derivs_.push_back(k.pos_);
    k.neg_derivs_.push_back(k.neg_);
    for (int d = 0; d < max_deriv; ++d) {
      k.pos_derivs_.push_back(k.pos_derivs_.back().derivative());
      k.neg_derivs_.push_back(k.neg_derivs_.back().derivative());
    }

    double scale = std::max({1.0, k.pos_.coeff_scale(), k.neg_.coeff_scale()});
    for (int i = 0; i <= 40; ++i) {
      double t = 5.0 * double(i) / 40.0;
      k.imag_residual_ = std::max(k.imag_residual_, std::abs(pos_im(t)));
      k.imag_residual_ = std::max(k.imag_residual_, std::abs(neg_im(-t)));
    }
    if (k.imag_residual_ > 1e-12 * scale)
      throw NumericError("residue kernel has a non-negligible imaginary part");

    for (int d = 0; d <= k.gap_ - 2; ++d)
      k.continuity_residual_ =
          std::max(k.continuity_residual_,
                   std::abs(k.pos_derivs_[std::size_t(d)](0.0) - k.neg_derivs_[std::size_t(d)](0.0)));
    if (k.continuity_residual_ > 1e-8 * scale)
      throw NumericError("kernel is not C^{gap-2} across the diagonal");

    double max_im_symbol = 0.0, min_re = 1e300, max_re = -1e300, max_abs = 0.0;
    for (int i = 0; i <= 400; ++i) {
      double xi = -20.0 + 40.0 * double(i) / 400.0;
      std::complex<double> s = k.symbol(xi);
      max_im_symbol = std::max(max_im_symbol, std::abs(s.imag()));
      min_re = std::min(min_re, s.real());
      max_re = std::max(max_re, s.real());
      max_abs = std::max(max_abs, std::abs(s));
    }
    k.even_symbol_ = max_im_symbol <= 1e-12 * std::max(1.0, max_abs);
    if (min_re > 0.0)
      k.definiteness_ = 1;
    else if (max_re < 0.0)
      k.definiteness_ = -1;
    if (k.even_symbol_)
      for (int i = 0; i <= 80; ++i) {
        double t = 8.0 * double(i) / 80.0;
        k.symmetry_residual_ = std::max(k.symmetry_residual_, std::abs(k.pos_(t) - k.neg_(-t)));
      }

    if (opts.check_inversion) {
      for (int i = 0; i < opts.check_points; ++i) {
        double t = (opts.check_points == 1)
                       ? 0.0
                       : -8.0 + 16.0 * double(i) / double(opts.check_points - 1);
        double numeric = k.invert_symbol_numerically(t);
        if (std::abs(numeric - k.eval(t)) > opts.check_tol * scale)
          throw NumericError("residue kernel disagrees with numerical symbol inversion at t = " +
                             std::to_string(t));
      }
    }
    return k;
  }

  int gap() const { return gap_; }

  double eval(double t, int deriv = 0) const {
    const std::vector<SmoothExpression>& side = (t >= 0.0) ? pos_derivs_ : neg_derivs_;
    if (deriv >= int(side.size()))
      throw OrderOutOfRange("kernel derivative order " + std::to_string(deriv) + " not available");
    return side[std::size_t(deriv)](t);
  }
  double operator()(double t) const { return eval(t); }

  const SmoothExpression& positive_part() const { return pos_; }
  const SmoothExpression& negative_part() const { return neg_; }

  std::complex<double> symbol(double xi) const {
    std::complex<double> ix(0.0, xi);
    std::complex<double> num = 0.0, den = 0.0;
    for (auto it = p_.rbegin(); it != p_.rend(); ++it) num = num * ix + *it;
    for (auto it = q_.rbegin(); it != q_.rend(); ++it) den = den * ix + *it;
    return num / den;
  }

  double imag_residual() const { return imag_residual_; }
  double continuity_residual() const { return continuity_residual_; }
  bool even_symbol() const { return even_symbol_; }
  double symmetry_residual() const { return symmetry_residual_; }
  int definiteness() const { return definiteness_; }

  /**
   * Independent numerical inversion of the symbol at one point: trapezoid
   * sum of (S(xi) - tail(xi)) e^{i xi t} on a wide uniform grid, plus the
   * analytically known transform of the subtracted tail
   * c * (1 + xi^2)^{-gap/2}.  The subtraction makes the truncated tail
   * integrable to well below the comparison tolerance.
   */
  double invert_symbol_numerically(double t, double xi_max = 1.0e4, double dxi = 0.02) const {
    const int p_half = gap_ / 2;
    double c_sub = (p_.back() / q_.back()) * ((p_half % 2 == 0) ? 1.0 : -1.0);
    const long nsteps = long(xi_max / dxi);
    const std::complex<double> rot = std::polar(1.0, dxi * t);
    std::complex<double> phase = 1.0;
    double acc = 0.5 * (symbol(0.0).real() - c_sub);
    for (long j = 1; j <= nsteps; ++j) {
      phase *= rot;
      if ((j & 1023) == 0) phase = std::polar(1.0, double(j) * dxi * t);
      double xi = double(j) * dxi;
      std::complex<double> d = symbol(xi) - c_sub / std::pow(1.0 + xi * xi, p_half);
      double w = (j == nsteps) ? 0.5 : 1.0;
      acc += w * (d * phase).real();
    }
    return acc * dxi / M_PI + c_sub * detail::half_integer_bessel_form(p_half, t);
  }

 private:
  std::vector<double> q_, p_;
  int gap_ = 0;
  SmoothExpression pos_, neg_;
  std::vector<SmoothExpression> pos_derivs_, neg_derivs_;
  double imag_residual_ = 0.0;
  double continuity_residual_ = 0.0;
  bool even_symbol_ = false;
  double symmetry_residual_ = 0.0;
  int definiteness_ = 0;
};

inline RationalKernel kernel_from_symbol(const DifferentialOperator& Q,
                                         const DifferentialOperator& P, KernelOptions opts = {}) {
  return RationalKernel::build(Q, P, opts);
}

/**
 * (R h)(x) = integral_0^L R(x - y) h_regular(y) dy + delta-layer terms.
 * The integral splits at y = x where the kernel has its derivative kink;
 * closed-form regular parts integrate exactly through antiderivatives.
 * A delta layer c delta^{(k)}(y - site) contributes c * R^{(k)}(x - site).
 */
inline double apply_kernel(const RationalKernel& R, const DistributionalSolution& h, double x) {
  int max_order = h.alpha - 1;
  if (max_order > R.gap() - 2)
    throw ValidationError("delta layers require kernel derivatives beyond the continuity order");

  double acc = 0.0;
  if (h.regular_part.closed_form) {
    const SmoothExpression& hx = h.regular_part.expr;
    if (x > 0.0) {
      SmoothExpression kpos = R.positive_part().reflected().translated(x);  // y -> R(x-y), y < x
      acc += (kpos * hx).integrate(0.0, std::min(x, h.L));
    }
    if (x < h.L) {
      SmoothExpression kneg = R.negative_part().reflected().translated(x);  // y > x branch
      acc += (kneg * hx).integrate(std::max(x, 0.0), h.L);
    }
  } else {
    acc += integrate_adaptive([&](double y) { return R.eval(x - y) * h.regular_part(y); }, 0.0, h.L,
                              1e-10, {x});
  }
  for (int k = 0; k < int(h.delta0.size()); ++k)
    if (h.delta0[std::size_t(k)] != 0.0) acc += h.delta0[std::size_t(k)] * R.eval(x, k);
  for (int k = 0; k < int(h.deltaL.size()); ++k)
    if (h.deltaL[std::size_t(k)] != 0.0) acc += h.deltaL[std::size_t(k)] * R.eval(x - h.L, k);
  return acc;
}

// max_x |(R h)(x) - f(x)| over an interior grid.
inline double residual(const RationalKernel& R, const DistributionalSolution& h,
                       const std::function<double(double)>& f, int grid_size = 1001) {
  double worst = 0.0;
  for (int i = 0; i < grid_size; ++i) {
    double x = 1e-6 + (h.L - 2e-6) * double(i) / double(grid_size - 1);
    worst = std::max(worst, std::abs(apply_kernel(R, h, x) - f(x)));
  }
  return worst;
}

struct NystromSolution {
  double epsilon = 0.0;
  std::vector<double> nodes, weights, values;
  double cond_estimate = 0.0;

  // quadrature of the solution restricted to [a, b]
  double window_integral(double a, double b) const {
    double s = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i)
      if (nodes[i] >= a && nodes[i] <= b) s += weights[i] * values[i];
    return s;
  }
};

/**
 * Solves (epsilon I + R) h = f on a composite-Gauss grid of about N points
 * by a dense Nystrom discretization.  epsilon may carry either sign; its
 * magnitude controls the conditioning guard.
 */
inline NystromSolution nystrom_solve(const RationalKernel& R,
                                     const std::function<double(double)>& f, double L,
                                     double epsilon, int N) {
  if (epsilon == 0.0) throw ValidationError("Nystrom perturbation needs epsilon != 0");
  if (N < 16) throw ValidationError("Nystrom grid needs at least 16 points");
  const int order = 8;
  const int panels = std::max(2, N / order);
  const GaussRule& rule = GaussRule::get(order);

  NystromSolution out;
  out.epsilon = epsilon;
  const int total = panels * order;
  out.nodes.resize(std::size_t(total));
  out.weights.resize(std::size_t(total));
  for (int pnl = 0; pnl < panels; ++pnl) {
    double a = L * double(pnl) / double(panels);
    double b = L * double(pnl + 1) / double(panels);
    for (int i = 0; i < order; ++i) {
      out.nodes[std::size_t(pnl * order + i)] = 0.5 * (a + b) + 0.5 * (b - a) * rule.nodes[std::size_t(i)];
      out.weights[std::size_t(pnl * order + i)] = 0.5 * (b - a) * rule.weights[std::size_t(i)];
    }
  }

  Eigen::MatrixXd A(total, total);
  for (int i = 0; i < total; ++i)
    for (int j = 0; j < total; ++j)
      A(i, j) = out.weights[std::size_t(j)] * R.eval(out.nodes[std::size_t(i)] - out.nodes[std::size_t(j)]) +
                (i == j ? epsilon : 0.0);
  Eigen::VectorXd rhs(total);
  for (int i = 0; i < total; ++i) rhs(i) = f(out.nodes[std::size_t(i)]);

  Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
  double rc = lu.rcond();
  out.cond_estimate = (rc > 0.0) ? 1.0 / rc : 1e300;
  double margin = 1e3 * std::numeric_limits<double>::epsilon();
  if (out.cond_estimate > 1.0 / (std::abs(epsilon) * margin))
    throw IllConditioned("Nystrom system condition estimate " + std::to_string(out.cond_estimate) +
                         " too large for epsilon = " + std::to_string(epsilon));
  Eigen::VectorXd sol = lu.solve(rhs);
  out.values.assign(sol.data(), sol.data() + total);
  return out;
}

struct SweepRow {
  double epsilon = 0.0;          // signed value actually used
  double interior_deviation = 0.0;
  double mass0 = 0.0, massL = 0.0;  // boundary-layer excess masses
  double window = 0.0;
  double cond_estimate = 0.0;
};

struct SweepReport {
  int sign = 1;  // sign applied to epsilon, from the symbol's definiteness
  std::vector<SweepRow> rows;
};

/**
 * Runs the epsilon-perturbed solve across a list of epsilons and compares
 * against a reference solution: interior deviation of h_eps from the
 * regular part on the middle of the interval, and boundary-layer excess
 * masses over windows of width 10 * eps^{1/gap} against the endpoint
 * delta coefficients.
 */
inline SweepReport perturbation_sweep(const RationalKernel& R,
                                      const std::function<double(double)>& f, double L,
                                      const std::vector<double>& epsilons, int N,
                                      const DistributionalSolution& reference) {
  SweepReport rep;
  rep.sign = (R.definiteness() < 0) ? -1 : 1;
  for (double eps : epsilons) {
    if (!(eps > 0.0)) throw ValidationError("sweep epsilons must be positive");
    NystromSolution ns = nystrom_solve(R, f, L, rep.sign * eps, N);
    SweepRow row;
    row.epsilon = rep.sign * eps;
    row.cond_estimate = ns.cond_estimate;
    row.window = std::min(10.0 * std::pow(eps, 1.0 / double(R.gap())), 0.25 * L);
    for (std::size_t i = 0; i < ns.nodes.size(); ++i) {
      double y = ns.nodes[i];
      if (y >= 0.2 * L && y <= 0.8 * L)
        row.interior_deviation =
            std::max(row.interior_deviation, std::abs(ns.values[i] - reference.regular(y)));
      if (y <= row.window) row.mass0 += ns.weights[i] * (ns.values[i] - reference.regular(y));
      if (y >= L - row.window) row.massL += ns.weights[i] * (ns.values[i] - reference.regular(y));
    }
    rep.rows.push_back(row);
  }
  return rep;
}

}  // namespace estker

#endif  // ESTKER_KERNEL_HPP
