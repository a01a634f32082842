// Acceptance suite: runs every acceptance criterion at its stated tolerance
// and prints one PASS/FAIL line per criterion.  Exit code 0 iff all pass.

#include <Eigen/Dense>
#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <random>
#include <vector>

#include "estker/kernel.hpp"
#include "estker/quadrature.hpp"
#include "estker/solve.hpp"

using namespace estker;

namespace {

int failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
  std::printf("[%s] criterion %d: %s\n", pass ? "PASS" : "FAIL", criterion, detail.c_str());
  if (!pass) ++failures;
}

std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof(buf), format, args);
  va_end(args);
  return buf;
}

DifferentialOperator one_minus_D2() { return DifferentialOperator::from_constants({1.0, 0.0, -1.0}); }
DifferentialOperator quartic() {
  return DifferentialOperator::from_constants({1.0, 0.0, -2.0, 0.0, 1.0});
}
DifferentialOperator identity_op() { return DifferentialOperator::from_constants({1.0}); }
DifferentialOperator D2_minus_4() { return DifferentialOperator::from_constants({-4.0, 0.0, 1.0}); }

ProblemSpec exp_problem() {
  return ProblemSpec{one_minus_D2(), identity_op(), SmoothExpression::constant(1.0), 1.0, {}};
}
ProblemSpec quartic_problem() {
  return ProblemSpec{quartic(), identity_op(), SmoothExpression::constant(1.0), 1.0, {}};
}
ProblemSpec mixed_problem() {
  return ProblemSpec{quartic(), D2_minus_4(),
                     SmoothExpression::constant(1.0) + SmoothExpression::monomial(1.0, 1), 1.0, {}};
}

double sup_dev_regular(const DistributionalSolution& sol, double target) {
  double worst = 0.0;
  for (const double h : sol.sample_h) worst = std::max(worst, std::abs(h - target));
  return worst;
}

// ---------------------------------------------------------------------------

void criterion_1() {
  auto t0 = std::chrono::steady_clock::now();
  DistributionalSolution sol = solve(exp_problem());
  RationalKernel R = kernel_from_symbol(one_minus_D2(), identity_op());
  double res = residual(R, sol, [](double) { return 1.0; }, 1001);
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  double reg_dev = sup_dev_regular(sol, 1.0);
  double d_err = std::max(std::abs(sol.delta0[0] - 1.0), std::abs(sol.deltaL[0] - 1.0));
  bool pass = reg_dev <= 1e-10 && d_err <= 1e-10 && res <= 1e-8 && secs < 1.0;
  report(1, pass,
         fmt("exponential kernel: regular dev %.2e (<=1e-10), delta err %.2e (<=1e-10), "
             "residual %.2e (<=1e-8), %.2fs (<1s)",
             reg_dev, d_err, res, secs));
}

void criterion_2() {
  DistributionalSolution sol = solve(quartic_problem());
  RationalKernel R = kernel_from_symbol(quartic(), identity_op());
  double res = residual(R, sol, [](double) { return 1.0; }, 1001);
  double reg_dev = sup_dev_regular(sol, 1.0);
  double d_err = std::max({std::abs(sol.delta0[0] - 2.0), std::abs(sol.delta0[1] - 1.0),
                           std::abs(sol.deltaL[0] - 2.0), std::abs(sol.deltaL[1] + 1.0)});
  bool pass = reg_dev <= 1e-10 && d_err <= 1e-10 && res <= 1e-8;
  report(2, pass,
         fmt("repeated-root kernel: regular dev %.2e (<=1e-10), delta err %.2e (<=1e-10), "
             "residual %.2e (<=1e-8)",
             reg_dev, d_err, res));
}

void criterion_3() {
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> ypos(0.02, 1.2);
  double worst = 0.0;
  for (const DifferentialOperator& P :
       {DifferentialOperator::from_constants({0.0, 0.0, 1.0}),
        DifferentialOperator::from_constants({1.0, 0.0, 1.0}), D2_minus_4()}) {
    CausalGreen g = CausalGreen::build(P, -1.0, 2.8);
    for (int trial = 0; trial < 20; ++trial) {
      double y = ypos(rng);
      for (int j = 0; j <= 1; ++j) {
        double got = one_sided_derivative([&](double x) { return g.eval(x, y); }, y + 1e-9, j,
                                          0.02, 8);
        double want = (j == 1) ? 1.0 : 0.0;
        worst = std::max(worst, std::abs(got - want));
      }
    }
  }
  report(3, worst <= 1e-6,
         fmt("causal Green Cauchy data at 20 random y per operator: max dev %.2e (<=1e-6)", worst));
}

void criterion_4() {
  double worst_tail = 0.0;
  // support condition for every solved test problem
  std::vector<DistributionalSolution> sols;
  sols.push_back(solve(exp_problem()));
  sols.push_back(solve(quartic_problem()));
  sols.push_back(solve(mixed_problem()));
  for (const DistributionalSolution& s : sols) worst_tail = std::max(worst_tail, tail_residual(s));

  // sensitivity: perturbing one delta constant of g must break the support
  // condition for the order-two problem; for order-zero problems the delta
  // layers never feed the tail, so the kernel residual is the detector.
  double weakest = 1e300;
  const DistributionalSolution& mixed = sols[2];
  for (Side side : {Side::Left, Side::Right})
    for (int j = 0; j < 3; ++j)
      weakest = std::min(weakest, tail_residual_perturbed(mixed, side, j, 1e-3));

  RationalKernel R = kernel_from_symbol(one_minus_D2(), identity_op());
  DistributionalSolution corrupted = sols[0];
  corrupted.delta0[0] += 1e-3;
  double res_pert = residual(R, corrupted, [](double) { return 1.0; }, 301);

  bool pass = worst_tail <= 1e-8 && weakest > 1e-4 && res_pert > 1e-4;
  report(4, pass,
         fmt("support condition: max tail %.2e (<=1e-8); perturbed-constant tail %.2e (>1e-4), "
             "perturbed-delta residual %.2e (>1e-4)",
             worst_tail, weakest, res_pert));
}

// -- criterion 5 helpers ----------------------------------------------------

struct RandomProblem {
  DifferentialOperator Q = identity_op();
  DifferentialOperator P = identity_op();
  int n = 0, m = 0;
};

std::vector<double> real_poly_from_roots(const std::vector<std::complex<double>>& roots) {
  std::vector<std::complex<double>> c{1.0};
  for (const auto& r : roots) {
    std::vector<std::complex<double>> next(c.size() + 1, 0.0);
    for (std::size_t i = 0; i < c.size(); ++i) {
      next[i + 1] += c[i];
      next[i] -= r * c[i];
    }
    c = next;
  }
  std::vector<double> out;
  for (const auto& v : c) out.push_back(v.real());
  return out;
}

RandomProblem random_problem(std::mt19937& rng) {
  std::uniform_real_distribution<double> re(0.5, 2.2);
  std::uniform_real_distribution<double> im(0.45, 1.4);
  std::uniform_int_distribution<int> norder(1, 3);
  for (;;) {
    int half = norder(rng);
    std::vector<std::complex<double>> left;
    while (int(left.size()) < half) {
      if (half - int(left.size()) >= 2 && (rng() & 1)) {
        double a = -re(rng), b = im(rng);
        left.push_back({a, b});
        left.push_back({a, -b});
      } else {
        left.push_back({-re(rng), 0.0});
      }
    }
    std::vector<std::complex<double>> all = left;
    for (const auto& r : left) all.push_back(-r);  // mirrored: even symbol
    bool separated = true;
    for (std::size_t i = 0; i < all.size(); ++i)
      for (std::size_t j = i + 1; j < all.size(); ++j)
        if (std::abs(all[i] - all[j]) < 0.35) separated = false;
    if (!separated) continue;

    RandomProblem rp;
    rp.n = 2 * half;
    rp.m = (half >= 2 && (rng() & 1)) ? 2 : 0;
    rp.Q = DifferentialOperator::from_constants(real_poly_from_roots(all));
    if (rp.m == 2) {
      double s = 0.8 + 1.1 * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
      rp.P = DifferentialOperator::from_constants({-s * s, 0.0, 1.0});
    } else {
      rp.P = identity_op();
    }
    return rp;
  }
}

// least-squares refit of sampled data onto the closed family spanned by the
// kernel poles and the manufactured solution's own modes
SmoothExpression fit_in_family(const std::vector<double>& xs, const std::vector<double>& ys,
                               const std::vector<RootCluster>& poles,
                               const std::vector<std::pair<double, double>>& extra_modes,
                               int max_power, double* fit_residual) {
  // exact span of R h: polynomials up to h's degree, h's own modes, and one
  // power-0 mode per kernel pole (all poles simple by construction)
  std::vector<SmoothExpression> basis;
  for (int p = 0; p <= max_power; ++p) basis.push_back(SmoothExpression::monomial(1.0, p));
  for (const RootCluster& r : poles) {
    if (r.root.imag() < 0.0) continue;
    for (int p = 0; p < r.multiplicity; ++p) {
      if (r.root.imag() == 0.0) {
        basis.push_back(SmoothExpression::mode(1.0, p, r.root.real()));
      } else {
        basis.push_back(SmoothExpression::mode(1.0, p, r.root.real(), Trig::Cos, r.root.imag()));
        basis.push_back(SmoothExpression::mode(1.0, p, r.root.real(), Trig::Sin, r.root.imag()));
      }
    }
  }
  for (const auto& [a, b] : extra_modes) {
    if (b == 0.0) {
      basis.push_back(SmoothExpression::mode(1.0, 0, a));
    } else {
      basis.push_back(SmoothExpression::mode(1.0, 0, a, Trig::Cos, b));
      basis.push_back(SmoothExpression::mode(1.0, 0, a, Trig::Sin, b));
    }
  }

  Eigen::MatrixXd A(xs.size(), basis.size());
  Eigen::VectorXd rhs(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    rhs(long(i)) = ys[i];
    for (std::size_t j = 0; j < basis.size(); ++j) A(long(i), long(j)) = basis[j](xs[i]);
  }
  Eigen::VectorXd coef = A.colPivHouseholderQr().solve(rhs);
  *fit_residual = (A * coef - rhs).lpNorm<Eigen::Infinity>();

  SmoothExpression f;
  for (std::size_t j = 0; j < basis.size(); ++j) f += basis[j] * coef(long(j));
  return f;
}

void criterion_5() {
  std::mt19937 rng(7771);
  std::uniform_real_distribution<double> coef(-1.5, 1.5);
  std::uniform_real_distribution<double> hrate(-0.4, 0.4);
  std::uniform_real_distribution<double> hfreq(0.5, 1.2);
  double worst_delta = 0.0, worst_reg = 0.0, worst_fit = 0.0;
  bool all_ok = true;

  for (int trial = 0; trial < 10; ++trial) {
    RandomProblem rp = random_problem(rng);
    const double L = 1.0;
    const int alpha = (rp.n - rp.m) / 2;

    KernelOptions kopts;
    kopts.check_points = 3;
    RationalKernel R = kernel_from_symbol(rp.Q, rp.P, kopts);

    // manufactured solution: regular part in the closed family + layers;
    // keep the mode away from every kernel pole so the refit stays sharp
    std::vector<RootCluster> q_roots = characteristic_roots(rp.Q);
    double a1 = 0.0, b1 = 0.0;
    for (;;) {
      a1 = hrate(rng);
      b1 = hfreq(rng);
      bool separated = true;
      for (const RootCluster& r : q_roots)
        if (std::hypot(a1 - r.root.real(), b1 - std::abs(r.root.imag())) < 0.35) separated = false;
      if (separated) break;
    }
    SmoothExpression hreg = SmoothExpression::constant(coef(rng)) +
                            SmoothExpression::monomial(coef(rng), 1) +
                            SmoothExpression::monomial(coef(rng), 2) +
                            SmoothExpression::mode(coef(rng), 0, a1, Trig::Cos, b1) +
                            SmoothExpression::mode(coef(rng), 0, a1, Trig::Sin, b1);
    DistributionalSolution h;
    h.L = L;
    h.alpha = alpha;
    h.delta0.assign(std::size_t(alpha), 0.0);
    h.deltaL.assign(std::size_t(alpha), 0.0);
    for (int k = 0; k < alpha; ++k) {
      h.delta0[std::size_t(k)] = coef(rng);
      h.deltaL[std::size_t(k)] = coef(rng);
    }
    h.regular_part.closed_form = true;
    h.regular_part.expr = hreg;
    auto he = std::make_shared<SmoothExpression>(hreg);
    h.regular_part.fn = [he](double x) { return (*he)(x); };

    // f := R h sampled, then refit in the known span
    std::vector<double> xs, ys;
    for (int i = 0; i < 260; ++i) {
      double x = 0.5 * L * (1.0 - std::cos(M_PI * double(i) / 259.0));
      xs.push_back(x);
      ys.push_back(apply_kernel(R, h, x));
    }
    double fit_res = 0.0;
    SmoothExpression f = fit_in_family(xs, ys, q_roots, {{a1, b1}}, 2, &fit_res);
    worst_fit = std::max(worst_fit, fit_res);
    if (fit_res > 1e-9) all_ok = false;

    DistributionalSolution sol = solve(ProblemSpec{rp.Q, rp.P, f, L, {}});
    for (int k = 0; k < alpha; ++k) {
      worst_delta = std::max(worst_delta,
                             std::abs(sol.delta0[std::size_t(k)] - h.delta0[std::size_t(k)]));
      worst_delta = std::max(worst_delta,
                             std::abs(sol.deltaL[std::size_t(k)] - h.deltaL[std::size_t(k)]));
    }
    for (int i = 0; i <= 200; ++i) {
      double x = 1e-4 + (L - 2e-4) * double(i) / 200.0;
      worst_reg = std::max(worst_reg, std::abs(sol.regular(x) - hreg(x)));
    }
  }
  bool pass = all_ok && worst_delta <= 1e-6 && worst_reg <= 1e-6;
  report(5, pass,
         fmt("manufactured oracle, 10 random problems: delta err %.2e (<=1e-6), regular err %.2e "
             "(<=1e-6), refit residual %.2e",
             worst_delta, worst_reg, worst_fit));
}

void criterion_6() {
  bool zeros_ok = true;
  for (ProblemSpec prob : {exp_problem(), quartic_problem(), mixed_problem()}) {
    prob.f = SmoothExpression();
    DistributionalSolution s = solve(prob);
    for (double v : s.delta0) zeros_ok = zeros_ok && v == 0.0;
    for (double v : s.deltaL) zeros_ok = zeros_ok && v == 0.0;
    for (double x : {0.2, 0.5, 0.8}) zeros_ok = zeros_ok && s.regular(x) == 0.0;
  }

  ProblemSpec p1 = mixed_problem();
  ProblemSpec p2 = mixed_problem();
  p2.f = SmoothExpression::mode(0.8, 0, 0.4) + SmoothExpression::monomial(-0.2, 2);
  ProblemSpec ps = mixed_problem();
  ps.f = p1.f + p2.f;
  DistributionalSolution s1 = solve(p1), s2 = solve(p2), ss = solve(ps);
  double lin = 0.0;
  for (std::size_t k = 0; k < ss.delta0.size(); ++k) {
    lin = std::max(lin, std::abs(ss.delta0[k] - s1.delta0[k] - s2.delta0[k]));
    lin = std::max(lin, std::abs(ss.deltaL[k] - s1.deltaL[k] - s2.deltaL[k]));
  }
  for (double x : {0.15, 0.5, 0.85})
    lin = std::max(lin, std::abs(ss.regular(x) - s1.regular(x) - s2.regular(x)));

  report(6, zeros_ok && lin <= 1e-9,
         fmt("uniqueness/linearity: solve(0) exact %s, superposition dev %.2e (<=1e-9)",
             zeros_ok ? "yes" : "NO", lin));
}

void criterion_7() {
  auto t0 = std::chrono::steady_clock::now();
  DistributionalSolution sol = solve(exp_problem());
  RationalKernel R = kernel_from_symbol(one_minus_D2(), identity_op());
  SweepReport rep = perturbation_sweep(R, [](double) { return 1.0; }, 1.0,
                                       {1e-2, 1e-3, 1e-4}, 800, sol);
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  bool monotone = rep.rows[0].interior_deviation > rep.rows[1].interior_deviation &&
                  rep.rows[1].interior_deviation > rep.rows[2].interior_deviation;
  double dev = rep.rows[2].interior_deviation;
  double mass_err = std::max(std::abs(rep.rows[2].mass0 - sol.delta0[0]),
                             std::abs(rep.rows[2].massL - sol.deltaL[0]));
  bool pass = monotone && dev <= 1e-2 && mass_err <= 0.05 * sol.delta0[0] && secs < 30.0;
  report(7, pass,
         fmt("singular perturbation: interior dev %.2e (<=1e-2, monotone %s), boundary mass err "
             "%.2e (<=5%%), %.1fs (<30s)",
             dev, monotone ? "yes" : "NO", mass_err, secs));
}

void criterion_8() {
  double inv = 0.0, annih = 0.0, sym = 0.0;
  struct Pair {
    DifferentialOperator Q, P;
  };
  std::vector<Pair> pairs = {{one_minus_D2(), identity_op()},
                             {quartic(), identity_op()},
                             {quartic(), D2_minus_4()}};
  for (const Pair& pr : pairs) {
    RationalKernel R = kernel_from_symbol(pr.Q, pr.P);
    for (int i = 0; i <= 40; ++i) {
      double t = -10.0 + 20.0 * double(i) / 40.0;
      inv = std::max(inv, std::abs(R.invert_symbol_numerically(t) - R.eval(t)));
    }
    SmoothExpression qp = apply_operator(pr.Q, R.positive_part());
    SmoothExpression qn = apply_operator(pr.Q, R.negative_part());
    for (int i = 1; i <= 50; ++i) {
      double t = 5.0 * double(i) / 50.0;
      annih = std::max({annih, std::abs(qp(t)), std::abs(qn(-t))});
    }
    sym = std::max(sym, R.symmetry_residual());
  }
  bool pass = inv <= 1e-6 && annih <= 1e-8 && sym <= 1e-12;
  report(8, pass,
         fmt("kernel self-consistency: inversion dev %.2e (<=1e-6), Q-annihilation %.2e (<=1e-8), "
             "symmetry %.2e (<=1e-12)",
             inv, annih, sym));
}

void criterion_9() {
  ProblemSpec prob = mixed_problem();
  DistributionalSolution sol = solve(prob);
  RationalKernel R = kernel_from_symbol(quartic(), D2_minus_4());
  SmoothExpression f = prob.f;
  double res = residual(R, sol, [&](double x) { return f(x); }, 1001);

  SweepReport rep = perturbation_sweep(R, [&](double x) { return f(x); }, 1.0,
                                       {2e-4, 1e-4, 5e-5}, 1600, sol);
  // Richardson extrapolation of the interior profile to eps -> 0.  With an
  // order-two P the perturbed resolvent carries an O(1)-width mode of
  // amplitude sqrt(eps), so the asymptotic variable is s = sqrt(|eps|).
  std::vector<NystromSolution> runs;
  for (const SweepRow& row : rep.rows)
    runs.push_back(nystrom_solve(R, [&](double x) { return f(x); }, 1.0, row.epsilon, 1600));
  double e0 = std::sqrt(std::abs(runs[0].epsilon));
  double e1 = std::sqrt(std::abs(runs[1].epsilon));
  double e2 = std::sqrt(std::abs(runs[2].epsilon));
  double w0 = (0.0 - e1) * (0.0 - e2) / ((e0 - e1) * (e0 - e2));
  double w1 = (0.0 - e0) * (0.0 - e2) / ((e1 - e0) * (e1 - e2));
  double w2 = (0.0 - e0) * (0.0 - e1) / ((e2 - e0) * (e2 - e1));
  double extrap_dev = 0.0;
  for (std::size_t i = 0; i < runs[0].nodes.size(); ++i) {
    double y = runs[0].nodes[i];
    if (y < 0.2 || y > 0.8) continue;
    double v = w0 * runs[0].values[i] + w1 * runs[1].values[i] + w2 * runs[2].values[i];
    extrap_dev = std::max(extrap_dev, std::abs(v - sol.regular(y)));
  }
  bool pass = res <= 1e-6 && extrap_dev <= 1e-3 && sol.diag.cond_constants < 1e12;
  report(9, pass,
         fmt("mixed-order problem: constants system cond %.2e, residual %.2e (<=1e-6), "
             "extrapolated interior dev %.2e (<=1e-3)",
             sol.diag.cond_constants, res, extrap_dev));
}

}  // namespace

int main() {
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  criterion_9();
  if (failures) {
    std::printf("%d criterion(s) failed\n", failures);
    return 1;
  }
  std::printf("all acceptance criteria passed\n");
  return 0;
}
