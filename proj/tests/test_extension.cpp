#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <random>

#include "estker/extension.hpp"

using estker::AffineDelta;
using estker::DifferentialOperator;
using estker::ExtensionParam;
using estker::SmoothExpression;

namespace {

DifferentialOperator one_minus_D2() { return DifferentialOperator::from_constants({1.0, 0.0, -1.0}); }
DifferentialOperator quartic() {
  return DifferentialOperator::from_constants({1.0, 0.0, -2.0, 0.0, 1.0});  // (D^2-1)^2
}

ExtensionParam matched(const DifferentialOperator& Q, const SmoothExpression& f, double L, int m) {
  ExtensionParam ext = estker::match_extension(Q, f, L);
  estker::resolve_extension(ext, (Q.order() - m) / 2);
  return ext;
}

}  // namespace

TEST_CASE("extension for 1 - D^2 with constant f") {
  SmoothExpression f = SmoothExpression::constant(1.0);
  ExtensionParam ext = matched(one_minus_D2(), f, 1.0, 0);
  REQUIRE(ext.free_per_side == 0);

  SmoothExpression um = ext.u_minus_expr(Eigen::VectorXd());
  SmoothExpression up = ext.u_plus_expr(Eigen::VectorXd());
  for (double x : {-2.0, -0.5, 0.0}) REQUIRE(um(x) == Catch::Approx(std::exp(x)).epsilon(1e-13));
  for (double x : {1.0, 1.5, 3.0}) REQUIRE(up(x) == Catch::Approx(std::exp(-(x - 1.0))).epsilon(1e-13));
}

TEST_CASE("extension for the quartic operator with constant f") {
  SmoothExpression f = SmoothExpression::constant(1.0);
  ExtensionParam ext = matched(quartic(), f, 1.0, 0);
  REQUIRE(ext.free_per_side == 0);

  SmoothExpression um = ext.u_minus_expr(Eigen::VectorXd());
  SmoothExpression up = ext.u_plus_expr(Eigen::VectorXd());
  for (double x : {-1.5, -0.4, 0.0})
    REQUIRE(um(x) == Catch::Approx((1.0 - x) * std::exp(x)).epsilon(1e-12));
  for (double x : {1.0, 1.8})
    REQUIRE(up(x) == Catch::Approx((1.0 + (x - 1.0)) * std::exp(-(x - 1.0))).epsilon(1e-12));
}

TEST_CASE("free parameter count equals half the order of P") {
  SmoothExpression f = SmoothExpression::constant(1.0) + SmoothExpression::monomial(1.0, 1);
  ExtensionParam ext = matched(quartic(), f, 1.0, 2);
  REQUIRE(ext.free_per_side == 1);
  REQUIRE(ext.free_minus.size() == 1);
  REQUIRE(ext.free_plus.size() == 1);
}

TEST_CASE("matching conditions hold for every free assignment") {
  SmoothExpression f = SmoothExpression::mode(1.0, 0, 0.3) + SmoothExpression::monomial(0.5, 2);
  ExtensionParam ext = matched(quartic(), f, 1.0, 2);
  const int alpha = 1;
  std::mt19937 rng(23);
  std::uniform_real_distribution<double> dist(-3.0, 3.0);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd p(1);
    p << dist(rng);
    SmoothExpression um = ext.u_minus_expr(p);
    SmoothExpression up = ext.u_plus_expr(p);
    for (int k = 0; k < alpha; ++k) {
      REQUIRE(std::abs(um.derivative_at(0.0, k) - f.derivative_at(0.0, k)) < 1e-10);
      REQUIRE(std::abs(up.derivative_at(1.0, k) - f.derivative_at(1.0, k)) < 1e-10);
    }
  }
}

TEST_CASE("delta coefficients for the exponential kernel problem") {
  SmoothExpression f = SmoothExpression::constant(1.0);
  ExtensionParam ext = matched(one_minus_D2(), f, 1.0, 0);
  AffineDelta a = estker::delta_coefficients_from_jumps(one_minus_D2(), ext, 0);
  REQUIRE(a.size == 1);
  REQUIRE(a.free_total == 0);
  REQUIRE(a.base_minus(0) == Catch::Approx(1.0).epsilon(1e-12));
  REQUIRE(a.base_plus(0) == Catch::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("delta coefficients for the repeated-root kernel problem") {
  SmoothExpression f = SmoothExpression::constant(1.0);
  ExtensionParam ext = matched(quartic(), f, 1.0, 0);
  AffineDelta a = estker::delta_coefficients_from_jumps(quartic(), ext, 0);
  REQUIRE(a.size == 2);
  REQUIRE(a.base_minus(0) == Catch::Approx(2.0).epsilon(1e-11));
  REQUIRE(a.base_minus(1) == Catch::Approx(1.0).epsilon(1e-11));
  REQUIRE(a.base_plus(0) == Catch::Approx(2.0).epsilon(1e-11));
  REQUIRE(a.base_plus(1) == Catch::Approx(-1.0).epsilon(1e-11));
}

TEST_CASE("zero data gives zero coefficients") {
  SmoothExpression zero;
  ExtensionParam ext = matched(quartic(), zero, 1.0, 2);
  AffineDelta a = estker::delta_coefficients_from_jumps(quartic(), ext, 2);
  REQUIRE(a.base_minus.norm() == 0.0);
  REQUIRE(a.base_plus.norm() == 0.0);
}

TEST_CASE("affine map agrees with direct jump computation of the instantiated extension") {
  SmoothExpression f = SmoothExpression::mode(0.7, 1, -0.2) + SmoothExpression::constant(0.3);
  DifferentialOperator Q = quartic();
  ExtensionParam ext = matched(Q, f, 1.0, 2);
  AffineDelta a = estker::delta_coefficients_from_jumps(Q, ext, 2);
  std::vector<double> q = Q.constant_coeff_values();
  const int n = Q.order();

  std::mt19937 rng(5);
  std::uniform_real_distribution<double> dist(-2.0, 2.0);
  for (int trial = 0; trial < 8; ++trial) {
    Eigen::VectorXd p(2);
    p << dist(rng), dist(rng);
    Eigen::VectorXd am = a.minus_at(p), ap = a.plus_at(p);

    // independent route: instantiate u_minus/u_plus, take raw jumps, convolve
    SmoothExpression um = ext.u_minus_expr(p.head(1));
    SmoothExpression up = ext.u_plus_expr(p.tail(1));
    for (int i = 0; i < a.size; ++i) {
      double direct_m = 0.0, direct_p = 0.0;
      for (int k = 0; k + i + 1 <= n; ++k) {
        double jm = f.derivative_at(0.0, k) - um.derivative_at(0.0, k);
        double jp = up.derivative_at(1.0, k) - f.derivative_at(1.0, k);
        direct_m += q[std::size_t(i + k + 1)] * jm;
        direct_p += q[std::size_t(i + k + 1)] * jp;
      }
      REQUIRE(std::abs(am(i) - direct_m) < 1e-10 * std::max(1.0, std::abs(direct_m)));
      REQUIRE(std::abs(ap(i) - direct_p) < 1e-10 * std::max(1.0, std::abs(direct_p)));
    }
  }
}

TEST_CASE("solved constants satisfy the support condition beyond L") {
  // Q = (D^2-1)^2, P = D^2 - 4, f = 1 + x on [0, 1]
  DifferentialOperator Q = quartic();
  DifferentialOperator P = DifferentialOperator::from_constants({-4.0, 0.0, 1.0});
  SmoothExpression f = SmoothExpression::constant(1.0) + SmoothExpression::monomial(1.0, 1);
  double L = 1.0;

  ExtensionParam ext = matched(Q, f, L, 2);
  AffineDelta a = estker::delta_coefficients_from_jumps(Q, ext, 2);
  estker::CausalGreen green = estker::CausalGreen::build(P, -1.0, L + 1.5);
  SmoothExpression qf = estker::apply_operator(Q, f);
  estker::SolvedConstants sc = estker::solve_free_constants(
      green, [&](double y) { return qf(y); }, &qf, L, a);
  REQUIRE(sc.cond < 1e6);

  // independent tail evaluation through the Green coefficient functions
  for (double x : {L + 0.1, L + 0.4, L + 0.7, L + 1.0}) {
    double tail = 0.0;
    for (int k = 1; k <= 2; ++k) {
      double ek = (green.coeff_expr(k) * qf).integrate(0.0, L);
      for (int j = 0; j < a.size; ++j) {
        double sign = (j % 2 == 0) ? 1.0 : -1.0;
        ek += sign * (green.coeff_fn(k, 0.0, j) * sc.a_minus(j) + green.coeff_fn(k, L, j) * sc.a_plus(j));
      }
      tail += ek * green.basis().eval(k - 1, x, 0);
    }
    REQUIRE(std::abs(tail) < 1e-8);
  }
}

TEST_CASE("zero f forces zero free constants") {
  DifferentialOperator Q = quartic();
  DifferentialOperator P = DifferentialOperator::from_constants({-4.0, 0.0, 1.0});
  SmoothExpression zero;
  ExtensionParam ext = matched(Q, zero, 1.0, 2);
  AffineDelta a = estker::delta_coefficients_from_jumps(Q, ext, 2);
  estker::CausalGreen green = estker::CausalGreen::build(P, -1.0, 2.5);
  estker::SolvedConstants sc = estker::solve_free_constants(
      green, [](double) { return 0.0; }, nullptr, 1.0, a);
  REQUIRE(sc.free_params.norm() == Catch::Approx(0.0).margin(1e-14));
  REQUIRE(sc.a_minus.norm() == Catch::Approx(0.0).margin(1e-14));
  REQUIRE(sc.a_plus.norm() == Catch::Approx(0.0).margin(1e-14));
}

TEST_CASE("m = 0 constants pass through unchanged") {
  SmoothExpression f = SmoothExpression::constant(1.0);
  ExtensionParam ext = matched(one_minus_D2(), f, 1.0, 0);
  AffineDelta a = estker::delta_coefficients_from_jumps(one_minus_D2(), ext, 0);
  estker::CausalGreen degenerate = estker::CausalGreen::build(DifferentialOperator::from_constants({1.0}));
  estker::SolvedConstants sc = estker::solve_free_constants(
      degenerate, [](double) { return 1.0; }, nullptr, 1.0, a);
  REQUIRE(sc.a_minus(0) == a.base_minus(0));
  REQUIRE(sc.a_plus(0) == a.base_plus(0));
}
