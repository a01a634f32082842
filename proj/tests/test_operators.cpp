#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <random>

#include "estker/operators.hpp"

using estker::DifferentialOperator;
using estker::SmoothExpression;
using estker::Trig;

namespace {
DifferentialOperator D2_minus_1() { return DifferentialOperator::from_constants({-1.0, 0.0, 1.0}); }
DifferentialOperator one_minus_D2() { return DifferentialOperator::from_constants({1.0, 0.0, -1.0}); }
DifferentialOperator biharmonic_like() {
  // D^4 - 2 D^2 + 1 = (D^2 - 1)^2
  return DifferentialOperator::from_constants({1.0, 0.0, -2.0, 0.0, 1.0});
}
}  // namespace

TEST_CASE("apply_operator on kernel and constant inputs") {
  SmoothExpression ex = SmoothExpression::mode(1.0, 0, 1.0);  // e^x
  SmoothExpression zero = estker::apply_operator(D2_minus_1(), ex);
  for (double x : {-1.0, 0.0, 2.0}) REQUIRE(std::abs(zero(x)) < 1e-12);

  SmoothExpression one = SmoothExpression::constant(1.0);
  SmoothExpression r = estker::apply_operator(D2_minus_1(), one);
  REQUIRE(r(0.3) == Catch::Approx(-1.0));

  SmoothExpression xex = SmoothExpression::mode(1.0, 1, -1.0);  // x e^{-x}
  SmoothExpression z2 = estker::apply_operator(biharmonic_like(), xex);
  for (double x : {-0.5, 0.1, 1.5}) REQUIRE(std::abs(z2(x)) < 1e-12);
}

TEST_CASE("apply_operator with variable coefficients") {
  // (x D + 1) is odd order; use x^2 D^2 + 1 instead: order 2... but the
  // leading coefficient x^2 vanishes at 0, so shift it: (2 + x^2) D^2 + 1.
  std::vector<estker::Coefficient> coeffs;
  coeffs.emplace_back(1.0);
  coeffs.emplace_back(SmoothExpression());
  coeffs.emplace_back(SmoothExpression::constant(2.0) + SmoothExpression::monomial(1.0, 2));
  DifferentialOperator op(std::move(coeffs));
  SmoothExpression u = SmoothExpression::monomial(1.0, 3);  // x^3
  SmoothExpression r = estker::apply_operator(op, u);
  for (double x : {-1.0, 0.4, 2.0})
    REQUIRE(r(x) == Catch::Approx((2.0 + x * x) * 6.0 * x + x * x * x).epsilon(1e-13));
}

TEST_CASE("apply_operator is linear") {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> dist(-2.0, 2.0);
  DifferentialOperator op = biharmonic_like();
  SmoothExpression u = SmoothExpression::mode(1.3, 2, -0.4, Trig::Sin, 1.1);
  SmoothExpression v = SmoothExpression::mode(-0.7, 1, 0.6, Trig::Cos, 0.9);
  double a = dist(rng), b = dist(rng);
  SmoothExpression lhs = estker::apply_operator(op, u * a + v * b);
  SmoothExpression rhs = estker::apply_operator(op, u) * a + estker::apply_operator(op, v) * b;
  for (int i = 0; i <= 20; ++i) {
    double x = -1.0 + 3.0 * double(i) / 20.0;
    REQUIRE(std::abs(lhs(x) - rhs(x)) < 1e-12 * std::max(1.0, std::abs(rhs(x))));
  }
}

TEST_CASE("characteristic roots with multiplicities") {
  auto roots = estker::characteristic_roots(one_minus_D2());
  REQUIRE(roots.size() == 2);
  std::sort(roots.begin(), roots.end(),
            [](const auto& a, const auto& b) { return a.root.real() < b.root.real(); });
  REQUIRE(roots[0].root.real() == Catch::Approx(-1.0).margin(1e-10));
  REQUIRE(roots[1].root.real() == Catch::Approx(1.0).margin(1e-10));
  REQUIRE(roots[0].multiplicity == 1);

  auto dbl = estker::characteristic_roots(biharmonic_like());
  REQUIRE(dbl.size() == 2);
  std::sort(dbl.begin(), dbl.end(),
            [](const auto& a, const auto& b) { return a.root.real() < b.root.real(); });
  REQUIRE(dbl[0].multiplicity == 2);
  REQUIRE(dbl[1].multiplicity == 2);
  REQUIRE(dbl[0].root.real() == Catch::Approx(-1.0).margin(1e-8));

  auto dd = estker::characteristic_roots(DifferentialOperator::from_constants({0.0, 0.0, 1.0}));
  REQUIRE(dd.size() == 1);
  REQUIRE(dd[0].multiplicity == 2);
  REQUIRE(std::abs(dd[0].root) < 1e-10);
}

TEST_CASE("roots of variable-coefficient operators are rejected") {
  std::vector<estker::Coefficient> coeffs;
  coeffs.emplace_back(SmoothExpression::monomial(1.0, 1));
  coeffs.emplace_back(0.0);
  coeffs.emplace_back(1.0);
  DifferentialOperator op(std::move(coeffs));
  REQUIRE_THROWS_AS(estker::characteristic_roots(op), estker::NonConstantCoefficients);
}

TEST_CASE("kernel functions of Q are annihilated across the working interval") {
  // for every root lambda of multiplicity mu, Q kills x^k e^{lambda x}, k < mu
  DifferentialOperator op = biharmonic_like();
  auto roots = estker::characteristic_roots(op);
  for (const auto& rc : roots) {
    if (rc.root.imag() != 0.0) continue;
    for (int k = 0; k < rc.multiplicity; ++k) {
      SmoothExpression u = SmoothExpression::mode(1.0, k, rc.root.real());
      SmoothExpression qu = estker::apply_operator(op, u);
      for (int i = 0; i <= 40; ++i) {
        double x = -2.0 + 5.0 * double(i) / 40.0;
        REQUIRE(std::abs(qu(x)) < 1e-10);
      }
    }
  }
}

TEST_CASE("dichotomy check splits roots off the axis") {
  auto pass1 = estker::dichotomy_check(estker::characteristic_roots(one_minus_D2()));
  REQUIRE(pass1.pass);
  REQUIRE(pass1.negative == 1);
  REQUIRE(pass1.positive == 1);

  auto pass2 = estker::dichotomy_check(estker::characteristic_roots(biharmonic_like()));
  REQUIRE(pass2.pass);
  REQUIRE(pass2.negative == 2);

  // D^2 + 1 has roots +-i on the axis
  auto fail = estker::dichotomy_check(
      estker::characteristic_roots(DifferentialOperator::from_constants({1.0, 0.0, 1.0})));
  REQUIRE_FALSE(fail.pass);
  REQUIRE(fail.on_axis.size() == 2);
  REQUIRE_THAT(fail.describe(), Catch::Matchers::ContainsSubstring("fails"));
}

TEST_CASE("operator validation") {
  REQUIRE_THROWS_AS(DifferentialOperator::from_constants({1.0, 1.0}), estker::ValidationError);
  REQUIRE_THROWS_AS(DifferentialOperator::from_constants({1.0, 0.0, 0.0}), estker::ValidationError);

  estker::ProblemSpec bad{one_minus_D2(), one_minus_D2(), SmoothExpression::constant(1.0), 1.0, {}};
  REQUIRE_THROWS_AS(bad.validate(), estker::ValidationError);

  estker::ProblemSpec neg{one_minus_D2(), DifferentialOperator::from_constants({1.0}),
                          SmoothExpression::constant(1.0), -2.0, {}};
  REQUIRE_THROWS_AS(neg.validate(), estker::ValidationError);

  std::vector<estker::Coefficient> vc;
  vc.emplace_back(SmoothExpression::monomial(1.0, 1));
  vc.emplace_back(0.0);
  vc.emplace_back(-1.0);
  estker::ProblemSpec varq{DifferentialOperator(std::move(vc)),
                           DifferentialOperator::from_constants({1.0}),
                           SmoothExpression::constant(1.0), 1.0, {}};
  REQUIRE_THROWS_AS(varq.validate(), estker::NonConstantCoefficients);
}
