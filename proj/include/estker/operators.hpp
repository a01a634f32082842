#ifndef ESTKER_OPERATORS_HPP
#define ESTKER_OPERATORS_HPP

#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "estker/errors.hpp"
#include "estker/expression.hpp"
#include "estker/polyroots.hpp"

namespace estker {

using Coefficient = std::variant<double, SmoothExpression>;

/**
 * Formal differential operator sum_j q_j(x) d^j/dx^j of even order.
 * Coefficients are constants or closed-form expressions of x.
 */
class DifferentialOperator {
 public:
  explicit DifferentialOperator(std::vector<Coefficient> coeffs) : coeffs_(std::move(coeffs)) {
    if (coeffs_.empty()) throw ValidationError("operator needs at least one coefficient");
    order_ = int(coeffs_.size()) - 1;
    if (order_ % 2 != 0)
      throw ValidationError("operator order must be even, got " + std::to_string(order_));
    check_leading_nonvanishing(-1.0, 2.0);
  }

  static DifferentialOperator from_constants(std::vector<double> c) {
    std::vector<Coefficient> v(c.begin(), c.end());
    return DifferentialOperator(std::move(v));
  }

  int order() const { return order_; }
  const Coefficient& coeff(int j) const { return coeffs_.at(std::size_t(j)); }

  bool coeff_is_constant(int j, double* value = nullptr) const {
    const Coefficient& c = coeffs_.at(std::size_t(j));
    if (std::holds_alternative<double>(c)) {
      if (value) *value = std::get<double>(c);
      return true;
    }
    return std::get<SmoothExpression>(c).is_constant(value);
  }

  bool constant_coefficients() const {
    for (int j = 0; j <= order_; ++j)
      if (!coeff_is_constant(j)) return false;
    return true;
  }

  // Characteristic polynomial coefficients; throws for variable coefficients.
  std::vector<double> constant_coeff_values() const {
    std::vector<double> v(std::size_t(order_) + 1);
    for (int j = 0; j <= order_; ++j)
      if (!coeff_is_constant(j, &v[std::size_t(j)]))
        throw NonConstantCoefficients("coefficient of derivative order " + std::to_string(j) +
                                      " is not constant");
    return v;
  }

  bool leading_is_constant(double* value = nullptr) const { return coeff_is_constant(order_, value); }

  double coeff_value(int j, double x) const {
    const Coefficient& c = coeffs_.at(std::size_t(j));
    if (std::holds_alternative<double>(c)) return std::get<double>(c);
    return std::get<SmoothExpression>(c)(x);
  }

  // Exact t-th derivative of the coefficient of order j, evaluated at x.
  double coeff_derivative(int j, int t, double x) const {
    if (t == 0) return coeff_value(j, x);
    const Coefficient& c = coeffs_.at(std::size_t(j));
    if (std::holds_alternative<double>(c)) return 0.0;
    return std::get<SmoothExpression>(c).derivative_at(x, t);
  }

  SmoothExpression coeff_expr(int j) const {
    const Coefficient& c = coeffs_.at(std::size_t(j));
    if (std::holds_alternative<double>(c)) return SmoothExpression::constant(std::get<double>(c));
    return std::get<SmoothExpression>(c);
  }

  // Ellipticity guard: the leading coefficient must stay away from zero
  // on the working interval (sampled).
  void check_leading_nonvanishing(double lo, double hi, int samples = 257) const {
    for (int i = 0; i < samples; ++i) {
      double x = lo + (hi - lo) * double(i) / double(samples - 1);
      if (std::abs(coeff_value(order_, x)) < 1e-12)
        throw ValidationError("leading coefficient vanishes near x = " + std::to_string(x));
    }
  }

 private:
  int order_ = 0;
  std::vector<Coefficient> coeffs_;
};

inline SmoothExpression apply_operator(const DifferentialOperator& op, const SmoothExpression& u) {
  SmoothExpression result;
  SmoothExpression du = u;
  for (int j = 0; j <= op.order(); ++j) {
    if (j > 0) du = du.derivative();
    double cval = 0.0;
    if (op.coeff_is_constant(j, &cval)) {
      if (cval != 0.0) result += du * cval;
    } else {
      result += op.coeff_expr(j) * du;
    }
  }
  return result;
}

inline std::vector<RootCluster> characteristic_roots(const DifferentialOperator& op,
                                                     double cluster_tol = 1e-8) {
  return polynomial_roots(op.constant_coeff_values(), cluster_tol);
}

struct DichotomyReport {
  bool pass = false;
  int negative = 0;  // multiplicity count with Re < 0
  int positive = 0;
  std::vector<RootCluster> on_axis;

  std::string describe() const {
    std::ostringstream os;
    os << "dichotomy " << (pass ? "holds" : "fails") << ": " << negative
       << " roots with Re<0, " << positive << " with Re>0";
    if (!on_axis.empty()) {
      os << ", near-imaginary-axis roots:";
      for (const auto& r : on_axis)
        os << " (" << r.root.real() << (r.root.imag() < 0 ? "-" : "+")
           << std::abs(r.root.imag()) << "i)x" << r.multiplicity;
    }
    return os.str();
  }
};

// Passes iff the roots split evenly off the imaginary axis.
inline DichotomyReport dichotomy_check(const std::vector<RootCluster>& roots, double axis_tol = 1e-8) {
  DichotomyReport rep;
  for (const RootCluster& r : roots) {
    if (std::abs(r.root.real()) <= axis_tol)
      rep.on_axis.push_back(r);
    else if (r.root.real() < 0.0)
      rep.negative += r.multiplicity;
    else
      rep.positive += r.multiplicity;
  }
  rep.pass = rep.on_axis.empty() && rep.negative == rep.positive && rep.negative > 0;
  return rep;
}

// User-supplied decaying half-line bases for a variable-coefficient Q.
// Decay on the half-lines is an unchecked assertion by the caller.
struct CustomDecayingBases {
  std::vector<SmoothExpression> left;   // solutions of Qu=0 decaying as x -> -inf
  std::vector<SmoothExpression> right;  // decaying as x -> +inf
};

struct ProblemSpec {
  DifferentialOperator Q;
  DifferentialOperator P;
  SmoothExpression f;
  double L = 1.0;
  std::optional<CustomDecayingBases> custom_bases;

  int n() const { return Q.order(); }
  int m() const { return P.order(); }
  int alpha() const { return (Q.order() - P.order()) / 2; }

  void validate() const {
    if (!(L > 0.0)) throw ValidationError("interval length L must be positive");
    if (Q.order() <= P.order())
      throw ValidationError("order of Q (" + std::to_string(Q.order()) +
                            ") must exceed order of P (" + std::to_string(P.order()) + ")");
    Q.check_leading_nonvanishing(-1.0, L + 1.0);
    P.check_leading_nonvanishing(-1.0, L + 1.0);
    if (custom_bases) {
      if (int(custom_bases->left.size()) != Q.order() / 2 ||
          int(custom_bases->right.size()) != Q.order() / 2)
        throw ValidationError("custom decaying bases must have n/2 functions per side");
    } else if (!Q.constant_coefficients()) {
      throw NonConstantCoefficients(
          "variable-coefficient Q requires user-supplied decaying bases");
    }
  }
};

}  // namespace estker

#endif  // ESTKER_OPERATORS_HPP
