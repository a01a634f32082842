#ifndef ESTKER_EXPRESSION_HPP
#define ESTKER_EXPRESSION_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "estker/errors.hpp"

namespace estker {

enum class Trig : std::uint8_t { None, Cos, Sin };

// One term c * x^k * exp(a*x) * {1, cos(b*x), sin(b*x)}.
struct ExprTerm {
  double coeff = 0.0;
  int power = 0;
  double exp_rate = 0.0;
  Trig trig = Trig::None;
  double trig_freq = 0.0;
};

namespace detail {

inline double ipow(double x, int k) {
  double r = 1.0;
  double b = x;
  for (int e = k; e > 0; e >>= 1) {
    if (e & 1) r *= b;
    b *= b;
  }
  return r;
}

inline double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * double(n - k + i) / double(i);
  return r;
}

inline double falling_factorial(int k, int r) {
  double v = 1.0;
  for (int i = 0; i < r; ++i) v *= double(k - i);
  return v;
}

}  // namespace detail

/**
 * Closed-form scalar function: a finite sum of terms
 * c * x^k * exp(a*x) * {1, cos(b*x), sin(b*x)}.
 *
 * The family is closed under differentiation, antidifferentiation,
 * products, argument reflection and translation, so every derivative
 * and integral used by the solver is exact up to roundoff.
 */
class SmoothExpression {
 public:
  SmoothExpression() = default;

  static SmoothExpression constant(double c) { return monomial(c, 0); }

  static SmoothExpression monomial(double c, int k) {
    SmoothExpression e;
    e.push_term({c, k, 0.0, Trig::None, 0.0});
    e.normalize();
    return e;
  }

  // c * x^k * exp(a*x) * trig(b*x)
  static SmoothExpression mode(double c, int k, double a, Trig t = Trig::None, double b = 0.0) {
    SmoothExpression e;
    e.push_term({c, k, a, t, b});
    e.normalize();
    return e;
  }

  // Re[ c * x^k * exp(lambda*x) ] for complex c and lambda.
  static SmoothExpression complex_mode(std::complex<double> c, int k, std::complex<double> lambda) {
    SmoothExpression e;
    e.push_complex_mode(c, k, lambda);
    e.normalize();
    return e;
  }

  bool empty() const { return terms_.empty(); }
  const std::vector<ExprTerm>& terms() const { return terms_; }

  bool is_constant(double* value = nullptr) const {
    double v = 0.0;
    for (const ExprTerm& t : terms_) {
      if (t.power != 0 || t.exp_rate != 0.0 || t.trig != Trig::None) return false;
      v += t.coeff;
    }
    if (value) *value = v;
    return true;
  }

  double operator()(double x) const {
    double s = 0.0;
    for (const ExprTerm& t : terms_) {
      double v = t.coeff * detail::ipow(x, t.power);
      if (t.exp_rate != 0.0) v *= std::exp(t.exp_rate * x);
      if (t.trig == Trig::Cos)
        v *= std::cos(t.trig_freq * x);
      else if (t.trig == Trig::Sin)
        v *= std::sin(t.trig_freq * x);
      s += v;
    }
    return s;
  }

  SmoothExpression derivative() const {
    SmoothExpression d;
    for (const ExprTerm& t : terms_) {
      if (t.power > 0) d.push_term({t.coeff * t.power, t.power - 1, t.exp_rate, t.trig, t.trig_freq});
      if (t.exp_rate != 0.0) d.push_term({t.coeff * t.exp_rate, t.power, t.exp_rate, t.trig, t.trig_freq});
      if (t.trig == Trig::Cos)
        d.push_term({-t.coeff * t.trig_freq, t.power, t.exp_rate, Trig::Sin, t.trig_freq});
      else if (t.trig == Trig::Sin)
        d.push_term({t.coeff * t.trig_freq, t.power, t.exp_rate, Trig::Cos, t.trig_freq});
    }
    d.normalize();
    return d;
  }

  SmoothExpression derivative(int order) const {
    SmoothExpression d = *this;
    for (int i = 0; i < order; ++i) d = d.derivative();
    return d;
  }

  double derivative_at(double x, int order) const { return derivative(order)(x); }

  // An antiderivative with unspecified constant of integration.
  SmoothExpression antiderivative() const {
    SmoothExpression r;
    for (const ExprTerm& t : terms_) {
      if (t.exp_rate == 0.0 && t.trig == Trig::None) {
        r.push_term({t.coeff / double(t.power + 1), t.power + 1, 0.0, Trig::None, 0.0});
        continue;
      }
      // c x^k e^{ax} trig(bx) = Re[chat x^k e^{gamma x}], gamma = a + i b != 0.
      std::complex<double> chat =
          (t.trig == Trig::Sin) ? std::complex<double>(0.0, -t.coeff) : std::complex<double>(t.coeff, 0.0);
      std::complex<double> gamma(t.exp_rate, t.trig == Trig::None ? 0.0 : t.trig_freq);
      std::complex<double> g = 1.0 / gamma;
      for (int rr = 0; rr <= t.power; ++rr) {
        // integral x^k e^{gx} = e^{gx} sum_r (-1)^r k!/(k-r)! x^{k-r} / g^{r+1}
        double sign = (rr % 2 == 0) ? 1.0 : -1.0;
        std::complex<double> d = chat * sign * detail::falling_factorial(t.power, rr) * g;
        r.push_complex_mode(d, t.power - rr, gamma);
        g /= gamma;
      }
    }
    r.normalize();
    return r;
  }

  // Exact definite integral over [a, b].
  double integrate(double a, double b) const {
    SmoothExpression F = antiderivative();
    return F(b) - F(a);
  }

  // g(x) = f(-x)
  SmoothExpression reflected() const {
    SmoothExpression r;
    for (const ExprTerm& t : terms_) {
      double c = (t.power % 2 == 0) ? t.coeff : -t.coeff;
      if (t.trig == Trig::Sin) c = -c;
      r.push_term({c, t.power, -t.exp_rate, t.trig, t.trig_freq});
    }
    r.normalize();
    return r;
  }

  // g(x) = f(x - s)
  SmoothExpression translated(double s) const {
    SmoothExpression r;
    for (const ExprTerm& t : terms_) {
      // (x-s)^k expands binomially; exp and trig pick up phase factors.
      double ebase = (t.exp_rate != 0.0) ? std::exp(-t.exp_rate * s) : 1.0;
      double cth = 1.0, sth = 0.0;
      if (t.trig != Trig::None) {
        cth = std::cos(t.trig_freq * s);
        sth = std::sin(t.trig_freq * s);
      }
      for (int rr = 0; rr <= t.power; ++rr) {
        double base = t.coeff * ebase * detail::binomial(t.power, rr) * detail::ipow(-s, t.power - rr);
        if (t.trig == Trig::None) {
          r.push_term({base, rr, t.exp_rate, Trig::None, 0.0});
        } else if (t.trig == Trig::Cos) {
          // cos(b(x-s)) = cos(bs)cos(bx) + sin(bs)sin(bx)
          r.push_term({base * cth, rr, t.exp_rate, Trig::Cos, t.trig_freq});
          r.push_term({base * sth, rr, t.exp_rate, Trig::Sin, t.trig_freq});
        } else {
          // sin(b(x-s)) = cos(bs)sin(bx) - sin(bs)cos(bx)
          r.push_term({base * cth, rr, t.exp_rate, Trig::Sin, t.trig_freq});
          r.push_term({-base * sth, rr, t.exp_rate, Trig::Cos, t.trig_freq});
        }
      }
    }
    r.normalize();
    return r;
  }

  SmoothExpression& operator+=(const SmoothExpression& o) {
    for (const ExprTerm& t : o.terms_) push_term(t);
    normalize();
    return *this;
  }

  SmoothExpression& operator-=(const SmoothExpression& o) {
    for (const ExprTerm& t : o.terms_) push_term({-t.coeff, t.power, t.exp_rate, t.trig, t.trig_freq});
    normalize();
    return *this;
  }

  SmoothExpression& operator*=(double s) {
    for (ExprTerm& t : terms_) t.coeff *= s;
    normalize();
    return *this;
  }

  friend SmoothExpression operator+(SmoothExpression a, const SmoothExpression& b) { return a += b; }
  friend SmoothExpression operator-(SmoothExpression a, const SmoothExpression& b) { return a -= b; }
  friend SmoothExpression operator*(SmoothExpression a, double s) { return a *= s; }
  friend SmoothExpression operator*(double s, SmoothExpression a) { return a *= s; }

  friend SmoothExpression operator*(const SmoothExpression& a, const SmoothExpression& b) {
    SmoothExpression p;
    for (const ExprTerm& s : a.terms_)
      for (const ExprTerm& t : b.terms_) p.push_product(s, t);
    p.normalize();
    return p;
  }

  // Largest |coefficient|; a cheap magnitude scale for tolerance checks.
  double coeff_scale() const {
    double m = 0.0;
    for (const ExprTerm& t : terms_) m = std::max(m, std::abs(t.coeff));
    return m;
  }

  std::string to_string() const;

 private:
  std::vector<ExprTerm> terms_;

  void push_term(ExprTerm t) {
    if (t.coeff == 0.0) return;
    if (!std::isfinite(t.coeff) || !std::isfinite(t.exp_rate) || !std::isfinite(t.trig_freq))
      throw ValidationError("non-finite value in expression term");
    if (t.trig == Trig::None) {
      t.trig_freq = 0.0;
    } else if (t.trig_freq == 0.0) {
      if (t.trig == Trig::Sin) return;  // sin(0) = 0
      t.trig = Trig::None;              // cos(0) = 1
    } else if (t.trig_freq < 0.0) {
      t.trig_freq = -t.trig_freq;
      if (t.trig == Trig::Sin) t.coeff = -t.coeff;
    }
    terms_.push_back(t);
  }

  void push_complex_mode(std::complex<double> c, int k, std::complex<double> lambda) {
    if (lambda.imag() == 0.0) {
      push_term({c.real(), k, lambda.real(), Trig::None, 0.0});
    } else {
      push_term({c.real(), k, lambda.real(), Trig::Cos, lambda.imag()});
      push_term({-c.imag(), k, lambda.real(), Trig::Sin, lambda.imag()});
    }
  }

  void push_product(const ExprTerm& s, const ExprTerm& t) {
    double c = s.coeff * t.coeff;
    int k = s.power + t.power;
    double a = s.exp_rate + t.exp_rate;
    if (s.trig == Trig::None || t.trig == Trig::None) {
      const ExprTerm& w = (s.trig == Trig::None) ? t : s;
      push_term({c, k, a, w.trig, w.trig_freq});
      return;
    }
    double bd = s.trig_freq - t.trig_freq;
    double bs = s.trig_freq + t.trig_freq;
    if (s.trig == Trig::Cos && t.trig == Trig::Cos) {
      push_term({0.5 * c, k, a, Trig::Cos, bd});
      push_term({0.5 * c, k, a, Trig::Cos, bs});
    } else if (s.trig == Trig::Sin && t.trig == Trig::Sin) {
      push_term({0.5 * c, k, a, Trig::Cos, bd});
      push_term({-0.5 * c, k, a, Trig::Cos, bs});
    } else {
      // sin * cos; orient so the sin factor carries frequency b1.
      double b1 = (s.trig == Trig::Sin) ? s.trig_freq : t.trig_freq;
      double b2 = (s.trig == Trig::Sin) ? t.trig_freq : s.trig_freq;
      push_term({0.5 * c, k, a, Trig::Sin, b1 + b2});
      push_term({0.5 * c, k, a, Trig::Sin, b1 - b2});
    }
  }

  void normalize() {
    std::sort(terms_.begin(), terms_.end(), [](const ExprTerm& u, const ExprTerm& v) {
      if (u.power != v.power) return u.power < v.power;
      if (u.exp_rate != v.exp_rate) return u.exp_rate < v.exp_rate;
      if (u.trig != v.trig) return u.trig < v.trig;
      return u.trig_freq < v.trig_freq;
    });
    std::vector<ExprTerm> merged;
    for (const ExprTerm& t : terms_) {
      if (!merged.empty()) {
        ExprTerm& b = merged.back();
        if (b.power == t.power && b.exp_rate == t.exp_rate && b.trig == t.trig &&
            b.trig_freq == t.trig_freq) {
          b.coeff += t.coeff;
          continue;
        }
      }
      merged.push_back(t);
    }
    merged.erase(std::remove_if(merged.begin(), merged.end(),
                                [](const ExprTerm& t) { return t.coeff == 0.0; }),
                 merged.end());
    terms_ = std::move(merged);
  }
};

inline std::string SmoothExpression::to_string() const {
  if (terms_.empty()) return "0";
  std::string s;
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    const ExprTerm& t = terms_[i];
    if (i) s += " + ";
    s += std::to_string(t.coeff);
    if (t.power) s += " * x^" + std::to_string(t.power);
    if (t.exp_rate != 0.0) s += " * exp(" + std::to_string(t.exp_rate) + "*x)";
    if (t.trig == Trig::Cos) s += " * cos(" + std::to_string(t.trig_freq) + "*x)";
    if (t.trig == Trig::Sin) s += " * sin(" + std::to_string(t.trig_freq) + "*x)";
  }
  return s;
}

}  // namespace estker

#endif  // ESTKER_EXPRESSION_HPP
