#ifndef ESTKER_PARSE_HPP
#define ESTKER_PARSE_HPP

#include <cctype>
#include <cstdlib>
#include <string>
#include <vector>

#include "estker/errors.hpp"
#include "estker/expression.hpp"

namespace estker {

/**
 * Parsed closed-family expression, possibly depending on the parameter z:
 * a sum of terms c * z^p * x^k * exp(a*x) * {cos|sin}(b*x).  Binding z
 * yields a concrete SmoothExpression.
 */
class ParsedExpression {
 public:
  bool uses_z() const { return uses_z_; }

  SmoothExpression bind(double z = 0.0) const {
    SmoothExpression e;
    for (const ProtoTerm& t : terms_) {
      double c = t.coeff;
      for (int i = 0; i < t.zpow; ++i) c *= z;
      e += SmoothExpression::mode(c, t.xpow, t.rate, t.trig, t.freq);
    }
    return e;
  }

  static ParsedExpression parse(const std::string& src) {
    Parser p(src);
    ParsedExpression out = p.expression();
    p.skip_ws();
    if (!p.done()) p.fail("unexpected trailing input");
    return out;
  }

 private:
  struct ProtoTerm {
    double coeff = 1.0;
    int zpow = 0;
    int xpow = 0;
    double rate = 0.0;
    Trig trig = Trig::None;
    double freq = 0.0;
  };

  std::vector<ProtoTerm> terms_;
  bool uses_z_ = false;

  // Minimal LL(1) recursive-descent parser with exact error positions.
  class Parser {
   public:
    explicit Parser(const std::string& s) : s_(s) {}

    ParsedExpression expression() {
      ParsedExpression out;
      skip_ws();
      double sign = leading_sign();
      out.append(term(), sign);
      for (;;) {
        skip_ws();
        if (peek() == '+' || peek() == '-') {
          double s = (get() == '+') ? 1.0 : -1.0;
          out.append(term(), s);
        } else {
          break;
        }
      }
      return out;
    }

    void skip_ws() {
      while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    bool done() const { return pos_ >= s_.size(); }
    [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, pos_); }

   private:
    const std::string& s_;
    std::size_t pos_ = 0;

    char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }
    char get() { return pos_ < s_.size() ? s_[pos_++] : '\0'; }

    double leading_sign() {
      skip_ws();
      if (peek() == '+') {
        get();
        return 1.0;
      }
      if (peek() == '-') {
        get();
        return -1.0;
      }
      return 1.0;
    }

    ProtoTerm term() {
      ProtoTerm t;
      factor(t);
      for (;;) {
        skip_ws();
        if (peek() == '*') {
          get();
          factor(t);
        } else {
          break;
        }
      }
      return t;
    }

    void factor(ProtoTerm& t) {
      skip_ws();
      char c = peek();
      if (c == '\0') fail("expected a factor");
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
        t.coeff *= number();
        return;
      }
      if (c == 'z') {
        get();
        t.zpow += exponent();
        return;
      }
      if (c == 'x') {
        get();
        t.xpow += exponent();
        return;
      }
      if (match_word("exp")) {
        double a = argument();
        t.rate += a;
        return;
      }
      if (match_word("cos")) {
        set_trig(t, Trig::Cos, argument());
        return;
      }
      if (match_word("sin")) {
        set_trig(t, Trig::Sin, argument());
        return;
      }
      fail(std::string("unexpected character '") + c + "'");
    }

    void set_trig(ProtoTerm& t, Trig kind, double freq) {
      if (t.trig != Trig::None) fail("at most one cos/sin factor per term");
      t.trig = kind;
      t.freq = freq;
    }

    bool match_word(const char* w) {
      std::size_t len = std::char_traits<char>::length(w);
      if (s_.compare(pos_, len, w) == 0) {
        pos_ += len;
        return true;
      }
      return false;
    }

    // '(' signed-number '*' 'x' ')'
    double argument() {
      expect('(');
      skip_ws();
      double sign = 1.0;
      if (peek() == '+' || peek() == '-') sign = (get() == '+') ? 1.0 : -1.0;
      skip_ws();
      double v = number();
      expect('*');
      skip_ws();
      if (get() != 'x') fail("expected 'x' inside exp/cos/sin argument");
      expect(')');
      return sign * v;
    }

    int exponent() {
      skip_ws();
      if (peek() != '^') return 1;
      get();
      skip_ws();
      if (!std::isdigit(static_cast<unsigned char>(peek()))) fail("expected a nonnegative integer exponent");
      int v = 0;
      while (std::isdigit(static_cast<unsigned char>(peek()))) v = v * 10 + (get() - '0');
      if (v > 64) fail("exponent too large");
      return v;
    }

    double number() {
      skip_ws();
      const char* start = s_.c_str() + pos_;
      char* end = nullptr;
      double v = std::strtod(start, &end);
      if (end == start) fail("expected a number");
      pos_ += std::size_t(end - start);
      return v;
    }

    void expect(char c) {
      skip_ws();
      if (peek() != c) fail(std::string("expected '") + c + "'");
      get();
    }
  };

  void append(ProtoTerm t, double sign) {
    t.coeff *= sign;
    if (t.zpow > 0) uses_z_ = true;
    terms_.push_back(t);
  }

  friend class Parser;
};

inline SmoothExpression parse_expression(const std::string& src) {
  ParsedExpression p = ParsedExpression::parse(src);
  if (p.uses_z()) throw ParseError("'z' is only allowed in filter-demo expressions", 0);
  return p.bind();
}

}  // namespace estker

#endif  // ESTKER_PARSE_HPP
