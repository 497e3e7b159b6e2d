#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>

namespace caustic {

/// Exact rational arithmetic for the exponent-set combinatorics.
/// Values stay tiny (numerators bounded by a few hundred), but every product
/// is still checked for overflow so a bad input fails loudly.
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  Rational() = default;
  Rational(std::int64_t n) : num(n), den(1) {}
  Rational(std::int64_t n, std::int64_t d) : num(n), den(d) { normalize(); }

  void normalize() {
    if (den == 0) throw std::invalid_argument("Rational: zero denominator");
    if (den < 0) { num = -num; den = -den; }
    const std::int64_t g = std::gcd(num < 0 ? -num : num, den);
    if (g > 1) { num /= g; den /= g; }
  }

  double value() const { return static_cast<double>(num) / static_cast<double>(den); }

  std::string str() const {
    if (den == 1) return std::to_string(num);
    return std::to_string(num) + "/" + std::to_string(den);
  }

  friend bool operator==(const Rational& a, const Rational& b) {
    return a.num == b.num && a.den == b.den;
  }
  friend bool operator!=(const Rational& a, const Rational& b) { return !(a == b); }
  friend bool operator<(const Rational& a, const Rational& b) {
    return checked_mul(a.num, b.den) < checked_mul(b.num, a.den);
  }

  friend Rational operator+(const Rational& a, const Rational& b) {
    return Rational(checked_mul(a.num, b.den) + checked_mul(b.num, a.den),
                    checked_mul(a.den, b.den));
  }
  friend Rational operator-(const Rational& a, const Rational& b) {
    return Rational(checked_mul(a.num, b.den) - checked_mul(b.num, a.den),
                    checked_mul(a.den, b.den));
  }
  friend Rational operator*(const Rational& a, const Rational& b) {
    return Rational(checked_mul(a.num, b.num), checked_mul(a.den, b.den));
  }
  friend Rational operator/(const Rational& a, const Rational& b) {
    if (b.num == 0) throw std::invalid_argument("Rational: division by zero");
    return Rational(checked_mul(a.num, b.den), checked_mul(a.den, b.num));
  }

private:
  static std::int64_t checked_mul(std::int64_t a, std::int64_t b) {
    const __int128 p = static_cast<__int128>(a) * b;
    if (p > INT64_MAX || p < INT64_MIN) throw std::overflow_error("Rational overflow");
    return static_cast<std::int64_t>(p);
  }
};

/// Parse "p", "-p", or "p/q". Returns false on anything else (e.g. "0.25").
inline bool try_parse_rational(const std::string& s, Rational& out) {
  if (s.empty()) return false;
  const auto slash = s.find('/');
  try {
    std::size_t used = 0;
    if (slash == std::string::npos) {
      const std::int64_t n = std::stoll(s, &used);
      if (used != s.size()) return false;
      out = Rational(n);
      return true;
    }
    const std::int64_t n = std::stoll(s.substr(0, slash), &used);
    if (used != slash) return false;
    const std::int64_t d = std::stoll(s.substr(slash + 1), &used);
    if (used != s.size() - slash - 1 || d == 0) return false;
    out = Rational(n, d);
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

} // namespace caustic
