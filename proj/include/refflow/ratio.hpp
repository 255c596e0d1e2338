#pragma once

// Exact rational numbers over 64-bit integers.
//
// Every share the engine reports (indicator values, self-impact, RA cells) is
// a quotient or difference of quotients of reference counts, so a normalized
// num/den pair reproduces them exactly. Intermediate products use 128-bit
// arithmetic; a result that does not fit back into 64 bits throws.

#include <compare>
#include <cstdint>
#include <cstdlib>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>

namespace refflow {

class Ratio {
 public:
  constexpr Ratio() = default;
  Ratio(std::int64_t num) : num_(num), den_(1) {}  // NOLINT(implicit)
  Ratio(std::int64_t num, std::int64_t den) { assign(num, den); }

  static Ratio of_counts(std::uint64_t num, std::uint64_t den) {
    return Ratio(checked(static_cast<__int128>(num)), checked(static_cast<__int128>(den)));
  }

  std::int64_t num() const noexcept { return num_; }
  std::int64_t den() const noexcept { return den_; }

  double to_double() const noexcept { return static_cast<double>(num_) / static_cast<double>(den_); }

  bool is_zero() const noexcept { return num_ == 0; }
  int sign() const noexcept { return (num_ > 0) - (num_ < 0); }

  friend Ratio operator-(const Ratio& a) { return from_wide(-static_cast<__int128>(a.num_), a.den_); }

  friend Ratio operator+(const Ratio& a, const Ratio& b) {
    const std::int64_t g = std::gcd(a.den_, b.den_);
    const __int128 lhs = static_cast<__int128>(a.num_) * (b.den_ / g);
    const __int128 rhs = static_cast<__int128>(b.num_) * (a.den_ / g);
    const __int128 den = static_cast<__int128>(a.den_ / g) * b.den_;
    return from_wide(lhs + rhs, den);
  }
  friend Ratio operator-(const Ratio& a, const Ratio& b) { return a + (-b); }

  friend Ratio operator*(const Ratio& a, const Ratio& b) {
    return from_wide(static_cast<__int128>(a.num_) * b.num_, static_cast<__int128>(a.den_) * b.den_);
  }

  Ratio& operator+=(const Ratio& o) { return *this = *this + o; }
  Ratio& operator-=(const Ratio& o) { return *this = *this - o; }

  friend bool operator==(const Ratio& a, const Ratio& b) noexcept {
    return a.num_ == b.num_ && a.den_ == b.den_;
  }
  friend std::strong_ordering operator<=>(const Ratio& a, const Ratio& b) noexcept {
    const __int128 lhs = static_cast<__int128>(a.num_) * b.den_;
    const __int128 rhs = static_cast<__int128>(b.num_) * a.den_;
    return lhs <=> rhs;
  }

  // Fixed-point decimal rendering with round-half-even at the last place.
  std::string to_fixed(int places = 6) const {
    __int128 scale = 1;
    for (int i = 0; i < places; ++i) scale *= 10;
    const bool negative = num_ < 0;
    const __int128 magnitude = negative ? -static_cast<__int128>(num_) : static_cast<__int128>(num_);
    const __int128 scaled = magnitude * scale;
    __int128 q = scaled / den_;
    const __int128 r = scaled % den_;
    if (2 * r > den_ || (2 * r == den_ && (q % 2) != 0)) ++q;

    std::string digits = to_decimal(q / scale);
    if (places > 0) {
      std::string frac = to_decimal(q % scale);
      digits += '.';
      digits.append(static_cast<std::size_t>(places) - frac.size(), '0');
      digits += frac;
    }
    return (negative && q != 0) ? "-" + digits : digits;
  }

  // "num/den", or just "num" for integers.
  std::string to_string() const {
    return den_ == 1 ? std::to_string(num_) : std::to_string(num_) + "/" + std::to_string(den_);
  }

  friend std::ostream& operator<<(std::ostream& os, const Ratio& r) { return os << r.to_string(); }

 private:
  static std::int64_t checked(__int128 v) {
    if (v > INT64_MAX || v < INT64_MIN) throw std::overflow_error("Ratio: 64-bit overflow");
    return static_cast<std::int64_t>(v);
  }

  static __int128 gcd_wide(__int128 a, __int128 b) {
    if (a < 0) a = -a;
    if (b < 0) b = -b;
    while (b != 0) {
      const __int128 t = a % b;
      a = b;
      b = t;
    }
    return a;
  }

  static Ratio from_wide(__int128 num, __int128 den) {
    if (den == 0) throw std::domain_error("Ratio: zero denominator");
    if (den < 0) {
      num = -num;
      den = -den;
    }
    const __int128 g = gcd_wide(num, den);
    Ratio r;
    r.num_ = checked(g == 0 ? num : num / g);
    r.den_ = checked(g == 0 ? den : den / g);
    if (r.num_ == 0) r.den_ = 1;
    return r;
  }

  void assign(std::int64_t num, std::int64_t den) { *this = from_wide(num, den); }

  static std::string to_decimal(__int128 v) {
    if (v == 0) return "0";
    std::string s;
    while (v > 0) {
      s.insert(s.begin(), static_cast<char>('0' + static_cast<int>(v % 10)));
      v /= 10;
    }
    return s;
  }

  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

}  // namespace refflow
