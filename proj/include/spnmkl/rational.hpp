#pragma once

#include <cstdint>
#include <numeric>
#include <ostream>

namespace spnmkl {

/// Small exact fraction used for path exponents and coefficient identities.
/// Always stored reduced with a positive denominator.
class Rational {
 public:
  constexpr Rational() = default;
  constexpr Rational(std::int64_t num, std::int64_t den = 1) : num_(num), den_(den) { normalize(); }

  constexpr std::int64_t num() const { return num_; }
  constexpr std::int64_t den() const { return den_; }
  constexpr double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }

  friend constexpr Rational operator+(Rational a, Rational b) {
    std::int64_t g = std::gcd(a.den_, b.den_);
    return {a.num_ * (b.den_ / g) + b.num_ * (a.den_ / g), a.den_ / g * b.den_};
  }
  friend constexpr Rational operator*(Rational a, Rational b) {
    return {a.num_ * b.num_, a.den_ * b.den_};
  }
  Rational& operator+=(Rational o) { return *this = *this + o; }

  friend constexpr bool operator==(Rational a, Rational b) = default;

  friend std::ostream& operator<<(std::ostream& os, Rational r) {
    os << r.num_;
    if (r.den_ != 1) os << '/' << r.den_;
    return os;
  }

 private:
  constexpr void normalize() {
    if (den_ < 0) {
      num_ = -num_;
      den_ = -den_;
    }
    std::int64_t g = std::gcd(num_ < 0 ? -num_ : num_, den_);
    if (g > 1) {
      num_ /= g;
      den_ /= g;
    }
  }

  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

}  // namespace spnmkl
