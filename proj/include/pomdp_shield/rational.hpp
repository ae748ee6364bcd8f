#pragma once

#include <boost/rational.hpp>
#include <cstdint>
#include <string>
#include <string_view>

#include "pomdp_shield/util.hpp"

namespace pomdp_shield {

// Transition weights are exact; the synthesis itself only ever looks at supports.
using Rational = boost::rational<long long>;

inline Rational parse_rational(std::string_view text) {
  auto parse_int = [](std::string_view t) -> long long {
    if (t.empty()) {
      throw ModelError("empty number in rational");
    }
    std::size_t i = 0;
    bool negative = false;
    if (t[0] == '-') {
      negative = true;
      i = 1;
      if (t.size() == 1) {
        throw ModelError("bare '-' in rational");
      }
    }
    long long value = 0;
    for (; i < t.size(); ++i) {
      if (t[i] < '0' || t[i] > '9') {
        throw ModelError("malformed rational: " + std::string(t));
      }
      value = value * 10 + (t[i] - '0');
    }
    return negative ? -value : value;
  };
  std::size_t slash = text.find('/');
  if (slash == std::string_view::npos) {
    return Rational(parse_int(text), 1);
  }
  long long num = parse_int(text.substr(0, slash));
  long long den = parse_int(text.substr(slash + 1));
  if (den == 0) {
    throw ModelError("zero denominator in rational: " + std::string(text));
  }
  return Rational(num, den);
}

// Canonical "num/den" form, denominator always spelled out.
inline std::string to_string(Rational const& r) {
  return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

inline double to_double(Rational const& r) {
  return static_cast<double>(r.numerator()) / static_cast<double>(r.denominator());
}

}  // namespace pomdp_shield
