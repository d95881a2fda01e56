#pragma once

// Exact rational reference implementation of the parameter recursion,
// written independently of the library so tests can compare against it.

#include <boost/multiprecision/cpp_int.hpp>

#include <utility>
#include <vector>

namespace drlab::testing {

using Rational = boost::multiprecision::cpp_rational;

struct RationalLaw {
  Rational r, p;
};

inline RationalLaw rational_step(const RationalLaw& law, const Rational& m) {
  Rational r1 = law.r / (m - (m - 1) * law.p);
  Rational p1 = 1 - (1 - r1) * (1 - r1 * law.p / law.r);
  return {r1, p1};
}

inline std::vector<RationalLaw> rational_iterate(RationalLaw law, const Rational& m, int steps) {
  std::vector<RationalLaw> out{law};
  for (int i = 0; i < steps; ++i) out.push_back(law = rational_step(law, m));
  return out;
}

inline double to_double(const Rational& x) { return x.convert_to<double>(); }

/// Converts through numerator and denominator; the direct rational to MPFR
/// conversion in Boost 1.74 is inaccurate for large operands.
template <class Real>
Real to_real(const Rational& x) {
  return Real(numerator(x)) / Real(denominator(x));
}

}  // namespace drlab::testing
