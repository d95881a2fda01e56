#pragma once

// Scalar types used by the recursion engines.
//
// Every numeric routine in drlab is a template over a `Real` and is
// explicitly instantiated for `double` (standard mode) and `Extended`
// (MPFR-backed, digit count chosen at run time).

#include <boost/multiprecision/mpfr.hpp>

#include <string>
#include <string_view>

namespace drlab {

using Extended = boost::multiprecision::mpfr_float;

enum class PrecisionMode { Standard, Extended };

struct Precision {
  PrecisionMode mode = PrecisionMode::Standard;
  unsigned digits = 50;  // only meaningful in extended mode

  static constexpr unsigned kMinExtendedDigits = 30;
  static constexpr unsigned kDefaultExtendedDigits = 50;

  static Precision standard() { return {}; }
  static Precision extended(unsigned digits = kDefaultExtendedDigits);

  /// Parses "standard" or "extended[:<digits>]".
  static Precision parse(std::string_view text);

  /// Decimal digits carried by the active arithmetic.
  unsigned significant_digits() const;

  std::string to_string() const;

  friend bool operator==(const Precision&, const Precision&) = default;
};

/// Sets the default MPFR precision for newly created `Extended` values and
/// restores the previous value on destruction.
///
/// The underlying default is process-wide, so extended computations with
/// different digit counts must not run concurrently.
class ScopedPrecision {
 public:
  explicit ScopedPrecision(unsigned digits);
  ~ScopedPrecision();
  ScopedPrecision(const ScopedPrecision&) = delete;
  ScopedPrecision& operator=(const ScopedPrecision&) = delete;

 private:
  unsigned saved_;
};

template <class Real>
struct RealTraits;

template <>
struct RealTraits<double> {
  static double parse(const std::string& s);
  static std::string format(double x, unsigned digits = 17);
  static double to_double(double x) { return x; }
  static double epsilon();
  static unsigned digits10() { return 15; }
};

template <>
struct RealTraits<Extended> {
  static Extended parse(const std::string& s);
  static std::string format(const Extended& x, unsigned digits = 0);
  static double to_double(const Extended& x) { return x.convert_to<double>(); }
  static Extended epsilon();
  static unsigned digits10();
};

template <class Real>
std::string format_real(const Real& x, unsigned digits = 0) {
  if constexpr (std::is_same_v<Real, double>)
    return RealTraits<double>::format(x, digits == 0 ? 17 : digits);
  else
    return RealTraits<Real>::format(x, digits);
}

inline double to_double(double x) { return x; }
inline double to_double(const Extended& x) { return RealTraits<Extended>::to_double(x); }

}  // namespace drlab
