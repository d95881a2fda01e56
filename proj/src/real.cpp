#include "drlab/real.hpp"

#include "drlab/errors.hpp"

#include <charconv>
#include <cmath>
#include <limits>

namespace drlab {

Precision Precision::extended(unsigned digits) {
  if (digits < kMinExtendedDigits)
    throw ArgumentError("extended precision needs at least " +
                        std::to_string(kMinExtendedDigits) + " digits");
  return {PrecisionMode::Extended, digits};
}

Precision Precision::parse(std::string_view text) {
  if (text == "standard") return standard();
  constexpr std::string_view prefix = "extended";
  if (text.substr(0, prefix.size()) != prefix)
    throw ArgumentError("precision must be 'standard' or 'extended[:digits]'");
  auto rest = text.substr(prefix.size());
  if (rest.empty()) return extended();
  if (rest.front() != ':')
    throw ArgumentError("precision must be 'standard' or 'extended[:digits]'");
  rest.remove_prefix(1);
  unsigned digits = 0;
  auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), digits);
  if (ec != std::errc{} || ptr != rest.data() + rest.size())
    throw ArgumentError("bad digit count in precision '" + std::string(text) + "'");
  return extended(digits);
}

unsigned Precision::significant_digits() const {
  return mode == PrecisionMode::Standard ? 15u : digits;
}

std::string Precision::to_string() const {
  if (mode == PrecisionMode::Standard) return "standard";
  return "extended:" + std::to_string(digits);
}

ScopedPrecision::ScopedPrecision(unsigned digits)
    : saved_(Extended::default_precision()) {
  Extended::default_precision(digits);
}

ScopedPrecision::~ScopedPrecision() { Extended::default_precision(saved_); }

double RealTraits<double>::parse(const std::string& s) {
  double value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw ArgumentError("not a number: '" + s + "'");
  return value;
}

std::string RealTraits<double>::format(double x, unsigned digits) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x,
                                 std::chars_format::general, static_cast<int>(digits));
  return std::string(buf, ptr);
}

double RealTraits<double>::epsilon() { return std::numeric_limits<double>::epsilon(); }

Extended RealTraits<Extended>::parse(const std::string& s) {
  try {
    return Extended(s);
  } catch (const std::exception&) {
    throw ArgumentError("not a number: '" + s + "'");
  }
}

std::string RealTraits<Extended>::format(const Extended& x, unsigned digits) {
  if (digits == 0) digits = Extended::default_precision();
  return x.str(static_cast<std::streamsize>(digits), std::ios_base::fmtflags(0));
}

Extended RealTraits<Extended>::epsilon() {
  using std::pow;
  return pow(Extended(10), -static_cast<int>(Extended::default_precision()) + 1);
}

unsigned RealTraits<Extended>::digits10() { return Extended::default_precision(); }

}  // namespace drlab
