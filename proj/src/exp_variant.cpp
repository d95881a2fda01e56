#include "drlab/exp_variant.hpp"

#include "drlab/errors.hpp"

#include <cmath>
#include <string>

namespace drlab {

ExponentialTypeLaw::ExponentialTypeLaw(double lambda, double p) {
  if (!(lambda > 0) || !std::isfinite(lambda))
    throw ArgumentError("lambda must be positive and finite, got " + std::to_string(lambda));
  if (!(p > 0 && p < 1)) throw ArgumentError("p must lie in (0, 1), got " + std::to_string(p));
  lambda_ = lambda;
  p_ = p;
  survival_ = 1 - p;
}

ExpVariantConfig::ExpVariantConfig(double m_, std::optional<double> alpha_) : m(m_) {
  if (!(m > 1) || !std::isfinite(m)) throw ArgumentError("offspring mean m must exceed 1");
  alpha = alpha_ ? *alpha_ : std::log(m);
  if (!(alpha > 0) || !std::isfinite(alpha)) throw ArgumentError("alpha must be positive");
}

ExponentialTypeLaw exp_step(const ExponentialTypeLaw& law, const ExpVariantConfig& config) {
  // e^{alpha} (1 - (1 - e^{-alpha}) p) = 1 + (e^{alpha} - 1)(1 - p)
  const double grow = std::expm1(config.alpha);
  const double denom = 1 + grow * law.survival();
  const double lambda1 = law.lambda() / denom;
  // lambda1 p / lambda = p / denom, and 1 - p / denom = e^{alpha} (1 - p) / denom
  const double ratio = law.p() / denom;
  const double decay = std::exp(-lambda1);
  const double survival1 = decay * ((1 + grow) * law.survival() / denom);
  const double p1 = -std::expm1(-lambda1) + decay * ratio;
  return ExponentialTypeLaw(lambda1, p1, survival1);
}

std::vector<ExponentialTypeLaw> exp_iterate(const ExponentialTypeLaw& law0,
                                            const ExpVariantConfig& config, std::size_t steps) {
  if (steps > config.max_steps)
    throw ResourceLimitError("requested " + std::to_string(steps) + " steps, budget is " +
                             std::to_string(config.max_steps));
  std::vector<ExponentialTypeLaw> laws;
  laws.reserve(steps + 1);
  laws.push_back(law0);
  for (std::size_t i = 0; i < steps; ++i) laws.push_back(exp_step(laws.back(), config));
  return laws;
}

}  // namespace drlab
