#pragma once

// Exponential-type marginal recursion: mu_n = p_n delta_0 + (1 - p_n) Exp(lambda_n),
//
//   lambda_{n+1} = e^{-alpha} lambda_n / (1 - (1 - e^{-alpha}) p_n)
//   p_{n+1}      = 1 - e^{-lambda_{n+1}} (1 - lambda_{n+1} p_n / lambda_n)
//
// evaluated in double precision. The parameter alpha defaults to log m.

#include <cstddef>
#include <optional>
#include <vector>

namespace drlab {

struct ExpVariantConfig;

class ExponentialTypeLaw {
 public:
  /// Throws ArgumentError unless lambda > 0 and 0 < p < 1.
  ExponentialTypeLaw(double lambda, double p);

  double lambda() const { return lambda_; }
  double p() const { return p_; }
  /// 1 - p, carried separately so that it keeps full relative accuracy.
  double survival() const { return survival_; }
  /// (1 - p) / lambda
  double mean() const { return survival_ / lambda_; }

 private:
  ExponentialTypeLaw(double lambda, double p, double survival)
      : lambda_(lambda), p_(p), survival_(survival) {}
  friend ExponentialTypeLaw exp_step(const ExponentialTypeLaw&, const ExpVariantConfig&);

  double lambda_;
  double p_;
  double survival_;
};

struct ExpVariantConfig {
  double m;
  double alpha;
  std::size_t max_steps = 10'000'000;

  /// Throws ArgumentError unless m > 1 and alpha > 0; alpha defaults to log m.
  explicit ExpVariantConfig(double m, std::optional<double> alpha = std::nullopt);
};

ExponentialTypeLaw exp_step(const ExponentialTypeLaw& law, const ExpVariantConfig& config);

/// Laws 0..steps. Throws ResourceLimitError if steps exceeds config.max_steps.
std::vector<ExponentialTypeLaw> exp_iterate(const ExponentialTypeLaw& law0,
                                            const ExpVariantConfig& config, std::size_t steps);

}  // namespace drlab
