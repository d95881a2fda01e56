#pragma once

// Ground-truth engines that never use the parameter recursion:
//
//   * exact propagation of a truncated pmf through one generation of the
//     max-type process, Y' = (Y_1 + ... + Y_eta - 1)_+ with eta geometric on
//     {1, 2, ...} of mean m;
//   * a seeded Monte Carlo sampler of the depth-n tree of the raw process.
//
// Both work in double precision.

#include "drlab/glaw.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

namespace drlab {

/// Finite pmf on {0, ..., N} plus a bound on the probability it omits.
struct TruncatedPmf {
  std::vector<double> masses;
  double tail_bound = 0;

  std::size_t support_size() const { return masses.size(); }
  double mass(std::size_t k) const { return k < masses.size() ? masses[k] : 0.0; }
  /// Compensated sum of the stored masses.
  double total() const;
  /// Throws ArgumentError unless masses are nonnegative and
  /// total() + tail_bound lies within 1e-12 of 1.
  void validate() const;

  static TruncatedPmf unit_mass(std::size_t k);
};

/// pmf of G(r, p) on {0, ..., N} with N minimal such that the omitted mass
/// (1 - p)(1 - r)^N is below tol / 10.
TruncatedPmf geometric_type_pmf(const GeometricTypeLaw<double>& law, double tol);

/// Conditional pmf given value >= 1, re-indexed so that entry k - 1 holds
/// P(Y = k | Y >= 1). Throws ArgumentError when no mass sits above 0.
TruncatedPmf conditional_given_positive(const TruncatedPmf& pmf);

struct PropagateOptions {
  std::size_t max_support = 1'000'000;
};

/// Law of (Y_1 + ... + Y_eta - 1)_+ for Y_k i.i.d. with law `pmf`.
///
/// The compound sum is evaluated as sum_j P(eta = j) pmf^{*j} by Horner's
/// scheme with direct convolutions, keeping j <= J where (1 - 1/m)^J < tol/4.
/// Each convolution is trimmed from the top by at most tol/(20 J) and the
/// shifted result by at most tol/10, so the mass dropped by this step is
/// below tol. The output tail bound also carries the input's omitted mass.
/// Throws ArgumentError for tol < 1e-14 or m <= 1, and ResourceLimitError
/// when a convolution needs more than `max_support` entries.
TruncatedPmf propagate_pmf(const TruncatedPmf& pmf, double m, double tol,
                           const PropagateOptions& options = {});

/// Upper bound on the total variation distance between the laws the two
/// truncated pmfs stand for: half the L1 distance over the union support
/// plus half of each tail bound, capped at 1.
double tv_distance(const TruncatedPmf& a, const TruncatedPmf& b);

// Monte Carlo -------------------------------------------------------------------

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter block(Counter counter, Key key);
};

/// Uniform double in (0, 1] from stream `stream`, position `index`, under a
/// 64-bit key. The 53 high bits of the first output pair are used.
double philox_uniform(std::uint64_t key, std::uint64_t stream, std::uint64_t index);

struct McConfig {
  std::uint64_t seed = 0;
  std::size_t samples = 1;
  std::size_t n = 0;
  double node_budget = 1e8;
  unsigned threads = 1;  // 0 selects the hardware concurrency
};

struct McSummary {
  std::size_t samples = 0;
  std::size_t n = 0;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> counts;  // (value, count), ascending
  double mean = 0;
  double mean_se = 0;  // sample standard deviation / sqrt(samples)
  double survival_frequency = 0;
  double survival_se = 0;  // sqrt(f (1 - f) / samples)
  std::vector<double> conditional_pmf;  // entry k - 1 holds P(Y = k | Y >= 1)
  std::uint64_t survivors = 0;
  std::uint64_t nodes = 0;  // tree nodes evaluated
};

/// Samples Y_n by evaluating `cfg.samples` independent depth-n trees. Leaves
/// draw from `law0`, internal nodes draw eta geometric(1/m) by inversion.
/// Sample i uses Philox stream i under key `cfg.seed`, so the summary does
/// not depend on the thread count. Throws ArgumentError for invalid
/// settings, and ResourceLimitError before any sampling when
/// samples * m^n exceeds the node budget or a value overflows 64 bits.
McSummary mc_sample(const GeometricTypeLaw<double>& law0, double m, const McConfig& cfg);

struct ChiSquareResult {
  double statistic = 0;
  std::size_t dof = 0;
  double p_value = 1;
  double critical_value = 0;  // quantile at the requested level
  bool rejected = false;
  // Pooled bins: [first, last] value range (last = 0 means open-ended),
  // observed and expected counts.
  struct Bin {
    std::uint64_t first;
    std::uint64_t last;
    double observed;
    double expected;
  };
  std::vector<Bin> bins;
};

/// Pearson chi-square test of the conditional law given Y >= 1 against
/// geometric(r) on {1, 2, ...}. Adjacent bins are pooled until each has an
/// expected count of at least 5; the last bin is open-ended. Throws
/// ArgumentError when fewer than two bins remain.
ChiSquareResult chi_square_geometric(const McSummary& summary, double r, double level = 0.999);

}  // namespace drlab
