#pragma once

// Asymptotic expansions of (r_n, p_n) in the three regimes, the derived
// corollary quantities, and empirical coefficient estimators.
//
// Every expansion is returned as a base value plus a list of retained
// correction terms, ordered from leading to last. Comparisons against an
// exact trajectory are made on the deviation from the base, so no digits are
// lost to cancellation, and residuals are normalized by the last retained
// term: a correct expansion drives that ratio to zero.
//
// Where the printed formulas disagree with direct evaluation of the
// recursion, both versions are available through `Variant`.

#include "drlab/glaw.hpp"
#include "drlab/regime.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace drlab {

enum class Variant {
  Printed,    // formulas as printed
  Corrected,  // leading coefficients and signs supported by exact trajectories
};

std::string to_string(Variant variant);

template <class Real>
struct SupercriticalConstants {
  Real m;
  Real F;           // F_inf
  Real Q;           // sum_{i>=0} p_i
  Real p0_over_r0;
  std::optional<Real> q_sum;  // sum_{i>=1} q_i, needed by the corrected p_n expansion
};

template <class Real>
struct SubcriticalConstants {
  Real m;
  Real r_star;
  Real K;
  Real gamma() const { return m * (1 - r_star); }
};

template <class Real>
struct CriticalConstants {
  Real m;
};

template <class Real>
using RegimeConstants =
    std::variant<SupercriticalConstants<Real>, SubcriticalConstants<Real>, CriticalConstants<Real>>;

/// r_pred = r_base + exp(log_scale) * sum(r_terms), likewise for p.
template <class Real>
struct Expansion {
  Real r_base;
  std::vector<Real> r_terms;
  Real p_base;
  std::vector<Real> p_terms;
  Real log_scale = 0;

  Real r_pred() const;
  Real p_pred() const;
  /// 1 - p_pred without cancellation when p_base = 1.
  Real one_minus_p_pred() const;
};

/// Supercritical: terms are in units of 1/(F_inf m^n).
///   printed   r: 1 - m n/(F m^n)          p: m n + (p0/r0 - m Q) - m^2 n^2/(F m^n)
///   corrected r: 1 - n/(F m^n)            p: n + (p0/r0 - sum q) - n^2/(F m^n)
/// The corrected variant throws ArgumentError when q_sum is absent.
template <class Real>
Expansion<Real> expand_supercritical(std::size_t n, const SupercriticalConstants<Real>& c,
                                     Variant variant = Variant::Printed);

/// Subcritical two-term expansions with gamma = m(1 - r_*).
template <class Real>
Expansion<Real> expand_subcritical(std::size_t n, const SubcriticalConstants<Real>& c);

/// Critical expansions with natural log; the corrected variant flips the
/// sign of the log n / n^3 term of p_n. Throws ArgumentError for n <= 1.
template <class Real>
Expansion<Real> expand_critical(std::size_t n, const Real& m, Variant variant = Variant::Printed);

template <class Real>
struct CorollaryValues {
  Real survival_pred;                  // P(Y_n >= 1)
  Real mean_pred;                      // E(Y_n)
  std::optional<Real> pgf_pred;        // E(s^{Y_n}) when s was given
  std::optional<Real> pgf_at_m_pred;   // E(m^{Y_n}), critical only
};

/// Sustainability probability, first moment and generating function
/// expansions for the regime of `constants`. The pgf radius is 1
/// (supercritical), 1/(1 - r_*) (subcritical) or m (critical); outside it a
/// DomainError is thrown. Critical values need n >= 2.
template <class Real>
CorollaryValues<Real> corollary_values(std::size_t n, const RegimeConstants<Real>& constants,
                                       const std::optional<Real>& s = std::nullopt,
                                       Variant variant = Variant::Printed);

template <class Real>
struct ExpansionValue {
  std::size_t n = 0;
  Real predicted;            // sum of retained terms
  Real exact;                // exact deviation, same units
  Real abs_residual;
  Real normalized_residual;  // (exact - predicted) / |last retained term|
};

template <class Real>
ExpansionValue<Real> compare(std::size_t n, const Real& exact_deviation,
                             const std::vector<Real>& terms);

/// Constants measured on `traj` for the given regime: F_inf, Q, p0/r0 and
/// sum q_i (supercritical), r_* and K (subcritical), m alone otherwise.
/// Throws RegimeMismatchError when the trajectory contradicts the regime.
template <class Real>
RegimeConstants<Real> constants_from_trajectory(const Trajectory<Real>& traj, Regime regime);

template <class Real>
struct ExpansionRow {
  std::size_t n = 0;
  Real r;
  Real p;
  ExpansionValue<Real> r_cmp;
  ExpansionValue<Real> p_cmp;
};

struct EstimateOptions {
  std::size_t n_min = 1;
  std::size_t stride = 1;
};

// Coefficient estimators -------------------------------------------------------

enum class EstimatorTarget {
  CriticalNv,          // n v_n -> 2/m
  CriticalDifference,     // n^3 (v_n - v_{n+1} - (m/2) v_n v_{n+1}) -> 4(m+1)/(3m(m-1))
  SubcriticalRatio,    // (r_n - r_*)/gamma^n -> K r_*^2/(1 - gamma)
  SupercriticalPCoef,  // p_n/(n r_n) -> leading p-coefficient
  CriticalPgfAtM,      // (E(m^{Y_n}) - 1)(m - 1) n -> 1
};

std::string to_string(EstimatorTarget target);

/// Minimum trajectory length (steps) accepted for each target.
std::size_t min_length(EstimatorTarget target);

template <class Real>
struct CoefficientEstimate {
  EstimatorTarget target{};
  std::vector<std::size_t> ns;
  std::vector<Real> values;
  std::optional<Real> aitken;      // iterated Aitken delta-squared on the samples
  std::optional<Real> richardson;  // 2 f(N) - f(N/2), exact for errors ~ 1/n
  Real extrapolated;               // richardson if available, otherwise the last value
  Real rate;                       // |f(N) - f(N/2)| / |f(N/2) - f(N/4)|
};

/// Finite-n estimator sequence over the records of `traj`. Throws
/// InsufficientLengthError when the trajectory is shorter than
/// min_length(target), and RegimeMismatchError for SubcriticalRatio on a
/// non-subcritical run.
template <class Real>
CoefficientEstimate<Real> estimate_coefficients(const Trajectory<Real>& traj,
                                                EstimatorTarget target,
                                                const EstimateOptions& options = {});

/// Exact against predicted values at n = n_min, n_min + stride, ... up to
/// the end of `traj` (n >= 2 for critical runs). Deviations are measured
/// from the expansion base in the units of its terms: r and p times F m^n
/// (supercritical), r_n - r_* and p_n - 1 (subcritical), r_n - (1 - 1/m) and
/// p_n - 1 (critical).
template <class Real>
std::vector<ExpansionRow<Real>> expansion_table(const Trajectory<Real>& traj,
                                                const RegimeConstants<Real>& constants,
                                                Variant variant, const EstimateOptions& sampling);

/// Iterated Aitken delta-squared; skips steps whose denominator vanishes and
/// returns nullopt when fewer than three usable values remain.
template <class Real>
std::optional<Real> aitken_limit(const std::vector<Real>& seq, int passes = 3);

}  // namespace drlab
