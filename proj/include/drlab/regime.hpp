#pragma once

// Regime classification, limit constants and the critical manifold.
//
// Every trajectory has a limit (r_*, p_*) in one of three regimes:
//
//   supercritical  r_* = 0,                    p_* = 0,  F_inf > 0
//   subcritical    1 - 1/m < r_* < 1,          p_* = 1,  F_inf = 0
//   critical       r_* = 1 - 1/m,              p_* = 1
//
// Limits strictly between 0 and 1 - 1/m are impossible, and r_n decreases,
// so a single iterate below 1 - 1/m settles the supercritical case.

#include "drlab/glaw.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace drlab {

enum class Regime { Supercritical, Subcritical, NearCriticalUndetermined };

std::string to_string(Regime regime);

/// Short code used in grid output: "S", "U" or "C?".
std::string regime_code(Regime regime);

template <class Real>
struct FreeEnergy {
  Real value;           // F_inf = r_0^-1 (1 - p_0) prod_{i>=1} (1 - r_i)
  Real log;             // log F_inf
  Real first_form_log;  // log of r_0^-1 prod_{i>=0} (1 - (m - 1) p_i / m)
  Real relative_gap;    // |F_second / F_first - 1|
  Real tail_bound;      // bound on the omitted part of the log-sum
  std::size_t terms = 0;
};

template <class Real>
struct ConstantQ {
  Real value;       // partial sum of p_i
  Real tail_bound;  // bound on the omitted sum
  std::size_t terms = 0;
};

template <class Real>
struct ConstantK {
  Real value;
  Real log;
  std::size_t terms = 0;
};

/// Accurate deviations r_i - r_* of a subcritical trajectory.
///
/// Differences of nearly equal r_i lose all their digits, so the deviations
/// are rebuilt as tail sums of the one-step gaps r_i - r_{i+1} =
/// r_{i+1} (m - 1)(1 - p_i), each of which is accurate to working precision,
/// closed off by a geometric remainder.
template <class Real>
struct SubcriticalTail {
  Real r_star;
  Real gamma_star;          // m (1 - r_*)
  std::vector<Real> excess; // excess[i] = r_i - r_*, for i < excess.size()
  std::size_t converged_at = 0;
};

template <class Real>
struct ConvergenceDiagnostics {
  Real final_r;
  Real final_log_one_minus_p;
  Real final_gap;  // r_n - r_{n+1} at the decision point
  double delta = 0;
  std::size_t budget = 0;
};

template <class Real>
struct RegimeReport {
  Regime regime = Regime::NearCriticalUndetermined;
  std::optional<Real> r_star, p_star, gamma_star;
  std::optional<FreeEnergy<Real>> free_energy;  // absent unless supercritical
  bool free_energy_zero = false;                // set for subcritical reports
  std::optional<ConstantK<Real>> K;
  std::optional<ConstantQ<Real>> Q;
  std::size_t iterations_used = 0;
  ConvergenceDiagnostics<Real> diagnostics;
};

struct ClassifyOptions {
  std::size_t budget = 100'000;
  double delta = 1e-9;
  bool with_constants = true;
};

/// Classifies by the band rule: supercritical once r_n <= 1 - 1/m - delta;
/// subcritical once r_n > 1 - 1/m + delta with r_n - r_{n+1} < 1e-15 r_n and
/// 1 - p_n < 1e-12; otherwise undetermined when the budget runs out.
template <class Real>
RegimeReport<Real> classify(const GeometricTypeLaw<Real>& law0, const ModelConfig<Real>& config,
                            const ClassifyOptions& options = {});

/// Throws RegimeMismatchError unless the trajectory is supercritical.
template <class Real>
FreeEnergy<Real> free_energy(const Trajectory<Real>& traj);

template <class Real>
ConstantQ<Real> constant_Q(const Trajectory<Real>& traj);

/// Extends a copy of the trajectory until the gaps fall below working
/// precision. Throws RegimeMismatchError unless it converges above 1 - 1/m.
template <class Real>
SubcriticalTail<Real> subcritical_tail(const Trajectory<Real>& traj);

/// As above, keeping excess[i] accurate to working precision for every
/// i <= min_length.
template <class Real>
SubcriticalTail<Real> subcritical_tail(const Trajectory<Real>& traj, std::size_t min_length);

/// K = ((r_0 - r_1)/(r_0 r_1)) prod_{i>=1} (1 - r_i)/(1 - r_*).
template <class Real>
ConstantK<Real> constant_K(const Trajectory<Real>& traj, const SubcriticalTail<Real>& tail);

template <class Real>
ConstantK<Real> constant_K(const Trajectory<Real>& traj);

// Critical manifold ----------------------------------------------------------

enum class Side { Supercritical, Subcritical, Undetermined };

/// Power series D = phi(y) of the critical manifold in the coordinates
/// y = 1/r - m/(m - 1), D = 1/r_{n+1} - 1/r_n. Points with D above the
/// manifold escape to the supercritical regime, points below converge to a
/// subcritical limit.
template <class Real>
class CenterManifold {
 public:
  CenterManifold(const Real& m, std::size_t order = 24);

  Real operator()(const Real& y) const;

  /// Magnitude of the first omitted term at y.
  Real truncation(const Real& y) const;

  const std::vector<Real>& coefficients() const { return a_; }  // a_[j] multiplies y^j

 private:
  std::vector<Real> a_;
};

struct SideResult {
  Side side = Side::Undetermined;
  std::size_t iterations = 0;
};

/// Decides which side of the critical manifold a starting law lies on.
///
/// A supercritical verdict is an iterate below 1 - 1/m. A subcritical
/// verdict is either a contraction certificate (the remaining increments of
/// 1/r, bounded geometrically, cannot push r below some level above
/// 1 - 1/m) or, close to the critical point, the sign of D - phi(y) when it
/// exceeds the series truncation and rounding error by a safety factor.
template <class Real>
SideResult classify_side(const GeometricTypeLaw<Real>& law0, const ModelConfig<Real>& config,
                         const CenterManifold<Real>& manifold, std::size_t budget);

template <class Real>
struct CriticalLocateResult {
  Real r0;
  Real p0_critical;
  Real bracket_lo, bracket_hi;
  Real bracket_width;
  std::size_t monotonicity_violations = 0;
  std::size_t probes = 0;
  std::size_t iterations = 0;
  bool flagged() const { return monotonicity_violations > 0; }
};

struct LocateOptions {
  std::size_t probe_budget = 1'000'000;
  std::size_t manifold_order = 24;
};

/// Bisects p0 in (0, 1) for fixed r0 > 1 - 1/m.
///
/// Throws ArgumentError for r0 <= 1 - 1/m, PrecisionError when tol is finer
/// than 10^(2 - digits) or a probe stays undecided, and BracketError when
/// both ends of (0, 1) fall on the same side.
template <class Real>
CriticalLocateResult<Real> critical_locate(const Real& r0, const Real& tol,
                                           const ModelConfig<Real>& config,
                                           const LocateOptions& options = {});

// Phase scan -------------------------------------------------------------------

/// `count` cell centres lo + (i + 1/2)(hi - lo)/count.
struct GridRange {
  double lo = 0, hi = 1;
  std::size_t count = 100;
  double at(std::size_t i) const { return lo + (static_cast<double>(i) + 0.5) * (hi - lo) / count; }
};

template <class Real>
struct PhaseCell {
  double r0 = 0, p0 = 0;
  RegimeReport<Real> report;
};

struct ScanOptions {
  ClassifyOptions classify;
  std::size_t max_cells = 1'000'000;
  unsigned threads = 0;  // 0: hardware concurrency; ignored in extended mode
};

/// Row-major grid, r0 outer and p0 inner, identical for any thread count.
template <class Real>
std::vector<PhaseCell<Real>> phase_scan(const GridRange& r0_grid, const GridRange& p0_grid,
                                        const ModelConfig<Real>& config,
                                        const ScanOptions& options = {});

}  // namespace drlab
