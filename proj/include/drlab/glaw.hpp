#pragma once

// Geometric-type marginal laws G(r, p) and their exact parameter recursion.
//
// G(r, p) puts mass p at 0 and (1 - p) r (1 - r)^(k-1) at k >= 1. Under the
// max-type recursion Y' = (Y_1 + ... + Y_eta - 1)_+ with geometric offspring
// of mean m, the class is closed and the parameters evolve as
//
//   r' = r / A,   A = m - (m - 1) p,
//   p' = 1 - (1 - r') (1 - q'),   q' = r' p / r = p / A.
//
// Every law carries log r and log(1 - p) alongside r and p. The logs are
// advanced by their own recurrences,
//
//   log r'       = log r - log A,
//   log(1 - p')  = log(1 - r') + log(1 - q'),
//
// and are the source of truth once r or 1 - p leave the range of `double`.

#include "drlab/real.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

namespace drlab {

template <class Real>
class GeometricTypeLaw {
 public:
  /// Throws ArgumentError unless 0 < r < 1 and 0 < p < 1.
  GeometricTypeLaw(Real r, Real p);

  /// Builds a law from values already advanced by the recursion. The logs
  /// are trusted; r and p may have underflowed in standard precision.
  static GeometricTypeLaw from_recursion(Real r, Real p, Real log_r, Real log_one_minus_p);

  const Real& r() const { return r_; }
  const Real& p() const { return p_; }
  const Real& log_r() const { return log_r_; }
  const Real& log_one_minus_p() const { return log_one_minus_p_; }

  /// P(Y = k).
  Real pmf(std::int64_t k) const;

 private:
  GeometricTypeLaw() = default;
  Real r_, p_, log_r_, log_one_minus_p_;
};

template <class Real>
struct ModelConfig {
  Real m;
  Precision precision;
  double identity_tol = 1e-12;
  std::size_t max_steps = 10'000'000;

  /// Throws ArgumentError unless m > 1.
  explicit ModelConfig(Real m_, Precision precision_ = Precision::standard(),
                       double identity_tol_ = 1e-12);

  /// P(eta = k) = (1/m)(1 - 1/m)^(k-1), k >= 1.
  Real offspring_pmf(std::int64_t k) const;
};

template <class Real>
struct StepRecord {
  std::size_t n = 0;
  GeometricTypeLaw<Real> law;
  std::optional<Real> q_next;  // q_n = r_n p_{n-1} / r_{n-1}; absent at n = 0
  Real a;                      // A_n = m - (m - 1) p_n = r_n / r_{n+1}
  Real log_a;
};

template <class Real>
class Trajectory {
 public:
  Trajectory(ModelConfig<Real> config, GeometricTypeLaw<Real> law0);

  const ModelConfig<Real>& config() const { return config_; }
  const std::vector<StepRecord<Real>>& records() const { return records_; }
  const StepRecord<Real>& operator[](std::size_t n) const { return records_[n]; }
  const StepRecord<Real>& back() const { return records_.back(); }
  std::size_t size() const { return records_.size(); }
  std::size_t steps() const { return records_.size() - 1; }

  /// Appends `count` further steps of the recursion.
  void extend(std::size_t count);

 private:
  ModelConfig<Real> config_;
  std::vector<StepRecord<Real>> records_;
};

/// One step of the parameter recursion.
template <class Real>
GeometricTypeLaw<Real> step(const GeometricTypeLaw<Real>& law, const ModelConfig<Real>& config);

/// Record n + 1 from record n.
template <class Real>
StepRecord<Real> next_record(const StepRecord<Real>& record, const ModelConfig<Real>& config);

template <class Real>
StepRecord<Real> initial_record(const GeometricTypeLaw<Real>& law, const ModelConfig<Real>& config);

/// Record n + steps from record n, keeping only the current record.
/// Throws ResourceLimitError if `steps` exceeds `config.max_steps`.
template <class Real>
StepRecord<Real> advance(StepRecord<Real> record, const ModelConfig<Real>& config,
                         std::size_t steps);

/// Throws ResourceLimitError if `steps` exceeds `config.max_steps`.
template <class Real>
Trajectory<Real> iterate(const GeometricTypeLaw<Real>& law0, const ModelConfig<Real>& config,
                         std::size_t steps);

/// E(Y) = (1 - p) / r.
template <class Real>
Real mean(const GeometricTypeLaw<Real>& law);

/// log E(Y), finite even when r has underflowed.
template <class Real>
Real log_mean(const GeometricTypeLaw<Real>& law);

/// P(Y >= 1) = 1 - p, taken from the log companion when p is near 1.
template <class Real>
Real survival(const GeometricTypeLaw<Real>& law);

template <class Real>
Real log_survival(const GeometricTypeLaw<Real>& law);

/// E(s^Y) for |s| < 1 / (1 - r); throws DomainError outside.
template <class Real>
Real pgf(const GeometricTypeLaw<Real>& law, const Real& s);

/// E(exp(-t Y)) for t >= 0, free of the cancellation in pgf(exp(-t)) for small t.
template <class Real>
Real laplace_transform(const GeometricTypeLaw<Real>& law, const Real& t);

/// P(Y = k | Y >= 1) = r (1 - r)^(k-1).
template <class Real>
Real conditional_pmf(const GeometricTypeLaw<Real>& law, std::int64_t k);

/// Residuals of the algebraic identities satisfied along a trajectory.
///
/// Each residual is reported raw and divided by the largest magnitude among
/// the terms it is built from.
///
///   R1: m^-n E(Y_n) - (1 - p_0)/r_0 * prod_{i=1..n} (1 - r_i)
///   R2: (1/r_{n+2} - 1/r_{n+1}) - m (1 - r_{n+1}) (1/r_{n+1} - 1/r_n)
///   R3_corrected: (p_{n+1}/r_{n+1} - p_n/r_n) - (1 - q_{n+1})
///   R3_paper:     (p_{n+1}/r_{n+1} - p_n/r_n) - m (1 - p_n), raw only
template <class Real>
struct IdentityRow {
  std::size_t n = 0;
  Real r1, r1_rel;
  std::optional<Real> r2, r2_rel;
  std::optional<Real> r3_corrected, r3_corrected_rel;
  std::optional<Real> r3_paper;
};

/// Throws ArgumentError for trajectories with fewer than 3 records.
template <class Real>
std::vector<IdentityRow<Real>> identity_residuals(const Trajectory<Real>& traj);

}  // namespace drlab
