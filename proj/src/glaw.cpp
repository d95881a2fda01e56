#include "drlab/glaw.hpp"

#include "drlab/errors.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <string>

namespace drlab {

namespace {

template <class Real>
Real abs_max(const Real& a, const Real& b) {
  using std::abs;
  Real x = abs(a), y = abs(b);
  return x < y ? y : x;
}

template <class Real>
Real relative(const Real& residual, const Real& scale) {
  if (scale == 0) return Real(0);
  return residual / scale;
}

// p / r, formed from the logs when r is no longer a normal number.
template <class Real>
Real p_over_r(const GeometricTypeLaw<Real>& law) {
  using std::exp;
  using std::log;
  if constexpr (std::is_same_v<Real, double>) {
    if (law.r() < 1e-290 || law.p() < 1e-290) return exp(log(law.p()) - law.log_r());
  }
  return law.p() / law.r();
}

}  // namespace

template <class Real>
GeometricTypeLaw<Real>::GeometricTypeLaw(Real r, Real p) {
  using std::log;
  using std::log1p;
  if (!(r > 0 && r < 1)) throw ArgumentError("r must lie in (0, 1), got " + format_real(r));
  if (!(p > 0 && p < 1)) throw ArgumentError("p must lie in (0, 1), got " + format_real(p));
  r_ = r;
  p_ = p;
  log_r_ = log(r_);
  log_one_minus_p_ = log1p(-p_);
}

template <class Real>
GeometricTypeLaw<Real> GeometricTypeLaw<Real>::from_recursion(Real r, Real p, Real log_r,
                                                              Real log_one_minus_p) {
  assert(log_r < 0);
  assert(log_one_minus_p <= 0);
  GeometricTypeLaw law;
  law.r_ = std::move(r);
  law.p_ = std::move(p);
  law.log_r_ = std::move(log_r);
  law.log_one_minus_p_ = std::move(log_one_minus_p);
  return law;
}

template <class Real>
Real GeometricTypeLaw<Real>::pmf(std::int64_t k) const {
  if (k < 0) return Real(0);
  if (k == 0) return p_;
  return survival(*this) * conditional_pmf(*this, k);
}

template <class Real>
ModelConfig<Real>::ModelConfig(Real m_, Precision precision_, double identity_tol_)
    : m(std::move(m_)), precision(precision_), identity_tol(identity_tol_) {
  if (!(m > 1)) throw ArgumentError("offspring mean m must exceed 1, got " + format_real(m));
  if (!(identity_tol > 0)) throw ArgumentError("identity tolerance must be positive");
  constexpr bool is_double = std::is_same_v<Real, double>;
  if (is_double != (precision.mode == PrecisionMode::Standard))
    throw ArgumentError("precision mode does not match the scalar type");
}

template <class Real>
Real ModelConfig<Real>::offspring_pmf(std::int64_t k) const {
  using std::pow;
  if (k < 1) return Real(0);
  Real one_over_m = Real(1) / m;
  return one_over_m * pow(Real(1) - one_over_m, static_cast<long>(k - 1));
}

template <class Real>
StepRecord<Real> initial_record(const GeometricTypeLaw<Real>& law, const ModelConfig<Real>& config) {
  using std::log;
  using std::log1p;
  StepRecord<Real> rec{0, law, std::nullopt, Real(0), Real(0)};
  const Real& m = config.m;
  if (law.p() < Real(0.5)) {
    rec.a = m - (m - 1) * law.p();
    rec.log_a = log(rec.a);
  } else {
    Real t = (m - 1) * survival(law);
    rec.a = 1 + t;
    rec.log_a = log1p(t);
  }
  return rec;
}

template <class Real>
StepRecord<Real> next_record(const StepRecord<Real>& cur, const ModelConfig<Real>& config) {
  using std::exp;
  using std::log;
  using std::log1p;
  const auto& law = cur.law;
  const Real& m = config.m;

  Real log_r1 = law.log_r() - cur.log_a;
  Real r1 = law.r() / cur.a;
  if constexpr (std::is_same_v<Real, double>) {
    if (r1 < 1e-290) r1 = exp(log_r1);
  }
  Real q = law.p() / cur.a;
  Real log_one_minus_q = q < Real(0.5) ? Real(log1p(-q))
                                       : Real(log(m) + law.log_one_minus_p() - cur.log_a);
  Real log_one_minus_p1 = log1p(-r1) + log_one_minus_q;
  Real p1 = r1 + q * (1 - r1);

  StepRecord<Real> next = initial_record(
      GeometricTypeLaw<Real>::from_recursion(std::move(r1), std::move(p1), std::move(log_r1),
                                             std::move(log_one_minus_p1)),
      config);
  next.n = cur.n + 1;
  next.q_next = std::move(q);
  assert(next.a >= 1 && next.a <= m);
  return next;
}

template <class Real>
GeometricTypeLaw<Real> step(const GeometricTypeLaw<Real>& law, const ModelConfig<Real>& config) {
  return next_record(initial_record(law, config), config).law;
}

template <class Real>
Trajectory<Real>::Trajectory(ModelConfig<Real> config, GeometricTypeLaw<Real> law0)
    : config_(std::move(config)) {
  records_.push_back(initial_record(law0, config_));
}

template <class Real>
void Trajectory<Real>::extend(std::size_t count) {
  if (count > config_.max_steps || steps() > config_.max_steps - count)
    throw ResourceLimitError("trajectory length would exceed the step budget of " +
                             std::to_string(config_.max_steps));
  records_.reserve(records_.size() + count);
  for (std::size_t i = 0; i < count; ++i) records_.push_back(next_record(records_.back(), config_));
}

template <class Real>
Trajectory<Real> iterate(const GeometricTypeLaw<Real>& law0, const ModelConfig<Real>& config,
                         std::size_t steps) {
  if (steps > config.max_steps)
    throw ResourceLimitError("requested " + std::to_string(steps) + " steps, budget is " +
                             std::to_string(config.max_steps));
  Trajectory<Real> traj(config, law0);
  traj.extend(steps);
  return traj;
}

template <class Real>
StepRecord<Real> advance(StepRecord<Real> record, const ModelConfig<Real>& config,
                         std::size_t steps) {
  if (steps > config.max_steps)
    throw ResourceLimitError("requested " + std::to_string(steps) + " steps, budget is " +
                             std::to_string(config.max_steps));
  for (std::size_t i = 0; i < steps; ++i) record = next_record(record, config);
  return record;
}

template <class Real>
Real survival(const GeometricTypeLaw<Real>& law) {
  using std::exp;
  if (law.p() < Real(0.5)) return 1 - law.p();
  return exp(law.log_one_minus_p());
}

template <class Real>
Real log_survival(const GeometricTypeLaw<Real>& law) {
  return law.log_one_minus_p();
}

template <class Real>
Real mean(const GeometricTypeLaw<Real>& law) {
  using std::exp;
  if constexpr (std::is_same_v<Real, double>) {
    if (law.r() < 1e-290) return exp(log_mean(law));
  }
  return survival(law) / law.r();
}

template <class Real>
Real log_mean(const GeometricTypeLaw<Real>& law) {
  return law.log_one_minus_p() - law.log_r();
}

template <class Real>
Real pgf(const GeometricTypeLaw<Real>& law, const Real& s) {
  using std::abs;
  Real radius = 1 / (1 - law.r());
  if (!(abs(s) < radius))
    throw DomainError("pgf argument " + format_real(s) + " outside radius of convergence " +
                          format_real(radius),
                      to_double(radius));
  if (s == 0) return law.p();
  // E(s^Y) - 1 = (1 - p)(s - 1) / (1 - (1 - r) s)
  Real denom = (1 - s) + law.r() * s;
  return 1 + survival(law) * (s - 1) / denom;
}

template <class Real>
Real laplace_transform(const GeometricTypeLaw<Real>& law, const Real& t) {
  using std::expm1;
  if (t < 0) throw ArgumentError("Laplace transform needs t >= 0");
  if (t == 0) return Real(1);
  Real e = expm1(t);
  return 1 - survival(law) * e / (e + law.r());
}

template <class Real>
Real conditional_pmf(const GeometricTypeLaw<Real>& law, std::int64_t k) {
  using std::exp;
  using std::log1p;
  if (k < 1) return Real(0);
  return law.r() * exp(static_cast<Real>(k - 1) * log1p(-law.r()));
}

template <class Real>
std::vector<IdentityRow<Real>> identity_residuals(const Trajectory<Real>& traj) {
  using std::exp;
  using std::log;
  using std::log1p;
  if (traj.size() < 3)
    throw ArgumentError("identity residuals need a trajectory with at least 3 records");
  const Real& m = traj.config().m;
  const auto& recs = traj.records();
  const std::size_t size = recs.size();
  const Real log_m = log(m);

  auto inv_r = [&](std::size_t k) { return exp(-recs[k].law.log_r()); };

  std::vector<IdentityRow<Real>> rows;
  rows.reserve(size);
  const Real log_mean0 = log_mean(recs[0].law);
  Real log_prod = 0;
  for (std::size_t n = 0; n < size; ++n) {
    IdentityRow<Real> row;
    row.n = n;
    if (n > 0) log_prod += log1p(-recs[n].law.r());

    Real lhs = exp(log_mean(recs[n].law) - static_cast<Real>(n) * log_m);
    Real rhs = exp(log_mean0 + log_prod);
    row.r1 = lhs - rhs;
    row.r1_rel = relative(row.r1, abs_max(lhs, rhs));

    if (n + 2 < size) {
      Real i0 = inv_r(n), i1 = inv_r(n + 1), i2 = inv_r(n + 2);
      Real c = m * (1 - recs[n + 1].law.r());
      Real res = (i2 - i1) - c * (i1 - i0);
      Real scale = abs_max(abs_max(i2, i1), abs_max(Real(c * i1), Real(c * i0)));
      row.r2_rel = relative(res, scale);
      row.r2 = std::move(res);
    }

    if (n + 1 < size) {
      Real b = p_over_r(recs[n].law);
      Real a = p_over_r(recs[n + 1].law);
      // 1 - q_{n+1} = m (1 - p_n) / A_n
      Real one_minus_q = m * survival(recs[n].law) / recs[n].a;
      Real res = (a - b) - one_minus_q;
      row.r3_corrected_rel = relative(res, abs_max(abs_max(a, b), one_minus_q));
      row.r3_corrected = std::move(res);
      row.r3_paper = (a - b) - m * survival(recs[n].law);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

#define DRLAB_INSTANTIATE_GLAW(Real)                                                             \
  template class GeometricTypeLaw<Real>;                                                         \
  template struct ModelConfig<Real>;                                                             \
  template class Trajectory<Real>;                                                               \
  template GeometricTypeLaw<Real> step(const GeometricTypeLaw<Real>&, const ModelConfig<Real>&); \
  template StepRecord<Real> next_record(const StepRecord<Real>&, const ModelConfig<Real>&);      \
  template StepRecord<Real> initial_record(const GeometricTypeLaw<Real>&,                        \
                                           const ModelConfig<Real>&);                            \
  template StepRecord<Real> advance(StepRecord<Real>, const ModelConfig<Real>&, std::size_t);    \
  template Trajectory<Real> iterate(const GeometricTypeLaw<Real>&, const ModelConfig<Real>&,     \
                                    std::size_t);                                                \
  template Real mean(const GeometricTypeLaw<Real>&);                                             \
  template Real log_mean(const GeometricTypeLaw<Real>&);                                         \
  template Real survival(const GeometricTypeLaw<Real>&);                                         \
  template Real log_survival(const GeometricTypeLaw<Real>&);                                     \
  template Real pgf(const GeometricTypeLaw<Real>&, const Real&);                                 \
  template Real laplace_transform(const GeometricTypeLaw<Real>&, const Real&);                   \
  template Real conditional_pmf(const GeometricTypeLaw<Real>&, std::int64_t);                    \
  template std::vector<IdentityRow<Real>> identity_residuals(const Trajectory<Real>&);

DRLAB_INSTANTIATE_GLAW(double)
DRLAB_INSTANTIATE_GLAW(Extended)

}  // namespace drlab
