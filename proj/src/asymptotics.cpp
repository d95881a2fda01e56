#include "drlab/asymptotics.hpp"

#include "drlab/errors.hpp"

#include <cmath>

namespace drlab {

std::string to_string(Variant variant) {
  return variant == Variant::Printed ? "printed" : "corrected";
}

std::string to_string(EstimatorTarget target) {
  switch (target) {
    case EstimatorTarget::CriticalNv: return "critical_nv";
    case EstimatorTarget::CriticalDifference: return "critical_difference";
    case EstimatorTarget::SubcriticalRatio: return "subcritical_ratio";
    case EstimatorTarget::SupercriticalPCoef: return "supercritical_p_coef";
    case EstimatorTarget::CriticalPgfAtM: return "critical_pgf_at_m";
  }
  return "unknown";
}

std::size_t min_length(EstimatorTarget target) {
  return target == EstimatorTarget::CriticalDifference ? 9 : 8;
}

namespace {

template <class Real>
Real sum(const std::vector<Real>& terms) {
  Real acc = 0;
  for (const auto& t : terms) acc += t;
  return acc;
}

template <class Real>
void check_pgf_radius(const Real& s, const Real& radius) {
  using std::abs;
  if (!(abs(s) < radius))
    throw DomainError("expansion argument " + format_real(s) + " outside radius " +
                          format_real(radius),
                      to_double(radius));
}

}  // namespace

template <class Real>
Real Expansion<Real>::r_pred() const {
  using std::exp;
  return r_base + exp(log_scale) * sum(r_terms);
}

template <class Real>
Real Expansion<Real>::p_pred() const {
  using std::exp;
  return p_base + exp(log_scale) * sum(p_terms);
}

template <class Real>
Real Expansion<Real>::one_minus_p_pred() const {
  using std::exp;
  return (1 - p_base) - exp(log_scale) * sum(p_terms);
}

template <class Real>
Expansion<Real> expand_supercritical(std::size_t n, const SupercriticalConstants<Real>& c,
                                     Variant variant) {
  using std::exp;
  using std::log;
  const Real nn = static_cast<Real>(n);
  const Real log_scale = -log(c.F) - nn * log(c.m);
  const Real unit = exp(log_scale);  // 1/(F m^n); may underflow harmlessly
  Expansion<Real> e;
  e.r_base = 0;
  e.p_base = 0;
  e.log_scale = log_scale;
  if (variant == Variant::Printed) {
    e.r_terms = {Real(1), -c.m * nn * unit};
    e.p_terms = {c.m * nn, c.p0_over_r0 - c.m * c.Q, -c.m * c.m * nn * nn * unit};
  } else {
    if (!c.q_sum) throw ArgumentError("corrected supercritical expansion needs sum q_i");
    e.r_terms = {Real(1), -nn * unit};
    e.p_terms = {nn, c.p0_over_r0 - *c.q_sum, -nn * nn * unit};
  }
  return e;
}

template <class Real>
Expansion<Real> expand_subcritical(std::size_t n, const SubcriticalConstants<Real>& c) {
  using std::pow;
  const Real& m = c.m;
  const Real& rs = c.r_star;
  const Real& K = c.K;
  const Real g = c.gamma();
  const Real gn = pow(g, static_cast<long>(n));
  const Real g2n = gn * gn;
  Expansion<Real> e;
  e.r_base = rs;
  e.r_terms = {K * rs * rs * gn / (1 - g),
               (1 + m * rs / (1 - g * g)) * K * K * rs * rs * rs * g2n / ((1 - g) * (1 - g))};
  e.p_base = 1;
  e.p_terms = {-K * rs * gn / (m - 1),
               -(1 + m * rs / (1 - g)) * K * K * rs * rs * g2n / ((m - 1) * (1 - g))};
  return e;
}

template <class Real>
Expansion<Real> expand_critical(std::size_t n, const Real& m, Variant variant) {
  using std::log;
  if (n <= 1) throw ArgumentError("critical expansions need n >= 2");
  const Real nn = static_cast<Real>(n);
  const Real L = log(nn);
  const Real sign = variant == Variant::Printed ? Real(-1) : Real(1);
  Expansion<Real> e;
  e.r_base = 1 - 1 / m;
  e.r_terms = {2 / (m * nn), -4 * (m + 1) * L / (3 * m * (m - 1) * nn * nn)};
  e.p_base = 1;
  const Real m1 = m - 1;
  e.p_terms = {-2 / (m1 * m1 * nn * nn), sign * 8 * (m + 1) * L / (3 * m1 * m1 * m1 * nn * nn * nn)};
  return e;
}

template <class Real>
CorollaryValues<Real> corollary_values(std::size_t n, const RegimeConstants<Real>& constants,
                                       const std::optional<Real>& s, Variant variant) {
  using std::exp;
  using std::log;
  using std::pow;
  CorollaryValues<Real> out;
  const Real nn = static_cast<Real>(n);

  if (const auto* c = std::get_if<SupercriticalConstants<Real>>(&constants)) {
    auto e = expand_supercritical(n, *c, variant);
    out.survival_pred = e.one_minus_p_pred();
    out.mean_pred = c->F * pow(c->m, static_cast<long>(n));
    if (s) {
      check_pgf_radius(*s, Real(1));
      out.pgf_pred = e.p_pred() + exp(e.log_scale) * (*s / (1 - *s));
    }
  } else if (const auto* c = std::get_if<SubcriticalConstants<Real>>(&constants)) {
    const Real& m = c->m;
    const Real& rs = c->r_star;
    const Real& K = c->K;
    const Real g = c->gamma();
    const Real gn = pow(g, static_cast<long>(n));
    const Real g2n = gn * gn;
    const Real sign = variant == Variant::Printed ? Real(-1) : Real(1);
    out.survival_pred = K * rs * gn / (m - 1) +
                        (1 + sign * m * rs / (1 - g)) * K * K * rs * rs * g2n / ((m - 1) * (1 - g));
    const Real r_factor = variant == Variant::Printed ? rs : rs * rs;
    out.mean_pred = K * gn / (m - 1) + m * K * K * r_factor * g2n / ((m - 1) * (1 - g) * (1 - g));
    if (s) {
      check_pgf_radius(*s, Real(1 / (1 - rs)));
      const Real denom = 1 - (1 - rs) * *s;
      const Real bracket = 1 + m * rs / (1 - g) - *s * rs / denom;
      out.pgf_pred = 1 + (*s - 1) / denom *
                             (K * rs * gn / (m - 1) +
                              K * K * rs * rs * g2n / ((m - 1) * (1 - g)) * bracket);
    }
  } else {
    if (n <= 1) throw ArgumentError("critical expansions need n >= 2");
    const Real& m = std::get<CriticalConstants<Real>>(constants).m;
    const Real m1 = m - 1;
    const Real L = log(nn);
    const Real sign = variant == Variant::Printed ? Real(1) : Real(-1);
    out.survival_pred = 2 / (m1 * m1 * nn * nn) + sign * 8 * (m + 1) * L / (3 * m1 * m1 * m1 * nn * nn * nn);
    out.mean_pred = 2 * m / (m1 * m1 * m1 * nn * nn) +
                    sign * 8 * m * (m + 1) * L / (3 * m1 * m1 * m1 * m1 * nn * nn * nn);
    if (s) {
      check_pgf_radius(*s, m);
      out.pgf_pred = 1 + (*s - 1) / (1 - *s / m) * out.survival_pred;
    }
    const Real log_term = variant == Variant::Printed
                              ? Real(2 * (m + 1) * L / (m1 * m1 * nn * nn))
                              : Real(-2 * (m + 1) * L / (3 * m1 * m1 * nn * nn));
    out.pgf_at_m_pred = 1 + 1 / (m1 * nn) + log_term;
  }
  return out;
}

template <class Real>
ExpansionValue<Real> compare(std::size_t n, const Real& exact_deviation,
                             const std::vector<Real>& terms) {
  using std::abs;
  ExpansionValue<Real> v;
  v.n = n;
  v.predicted = sum(terms);
  v.exact = exact_deviation;
  Real residual = exact_deviation - v.predicted;
  v.abs_residual = abs(residual);
  const Real last = terms.empty() ? Real(0) : Real(abs(terms.back()));
  v.normalized_residual = last == 0 ? Real(0) : Real(residual / last);
  return v;
}

template <class Real>
std::optional<Real> aitken_limit(const std::vector<Real>& seq, int passes) {
  using std::abs;
  std::vector<Real> cur = seq;
  for (int pass = 0; pass < passes; ++pass) {
    std::vector<Real> next;
    for (std::size_t i = 0; i + 2 < cur.size(); ++i) {
      Real d1 = cur[i + 1] - cur[i];
      Real d2 = cur[i + 2] - 2 * cur[i + 1] + cur[i];
      if (d2 == 0) continue;
      Real d = cur[i + 2] - cur[i + 1];
      Real x = cur[i + 2] - d * d / d2;
      // Divergence guard: an accelerated value far outside the local spread
      // signals a near-singular denominator.
      if (abs(x - cur[i + 2]) > 100 * (abs(d1) + abs(d))) continue;
      next.push_back(x);
    }
    if (next.empty()) break;
    cur = std::move(next);
  }
  if (cur.size() == seq.size() || cur.empty()) return std::nullopt;
  return cur.back();
}

template <class Real>
CoefficientEstimate<Real> estimate_coefficients(const Trajectory<Real>& traj,
                                                EstimatorTarget target,
                                                const EstimateOptions& options) {
  using std::abs;
  using std::exp;
  using std::log;
  const std::size_t need = min_length(target);
  if (traj.steps() < need)
    throw InsufficientLengthError(to_string(target) + " needs at least " + std::to_string(need) +
                                      " steps",
                                  need);
  if (options.stride == 0) throw ArgumentError("estimator stride must be positive");
  const Real& m = traj.config().m;
  const Real thr = 1 - 1 / m;
  std::size_t last = traj.steps();
  if (target == EstimatorTarget::CriticalDifference) last -= 1;

  std::optional<SubcriticalTail<Real>> tail;
  if (target == EstimatorTarget::SubcriticalRatio) tail = subcritical_tail(traj, last);

  auto value_at = [&](std::size_t n) -> Real {
    const Real nn = static_cast<Real>(n);
    const auto& law = traj[n].law;
    switch (target) {
      case EstimatorTarget::CriticalNv:
        return nn * (law.r() - thr);
      case EstimatorTarget::CriticalDifference: {
        const auto& next = traj[n + 1].law;
        Real gap = next.r() * (m - 1) * survival(law);
        return nn * nn * nn * (gap - m / 2 * (law.r() - thr) * (next.r() - thr));
      }
      case EstimatorTarget::SubcriticalRatio:
        return exp(log(tail->excess[n]) - nn * log(tail->gamma_star));
      case EstimatorTarget::SupercriticalPCoef:
        return law.p() / (nn * law.r());
      case EstimatorTarget::CriticalPgfAtM:
        return survival(law) * (m - 1) / ((1 - m) + law.r() * m) * (m - 1) * nn;
    }
    return Real(0);
  };

  CoefficientEstimate<Real> est;
  est.target = target;
  const std::size_t first = std::max<std::size_t>(options.n_min, 1);
  for (std::size_t n = first; n <= last; n += options.stride) {
    est.ns.push_back(n);
    est.values.push_back(value_at(n));
  }
  if (est.values.empty())
    throw InsufficientLengthError("no samples between n_min and the trajectory end", first);

  est.aitken = aitken_limit(est.values);
  const std::size_t big = est.ns.back();
  const Real f_n = est.values.back();
  if (big >= 4 && big / 2 >= first) {
    const Real f_half = value_at(big / 2);
    est.richardson = 2 * f_n - f_half;
    Real denom = f_half - value_at(std::max<std::size_t>(big / 4, 1));
    est.rate = denom == 0 ? Real(0) : Real(abs((f_n - f_half) / denom));
  } else {
    est.rate = 0;
  }
  est.extrapolated = est.richardson ? *est.richardson : f_n;
  return est;
}

template <class Real>
RegimeConstants<Real> constants_from_trajectory(const Trajectory<Real>& traj, Regime regime) {
  const Real& m = traj.config().m;
  if (regime == Regime::Supercritical) {
    auto fe = free_energy(traj);
    auto q = constant_Q(traj);
    // sum_{i>=1} q_i with q_i = p_{i-1}/A_{i-1}; the terms fall by about 1/m
    Trajectory<Real> work = traj;
    const Real eps = RealTraits<Real>::epsilon() / 100;
    Real q_sum = 0;
    for (std::size_t i = 1;; ++i) {
      if (i >= work.size()) work.extend(64);
      const Real& qi = *work[i].q_next;
      q_sum += qi;
      if (i > fe.terms && qi * m / (m - 1) < eps * q_sum) break;
    }
    const auto& law0 = traj[0].law;
    return SupercriticalConstants<Real>{m, fe.value, q.value, Real(law0.p() / law0.r()), q_sum};
  }
  if (regime == Regime::Subcritical) {
    auto tail = subcritical_tail(traj);
    auto k = constant_K(traj, tail);
    return SubcriticalConstants<Real>{m, tail.r_star, k.value};
  }
  return CriticalConstants<Real>{m};
}

template <class Real>
std::vector<ExpansionRow<Real>> expansion_table(const Trajectory<Real>& traj,
                                                const RegimeConstants<Real>& constants,
                                                Variant variant, const EstimateOptions& sampling) {
  using std::exp;
  using std::log;
  if (sampling.stride == 0) throw ArgumentError("sampling stride must be positive");
  const Real& m = traj.config().m;
  std::optional<SubcriticalTail<Real>> tail;
  if (std::holds_alternative<SubcriticalConstants<Real>>(constants))
    tail = subcritical_tail(traj, traj.steps());

  std::vector<ExpansionRow<Real>> rows;
  for (std::size_t n = sampling.n_min; n <= traj.steps(); n += sampling.stride) {
    const auto& law = traj[n].law;
    ExpansionRow<Real> row;
    row.n = n;
    row.r = law.r();
    row.p = law.p();
    if (const auto* c = std::get_if<SupercriticalConstants<Real>>(&constants)) {
      auto e = expand_supercritical(n, *c, variant);
      row.r_cmp = compare(n, Real(exp(law.log_r() - e.log_scale)), e.r_terms);
      row.p_cmp = compare(n, Real(exp(log(law.p()) - e.log_scale)), e.p_terms);
    } else if (const auto* c = std::get_if<SubcriticalConstants<Real>>(&constants)) {
      auto e = expand_subcritical(n, *c);
      row.r_cmp = compare(n, tail->excess[n], e.r_terms);
      row.p_cmp = compare(n, Real(-survival(law)), e.p_terms);
    } else {
      if (n < 2) continue;
      auto e = expand_critical(n, m, variant);
      row.r_cmp = compare(n, Real(law.r() - e.r_base), e.r_terms);
      row.p_cmp = compare(n, Real(-survival(law)), e.p_terms);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

#define DRLAB_INSTANTIATE_ASYMPTOTICS(Real)                                                    \
  template struct Expansion<Real>;                                                             \
  template Expansion<Real> expand_supercritical(std::size_t, const SupercriticalConstants<Real>&, \
                                                Variant);                                      \
  template Expansion<Real> expand_subcritical(std::size_t, const SubcriticalConstants<Real>&); \
  template Expansion<Real> expand_critical(std::size_t, const Real&, Variant);                 \
  template CorollaryValues<Real> corollary_values(std::size_t, const RegimeConstants<Real>&,   \
                                                  const std::optional<Real>&, Variant);        \
  template ExpansionValue<Real> compare(std::size_t, const Real&, const std::vector<Real>&);   \
  template std::optional<Real> aitken_limit(const std::vector<Real>&, int);                    \
  template RegimeConstants<Real> constants_from_trajectory(const Trajectory<Real>&, Regime);   \
  template std::vector<ExpansionRow<Real>> expansion_table(                                    \
      const Trajectory<Real>&, const RegimeConstants<Real>&, Variant, const EstimateOptions&); \
  template CoefficientEstimate<Real> estimate_coefficients(const Trajectory<Real>&,            \
                                                           EstimatorTarget,                    \
                                                           const EstimateOptions&);

DRLAB_INSTANTIATE_ASYMPTOTICS(double)
DRLAB_INSTANTIATE_ASYMPTOTICS(Extended)

}  // namespace drlab
