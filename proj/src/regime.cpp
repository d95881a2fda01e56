#include "drlab/regime.hpp"

#include "drlab/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <thread>

namespace drlab {

std::string to_string(Regime regime) {
  switch (regime) {
    case Regime::Supercritical: return "Supercritical";
    case Regime::Subcritical: return "Subcritical";
    case Regime::NearCriticalUndetermined: return "NearCriticalUndetermined";
  }
  return "unknown";
}

std::string regime_code(Regime regime) {
  switch (regime) {
    case Regime::Supercritical: return "S";
    case Regime::Subcritical: return "U";
    case Regime::NearCriticalUndetermined: return "C?";
  }
  return "?";
}

namespace {

// Truncation level for the infinite sums and products: 1e-17 in standard
// precision, two digits past the working precision otherwise.
template <class Real>
Real tail_threshold(const ModelConfig<Real>& config) {
  using std::pow;
  if constexpr (std::is_same_v<Real, double>) {
    return 1e-17;
  } else {
    return pow(Real(10), -static_cast<long>(config.precision.digits + 2));
  }
}

template <class Real>
Real critical_r(const ModelConfig<Real>& config) {
  return 1 - 1 / config.m;
}

// Makes sure records[0..index] exist.
template <class Real>
void ensure(Trajectory<Real>& traj, std::size_t index) {
  if (index < traj.size()) return;
  std::size_t missing = index + 1 - traj.size();
  traj.extend(std::max<std::size_t>(missing, 64));
}

template <class Real>
void require_supercritical(const Trajectory<Real>& traj, const char* what) {
  if (!(traj.back().law.r() < critical_r(traj.config())))
    throw RegimeMismatchError(std::string(what) +
                              " needs a supercritical trajectory that has crossed below 1 - 1/m");
}

// log(A / m) = log(1 - (m - 1) p / m).
template <class Real>
Real log_a_over_m(const StepRecord<Real>& rec, const ModelConfig<Real>& config) {
  using std::log;
  using std::log1p;
  if (rec.law.p() < Real(0.5)) return log1p(-(config.m - 1) * rec.law.p() / config.m);
  return rec.log_a - log(config.m);
}

}  // namespace

template <class Real>
FreeEnergy<Real> free_energy(const Trajectory<Real>& traj) {
  using std::abs;
  using std::exp;
  using std::expm1;
  using std::log1p;
  require_supercritical(traj, "free_energy");
  const auto& config = traj.config();
  const Real threshold = tail_threshold(config);
  Trajectory<Real> work = traj;

  Real second = 0;                                 // sum_{i=1..N} log(1 - r_i)
  Real first = log_a_over_m(work[0], config);      // sum_{i=0..N} log(A_i / m)
  Real bound = 0;
  std::size_t i = 1;
  for (;; ++i) {
    ensure(work, i);
    const auto& rec = work[i];
    const auto& prev = work[i - 1];
    second += log1p(-rec.law.r());
    first += log_a_over_m(rec, config);
    if (!(rec.law.p() < prev.law.p())) continue;
    // Once p_j decreases, A_j increases and both r_j and p_j fall at least
    // geometrically from index i on.
    Real rho_r = 1 / rec.a;
    Real r_tail = rec.law.r() * rho_r / (1 - rho_r) / (1 - rec.law.r());
    Real rho_p = rec.law.p() / prev.law.p();
    Real p_tail = rec.law.p() * rho_p / (1 - rho_p) / (1 - rec.law.p());
    bound = r_tail < p_tail ? p_tail : r_tail;
    if (bound < threshold) break;
  }

  const Real log_r0 = work[0].law.log_r();
  FreeEnergy<Real> fe;
  fe.log = work[0].law.log_one_minus_p() - log_r0 + second;
  fe.value = exp(fe.log);
  fe.first_form_log = first - log_r0;
  fe.relative_gap = abs(expm1(fe.log - fe.first_form_log));
  fe.tail_bound = bound;
  fe.terms = i;
  if (fe.relative_gap > Real(1e-10))
    throw PrecisionError("free energy product forms disagree: relative gap " +
                         format_real(fe.relative_gap, 6));
  return fe;
}

template <class Real>
ConstantQ<Real> constant_Q(const Trajectory<Real>& traj) {
  require_supercritical(traj, "constant_Q");
  const auto& config = traj.config();
  const Real threshold = tail_threshold(config) * critical_r(config);
  Trajectory<Real> work = traj;

  ConstantQ<Real> q{work[0].law.p(), Real(0), 0};
  std::size_t i = 1;
  for (;; ++i) {
    ensure(work, i);
    const Real& p = work[i].law.p();
    const Real& p_prev = work[i - 1].law.p();
    q.value += p;
    if (!(p < p_prev) || !(p < threshold)) continue;
    Real rho = p / p_prev;
    q.tail_bound = p * rho / (1 - rho);
    break;
  }
  q.terms = i + 1;
  return q;
}

template <class Real>
SubcriticalTail<Real> subcritical_tail(const Trajectory<Real>& traj, std::size_t min_length) {
  const auto& config = traj.config();
  const Real& m = config.m;
  const Real thr = critical_r(config);
  const Real threshold = tail_threshold(config);
  Trajectory<Real> work = traj;

  std::vector<Real> gaps;
  Real gap_ref = 0;
  std::size_t i = 0;
  for (;; ++i) {
    try {
      ensure(work, i + 1);
    } catch (const ResourceLimitError&) {
      throw RegimeMismatchError("trajectory did not settle above 1 - 1/m within the step budget");
    }
    const auto& rec = work[i];
    const auto& next = work[i + 1];
    if (!(next.law.r() > thr))
      throw RegimeMismatchError("trajectory crossed below 1 - 1/m: not subcritical");
    gaps.push_back(next.law.r() * (m - 1) * survival(rec.law));
    if (i == min_length) gap_ref = gaps.back();
    if (i < min_length + 1) continue;
    Real gamma = m * (1 - next.law.r());
    if (!(gamma < 1)) continue;
    const Real& gap = gaps.back();
    if (gap < threshold * next.law.r() * (1 - gamma) && gap < threshold * gap_ref) break;
  }

  const std::size_t last = i + 1;
  Real gamma = m * (1 - work[last].law.r());
  SubcriticalTail<Real> tail;
  tail.excess.resize(last + 1);
  tail.excess[last] = gaps.back() * gamma / (1 - gamma);
  for (std::size_t k = last; k-- > 0;) tail.excess[k] = gaps[k] + tail.excess[k + 1];
  tail.r_star = work[last].law.r() - tail.excess[last];
  tail.gamma_star = m * (1 - tail.r_star);
  tail.converged_at = last;
  return tail;
}

template <class Real>
SubcriticalTail<Real> subcritical_tail(const Trajectory<Real>& traj) {
  return subcritical_tail(traj, std::size_t{0});
}

template <class Real>
ConstantK<Real> constant_K(const Trajectory<Real>& traj, const SubcriticalTail<Real>& tail) {
  using std::exp;
  using std::log;
  using std::log1p;
  const auto& config = traj.config();
  const Real one_minus_rs = 1 - tail.r_star;
  const auto& law0 = traj[0].law;

  // (r_0 - r_1)/(r_0 r_1) = (A_0 - 1)/r_0
  Real log_k = log((config.m - 1) * survival(law0)) - law0.log_r();
  const std::size_t last = tail.excess.size() - 1;
  for (std::size_t i = 1; i <= last; ++i) log_k += log1p(-tail.excess[i] / one_minus_rs);
  const Real& g = tail.gamma_star;
  log_k -= tail.excess[last] * g / (1 - g) / one_minus_rs;
  return {exp(log_k), log_k, last};
}

template <class Real>
ConstantK<Real> constant_K(const Trajectory<Real>& traj) {
  return constant_K(traj, subcritical_tail(traj));
}

template <class Real>
RegimeReport<Real> classify(const GeometricTypeLaw<Real>& law0, const ModelConfig<Real>& config,
                            const ClassifyOptions& options) {
  const Real& m = config.m;
  const Real thr = critical_r(config);
  if (!(options.delta > 0 && options.delta < to_double(thr) / 10))
    throw ArgumentError("delta must lie in (0, (1 - 1/m)/10)");
  if (options.budget < 1) throw ArgumentError("classification budget must be at least 1");
  const Real lower = thr - options.delta;
  const Real upper = thr + options.delta;

  RegimeReport<Real> rep;
  rep.diagnostics.delta = options.delta;
  rep.diagnostics.budget = options.budget;
  StepRecord<Real> rec = initial_record(law0, config);
  Real gap = 0;
  std::size_t n = 0;
  for (;; ++n) {
    if (rec.law.r() <= lower) {
      rep.regime = Regime::Supercritical;
      break;
    }
    if (n == options.budget) break;
    StepRecord<Real> next = next_record(rec, config);
    gap = next.law.r() * (m - 1) * survival(rec.law);
    if (rec.law.r() > upper && gap < Real(1e-15) * rec.law.r() &&
        survival(rec.law) < Real(1e-12)) {
      rep.regime = Regime::Subcritical;
      break;
    }
    rec = std::move(next);
  }
  rep.iterations_used = n;
  rep.diagnostics.final_r = rec.law.r();
  rep.diagnostics.final_log_one_minus_p = rec.law.log_one_minus_p();
  rep.diagnostics.final_gap = gap;

  if (rep.regime == Regime::Supercritical) {
    rep.r_star = Real(0);
    rep.p_star = Real(0);
    if (options.with_constants) {
      auto traj = iterate(law0, config, n);
      rep.free_energy = free_energy(traj);
      rep.Q = constant_Q(traj);
    }
  } else if (rep.regime == Regime::Subcritical) {
    rep.p_star = Real(1);
    rep.free_energy_zero = true;
    if (options.with_constants) {
      auto traj = iterate(law0, config, n);
      auto tail = subcritical_tail(traj);
      rep.r_star = tail.r_star;
      rep.K = constant_K(traj, tail);
    } else {
      Real gamma = m * (1 - rec.law.r());
      rep.r_star = rec.law.r() - gap / (1 - gamma);
    }
    rep.gamma_star = m * (1 - *rep.r_star);
  }
  return rep;
}

// Critical manifold ------------------------------------------------------------

namespace {

template <class Real>
using Series = std::vector<Real>;

template <class Real>
Series<Real> mul(const Series<Real>& a, const Series<Real>& b, std::size_t order) {
  Series<Real> c(order + 1, Real(0));
  for (std::size_t i = 0; i < a.size() && i <= order; ++i) {
    if (a[i] == 0) continue;
    for (std::size_t j = 0; j < b.size() && i + j <= order; ++j) {
      if (b[j] == 0) continue;
      c[i + j] += a[i] * b[j];
    }
  }
  return c;
}

// sum_i f[i] s^i for a series s without constant term.
template <class Real>
Series<Real> compose(const Series<Real>& f, const Series<Real>& s, std::size_t order) {
  Series<Real> out(order + 1, Real(0));
  Series<Real> power(order + 1, Real(0));
  power[0] = 1;
  for (std::size_t i = 0; i < f.size() && i <= order; ++i) {
    if (i > 0) power = mul(power, s, order);
    if (f[i] == 0) continue;
    for (std::size_t k = 0; k <= order; ++k) out[k] += f[i] * power[k];
  }
  return out;
}

}  // namespace

template <class Real>
CenterManifold<Real>::CenterManifold(const Real& m, std::size_t order) {
  if (order < 3) throw ArgumentError("center manifold order must be at least 3");
  const Real xc = m / (m - 1);
  const Real c = (m - 1) * (m - 1) / m;
  a_.assign(order + 1, Real(0));
  a_[2] = c / 2;

  // Invariance: phi(y + phi(y)) = M(y + phi(y)) phi(y), with
  // M(x) = m - m/(x_c + x) = 1 - (m - 1) sum_{k>=1} (-x/x_c)^k.
  // The coefficient of y^(k+1) is linear in a_k with slope k c / 2.
  for (std::size_t k = 3; k <= order; ++k) {
    const std::size_t top = k + 1;
    Series<Real> s(a_.begin(), a_.begin() + std::min(a_.size(), top + 1));
    s.resize(top + 1, Real(0));
    s[1] += 1;  // s = y + phi(y)
    Series<Real> t(top + 1, Real(0));
    for (std::size_t j = 0; j <= top; ++j) t[j] = -s[j] / xc;
    Series<Real> geometric(top + 1, Real(1));
    geometric[0] = 0;  // sum_{k>=1} t^k as a function of t
    Series<Real> msum = compose(geometric, t, top);
    Series<Real> mval(top + 1, Real(0));
    for (std::size_t j = 0; j <= top; ++j) mval[j] = -(m - 1) * msum[j];
    mval[0] += 1;
    Series<Real> phi(a_.begin(), a_.begin() + std::min(a_.size(), top + 1));
    Series<Real> lhs = compose(phi, s, top);
    Series<Real> rhs = mul(mval, phi, top);
    Real residual = lhs[top] - rhs[top];
    a_[k] = -residual / (Real(k) * c / 2);
  }
}

template <class Real>
Real CenterManifold<Real>::operator()(const Real& y) const {
  Real acc = 0;
  for (std::size_t j = a_.size(); j-- > 2;) acc = (acc + a_[j]) * y;
  return acc * y;
}

template <class Real>
Real CenterManifold<Real>::truncation(const Real& y) const {
  using std::abs;
  using std::pow;
  return abs(a_.back()) * pow(abs(y), static_cast<long>(a_.size()));
}

template <class Real>
SideResult classify_side(const GeometricTypeLaw<Real>& law0, const ModelConfig<Real>& config,
                         const CenterManifold<Real>& manifold, std::size_t budget) {
  using std::abs;
  using std::pow;
  const Real& m = config.m;
  const Real thr = critical_r(config);
  const Real xc = m / (m - 1);
  const Real c = (m - 1) * (m - 1) / m;
  const Real window = Real(0.01) / (c < 1 ? Real(1) : c);
  const Real roundoff =
      pow(Real(10), -static_cast<long>(config.precision.significant_digits()) + 8);
  static constexpr double kFractions[] = {0.25, 0.5, 0.75};

  StepRecord<Real> rec = initial_record(law0, config);
  for (std::size_t n = 0; n <= budget; ++n) {
    const Real& r = rec.law.r();
    if (r < thr) return {Side::Supercritical, n};
    const Real x = 1 / r;
    const Real d = (m - 1) * survival(rec.law) / r;
    for (double f : kFractions) {
      Real rho = thr + f * (r - thr);
      Real gamma = m * (1 - rho);
      if (x + d / (1 - gamma) < 1 / rho) return {Side::Subcritical, n};
    }
    const Real y = x - xc;
    if (y > -window) {
      Real h = d - manifold(y);
      Real err = manifold.truncation(y) + roundoff * d;
      if (abs(h) > 100 * err) return {h > 0 ? Side::Supercritical : Side::Subcritical, n};
    }
    if (n < budget) rec = next_record(rec, config);
  }
  return {Side::Undetermined, budget};
}

template <class Real>
CriticalLocateResult<Real> critical_locate(const Real& r0, const Real& tol,
                                           const ModelConfig<Real>& config,
                                           const LocateOptions& options) {
  using std::pow;
  const Real thr = critical_r(config);
  if (!(r0 > thr && r0 < 1))
    throw ArgumentError("critical_locate needs 1 - 1/m < r0 < 1; below that every p0 is supercritical");
  if (!(tol > 0)) throw ArgumentError("tolerance must be positive");
  const long digits = static_cast<long>(config.precision.significant_digits());
  if (tol < pow(Real(10), 2 - digits))
    throw PrecisionError("tolerance " + format_real(tol, 6) + " is below the resolution of " +
                         config.precision.to_string() + " arithmetic");

  const CenterManifold<Real> manifold(config.m, options.manifold_order);
  CriticalLocateResult<Real> res;
  res.r0 = r0;

  auto probe = [&](const Real& p0) {
    SideResult s = classify_side(GeometricTypeLaw<Real>(r0, p0), config, manifold,
                                 options.probe_budget);
    ++res.probes;
    res.iterations += s.iterations;
    return s.side;
  };
  auto decided = [&](Side side, const Real& p0) {
    if (side == Side::Undetermined)
      throw PrecisionError("classification at p0 = " + format_real(p0) +
                           " stayed undecided within the probe budget");
    return side;
  };

  Real lo = Real(1e-9), hi = 1 - Real(1e-9);
  Side side_lo = decided(probe(lo), lo);
  Side side_hi = decided(probe(hi), hi);
  if (side_lo == side_hi || side_lo != Side::Supercritical)
    throw BracketError("p0 = " + format_real(lo, 6) + " and p0 = " + format_real(hi, 6) +
                       " do not straddle the critical manifold");

  while (hi - lo > tol) {
    Real mid = (lo + hi) / 2;
    if (decided(probe(mid), mid) == Side::Supercritical)
      lo = mid;
    else
      hi = mid;
  }

  // Probe beyond the bracket on both sides; any opposite verdict means the
  // classification is not monotone in p0 near the located point.
  const Real width = hi - lo;
  for (int k : {1, 4, 16, 64}) {
    Real below = lo - k * width;
    Real above = hi + k * width;
    if (below > 0 && probe(below) == Side::Subcritical) ++res.monotonicity_violations;
    if (above < 1 && probe(above) == Side::Supercritical) ++res.monotonicity_violations;
  }

  res.bracket_lo = lo;
  res.bracket_hi = hi;
  res.bracket_width = width;
  res.p0_critical = (lo + hi) / 2;
  return res;
}

template <class Real>
std::vector<PhaseCell<Real>> phase_scan(const GridRange& r0_grid, const GridRange& p0_grid,
                                        const ModelConfig<Real>& config,
                                        const ScanOptions& options) {
  for (const GridRange* g : {&r0_grid, &p0_grid}) {
    if (!(g->lo >= 0 && g->hi <= 1 && g->lo < g->hi) || g->count == 0)
      throw ArgumentError("grid ranges must satisfy 0 <= lo < hi <= 1 with at least one cell");
  }
  if (r0_grid.count > options.max_cells / p0_grid.count)
    throw ResourceLimitError("phase scan of " + std::to_string(r0_grid.count) + " x " +
                             std::to_string(p0_grid.count) + " cells exceeds the cap of " +
                             std::to_string(options.max_cells));
  const std::size_t total = r0_grid.count * p0_grid.count;
  std::vector<PhaseCell<Real>> cells(total);
  std::vector<std::exception_ptr> errors(total);

  auto work = [&](std::size_t idx) {
    auto& cell = cells[idx];
    cell.r0 = r0_grid.at(idx / p0_grid.count);
    cell.p0 = p0_grid.at(idx % p0_grid.count);
    try {
      cell.report = classify(GeometricTypeLaw<Real>(Real(cell.r0), Real(cell.p0)), config,
                             options.classify);
    } catch (...) {
      errors[idx] = std::current_exception();
    }
  };

  unsigned threads = options.threads ? options.threads : std::thread::hardware_concurrency();
  if (config.precision.mode == PrecisionMode::Extended || threads <= 1 || total < 2) {
    for (std::size_t i = 0; i < total; ++i) work(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < std::min<std::size_t>(threads, total); ++t)
      pool.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < total;) work(i);
      });
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return cells;
}

#define DRLAB_INSTANTIATE_REGIME(Real)                                                           \
  template class CenterManifold<Real>;                                                           \
  template FreeEnergy<Real> free_energy(const Trajectory<Real>&);                                \
  template ConstantQ<Real> constant_Q(const Trajectory<Real>&);                                  \
  template SubcriticalTail<Real> subcritical_tail(const Trajectory<Real>&);                      \
  template SubcriticalTail<Real> subcritical_tail(const Trajectory<Real>&, std::size_t);         \
  template ConstantK<Real> constant_K(const Trajectory<Real>&, const SubcriticalTail<Real>&);    \
  template ConstantK<Real> constant_K(const Trajectory<Real>&);                                  \
  template RegimeReport<Real> classify(const GeometricTypeLaw<Real>&, const ModelConfig<Real>&,  \
                                       const ClassifyOptions&);                                  \
  template SideResult classify_side(const GeometricTypeLaw<Real>&, const ModelConfig<Real>&,     \
                                    const CenterManifold<Real>&, std::size_t);                   \
  template CriticalLocateResult<Real> critical_locate(const Real&, const Real&,                  \
                                                      const ModelConfig<Real>&,                  \
                                                      const LocateOptions&);                     \
  template std::vector<PhaseCell<Real>> phase_scan(const GridRange&, const GridRange&,           \
                                                   const ModelConfig<Real>&, const ScanOptions&);

DRLAB_INSTANTIATE_REGIME(double)
DRLAB_INSTANTIATE_REGIME(Extended)

}  // namespace drlab
