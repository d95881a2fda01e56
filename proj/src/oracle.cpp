#include "drlab/oracle.hpp"

#include "drlab/errors.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <thread>

namespace drlab {

namespace {

// Neumaier summation.
double compensated_sum(const std::vector<double>& xs) {
  double sum = 0, comp = 0;
  for (double x : xs) {
    double t = sum + x;
    if (std::abs(sum) >= std::abs(x))
      comp += (sum - t) + x;
    else
      comp += (x - t) + sum;
    sum = t;
  }
  return sum + comp;
}

// Removes trailing entries while their cumulative mass stays within budget;
// returns the removed mass.
double trim_top(std::vector<double>& xs, double budget) {
  double dropped = 0;
  while (xs.size() > 1 && dropped + xs.back() <= budget) {
    dropped += xs.back();
    xs.pop_back();
  }
  return dropped;
}

std::vector<double> convolve(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double ai = a[i];
    if (ai == 0) continue;
    double* dst = out.data() + i;
    for (std::size_t j = 0; j < b.size(); ++j) dst[j] += ai * b[j];
  }
  return out;
}

}  // namespace

double TruncatedPmf::total() const { return compensated_sum(masses); }

void TruncatedPmf::validate() const {
  if (masses.empty()) throw ArgumentError("pmf has no masses");
  for (double x : masses)
    if (!(x >= 0) || !std::isfinite(x)) throw ArgumentError("pmf masses must be finite and >= 0");
  if (!(tail_bound >= 0)) throw ArgumentError("pmf tail bound must be >= 0");
  const double excess = total() + tail_bound - 1;
  if (!(std::abs(excess) <= 1e-12))
    throw ArgumentError("pmf mass plus tail bound differs from 1 by " + std::to_string(excess));
}

TruncatedPmf TruncatedPmf::unit_mass(std::size_t k) {
  TruncatedPmf pmf;
  pmf.masses.assign(k + 1, 0.0);
  pmf.masses[k] = 1;
  return pmf;
}

TruncatedPmf geometric_type_pmf(const GeometricTypeLaw<double>& law, double tol) {
  if (!(tol > 0 && tol < 1)) throw ArgumentError("pmf tolerance must lie in (0, 1)");
  const double log_keep = std::log1p(-law.r());
  const double log_target = std::log(tol / 10);
  // (1 - p)(1 - r)^N < tol / 10
  double n_real = std::ceil((log_target - law.log_one_minus_p()) / log_keep);
  std::size_t n = n_real < 0 ? 0 : static_cast<std::size_t>(n_real);
  while (law.log_one_minus_p() + static_cast<double>(n) * log_keep >= log_target) ++n;
  constexpr std::size_t kCap = 50'000'000;
  if (n > kCap)
    throw ResourceLimitError("geometric-type pmf needs " + std::to_string(n) + " entries");

  TruncatedPmf pmf;
  pmf.masses.resize(n + 1);
  pmf.masses[0] = law.p();
  const double surv = survival(law);
  for (std::size_t k = 1; k <= n; ++k)
    pmf.masses[k] = surv * law.r() * std::exp(static_cast<double>(k - 1) * log_keep);
  pmf.tail_bound = std::exp(law.log_one_minus_p() + static_cast<double>(n) * log_keep);
  return pmf;
}

TruncatedPmf conditional_given_positive(const TruncatedPmf& pmf) {
  std::vector<double> upper(pmf.masses.begin() + std::min<std::size_t>(1, pmf.masses.size()),
                            pmf.masses.end());
  const double positive = compensated_sum(upper);
  if (!(positive > 0)) throw ArgumentError("pmf has no mass at values >= 1");
  const double denom = positive + pmf.tail_bound;
  TruncatedPmf out;
  out.masses.resize(upper.size());
  for (std::size_t k = 0; k < upper.size(); ++k) out.masses[k] = upper[k] / denom;
  out.tail_bound = pmf.tail_bound / denom;
  return out;
}

TruncatedPmf propagate_pmf(const TruncatedPmf& pmf, double m, double tol,
                           const PropagateOptions& options) {
  pmf.validate();
  if (!(m > 1) || !std::isfinite(m)) throw ArgumentError("offspring mean m must exceed 1");
  if (!(tol >= 1e-14 && tol < 1)) throw ArgumentError("pmf tolerance must lie in [1e-14, 1)");

  const double theta = 1 / m;
  const double rho = 1 - theta;
  const double log_rho = std::log(rho);
  std::size_t J = 1;
  while (static_cast<double>(J) * log_rho >= std::log(tol / 4)) ++J;
  const double conv_budget = tol / (20 * static_cast<double>(J));

  std::vector<double> f = pmf.masses;
  trim_top(f, 0.0);  // drop trailing zeros

  auto coef = [&](std::size_t j) { return theta * std::exp(static_cast<double>(j - 1) * log_rho); };

  std::vector<double> h(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) h[i] = coef(J) * f[i];
  double dropped = 0;
  for (std::size_t j = J - 1; j >= 1; --j) {
    h[0] += coef(j);
    h = convolve(h, f);
    dropped += trim_top(h, conv_budget);
    if (h.size() > options.max_support)
      throw ResourceLimitError("compound pmf support exceeds the cap of " +
                               std::to_string(options.max_support) + " entries");
  }

  TruncatedPmf out;
  out.masses.assign(std::max<std::size_t>(h.size() - 1, 1), 0.0);
  out.masses[0] = h[0] + (h.size() > 1 ? h[1] : 0.0);
  for (std::size_t k = 2; k < h.size(); ++k) out.masses[k - 1] = h[k];
  dropped += trim_top(out.masses, tol / 10);

  // Mass never generated: the input's omitted mass pushed through the
  // compound sum, 1 - G(1 - t) with G(z) = theta z / (1 - rho z), plus the
  // eta > J terms, rho^J s^J G(s) with s = 1 - t.
  const double t = pmf.tail_bound;
  const double s = 1 - t;
  const double inherited = t / (theta + rho * t);
  const double eta_cut = std::exp(static_cast<double>(J) * (log_rho + std::log(s))) * theta * s /
                         (1 - rho * s);
  out.tail_bound = inherited + eta_cut + dropped;
  return out;
}

double tv_distance(const TruncatedPmf& a, const TruncatedPmf& b) {
  const std::size_t n = std::max(a.masses.size(), b.masses.size());
  std::vector<double> diffs(n);
  for (std::size_t k = 0; k < n; ++k) diffs[k] = std::abs(a.mass(k) - b.mass(k));
  const double tv = 0.5 * compensated_sum(diffs) + 0.5 * (a.tail_bound + b.tail_bound);
  return std::min(tv, 1.0);
}

// Monte Carlo -------------------------------------------------------------------

Philox4x32::Counter Philox4x32::block(Counter c, Key k) {
  constexpr std::uint32_t kM0 = 0xD2511F53u, kM1 = 0xCD9E8D57u;
  constexpr std::uint32_t kW0 = 0x9E3779B9u, kW1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    k[0] += kW0;
    k[1] += kW1;
  }
  return c;
}

double philox_uniform(std::uint64_t key, std::uint64_t stream, std::uint64_t index) {
  const auto out = Philox4x32::block(
      {static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
       static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)},
      {static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)});
  const std::uint64_t bits = (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
  return static_cast<double>((bits >> 11) + 1) * 0x1.0p-53;
}

namespace {

struct TreeSampler {
  std::uint64_t key;
  std::size_t depth;
  double log_one_minus_theta;  // log(1 - 1/m)
  double leaf_p;
  double leaf_survival;
  double log_one_minus_r0;

  struct Frame {
    std::size_t depth;
    std::uint64_t remaining;
    std::uint64_t sum;
  };

  // floor(log U / log(1 - theta)) + 1
  static std::uint64_t geometric(double u, double log_one_minus) {
    const double k = std::floor(std::log(u) / log_one_minus) + 1;
    if (!(k < 1.8e19)) throw ResourceLimitError("geometric draw overflows 64 bits");
    return static_cast<std::uint64_t>(k);
  }

  std::uint64_t leaf(double u) const {
    if (u > leaf_survival) return 0;
    return geometric(u / leaf_survival, log_one_minus_r0);
  }

  static void add(std::uint64_t& acc, std::uint64_t v) {
    if (__builtin_add_overflow(acc, v, &acc))
      throw ResourceLimitError("sampled value overflows 64 bits");
  }

  std::uint64_t sample(std::uint64_t stream, std::vector<Frame>& stack, std::uint64_t& nodes) const {
    std::uint64_t draw = 0;
    auto uniform = [&] { return philox_uniform(key, stream, draw++); };
    ++nodes;
    if (depth == 0) return leaf(uniform());
    stack.clear();
    stack.push_back({depth, geometric(uniform(), log_one_minus_theta), 0});
    for (;;) {
      Frame& top = stack.back();
      if (top.remaining == 0) {
        const std::uint64_t value = top.sum >= 1 ? top.sum - 1 : 0;
        stack.pop_back();
        if (stack.empty()) return value;
        add(stack.back().sum, value);
        continue;
      }
      --top.remaining;
      ++nodes;
      if (top.depth == 1) {
        add(top.sum, leaf(uniform()));
      } else {
        const std::size_t child_depth = top.depth - 1;
        stack.push_back({child_depth, geometric(uniform(), log_one_minus_theta), 0});
      }
    }
  }
};

}  // namespace

McSummary mc_sample(const GeometricTypeLaw<double>& law0, double m, const McConfig& cfg) {
  if (!(m > 1) || !std::isfinite(m)) throw ArgumentError("offspring mean m must exceed 1");
  if (cfg.samples < 1) throw ArgumentError("Monte Carlo needs at least one sample");
  if (!(cfg.node_budget > 0)) throw ArgumentError("node budget must be positive");
  const double expected_nodes =
      static_cast<double>(cfg.samples) * std::pow(m, static_cast<double>(cfg.n));
  if (!(expected_nodes <= cfg.node_budget))
    throw ResourceLimitError("expected tree size " + format_real(expected_nodes, 6) +
                             " exceeds the node budget of " + format_real(cfg.node_budget, 6));

  const TreeSampler sampler{cfg.seed,        cfg.n,          std::log1p(-1 / m),
                            law0.p(),        survival(law0), std::log1p(-law0.r())};

  std::vector<std::uint64_t> values(cfg.samples);
  unsigned threads = cfg.threads == 0 ? std::max(1u, std::thread::hardware_concurrency())
                                      : cfg.threads;
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, cfg.samples));
  std::vector<std::uint64_t> nodes(threads, 0);
  std::vector<std::exception_ptr> errors(threads);
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        try {
          std::vector<TreeSampler::Frame> stack;
          stack.reserve(cfg.n + 1);
          const std::size_t lo = cfg.samples * t / threads;
          const std::size_t hi = cfg.samples * (t + 1) / threads;
          for (std::size_t i = lo; i < hi; ++i) values[i] = sampler.sample(i, stack, nodes[t]);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  McSummary out;
  out.samples = cfg.samples;
  out.n = cfg.n;
  for (std::uint64_t k : nodes) out.nodes += k;

  unsigned __int128 sum = 0;
  for (std::uint64_t v : values) {
    sum += v;
    if (v > 0) ++out.survivors;
  }
  const double count = static_cast<double>(cfg.samples);
  out.mean = static_cast<double>(static_cast<long double>(sum) / cfg.samples);
  double ss = 0;
  for (std::uint64_t v : values) {
    const double d = static_cast<double>(v) - out.mean;
    ss += d * d;
  }
  const double var = cfg.samples > 1 ? ss / (count - 1) : 0.0;
  out.mean_se = std::sqrt(var / count);
  out.survival_frequency = static_cast<double>(out.survivors) / count;
  out.survival_se =
      std::sqrt(out.survival_frequency * (1 - out.survival_frequency) / count);

  std::sort(values.begin(), values.end());
  for (std::size_t i = 0; i < values.size();) {
    std::size_t j = i;
    while (j < values.size() && values[j] == values[i]) ++j;
    out.counts.emplace_back(values[i], j - i);
    i = j;
  }
  if (out.survivors > 0) {
    out.conditional_pmf.assign(values.back(), 0.0);
    for (const auto& [value, c] : out.counts)
      if (value > 0)
        out.conditional_pmf[value - 1] = static_cast<double>(c) / static_cast<double>(out.survivors);
  }
  return out;
}

ChiSquareResult chi_square_geometric(const McSummary& summary, double r, double level) {
  if (!(r > 0 && r < 1)) throw ArgumentError("geometric parameter must lie in (0, 1)");
  if (!(level > 0 && level < 1)) throw ArgumentError("test level must lie in (0, 1)");
  const double total = static_cast<double>(summary.survivors);
  if (!(total > 0)) throw ArgumentError("no surviving samples to test");

  auto observed_in = [&](std::uint64_t first, std::uint64_t last) {
    double o = 0;
    for (const auto& [value, c] : summary.counts)
      if (value >= first && (last == 0 || value <= last)) o += static_cast<double>(c);
    return o;
  };
  // expected count at values >= k
  auto tail_expected = [&](std::uint64_t k) {
    return total * std::exp(static_cast<double>(k - 1) * std::log1p(-r));
  };

  ChiSquareResult res;
  std::uint64_t k = 1;
  for (;;) {
    const double tail = tail_expected(k);
    if (tail < 10) {
      if (tail < 5 && !res.bins.empty()) {
        res.bins.back().last = 0;
        res.bins.back().expected += tail;
      } else {
        res.bins.push_back({k, 0, 0, tail});
      }
      break;
    }
    const std::uint64_t first = k;
    double expected = 0;
    while (expected < 5) {
      expected += total * r * std::exp(static_cast<double>(k - 1) * std::log1p(-r));
      ++k;
    }
    res.bins.push_back({first, k - 1, 0, expected});
  }
  if (res.bins.size() < 2) throw ArgumentError("too few samples for a chi-square test");

  for (auto& bin : res.bins) {
    bin.observed = observed_in(bin.first, bin.last);
    const double d = bin.observed - bin.expected;
    res.statistic += d * d / bin.expected;
  }
  res.dof = res.bins.size() - 1;
  boost::math::chi_squared dist(static_cast<double>(res.dof));
  res.p_value = boost::math::cdf(boost::math::complement(dist, res.statistic));
  res.critical_value = boost::math::quantile(dist, level);
  res.rejected = res.statistic > res.critical_value;
  return res;
}

}  // namespace drlab
