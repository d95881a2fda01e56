#include "doctest.h"

#include "drlab/errors.hpp"
#include "drlab/regime.hpp"

#include "../support/generators.hpp"

#include <cmath>

using namespace drlab;

namespace {

ModelConfig<double> cfg(double m) { return ModelConfig<double>(m); }

double rel_err(double x, double ref) { return std::abs(x - ref) / std::abs(ref); }

constexpr double kRStar = 0.77355461807830453119937196191;
constexpr double kK = 0.0767820564709216404003;

}  // namespace

TEST_CASE("classify: worked examples") {
  auto a = classify(GeometricTypeLaw<double>(0.4, 0.9), cfg(2));
  CHECK(a.regime == Regime::Supercritical);
  CHECK(a.iterations_used == 0);

  auto b = classify(GeometricTypeLaw<double>(0.5, 0.5), cfg(2));
  CHECK(b.regime == Regime::Supercritical);
  CHECK(b.iterations_used == 1);
  CHECK(*b.r_star == 0);
  CHECK(*b.p_star == 0);
  REQUIRE(b.free_energy);
  CHECK(b.free_energy->value > 0);
  CHECK(std::isfinite(b.free_energy->log));
  CHECK_FALSE(b.K);

  auto c = classify(GeometricTypeLaw<double>(0.9, 0.9), cfg(2));
  CHECK(c.regime == Regime::Subcritical);
  CHECK(*c.p_star == 1);
  CHECK(c.free_energy_zero);
  CHECK_FALSE(c.free_energy);
  CHECK(rel_err(*c.r_star, kRStar) < 1e-14);
  CHECK(*c.gamma_star > 0);
  CHECK(*c.gamma_star < 1);
  REQUIRE(c.K);
  CHECK(rel_err(c.K->value, kK) < 1e-13);
}

TEST_CASE("classify: argument checks and budget exhaustion") {
  ClassifyOptions bad;
  bad.delta = 0.06;
  CHECK_THROWS_AS(classify(GeometricTypeLaw<double>(0.9, 0.9), cfg(2), bad), ArgumentError);
  bad.delta = 0;
  CHECK_THROWS_AS(classify(GeometricTypeLaw<double>(0.9, 0.9), cfg(2), bad), ArgumentError);
  ClassifyOptions zero;
  zero.budget = 0;
  CHECK_THROWS_AS(classify(GeometricTypeLaw<double>(0.9, 0.9), cfg(2), zero), ArgumentError);

  ClassifyOptions short_run;
  short_run.budget = 3;
  auto rep = classify(GeometricTypeLaw<double>(0.9, 0.9), cfg(2), short_run);
  CHECK(rep.regime == Regime::NearCriticalUndetermined);
  CHECK(rep.iterations_used == 3);
  CHECK_FALSE(rep.r_star);
}

TEST_CASE("free energy: both product forms and the scaling limit") {
  auto traj = iterate(GeometricTypeLaw<double>(0.5, 0.5), cfg(2), 1);
  auto fe = free_energy(traj);
  CHECK(fe.relative_gap < 1e-10);
  CHECK(rel_err(std::exp(fe.first_form_log), fe.value) < 1e-10);

  // m^-n E(Y_n) converges to F_inf.
  auto long_run = iterate(GeometricTypeLaw<double>(0.5, 0.5), cfg(2), 120);
  double scaled = std::exp(log_mean(long_run[120].law) - 120 * std::log(2.0));
  CHECK(rel_err(scaled, fe.value) < 1e-10);

  CHECK_THROWS_AS(free_energy(iterate(GeometricTypeLaw<double>(0.9, 0.9), cfg(2), 5)),
                  RegimeMismatchError);
}

TEST_CASE("constant Q: first terms, monotone partial sums, tail bound") {
  auto traj = iterate(GeometricTypeLaw<double>(0.5, 0.5), cfg(2), 1);
  auto q = constant_Q(traj);
  CHECK(q.value >= 0.5 + 5.0 / 9);

  double partial = 0, prev = -1;
  auto long_run = iterate(GeometricTypeLaw<double>(0.5, 0.5), cfg(2), 200);
  for (const auto& rec : long_run.records()) {
    partial += rec.law.p();
    CHECK(partial >= prev);
    prev = partial;
  }
  CHECK(std::abs(partial - q.value) <= q.tail_bound + 1e-15);

  CHECK_THROWS_AS(constant_Q(iterate(GeometricTypeLaw<double>(0.9, 0.9), cfg(2), 5)),
                  RegimeMismatchError);
}

TEST_CASE("constant K: cross-checks against the deviation sequence") {
  auto traj = iterate(GeometricTypeLaw<double>(0.9, 0.9), cfg(2), 40);
  auto tail = subcritical_tail(traj, 60);
  auto k = constant_K(traj, tail);
  const double rs = tail.r_star, g = tail.gamma_star;
  REQUIRE(tail.excess.size() > 60);

  // (r_n - r_*)/gamma^n -> K r_*^2 / (1 - gamma)
  const double first_order = k.value * rs * rs / (1 - g);
  CHECK(rel_err(tail.excess[40] / std::pow(g, 40), first_order) < 1e-6);

  // K_n = (r_n - r_{n+1}) / (gamma^n r_n r_{n+1}) -> K
  auto run = iterate(GeometricTypeLaw<double>(0.9, 0.9), cfg(2), 41);
  const std::size_t n = 40;
  double gap = tail.excess[n] - tail.excess[n + 1];
  double k_n = gap / (std::pow(g, n) * run[n].law.r() * run[n + 1].law.r());
  CHECK(rel_err(k_n, k.value) < 1e-8);

  // Partial products K_n from (3.6) decrease once every r_i exceeds r_*.
  double log_kn = std::log((2 - 1) * 0.1 / 0.9);
  double last = log_kn;
  for (std::size_t i = 1; i < tail.excess.size(); ++i) {
    log_kn += std::log1p(-tail.excess[i] / (1 - rs));
    CHECK(log_kn <= last);
    last = log_kn;
  }

  CHECK_THROWS_AS(constant_K(iterate(GeometricTypeLaw<double>(0.5, 0.5), cfg(2), 3)),
                  RegimeMismatchError);
}

TEST_CASE("property: soundness of classification on random configurations") {
  drlab::testing::Gen gen(4242);
  for (int trial = 0; trial < 100; ++trial) {
    auto c = gen.config(1.2, 5.0);
    CAPTURE(c.m);
    CAPTURE(c.r0);
    CAPTURE(c.p0);
    ClassifyOptions opts;
    opts.budget = 20000;
    auto rep = classify(GeometricTypeLaw<double>(c.r0, c.p0), cfg(c.m), opts);
    const double thr = 1 - 1 / c.m;
    if (c.r0 <= thr - opts.delta) CHECK(rep.regime == Regime::Supercritical);
    switch (rep.regime) {
      case Regime::Supercritical:
        CHECK(rep.diagnostics.final_r <= thr - opts.delta);
        CHECK(rep.free_energy->value > 0);
        CHECK(rep.free_energy->relative_gap < 1e-10);
        CHECK(std::isfinite(rep.Q->value));
        break;
      case Regime::Subcritical:
        CHECK(rep.diagnostics.final_r > thr + opts.delta);
        CHECK(*rep.r_star > thr);
        CHECK(*rep.r_star < 1);
        CHECK(*rep.gamma_star > 0);
        CHECK(*rep.gamma_star < 1);
        CHECK(rep.K->value > 0);
        break;
      case Regime::NearCriticalUndetermined:
        break;
    }
  }
}

TEST_CASE("center manifold coefficients for m = 2") {
  CenterManifold<double> cm(2.0);
  const auto& a = cm.coefficients();
  CHECK(a[2] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(a[3] == doctest::Approx(-0.0625).epsilon(1e-15));
  CHECK(a[4] == doctest::Approx(0.0078125).epsilon(1e-14));
  CHECK(a[5] == doctest::Approx(0.005859375).epsilon(1e-13));

  // Invariance of the graph under the (y, D) map, to truncation order.
  const double m = 2, xc = 2;
  for (double y : {-1e-3, -5e-3, -1e-2}) {
    double d = cm(y);
    double y1 = y + d;
    double d1 = (m - m / (xc + y1)) * d;
    CHECK(std::abs(d1 - cm(y1)) < 1e-14 * d);
  }
}

TEST_CASE("critical_locate: preconditions") {
  CHECK_THROWS_AS(critical_locate(0.5, 1e-10, cfg(2)), ArgumentError);
  CHECK_THROWS_AS(critical_locate(0.3, 1e-10, cfg(2)), ArgumentError);
  CHECK_THROWS_AS(critical_locate(0.8, 1e-15, cfg(2)), PrecisionError);
}

TEST_CASE("critical_locate: bracket straddles the manifold in standard precision") {
  auto loc = critical_locate(0.8, 1e-12, cfg(2));
  CHECK(loc.bracket_width <= 1e-12);
  CHECK(loc.monotonicity_violations == 0);
  CHECK(loc.p0_critical == doctest::Approx(0.8669750979430282).epsilon(1e-11));

  ClassifyOptions opts;
  opts.budget = 1'000'000;
  opts.with_constants = false;
  auto below = classify(GeometricTypeLaw<double>(0.8, loc.bracket_lo - 1e-6), cfg(2), opts);
  auto above = classify(GeometricTypeLaw<double>(0.8, loc.bracket_hi + 1e-6), cfg(2), opts);
  CHECK(below.regime == Regime::Supercritical);
  CHECK(above.regime == Regime::Subcritical);

  CenterManifold<double> cm(2.0);
  CHECK(classify_side(GeometricTypeLaw<double>(0.8, loc.bracket_lo), cfg(2), cm, 1'000'000).side ==
        Side::Supercritical);
  CHECK(classify_side(GeometricTypeLaw<double>(0.8, loc.bracket_hi), cfg(2), cm, 1'000'000).side ==
        Side::Subcritical);
}

TEST_CASE("critical_locate: extended precision tracks the manifold") {
  ScopedPrecision scope(50);
  ModelConfig<Extended> config(Extended(2), Precision::extended(50));
  CHECK_THROWS_AS(critical_locate(Extended("0.8"), Extended("1e-49"), config), PrecisionError);
  auto loc = critical_locate(Extended("0.8"), Extended("1e-40"), config);
  CHECK(loc.bracket_width <= Extended("1e-40"));
  CHECK(loc.monotonicity_violations == 0);
  CHECK(abs(loc.p0_critical - Extended("0.866975097943028199356347286674176702825")) <
        Extended("1e-38"));

  // On the manifold r_n approaches 1/2 like 1/n for thousands of steps.
  auto traj = iterate(GeometricTypeLaw<Extended>(Extended("0.8"), loc.p0_critical), config, 4000);
  for (std::size_t n : {100u, 1000u, 4000u}) {
    double v = (traj[n].law.r() - Extended("0.5")).convert_to<double>();
    CHECK(v > 0);
    CHECK(v * n == doctest::Approx(1.0).epsilon(0.1));
  }
}

TEST_CASE("phase scan: supercritical region, determinism, consistency with critical_locate") {
  GridRange r0{0, 1, 20}, p0{0, 1, 20};
  ScanOptions opts;
  opts.threads = 1;
  auto serial = phase_scan(r0, p0, cfg(2), opts);
  opts.threads = 4;
  auto parallel = phase_scan(r0, p0, cfg(2), opts);
  REQUIRE(serial.size() == 400);
  for (std::size_t i = 0; i < serial.size(); ++i) {
    CHECK(serial[i].r0 == parallel[i].r0);
    CHECK(serial[i].p0 == parallel[i].p0);
    CHECK(serial[i].report.regime == parallel[i].report.regime);
    CHECK(serial[i].report.iterations_used == parallel[i].report.iterations_used);
    if (serial[i].r0 <= 0.5) CHECK(serial[i].report.regime == Regime::Supercritical);
  }
  CHECK(serial[0].r0 == doctest::Approx(0.025));
  CHECK(serial[1].p0 == doctest::Approx(0.075));

  for (std::size_t i = 0; i < r0.count; ++i) {
    double r = r0.at(i);
    if (r <= 0.5 + 1e-3) continue;
    double pc = critical_locate(r, 1e-10, cfg(2)).p0_critical;
    for (std::size_t j = 0; j < p0.count; ++j) {
      const auto& cell = serial[i * p0.count + j];
      if (cell.report.regime == Regime::NearCriticalUndetermined) continue;
      if (cell.p0 < pc) CHECK(cell.report.regime == Regime::Supercritical);
      if (cell.p0 > pc) CHECK(cell.report.regime == Regime::Subcritical);
    }
  }

  ScanOptions tiny;
  tiny.max_cells = 100;
  CHECK_THROWS_AS(phase_scan(GridRange{0, 1, 11}, GridRange{0, 1, 10}, cfg(2), tiny),
                  ResourceLimitError);
  CHECK_THROWS_AS(phase_scan(GridRange{0, 1.5, 10}, GridRange{0, 1, 10}, cfg(2)), ArgumentError);
}
