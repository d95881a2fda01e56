#include "doctest.h"

#include "drlab/asymptotics.hpp"
#include "drlab/errors.hpp"

#include <cmath>

using namespace drlab;

namespace {

struct SuperRun {
  Trajectory<Extended> traj;
  SupercriticalConstants<Extended> constants;
};

SuperRun supercritical_half(std::size_t steps) {
  ModelConfig<Extended> config(Extended(2), Precision::extended(60));
  auto traj = iterate(GeometricTypeLaw<Extended>(Extended("0.5"), Extended("0.5")), config, steps);
  auto fe = free_energy(traj);
  auto q = constant_Q(traj);
  Extended q_sum = 0;
  Trajectory<Extended> longer = traj;
  longer.extend(200);
  for (std::size_t i = 1; i < longer.size(); ++i) q_sum += *longer[i].q_next;
  return {traj, {Extended(2), fe.value, q.value, Extended(1), q_sum}};
}

double d(const Extended& x) { return x.convert_to<double>(); }

}  // namespace

TEST_CASE("supercritical expansion: leading order and substitution") {
  ModelConfig<double> config(2);
  auto traj = iterate(GeometricTypeLaw<double>(0.5, 0.5), config, 100);
  auto fe = free_energy(traj);
  SupercriticalConstants<double> c{2, fe.value, constant_Q(traj).value, 1.0, std::nullopt};

  auto e0 = expand_supercritical<double>(0, c);
  CHECK(std::exp(e0.log_scale) * e0.r_terms[0] == doctest::Approx(1 / fe.value));

  for (std::size_t n : {40u, 100u}) {
    auto e = expand_supercritical<double>(n, c);
    double leading_ratio = std::exp(traj[n].law.log_r() - e.log_scale);
    CHECK(std::abs(leading_ratio - 1) < 1e-8);
  }
  // The printed p-expansion has p_pred / (n r_pred) -> m.
  auto big = expand_supercritical<double>(1000, c);
  double ratio = big.p_pred() / (1000 * big.r_pred());
  CHECK(ratio == doctest::Approx(2.0).epsilon(1e-2));

  CHECK_THROWS_AS(expand_supercritical<double>(5, c, Variant::Corrected), ArgumentError);
}

TEST_CASE("supercritical expansion: corrected terms converge, printed ones do not") {
  ScopedPrecision scope(60);
  auto run = supercritical_half(170);
  Extended prev_r = 1, prev_p = 1;
  for (std::size_t n : {20u, 40u, 80u, 160u}) {
    CAPTURE(n);
    const auto& law = run.traj[n].law;
    auto corr = expand_supercritical(n, run.constants, Variant::Corrected);
    auto printed = expand_supercritical(n, run.constants, Variant::Printed);
    Extended r_scaled = exp(law.log_r() - corr.log_scale);
    Extended p_scaled = law.p() * exp(-corr.log_scale);

    auto cr = compare(n, r_scaled, corr.r_terms);
    auto cp = compare(n, p_scaled, corr.p_terms);
    CHECK(abs(cr.normalized_residual) < prev_r);
    CHECK(abs(cp.normalized_residual) < prev_p);
    prev_r = abs(cr.normalized_residual);
    prev_p = abs(cp.normalized_residual);

    auto pr = compare(n, r_scaled, printed.r_terms);
    CHECK(d(pr.normalized_residual) == doctest::Approx(0.5).epsilon(0.05));
  }
  CHECK(prev_r < Extended("1e-3"));
  CHECK(prev_p < Extended("0.02"));
}

TEST_CASE("subcritical expansion: first order, degenerate K, second-order residual ordering") {
  SubcriticalConstants<double> c{2, 0.77355461807830453, 0.07678205647092164};
  const double g = c.gamma();
  for (std::size_t n : {5u, 30u}) {
    auto e = expand_subcritical<double>(n, c);
    CHECK(e.r_terms[0] / std::pow(g, n) ==
          doctest::Approx(c.K * c.r_star * c.r_star / (1 - g)).epsilon(1e-14));
  }
  auto zero = expand_subcritical<double>(10, {2, 0.8, 0.0});
  CHECK(zero.r_pred() == 0.8);
  CHECK(zero.p_pred() == 1.0);

  ScopedPrecision scope(120);
  ModelConfig<Extended> config(Extended(2), Precision::extended(120));
  auto traj = iterate(GeometricTypeLaw<Extended>(Extended("0.9"), Extended("0.9")), config, 120);
  auto tail = subcritical_tail(traj, 120);
  auto k = constant_K(traj, tail);
  SubcriticalConstants<Extended> ce{Extended(2), tail.r_star, k.value};
  auto norm_r = [&](std::size_t n) -> Extended {
    return abs(compare(n, tail.excess[n], expand_subcritical(n, ce).r_terms).normalized_residual);
  };
  auto norm_p = [&](std::size_t n) -> Extended {
    Extended dev = -survival(traj[n].law);
    return abs(compare(n, dev, expand_subcritical(n, ce).p_terms).normalized_residual);
  };
  CHECK(norm_r(80) * 10 <= norm_r(40));
  CHECK(norm_p(80) * 10 <= norm_p(40));
  CHECK(norm_r(40) < Extended("1e-10"));
}

TEST_CASE("critical expansion: argument check and leading behaviour") {
  CHECK_THROWS_AS(expand_critical<double>(1, 2.0), ArgumentError);
  CHECK_THROWS_AS(expand_critical<double>(0, 2.0), ArgumentError);
  for (double m : {1.5, 2.0, 4.0}) {
    auto e = expand_critical<double>(1'000'000, m);
    CHECK(1e6 * (e.r_pred() - (1 - 1 / m)) == doctest::Approx(2 / m).epsilon(1e-4));
    double lead = 2 / ((m - 1) * (m - 1) * 1e12);
    CHECK(e.one_minus_p_pred() / lead == doctest::Approx(1.0).epsilon(1e-4));
  }
  CHECK(expand_critical<double>(10'000'000, 2.0).r_pred() == doctest::Approx(0.5).epsilon(1e-6));

  auto printed = expand_critical<double>(100, 2.0, Variant::Printed);
  auto corrected = expand_critical<double>(100, 2.0, Variant::Corrected);
  CHECK(printed.r_terms == corrected.r_terms);
  CHECK(printed.p_terms[1] == -corrected.p_terms[1]);
}

TEST_CASE("corollary values: normalization, radii and leading terms") {
  SubcriticalConstants<double> sub{2, 0.77355461807830453, 0.07678205647092164};
  SupercriticalConstants<double> sup{2, 0.3367826959880809, 3.170457682336034, 1.0, 2.3};
  CriticalConstants<double> crit{2};

  for (auto v : {Variant::Printed, Variant::Corrected}) {
    CHECK(*corollary_values<double>(20, sub, 1.0, v).pgf_pred == 1.0);
    CHECK(*corollary_values<double>(20, crit, 1.0, v).pgf_pred == 1.0);
  }
  CHECK_THROWS_AS(corollary_values<double>(20, sup, 1.0), DomainError);
  CHECK_THROWS_AS(corollary_values<double>(20, crit, 2.0), DomainError);
  CHECK_THROWS_AS(corollary_values<double>(20, sub, 1 / (1 - sub.r_star)), DomainError);
  CHECK_THROWS_AS(corollary_values<double>(1, crit), ArgumentError);
  CHECK_NOTHROW(corollary_values<double>(20, crit, 1.99));

  const double n = 1e6;
  auto cv = corollary_values<double>(1'000'000, crit);
  CHECK(cv.mean_pred * n * n / 4 == doctest::Approx(1.0).epsilon(1e-4));
  CHECK((*cv.pgf_at_m_pred - 1) * n == doctest::Approx(1.0).epsilon(1e-4));

  auto sv = corollary_values<double>(200, sub);
  CHECK(sv.mean_pred / (sub.K * std::pow(sub.gamma(), 200)) == doctest::Approx(1.0).epsilon(1e-12));

  // At s = 0 the supercritical pgf expansion reproduces the p_n expansion.
  auto at_zero = corollary_values<double>(30, sup, 0.0);
  auto p_exp = expand_supercritical<double>(30, sup);
  CHECK(*at_zero.pgf_pred == doctest::Approx(p_exp.p_pred()).epsilon(1e-15));
}

TEST_CASE("corrected subcritical corollaries beat the printed ones on an exact run") {
  ScopedPrecision scope(100);
  ModelConfig<Extended> config(Extended(2), Precision::extended(100));
  auto traj = iterate(GeometricTypeLaw<Extended>(Extended("0.9"), Extended("0.9")), config, 60);
  auto tail = subcritical_tail(traj, 60);
  SubcriticalConstants<Extended> c{Extended(2), tail.r_star, constant_K(traj, tail).value};
  const std::size_t n = 60;
  auto corr = corollary_values<Extended>(n, c, Extended("0.5"), Variant::Corrected);
  auto printed = corollary_values<Extended>(n, c, Extended("0.5"), Variant::Printed);
  Extended surv = survival(traj[n].law);
  Extended mu = mean(traj[n].law);
  CHECK(abs(corr.survival_pred / surv - 1) < Extended("1e-30"));
  CHECK(abs(printed.survival_pred / surv - 1) > Extended("1e-25"));
  CHECK(abs(corr.mean_pred / mu - 1) < Extended("1e-30"));
  CHECK(abs(printed.mean_pred / mu - 1) > Extended("1e-25"));
  Extended exact_pgf = pgf(traj[n].law, Extended("0.5"));
  CHECK(abs((*corr.pgf_pred - exact_pgf) / (1 - exact_pgf)) < Extended("1e-30"));
}

TEST_CASE("sequence acceleration") {
  std::vector<double> geometric;
  for (int k = 0; k < 12; ++k) geometric.push_back(3.0 + 0.5 * std::pow(0.6, k));
  auto lim = aitken_limit(geometric);
  REQUIRE(lim);
  CHECK(*lim == doctest::Approx(3.0).epsilon(1e-12));
  CHECK_FALSE(aitken_limit(std::vector<double>{1.0, 2.0}));

  std::vector<double> flat(6, 2.0);
  CHECK_FALSE(aitken_limit(flat));

  auto v = compare<double>(3, 1.5, {1.0, 0.25});
  CHECK(v.predicted == 1.25);
  CHECK(v.normalized_residual == doctest::Approx(1.0));
}

TEST_CASE("coefficient estimators: supercritical p-coefficient and subcritical ratio") {
  ModelConfig<double> config(2);
  auto sup = iterate(GeometricTypeLaw<double>(0.5, 0.5), config, 200);
  auto est = estimate_coefficients(sup, EstimatorTarget::SupercriticalPCoef);
  REQUIRE(est.richardson);
  CHECK(std::abs(*est.richardson - 1) < 1e-3);
  CHECK(std::abs(*est.richardson - 2) > 0.9);
  CHECK(est.values.size() == 200);

  auto sub = iterate(GeometricTypeLaw<double>(0.9, 0.9), config, 300);
  auto tail = subcritical_tail(sub, 300);
  auto k = constant_K(sub, tail);
  const double target = k.value * tail.r_star * tail.r_star / (1 - tail.gamma_star);
  auto ratio = estimate_coefficients(sub, EstimatorTarget::SubcriticalRatio, {80, 20});
  for (double v : ratio.values) CHECK(std::abs(v / target - 1) < 1e-6);

  CHECK_THROWS_AS(estimate_coefficients(iterate(GeometricTypeLaw<double>(0.5, 0.5), config, 5),
                                        EstimatorTarget::CriticalNv),
                  InsufficientLengthError);
  CHECK_THROWS_AS(estimate_coefficients(sup, EstimatorTarget::SubcriticalRatio),
                  RegimeMismatchError);
  try {
    estimate_coefficients(iterate(GeometricTypeLaw<double>(0.5, 0.5), config, 8),
                          EstimatorTarget::CriticalDifference);
    FAIL("expected InsufficientLengthError");
  } catch (const InsufficientLengthError& e) {
    CHECK(e.min_length() == 9);
  }
}

TEST_CASE("coefficient estimators: critical run in extended precision") {
  ScopedPrecision scope(40);
  ModelConfig<Extended> config(Extended(2), Precision::extended(40));
  auto loc = critical_locate(Extended("0.8"), Extended("1e-32"), config);
  auto traj = iterate(GeometricTypeLaw<Extended>(Extended("0.8"), loc.p0_critical), config, 800);
  auto nv = estimate_coefficients(traj, EstimatorTarget::CriticalNv, {100, 100});
  for (std::size_t i = 1; i < nv.values.size(); ++i) CHECK(nv.values[i] > nv.values[i - 1]);
  CHECK(abs(nv.values.back() - 1) < Extended("0.03"));
  CHECK(abs(*nv.richardson - 1) < Extended("0.01"));

  auto diff = estimate_coefficients(traj, EstimatorTarget::CriticalDifference, {100, 100});
  CHECK(abs(diff.values.back() / 2 - 1) < Extended("0.1"));
  auto pgf_m = estimate_coefficients(traj, EstimatorTarget::CriticalPgfAtM, {100, 100});
  CHECK(abs(pgf_m.values.back() - 1) < Extended("0.05"));
}

TEST_CASE("constants from a trajectory match directly measured values") {
  auto run = supercritical_half(40);
  auto measured = constants_from_trajectory(run.traj, Regime::Supercritical);
  const auto& sc = std::get<SupercriticalConstants<Extended>>(measured);
  CHECK(abs(sc.F - run.constants.F) < Extended("1e-50"));
  CHECK(abs(sc.Q - run.constants.Q) < Extended("1e-50"));
  CHECK(sc.p0_over_r0 == 1);
  REQUIRE(sc.q_sum);
  CHECK(abs(*sc.q_sum - *run.constants.q_sum) < Extended("1e-50"));
  CHECK(d(sc.F) == doctest::Approx(0.33678269598808097).epsilon(1e-15));
  CHECK(d(sc.Q) == doctest::Approx(3.1704576823360342).epsilon(1e-15));

  ModelConfig<double> config(2.0);
  auto sub = iterate(GeometricTypeLaw<double>(0.9, 0.9), config, 200);
  auto sub_measured = constants_from_trajectory(sub, Regime::Subcritical);
  const auto& sb = std::get<SubcriticalConstants<double>>(sub_measured);
  CHECK(sb.r_star == doctest::Approx(0.77355461807830428).epsilon(1e-14));
  CHECK(sb.K == doctest::Approx(0.07678205647092165).epsilon(1e-12));

  auto crit = constants_from_trajectory(sub, Regime::NearCriticalUndetermined);
  CHECK(std::get<CriticalConstants<double>>(crit).m == 2.0);
}

TEST_CASE("expansion table samples the requested indices") {
  auto run = supercritical_half(60);
  auto constants = constants_from_trajectory(run.traj, Regime::Supercritical);
  auto printed = expansion_table(run.traj, constants, Variant::Printed, {10, 10});
  auto corrected = expansion_table(run.traj, constants, Variant::Corrected, {10, 10});
  REQUIRE(printed.size() == 6);
  REQUIRE(corrected.size() == 6);
  for (std::size_t i = 0; i < printed.size(); ++i) {
    const std::size_t n = 10 * (i + 1);
    CHECK(printed[i].n == n);
    CHECK(printed[i].r == run.traj[n].law.r());
    // exact deviations do not depend on the variant
    CHECK(abs(printed[i].p_cmp.exact - corrected[i].p_cmp.exact) <
          Extended("1e-50") * abs(corrected[i].p_cmp.exact));
  }
  const auto& last = corrected.back();
  CHECK(abs(last.r_cmp.normalized_residual) < Extended("1e-3"));
  // the next p term is of order n/(F m^n), so the normalized residual decays like 1/n
  CHECK(abs(last.p_cmp.normalized_residual) < Extended("0.1"));
  CHECK(abs(last.p_cmp.normalized_residual) < abs(corrected[2].p_cmp.normalized_residual) * 0.6);
  CHECK(abs(printed.back().p_cmp.normalized_residual) > 1);
  CHECK(abs(corrected[5].p_cmp.abs_residual) < abs(corrected[2].p_cmp.abs_residual));

  ModelConfig<double> config(2.0);
  auto sub = iterate(GeometricTypeLaw<double>(0.9, 0.9), config, 60);
  auto sub_constants = constants_from_trajectory(sub, Regime::Subcritical);
  auto rows = expansion_table(sub, sub_constants, Variant::Printed, {5, 5});
  REQUIRE(rows.size() == 12);
  const auto& sc = std::get<SubcriticalConstants<double>>(sub_constants);
  for (const auto& row : rows) {
    CHECK(row.r_cmp.exact == doctest::Approx(row.r - sc.r_star).epsilon(1e-6));
    CHECK(row.p_cmp.exact == doctest::Approx(-(1 - row.p)).epsilon(1e-12));
  }

  auto crit = expansion_table(sub, RegimeConstants<double>{CriticalConstants<double>{2.0}},
                              Variant::Printed, {1, 1});
  CHECK(crit.front().n == 2);
  CHECK_THROWS_AS(expansion_table(sub, sub_constants, Variant::Printed, {1, 0}), ArgumentError);
}
