#include <cmath>
#include <numbers>
#include <random>

#include <doctest.h>

#include "ch2/emden.hpp"

using namespace ch2::emden;

namespace {

// Collapse times from tests/oracles/collapse_times.py (mpmath, 30 digits),
// working directly with the first-integral quadrature in |a|.
struct FrozenCollapse {
  double xi, a0, a1, S;
};
constexpr FrozenCollapse kFrozen[] = {
    {-3.0, 1.0, 0.0, 1.3603495231756633879},
    {-3.0, -1.0, 0.0, 1.3603495231756633879},
    {-3.0, 1.0, 1.0, 2.9183991523122904675},
    {-1.0, 1.0, 0.0, 2.3561944901923449288},
    {-2.0, 2.0, -1.0, 1.4005319345833032362},
    {-0.5, -3.0, 2.0, 1.4296097121019038844},
    {1.0, 1.0, -10.0, 0.10020086193527627559},
    {-4.0, 0.5, 3.0, 6.6274414944153667557},
};

// Antiderivative of x^2 / sqrt(theta - x^2).
double orbit_antiderivative(double theta, double x) {
  return 0.5 * theta * std::asin(x / std::sqrt(theta)) - 0.5 * x * std::sqrt(theta - x * x);
}

double max_drift(const Trajectory& traj) {
  const auto& p = traj.params();
  const double e0 = initial_energy(p);
  double worst = 0.0;
  for (const auto& st : traj.states()) {
    const double scale = std::max(1.0 + std::abs(e0), energy_scale(p, st));
    worst = std::max(worst, std::abs(energy(p, st) - e0) / scale);
  }
  return worst;
}

}  // namespace

TEST_CASE("rhs uses the real cube root") {
  CHECK(rhs({3.0, 1.0, 0.0}, {0.0, 1.0, 0.0}) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(rhs({3.0, 1.0, 0.0}, {0.0, -1.0, 0.0}) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(rhs({-3.0, 1.0, 0.0}, {0.0, 8.0, 0.0}) == doctest::Approx(-0.5).epsilon(1e-15));
  CHECK_THROWS_AS(rhs({-3.0, 1.0, 0.0}, {0.0, 0.0, 0.0}), SingularEvaluation);
}

TEST_CASE("energy") {
  CHECK(energy({-3.0, 1.0, 0.0}, {0.0, 1.0, 0.0}) == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(energy({2.0, 1.0, 2.0}, {0.0, 1.0, 2.0}) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(initial_energy({-3.0, 1.0, 0.0}) == doctest::Approx(1.5).epsilon(1e-15));

  const EmdenParams p{-3.0, 1.0, 0.0};
  const auto traj = integrate(p, 2.0);
  for (const auto& st : traj.states()) CHECK(std::abs(energy(p, st) - 1.5) <= 1e-8 * 2.5);
}

TEST_CASE("parameter validation") {
  CHECK_THROWS_AS(EmdenParams({0.0, 1.0, 0.0}).validate(), std::invalid_argument);
  CHECK_THROWS_WITH_AS(EmdenParams({1.0, 0.0, 0.0}).validate(), doctest::Contains("a(0)=a0 != 0"),
                       std::invalid_argument);
  CHECK_THROWS_AS(EmdenParams({1.0, NAN, 0.0}).validate(), std::invalid_argument);
  CHECK_THROWS_AS(EmdenParams({1.0, 1.0, INFINITY}).validate(), std::invalid_argument);
  CHECK_THROWS_AS(integrate({1.0, 1.0, 0.0}, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(integrate({1.0, 1.0, 0.0}, 1.0, -1e-10), std::invalid_argument);
  CHECK_THROWS_AS(integrate({1.0, 0.0, 0.0}, 1.0), std::invalid_argument);
}

TEST_CASE("integrate: growth from rest is strictly increasing") {
  const auto traj = integrate({2.0, 1.0, 0.0}, 50.0);
  CHECK(traj.stop_reason() == StopReason::ReachedEnd);
  CHECK(traj.s_max() == 50.0);
  const auto st = traj.states();
  for (std::size_t i = 1; i < st.size(); ++i) {
    CHECK(st[i].s > st[i - 1].s);
    CHECK(st[i].a > st[i - 1].a);
  }
}

TEST_CASE("integrate: halts at the collapse") {
  const auto traj = integrate({-3.0, 1.0, 0.0}, 2.0);
  CHECK(traj.stop_reason() == StopReason::Collapse);
  CHECK(traj.s_max() == doctest::Approx(1.36035).epsilon(1e-5));
  CHECK(std::abs(traj.last().a) <= 1e-10);
  CHECK(traj.last().a > 0.0);
}

TEST_CASE("integrate: step underflow raises with the last state") {
  IntegratorOptions o;
  o.tol = 1e-300;
  try {
    (void)integrate({1.0, 1.0, -10.0}, 1.0, o);
    FAIL("expected IntegrationFailure");
  } catch (const IntegrationFailure& e) {
    CHECK(e.last_state.a > 0.0);
    CHECK(std::isfinite(e.last_state.a_dot));
  }
}

TEST_CASE("trajectory dense output") {
  const EmdenParams p{-1.0, 1.0, 0.5};
  const auto traj = integrate(p, 10.0);
  for (const auto& st : traj.states()) {
    const auto e = traj.at(st.s);
    CHECK(e.a == st.a);
    CHECK(e.a_dot == st.a_dot);
  }
  CHECK_THROWS_AS(traj.at(-1e-3), OutOfRange);
  CHECK_THROWS_AS(traj.at(traj.s_max() * 1.001), OutOfRange);

  // Between nodes: compare against a much tighter integration.
  IntegratorOptions tight;
  tight.tol = 1e-13;
  const auto ref = integrate(p, 10.0, tight);
  const double stop = 0.95 * traj.s_max();
  for (int k = 1; k < 200; ++k) {
    const double s = stop * k / 200.0;
    CHECK(std::abs(traj.at(s).a - ref.at(s).a) <= 1e-7);
    CHECK(std::abs(traj.at(s).a_dot - ref.at(s).a_dot) <= 1e-6);
  }
}

TEST_CASE("odd symmetry is exact") {
  for (const EmdenParams p : {EmdenParams{-3.0, 1.0, 1.0}, EmdenParams{2.0, 0.5, -0.3}}) {
    const auto plus = integrate(p, 20.0);
    const auto minus = integrate({p.xi, -p.a0, -p.a1}, 20.0);
    REQUIRE(plus.states().size() == minus.states().size());
    for (std::size_t i = 0; i < plus.states().size(); ++i) {
      CHECK(plus.states()[i].s == minus.states()[i].s);
      CHECK(plus.states()[i].a == -minus.states()[i].a);
      CHECK(plus.states()[i].a_dot == -minus.states()[i].a_dot);
    }
    CHECK(plus.at(0.37 * plus.s_max()).a == -minus.at(0.37 * plus.s_max()).a);
  }
}

TEST_CASE("classify") {
  CHECK(classify({-1.0, 1.0, 5.0}) == Classification::Collapse);
  CHECK(classify({1.0, -1.0, 0.0}) == Classification::Global);
  CHECK(classify({1.0, 1.0, 0.0}) == Classification::Global);
  // Inward slope strong enough for nonnegative energy: reaches a = 0 even
  // though xi > 0.
  CHECK(classify({1.0, 1.0, -10.0}) == Classification::Collapse);
  CHECK(classify({1.0, -1.0, 10.0}) == Classification::Collapse);
  // Inward slope with negative energy: bounces at a positive turning point.
  CHECK(classify({1.0, 1.0, -0.5}) == Classification::Global);
  CHECK(std::string(to_string(Classification::Collapse)) == "Collapse");
  CHECK(std::string(to_string(Classification::Global)) == "Global");
}

TEST_CASE("global orbit that dips and grows") {
  const EmdenParams p{1.0, 1.0, -0.5};
  const auto traj = integrate(p, 100.0);
  CHECK(traj.stop_reason() == StopReason::ReachedEnd);
  double lo = 1.0;
  for (int k = 0; k <= 200000; ++k) lo = std::min(lo, traj.at(5.0 * k / 200000).a);
  REQUIRE(turning_magnitude(p).has_value());
  CHECK(lo == doctest::Approx(*turning_magnitude(p)).epsilon(1e-9));
  CHECK(lo > 0.0);
  CHECK(traj.last().a > 100.0);
}

TEST_CASE("turning magnitude") {
  // xi < 0, outward slope: max |a| where a_dot = 0, (-2 theta / xi)^{3/2}.
  const EmdenParams p{-3.0, 1.0, 1.0};
  const double theta = initial_energy(p);
  REQUIRE(turning_magnitude(p).has_value());
  CHECK(*turning_magnitude(p) == doctest::Approx(std::pow(-2.0 * theta / p.xi, 1.5)).epsilon(1e-14));
  CHECK_FALSE(turning_magnitude({-3.0, 1.0, -1.0}).has_value());
  CHECK_FALSE(turning_magnitude({1.0, 1.0, 1.0}).has_value());
}

TEST_CASE("collapse time quadrature against frozen oracle values") {
  for (const auto& f : kFrozen) {
    CAPTURE(f.xi);
    CAPTURE(f.a0);
    CAPTURE(f.a1);
    CHECK(collapse_time_quadrature({f.xi, f.a0, f.a1}) == doctest::Approx(f.S).epsilon(1e-12));
  }
  CHECK(collapse_time_quadrature({-3.0, 1.0, 0.0}) ==
        doctest::Approx(std::sqrt(3.0) * std::numbers::pi / 4.0).epsilon(1e-13));
  CHECK_THROWS_AS(collapse_time_quadrature({1.0, 1.0, 0.0}), std::invalid_argument);
}

TEST_CASE("singular orbit integral") {
  for (const double theta : {0.5, 1.5, 7.0}) {
    const double full = singular_orbit_integral(theta, 0.0, std::sqrt(theta));
    CHECK(full == doctest::Approx(theta * std::numbers::pi / 4.0).epsilon(1e-13));
  }
  const double theta = 2.3;
  for (const double lo : {0.0, 0.4, 1.1}) {
    for (const double hi : {1.2, 1.45, std::sqrt(theta)}) {
      const double want = orbit_antiderivative(theta, hi) - orbit_antiderivative(theta, lo);
      CHECK(singular_orbit_integral(theta, lo, hi) == doctest::Approx(want).epsilon(1e-12));
    }
  }
  CHECK(singular_orbit_integral(theta, 0.7, 0.7) == 0.0);
  CHECK_THROWS_AS(singular_orbit_integral(-1.0, 0.0, 0.5), std::domain_error);
  CHECK_THROWS_AS(singular_orbit_integral(1.0, 0.5, 0.2), std::invalid_argument);
  CHECK_THROWS_AS(singular_orbit_integral(1.0, 0.0, 1.5), std::invalid_argument);
}

TEST_CASE("detect collapse") {
  for (const auto& f : kFrozen) {
    const EmdenParams p{f.xi, f.a0, f.a1};
    const auto traj = integrate(p, 2.0 * f.S + 1.0);
    const auto S = detect_collapse(traj);
    REQUIRE(S.has_value());
    CHECK(std::abs(*S - f.S) <= 1e-6);
  }
  CHECK_FALSE(detect_collapse(integrate({1.0, 1.0, 0.0}, 10.0)).has_value());
  // Stopped short of the collapse: nothing to report.
  CHECK_FALSE(detect_collapse(integrate({-3.0, 1.0, 0.0}, 1.0)).has_value());
}

TEST_CASE("growth asymptote") {
  CHECK(growth_constant(9.0 / 4.0) == doctest::Approx(1.0).epsilon(1e-15));
  const auto up = integrate({9.0 / 4.0, 1.0, 0.0}, 1e4);
  const auto down = integrate({9.0 / 4.0, -1.0, 0.0}, 1e4);
  CHECK(std::abs(growth_asymptote(up) - 1.0) <= 0.01);
  CHECK(std::abs(growth_asymptote(down) + 1.0) <= 0.01);
  CHECK(growth_asymptote(integrate({0.7, 2.0, -0.1}, 100.0)) > 0.0);
  CHECK_THROWS_AS(growth_asymptote(integrate({-1.0, 1.0, 0.0}, 1.0)), std::invalid_argument);
  CHECK_THROWS_AS(growth_constant(-1.0), std::invalid_argument);
}

TEST_CASE("analyze and report") {
  const auto an = analyze({-3.0, 1.0, 0.0}, 5.0);
  const auto& r = an.report;
  CHECK(r.classification == Classification::Collapse);
  CHECK(r.theta == 1.5);
  REQUIRE(r.s_collapse_numeric.has_value());
  REQUIRE(r.s_collapse_quadrature.has_value());
  CHECK(std::abs(*r.s_collapse_numeric - *r.s_collapse_quadrature) <= 1e-6);
  REQUIRE(r.rate_limit_estimate.has_value());
  CHECK(*r.rate_limit_estimate == doctest::Approx(std::pow(3.0, -1.0 / 6.0)).epsilon(1e-14));

  const auto g = analyze({1.0, 1.0, 0.0}, 5.0);
  CHECK(g.report.classification == Classification::Global);
  CHECK_FALSE(g.report.s_collapse_numeric.has_value());
  CHECK_FALSE(g.report.s_collapse_quadrature.has_value());
  CHECK(g.trajectory.s_max() == 5.0);

  CHECK_THROWS_AS(make_report(integrate({-3.0, 1.0, 0.0}, 1.0)), std::invalid_argument);
}

TEST_CASE("property: energy is conserved along random trajectories") {
  std::mt19937_64 rng(20261016);
  std::uniform_real_distribution<double> xi_d(0.2, 4.0), a0_d(0.1, 3.0), a1_d(-3.0, 3.0);
  for (int k = 0; k < 40; ++k) {
    const double sign = (k % 2) ? 1.0 : -1.0;
    const EmdenParams p{sign * xi_d(rng), (k % 3 ? 1.0 : -1.0) * a0_d(rng), a1_d(rng)};
    const auto an = analyze(p, 200.0);
    CAPTURE(p.xi);
    CAPTURE(p.a0);
    CAPTURE(p.a1);
    CHECK(max_drift(an.trajectory) <= 1e-8);
  }
}

TEST_CASE("property: dichotomy") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> xi_d(0.1, 5.0), a0_d(0.05, 5.0), a1_d(-5.0, 5.0);
  for (int k = 0; k < 30; ++k) {
    const EmdenParams p{-xi_d(rng), (k % 2 ? 1.0 : -1.0) * a0_d(rng), a1_d(rng)};
    const auto an = analyze(p, 1.0);
    REQUIRE(an.report.s_collapse_numeric.has_value());
    CHECK(std::isfinite(*an.report.s_collapse_numeric));
    CHECK(std::abs(*an.report.s_collapse_numeric - *an.report.s_collapse_quadrature) <= 1e-6);
  }
  for (int k = 0; k < 30; ++k) {
    const double a0 = (k % 2 ? 1.0 : -1.0) * a0_d(rng);
    EmdenParams p{xi_d(rng), a0, 0.0};
    // Inward slopes only below the energy threshold, otherwise the orbit
    // reaches a = 0.
    const double limit = std::sqrt(p.xi) * std::cbrt(std::abs(a0));
    std::uniform_real_distribution<double> in(0.0, 0.99 * limit);
    p.a1 = (k % 3 ? -1.0 : 1.0) * (a0 > 0 ? 1.0 : -1.0) * in(rng);
    REQUIRE(classify(p) == Classification::Global);
    const auto traj = integrate(p, 1e4);
    CHECK(std::abs(traj.last().a) > 1e3 * std::abs(a0));
  }
}
