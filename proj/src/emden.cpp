#include "ch2/emden.hpp"
#include "num_format.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

namespace ch2::emden {

namespace {

struct Vec2 {
  double a;
  double v;
};

Vec2 operator+(Vec2 l, Vec2 r) { return {l.a + r.a, l.v + r.v}; }
Vec2 operator*(double k, Vec2 r) { return {k * r.a, k * r.v}; }

double sign_of(double x) { return x < 0.0 ? -1.0 : 1.0; }

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;
constexpr double a21 = 1.0 / 5.0;
constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                 a54 = -212.0 / 729.0;
constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                 a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0,
                 a75 = -2187.0 / 6784.0, a76 = 11.0 / 84.0;
constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                 e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

Vec2 field(double xi, Vec2 y) { return {y.v, xi / (3.0 * real_cbrt(y.a))}; }

}  // namespace

const char* to_string(Classification c) {
  return c == Classification::Collapse ? "Collapse" : "Global";
}

void EmdenParams::validate() const {
  if (!std::isfinite(xi) || !std::isfinite(a0) || !std::isfinite(a1))
    throw std::invalid_argument("Emden parameters must be finite");
  if (xi == 0.0) throw std::invalid_argument("xi must be nonzero (xi != 0)");
  if (a0 == 0.0) throw std::invalid_argument("initial value must satisfy a(0)=a0 != 0");
}

double rhs(const EmdenParams& p, const EmdenState& y) {
  if (y.a == 0.0) throw SingularEvaluation("Emden right-hand side is singular at a = 0 (collapse)");
  return p.xi / (3.0 * real_cbrt(y.a));
}

double energy(const EmdenParams& p, const EmdenState& y) {
  return 0.5 * y.a_dot * y.a_dot - 0.5 * p.xi * std::pow(std::abs(y.a), 2.0 / 3.0);
}

double initial_energy(const EmdenParams& p) { return energy(p, {0.0, p.a0, p.a1}); }

double energy_scale(const EmdenParams& p, const EmdenState& y) {
  return 0.5 * y.a_dot * y.a_dot + 0.5 * std::abs(p.xi) * std::pow(std::abs(y.a), 2.0 / 3.0);
}

EmdenState Trajectory::at(double s) const {
  if (!(s >= 0.0 && s <= s_max()))
    throw OutOfRange("s = " + detail::num(s) + " outside trajectory range [0, " +
                     detail::num(s_max()) + "]");
  auto it = std::upper_bound(states_.begin(), states_.end(), s,
                             [](double v, const EmdenState& st) { return v < st.s; });
  const auto i = static_cast<std::size_t>(std::distance(states_.begin(), it)) - 1;
  if (states_[i].s == s) return states_[i];

  const Segment& seg = segments_[i];
  const double th = (s - states_[i].s) / seg.h;
  const double th1 = 1.0 - th;
  std::array<double, 2> out{};
  for (int k = 0; k < 2; ++k) {
    out[k] = seg.c[0][k] +
             th * (seg.c[1][k] + th1 * (seg.c[2][k] + th * (seg.c[3][k] + th1 * seg.c[4][k])));
  }
  return {s, out[0], out[1]};
}

Trajectory integrate(const EmdenParams& p, double s_end, const IntegratorOptions& opts) {
  p.validate();
  if (!(s_end > 0.0) || !std::isfinite(s_end)) throw std::invalid_argument("s_end must be > 0");
  if (!(opts.tol > 0.0)) throw std::invalid_argument("tolerance must be > 0");

  const double sgn = sign_of(p.a0);
  const double tol = opts.tol;
  const double atol_a = tol * std::abs(p.a0);
  const double atol_v =
      tol * std::max(std::abs(p.a1), std::sqrt(std::abs(p.xi)) * std::cbrt(std::abs(p.a0)));
  const double a_stop = opts.stop_fraction * std::abs(p.a0);
  const double h_min = opts.min_step_factor * std::max(1.0, s_end);

  Trajectory traj;
  traj.params_ = p;
  traj.states_.push_back({0.0, p.a0, p.a1});

  double s = 0.0;
  Vec2 y{p.a0, p.a1};
  Vec2 k1 = field(p.xi, y);

  // Initial step from the ratio of solution to derivative magnitudes.
  double h = 0.0;
  {
    const double d0 = std::hypot(y.a / (atol_a + tol * std::abs(y.a)),
                                 y.v / (atol_v + tol * std::abs(y.v)));
    const double d1n = std::hypot(k1.a / (atol_a + tol * std::abs(y.a)),
                                  k1.v / (atol_v + tol * std::abs(y.v)));
    h = (d0 < 1e-5 || d1n < 1e-5) ? 1e-6 : 0.01 * d0 / d1n;
    h = std::min({h, s_end, 0.1 * std::max(1.0, s_end)});
  }

  auto stage_ok = [sgn](Vec2 v) { return std::isfinite(v.a) && std::isfinite(v.v) && v.a * sgn > 0.0; };

  bool last_rejected = false;
  std::size_t steps = 0;
  while (s < s_end) {
    if (++steps > opts.max_steps)
      throw IntegrationFailure("step budget exhausted", {s, y.a, y.v});

    bool final_step = false;
    if (h >= s_end - s) {
      h = s_end - s;
      final_step = true;
    }
    // Moving toward the origin: never cover more than half the linear
    // distance to a = 0 in one step.
    if (y.v * sgn < 0.0) {
      const double cap = 0.5 * std::abs(y.a) / std::abs(y.v);
      if (cap < h) {
        h = cap;
        final_step = false;
      }
    }
    if (h < h_min && !final_step)
      throw IntegrationFailure("step size underflow at s = " + detail::num(s), {s, y.a, y.v});

    // Stages. Any stage that reaches or crosses a = 0 rejects the step.
    const Vec2 y2 = y + (h * a21) * k1;
    if (!stage_ok(y2)) { h *= 0.25; last_rejected = true; continue; }
    const Vec2 k2 = field(p.xi, y2);
    const Vec2 y3 = y + h * (a31 * k1 + a32 * k2);
    if (!stage_ok(y3)) { h *= 0.25; last_rejected = true; continue; }
    const Vec2 k3 = field(p.xi, y3);
    const Vec2 y4 = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
    if (!stage_ok(y4)) { h *= 0.25; last_rejected = true; continue; }
    const Vec2 k4 = field(p.xi, y4);
    const Vec2 y5 = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    if (!stage_ok(y5)) { h *= 0.25; last_rejected = true; continue; }
    const Vec2 k5 = field(p.xi, y5);
    const Vec2 y6 = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    if (!stage_ok(y6)) { h *= 0.25; last_rejected = true; continue; }
    const Vec2 k6 = field(p.xi, y6);
    const Vec2 y_new = y + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
    if (!stage_ok(y_new)) { h *= 0.25; last_rejected = true; continue; }
    const Vec2 k7 = field(p.xi, y_new);

    const Vec2 e = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    const double sc_a = atol_a + tol * std::max(std::abs(y.a), std::abs(y_new.a));
    const double sc_v = atol_v + tol * std::max(std::abs(y.v), std::abs(y_new.v));
    const double err = std::sqrt(0.5 * ((e.a / sc_a) * (e.a / sc_a) + (e.v / sc_v) * (e.v / sc_v)));
    if (!std::isfinite(err)) { h *= 0.25; last_rejected = true; continue; }

    const double fac = err > 0.0 ? 0.9 * std::pow(err, -0.2) : 5.0;
    if (err > 1.0) {
      h *= std::max(0.2, fac);
      last_rejected = true;
      continue;
    }

    Trajectory::Segment seg{};
    seg.h = h;
    const Vec2 dy{y_new.a - y.a, y_new.v - y.v};
    const Vec2 bspl{h * k1.a - dy.a, h * k1.v - dy.v};
    const Vec2 dd = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
    const std::array<Vec2, 5> coeff{y, dy, bspl, Vec2{dy.a - h * k7.a - bspl.a, dy.v - h * k7.v - bspl.v}, dd};
    for (int r = 0; r < 5; ++r) {
      seg.c[r][0] = coeff[r].a;
      seg.c[r][1] = coeff[r].v;
    }
    traj.segments_.push_back(seg);

    s = final_step ? s_end : s + h;
    y = y_new;
    k1 = k7;
    traj.states_.push_back({s, y.a, y.v});

    if (std::abs(y.a) <= a_stop) {
      traj.stop_ = StopReason::Collapse;
      return traj;
    }

    const double grow = last_rejected ? std::min(1.0, fac) : std::min(5.0, fac);
    h *= std::max(0.2, grow);
    last_rejected = false;
  }
  traj.stop_ = StopReason::ReachedEnd;
  return traj;
}

Classification classify(const EmdenParams& p) {
  p.validate();
  if (p.xi < 0.0) return Classification::Collapse;
  const double inward = p.a1 * sign_of(p.a0);
  if (inward < 0.0 && initial_energy(p) >= 0.0) return Classification::Collapse;
  return Classification::Global;
}

std::optional<double> turning_magnitude(const EmdenParams& p) {
  p.validate();
  const double b1 = p.a1 * sign_of(p.a0);
  const double theta = initial_energy(p);
  const bool outward_bound = p.xi < 0.0 && b1 >= 0.0;
  const bool inward_bounce = p.xi > 0.0 && b1 <= 0.0 && theta < 0.0;
  if (!outward_bound && !inward_bounce) return std::nullopt;
  if (b1 == 0.0) return std::abs(p.a0);
  return std::pow(-2.0 * theta / p.xi, 1.5);
}

double singular_orbit_integral(double theta, double lo, double hi) {
  if (!(theta > 0.0)) throw std::domain_error("orbit integral needs theta > 0");
  const double rt = std::sqrt(theta);
  if (!(lo >= 0.0 && lo <= hi && hi <= rt))
    throw std::invalid_argument("orbit integral limits must satisfy 0 <= lo <= hi <= sqrt(theta)");
  if (lo == hi) return 0.0;
  // The two-argument form hands over the distance to the nearer endpoint,
  // which keeps sqrt(theta) - x exact near the singular end.
  auto f = [rt, hi](double x, double xc) {
    const double gap = xc > 0.0 ? (rt - hi) + xc : rt - x;
    if (gap <= 0.0) return 0.0;
    return x * x / std::sqrt(gap * (rt + x));
  };
  boost::math::quadrature::tanh_sinh<double> ts;
  return ts.integrate(f, lo, hi, 1e-15);
}

double collapse_time_quadrature(const EmdenParams& p) {
  if (classify(p) != Classification::Collapse)
    throw std::invalid_argument("collapse time requested for a globally existing orbit");
  const double theta = initial_energy(p);
  const double b0 = std::abs(p.a0);
  const double b1 = p.a1 * sign_of(p.a0);
  const double c = std::sqrt(0.5 * std::abs(p.xi));
  const double jacobian = 3.0 / (std::sqrt(2.0) * c * c * c);
  const double g0 = c * std::cbrt(b0);

  if (p.xi > 0.0) {
    // Inward orbit with theta >= 0: d|a|/ds never vanishes, regular integrand.
    auto f = [theta](double g) {
      const double r = std::sqrt(theta + g * g);
      return r > 0.0 ? g * g / r : 0.0;
    };
    return jacobian * boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, 0.0, g0, 15, 1e-15);
  }

  if (!(theta > 0.0)) throw std::domain_error("collapsing orbit with non-positive energy");
  const double rt = std::sqrt(theta);
  const double g_start = std::min(g0, rt);
  if (b1 <= 0.0) return jacobian * singular_orbit_integral(theta, 0.0, g_start);
  return jacobian * (singular_orbit_integral(theta, g_start, rt) + singular_orbit_integral(theta, 0.0, rt));
}

std::optional<double> detect_collapse(const Trajectory& traj) {
  if (traj.stop_reason() != StopReason::Collapse) return std::nullopt;
  const auto& p = traj.params();
  const EmdenState& end = traj.last();
  const double theta = initial_energy(p);
  const double b = std::abs(end.a);
  if (theta > 0.0) return end.s + b / std::sqrt(2.0 * theta);
  // theta == 0 (xi > 0): |a|^{2/3} decreases linearly at rate (2/3) sqrt(xi).
  return end.s + 1.5 * std::pow(b, 2.0 / 3.0) / std::sqrt(p.xi);
}

double growth_constant(double xi) {
  if (!(xi > 0.0)) throw std::invalid_argument("growth constant needs xi > 0");
  return std::pow(4.0 * xi / 9.0, 0.75);
}

double growth_asymptote(const Trajectory& traj) {
  if (!(traj.params().xi > 0.0)) throw std::invalid_argument("growth asymptote needs xi > 0");
  if (traj.stop_reason() == StopReason::Collapse)
    throw std::domain_error("growth asymptote of a collapsing trajectory");
  const EmdenState& end = traj.last();
  return end.a / std::pow(end.s, 1.5);
}

BlowupReport make_report(const Trajectory& traj) {
  const auto& p = traj.params();
  BlowupReport r;
  r.classification = classify(p);
  r.theta = initial_energy(p);
  r.a_turning = turning_magnitude(p);
  if (r.classification == Classification::Collapse) {
    r.s_collapse_numeric = detect_collapse(traj);
    if (!r.s_collapse_numeric)
      throw std::invalid_argument("trajectory ends at s = " + detail::num(traj.s_max()) +
                                  " before reaching the collapse");
    r.s_collapse_quadrature = collapse_time_quadrature(p);
    if (r.theta > 0.0) r.rate_limit_estimate = std::pow(2.0 * r.theta, -1.0 / 6.0);
  }
  return r;
}

Analysis analyze(const EmdenParams& p, double s_end_global, const IntegratorOptions& opts) {
  double s_end = s_end_global;
  if (classify(p) == Classification::Collapse) s_end = 2.0 * collapse_time_quadrature(p) + 1.0;
  Trajectory traj = integrate(p, s_end, opts);
  BlowupReport report = make_report(traj);
  return {std::move(traj), report};
}

}  // namespace ch2::emden
