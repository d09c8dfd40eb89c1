#include "ch2/verify.hpp"
#include "num_format.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace ch2::verify {

using emden::Classification;
using selfsim::SolutionCase;

using detail::num;

namespace {

// Differencing runs in extended precision. The velocity and the momentum
// use quad precision where available: the alpha_d^2 D_xx u term is roundoff
// amplified by alpha_d^2 / (dx^2 dt) and has to stay far below the
// dispersion-invariance tolerance. Both are plain arithmetic, so no quad math
// library is needed.
using Real = long double;
#if defined(__SIZEOF_FLOAT128__)
using Wide = __float128;
#else
using Wide = long double;
#endif

struct Fields {
  int nt = 0;
  int nx = 0;
  Real dt = 0;
  Real dx = 0;
  std::vector<Real> rho;
  std::vector<Wide> u;
  Wide wdt = 0;
  Wide wdx = 0;

  Real& r(int i, int j) { return rho[static_cast<std::size_t>(i) * nx + j]; }
  Wide& v(int i, int j) { return u[static_cast<std::size_t>(i) * nx + j]; }
};

emden::EmdenState checked_scale(const emden::Trajectory& traj, double t) {
  try {
    return selfsim::scale_at(traj, t);
  } catch (const emden::OutOfRange& e) {
    throw PreconditionError(std::string("grid time outside the trajectory (collapse or end reached): ") +
                            e.what());
  }
}

Fields sample_fields(const SolutionCase& c, const emden::Trajectory& traj, const SpaceTimeGrid& g,
                     double velocity_scale) {
  g.validate();
  Fields f;
  f.nt = g.nt;
  f.nx = g.nx;
  f.dt = (Real(g.t1) - Real(g.t0)) / (g.nt - 1);
  f.dx = (Real(g.x1) - Real(g.x0)) / (g.nx - 1);
  f.wdt = (Wide(g.t1) - Wide(g.t0)) / (g.nt - 1);
  f.wdx = (Wide(g.x1) - Wide(g.x0)) / (g.nx - 1);
  f.rho.resize(static_cast<std::size_t>(g.nt) * g.nx);
  f.u.resize(f.rho.size());

  const auto edge = c.eta_boundary();
  const double reach = std::max(std::abs(g.x0), std::abs(g.x1));
  for (int i = 0; i < g.nt; ++i) {
    const double t = g.t(i);
    const auto st = checked_scale(traj, t);
    if (edge && c.alpha() > 0.0) {
      const double xb = std::cbrt(st.a) * *edge;
      if (!(reach < xb))
        throw PreconditionError("grid reaches the support boundary at t = " + num(t) +
                                " (|x| <= " + num(reach) + ", support radius " +
                                num(xb) + ")");
    }
    const Real a = st.a;
    const Real a_dot = st.a_dot;
    for (int j = 0; j < g.nx; ++j) {
      const Real x = Real(g.x0) + j * f.dx;
      f.r(i, j) = selfsim::density_at_scale<Real>(c, a, x);
      const Wide wx = Wide(g.x0) + j * f.wdx;
      f.v(i, j) = Wide(velocity_scale) * ((Wide(a_dot) / Wide(a)) * wx);
    }
  }
  return f;
}

struct Norms {
  Real max = 0;
  Real sum_sq = 0;
  long count = 0;

  void add(Real r) {
    max = std::max(max, std::abs(r));
    sum_sq += r * r;
    ++count;
  }
  ResidualLevel level(const SpaceTimeGrid& g) const {
    return {g.dx(), g.dt(), static_cast<double>(max),
            count ? static_cast<double>(std::sqrt(sum_sq / count)) : 0.0, count};
  }
};

// Level k of a refinement study has spacing h / 2^k. Every level is measured
// over the interior of the coarsest grid (one coarse cell in t, and one in x,
// two for the momentum stencil, are excluded), so the norms compare the same
// physical region.
ResidualLevel mass_level(const SolutionCase& c, const emden::Trajectory& traj, const SpaceTimeGrid& g,
                         int stride, const ResidualOptions& opts) {
  Fields f = sample_fields(c, traj, g, opts.velocity_scale);
  Norms n;
  for (int i = stride; i + stride < f.nt; ++i) {
    for (int j = stride; j + stride < f.nx; ++j) {
      const Real rho_t = (f.r(i + 1, j) - f.r(i - 1, j)) / (2 * f.dt);
      const Real rho_x = (f.r(i, j + 1) - f.r(i, j - 1)) / (2 * f.dx);
      const Real u_x = Real((f.v(i, j + 1) - f.v(i, j - 1)) / (2 * f.wdx));
      n.add(rho_t + Real(f.v(i, j)) * rho_x + f.r(i, j) * u_x);
    }
  }
  return n.level(g);
}

ResidualLevel momentum_level(const SolutionCase& c, const emden::Trajectory& traj, const SpaceTimeGrid& g,
                             int stride, double alpha_d, const ResidualOptions& opts) {
  Fields f = sample_fields(c, traj, g, opts.velocity_scale);
  const Wide ad2 = Wide(alpha_d) * Wide(alpha_d);
  const Real sigma = c.sigma();

  // m on columns 1..nx-2 of every time row.
  std::vector<Wide> m(f.rho.size(), 0);
  auto mm = [&](int i, int j) -> Wide& { return m[static_cast<std::size_t>(i) * f.nx + j]; };
  for (int i = 0; i < f.nt; ++i) {
    for (int j = 1; j + 1 < f.nx; ++j) {
      const Wide u_xx = ((f.v(i, j + 1) - f.v(i, j)) - (f.v(i, j) - f.v(i, j - 1))) / (f.wdx * f.wdx);
      mm(i, j) = f.v(i, j) - ad2 * u_xx;
    }
  }

  Norms n;
  for (int i = stride; i + stride < f.nt; ++i) {
    for (int j = 2 * stride; j + 2 * stride < f.nx; ++j) {
      const Wide m_t = (mm(i + 1, j) - mm(i - 1, j)) / (2 * f.wdt);
      const Wide m_x = (mm(i, j + 1) - mm(i, j - 1)) / (2 * f.wdx);
      const Wide u_x = (f.v(i, j + 1) - f.v(i, j - 1)) / (2 * f.wdx);
      const Real rho_x = (f.r(i, j + 1) - f.r(i, j - 1)) / (2 * f.dx);
      n.add(Real(m_t + 2 * u_x * mm(i, j) + f.v(i, j) * m_x) + sigma * f.r(i, j) * rho_x);
    }
  }
  return n.level(g);
}

template <class LevelFn>
ResidualReport run_levels(Equation eq, const SpaceTimeGrid& grid, const ResidualOptions& opts, LevelFn&& fn) {
  if (opts.levels < 1) throw PreconditionError("at least one grid level is required");
  ResidualReport rep;
  rep.eq = eq;
  SpaceTimeGrid g = grid;
  for (int k = 0, stride = 1; k < opts.levels; ++k, stride *= 2) {
    rep.levels.push_back(fn(g, stride));
    g = g.refined();
  }
  rep.interior_max_residual = rep.levels.front().max_residual;
  rep.interior_l2_residual = rep.levels.front().l2_residual;
  rep.exact = std::all_of(rep.levels.begin(), rep.levels.end(),
                          [&](const ResidualLevel& l) { return l.max_residual < opts.roundoff_floor; });
  if (rep.levels.size() >= 2 && !rep.exact) {
    const auto& coarse = rep.levels[rep.levels.size() - 2];
    const auto& fine = rep.levels.back();
    rep.estimated_order = std::log2(coarse.max_residual / fine.max_residual);
  }
  return rep;
}

double collapse_time(const emden::BlowupReport& r) {
  if (r.s_collapse_quadrature) return *r.s_collapse_quadrature;
  if (r.s_collapse_numeric) return *r.s_collapse_numeric;
  throw PreconditionError("blowup report carries no collapse time");
}

}  // namespace

void SpaceTimeGrid::validate() const {
  if (nt < 5 || nx < 5) throw PreconditionError("grid needs nt >= 5 and nx >= 5");
  if (!(t1 > t0) || !(x1 > x0)) throw PreconditionError("grid ranges must be increasing");
  if (!std::isfinite(t0) || !std::isfinite(t1) || !std::isfinite(x0) || !std::isfinite(x1))
    throw PreconditionError("grid ranges must be finite");
}

const char* to_string(Equation e) { return e == Equation::Mass ? "mass" : "momentum"; }

ResidualReport residual_mass_eq(const SolutionCase& c, const emden::Trajectory& traj,
                                const SpaceTimeGrid& grid, const ResidualOptions& opts) {
  return run_levels(Equation::Mass, grid, opts,
                    [&](const SpaceTimeGrid& g, int stride) { return mass_level(c, traj, g, stride, opts); });
}

ResidualReport residual_momentum_eq(const SolutionCase& c, const emden::Trajectory& traj,
                                    const SpaceTimeGrid& grid, double alpha_d, const ResidualOptions& opts) {
  if (!(alpha_d >= 0.0)) throw PreconditionError("dispersion coefficient must be >= 0");
  return run_levels(Equation::Momentum, grid, opts,
                    [&](const SpaceTimeGrid& g, int stride) {
                      return momentum_level(c, traj, g, stride, alpha_d, opts);
                    });
}

SpaceTimeGrid default_grid(const SolutionCase& c, const emden::Trajectory& traj,
                           const emden::BlowupReport& report, const GridDefaults& d) {
  SpaceTimeGrid g;
  g.nt = d.nt;
  g.nx = d.nx;
  g.t0 = 0.0;
  g.t1 = std::min(d.t_end, traj.s_max() / 3.0);
  if (report.classification == Classification::Collapse)
    g.t1 = std::min(g.t1, d.collapse_margin * collapse_time(report) / 3.0);

  double half_width = d.x_extent;
  if (const auto edge = c.eta_boundary(); edge && c.alpha() > 0.0) {
    double min_radius = std::numeric_limits<double>::infinity();
    const int probes = 8 * d.nt;
    for (int i = 0; i <= probes; ++i) {
      const double t = g.t0 + (g.t1 - g.t0) * i / probes;
      min_radius = std::min(min_radius, std::cbrt(checked_scale(traj, t).a) * *edge);
    }
    half_width = d.support_fraction * min_radius;
  }
  g.x0 = -half_width;
  g.x1 = half_width;
  g.validate();
  return g;
}

std::optional<double> analytic_mass(const SolutionCase& c) {
  if (!c.compact_support()) return std::nullopt;
  return c.alpha() * c.alpha() * std::numbers::pi / (2.0 * std::sqrt(std::abs(c.xi())));
}

MassResult mass(const SolutionCase& c, const emden::Trajectory& traj, double t) {
  if (!c.compact_support()) return {true, 0.0};
  const double a = selfsim::scale_at(traj, t).a;
  const double xb = std::cbrt(a) * *c.eta_boundary();
  if (xb == 0.0) return {false, 0.0};
  // x = xb sin(phi) absorbs the square-root edge behaviour.
  auto integrand = [&](double phi) {
    return selfsim::density_at_scale(c, a, xb * std::sin(phi)) * xb * std::cos(phi);
  };
  const double half_pi = 0.5 * std::numbers::pi;
  return {false, boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, -half_pi, half_pi,
                                                                                 10, 1e-15)};
}

ConservationReport mass_conservation(const SolutionCase& c, const emden::Trajectory& traj,
                                     const std::vector<double>& t_list) {
  ConservationReport rep;
  rep.times = t_list;
  rep.analytic_mass = analytic_mass(c);
  if (!c.compact_support()) {
    rep.divergent = true;
    return rep;
  }
  for (double t : t_list) rep.masses.push_back(mass(c, traj, t).value);
  if (rep.masses.empty()) return rep;
  const double ref = rep.masses.front();
  for (double m : rep.masses) {
    const double d = std::abs(m - ref);
    rep.max_relative_drift = std::max(rep.max_relative_drift, ref != 0.0 ? d / std::abs(ref) : d);
  }
  return rep;
}

double predicted_rate_limit(const SolutionCase& c, const emden::BlowupReport& report) {
  if (!(report.theta > 0.0)) throw PreconditionError("rate limit needs positive orbit energy");
  return c.alpha() * std::pow(2.0 * report.theta, -1.0 / 6.0);
}

std::vector<double> final_approach_samples(double S, int count) {
  std::vector<double> s;
  for (int k = 0; k < count; ++k) {
    const double exponent = -3.0 - static_cast<double>(k) / std::max(1, count - 1);
    s.push_back(S - S * std::pow(10.0, exponent));
  }
  return s;
}

std::vector<RatePoint> blowup_rate(const SolutionCase& c, const emden::Trajectory& traj,
                                   const emden::BlowupReport& report, const std::vector<double>& s_samples) {
  if (report.classification != Classification::Collapse)
    throw PreconditionError("blowup rate requested for a globally existing solution");
  if (!(c.alpha() > 0.0)) throw PreconditionError("blowup rate needs alpha > 0");
  const double S = collapse_time(report);
  std::vector<RatePoint> out;
  for (double s : s_samples) {
    if (!(s < S) || s > traj.s_max() || s < 0.0)
      throw PreconditionError("rate sample s = " + num(s) + " outside [0, min(S, s_max)]");
    const double rho0 = selfsim::density_at_scale(c, traj.at(s).a, 0.0);
    out.push_back({s, rho0 * std::cbrt(S - s)});
  }
  return out;
}

RateSummary summarize_rate(std::vector<RatePoint> samples, double S, double predicted) {
  RateSummary r;
  r.predicted_limit = predicted;
  r.samples = std::move(samples);
  if (r.samples.empty()) return r;
  std::vector<RatePoint> by_gap = r.samples;
  std::sort(by_gap.begin(), by_gap.end(), [](const RatePoint& l, const RatePoint& rr) { return l.s > rr.s; });
  if (by_gap.size() >= 2) {
    const double w1 = std::pow(S - by_gap[0].s, 2.0 / 3.0);
    const double w2 = std::pow(S - by_gap[1].s, 2.0 / 3.0);
    r.extrapolated_limit = (w2 * by_gap[0].product - w1 * by_gap[1].product) / (w2 - w1);
  } else {
    r.extrapolated_limit = by_gap[0].product;
  }
  double min_product = std::numeric_limits<double>::infinity();
  for (const auto& p : r.samples) {
    r.max_relative_deviation = std::max(r.max_relative_deviation, std::abs(p.product - predicted) / predicted);
    min_product = std::min(min_product, p.product);
  }
  r.min_ratio = min_product / r.extrapolated_limit;
  return r;
}

std::vector<double> origin_decay(const SolutionCase& c, const emden::Trajectory& traj,
                                 const emden::BlowupReport& report, const std::vector<double>& t_list) {
  if (report.classification != Classification::Global)
    throw PreconditionError("origin decay requested for a collapsing solution");
  std::vector<double> out;
  for (double t : t_list) out.push_back(selfsim::density(c, traj, t, 0.0));
  return out;
}

DecaySummary summarize_decay(const SolutionCase& c, const emden::Trajectory& traj,
                             const std::vector<double>& times, const std::vector<double>& rho0) {
  DecaySummary d;
  d.times = times;
  d.rho0 = rho0;
  const double k = emden::growth_constant(c.xi());
  d.predicted_scaled_limit = c.alpha() / (std::sqrt(3.0) * std::cbrt(k));
  if (times.empty()) return d;
  d.last_scaled = rho0.back() * std::sqrt(times.back());
  d.relative_error = d.predicted_scaled_limit > 0.0
                         ? std::abs(d.last_scaled - d.predicted_scaled_limit) / d.predicted_scaled_limit
                         : std::abs(d.last_scaled);
  if (c.alpha() == 0.0) {
    d.decreasing_after_turn = std::all_of(rho0.begin(), rho0.end(), [](double r) { return r == 0.0; });
    return d;
  }
  d.decreasing_after_turn = true;
  for (std::size_t k2 = 0; k2 + 1 < times.size(); ++k2) {
    const auto st = selfsim::scale_at(traj, times[k2]);
    const bool outward = st.a_dot * st.a > 0.0;
    if (outward && !(rho0[k2 + 1] < rho0[k2])) d.decreasing_after_turn = false;
  }
  return d;
}

double required_s_end(const SolutionCase& c, const SuiteOptions& opts) {
  double t = std::max(opts.grid_defaults.t_end, 1.0);
  if (opts.grid) t = std::max(t, opts.grid->t1);
  for (double v : opts.conservation_times) t = std::max(t, v);
  if (c.emden().xi > 0.0)
    for (double v : opts.decay_times) t = std::max(t, v);
  return 3.0 * t;
}

namespace {

bool order_ok(const ResidualReport& r, const Tolerances& tol) {
  if (r.exact) return true;
  return r.estimated_order && std::abs(*r.estimated_order - tol.order_target) <= tol.order_tol;
}

std::string order_note(const ResidualReport& r) {
  if (r.exact) return "residual at roundoff on every level";
  if (!r.estimated_order) return "single grid level, no order estimate";
  return "observed order " + num(*r.estimated_order);
}

}  // namespace

SuiteResult run_suite(const SolutionCase& c, const emden::Trajectory& traj, const emden::BlowupReport& report,
                      const SuiteOptions& opts) {
  SuiteResult res;
  const bool collapse = report.classification == Classification::Collapse;
  res.grid = opts.grid ? *opts.grid : default_grid(c, traj, report, opts.grid_defaults);

  ResidualOptions ro;
  ro.levels = opts.levels;
  ro.velocity_scale = opts.velocity_scale;
  ro.roundoff_floor = opts.tol.roundoff_floor;

  res.mass_eq = residual_mass_eq(c, traj, res.grid, ro);
  res.checks.push_back({"mass_equation_order", order_ok(res.mass_eq, opts.tol), false, order_note(res.mass_eq)});

  for (double ad : opts.dispersion) res.momentum.push_back({ad, residual_momentum_eq(c, traj, res.grid, ad, ro)});
  if (!res.momentum.empty()) {
    bool all_ok = true;
    std::string note;
    for (const auto& run : res.momentum) {
      all_ok = all_ok && order_ok(run.report, opts.tol);
      note += (note.empty() ? "" : "; ") + std::string("alpha_d=") + num(run.alpha_d) + ": " +
              order_note(run.report);
    }
    res.checks.push_back({"momentum_equation_order", all_ok, false, note});

    for (std::size_t lvl = 0; lvl < res.momentum.front().report.levels.size(); ++lvl) {
      double lo = std::numeric_limits<double>::infinity();
      double hi = -lo;
      for (const auto& run : res.momentum) {
        lo = std::min(lo, run.report.levels[lvl].max_residual);
        hi = std::max(hi, run.report.levels[lvl].max_residual);
      }
      res.dispersion_spread = std::max(res.dispersion_spread, hi - lo);
    }
    if (res.momentum.size() >= 2)
      res.checks.push_back({"dispersion_invariance", res.dispersion_spread <= opts.tol.dispersion_abs, false,
                            "max spread " + num(res.dispersion_spread)});
  }

  res.mass0 = mass(c, traj, res.grid.t0);
  res.analytic_mass = analytic_mass(c);
  if (res.mass0.divergent) {
    res.checks.push_back({"mass_exact", true, true, "mass diverges: noncompact profile grows like |eta|"});
  } else {
    const double err = std::abs(res.mass0.value - *res.analytic_mass);
    const double scale = *res.analytic_mass > 0.0 ? *res.analytic_mass : 1.0;
    res.checks.push_back({"mass_exact", err <= opts.tol.mass_rel * scale, false,
                          "relative error " + num(err / scale)});
  }

  std::vector<double> times = opts.conservation_times;
  if (times.empty()) {
    if (collapse) {
      const double T = collapse_time(report) / 3.0;
      for (double f : {0.0, 0.3, 0.6, 0.9}) times.push_back(f * T);
    } else {
      times = {0.0, 0.2, 0.5, 1.0};
    }
  }
  res.conservation = mass_conservation(c, traj, times);
  if (res.conservation->divergent) {
    res.checks.push_back({"mass_conservation", true, true, "mass diverges for noncompact cases; drift not computed"});
  } else {
    res.checks.push_back({"mass_conservation", res.conservation->max_relative_drift <= opts.tol.drift_rel, false,
                          "max relative drift " + num(res.conservation->max_relative_drift)});
  }

  if (collapse) {
    if (c.alpha() > 0.0 && report.theta > 0.0) {
      const double S = collapse_time(report);
      auto samples = blowup_rate(c, traj, report, final_approach_samples(S, opts.rate_samples));
      res.rate = summarize_rate(std::move(samples), S, predicted_rate_limit(c, report));
      const bool ok = res.rate->max_relative_deviation <= opts.tol.rate_rel && res.rate->min_ratio >= opts.tol.rate_floor;
      res.checks.push_back({"blowup_rate", ok, false,
                            "max deviation from alpha (2 theta)^(-1/6): " + num(res.rate->max_relative_deviation)});
    } else {
      res.checks.push_back({"blowup_rate", true, true, "rate statement needs alpha > 0 and theta > 0"});
    }
  } else {
    std::vector<double> ts;
    for (double t : opts.decay_times)
      if (3.0 * t <= traj.s_max()) ts.push_back(t);
    if (ts.size() < 2) {
      res.checks.push_back({"origin_decay", true, true, "trajectory too short for decay sampling"});
    } else {
      res.decay = summarize_decay(c, traj, ts, origin_decay(c, traj, report, ts));
      const bool ok = res.decay->decreasing_after_turn &&
                      (c.alpha() == 0.0 || res.decay->relative_error <= opts.tol.decay_rel);
      res.checks.push_back({"origin_decay", ok, false,
                            "rho(t,0) sqrt(t) relative error " + num(res.decay->relative_error)});
    }
  }

  res.pass = std::all_of(res.checks.begin(), res.checks.end(), [](const Check& ch) { return ch.skipped || ch.pass; });
  return res;
}

}  // namespace ch2::verify
