#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ch2::emden {

// Scale-factor ODE  a''(s) = xi / (3 cbrt(a)),  a(0) = a0,  a'(0) = a1.
// Similarity time s relates to physical time by s = 3t.

struct EmdenParams {
  double xi = 0.0;
  double a0 = 0.0;
  double a1 = 0.0;

  // Throws std::invalid_argument unless xi != 0, a0 != 0 and all finite.
  void validate() const;
};

struct EmdenState {
  double s = 0.0;
  double a = 0.0;
  double a_dot = 0.0;
};

enum class Classification { Collapse, Global };

const char* to_string(Classification c);

// a reached 0 while evaluating the right-hand side.
class SingularEvaluation : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// The step size fell below its floor (or the step budget ran out) before the
// trajectory reached s_end or the collapse threshold.
class IntegrationFailure : public std::runtime_error {
 public:
  IntegrationFailure(const std::string& what, EmdenState last)
      : std::runtime_error(what), last_state(last) {}
  EmdenState last_state;
};

class OutOfRange : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// Real, sign-preserving cube root.
inline double real_cbrt(double x) { return std::cbrt(x); }

double rhs(const EmdenParams& p, const EmdenState& y);

// First integral  a'^2/2 - (xi/2)|a|^{2/3}.
double energy(const EmdenParams& p, const EmdenState& y);
double initial_energy(const EmdenParams& p);

// Magnitude of the two terms of the first integral; the natural scale for
// judging energy drift when they nearly cancel.
double energy_scale(const EmdenParams& p, const EmdenState& y);

enum class StopReason { ReachedEnd, Collapse };

struct IntegratorOptions {
  double tol = 1e-10;
  // Halt once |a| <= stop_fraction * |a0|.
  double stop_fraction = 1e-10;
  // Absolute step floor is min_step_factor * max(1, s_end).
  double min_step_factor = 1e-14;
  std::size_t max_steps = 5'000'000;
};

// Dense numerical solution. States are the accepted steps of a Dormand-Prince
// 5(4) integration; between them the 4th-order continuous extension is used.
class Trajectory {
 public:
  const EmdenParams& params() const { return params_; }
  std::span<const EmdenState> states() const { return states_; }
  double s_max() const { return states_.back().s; }
  StopReason stop_reason() const { return stop_; }
  const EmdenState& initial() const { return states_.front(); }
  const EmdenState& last() const { return states_.back(); }

  // Dense evaluation for s in [0, s_max]; exact at stored nodes.
  EmdenState at(double s) const;

 private:
  friend Trajectory integrate(const EmdenParams&, double, const IntegratorOptions&);

  // Continuous-extension coefficients of one step, per component (a, a_dot).
  struct Segment {
    double h;
    double c[5][2];
  };

  EmdenParams params_;
  std::vector<EmdenState> states_;
  std::vector<Segment> segments_;
  StopReason stop_ = StopReason::ReachedEnd;
};

// Integrates from s = 0 up to s_end, or until |a| drops to the collapse
// threshold. Throws std::invalid_argument for bad inputs and
// IntegrationFailure when the step size underflows.
Trajectory integrate(const EmdenParams& p, double s_end, const IntegratorOptions& opts = {});
inline Trajectory integrate(const EmdenParams& p, double s_end, double tol) {
  IntegratorOptions o;
  o.tol = tol;
  return integrate(p, s_end, o);
}

Classification classify(const EmdenParams& p);

// Extremum of |a| along the orbit, when the motion has one: the maximum
// before falling into the origin (xi < 0, slope pointing outward) or the
// minimum before growing (xi > 0, slope pointing inward, energy < 0).
std::optional<double> turning_magnitude(const EmdenParams& p);

// Time to reach a = 0 from the first-integral reduction
//   ds = d|a| / sqrt(2 theta + xi |a|^{2/3})
// with G = sqrt(|xi|/2) |a|^{1/3}. Requires classify(p) == Collapse.
double collapse_time_quadrature(const EmdenParams& p);

// int_lo^hi x^2 / sqrt(theta - x^2) dx for 0 <= lo <= hi <= sqrt(theta),
// accurate at the inverse-square-root singularity at sqrt(theta).
double singular_orbit_integral(double theta, double lo, double hi);

std::optional<double> detect_collapse(const Trajectory& traj);

// a(s_max) / s_max^{3/2}; tends to (4 xi / 9)^{3/4} sign(a0) for xi > 0.
double growth_asymptote(const Trajectory& traj);
double growth_constant(double xi);

struct BlowupReport {
  Classification classification = Classification::Global;
  double theta = 0.0;
  std::optional<double> s_collapse_numeric;
  std::optional<double> s_collapse_quadrature;
  std::optional<double> a_turning;
  // Limit of |a(s)|^{-1/3} (S - s)^{1/3} as s -> S, i.e. the density rate
  // constant per unit profile amplitude: (2 theta)^{-1/6}.
  std::optional<double> rate_limit_estimate;
};

// Integrates (to collapse for collapsing orbits, otherwise to s_end_global)
// and assembles the report.
struct Analysis {
  Trajectory trajectory;
  BlowupReport report;
};
Analysis analyze(const EmdenParams& p, double s_end_global, const IntegratorOptions& opts = {});

BlowupReport make_report(const Trajectory& traj);

}  // namespace ch2::emden
