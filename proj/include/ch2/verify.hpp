#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ch2/emden.hpp"
#include "ch2/selfsim.hpp"

namespace ch2::verify {

class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Uniform lattice in physical time and space; node (i, j) is
// (t0 + i dt, x0 + j dx).
struct SpaceTimeGrid {
  double t0 = 0.0;
  double t1 = 0.0;
  int nt = 0;
  double x0 = 0.0;
  double x1 = 0.0;
  int nx = 0;

  double dt() const { return (t1 - t0) / (nt - 1); }
  double dx() const { return (x1 - x0) / (nx - 1); }
  double t(int i) const { return t0 + i * dt(); }
  double x(int j) const { return x0 + j * dx(); }
  // Same domain, spacings halved.
  SpaceTimeGrid refined() const { return {t0, t1, 2 * nt - 1, x0, x1, 2 * nx - 1}; }
  void validate() const;
};

enum class Equation { Mass, Momentum };
const char* to_string(Equation e);

struct ResidualLevel {
  double dx = 0.0;
  double dt = 0.0;
  double max_residual = 0.0;
  double l2_residual = 0.0;  // root mean square over interior nodes
  long interior_nodes = 0;
};

struct ResidualReport {
  Equation eq = Equation::Mass;
  // Norms on the requested (coarsest) grid.
  double interior_max_residual = 0.0;
  double interior_l2_residual = 0.0;
  std::vector<ResidualLevel> levels;
  // log2 of the max-residual ratio between the last two levels.
  std::optional<double> estimated_order;
  // Every level is at roundoff (e.g. alpha = 0 gives rho identically 0).
  bool exact = false;
};

struct ResidualOptions {
  int levels = 2;
  // Multiplies the velocity field before differencing; 1 leaves the exact
  // solution untouched, anything else is a deliberately wrong ansatz.
  double velocity_scale = 1.0;
  // Residual norms below this on every level count as exact.
  double roundoff_floor = 1e-12;
};

// Residual of rho_t + u rho_x + rho u_x with second-order central
// differences, at the interior nodes of grid and its successive refinements.
ResidualReport residual_mass_eq(const selfsim::SolutionCase& c, const emden::Trajectory& traj,
                                const SpaceTimeGrid& grid, const ResidualOptions& opts = {});

// Residual of m_t + 2 u_x m + u m_x + sigma rho rho_x with the momentum
// formed discretely as m = u - alpha_d^2 D_xx u.
ResidualReport residual_momentum_eq(const selfsim::SolutionCase& c, const emden::Trajectory& traj,
                                    const SpaceTimeGrid& grid, double alpha_d,
                                    const ResidualOptions& opts = {});

struct GridDefaults {
  int nt = 81;
  int nx = 81;
  double t_end = 0.5;
  // Compact cases: |x| limited to this fraction of the smallest support
  // radius over the time window.
  double support_fraction = 0.8;
  // Noncompact cases: |x| <= x_extent.
  double x_extent = 1.0;
  // Collapse cases: time window stops at this fraction of T = S/3.
  double collapse_margin = 0.9;
};

SpaceTimeGrid default_grid(const selfsim::SolutionCase& c, const emden::Trajectory& traj,
                           const emden::BlowupReport& report, const GridDefaults& d = {});

struct MassResult {
  bool divergent = false;
  double value = 0.0;
};

// Mass at time t. Noncompact profiles grow like |eta| and are reported
// divergent.
MassResult mass(const selfsim::SolutionCase& c, const emden::Trajectory& traj, double t);

// alpha^2 pi / (2 sqrt|xi|) for compact cases.
std::optional<double> analytic_mass(const selfsim::SolutionCase& c);

struct ConservationReport {
  std::vector<double> times;
  std::vector<double> masses;
  std::optional<double> analytic_mass;
  double max_relative_drift = 0.0;
  bool divergent = false;
};

ConservationReport mass_conservation(const selfsim::SolutionCase& c, const emden::Trajectory& traj,
                                     const std::vector<double>& t_list);

struct RatePoint {
  double s;
  double product;  // rho(s, 0) (S - s)^{1/3}
};

// Samples rho(s, 0) (S - s)^{1/3} at the given similarity times, with S the
// quadrature collapse time (numeric one if absent).
std::vector<RatePoint> blowup_rate(const selfsim::SolutionCase& c, const emden::Trajectory& traj,
                                   const emden::BlowupReport& report, const std::vector<double>& s_samples);

// s values with S - s spread log-uniformly over [1e-4 S, 1e-3 S].
std::vector<double> final_approach_samples(double S, int count = 11);

// alpha (2 theta)^{-1/6}
double predicted_rate_limit(const selfsim::SolutionCase& c, const emden::BlowupReport& report);

struct RateSummary {
  std::vector<RatePoint> samples;
  double predicted_limit = 0.0;
  // Richardson extrapolation of the two samples closest to S, assuming a
  // (S - s)^{2/3} correction.
  double extrapolated_limit = 0.0;
  double max_relative_deviation = 0.0;  // over samples, from predicted_limit
  double min_ratio = 0.0;               // min(product) / extrapolated_limit
};

RateSummary summarize_rate(std::vector<RatePoint> samples, double S, double predicted);

std::vector<double> origin_decay(const selfsim::SolutionCase& c, const emden::Trajectory& traj,
                                 const emden::BlowupReport& report, const std::vector<double>& t_list);

struct DecaySummary {
  std::vector<double> times;
  std::vector<double> rho0;
  // rho(t,0) sqrt(t) limit alpha / (sqrt(3) k^{1/3}), k the growth constant.
  double predicted_scaled_limit = 0.0;
  double last_scaled = 0.0;
  double relative_error = 0.0;
  bool decreasing_after_turn = false;
};

DecaySummary summarize_decay(const selfsim::SolutionCase& c, const emden::Trajectory& traj,
                             const std::vector<double>& times, const std::vector<double>& rho0);

struct Tolerances {
  double order_target = 2.0;
  double order_tol = 0.2;
  double dispersion_abs = 1e-10;
  double mass_rel = 1e-6;
  double drift_rel = 1e-8;
  double rate_rel = 0.01;
  double rate_floor = 1e-2;
  double decay_rel = 0.02;
  // Residual norms below this on every level count as exact.
  double roundoff_floor = 1e-12;
};

struct SuiteOptions {
  std::optional<SpaceTimeGrid> grid;  // default_grid() when absent
  GridDefaults grid_defaults;
  int levels = 2;
  std::vector<double> dispersion = {0.0, 1.0, 10.0};
  double velocity_scale = 1.0;
  std::vector<double> conservation_times;  // default: 4 times over the window
  std::vector<double> decay_times = {1.0, 10.0, 100.0, 1000.0};
  int rate_samples = 11;
  Tolerances tol;
};

struct Check {
  std::string name;
  bool pass = false;
  bool skipped = false;
  std::string note;
};

struct DispersionRun {
  double alpha_d;
  ResidualReport report;
};

struct SuiteResult {
  SpaceTimeGrid grid;
  ResidualReport mass_eq;
  std::vector<DispersionRun> momentum;
  double dispersion_spread = 0.0;
  MassResult mass0;
  std::optional<double> analytic_mass;
  std::optional<ConservationReport> conservation;
  std::optional<RateSummary> rate;
  std::optional<DecaySummary> decay;
  std::vector<Check> checks;
  bool pass = false;
};

// Largest similarity time the suite will sample for this case and options;
// global trajectories must be integrated at least this far.
double required_s_end(const selfsim::SolutionCase& c, const SuiteOptions& opts);

SuiteResult run_suite(const selfsim::SolutionCase& c, const emden::Trajectory& traj,
                      const emden::BlowupReport& report, const SuiteOptions& opts = {});

}  // namespace ch2::verify
