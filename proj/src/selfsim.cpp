#include "ch2/selfsim.hpp"
#include "num_format.hpp"

namespace ch2::selfsim {

namespace {

constexpr const char* kCaseTable =
    "valid sign patterns: 1a (sigma=-1, xi<0, a0>0), 1b (sigma=-1, xi>0, a0<0), "
    "2a (sigma=+1, xi>0, a0>0), 2b (sigma=+1, xi<0, a0<0)";

}  // namespace

const char* to_string(CaseId id) {
  switch (id) {
    case CaseId::k1a: return "1a";
    case CaseId::k1b: return "1b";
    case CaseId::k2a: return "2a";
    case CaseId::k2b: return "2b";
  }
  return "?";
}

SolutionCase SolutionCase::make(int sigma, double alpha, emden::EmdenParams params) {
  if (sigma != 1 && sigma != -1)
    throw InvalidCase("sigma must be +1 or -1, got " + std::to_string(sigma));
  if (!(alpha >= 0.0) || !std::isfinite(alpha))
    throw InvalidCase("profile amplitude must satisfy alpha >= 0");
  try {
    params.validate();
  } catch (const std::invalid_argument& e) {
    throw InvalidCase(e.what());
  }

  const bool xi_pos = params.xi > 0.0;
  const bool a0_pos = params.a0 > 0.0;
  std::optional<CaseId> id;
  if (sigma == -1 && !xi_pos && a0_pos) id = CaseId::k1a;
  if (sigma == -1 && xi_pos && !a0_pos) id = CaseId::k1b;
  if (sigma == 1 && xi_pos && a0_pos) id = CaseId::k2a;
  if (sigma == 1 && !xi_pos && !a0_pos) id = CaseId::k2b;
  if (!id) {
    throw InvalidCase(std::string("no solution case for sigma=") + (sigma > 0 ? "+1" : "-1") +
                      ", xi" + (xi_pos ? ">0" : "<0") + ", a0" + (a0_pos ? ">0" : "<0") + "; " +
                      kCaseTable);
  }
  return SolutionCase(sigma, alpha, params, *id);
}

std::optional<double> SolutionCase::eta_boundary() const {
  if (!compact_support()) return std::nullopt;
  return alpha_ / std::sqrt(std::abs(xi()));
}

double profile_derivative(const SolutionCase& c, double eta) {
  if (eta == 0.0) return 0.0;
  const double f = profile(c, eta);
  if (f == 0.0) {
    const auto edge = c.eta_boundary();
    if (edge && std::abs(eta) > *edge) return 0.0;
    throw BoundarySingularity("profile slope is unbounded at the support boundary eta = " +
                              detail::num(eta));
  }
  return -(c.xi() / c.sigma()) * eta / f;
}

emden::EmdenState scale_at(const emden::Trajectory& traj, double t) {
  const double s = 3.0 * t;
  if (!(t >= 0.0) || s > traj.s_max())
    throw emden::OutOfRange("t = " + detail::num(t) + " outside the integrated range [0, " +
                            detail::num(traj.s_max() / 3.0) + "]");
  return traj.at(s);
}

double density(const SolutionCase& c, const emden::Trajectory& traj, double t, double x) {
  return density_at_scale(c, scale_at(traj, t).a, x);
}

double velocity(const SolutionCase&, const emden::Trajectory& traj, double t, double x) {
  const auto st = scale_at(traj, t);
  if (st.a == 0.0) throw emden::SingularEvaluation("velocity undefined at collapse (a = 0)");
  return velocity_at_scale(st.a, st.a_dot, x);
}

std::optional<Interval> support(const SolutionCase& c, const emden::Trajectory& traj, double t) {
  const auto edge = c.eta_boundary();
  if (!edge) return std::nullopt;
  const double xb = std::cbrt(scale_at(traj, t).a) * *edge;
  return Interval{-xb, xb};
}

FieldSample sample(const SolutionCase& c, const emden::Trajectory& traj, double t, double x) {
  const auto st = scale_at(traj, t);
  return {t, x, density_at_scale(c, st.a, x), velocity_at_scale(st.a, st.a_dot, x)};
}

}  // namespace ch2::selfsim
