#pragma once

#include <cmath>
#include <concepts>
#include <optional>
#include <stdexcept>
#include <string>

#include "ch2/emden.hpp"

namespace ch2::selfsim {

enum class CaseId { k1a, k1b, k2a, k2b };

const char* to_string(CaseId id);

// Raised for parameter sets outside the four sign patterns of the solution
// table; the message lists the table.
class InvalidCase : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class BoundarySingularity : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// One member of the self-similar family
//   rho(t,x) = f(eta) / a(3t)^{1/3},  u(t,x) = a'(3t)/a(3t) x,  eta = x / a(3t)^{1/3}
// with the profile f(eta) = (xi/sigma) sqrt(-(sigma/xi) eta^2 + (sigma alpha/xi)^2).
//
//   1a  sigma = -1, xi < 0, a0 > 0   compact support
//   1b  sigma = -1, xi > 0, a0 < 0
//   2a  sigma = +1, xi > 0, a0 > 0   compact support
//   2b  sigma = +1, xi < 0, a0 < 0
//
// alpha is the profile amplitude |f(0)| only; the dispersion coefficient of
// the momentum m = u - alpha_d^2 u_xx is a separate quantity (see verify).
class SolutionCase {
 public:
  static SolutionCase make(int sigma, double alpha, emden::EmdenParams params);

  int sigma() const { return sigma_; }
  double alpha() const { return alpha_; }
  double xi() const { return emden_.xi; }
  const emden::EmdenParams& emden() const { return emden_; }
  CaseId id() const { return id_; }
  bool compact_support() const { return id_ == CaseId::k1a || id_ == CaseId::k2a; }

  // Support half-width in eta for compact cases: alpha / sqrt(|xi|).
  std::optional<double> eta_boundary() const;

 private:
  SolutionCase(int sigma, double alpha, emden::EmdenParams p, CaseId id)
      : sigma_(sigma), alpha_(alpha), emden_(p), id_(id) {}

  int sigma_;
  double alpha_;
  emden::EmdenParams emden_;
  CaseId id_;
};

// Profile with the compact-case clamp built in: a negative radicand gives 0.
template <std::floating_point T>
T profile(const SolutionCase& c, T eta) {
  const T ratio = T(c.sigma()) / T(c.xi());
  const T amp = T(c.sigma()) * T(c.alpha()) / T(c.xi());
  const T radicand = -ratio * eta * eta + amp * amp;
  if (radicand < T(0)) return T(0);
  return (T(c.xi()) / T(c.sigma())) * std::sqrt(radicand);
}

// Density for a given scale factor value a = a(3t). Non-negative in all four
// cases: the negative noncompact profiles pair with a negative cube root.
template <std::floating_point T>
T density_at_scale(const SolutionCase& c, T a, T x) {
  const T root = std::cbrt(a);
  return profile(c, x / root) / root;
}

template <std::floating_point T>
T velocity_at_scale(T a, T a_dot, T x) {
  return (a_dot / a) * x;
}

// f'(eta) from the profile ODE (xi/sigma) eta + f f' = 0. Zero at eta = 0
// and outside the support; throws BoundarySingularity where f = 0, eta != 0
// inside the closure of the support.
double profile_derivative(const SolutionCase& c, double eta);

// Scale factor state at physical time t, i.e. at similarity time s = 3t.
emden::EmdenState scale_at(const emden::Trajectory& traj, double t);

double density(const SolutionCase& c, const emden::Trajectory& traj, double t, double x);
double velocity(const SolutionCase& c, const emden::Trajectory& traj, double t, double x);

struct Interval {
  double lo;
  double hi;
};

// [-x_b, x_b] with x_b = a(3t)^{1/3} alpha / sqrt(|xi|) for compact cases;
// absent (whole line) otherwise.
std::optional<Interval> support(const SolutionCase& c, const emden::Trajectory& traj, double t);

struct FieldSample {
  double t;
  double x;
  double rho;
  double u;
};

FieldSample sample(const SolutionCase& c, const emden::Trajectory& traj, double t, double x);

}  // namespace ch2::selfsim
