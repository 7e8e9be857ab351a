#pragma once

#include "lpreg/errors.hpp"

namespace lpreg {

// Scalar p-th power loss t -> |t|^p / (p(p-1)) and its derivatives,
// for exponents p in (1, inf). All members are pure functions.
class LossKernel {
  public:
    explicit LossKernel(double p);

    double p() const { return p_; }

    // |t|^p / (p(p-1)); even, convex, zero at zero.
    double loss(double t) const;

    // sign(t) |t|^{p-1} / (p-1); odd, zero at zero.
    double grad(double t) const;

    // |t|^{p-2}. For p = 2 this is 1 everywhere; for p > 2 it is 0 at
    // t = 0. For p < 2 it diverges at t = 0 and throws SingularityError
    // there; callers that need a total function must clamp explicitly.
    double hess(double t) const;

    // |max(|t|, mu)|^{p-2}: the clamped curvature used by the homotopy
    // solver for p < 2. For p >= 2 the clamp is a no-op when mu <= |t|.
    double hess_clamped(double t, double mu) const;

  private:
    double p_;
};

// Piecewise quadratic/power approximation to x^p for p in (1, 2):
//   gamma_p(t, x) = (p/2) t^{p-2} x^2        if x <= t
//                 = x^p - (1 - p/2) t^p      if x >  t
// with gamma_p(0, 0) = 0. Requires t >= 0 and x >= 0. Quadratic at scales
// below the anchor t, matching the p-th power above it; continuous at x = t.
double gamma_p(double p, double t, double x);

// loss(t) - loss(s) - grad(s) * (t - s).
double taylor_remainder(double p, double s, double t);

// Both sides of a pointwise inequality, plus whether it holds up to a
// relative slack of 1e-12 * max(1, |lhs|, |rhs|).
struct InequalityWitness {
    bool holds;
    double lhs;
    double rhs;
};

// For p >= 2: remainder >= (1/(8(p-1))) l''(s) (t-s)^2.
InequalityWitness check_sandwich_pgeq2(double p, double s, double t);

// For p in (1, 2) and s != 0, the two upper bounds from the smoothing
// analysis: gamma_p(|s|, |t-s|) <= l''(s)(t-s)^2, and
// remainder <= (4/(p(p-1))) gamma_p(|s|, |t-s|).
struct GammaUpperWitness {
    bool holds;
    InequalityWitness gamma_vs_quad;      // gamma <= l''(s)(t-s)^2
    InequalityWitness remainder_vs_gamma; // remainder <= (4/(p(p-1))) gamma
};

GammaUpperWitness check_gamma_upper_pleq2(double p, double s, double t);

namespace detail {
// |t|^e with an explicit zero short-circuit; non-integer powers go
// through exp(e * ln|t|) for uniform accuracy across exponents.
double pow_abs(double t, double e);
}  // namespace detail

}  // namespace lpreg
