#include "lpreg/loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lpreg {

namespace detail {

double pow_abs(double t, double e) {
    if (t == 0.0) {
        if (e > 0.0) return 0.0;
        if (e == 0.0) return 1.0;
        return std::numeric_limits<double>::infinity();
    }
    return std::exp(e * std::log(std::fabs(t)));
}

namespace {

double slack(double lhs, double rhs) {
    return 1e-12 * std::max({1.0, std::fabs(lhs), std::fabs(rhs)});
}

}  // namespace

}  // namespace detail

LossKernel::LossKernel(double p) : p_(p) {
    if (!(p > 1.0)) throw std::invalid_argument("LossKernel: p must be > 1");
}

double LossKernel::loss(double t) const {
    if (p_ == 2.0) return 0.5 * t * t;
    return detail::pow_abs(t, p_) / (p_ * (p_ - 1.0));
}

double LossKernel::grad(double t) const {
    if (p_ == 2.0) return t;
    if (t == 0.0) return 0.0;
    double s = t < 0.0 ? -1.0 : 1.0;
    return s * detail::pow_abs(t, p_ - 1.0) / (p_ - 1.0);
}

double LossKernel::hess(double t) const {
    if (p_ == 2.0) return 1.0;
    if (t == 0.0) {
        if (p_ > 2.0) return 0.0;
        throw SingularityError("loss_hess: second derivative unbounded at t=0 for p<2");
    }
    return detail::pow_abs(t, p_ - 2.0);
}

double LossKernel::hess_clamped(double t, double mu) const {
    if (p_ == 2.0) return 1.0;
    double a = std::max(std::fabs(t), mu);
    if (a == 0.0) {
        if (p_ > 2.0) return 0.0;
        throw SingularityError("hess_clamped: zero residual with zero clamp for p<2");
    }
    return detail::pow_abs(a, p_ - 2.0);
}

double gamma_p(double p, double t, double x) {
    if (!(p > 1.0 && p < 2.0)) throw std::domain_error("gamma_p: p must be in (1,2)");
    if (t < 0.0 || x < 0.0) throw std::domain_error("gamma_p: t and x must be nonnegative");
    if (x == 0.0) return 0.0;
    if (x <= t) return 0.5 * p * detail::pow_abs(t, p - 2.0) * x * x;
    return detail::pow_abs(x, p) - (1.0 - 0.5 * p) * detail::pow_abs(t, p);
}

double taylor_remainder(double p, double s, double t) {
    LossKernel k(p);
    return k.loss(t) - k.loss(s) - k.grad(s) * (t - s);
}

InequalityWitness check_sandwich_pgeq2(double p, double s, double t) {
    if (!(p >= 2.0)) throw std::domain_error("check_sandwich_pgeq2: p must be >= 2");
    LossKernel k(p);
    double lhs = taylor_remainder(p, s, t);
    double rhs = k.hess(s) * (t - s) * (t - s) / (8.0 * (p - 1.0));
    return {lhs >= rhs - detail::slack(lhs, rhs), lhs, rhs};
}

GammaUpperWitness check_gamma_upper_pleq2(double p, double s, double t) {
    if (!(p > 1.0 && p < 2.0)) throw std::domain_error("check_gamma_upper_pleq2: p must be in (1,2)");
    if (s == 0.0) throw std::domain_error("check_gamma_upper_pleq2: s must be nonzero");
    LossKernel k(p);
    double g = gamma_p(p, std::fabs(s), std::fabs(t - s));
    double quad = k.hess(s) * (t - s) * (t - s);
    double rem = taylor_remainder(p, s, t);
    double gscaled = 4.0 / (p * (p - 1.0)) * g;
    InequalityWitness a{g <= quad + detail::slack(g, quad), g, quad};
    InequalityWitness b{rem <= gscaled + detail::slack(rem, gscaled), rem, gscaled};
    return {a.holds && b.holds, a, b};
}

}  // namespace lpreg
