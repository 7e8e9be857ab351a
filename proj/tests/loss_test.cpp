#include <doctest.h>

#include <cmath>

#include "lpreg/loss.hpp"
#include "lpreg/rng.hpp"

using namespace lpreg;

namespace {
bool close(double a, double b, double rel = 1e-12) {
    return std::fabs(a - b) <= rel * std::max({1.0, std::fabs(a), std::fabs(b)});
}
}  // namespace

TEST_CASE("loss values") {
    CHECK(close(LossKernel(2.0).loss(3.0), 4.5));
    CHECK(close(LossKernel(3.0).loss(-2.0), 8.0 / 6.0));
    CHECK(LossKernel(1.5).loss(0.0) == 0.0);
    CHECK_THROWS_AS(LossKernel(1.0), std::invalid_argument);
    CHECK_THROWS_AS(LossKernel(0.5), std::invalid_argument);
}

TEST_CASE("loss gradient values") {
    CHECK(close(LossKernel(2.0).grad(3.0), 3.0));
    CHECK(close(LossKernel(3.0).grad(-2.0), -2.0));
    CHECK(close(LossKernel(1.5).grad(4.0), 4.0));
    CHECK(LossKernel(2.5).grad(0.0) == 0.0);
}

TEST_CASE("loss hessian values and singularity") {
    CHECK(LossKernel(2.0).hess(-7.0) == 1.0);
    CHECK(close(LossKernel(3.0).hess(-2.0), 2.0));
    CHECK(LossKernel(3.0).hess(0.0) == 0.0);
    CHECK_THROWS_AS(LossKernel(1.5).hess(0.0), SingularityError);
    // Clamped variant is total.
    CHECK(close(LossKernel(1.5).hess_clamped(0.0, 4.0), 0.5));
}

TEST_CASE("gamma_p branches") {
    CHECK(gamma_p(1.5, 0.0, 0.0) == 0.0);
    CHECK(close(gamma_p(1.5, 1.0, 0.5), 0.1875));
    CHECK(close(gamma_p(1.5, 1.0, 2.0), std::pow(2.0, 1.5) - 0.25));
    CHECK_THROWS_AS(gamma_p(1.5, -1.0, 0.0), std::domain_error);
    CHECK_THROWS_AS(gamma_p(1.5, 0.0, -1.0), std::domain_error);
    CHECK_THROWS_AS(gamma_p(2.5, 1.0, 1.0), std::domain_error);
}

TEST_CASE("gamma_p continuous across the branch boundary") {
    RngStream rng(11);
    for (int i = 0; i < 1000; ++i) {
        double p = rng.uniform(1.05, 1.95);
        double t = rng.uniform(0.01, 50.0);
        double below = gamma_p(p, t, t);
        double above = gamma_p(p, t, t * (1.0 + 1e-12));
        CHECK(close(below, 0.5 * p * std::pow(t, p), 1e-10));
        CHECK(close(below, above, 1e-9));
    }
}

TEST_CASE("taylor remainder") {
    CHECK(close(taylor_remainder(2.0, 0.0, 1.0), 0.5));
    CHECK(close(taylor_remainder(4.0, 1.0, 1.1), 0.0053417, 1e-4));
    CHECK(taylor_remainder(1.5, 1.0, 1.0) == 0.0);
}

TEST_CASE("sandwich examples") {
    auto w = check_sandwich_pgeq2(2.0, 5.0, 9.0);
    CHECK(w.holds);
    CHECK(close(w.lhs, 8.0));
    CHECK(close(w.rhs, 2.0));

    w = check_sandwich_pgeq2(4.0, 1.0, 1.1);
    CHECK(w.holds);
    CHECK(close(w.lhs, 0.0053417, 1e-4));
    CHECK(close(w.rhs, 0.0004167, 1e-3));

    w = check_sandwich_pgeq2(3.0, 0.0, 1.0);
    CHECK(w.holds);
    CHECK(w.rhs == 0.0);

    CHECK_THROWS_AS(check_sandwich_pgeq2(1.5, 0.0, 1.0), std::domain_error);
}

TEST_CASE("gamma upper examples") {
    auto w = check_gamma_upper_pleq2(1.5, 1.0, 1.5);
    CHECK(w.holds);
    CHECK(close(w.gamma_vs_quad.lhs, 0.1875));
    CHECK(close(w.gamma_vs_quad.rhs, 0.25));

    w = check_gamma_upper_pleq2(1.5, 1.0, 3.0);
    CHECK(w.holds);
    CHECK(close(w.gamma_vs_quad.lhs, 2.578427, 1e-6));
    CHECK(close(w.gamma_vs_quad.rhs, 4.0));

    w = check_gamma_upper_pleq2(1.5, -2.0, -2.0);
    CHECK(w.holds);
    CHECK(w.gamma_vs_quad.lhs == 0.0);
    CHECK(w.remainder_vs_gamma.lhs == 0.0);

    CHECK_THROWS_AS(check_gamma_upper_pleq2(1.5, 0.0, 1.0), std::domain_error);
}

TEST_CASE("gradient matches central differences of the loss") {
    RngStream rng(3);
    for (int i = 0; i < 2000; ++i) {
        double p = rng.uniform(1.05, 5.0);
        double t = rng.normal() * rng.uniform(0.01, 100.0);
        if (std::fabs(t) < 1e-3) continue;
        double h = 1e-6 * std::max(1.0, std::fabs(t));
        LossKernel k(p);
        double fd = (k.loss(t + h) - k.loss(t - h)) / (2.0 * h);
        double g = k.grad(t);
        CHECK(std::fabs(fd - g) <= 1e-6 * std::max(1.0, std::fabs(g)));
    }
}

TEST_CASE("loss convexity, symmetry, zero at zero") {
    RngStream rng(5);
    for (int i = 0; i < 5000; ++i) {
        double p = rng.uniform(1.05, 6.0);
        LossKernel k(p);
        double s = rng.normal() * rng.uniform(0.01, 100.0);
        double t = rng.normal() * rng.uniform(0.01, 100.0);
        CHECK(k.loss(0.5 * (s + t)) <= 0.5 * (k.loss(s) + k.loss(t)) +
                                           1e-12 * std::max(1.0, k.loss(s) + k.loss(t)));
        CHECK(close(k.loss(s), k.loss(-s)));
        CHECK(k.loss(s) >= 0.0);
        CHECK(k.loss(0.0) == 0.0);
    }
}

TEST_CASE("gamma_p scaling and monotonicity") {
    RngStream rng(7);
    for (int i = 0; i < 5000; ++i) {
        double p = rng.uniform(1.05, 1.95);
        double t = rng.uniform(0.0, 10.0);
        double x = rng.uniform(0.0, 10.0);
        double lam = rng.uniform(0.0, 5.0);
        double lo = std::min(lam * lam, std::pow(lam, p)) * gamma_p(p, t, x);
        double scaled = gamma_p(p, t, lam * x);
        CHECK(scaled >= lo - 1e-12 * std::max(1.0, std::fabs(lo)));
        // Equality at lambda in {0, 1}.
        CHECK(gamma_p(p, t, 0.0) == 0.0);
        CHECK(gamma_p(p, t, 1.0 * x) == gamma_p(p, t, x));
        // Monotone: nonincreasing in t, nondecreasing in x.
        double t2 = t + rng.uniform(0.0, 5.0);
        double x2 = x + rng.uniform(0.0, 5.0);
        CHECK(gamma_p(p, t2, x) <= gamma_p(p, t, x) + 1e-12 * std::max(1.0, gamma_p(p, t, x)));
        CHECK(gamma_p(p, t, x2) >= gamma_p(p, t, x) - 1e-12 * std::max(1.0, gamma_p(p, t, x)));
    }
}

TEST_CASE("inequalities hold on random draws (reduced-size sweep)") {
    RngStream rng(13);
    for (int i = 0; i < 10000; ++i) {
        double p = rng.uniform(2.0, 6.0);
        double s = rng.normal() * rng.uniform(0.01, 100.0);
        double t = rng.normal() * rng.uniform(0.01, 100.0);
        CHECK(check_sandwich_pgeq2(p, s, t).holds);
    }
    for (int i = 0; i < 10000; ++i) {
        double p = rng.uniform(1.05, 1.95);
        double s = rng.normal() * rng.uniform(0.01, 100.0);
        double t = rng.normal() * rng.uniform(0.01, 100.0);
        if (s == 0.0) continue;
        CHECK(check_gamma_upper_pleq2(p, s, t).holds);
    }
}
