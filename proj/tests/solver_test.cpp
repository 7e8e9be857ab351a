#include <doctest.h>

#include <cmath>

#include "lpreg/rng.hpp"
#include "lpreg/solver.hpp"

using namespace lpreg;

namespace {

DistributionSpec gaussian_spec(int d, double sigma_eps, Eigen::VectorXd w) {
    return DistributionSpec(GaussianCovariates{Eigen::MatrixXd::Identity(d, d)}, false,
                            std::move(w),
                            sigma_eps > 0.0 ? NoiseFamily::gaussian(sigma_eps)
                                            : NoiseFamily::none());
}

Dataset single_row(Eigen::VectorXd x, double y) {
    Dataset ds;
    ds.design = x.transpose();
    ds.response.resize(1);
    ds.response[0] = y;
    return ds;
}

// Normal-equations oracle, independent of the solver path.
Eigen::VectorXd least_squares_oracle(const Dataset& ds) {
    Eigen::MatrixXd xtx = ds.design.transpose() * ds.design;
    Eigen::VectorXd xty = ds.design.transpose() * ds.response;
    return xtx.ldlt().solve(xty);
}

}  // namespace

TEST_CASE("empirical risk examples") {
    Eigen::VectorXd w(2);
    w << 1, 0;
    auto spec = gaussian_spec(2, 0.0, w);
    Dataset ds = sample(spec, 20, 3);
    CHECK(empirical_risk(ds, 2.0, w) == 0.0);
    CHECK(empirical_risk(ds, 1.5, w) == 0.0);

    Eigen::VectorXd x(2);
    x << 1, 0;
    Dataset one = single_row(x, 2.0);
    Eigen::VectorXd zero = Eigen::VectorXd::Zero(2);
    CHECK(empirical_risk(one, 2.0, zero) == doctest::Approx(2.0));
    CHECK(empirical_risk(one, 3.0, zero) == doctest::Approx(8.0 / 6.0));
}

TEST_CASE("gradient vanishes at the target on realizable data; p=2 hessian is XtX/n") {
    Eigen::VectorXd w(3);
    w << 0.3, -1, 2;
    auto spec = gaussian_spec(3, 0.0, w);
    Dataset ds = sample(spec, 40, 5);
    for (double p : {1.5, 2.0, 3.0})
        CHECK(empirical_grad(ds, p, w).norm() == doctest::Approx(0.0).epsilon(1e-12));
    Eigen::MatrixXd h = empirical_hessian(ds, 2.0, w);
    Eigen::MatrixXd xtx = ds.design.transpose() * ds.design / static_cast<double>(ds.n());
    CHECK((h - xtx).norm() < 1e-12);
}

TEST_CASE("gradient and hessian match finite differences on random data") {
    Eigen::VectorXd w(3);
    w << 1, 0.5, -0.25;
    auto spec = gaussian_spec(3, 1.0, w);
    Dataset ds = sample(spec, 200, 11);
    RngStream rng(23);
    for (double p : {1.5, 2.0, 2.7, 4.0}) {
        Eigen::VectorXd probe(3);
        for (int j = 0; j < 3; ++j) probe[j] = w[j] + 0.3 * rng.normal();
        Eigen::VectorXd g = empirical_grad(ds, p, probe);
        for (int j = 0; j < 3; ++j) {
            double h = 1e-6 * std::max(1.0, std::fabs(probe[j]));
            Eigen::VectorXd e = Eigen::VectorXd::Unit(3, j);
            double fd = (empirical_risk(ds, p, probe + h * e) -
                         empirical_risk(ds, p, probe - h * e)) /
                        (2.0 * h);
            CHECK(std::fabs(fd - g[j]) <= 1e-5 * std::max(1.0, std::fabs(g[j])));
        }
    }
}

TEST_CASE("fit matches the normal equations for p = 2") {
    RngStream seeds(101);
    for (int rep = 0; rep < 10; ++rep) {
        int d = 2 + static_cast<int>(seeds.next_u64() % 6);
        int n = d + 20 + static_cast<int>(seeds.next_u64() % 100);
        Eigen::VectorXd w(d);
        for (int j = 0; j < d; ++j) w[j] = seeds.normal();
        auto spec = gaussian_spec(d, 0.5, w);
        Dataset ds = sample(spec, n, seeds.next_u64());
        ErmSolution sol = fit(ds, 2.0);
        CHECK(sol.converged);
        CHECK((sol.weights - least_squares_oracle(ds)).norm() < 1e-8);
    }
}

TEST_CASE("realizable full-rank fits recover the target for p in {1.5, 3}") {
    Eigen::VectorXd w(3);
    w << 1, -0.5, 0.25;
    auto spec = gaussian_spec(3, 0.0, w);
    for (double p : {1.5, 3.0}) {
        Dataset ds = sample(spec, 50, 77);
        ErmSolution sol = fit(ds, p);
        CHECK(sol.converged);
        CHECK((sol.weights - w).norm() < 1e-8);
    }
}

TEST_CASE("symmetric 1-d dataset fits to zero") {
    Dataset ds;
    ds.design = Eigen::MatrixXd::Ones(2, 1);
    ds.response.resize(2);
    ds.response << 1, -1;
    ErmSolution sol = fit(ds, 2.0);
    CHECK(std::fabs(sol.weights[0]) < 1e-10);
}

TEST_CASE("fit converges to a first-order point for fractional and large p") {
    Eigen::VectorXd w(4);
    w << 2, -1, 0.5, 0;
    for (double p : {1.3, 1.5, 2.5, 3.0, 4.5}) {
        auto spec = DistributionSpec(GaussianCovariates{Eigen::MatrixXd::Identity(4, 4)}, false, w,
                                     NoiseFamily::student_t(6.0, 1.0, 0.1));
        Dataset ds = sample(spec, 400, static_cast<std::uint64_t>(p * 1000));
        ErmSolution sol = fit(ds, p);
        CHECK(sol.converged);
        CHECK(empirical_grad(ds, p, sol.weights).norm() <=
              1e-10 * (1.0 + empirical_risk(ds, p, least_squares_oracle(ds))));
        // Local optimality along random perturbations.
        RngStream rng(31);
        double base = empirical_risk(ds, p, sol.weights);
        for (int k = 0; k < 1000; ++k) {
            Eigen::VectorXd delta(4);
            for (int j = 0; j < 4; ++j) delta[j] = rng.normal();
            delta *= 1e-3 / delta.norm();
            CHECK(empirical_risk(ds, p, sol.weights + delta) >= base - 1e-12);
        }
    }
}

TEST_CASE("fit is deterministic and scale-equivariant") {
    Eigen::VectorXd w(3);
    w << 1, 2, -1;
    auto spec = gaussian_spec(3, 1.0, w);
    Dataset ds = sample(spec, 150, 55);
    for (double p : {1.5, 3.0}) {
        ErmSolution a = fit(ds, p);
        ErmSolution b = fit(ds, p);
        CHECK(a.weights == b.weights);
        // Scaling Y scales the minimizer.
        Dataset scaled = ds;
        const double c = 3.5;
        scaled.response *= c;
        ErmSolution s = fit(scaled, p);
        CHECK((s.weights - c * a.weights).norm() < 1e-6 * c * a.weights.norm());
    }
}

TEST_CASE("population risk gaussian closed form at p = 2") {
    Eigen::VectorXd w(2);
    w << 1, -1;
    auto spec = gaussian_spec(2, 1.0, w);
    // R(w*) = sigma^2 / 2.
    McEstimate at_opt = population_risk(spec, 2.0, w, 200000, 12);
    CHECK(std::fabs(at_opt.value - 0.5) < 3.0 * at_opt.std_error);
    // Realizable, shifted by delta: R = ||delta||^2 / 2.
    auto clean = gaussian_spec(2, 0.0, w);
    Eigen::VectorXd shifted = w;
    shifted[0] += 1.0;
    McEstimate off = population_risk(clean, 2.0, shifted, 200000, 12);
    CHECK(std::fabs(off.value - 0.5) < 3.0 * off.std_error);
}

TEST_CASE("unsmoothed hessian propagates the singularity on zero residuals") {
    Eigen::VectorXd w(2);
    w << 1, -2;
    auto spec = gaussian_spec(2, 0.0, w);
    Dataset ds = sample(spec, 30, 4);
    CHECK_THROWS_AS(empirical_hessian(ds, 1.5, w), SingularityError);
    // The clamped variant is total and the p = 2 case never needs it.
    CHECK(empirical_hessian_clamped(ds, 1.5, w, 1.0).allFinite());
    CHECK(empirical_hessian(ds, 2.0, w).allFinite());
}

TEST_CASE("population risk rejects missing moments") {
    Eigen::VectorXd w(2);
    w << 1, 0;
    auto heavy = DistributionSpec(StudentTCovariates{3.0, Eigen::MatrixXd::Identity(2, 2)}, false,
                                  w, NoiseFamily::none());
    CHECK_THROWS_AS(population_risk(heavy, 4.0, w, 1000, 1), MomentViolation);
}

TEST_CASE("excess risk with common random numbers") {
    Eigen::VectorXd w(3);
    w << 0.5, 1, -2;
    auto spec = gaussian_spec(3, 1.0, w);
    McEstimate zero = excess_risk(spec, 2.0, w, 100000, 21);
    CHECK(std::fabs(zero.value) <= 3.0 * zero.std_error);
    Eigen::VectorXd off = w;
    off[0] += 1.0;
    McEstimate half = excess_risk(spec, 2.0, off, 100000, 21);
    CHECK(std::fabs(half.value - 0.5) < 3.0 * half.std_error + 0.01);
    CHECK(half.std_error < 0.01);  // common random numbers cancel most noise
}
