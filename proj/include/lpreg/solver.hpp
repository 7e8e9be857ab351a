#pragma once

#include <Eigen/Dense>
#include <optional>

#include "lpreg/distributions.hpp"
#include "lpreg/loss.hpp"

namespace lpreg {

struct SolverOptions {
    std::optional<double> tol;  // absolute, on ||grad||_2; default 1e-10 * (1 + R(w_init))
    int max_iter = 200;
    std::optional<double> mu0;  // initial residual clamp for p < 2; default RMS residual
    double homotopy_factor = 4.0;
    bool quiet = true;  // suppress the n < d warning
};

struct ErmSolution {
    Eigen::VectorXd weights;
    double grad_norm = 0.0;
    int iterations = 0;
    bool converged = false;
    // Unsmoothed empirical Hessian at the returned weights, when it exists
    // (for p < 2 it does not if some residual is exactly zero).
    std::optional<Eigen::MatrixXd> empirical_hessian_at;
};

double empirical_risk(const Dataset& ds, double p, const Eigen::VectorXd& w);
Eigen::VectorXd empirical_grad(const Dataset& ds, double p, const Eigen::VectorXd& w);

// Average of l''_p(r_i) X_i X_i^T; throws SingularityError for p < 2 when
// some residual is exactly zero (use the clamped variant there).
Eigen::MatrixXd empirical_hessian(const Dataset& ds, double p, const Eigen::VectorXd& w);
Eigen::MatrixXd empirical_hessian_clamped(const Dataset& ds, double p, const Eigen::VectorXd& w,
                                          double mu);

// Damped Newton on the empirical risk, started from the least-squares
// solution. For p < 2 the curvature clamp mu follows the homotopy
// schedule mu_k = mu0 * factor^{-k}; for p > 2 the Hessian gets a
// 1e-12 * trace/d ridge against vanishing curvature at zero residuals.
// Non-convergence within max_iter returns the best iterate with
// converged = false; non-finite values throw NumericalBreakdown.
ErmSolution fit(const Dataset& ds, double p, const SolverOptions& opts = {});

struct McEstimate {
    double value = 0.0;
    double std_error = 0.0;
    long samples = 0;
};

// Monte Carlo estimate of R_p(w) = E l_p(<w,X> - Y).
McEstimate population_risk(const DistributionSpec& spec, double p, const Eigen::VectorXd& w,
                           long mc_samples, std::uint64_t seed);

// R_p(w) - R_p(w*_p) on common random numbers. Throws
// EstimatorInconsistency if the estimate is below -3 standard errors.
McEstimate excess_risk(const DistributionSpec& spec, double p, const Eigen::VectorXd& w,
                       long mc_samples, std::uint64_t seed);

}  // namespace lpreg
