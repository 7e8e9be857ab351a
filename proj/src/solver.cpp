#include "lpreg/solver.hpp"

#include <cmath>
#include <iostream>
#include <limits>

namespace lpreg {

namespace {

Eigen::VectorXd residuals(const Dataset& ds, const Eigen::VectorXd& w) {
    return ds.design * w - ds.response;
}

constexpr double kMuFloor = 1e-100;

}  // namespace

double empirical_risk(const Dataset& ds, double p, const Eigen::VectorXd& w) {
    LossKernel k(p);
    Eigen::VectorXd r = residuals(ds, w);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < r.size(); ++i) acc += k.loss(r[i]);
    return acc / static_cast<double>(r.size());
}

Eigen::VectorXd empirical_grad(const Dataset& ds, double p, const Eigen::VectorXd& w) {
    LossKernel k(p);
    Eigen::VectorXd r = residuals(ds, w);
    Eigen::VectorXd scale(r.size());
    for (Eigen::Index i = 0; i < r.size(); ++i) scale[i] = k.grad(r[i]);
    return ds.design.transpose() * scale / static_cast<double>(r.size());
}

Eigen::MatrixXd empirical_hessian_clamped(const Dataset& ds, double p, const Eigen::VectorXd& w,
                                          double mu) {
    LossKernel k(p);
    Eigen::VectorXd r = residuals(ds, w);
    Eigen::VectorXd curv(r.size());
    for (Eigen::Index i = 0; i < r.size(); ++i) curv[i] = k.hess_clamped(r[i], mu);
    Eigen::MatrixXd h = ds.design.transpose() * curv.asDiagonal() * ds.design /
                        static_cast<double>(r.size());
    return 0.5 * (h + h.transpose());
}

Eigen::MatrixXd empirical_hessian(const Dataset& ds, double p, const Eigen::VectorXd& w) {
    return empirical_hessian_clamped(ds, p, w, 0.0);
}

ErmSolution fit(const Dataset& ds, double p, const SolverOptions& opts) {
    if (!(p > 1.0)) throw std::invalid_argument("fit: p must be > 1");
    const Eigen::Index n = ds.n();
    const Eigen::Index d = ds.dim();
    if (n < d && !opts.quiet)
        std::cerr << "fit: warning: n = " << n << " < d = " << d
                  << ", the minimizer is not unique\n";

    // Least-squares start; exact for p = 2 on full-rank designs.
    Eigen::VectorXd w = ds.design.colPivHouseholderQr().solve(ds.response);
    if (!w.allFinite()) throw NumericalBreakdown("fit: least-squares initialization failed");

    double risk = empirical_risk(ds, p, w);
    if (!std::isfinite(risk)) throw NumericalBreakdown("fit: non-finite risk at initialization");
    const double tol = opts.tol.value_or(1e-10 * (1.0 + risk));

    double mu0 = 0.0;
    if (p < 2.0) {
        Eigen::VectorXd r0 = residuals(ds, w);
        mu0 = opts.mu0.value_or(std::sqrt(r0.squaredNorm() / static_cast<double>(n)));
        mu0 = std::max(mu0, kMuFloor);
    }

    Eigen::VectorXd g = empirical_grad(ds, p, w);
    if (!g.allFinite()) throw NumericalBreakdown("fit: non-finite gradient");

    ErmSolution best;
    best.weights = w;
    best.grad_norm = g.norm();
    double best_risk = risk;

    int it = 0;
    int stalls = 0;
    for (; it < opts.max_iter; ++it) {
        if (g.norm() <= tol) break;

        double mu = 0.0;
        if (p < 2.0) mu = std::max(mu0 * std::pow(opts.homotopy_factor, -it), kMuFloor);
        Eigen::MatrixXd h = empirical_hessian_clamped(ds, p, w, mu);
        if (p > 2.0) {
            double ridge = 1e-12 * h.trace() / static_cast<double>(d);
            h.diagonal().array() += std::max(ridge, 1e-300);
        }

        Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
        Eigen::VectorXd dir = ldlt.solve(-g);
        if (ldlt.info() != Eigen::Success || !dir.allFinite() || g.dot(dir) >= 0.0) {
            // Fall back to steepest descent if the factorization is unusable.
            dir = -g;
        }
        double slope = g.dot(dir);

        double alpha = 1.0;
        double new_risk = risk;
        Eigen::VectorXd cand;
        bool accepted = false;
        // Slack at the rounding noise of an n-term mean keeps the search
        // alive once true decreases drop below what the risk can resolve.
        const double flat = 8e-16 * std::sqrt(static_cast<double>(n)) * std::fabs(risk);
        for (int bt = 0; bt < 80; ++bt) {
            cand = w + alpha * dir;
            if (cand == w) break;  // step below floating-point resolution
            new_risk = empirical_risk(ds, p, cand);
            if (std::isfinite(new_risk) && new_risk <= risk + 1e-4 * alpha * slope + flat) {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) {
            // No progress at this smoothing level; for p < 2 the shrinking
            // clamp may still unlock a better direction, but give up after
            // a few consecutive dead line searches.
            ++stalls;
            if (p < 2.0 && mu > kMuFloor && stalls < 3) continue;
            break;
        }
        stalls = 0;

        w = cand;
        risk = new_risk;
        g = empirical_grad(ds, p, w);
        if (!g.allFinite() || !w.allFinite())
            throw NumericalBreakdown("fit: non-finite iterate");
        if (risk < best_risk || (risk == best_risk && g.norm() < best.grad_norm)) {
            best_risk = risk;
            best.weights = w;
            best.grad_norm = g.norm();
        }
    }

    ErmSolution out;
    const bool final_better = risk < best_risk || g.norm() <= tol;
    out.weights = final_better ? w : best.weights;
    out.grad_norm = final_better ? g.norm() : best.grad_norm;
    out.iterations = it;
    out.converged = out.grad_norm <= tol;
    try {
        out.empirical_hessian_at = empirical_hessian(ds, p, out.weights);
    } catch (const SingularityError&) {
        out.empirical_hessian_at.reset();
    }
    return out;
}

namespace {

struct Welford {
    long n = 0;
    double mean = 0.0;
    double m2 = 0.0;
    void add(double x) {
        ++n;
        double d1 = x - mean;
        mean += d1 / static_cast<double>(n);
        m2 += d1 * (x - mean);
    }
    double std_error() const {
        if (n < 2) return std::numeric_limits<double>::infinity();
        return std::sqrt(m2 / (static_cast<double>(n) * static_cast<double>(n - 1)));
    }
};

void check_population_moments(const DistributionSpec& spec, double p) {
    if (!moment_exists(spec, p).all())
        throw MomentViolation("population_risk: order-" + std::to_string(p) +
                              " moments do not exist for this spec");
}

}  // namespace

McEstimate population_risk(const DistributionSpec& spec, double p, const Eigen::VectorXd& w,
                           long mc_samples, std::uint64_t seed) {
    check_population_moments(spec, p);
    if (mc_samples < 2) throw std::invalid_argument("population_risk: need mc_samples >= 2");
    LossKernel k(p);
    Dataset mc = sample(spec, mc_samples, seed);
    Eigen::VectorXd r = mc.design * w - mc.response;
    Welford acc;
    for (Eigen::Index i = 0; i < r.size(); ++i) acc.add(k.loss(r[i]));
    return {acc.mean, acc.std_error(), acc.n};
}

McEstimate excess_risk(const DistributionSpec& spec, double p, const Eigen::VectorXd& w,
                       long mc_samples, std::uint64_t seed) {
    check_population_moments(spec, p);
    if (mc_samples < 2) throw std::invalid_argument("excess_risk: need mc_samples >= 2");
    LossKernel k(p);
    Dataset mc = sample(spec, mc_samples, seed);
    Eigen::VectorXd rw = mc.design * w - mc.response;
    Eigen::VectorXd ro = mc.design * spec.population_minimizer() - mc.response;
    Welford acc;
    for (Eigen::Index i = 0; i < rw.size(); ++i) acc.add(k.loss(rw[i]) - k.loss(ro[i]));
    McEstimate est{acc.mean, acc.std_error(), acc.n};
    if (est.value < -3.0 * est.std_error)
        throw EstimatorInconsistency("excess_risk: estimate " + std::to_string(est.value) +
                                     " below -3 standard errors");
    return est;
}

}  // namespace lpreg
