#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "lpreg/distributions.hpp"

namespace lpreg {

struct McOptions {
    long samples = 1000000;
    std::uint64_t seed = 1;
    int restarts = 32;
    // Cap on the sample block used inside the non-polynomial sphere
    // ascents (the L^p-norm ratio for p not in {2,4}); those constants
    // only enter higher-order bound terms.
    long sup_samples = 200000;
};

// Every distribution-dependent quantity the excess-risk bounds consume.
// All expectations are estimated from one shared sample block drawn with
// sample(spec, mc_samples, seed), so identities that hold pathwise hold
// exactly between the stored estimates.
struct ConstantEstimates {
    double p = 2.0;
    Eigen::MatrixXd hessian;   // H_p = E[|r*|^{p-2} X X^T]
    double v_p = 0.0;          // E||grad l_p(r*)||^2_{H_p^{-1}}
    double sigma_p_sq = 1.0;   // sup over the H_p unit sphere of E<w,Z>^4
    double c_p_lp = 1.0;       // C_{L^p -> (L^2,p)}
    double c_p_l2 = 1.0;       // C^2_{L^2 -> (L^2,p)}
    double c_star_p = 1.0;     // E|r*|^{2(p-2)}
    double c_star_p_se = 0.0;  // jackknife standard error of c_star_p
    std::optional<double> epsilon;  // p in (1,2) only
    std::optional<double> t_star;   // p in (1,2) only
    long mc_samples = 0;
    std::uint64_t seed = 0;
};

// Named moment hypotheses of the bound for this (spec, p) pair.
struct HypothesisReport {
    std::vector<std::pair<std::string, bool>> items;
    bool ok() const;
    std::string first_failure() const;
};

HypothesisReport theorem_hypotheses(const DistributionSpec& spec, double p);

// Full build; throws MomentViolation when the theorem hypotheses fail and
// NonPositiveDefinite when the estimated Hessian is degenerate
// (eigenvalue <= 0 or condition number above 1e12).
ConstantEstimates estimate_constants(const DistributionSpec& spec, double p,
                                     const McOptions& opts = {});

// E[|<w,X>|^p]^{1/p}.
double lp_norm(const DistributionSpec& spec, const Eigen::VectorXd& w, double p,
               const McOptions& opts = {});

// E[ ||w||^q_{hess l_p(r*)} ]^{1/q} = E[|r*|^{q(p-2)/2} |<w,X>|^q]^{1/q}.
double lqp_norm(const DistributionSpec& spec, const Eigen::VectorXd& w, double q, double p,
                const McOptions& opts = {});

struct HessianAtMinimizer {
    Eigen::MatrixXd hessian;
    double v_p = 0.0;
};

HessianAtMinimizer hessian_at_minimizer(const DistributionSpec& spec, double p,
                                        const McOptions& opts = {});

enum class EquivalenceKind { SigmaP, CLp, CL2 };

double equivalence_constant(const DistributionSpec& spec, double p, EquivalenceKind kind,
                            const McOptions& opts = {});

// ---------------------------------------------------------------------------
// Small-ball probabilities
// ---------------------------------------------------------------------------

struct SmallBallReport {
    double rho_sup = 0.0;         // sup over nonzero w of P(<w,X> = 0)
    std::vector<double> rho0;     // per probe
    std::vector<double> rho_q;    // per probe, P(|<w,X>| > kappa ||w||_{L^q})
    std::string method;           // "exact-enumeration" or "monte-carlo"
};

// Discrete specs are enumerated exactly; the supremum is taken over the
// normal directions determined by (d-1)-subsets of the atoms. Continuous
// specs have rho = 0 and rho_q is estimated by Monte Carlo.
SmallBallReport small_ball(const DistributionSpec& spec, const std::vector<Eigen::VectorXd>& probes,
                           double kappa, double q, const McOptions& opts = {});

// ---------------------------------------------------------------------------
// Truncation constants of the p < 2 analysis
// ---------------------------------------------------------------------------

struct Prop2Constants {
    double epsilon;
    double t_star;
};

// epsilon^{p-2} = 8 sigma_p^{3-p} (d c_p)^{(2-p)/2} sqrt(c*_p) and
// T* = (d c_p / (c*_p (2-p)))^{1/(6-2p)}; requires p in (1,2).
Prop2Constants prop2_constants(double sigma_p, double d, double c_p_l2, double c_star_p, double p);

// JSON round-trip for archiving estimates alongside experiment output.
std::string constants_to_json(const ConstantEstimates& c);
ConstantEstimates constants_from_json(const std::string& text);

}  // namespace lpreg
