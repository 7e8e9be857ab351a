#pragma once

#include <Eigen/Dense>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "lpreg/bounds.hpp"
#include "lpreg/constants.hpp"
#include "lpreg/distributions.hpp"
#include "lpreg/solver.hpp"

namespace lpreg {

// ---------------------------------------------------------------------------
// Campaign configuration and results
// ---------------------------------------------------------------------------

struct ExperimentConfig {
    DistributionSpec spec;
    double p = 2.0;
    std::vector<long> n_grid;
    long trials = 100;
    double delta = 0.1;
    std::uint64_t master_seed = 0;
    std::optional<ConstantEstimates> constants;  // estimated when absent
    McOptions constants_mc;
    long mc_eval_samples = 100000;  // per-trial excess-risk evaluation
    SolverOptions solver;
    int workers = 0;  // 0 = hardware concurrency
};

struct TrialRecord {
    long n = 0;
    long trial = 0;
    std::uint64_t seed = 0;
    // NaN until the trial succeeds; failed trials keep NaN in the CSV.
    double excess = std::numeric_limits<double>::quiet_NaN();
    double grad_dual_norm = std::numeric_limits<double>::quiet_NaN();
    bool recovered = false;
    bool failed = false;
    std::string error;
};

struct GridAggregate {
    long n = 0;
    long ok_trials = 0;
    double mean_excess = 0.0;
    double excess_quantile = 0.0;  // empirical (1 - delta) quantile
    double bound_value = 0.0;
    double coverage_violation_fraction = 0.0;
    double failure_rate = 0.0;     // realizable campaigns
    double failure_bound = 0.0;    // binomial tail + 2 s.e.
    bool violated = false;
};

struct ExperimentResult {
    std::vector<TrialRecord> trials;  // ordered by (n index, trial index)
    std::vector<GridAggregate> per_n;
    double slope = 0.0;
    double slope_se = 0.0;
    double rate_ratio = 0.0;  // mean excess * 2n / V_p at the largest n
    double rho = 0.0;         // realizable campaigns
    ConstantEstimates constants;
};

// Fits `trials` fresh datasets per grid point, records per-trial excess
// risks and gradient dual norms, and aggregates coverage against the
// matching theorem bound, the log-log rate slope, and the ratio of the
// mean excess to the asymptotic leading term. Per-trial failures are
// recorded, not propagated.
ExperimentResult excess_risk_campaign(const ExperimentConfig& cfg);

// Exact-recovery campaign for realizable discrete specs: per grid point,
// the empirical failure rate is compared against the binomial tail bound
// plus two binomial standard errors.
ExperimentResult realizable_campaign(const ExperimentConfig& cfg);

struct CoverageReport {
    double threshold_value = 0.0;  // the bound being tested per trial
    long trials = 0;
    long ok_trials = 0;
    long violations = 0;
    double violation_fraction = 0.0;
    double allowed_fraction = 0.0;  // target probability + 2 binomial s.e.
    bool violated = false;
    double statistic_mean = 0.0;  // campaign-specific per-trial statistic
    double statistic_se = 0.0;
};

// Minimum eigenvalue of the whitened empirical second-moment matrix of X
// versus the lower-tail factor 1 - 7 sigma sqrt((d + 2 ln(2/delta))/n).
// `whitening` is the population second-moment matrix of X.
CoverageReport lower_tail_campaign(const DistributionSpec& spec, const Eigen::MatrixXd& whitening,
                                   double sigma_sq, double delta, long n, long trials,
                                   std::uint64_t master_seed, int workers = 0);

// Minimum eigenvalue of H_p^{-1/2} H_{p,n} H_p^{-1/2} versus 1/2 at the
// curvature threshold; the guarantee level is delta/2.
CoverageReport curvature_campaign(const DistributionSpec& spec, double p, long n, double delta,
                                  long trials, std::uint64_t master_seed,
                                  const ConstantEstimates& constants, int workers = 0);

// Empirical gradient dual norm at the population minimizer versus
// sqrt(2 V_p / (n delta)); the guarantee level is delta/2. The statistic
// reported is the mean squared dual norm (its expectation is V_p / n).
CoverageReport markov_grad_campaign(const DistributionSpec& spec, double p, long n, double delta,
                                    long trials, std::uint64_t master_seed,
                                    const ConstantEstimates& constants, int workers = 0);

// Empirical gamma_p average over probe directions versus the
// (1/8) min(a^2, eps^{2-p} a^p) envelope; a trial violates when any probe
// fails. Directions are uniform on the H_p sphere at magnitudes
// {0.01, 0.1, 1, 10} * eps.
struct GammaLowerReport {
    CoverageReport trial_level;
    long probe_pairs = 0;
    long probe_violations = 0;
    double epsilon = 0.0;
};

GammaLowerReport gamma_lower_campaign(const DistributionSpec& spec, double p, long n, double delta,
                                      long trials, long probe_count, std::uint64_t master_seed,
                                      const ConstantEstimates& constants, int workers = 0);

// Analytic empirical gradient / Hessian versus central finite differences
// of the empirical risk on a fixed common-random-number block.
struct DerivativeCheckReport {
    std::vector<double> grad_rel_error;  // per probe
    std::vector<double> hess_rel_error;
    double max_grad_rel_error = 0.0;
    double max_hess_rel_error = 0.0;
};

DerivativeCheckReport derivative_check_campaign(const DistributionSpec& spec, double p,
                                                const std::vector<Eigen::VectorXd>& probes,
                                                long mc_samples, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Output writers (atomic: temp file + rename)
// ---------------------------------------------------------------------------

void write_trials_csv(const std::vector<TrialRecord>& trials, const std::string& path);

std::string experiment_summary_json(const ExperimentConfig& cfg, const ExperimentResult& res);

// ln(mean excess) against ln(n) with the bound overlay.
void write_rate_svg(const ExperimentResult& res, const std::string& path);

void write_text_atomic(const std::string& text, const std::string& path);

}  // namespace lpreg
