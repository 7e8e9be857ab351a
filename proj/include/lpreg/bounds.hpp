#pragma once

#include <string>

namespace lpreg {

// Sample-size threshold shared by the non-realizable bounds:
// ceil(196 sigma^2 (d + 2 ln(4/delta))).
long threshold(double sigma_sq, int d, double delta);

struct BoundTerms {
    double leading = 0.0;
    double higher_order = 0.0;
    double total() const { return leading + higher_order; }
};

// p = 2: 16 V / (n delta); single term.
BoundTerms bound_p2(double v, double n, double delta);

// p > 2: 2048 p^2 V / (n delta) + (512 p^4 c_lp^2 V / (n delta))^{p/2}.
BoundTerms bound_pgeq2(double v, double n, double delta, double p, double c_lp);

// p in (1,2): (8192/(p-1)) V/(n delta)
//   + (1/(p-1)) (524288 V sigma^{6-2p} d^{2-p} c_l2^{2-p} c* / (n delta))^{1/(p-1)}.
BoundTerms bound_pleq2(double v, double n, double delta, double p, double sigma_p, double d,
                       double c_l2, double c_star);

// P(recovery failure) <= C(n, d-1) rho^{n-d+1}, evaluated in log space and
// clamped to [0, 1]. Requires n >= d and rho in [0, 1).
double realizable_tail(long n, int d, double rho);

struct RealizableSampleSize {
    long n = 0;
    std::string regime;  // which of the three rho brackets applies
};

// Minimal n >= d from which the binomial tail stays below delta, found by
// exponential-then-binary search on the decreasing branch of the tail.
RealizableSampleSize realizable_sample_size(int d, double delta, double rho);

// Comparison-only threshold shape of the VC-based realizable result,
// evaluated with constant 1: (d + ln(1/delta)) / (1-rho)^2.
double realizable_vc_threshold_shape(int d, double delta, double rho);

// 1 - 7 sigma sqrt((d + 2 ln(2/delta)) / n); may be negative (vacuous).
double lower_tail_factor(double sigma, double d, double delta, double n);

// sqrt(2 V / (n delta)): the 1 - delta/2 quantile bound on the dual norm
// of the empirical gradient at the population minimizer.
double markov_grad_bound(double v, double n, double delta);

// ---------------------------------------------------------------------------
// Report bundling for the CLI
// ---------------------------------------------------------------------------

struct BoundReport {
    std::string theorem;  // "1", "3", "4", "5", "prop1", "lemma2"
    double p = 2.0;
    int d = 0;
    double n = 0.0;
    double delta = 0.0;
    double sigma_sq = 0.0;
    double v = 0.0;
    double c_lp = 0.0;
    double c_l2 = 0.0;
    double c_star = 0.0;
    double rho = 0.0;
    long threshold_n = 0;
    bool threshold_met = false;
    BoundTerms terms;

    std::string to_json() const;
    std::string csv_header() const;
    std::string csv_row() const;
};

}  // namespace lpreg
