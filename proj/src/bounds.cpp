#include "lpreg/bounds.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace lpreg {

namespace {

void check_delta(double delta) {
    if (!(delta > 0.0 && delta <= 1.0))
        throw std::domain_error("delta must lie in (0, 1]");
}

std::string fmt(double v) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace

long threshold(double sigma_sq, int d, double delta) {
    check_delta(delta);
    if (d < 1) throw std::domain_error("threshold: d must be >= 1");
    if (!(sigma_sq >= 1.0)) throw std::domain_error("threshold: sigma_sq must be >= 1");
    return static_cast<long>(
        std::ceil(196.0 * sigma_sq * (static_cast<double>(d) + 2.0 * std::log(4.0 / delta))));
}

BoundTerms bound_p2(double v, double n, double delta) {
    check_delta(delta);
    if (!(n >= 1.0) || v < 0.0) throw std::domain_error("bound_p2: bad inputs");
    return {16.0 * v / (n * delta), 0.0};
}

BoundTerms bound_pgeq2(double v, double n, double delta, double p, double c_lp) {
    check_delta(delta);
    if (!(p > 2.0)) throw std::domain_error("bound_pgeq2: p must be > 2");
    if (!(n >= 1.0) || v < 0.0 || c_lp < 0.0) throw std::domain_error("bound_pgeq2: bad inputs");
    BoundTerms t;
    t.leading = 2048.0 * p * p * v / (n * delta);
    t.higher_order = std::pow(512.0 * std::pow(p, 4.0) * c_lp * c_lp * v / (n * delta), 0.5 * p);
    return t;
}

BoundTerms bound_pleq2(double v, double n, double delta, double p, double sigma_p, double d,
                       double c_l2, double c_star) {
    check_delta(delta);
    if (!(p > 1.0 && p < 2.0)) throw std::domain_error("bound_pleq2: p must be in (1,2)");
    if (!(n >= 1.0) || v < 0.0) throw std::domain_error("bound_pleq2: bad inputs");
    BoundTerms t;
    t.leading = 8192.0 / (p - 1.0) * v / (n * delta);
    double inner = 524288.0 * v * std::pow(sigma_p, 6.0 - 2.0 * p) * std::pow(d, 2.0 - p) *
                   std::pow(c_l2, 2.0 - p) * c_star / (n * delta);
    t.higher_order = std::pow(inner, 1.0 / (p - 1.0)) / (p - 1.0);
    return t;
}

double realizable_tail(long n, int d, double rho) {
    if (!(rho >= 0.0 && rho < 1.0)) throw std::domain_error("realizable_tail: rho must be in [0,1)");
    if (d < 1 || n < d) throw std::domain_error("realizable_tail: need n >= d >= 1");
    if (rho == 0.0) return 0.0;
    double log_binom = std::lgamma(static_cast<double>(n) + 1.0) -
                       std::lgamma(static_cast<double>(d)) -
                       std::lgamma(static_cast<double>(n - d + 2));
    double k = static_cast<double>(n - d + 1);
    double log_tail = log_binom + k * std::log(rho);
    if (log_tail < -745.0) return 0.0;
    // The binomial coefficient is an integer; recover it exactly while it
    // fits a double so that small cases evaluate without exp/log rounding.
    if (log_binom < 36.0)
        return std::clamp(std::round(std::exp(log_binom)) * std::pow(rho, k), 0.0, 1.0);
    return std::clamp(std::exp(log_tail), 0.0, 1.0);
}

RealizableSampleSize realizable_sample_size(int d, double delta, double rho) {
    check_delta(delta);
    if (!(rho >= 0.0 && rho < 1.0))
        throw std::domain_error("realizable_sample_size: rho must be in [0,1)");
    if (d < 1) throw std::domain_error("realizable_sample_size: d must be >= 1");

    RealizableSampleSize out;
    const double e_inv = std::exp(-1.0);
    const double e_inv_e = std::exp(-std::exp(-1.0));
    if (rho < e_inv)
        out.regime = "0 <= rho < e^{-1}";
    else if (rho < e_inv_e)
        out.regime = "e^{-1} <= rho < e^{-1/e}";
    else
        out.regime = "e^{-1/e} <= rho < 1";

    if (rho == 0.0) {
        out.n = d;
        return out;
    }

    // tail(n+1)/tail(n) = rho (n+1)/(n+2-d): the tail is unimodal in n with
    // its peak where that ratio crosses 1.
    long peak = std::max<long>(d, static_cast<long>(
        std::ceil((static_cast<double>(d) - 2.0 + rho) / (1.0 - rho))));
    if (realizable_tail(peak, d, rho) <= delta) {
        // The whole increasing branch sits below delta as well.
        out.n = d;
        return out;
    }
    long lo = peak;  // tail(lo) > delta
    long hi = std::max<long>(peak + 1, 2 * peak);
    while (realizable_tail(hi, d, rho) > delta) {
        lo = hi;
        hi *= 2;
        if (hi > (1L << 60)) throw std::runtime_error("realizable_sample_size: search overflow");
    }
    while (hi - lo > 1) {
        long mid = lo + (hi - lo) / 2;
        if (realizable_tail(mid, d, rho) > delta)
            lo = mid;
        else
            hi = mid;
    }
    out.n = hi;
    return out;
}

double realizable_vc_threshold_shape(int d, double delta, double rho) {
    check_delta(delta);
    if (!(rho >= 0.0 && rho < 1.0)) throw std::domain_error("rho must be in [0,1)");
    return (static_cast<double>(d) + std::log(1.0 / delta)) / ((1.0 - rho) * (1.0 - rho));
}

double lower_tail_factor(double sigma, double d, double delta, double n) {
    check_delta(delta);
    if (!(sigma > 0.0 && d > 0.0 && n > 0.0))
        throw std::domain_error("lower_tail_factor: inputs must be positive");
    return 1.0 - 7.0 * sigma * std::sqrt((d + 2.0 * std::log(2.0 / delta)) / n);
}

double markov_grad_bound(double v, double n, double delta) {
    check_delta(delta);
    if (v < 0.0 || !(n > 0.0)) throw std::domain_error("markov_grad_bound: bad inputs");
    return std::sqrt(2.0 * v / (n * delta));
}

std::string BoundReport::to_json() const {
    nlohmann::json j;
    j["theorem"] = theorem;
    j["p"] = p;
    j["d"] = d;
    j["n"] = n;
    j["delta"] = delta;
    j["sigma_sq"] = sigma_sq;
    j["v"] = v;
    j["c_lp"] = c_lp;
    j["c_l2"] = c_l2;
    j["c_star"] = c_star;
    j["rho"] = rho;
    j["threshold_n"] = threshold_n;
    j["threshold_met"] = threshold_met;
    j["leading_term"] = terms.leading;
    j["higher_order_term"] = terms.higher_order;
    j["bound_value"] = terms.total();
    return j.dump(2);
}

std::string BoundReport::csv_header() const {
    return "theorem,p,d,n,delta,sigma_sq,v,c_lp,c_l2,c_star,rho,threshold_n,threshold_met,"
           "leading_term,higher_order_term,bound_value";
}

std::string BoundReport::csv_row() const {
    std::ostringstream os;
    os << theorem << "," << fmt(p) << "," << d << "," << fmt(n) << "," << fmt(delta) << ","
       << fmt(sigma_sq) << "," << fmt(v) << "," << fmt(c_lp) << "," << fmt(c_l2) << ","
       << fmt(c_star) << "," << fmt(rho) << "," << threshold_n << "," << (threshold_met ? 1 : 0)
       << "," << fmt(terms.leading) << "," << fmt(terms.higher_order) << "," << fmt(terms.total());
    return os.str();
}

}  // namespace lpreg
