#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "lpreg/errors.hpp"
#include "lpreg/rng.hpp"

namespace lpreg {

// ---------------------------------------------------------------------------
// Covariate families
// ---------------------------------------------------------------------------

struct GaussianCovariates {
    Eigen::MatrixXd covariance;  // SPD
};

// Multivariate Student-t: x = L z sqrt(nu / W), W ~ chi^2_nu, LL^T = scale.
struct StudentTCovariates {
    double nu;
    Eigen::MatrixXd scale;
};

struct DiscreteCovariates {
    Eigen::MatrixXd atoms;          // one atom per row
    Eigen::VectorXd probabilities;  // sums to 1
};

struct Marginal {
    enum class Kind { Gaussian, StudentT, Laplace };
    Kind kind = Kind::Gaussian;
    double scale = 1.0;
    double nu = 0.0;  // StudentT only
};

struct ProductCovariates {
    std::vector<Marginal> coordinates;
};

using CovariateFamily =
    std::variant<GaussianCovariates, StudentTCovariates, DiscreteCovariates, ProductCovariates>;

// ---------------------------------------------------------------------------
// Noise
// ---------------------------------------------------------------------------

// Additive noise, independent of X and symmetric about 0 (so that the
// population minimizer of every p-risk coincides with the target weights).
// For StudentT, |eps| = shift + scale * |T_nu| with a symmetric random
// sign; shift > 0 keeps the residual away from 0, which makes the
// negative moments required for p < 2 finite by construction.
struct NoiseFamily {
    enum class Kind { None, Gaussian, StudentT, Laplace };
    Kind kind = Kind::None;
    double scale = 0.0;
    double nu = 0.0;
    double shift = 0.0;

    static NoiseFamily none() { return {}; }
    static NoiseFamily gaussian(double sigma) { return {Kind::Gaussian, sigma, 0.0, 0.0}; }
    static NoiseFamily student_t(double nu, double scale, double shift = 0.0) {
        return {Kind::StudentT, scale, nu, shift};
    }
    static NoiseFamily laplace(double b) { return {Kind::Laplace, b, 0.0, 0.0}; }
};

// ---------------------------------------------------------------------------
// DistributionSpec
// ---------------------------------------------------------------------------

class DistributionSpec {
  public:
    // target_weights has the ambient dimension: base covariate dimension
    // plus one if intercept is set (the constant coordinate is prepended).
    DistributionSpec(CovariateFamily covariates, bool intercept,
                     Eigen::VectorXd target_weights, NoiseFamily noise);

    int base_dim() const { return base_dim_; }
    int dim() const { return base_dim_ + (intercept_ ? 1 : 0); }
    bool intercept() const { return intercept_; }
    bool realizable() const { return noise_.kind == NoiseFamily::Kind::None; }
    bool discrete() const { return std::holds_alternative<DiscreteCovariates>(covariates_); }

    const CovariateFamily& covariates() const { return covariates_; }
    const NoiseFamily& noise() const { return noise_; }
    const Eigen::VectorXd& target_weights() const { return target_weights_; }

    // Symmetric independent noise makes w*_p = target for every p.
    const Eigen::VectorXd& population_minimizer() const { return target_weights_; }

    // One covariate draw in ambient coordinates.
    Eigen::VectorXd sample_x(RngStream& rng) const;
    double sample_noise(RngStream& rng) const;

    // E[X X^T] in ambient coordinates, in closed form.
    Eigen::MatrixXd second_moment_matrix() const;

    // Effective atoms (with intercept coordinate) for discrete specs.
    Eigen::MatrixXd effective_atoms() const;

    std::string fingerprint() const;

  private:
    CovariateFamily covariates_;
    bool intercept_;
    Eigen::VectorXd target_weights_;
    NoiseFamily noise_;
    int base_dim_;
    Eigen::MatrixXd chol_;  // covariate Cholesky factor (gaussian / student-t)
};

// ---------------------------------------------------------------------------
// Moment queries (analytic)
// ---------------------------------------------------------------------------

struct MomentReport {
    std::vector<bool> coordinate;  // per ambient coordinate of X
    bool response = false;
    bool all() const;
    bool coordinates_all() const;
};

// Does E|X^j|^order (per coordinate) and E|Y|^order exist? Decided
// analytically: gaussian/discrete/laplace have all orders, student-t(nu)
// has orders strictly below nu.
MomentReport moment_exists(const DistributionSpec& spec, double order);

// E|eps|^order for the noise alone (order > 0).
bool noise_moment_exists(const DistributionSpec& spec, double order);

// E|eps|^{-a} < inf for a > 0? None -> false; shifted noise -> true;
// otherwise the density is positive at 0 and the moment exists iff a < 1.
bool negative_noise_moment_exists(const DistributionSpec& spec, double a);

// P(|<w*, X> - Y| > 0) = 1 (the strengthened non-realizability needed
// for p < 2).
bool strongly_nonrealizable(const DistributionSpec& spec);

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

struct Dataset {
    Eigen::MatrixXd design;    // n x d, row i = X_i
    Eigen::VectorXd response;  // n
    std::uint64_t seed = 0;
    std::string spec_fingerprint;

    Eigen::Index n() const { return design.rows(); }
    Eigen::Index dim() const { return design.cols(); }
};

// n i.i.d. rows; bit-reproducible for fixed (spec, n, seed). Row i draws
// from a stream keyed by (seed, i), so datasets of different sizes share
// prefixes and rows may be generated in parallel.
Dataset sample(const DistributionSpec& spec, Eigen::Index n, std::uint64_t seed);

// CSV persistence: header "x1,...,xd,y", LF line endings, shortest
// round-trip number formatting.
void save_csv(const Dataset& ds, const std::string& path);
Dataset load_csv(const std::string& path);

}  // namespace lpreg
