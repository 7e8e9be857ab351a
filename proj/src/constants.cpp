#include "lpreg/constants.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "lpreg/linalg.hpp"
#include "lpreg/loss.hpp"

namespace lpreg {

namespace {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Quartic moment tensor: mean of w w w w over samples, stored on the
// sorted-index simplex a <= b <= c <= e and expanded on demand.
// ---------------------------------------------------------------------------

class QuarticForm {
  public:
    QuarticForm(const Eigen::MatrixXd& rows) : d_(static_cast<int>(rows.cols())) {
        std::vector<double> sym;
        std::vector<std::array<int, 4>> idx;
        for (int a = 0; a < d_; ++a)
            for (int b = a; b < d_; ++b)
                for (int c = b; c < d_; ++c)
                    for (int e = c; e < d_; ++e) idx.push_back({a, b, c, e});
        sym.assign(idx.size(), 0.0);
        const Eigen::Index n = rows.rows();
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto& w = rows.row(i);
            for (std::size_t k = 0; k < idx.size(); ++k) {
                const auto& t = idx[k];
                sym[k] += w[t[0]] * w[t[1]] * w[t[2]] * w[t[3]];
            }
        }
        for (double& v : sym) v /= static_cast<double>(n);

        // Expand to the full d^4 tensor for cheap contractions.
        full_.assign(static_cast<std::size_t>(d_) * d_ * d_ * d_, 0.0);
        for (std::size_t k = 0; k < idx.size(); ++k) {
            int perm[4] = {idx[k][0], idx[k][1], idx[k][2], idx[k][3]};
            do {
                full_[flat(perm[0], perm[1], perm[2], perm[3])] = sym[k];
            } while (std::next_permutation(perm, perm + 4));
        }
    }

    double value(const Eigen::VectorXd& v) const {
        double acc = 0.0;
        for (int a = 0; a < d_; ++a)
            for (int b = 0; b < d_; ++b)
                for (int c = 0; c < d_; ++c)
                    for (int e = 0; e < d_; ++e)
                        acc += full_[flat(a, b, c, e)] * v[a] * v[b] * v[c] * v[e];
        return acc;
    }

    Eigen::VectorXd gradient(const Eigen::VectorXd& v) const {
        Eigen::VectorXd g = Eigen::VectorXd::Zero(d_);
        for (int a = 0; a < d_; ++a) {
            double acc = 0.0;
            for (int b = 0; b < d_; ++b)
                for (int c = 0; c < d_; ++c)
                    for (int e = 0; e < d_; ++e)
                        acc += full_[flat(a, b, c, e)] * v[b] * v[c] * v[e];
            g[a] = 4.0 * acc;
        }
        return g;
    }

  private:
    std::size_t flat(int a, int b, int c, int e) const {
        return ((static_cast<std::size_t>(a) * d_ + b) * d_ + c) * d_ + e;
    }
    int d_;
    std::vector<double> full_;
};

// ---------------------------------------------------------------------------
// Projected gradient ascent over the unit sphere with restarts. Restart r
// draws its direction from stream (seed, r), so results are monotone in
// the number of restarts.
// ---------------------------------------------------------------------------

double sphere_maximize(int d, int restarts, std::uint64_t seed,
                       const std::function<double(const Eigen::VectorXd&)>& value,
                       const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& grad) {
    const double grad_tol = 1e-8;
    double best = -std::numeric_limits<double>::infinity();
    for (int r = 0; r < restarts; ++r) {
        Eigen::VectorXd v;
        if (r < d) {
            v = Eigen::VectorXd::Unit(d, r);
        } else {
            RngStream rng(seed, static_cast<std::uint64_t>(r));
            v.resize(d);
            for (int j = 0; j < d; ++j) v[j] = rng.normal();
            v.normalize();
        }
        double f = value(v);
        double step = 1.0;
        for (int it = 0; it < 500; ++it) {
            Eigen::VectorXd g = grad(v);
            Eigen::VectorXd rg = g - g.dot(v) * v;  // tangent component
            double rn = rg.norm();
            if (rn <= grad_tol * std::max(1.0, std::fabs(f))) break;
            bool moved = false;
            for (int bt = 0; bt < 50; ++bt) {
                Eigen::VectorXd cand = (v + step * rg).normalized();
                double fc = value(cand);
                if (fc > f + 1e-4 * step * rn * rn) {
                    v = cand;
                    f = fc;
                    step = std::min(step * 2.0, 1e6);
                    moved = true;
                    break;
                }
                step *= 0.5;
            }
            if (!moved) break;
        }
        best = std::max(best, f);
    }
    return best;
}

// ---------------------------------------------------------------------------
// Shared sample block
// ---------------------------------------------------------------------------

struct SampleBlock {
    Eigen::MatrixXd x;   // N x d covariates
    Eigen::VectorXd r;   // residuals <w*, X_i> - Y_i
};

SampleBlock draw_block(const DistributionSpec& spec, const McOptions& opts) {
    Dataset ds = sample(spec, opts.samples, opts.seed);
    SampleBlock blk;
    blk.r = ds.design * spec.population_minimizer() - ds.response;
    blk.x = std::move(ds.design);
    return blk;
}

Eigen::MatrixXd hessian_from_block(const SampleBlock& blk, double p) {
    const Eigen::Index n = blk.x.rows();
    Eigen::VectorXd curv(n);
    for (Eigen::Index i = 0; i < n; ++i) curv[i] = detail::pow_abs(blk.r[i], p - 2.0);
    if (!curv.allFinite())
        throw MomentViolation("hessian estimate: zero residual with p < 2");
    Eigen::MatrixXd h = blk.x.transpose() * curv.asDiagonal() * blk.x / static_cast<double>(n);
    return 0.5 * (h + h.transpose());
}

void check_hessian_conditioning(const Eigen::MatrixXd& h) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h, Eigen::EigenvaluesOnly);
    double lo = es.eigenvalues().minCoeff();
    double hi = es.eigenvalues().maxCoeff();
    if (lo <= 0.0)
        throw NonPositiveDefinite("H_p estimate has a nonpositive eigenvalue");
    if (hi / lo > 1e12)
        throw NonPositiveDefinite("H_p estimate is ill-conditioned (cond > 1e12)");
}

}  // namespace

bool HypothesisReport::ok() const {
    return std::all_of(items.begin(), items.end(), [](const auto& it) { return it.second; });
}

std::string HypothesisReport::first_failure() const {
    for (const auto& [name, ok] : items)
        if (!ok) return name;
    return "";
}

HypothesisReport theorem_hypotheses(const DistributionSpec& spec, double p) {
    HypothesisReport rep;
    auto add = [&](std::string name, bool ok) { rep.items.emplace_back(std::move(name), ok); };
    if (p == 2.0) {
        add("E[Y^2] < inf", moment_exists(spec, 2.0).response);
        add("E[(X^j)^4] < inf", moment_exists(spec, 4.0).coordinates_all());
    } else if (p > 2.0) {
        add("non-realizable", strongly_nonrealizable(spec));
        add("E[|Y|^p] < inf", moment_exists(spec, p).response);
        add("E[|X^j|^p] < inf", moment_exists(spec, p).coordinates_all());
        add("E[|r*|^{2(p-2)} (X^j)^4] < inf",
            moment_exists(spec, 4.0).coordinates_all() &&
                noise_moment_exists(spec, 2.0 * (p - 2.0)));
    } else {
        add("P(|r*| > 0) = 1", strongly_nonrealizable(spec));
        add("E[|r*|^{2(p-2)}] < inf", negative_noise_moment_exists(spec, 2.0 * (2.0 - p)));
        add("E[|Y|^p] < inf", moment_exists(spec, p).response);
        add("E[(X^j)^2] < inf", moment_exists(spec, 2.0).coordinates_all());
        add("E[|r*|^{2(p-2)} (X^j)^4] < inf",
            moment_exists(spec, 4.0).coordinates_all() &&
                negative_noise_moment_exists(spec, 2.0 * (2.0 - p)));
    }
    return rep;
}

ConstantEstimates estimate_constants(const DistributionSpec& spec, double p,
                                     const McOptions& opts) {
    if (!(p > 1.0)) throw std::invalid_argument("estimate_constants: p must be > 1");
    HypothesisReport hyp = theorem_hypotheses(spec, p);
    if (!hyp.ok())
        throw MomentViolation("estimate_constants: hypothesis fails: " + hyp.first_failure());

    const int d = spec.dim();
    SampleBlock blk = draw_block(spec, opts);
    const Eigen::Index n = blk.x.rows();

    ConstantEstimates out;
    out.p = p;
    out.mc_samples = opts.samples;
    out.seed = opts.seed;

    out.hessian = hessian_from_block(blk, p);
    check_hessian_conditioning(out.hessian);

    Eigen::LLT<Eigen::MatrixXd> hllt(out.hessian);
    LossKernel k(p);

    // V_p = mean (l'(r))^2 x^T H^{-1} x.
    {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            Eigen::VectorXd x = blk.x.row(i);
            double g = k.grad(blk.r[i]);
            acc += g * g * x.dot(hllt.solve(x));
        }
        out.v_p = acc / static_cast<double>(n);
    }

    // c*_p = mean |r|^{2(p-2)} with jackknife standard error.
    {
        double mean = 0.0, m2 = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            double v = detail::pow_abs(blk.r[i], 2.0 * (p - 2.0));
            double d1 = v - mean;
            mean += d1 / static_cast<double>(i + 1);
            m2 += d1 * (v - mean);
        }
        out.c_star_p = mean;
        out.c_star_p_se = std::sqrt(m2 / (static_cast<double>(n) * static_cast<double>(n - 1)));
    }

    Eigen::MatrixXd hinv_sqrt = sym_inv_sqrt(out.hessian);

    // sigma_p^2: whitened curvature vectors W_i = H^{-1/2} |r|^{(p-2)/2} X_i,
    // then maximize the quartic mean over the unit sphere.
    {
        Eigen::MatrixXd w(n, d);
        for (Eigen::Index i = 0; i < n; ++i) {
            double c = detail::pow_abs(blk.r[i], 0.5 * (p - 2.0));
            w.row(i) = c * (hinv_sqrt * blk.x.row(i).transpose()).transpose();
        }
        QuarticForm q4(w);
        out.sigma_p_sq = sphere_maximize(
            d, opts.restarts, derive_seed(opts.seed, 0xA1),
            [&](const Eigen::VectorXd& v) { return q4.value(v); },
            [&](const Eigen::VectorXd& v) { return q4.gradient(v); });
    }

    // Second-moment matrix of X from the same block.
    Eigen::MatrixXd sigma2 = blk.x.transpose() * blk.x / static_cast<double>(n);
    sigma2 = 0.5 * (sigma2 + sigma2.transpose());

    // c_p (Theorem 5 flavour): largest generalized eigenvalue of (Sigma, H).
    {
        Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(sigma2, out.hessian);
        if (ges.info() != Eigen::Success)
            throw NumericalBreakdown("estimate_constants: generalized eigensolver failed");
        out.c_p_l2 = ges.eigenvalues().maxCoeff();
    }

    // c_p (Theorem 4 flavour): sup ||w||_{L^p} / ||w||_{H_p}.
    {
        if (p == 2.0) {
            Eigen::MatrixXd g = hinv_sqrt * sigma2 * hinv_sqrt;
            out.c_p_lp = std::sqrt(sphere_maximize(
                d, opts.restarts, derive_seed(opts.seed, 0xA2),
                [&](const Eigen::VectorXd& v) { return v.dot(g * v); },
                [&](const Eigen::VectorXd& v) { return Eigen::VectorXd(2.0 * (g * v)); }));
        } else {
            const Eigen::Index ns = std::min<Eigen::Index>(n, opts.sup_samples);
            Eigen::MatrixXd u = (blk.x.topRows(ns) * hinv_sqrt).eval();
            auto mean_pow = [&](const Eigen::VectorXd& v) {
                double acc = 0.0;
                Eigen::VectorXd t = u * v;
                for (Eigen::Index i = 0; i < ns; ++i) acc += detail::pow_abs(t[i], p);
                return acc / static_cast<double>(ns);
            };
            auto grad_pow = [&](const Eigen::VectorXd& v) {
                Eigen::VectorXd t = u * v;
                Eigen::VectorXd s(ns);
                for (Eigen::Index i = 0; i < ns; ++i) {
                    double sign = t[i] < 0.0 ? -1.0 : 1.0;
                    s[i] = sign * detail::pow_abs(t[i], p - 1.0);
                }
                return Eigen::VectorXd(p * (u.transpose() * s) / static_cast<double>(ns));
            };
            out.c_p_lp = std::pow(
                sphere_maximize(d, opts.restarts, derive_seed(opts.seed, 0xA2), mean_pow, grad_pow),
                1.0 / p);
        }
    }

    if (p < 2.0) {
        Prop2Constants pc = prop2_constants(std::sqrt(out.sigma_p_sq), static_cast<double>(d),
                                            out.c_p_l2, out.c_star_p, p);
        out.epsilon = pc.epsilon;
        out.t_star = pc.t_star;
    }
    return out;
}

double lp_norm(const DistributionSpec& spec, const Eigen::VectorXd& w, double p,
               const McOptions& opts) {
    if (!moment_exists(spec, p).all())
        throw MomentViolation("lp_norm: order-" + std::to_string(p) + " moments missing");
    if (w.size() != spec.dim()) throw std::invalid_argument("lp_norm: dimension mismatch");
    double acc = 0.0;
    for (long i = 0; i < opts.samples; ++i) {
        RngStream row(opts.seed, static_cast<std::uint64_t>(i));
        acc += detail::pow_abs(w.dot(spec.sample_x(row)), p);
    }
    return std::pow(acc / static_cast<double>(opts.samples), 1.0 / p);
}

double lqp_norm(const DistributionSpec& spec, const Eigen::VectorXd& w, double q, double p,
                const McOptions& opts) {
    if (!moment_exists(spec, q).all())
        throw MomentViolation("lqp_norm: order-" + std::to_string(q) + " coordinate moments missing");
    double resid_order = 0.5 * q * (p - 2.0);
    if (resid_order > 0.0 && !noise_moment_exists(spec, resid_order))
        throw MomentViolation("lqp_norm: residual moment missing");
    if (resid_order < 0.0 && !negative_noise_moment_exists(spec, -resid_order))
        throw MomentViolation("lqp_norm: negative residual moment missing");
    if (w.size() != spec.dim()) throw std::invalid_argument("lqp_norm: dimension mismatch");
    const Eigen::VectorXd& opt = spec.population_minimizer();
    double acc = 0.0;
    for (long i = 0; i < opts.samples; ++i) {
        RngStream row(opts.seed, static_cast<std::uint64_t>(i));
        Eigen::VectorXd x = spec.sample_x(row);
        double y = spec.target_weights().dot(x) + spec.sample_noise(row);
        double r = opt.dot(x) - y;
        acc += detail::pow_abs(r, resid_order) * detail::pow_abs(w.dot(x), q);
    }
    return std::pow(acc / static_cast<double>(opts.samples), 1.0 / q);
}

HessianAtMinimizer hessian_at_minimizer(const DistributionSpec& spec, double p,
                                        const McOptions& opts) {
    HypothesisReport hyp = theorem_hypotheses(spec, p);
    if (!hyp.ok())
        throw MomentViolation("hessian_at_minimizer: hypothesis fails: " + hyp.first_failure());
    SampleBlock blk = draw_block(spec, opts);
    HessianAtMinimizer out;
    out.hessian = hessian_from_block(blk, p);
    check_hessian_conditioning(out.hessian);
    Eigen::LLT<Eigen::MatrixXd> llt(out.hessian);
    LossKernel k(p);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < blk.x.rows(); ++i) {
        Eigen::VectorXd x = blk.x.row(i);
        double g = k.grad(blk.r[i]);
        acc += g * g * x.dot(llt.solve(x));
    }
    out.v_p = acc / static_cast<double>(blk.x.rows());
    return out;
}

double equivalence_constant(const DistributionSpec& spec, double p, EquivalenceKind kind,
                            const McOptions& opts) {
    ConstantEstimates c = estimate_constants(spec, p, opts);
    switch (kind) {
        case EquivalenceKind::SigmaP: return c.sigma_p_sq;
        case EquivalenceKind::CLp: return c.c_p_lp;
        case EquivalenceKind::CL2: return c.c_p_l2;
    }
    throw std::invalid_argument("equivalence_constant: unknown kind");
}

// ---------------------------------------------------------------------------
// Small ball
// ---------------------------------------------------------------------------

namespace {

double discrete_rho0(const Eigen::MatrixXd& atoms, const Eigen::VectorXd& probs,
                     const Eigen::VectorXd& w) {
    double tol = 1e-12 * std::max(1.0, w.cwiseAbs().maxCoeff());
    double acc = 0.0;
    for (Eigen::Index i = 0; i < atoms.rows(); ++i) {
        double scale = std::max(1.0, atoms.row(i).cwiseAbs().maxCoeff());
        if (std::fabs(w.dot(atoms.row(i))) <= tol * scale) acc += probs[i];
    }
    return acc;
}

void for_each_subset(Eigen::Index m, int k, const std::function<void(const std::vector<int>&)>& fn) {
    std::vector<int> pick(static_cast<std::size_t>(k));
    std::function<void(int, int)> rec = [&](int start, int depth) {
        if (depth == k) {
            fn(pick);
            return;
        }
        for (int i = start; i <= static_cast<int>(m) - (k - depth); ++i) {
            pick[static_cast<std::size_t>(depth)] = i;
            rec(i + 1, depth + 1);
        }
    };
    rec(0, 0);
}

}  // namespace

SmallBallReport small_ball(const DistributionSpec& spec, const std::vector<Eigen::VectorXd>& probes,
                           double kappa, double q, const McOptions& opts) {
    SmallBallReport rep;
    const int d = spec.dim();

    if (spec.discrete()) {
        rep.method = "exact-enumeration";
        const auto& fam = std::get<DiscreteCovariates>(spec.covariates());
        Eigen::MatrixXd atoms = spec.effective_atoms();
        const Eigen::VectorXd& probs = fam.probabilities;

        double rho = 0.0;
        if (d == 1) {
            rho = discrete_rho0(atoms, probs, Eigen::VectorXd::Ones(1));
        } else {
            const int k = std::min<int>(d - 1, static_cast<int>(atoms.rows()));
            for_each_subset(atoms.rows(), k, [&](const std::vector<int>& pick) {
                Eigen::MatrixXd pts(k, d);
                for (int j = 0; j < k; ++j) pts.row(j) = atoms.row(pick[static_cast<std::size_t>(j)]);
                Eigen::VectorXd normal = orthogonal_complement(pts);
                rho = std::max(rho, discrete_rho0(atoms, probs, normal));
            });
        }
        rep.rho_sup = rho;

        for (const auto& w : probes) {
            rep.rho0.push_back(w.isZero(0.0) ? 1.0 : discrete_rho0(atoms, probs, w));
            double norm_q = 0.0;
            for (Eigen::Index i = 0; i < atoms.rows(); ++i)
                norm_q += probs[i] * detail::pow_abs(w.dot(atoms.row(i)), q);
            norm_q = std::pow(norm_q, 1.0 / q);
            double acc = 0.0;
            for (Eigen::Index i = 0; i < atoms.rows(); ++i)
                if (std::fabs(w.dot(atoms.row(i))) > kappa * norm_q) acc += probs[i];
            rep.rho_q.push_back(acc);
        }
        return rep;
    }

    // Continuous law of <w, X> for w != 0: rho0 vanishes identically.
    rep.method = "monte-carlo";
    rep.rho_sup = 0.0;
    if (!probes.empty() && !moment_exists(spec, q).all())
        throw MomentViolation("small_ball: order-q moments missing for rho_q");
    for (const auto& w : probes) {
        rep.rho0.push_back(w.isZero(0.0) ? 1.0 : 0.0);
        double acc_norm = 0.0;
        std::vector<double> vals(static_cast<std::size_t>(opts.samples));
        for (long i = 0; i < opts.samples; ++i) {
            RngStream row(opts.seed, static_cast<std::uint64_t>(i));
            double t = w.dot(spec.sample_x(row));
            vals[static_cast<std::size_t>(i)] = std::fabs(t);
            acc_norm += detail::pow_abs(t, q);
        }
        double nq = std::pow(acc_norm / static_cast<double>(opts.samples), 1.0 / q);
        long cnt = 0;
        for (double v : vals)
            if (v > kappa * nq) ++cnt;
        rep.rho_q.push_back(static_cast<double>(cnt) / static_cast<double>(opts.samples));
    }
    return rep;
}

Prop2Constants prop2_constants(double sigma_p, double d, double c_p_l2, double c_star_p, double p) {
    if (!(p > 1.0 && p < 2.0)) throw std::domain_error("prop2_constants: p must be in (1,2)");
    if (!(sigma_p > 0.0 && d > 0.0 && c_p_l2 > 0.0 && c_star_p > 0.0))
        throw std::domain_error("prop2_constants: inputs must be positive");
    double rhs = 8.0 * std::pow(sigma_p, 3.0 - p) * std::pow(d * c_p_l2, 0.5 * (2.0 - p)) *
                 std::sqrt(c_star_p);
    Prop2Constants out;
    out.epsilon = std::pow(rhs, 1.0 / (p - 2.0));
    out.t_star = std::pow(d * c_p_l2 / (c_star_p * (2.0 - p)), 1.0 / (6.0 - 2.0 * p));
    return out;
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

std::string constants_to_json(const ConstantEstimates& c) {
    json j;
    j["p"] = c.p;
    std::vector<std::vector<double>> h;
    for (Eigen::Index i = 0; i < c.hessian.rows(); ++i) {
        std::vector<double> row;
        for (Eigen::Index k = 0; k < c.hessian.cols(); ++k) row.push_back(c.hessian(i, k));
        h.push_back(std::move(row));
    }
    j["hessian"] = h;
    j["v_p"] = c.v_p;
    j["sigma_p_sq"] = c.sigma_p_sq;
    j["c_p_lp"] = c.c_p_lp;
    j["c_p_l2"] = c.c_p_l2;
    j["c_star_p"] = c.c_star_p;
    j["c_star_p_se"] = c.c_star_p_se;
    if (c.epsilon)
        j["epsilon"] = *c.epsilon;
    else
        j["epsilon"] = nullptr;
    if (c.t_star)
        j["t_star"] = *c.t_star;
    else
        j["t_star"] = nullptr;
    j["mc_samples"] = c.mc_samples;
    j["seed"] = c.seed;
    return j.dump(2);
}

ConstantEstimates constants_from_json(const std::string& text) {
    json j = json::parse(text);
    ConstantEstimates c;
    c.p = j.at("p").get<double>();
    auto h = j.at("hessian").get<std::vector<std::vector<double>>>();
    Eigen::Index d = static_cast<Eigen::Index>(h.size());
    c.hessian.resize(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index k = 0; k < d; ++k)
            c.hessian(i, k) = h[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
    c.v_p = j.at("v_p").get<double>();
    c.sigma_p_sq = j.at("sigma_p_sq").get<double>();
    c.c_p_lp = j.at("c_p_lp").get<double>();
    c.c_p_l2 = j.at("c_p_l2").get<double>();
    c.c_star_p = j.at("c_star_p").get<double>();
    c.c_star_p_se = j.at("c_star_p_se").get<double>();
    if (!j.at("epsilon").is_null()) c.epsilon = j.at("epsilon").get<double>();
    if (!j.at("t_star").is_null()) c.t_star = j.at("t_star").get<double>();
    c.mc_samples = j.at("mc_samples").get<long>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

}  // namespace lpreg
