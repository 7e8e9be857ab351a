// Batch front end: dataset generation, fitting, constant estimation, bound
// evaluation, inequality self-tests, and experiment campaigns driven by a
// JSON config. Machine-readable results go to stdout, progress to stderr.
//
// Exit codes: 0 success, 1 assertion failure (a tested bound was violated
// beyond its slack), 2 config/parse error, 3 numerical failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <Eigen/Dense>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "lpreg/bounds.hpp"
#include "lpreg/constants.hpp"
#include "lpreg/distributions.hpp"
#include "lpreg/experiments.hpp"
#include "lpreg/linalg.hpp"
#include "lpreg/loss.hpp"
#include "lpreg/rng.hpp"
#include "lpreg/solver.hpp"

using json = nlohmann::json;
using namespace lpreg;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitAssertion = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

void check_keys(const json& j, const std::vector<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw ConfigError(where + ": unknown key '" + key + "'");
    }
}

Eigen::MatrixXd parse_matrix_or_scalar(const json& j, int dim, const std::string& where) {
    if (j.is_number()) return j.get<double>() * Eigen::MatrixXd::Identity(dim, dim);
    if (!j.is_array()) throw ConfigError(where + ": expected a number or matrix");
    auto rows = j.get<std::vector<std::vector<double>>>();
    Eigen::MatrixXd m(rows.size(), rows.empty() ? 0 : rows[0].size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (static_cast<Eigen::Index>(rows[i].size()) != m.cols())
            throw ConfigError(where + ": ragged matrix");
        for (std::size_t k = 0; k < rows[i].size(); ++k)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
    }
    return m;
}

NoiseFamily parse_noise(const json& j) {
    check_keys(j, {"family", "sigma", "nu", "scale", "shift"}, "spec.noise");
    std::string family = j.at("family").get<std::string>();
    if (family == "none") return NoiseFamily::none();
    if (family == "gaussian") return NoiseFamily::gaussian(j.at("sigma").get<double>());
    if (family == "laplace") return NoiseFamily::laplace(j.at("scale").get<double>());
    if (family == "student_t")
        return NoiseFamily::student_t(j.at("nu").get<double>(), j.at("scale").get<double>(),
                                      j.value("shift", 0.0));
    throw ConfigError("spec.noise: unknown family '" + family + "'");
}

CovariateFamily parse_covariates(const json& j) {
    check_keys(j, {"family", "dim", "covariance", "nu", "scale", "atoms", "probabilities",
                   "coordinates"},
               "spec.covariates");
    std::string family = j.at("family").get<std::string>();
    if (family == "gaussian") {
        json cov = j.value("covariance", json(1.0));
        int dim = j.contains("dim") ? j.at("dim").get<int>()
                                    : static_cast<int>(cov.is_array() ? cov.size() : 0);
        if (dim <= 0) throw ConfigError("spec.covariates: gaussian needs dim or a matrix");
        return GaussianCovariates{parse_matrix_or_scalar(cov, dim, "spec.covariates.covariance")};
    }
    if (family == "student_t") {
        json scale = j.value("scale", json(1.0));
        int dim = j.contains("dim") ? j.at("dim").get<int>()
                                    : static_cast<int>(scale.is_array() ? scale.size() : 0);
        if (dim <= 0) throw ConfigError("spec.covariates: student_t needs dim or a matrix");
        return StudentTCovariates{j.at("nu").get<double>(),
                                  parse_matrix_or_scalar(scale, dim, "spec.covariates.scale")};
    }
    if (family == "discrete") {
        Eigen::MatrixXd atoms = parse_matrix_or_scalar(j.at("atoms"), 0, "spec.covariates.atoms");
        auto pv = j.at("probabilities").get<std::vector<double>>();
        Eigen::VectorXd probs(pv.size());
        for (std::size_t i = 0; i < pv.size(); ++i) probs[static_cast<Eigen::Index>(i)] = pv[i];
        return DiscreteCovariates{atoms, probs};
    }
    if (family == "product") {
        std::vector<Marginal> coords;
        for (const auto& c : j.at("coordinates")) {
            check_keys(c, {"kind", "scale", "nu"}, "spec.covariates.coordinates[]");
            Marginal m;
            std::string kind = c.at("kind").get<std::string>();
            m.scale = c.value("scale", 1.0);
            if (kind == "gaussian") {
                m.kind = Marginal::Kind::Gaussian;
            } else if (kind == "student_t") {
                m.kind = Marginal::Kind::StudentT;
                m.nu = c.at("nu").get<double>();
            } else if (kind == "laplace") {
                m.kind = Marginal::Kind::Laplace;
            } else {
                throw ConfigError("spec.covariates.coordinates[]: unknown kind '" + kind + "'");
            }
            coords.push_back(m);
        }
        return ProductCovariates{coords};
    }
    throw ConfigError("spec.covariates: unknown family '" + family + "'");
}

DistributionSpec parse_spec(const json& j) {
    check_keys(j, {"covariates", "intercept", "target_weights", "noise"}, "spec");
    auto wv = j.at("target_weights").get<std::vector<double>>();
    Eigen::VectorXd w(wv.size());
    for (std::size_t i = 0; i < wv.size(); ++i) w[static_cast<Eigen::Index>(i)] = wv[i];
    try {
        return DistributionSpec(parse_covariates(j.at("covariates")), j.value("intercept", false),
                                w, parse_noise(j.at("noise")));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("spec: ") + e.what());
    }
}

SolverOptions parse_solver(const json& j) {
    check_keys(j, {"tol", "max_iter", "mu0", "homotopy_factor"}, "solver");
    SolverOptions opts;
    if (j.contains("tol") && !j.at("tol").is_null()) opts.tol = j.at("tol").get<double>();
    opts.max_iter = j.value("max_iter", opts.max_iter);
    if (j.contains("mu0") && !j.at("mu0").is_null()) opts.mu0 = j.at("mu0").get<double>();
    opts.homotopy_factor = j.value("homotopy_factor", opts.homotopy_factor);
    return opts;
}

McOptions parse_mc(const json& j) {
    check_keys(j, {"samples", "seed", "restarts", "sup_samples"}, "constants_mc");
    McOptions mc;
    mc.samples = j.value("samples", mc.samples);
    mc.seed = j.value("seed", mc.seed);
    mc.restarts = j.value("restarts", mc.restarts);
    mc.sup_samples = j.value("sup_samples", mc.sup_samples);
    return mc;
}

json load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config " + path + ": " + e.what());
    }
}

std::string fmt_value(double v) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::filesystem::path ensure_out_dir(const std::string& out) {
    std::filesystem::path dir(out.empty() ? "." : out);
    std::filesystem::create_directories(dir);
    return dir;
}

// ---------------------------------------------------------------------------
// selftest
// ---------------------------------------------------------------------------

int run_selftest(bool quick) {
    long violations = 0;
    auto report = [&](const char* name, long bad, long total) {
        std::cerr << "selftest: " << name << ": " << (total - bad) << "/" << total << " ok\n";
        violations += bad;
    };

    {
        RngStream rng(101);
        long bad = 0;
        const long total = 100000;
        for (long i = 0; i < total; ++i) {
            double p = rng.uniform(2.0, 6.0);
            double s = rng.normal() * rng.uniform(0.01, 100.0);
            double t = rng.normal() * rng.uniform(0.01, 100.0);
            if (!check_sandwich_pgeq2(p, s, t).holds) ++bad;
        }
        report("sandwich lower bound (p >= 2)", bad, total);
    }
    {
        RngStream rng(102);
        long bad = 0;
        const long total = 100000;
        for (long i = 0; i < total; ++i) {
            double p = rng.uniform(1.05, 1.95);
            double s = rng.normal() * rng.uniform(0.01, 100.0);
            double t = rng.normal() * rng.uniform(0.01, 100.0);
            if (s == 0.0) s = 1.0;
            if (!check_gamma_upper_pleq2(p, s, t).holds) ++bad;
        }
        report("gamma upper bounds (p in (1,2))", bad, total);
    }
    {
        RngStream rng(103);
        long bad = 0;
        const long total = 100000;
        for (long i = 0; i < total; ++i) {
            double p = rng.uniform(1.05, 1.95);
            double t = rng.uniform(0.0, 10.0);
            double x = rng.uniform(0.0, 10.0);
            double lam = rng.uniform(0.0, 5.0);
            double lo = std::min(lam * lam, std::pow(lam, p)) * gamma_p(p, t, x);
            if (gamma_p(p, t, lam * x) < lo - 1e-12 * std::max(1.0, std::fabs(lo))) ++bad;
            double t2 = t + rng.uniform(0.0, 5.0);
            double x2 = x + rng.uniform(0.0, 5.0);
            double base = gamma_p(p, t, x);
            if (gamma_p(p, t2, x) > base + 1e-12 * std::max(1.0, base)) ++bad;
            if (gamma_p(p, t, x2) < base - 1e-12 * std::max(1.0, base)) ++bad;
        }
        report("gamma scaling/monotonicity", bad, total);
    }

    if (!quick) {
        // Least-squares oracle agreement at p = 2.
        RngStream seeds(104);
        long bad = 0;
        for (int rep = 0; rep < 50; ++rep) {
            int d = 2 + static_cast<int>(seeds.next_u64() % 9);
            long n = d + 20 + static_cast<long>(seeds.next_u64() % 400);
            Eigen::VectorXd w(d);
            for (int j = 0; j < d; ++j) w[j] = seeds.normal();
            DistributionSpec spec(GaussianCovariates{Eigen::MatrixXd::Identity(d, d)}, false, w,
                                  NoiseFamily::gaussian(1.0));
            Dataset ds = sample(spec, n, seeds.next_u64());
            Eigen::VectorXd oracle =
                (ds.design.transpose() * ds.design).ldlt().solve(ds.design.transpose() *
                                                                 ds.response);
            if ((fit(ds, 2.0).weights - oracle).norm() > 1e-8) ++bad;
        }
        report("least-squares oracle (p = 2)", bad, 50);

        // Orthogonal-complement construction.
        RngStream rng(105);
        long obad = 0;
        for (int rep = 0; rep < 1000; ++rep) {
            int d = 2 + static_cast<int>(rng.next_u64() % 19);
            int m = 1 + static_cast<int>(rng.next_u64() % static_cast<unsigned>(d - 1));
            Eigen::MatrixXd pts(m, d);
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < d; ++j) pts(i, j) = rng.normal();
            Eigen::VectorXd v = orthogonal_complement(pts);
            if (v.norm() <= 1e-12) ++obad;
            for (int i = 0; i < m; ++i)
                if (std::fabs(pts.row(i).dot(v)) > 1e-10 * pts.row(i).norm() * v.norm()) ++obad;
        }
        report("orthogonal complement", obad, 1000);
    }

    json out;
    out["violations"] = violations;
    out["ok"] = violations == 0;
    std::cout << out.dump(2) << "\n";
    return violations == 0 ? kExitOk : kExitAssertion;
}

// ---------------------------------------------------------------------------
// bounds
// ---------------------------------------------------------------------------

struct BoundArgs {
    std::string theorem;
    double p = 0.0, delta = 0.0, v = 0.0, sigma_sq = 0.0, c_lp = 1.0, c_l2 = 1.0, c_star = 1.0,
           rho = -1.0;
    long n = 0;
    int d = 0;
    bool csv = false;
};

int run_bounds(const BoundArgs& a) {
    BoundReport rep;
    rep.theorem = a.theorem;
    rep.p = a.p;
    rep.d = a.d;
    rep.n = static_cast<double>(a.n);
    rep.delta = a.delta;
    rep.sigma_sq = a.sigma_sq;
    rep.v = a.v;
    rep.c_lp = a.c_lp;
    rep.c_l2 = a.c_l2;
    rep.c_star = a.c_star;
    rep.rho = a.rho;

    if (a.theorem == "1" || a.theorem == "4" || a.theorem == "5") {
        if (a.n <= 0 || a.delta <= 0.0) throw ConfigError("bounds: need --n and --delta");
        if (a.theorem == "1") {
            rep.p = 2.0;
            rep.terms = bound_p2(a.v, static_cast<double>(a.n), a.delta);
        } else if (a.theorem == "4") {
            rep.terms = bound_pgeq2(a.v, static_cast<double>(a.n), a.delta, a.p, a.c_lp);
        } else {
            rep.terms = bound_pleq2(a.v, static_cast<double>(a.n), a.delta, a.p,
                                    std::sqrt(a.sigma_sq), static_cast<double>(a.d), a.c_l2,
                                    a.c_star);
        }
        if (a.sigma_sq >= 1.0 && a.d >= 1) {
            rep.threshold_n = threshold(a.sigma_sq, a.d, a.delta);
            rep.threshold_met = a.n >= rep.threshold_n;
        }
        std::cout << (a.csv ? rep.csv_header() + "\n" + rep.csv_row() : rep.to_json()) << "\n";
        return kExitOk;
    }
    if (a.theorem == "2") {
        if (a.d <= 0 || a.delta <= 0.0 || a.rho < 0.0)
            throw ConfigError("bounds: theorem 2 needs --d, --delta, --rho");
        std::cout << fmt_value(realizable_vc_threshold_shape(a.d, a.delta, a.rho)) << "\n";
        return kExitOk;
    }
    if (a.theorem == "3") {
        if (a.d <= 0 || a.rho < 0.0) throw ConfigError("bounds: theorem 3 needs --d and --rho");
        if (a.n > 0) {
            std::cout << fmt_value(realizable_tail(a.n, a.d, a.rho)) << "\n";
        } else if (a.delta > 0.0) {
            RealizableSampleSize r = realizable_sample_size(a.d, a.delta, a.rho);
            json j;
            j["n"] = r.n;
            j["regime"] = r.regime;
            std::cout << j.dump(2) << "\n";
        } else {
            throw ConfigError("bounds: theorem 3 needs --n (tail) or --delta (sample size)");
        }
        return kExitOk;
    }
    if (a.theorem == "prop1") {
        if (a.sigma_sq <= 0.0 || a.d <= 0 || a.delta <= 0.0 || a.n <= 0)
            throw ConfigError("bounds: prop1 needs --sigma-sq, --d, --delta, --n");
        std::cout << fmt_value(lower_tail_factor(std::sqrt(a.sigma_sq), static_cast<double>(a.d),
                                                 a.delta, static_cast<double>(a.n)))
                  << "\n";
        return kExitOk;
    }
    if (a.theorem == "lemma2") {
        if (a.n <= 0 || a.delta <= 0.0) throw ConfigError("bounds: lemma2 needs --n and --delta");
        std::cout << fmt_value(markov_grad_bound(a.v, static_cast<double>(a.n), a.delta)) << "\n";
        return kExitOk;
    }
    throw ConfigError("bounds: unknown --theorem '" + a.theorem + "'");
}

// ---------------------------------------------------------------------------
// experiment
// ---------------------------------------------------------------------------

struct ExperimentOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<double> p;
    std::optional<long> n;
    std::optional<double> delta;
    std::optional<long> trials;
};

int run_experiment(const json& cfg_json, const std::string& out_dir, int workers,
                   const ExperimentOverrides& ov) {
    check_keys(cfg_json, {"spec", "solver", "experiment", "seed", "out", "workers"}, "config");
    DistributionSpec spec = parse_spec(cfg_json.at("spec"));
    SolverOptions solver =
        cfg_json.contains("solver") ? parse_solver(cfg_json.at("solver")) : SolverOptions{};

    const json& ex = cfg_json.at("experiment");
    check_keys(ex,
               {"kind", "p", "n_grid", "n", "trials", "delta", "probe_count", "mc_eval_samples",
                "constants", "constants_mc", "svg"},
               "experiment");
    std::string kind = ex.at("kind").get<std::string>();

    ExperimentConfig cfg{spec};
    cfg.p = ov.p.value_or(ex.value("p", 2.0));
    if (ex.contains("n_grid")) cfg.n_grid = ex.at("n_grid").get<std::vector<long>>();
    cfg.trials = ov.trials.value_or(ex.value("trials", 100L));
    cfg.delta = ov.delta.value_or(ex.value("delta", 0.1));
    cfg.master_seed = cfg_json.value("seed", 0ULL);
    if (ov.seed) cfg.master_seed = *ov.seed;
    cfg.mc_eval_samples = ex.value("mc_eval_samples", 100000L);
    if (ex.contains("constants_mc")) cfg.constants_mc = parse_mc(ex.at("constants_mc"));
    if (ex.contains("constants")) cfg.constants = constants_from_json(ex.at("constants").dump());
    cfg.solver = solver;
    cfg.workers = workers;

    long n_single = ex.value("n", cfg.n_grid.empty() ? 0L : cfg.n_grid.back());
    if (ov.n) {
        n_single = *ov.n;
        cfg.n_grid = {n_single};
    }
    auto out = ensure_out_dir(out_dir);

    auto write_coverage = [&](const CoverageReport& rep, const char* name, json extra = json()) {
        json j = extra.is_null() ? json::object() : extra;
        j["kind"] = name;
        j["threshold_value"] = rep.threshold_value;
        j["trials"] = rep.trials;
        j["ok_trials"] = rep.ok_trials;
        j["violations"] = rep.violations;
        j["violation_fraction"] = rep.violation_fraction;
        j["allowed_fraction"] = rep.allowed_fraction;
        j["violated"] = rep.violated;
        j["statistic_mean"] = rep.statistic_mean;
        j["statistic_se"] = rep.statistic_se;
        std::string text = j.dump(2);
        write_text_atomic(text + "\n", (out / "report.json").string());
        std::cout << text << "\n";
        return rep.violated ? kExitAssertion : kExitOk;
    };

    if (kind == "excess_risk" || kind == "realizable") {
        ExperimentResult res =
            kind == "excess_risk" ? excess_risk_campaign(cfg) : realizable_campaign(cfg);
        write_trials_csv(res.trials, (out / "trials.csv").string());
        std::string summary = experiment_summary_json(cfg, res);
        write_text_atomic(summary + "\n", (out / "summary.json").string());
        if (ex.value("svg", false)) write_rate_svg(res, (out / "rate.svg").string());
        std::cout << summary << "\n";
        bool violated = false;
        for (const auto& agg : res.per_n) violated = violated || agg.violated;
        return violated ? kExitAssertion : kExitOk;
    }
    if (kind == "lower_tail") {
        McOptions mc = cfg.constants_mc;
        if (mc.seed == 1) mc.seed = derive_seed(cfg.master_seed, 0xC0);
        ConstantEstimates c2 = cfg.constants ? *cfg.constants : estimate_constants(spec, 2.0, mc);
        CoverageReport rep = lower_tail_campaign(spec, c2.hessian, c2.sigma_p_sq, cfg.delta,
                                                 n_single, cfg.trials, cfg.master_seed, workers);
        json extra;
        extra["sigma_sq"] = c2.sigma_p_sq;
        extra["n"] = n_single;
        return write_coverage(rep, "lower_tail", extra);
    }

    // Remaining campaigns need the full constant set at the campaign's p.
    McOptions mc = cfg.constants_mc;
    if (mc.seed == 1) mc.seed = derive_seed(cfg.master_seed, 0xC0);
    ConstantEstimates c = cfg.constants ? *cfg.constants : estimate_constants(spec, cfg.p, mc);

    if (kind == "curvature") {
        if (n_single <= 0) n_single = threshold(c.sigma_p_sq, spec.dim(), cfg.delta);
        CoverageReport rep = curvature_campaign(spec, cfg.p, n_single, cfg.delta, cfg.trials,
                                                cfg.master_seed, c, workers);
        json extra;
        extra["n"] = n_single;
        return write_coverage(rep, "curvature", extra);
    }
    if (kind == "markov_grad") {
        if (n_single <= 0) throw ConfigError("experiment: markov_grad needs n");
        CoverageReport rep = markov_grad_campaign(spec, cfg.p, n_single, cfg.delta, cfg.trials,
                                                  cfg.master_seed, c, workers);
        json extra;
        extra["n"] = n_single;
        extra["v_p"] = c.v_p;
        return write_coverage(rep, "markov_grad", extra);
    }
    if (kind == "gamma_lower") {
        if (n_single <= 0) n_single = threshold(c.sigma_p_sq, spec.dim(), cfg.delta);
        long probes = ex.value("probe_count", 8L);
        GammaLowerReport rep = gamma_lower_campaign(spec, cfg.p, n_single, cfg.delta, cfg.trials,
                                                    probes, cfg.master_seed, c, workers);
        json extra;
        extra["n"] = n_single;
        extra["epsilon"] = rep.epsilon;
        extra["probe_pairs"] = rep.probe_pairs;
        extra["probe_violations"] = rep.probe_violations;
        return write_coverage(rep.trial_level, "gamma_lower", extra);
    }
    if (kind == "derivative_check") {
        long probes_count = ex.value("probe_count", 10L);
        RngStream rng(derive_seed(cfg.master_seed, 0xD0));
        std::vector<Eigen::VectorXd> probes{spec.population_minimizer()};
        double radius = cfg.p < 2.0 ? 0.002 : 0.3;
        for (long k = 1; k < probes_count; ++k) {
            Eigen::VectorXd probe = spec.population_minimizer();
            for (int j = 0; j < spec.dim(); ++j) probe[j] += radius * rng.normal();
            probes.push_back(probe);
        }
        DerivativeCheckReport rep = derivative_check_campaign(
            spec, cfg.p, probes, cfg.mc_eval_samples, derive_seed(cfg.master_seed, 0xD1));
        json j;
        j["kind"] = "derivative_check";
        j["grad_rel_error"] = rep.grad_rel_error;
        j["hess_rel_error"] = rep.hess_rel_error;
        j["max_grad_rel_error"] = rep.max_grad_rel_error;
        j["max_hess_rel_error"] = rep.max_hess_rel_error;
        bool ok = rep.max_grad_rel_error <= 1e-3 && rep.max_hess_rel_error <= 1e-3;
        j["ok"] = ok;
        std::string text = j.dump(2);
        write_text_atomic(text + "\n", (out / "report.json").string());
        std::cout << text << "\n";
        return ok ? kExitOk : kExitAssertion;
    }
    throw ConfigError("experiment: unknown kind '" + kind + "'");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"p-norm linear regression: ERM solver, constants, bounds, experiments"};
    app.require_subcommand(1);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "Sample a dataset from a spec config to CSV");
    std::string gen_config, gen_out = ".";
    long gen_n = 0;
    std::uint64_t gen_seed = 0;
    gen->add_option("--config", gen_config, "JSON config with a spec block")->required();
    gen->add_option("--n", gen_n, "number of rows")->required();
    auto* gen_seed_opt = gen->add_option("--seed", gen_seed, "64-bit master seed");
    gen->add_option("--out", gen_out, "output directory (dataset.csv)");

    // fit
    auto* fit_cmd = app.add_subcommand("fit", "Fit the ERM weights on a CSV dataset");
    std::string fit_data;
    double fit_p = 2.0;
    SolverOptions fit_opts;
    double fit_tol = -1.0, fit_mu0 = -1.0;
    fit_cmd->add_option("--data", fit_data, "dataset CSV path")->required();
    fit_cmd->add_option("--p", fit_p, "loss exponent, p > 1")->required();
    fit_cmd->add_option("--tol", fit_tol, "gradient norm tolerance (absolute)");
    fit_cmd->add_option("--max-iter", fit_opts.max_iter, "Newton iteration cap");
    fit_cmd->add_option("--mu0", fit_mu0, "initial residual clamp for p < 2");
    fit_cmd->add_option("--homotopy-factor", fit_opts.homotopy_factor,
                        "clamp shrink factor per iteration");

    // constants
    auto* con = app.add_subcommand("constants", "Estimate distribution constants for a spec");
    std::string con_config, con_out;
    double con_p = 2.0;
    McOptions con_mc;
    con->add_option("--config", con_config, "JSON config with a spec block")->required();
    con->add_option("--p", con_p, "loss exponent, p > 1")->required();
    con->add_option("--mc-samples", con_mc.samples, "Monte Carlo sample count");
    con->add_option("--seed", con_mc.seed, "64-bit seed for the shared stream");
    con->add_option("--restarts", con_mc.restarts, "sphere-ascent restarts");
    con->add_option("--out", con_out, "output directory (constants.json)");

    // bounds
    auto* bnd = app.add_subcommand("bounds", "Evaluate closed-form bounds and thresholds");
    BoundArgs ba;
    bnd->add_option("--theorem", ba.theorem, "one of 1,2,3,4,5,prop1,lemma2")->required();
    bnd->add_option("--p", ba.p, "loss exponent");
    bnd->add_option("--n", ba.n, "sample size");
    bnd->add_option("--delta", ba.delta, "confidence level in (0,1]");
    bnd->add_option("--v", ba.v, "V_p, the dual-norm second moment of the gradient");
    bnd->add_option("--sigma-sq", ba.sigma_sq, "sigma_p^2 norm-equivalence constant");
    bnd->add_option("--d", ba.d, "dimension");
    bnd->add_option("--c-lp", ba.c_lp, "C_{L^p -> (L^2,p)}");
    bnd->add_option("--c-l2", ba.c_l2, "C^2_{L^2 -> (L^2,p)}");
    bnd->add_option("--c-star", ba.c_star, "E|r*|^{2(p-2)}");
    bnd->add_option("--rho", ba.rho, "small-ball supremum, in [0,1)");
    bnd->add_flag("--csv", ba.csv, "emit a one-row CSV instead of JSON");

    // experiment
    auto* exp_cmd = app.add_subcommand("experiment", "Run a seeded Monte Carlo campaign");
    std::string exp_config, exp_out = ".";
    int exp_workers = 0;
    std::uint64_t exp_seed = 0;
    double exp_p = 0.0, exp_delta = 0.0;
    long exp_n = 0, exp_trials = 0;
    exp_cmd->add_option("--config", exp_config, "JSON campaign config")->required();
    exp_cmd->add_option("--out", exp_out, "output directory");
    exp_cmd->add_option("--workers", exp_workers, "worker threads (0 = all cores)");
    auto* exp_seed_opt = exp_cmd->add_option("--seed", exp_seed, "override the config seed");
    auto* exp_p_opt = exp_cmd->add_option("--p", exp_p, "override the loss exponent");
    auto* exp_n_opt = exp_cmd->add_option("--n", exp_n, "override with a single sample size");
    auto* exp_delta_opt = exp_cmd->add_option("--delta", exp_delta, "override the confidence level");
    auto* exp_trials_opt = exp_cmd->add_option("--trials", exp_trials, "override the trial count");

    // selftest
    auto* self = app.add_subcommand("selftest", "Run the scalar inequality suites");
    bool quick = false;
    self->add_flag("--quick", quick, "inequality suites only");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (gen->parsed()) {
            json cfg = load_config(gen_config);
            check_keys(cfg, {"spec", "solver", "experiment", "seed", "out", "workers"}, "config");
            DistributionSpec spec = parse_spec(cfg.at("spec"));
            if (!gen_seed_opt->count() && cfg.contains("seed"))
                gen_seed = cfg.at("seed").get<std::uint64_t>();
            Dataset ds = sample(spec, gen_n, gen_seed);
            auto out = ensure_out_dir(gen_out);
            std::string path = (out / "dataset.csv").string();
            save_csv(ds, path);
            json j;
            j["path"] = path;
            j["n"] = ds.n();
            j["d"] = ds.dim();
            j["seed"] = gen_seed;
            j["spec_fingerprint"] = ds.spec_fingerprint;
            std::cout << j.dump(2) << "\n";
            return kExitOk;
        }
        if (fit_cmd->parsed()) {
            Dataset ds = load_csv(fit_data);
            if (fit_tol >= 0.0) fit_opts.tol = fit_tol;
            if (fit_mu0 >= 0.0) fit_opts.mu0 = fit_mu0;
            fit_opts.quiet = false;
            ErmSolution sol = fit(ds, fit_p, fit_opts);
            json j;
            std::vector<double> wv(sol.weights.data(), sol.weights.data() + sol.weights.size());
            j["weights"] = wv;
            j["grad_norm"] = sol.grad_norm;
            j["iterations"] = sol.iterations;
            j["converged"] = sol.converged;
            j["empirical_risk"] = empirical_risk(ds, fit_p, sol.weights);
            std::cout << j.dump(2) << "\n";
            return sol.converged ? kExitOk : kExitNumerical;
        }
        if (con->parsed()) {
            json cfg = load_config(con_config);
            check_keys(cfg, {"spec", "solver", "experiment", "seed", "out", "workers"}, "config");
            DistributionSpec spec = parse_spec(cfg.at("spec"));
            ConstantEstimates c = estimate_constants(spec, con_p, con_mc);
            std::string text = constants_to_json(c);
            if (!con_out.empty())
                write_text_atomic(text + "\n",
                                  (ensure_out_dir(con_out) / "constants.json").string());
            std::cout << text << "\n";
            return kExitOk;
        }
        if (bnd->parsed()) return run_bounds(ba);
        if (exp_cmd->parsed()) {
            json cfg = load_config(exp_config);
            ExperimentOverrides ov;
            if (exp_seed_opt->count()) ov.seed = exp_seed;
            if (exp_p_opt->count()) ov.p = exp_p;
            if (exp_n_opt->count()) ov.n = exp_n;
            if (exp_delta_opt->count()) ov.delta = exp_delta;
            if (exp_trials_opt->count()) ov.trials = exp_trials;
            if (exp_out == "." && cfg.contains("out")) exp_out = cfg.at("out").get<std::string>();
            if (exp_workers == 0 && cfg.contains("workers"))
                exp_workers = cfg.at("workers").get<int>();
            return run_experiment(cfg, exp_out, exp_workers, ov);
        }
        if (self->parsed()) return run_selftest(quick);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const json::exception& e) {
        std::cerr << "error: config: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    }
    return kExitConfig;
}
