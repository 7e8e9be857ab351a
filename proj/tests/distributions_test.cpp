#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "lpreg/distributions.hpp"

using namespace lpreg;

namespace {

DistributionSpec gaussian_identity(int d, double sigma_eps, Eigen::VectorXd w) {
    return DistributionSpec(GaussianCovariates{Eigen::MatrixXd::Identity(d, d)}, false,
                            std::move(w),
                            sigma_eps > 0.0 ? NoiseFamily::gaussian(sigma_eps)
                                            : NoiseFamily::none());
}

DistributionSpec two_atoms() {
    Eigen::MatrixXd atoms(2, 2);
    atoms << 1, 0, 0, 1;
    Eigen::VectorXd probs(2);
    probs << 0.5, 0.5;
    Eigen::VectorXd w(2);
    w << 0.7, -0.4;
    return DistributionSpec(DiscreteCovariates{atoms, probs}, false, w, NoiseFamily::none());
}

}  // namespace

TEST_CASE("realizable gaussian spec: responses follow the target exactly") {
    Eigen::VectorXd w(2);
    w << 1, 0;
    auto spec = gaussian_identity(2, 0.0, w);
    Dataset ds = sample(spec, 4, 7);
    for (Eigen::Index i = 0; i < ds.n(); ++i)
        CHECK(ds.response[i] == ds.design(i, 0));
}

TEST_CASE("discrete spec: all rows are atoms") {
    auto spec = two_atoms();
    Dataset ds = sample(spec, 100, 1);
    for (Eigen::Index i = 0; i < ds.n(); ++i) {
        bool e1 = ds.design(i, 0) == 1.0 && ds.design(i, 1) == 0.0;
        bool e2 = ds.design(i, 0) == 0.0 && ds.design(i, 1) == 1.0;
        CHECK((e1 || e2));
    }
}

TEST_CASE("sampling is deterministic in the seed and prefix-stable in n") {
    Eigen::VectorXd w(3);
    w << 1, -2, 0.5;
    auto spec = gaussian_identity(3, 1.0, w);
    Dataset a = sample(spec, 50, 42);
    Dataset b = sample(spec, 50, 42);
    CHECK(a.design == b.design);
    CHECK(a.response == b.response);
    Dataset c = sample(spec, 80, 42);
    CHECK(c.design.topRows(50) == a.design);
    Dataset d = sample(spec, 50, 43);
    CHECK(d.design != a.design);
}

TEST_CASE("moment_exists analytic rules") {
    Eigen::VectorXd w(2);
    w << 1, 1;
    auto t5 = DistributionSpec(StudentTCovariates{5.0, Eigen::MatrixXd::Identity(2, 2)}, false, w,
                               NoiseFamily::none());
    CHECK(moment_exists(t5, 4.0).all());
    auto t4 = DistributionSpec(StudentTCovariates{4.0, Eigen::MatrixXd::Identity(2, 2)}, false, w,
                               NoiseFamily::none());
    CHECK_FALSE(moment_exists(t4, 4.0).all());
    auto g = gaussian_identity(2, 1.0, w);
    CHECK(moment_exists(g, 12.0).all());
    // Heavy noise limits the response moment only.
    auto heavy = DistributionSpec(GaussianCovariates{Eigen::MatrixXd::Identity(2, 2)}, false, w,
                                  NoiseFamily::student_t(3.0, 1.0));
    auto rep = moment_exists(heavy, 4.0);
    CHECK(rep.coordinate[0]);
    CHECK_FALSE(rep.response);
}

TEST_CASE("negative noise moments") {
    Eigen::VectorXd w(1);
    w << 1;
    auto g = DistributionSpec(GaussianCovariates{Eigen::MatrixXd::Identity(1, 1)}, false, w,
                              NoiseFamily::gaussian(1.0));
    CHECK(negative_noise_moment_exists(g, 0.5));
    CHECK_FALSE(negative_noise_moment_exists(g, 1.0));
    auto shifted = DistributionSpec(GaussianCovariates{Eigen::MatrixXd::Identity(1, 1)}, false, w,
                                    NoiseFamily::student_t(3.0, 1.0, 0.1));
    CHECK(negative_noise_moment_exists(shifted, 2.0));
    auto clean = DistributionSpec(GaussianCovariates{Eigen::MatrixXd::Identity(1, 1)}, false, w,
                                  NoiseFamily::none());
    CHECK_FALSE(negative_noise_moment_exists(clean, 0.5));
}

TEST_CASE("construction rejects invalid parameters") {
    Eigen::VectorXd w2 = Eigen::VectorXd::Ones(2);
    Eigen::MatrixXd not_spd(2, 2);
    not_spd << 1, 2, 2, 1;
    CHECK_THROWS_AS(DistributionSpec(GaussianCovariates{not_spd}, false, w2, NoiseFamily::none()),
                    std::invalid_argument);
    CHECK_THROWS_AS(
        DistributionSpec(StudentTCovariates{-1.0, Eigen::MatrixXd::Identity(2, 2)}, false, w2,
                         NoiseFamily::none()),
        std::invalid_argument);
    // Probabilities off by more than 1e-12.
    Eigen::MatrixXd atoms(2, 2);
    atoms << 1, 0, 0, 1;
    Eigen::VectorXd bad_probs(2);
    bad_probs << 0.6, 0.5;
    CHECK_THROWS_AS(
        DistributionSpec(DiscreteCovariates{atoms, bad_probs}, false, w2, NoiseFamily::none()),
        std::invalid_argument);
    // Atoms inside a hyperplane through the origin.
    Eigen::MatrixXd flat(2, 2);
    flat << 1, 1, 2, 2;
    Eigen::VectorXd probs(2);
    probs << 0.5, 0.5;
    CHECK_THROWS_AS(
        DistributionSpec(DiscreteCovariates{flat, probs}, false, w2, NoiseFamily::none()),
        std::invalid_argument);
    // Weight dimension must match the ambient dimension.
    CHECK_THROWS_AS(DistributionSpec(GaussianCovariates{Eigen::MatrixXd::Identity(2, 2)}, true, w2,
                                     NoiseFamily::none()),
                    std::invalid_argument);
}

TEST_CASE("gaussian identity sample moments at n = 1e6") {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(3);
    auto spec = gaussian_identity(3, 0.0, w);
    Dataset ds = sample(spec, 1000000, 2024);
    for (int j = 0; j < 3; ++j) {
        double mean = ds.design.col(j).mean();
        double var = (ds.design.col(j).array() - mean).square().mean();
        CHECK(std::fabs(mean) < 0.005);
        CHECK(var > 0.99);
        CHECK(var < 1.01);
    }
}

TEST_CASE("discrete atom frequencies at n = 1e5") {
    auto spec = two_atoms();
    Dataset ds = sample(spec, 100000, 9);
    double f1 = (ds.design.col(0).array() == 1.0).cast<double>().mean();
    CHECK(std::fabs(f1 - 0.5) < 0.01);
}

TEST_CASE("student-t covariates have roughly the right variance") {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(2);
    auto spec = DistributionSpec(StudentTCovariates{8.0, Eigen::MatrixXd::Identity(2, 2)}, false, w,
                                 NoiseFamily::none());
    Dataset ds = sample(spec, 400000, 17);
    // Var = nu/(nu-2) = 4/3.
    double var = ds.design.col(0).array().square().mean();
    CHECK(std::fabs(var - 4.0 / 3.0) < 0.05);
    CHECK(spec.second_moment_matrix()(0, 0) == doctest::Approx(4.0 / 3.0));
}

TEST_CASE("intercept prepends a constant coordinate") {
    Eigen::VectorXd w(3);
    w << 0.5, 1, -1;
    auto spec = DistributionSpec(GaussianCovariates{Eigen::MatrixXd::Identity(2, 2)}, true, w,
                                 NoiseFamily::none());
    CHECK(spec.dim() == 3);
    Dataset ds = sample(spec, 10, 3);
    CHECK((ds.design.col(0).array() == 1.0).all());
    Eigen::MatrixXd g = spec.second_moment_matrix();
    CHECK(g(0, 0) == 1.0);
    CHECK(g(1, 1) == 1.0);
    CHECK(g(0, 1) == 0.0);
}

TEST_CASE("csv round trip") {
    Eigen::VectorXd w(2);
    w << 1. / 3., -2.0;
    auto spec = gaussian_identity(2, 1.0, w);
    Dataset ds = sample(spec, 25, 5);
    std::string path = (std::filesystem::temp_directory_path() / "lpreg_roundtrip.csv").string();
    save_csv(ds, path);
    Dataset back = load_csv(path);
    CHECK(back.design == ds.design);
    CHECK(back.response == ds.response);
    std::remove(path.c_str());
}

TEST_CASE("csv parse errors carry line numbers") {
    auto dir = std::filesystem::temp_directory_path();
    std::string good = (dir / "lpreg_small.csv").string();
    {
        std::ofstream f(good);
        f << "x1,x2,y\n1,2,3\n4,5,6\n";
    }
    Dataset ds = load_csv(good);
    CHECK(ds.n() == 2);
    CHECK(ds.dim() == 2);
    CHECK(ds.design(1, 0) == 4.0);

    std::string bad_width = (dir / "lpreg_bad_width.csv").string();
    {
        std::ofstream f(bad_width);
        f << "x1,x2,y\n1,2,3\n4,5\n";
    }
    CHECK_THROWS_WITH_AS(load_csv(bad_width), doctest::Contains("line 3"), ParseError);

    std::string bad_cell = (dir / "lpreg_bad_cell.csv").string();
    {
        std::ofstream f(bad_cell);
        f << "x1,y\n1,oops\n";
    }
    CHECK_THROWS_WITH_AS(load_csv(bad_cell), doctest::Contains("line 2"), ParseError);

    std::string bad_header = (dir / "lpreg_bad_header.csv").string();
    {
        std::ofstream f(bad_header);
        f << "a,b\n1,2\n";
    }
    CHECK_THROWS_AS(load_csv(bad_header), ParseError);
    std::remove(good.c_str());
    std::remove(bad_width.c_str());
    std::remove(bad_cell.c_str());
    std::remove(bad_header.c_str());
}

TEST_CASE("fingerprint distinguishes specs") {
    Eigen::VectorXd w(2);
    w << 1, 0;
    auto a = gaussian_identity(2, 1.0, w);
    auto b = gaussian_identity(2, 2.0, w);
    CHECK(a.fingerprint() != b.fingerprint());
    CHECK(a.fingerprint() == gaussian_identity(2, 1.0, w).fingerprint());
}

TEST_CASE("datasets reject non-finite values") {
    // An absurdly heavy tail overflows the power transform in the sampler.
    Eigen::VectorXd w(1);
    w << 1;
    auto spec = DistributionSpec(
        ProductCovariates{{Marginal{Marginal::Kind::StudentT, 1.0, 0.01}}}, false, w,
        NoiseFamily::none());
    bool threw_or_finite = true;
    try {
        Dataset ds = sample(spec, 5000, 3);
        threw_or_finite = ds.design.allFinite();
    } catch (const NumericalBreakdown&) {
        threw_or_finite = true;
    }
    CHECK(threw_or_finite);

    auto dir = std::filesystem::temp_directory_path();
    std::string inf_cell = (dir / "lpreg_inf.csv").string();
    {
        std::ofstream f(inf_cell);
        f << "x1,y\ninf,1\n";
    }
    CHECK_THROWS_AS(load_csv(inf_cell), ParseError);
    std::remove(inf_cell.c_str());
}
