#include "lpreg/distributions.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace lpreg {

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument(msg);
}

Eigen::MatrixXd spd_cholesky(const Eigen::MatrixXd& m, const char* what) {
    require(m.rows() == m.cols() && m.rows() >= 1, std::string(what) + ": matrix must be square");
    require((m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff()),
            std::string(what) + ": matrix must be symmetric");
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    require(llt.info() == Eigen::Success, std::string(what) + ": matrix must be positive definite");
    return llt.matrixL();
}

int family_base_dim(const CovariateFamily& fam) {
    return std::visit(
        [](const auto& f) -> int {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, GaussianCovariates>)
                return static_cast<int>(f.covariance.rows());
            else if constexpr (std::is_same_v<T, StudentTCovariates>)
                return static_cast<int>(f.scale.rows());
            else if constexpr (std::is_same_v<T, DiscreteCovariates>)
                return static_cast<int>(f.atoms.cols());
            else
                return static_cast<int>(f.coordinates.size());
        },
        fam);
}

// Shortest representation that round-trips exactly.
std::string format_double(double v) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

DistributionSpec::DistributionSpec(CovariateFamily covariates, bool intercept,
                                   Eigen::VectorXd target_weights, NoiseFamily noise)
    : covariates_(std::move(covariates)),
      intercept_(intercept),
      target_weights_(std::move(target_weights)),
      noise_(noise),
      base_dim_(family_base_dim(covariates_)) {
    require(base_dim_ >= 1, "DistributionSpec: dimension must be >= 1");
    require(target_weights_.size() == dim(),
            "DistributionSpec: target_weights must have the ambient dimension");

    if (const auto* g = std::get_if<GaussianCovariates>(&covariates_)) {
        chol_ = spd_cholesky(g->covariance, "gaussian covariance");
    } else if (const auto* t = std::get_if<StudentTCovariates>(&covariates_)) {
        require(t->nu > 0.0, "student_t covariates: nu must be > 0");
        chol_ = spd_cholesky(t->scale, "student_t scale");
    } else if (const auto* d = std::get_if<DiscreteCovariates>(&covariates_)) {
        require(d->atoms.rows() >= 1, "discrete covariates: need at least one atom");
        require(d->probabilities.size() == d->atoms.rows(),
                "discrete covariates: one probability per atom");
        require(d->probabilities.minCoeff() >= 0.0, "discrete covariates: negative probability");
        require(std::fabs(d->probabilities.sum() - 1.0) <= 1e-12,
                "discrete covariates: probabilities must sum to 1");
        // The support must not sit inside a hyperplane through the origin.
        Eigen::MatrixXd a = effective_atoms();
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
        require(qr.rank() == dim(), "discrete covariates: atoms lie in a hyperplane");
    } else if (const auto* p = std::get_if<ProductCovariates>(&covariates_)) {
        for (const auto& m : p->coordinates) {
            require(m.scale > 0.0, "product covariates: scale must be > 0");
            if (m.kind == Marginal::Kind::StudentT)
                require(m.nu > 0.0, "product covariates: nu must be > 0");
        }
    }

    require(noise_.scale >= 0.0, "noise: scale must be >= 0");
    require(noise_.shift >= 0.0, "noise: shift must be >= 0");
    if (noise_.kind == NoiseFamily::Kind::StudentT)
        require(noise_.nu > 0.0, "noise: nu must be > 0");
}

Eigen::MatrixXd DistributionSpec::effective_atoms() const {
    const auto& d = std::get<DiscreteCovariates>(covariates_);
    if (!intercept_) return d.atoms;
    Eigen::MatrixXd a(d.atoms.rows(), d.atoms.cols() + 1);
    a.col(0).setOnes();
    a.rightCols(d.atoms.cols()) = d.atoms;
    return a;
}

Eigen::VectorXd DistributionSpec::sample_x(RngStream& rng) const {
    Eigen::VectorXd base(base_dim_);
    if (std::holds_alternative<GaussianCovariates>(covariates_)) {
        Eigen::VectorXd z(base_dim_);
        for (int j = 0; j < base_dim_; ++j) z[j] = rng.normal();
        base = chol_ * z;
    } else if (const auto* t = std::get_if<StudentTCovariates>(&covariates_)) {
        Eigen::VectorXd z(base_dim_);
        for (int j = 0; j < base_dim_; ++j) z[j] = rng.normal();
        double w = rng.chi_squared(t->nu);
        base = (chol_ * z) * std::sqrt(t->nu / w);
    } else if (const auto* d = std::get_if<DiscreteCovariates>(&covariates_)) {
        double u = rng.uniform();
        double acc = 0.0;
        Eigen::Index k = d->atoms.rows() - 1;
        for (Eigen::Index i = 0; i < d->atoms.rows(); ++i) {
            acc += d->probabilities[i];
            if (u <= acc) {
                k = i;
                break;
            }
        }
        base = d->atoms.row(k);
    } else {
        const auto& p = std::get<ProductCovariates>(covariates_);
        for (int j = 0; j < base_dim_; ++j) {
            const Marginal& m = p.coordinates[static_cast<std::size_t>(j)];
            switch (m.kind) {
                case Marginal::Kind::Gaussian: base[j] = m.scale * rng.normal(); break;
                case Marginal::Kind::StudentT: base[j] = m.scale * rng.student_t(m.nu); break;
                case Marginal::Kind::Laplace: base[j] = rng.laplace(m.scale); break;
            }
        }
    }
    if (!intercept_) return base;
    Eigen::VectorXd x(dim());
    x[0] = 1.0;
    x.tail(base_dim_) = base;
    return x;
}

double DistributionSpec::sample_noise(RngStream& rng) const {
    switch (noise_.kind) {
        case NoiseFamily::Kind::None: return 0.0;
        case NoiseFamily::Kind::Gaussian: return noise_.scale * rng.normal();
        case NoiseFamily::Kind::Laplace: return rng.laplace(noise_.scale);
        case NoiseFamily::Kind::StudentT: {
            double mag = noise_.shift + noise_.scale * std::fabs(rng.student_t(noise_.nu));
            return rng.uniform() < 0.5 ? -mag : mag;
        }
    }
    return 0.0;
}

Eigen::MatrixXd DistributionSpec::second_moment_matrix() const {
    Eigen::MatrixXd base(base_dim_, base_dim_);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(base_dim_);
    if (const auto* g = std::get_if<GaussianCovariates>(&covariates_)) {
        base = g->covariance;
    } else if (const auto* t = std::get_if<StudentTCovariates>(&covariates_)) {
        if (t->nu <= 2.0)
            throw MomentViolation("second_moment_matrix: student_t needs nu > 2");
        base = t->scale * (t->nu / (t->nu - 2.0));
    } else if (const auto* d = std::get_if<DiscreteCovariates>(&covariates_)) {
        base.setZero();
        for (Eigen::Index i = 0; i < d->atoms.rows(); ++i) {
            base += d->probabilities[i] * d->atoms.row(i).transpose() * d->atoms.row(i);
            mean += d->probabilities[i] * d->atoms.row(i).transpose();
        }
    } else {
        const auto& p = std::get<ProductCovariates>(covariates_);
        base.setZero();
        for (int j = 0; j < base_dim_; ++j) {
            const Marginal& m = p.coordinates[static_cast<std::size_t>(j)];
            double v = 0.0;
            switch (m.kind) {
                case Marginal::Kind::Gaussian: v = m.scale * m.scale; break;
                case Marginal::Kind::Laplace: v = 2.0 * m.scale * m.scale; break;
                case Marginal::Kind::StudentT:
                    if (m.nu <= 2.0)
                        throw MomentViolation("second_moment_matrix: student_t needs nu > 2");
                    v = m.scale * m.scale * m.nu / (m.nu - 2.0);
                    break;
            }
            base(j, j) = v;
        }
    }
    if (!intercept_) return base;
    Eigen::MatrixXd g(dim(), dim());
    g(0, 0) = 1.0;
    g.block(0, 1, 1, base_dim_) = mean.transpose();
    g.block(1, 0, base_dim_, 1) = mean;
    g.block(1, 1, base_dim_, base_dim_) = base;
    return g;
}

std::string DistributionSpec::fingerprint() const {
    std::ostringstream os;
    os << "d=" << base_dim_ << ";i=" << intercept_ << ";w=";
    for (Eigen::Index j = 0; j < target_weights_.size(); ++j)
        os << format_double(target_weights_[j]) << ",";
    std::visit(
        [&](const auto& f) {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, GaussianCovariates>) {
                os << ";gaussian:";
                for (Eigen::Index i = 0; i < f.covariance.size(); ++i)
                    os << format_double(f.covariance.data()[i]) << ",";
            } else if constexpr (std::is_same_v<T, StudentTCovariates>) {
                os << ";student_t:" << format_double(f.nu) << ":";
                for (Eigen::Index i = 0; i < f.scale.size(); ++i)
                    os << format_double(f.scale.data()[i]) << ",";
            } else if constexpr (std::is_same_v<T, DiscreteCovariates>) {
                os << ";discrete:";
                for (Eigen::Index i = 0; i < f.atoms.size(); ++i)
                    os << format_double(f.atoms.data()[i]) << ",";
                os << ":";
                for (Eigen::Index i = 0; i < f.probabilities.size(); ++i)
                    os << format_double(f.probabilities[i]) << ",";
            } else {
                os << ";product:";
                for (const auto& m : f.coordinates)
                    os << static_cast<int>(m.kind) << ":" << format_double(m.scale) << ":"
                       << format_double(m.nu) << ",";
            }
        },
        covariates_);
    os << ";noise:" << static_cast<int>(noise_.kind) << ":" << format_double(noise_.scale) << ":"
       << format_double(noise_.nu) << ":" << format_double(noise_.shift);
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a(os.str())));
    return std::string(buf);
}

MomentReport moment_exists(const DistributionSpec& spec, double order) {
    MomentReport rep;
    const int d = spec.dim();
    rep.coordinate.assign(static_cast<std::size_t>(d), true);

    auto base_coord = [&](int j) -> bool {
        const auto& fam = spec.covariates();
        if (const auto* t = std::get_if<StudentTCovariates>(&fam)) {
            (void)j;
            return order < t->nu;
        }
        if (const auto* p = std::get_if<ProductCovariates>(&fam)) {
            const Marginal& m = p->coordinates[static_cast<std::size_t>(j)];
            return m.kind != Marginal::Kind::StudentT || order < m.nu;
        }
        return true;  // gaussian / discrete have all moments
    };

    const int off = spec.intercept() ? 1 : 0;
    for (int j = 0; j < spec.base_dim(); ++j)
        rep.coordinate[static_cast<std::size_t>(j + off)] = base_coord(j);

    // Y = <w*, X> + eps: every coordinate touched by w* and the noise.
    rep.response = noise_moment_exists(spec, order);
    for (int j = 0; j < d; ++j)
        if (spec.target_weights()[j] != 0.0 && !rep.coordinate[static_cast<std::size_t>(j)])
            rep.response = false;
    return rep;
}

bool MomentReport::all() const {
    return response && coordinates_all();
}

bool MomentReport::coordinates_all() const {
    return std::all_of(coordinate.begin(), coordinate.end(), [](bool b) { return b; });
}

bool noise_moment_exists(const DistributionSpec& spec, double order) {
    const NoiseFamily& nf = spec.noise();
    switch (nf.kind) {
        case NoiseFamily::Kind::None:
        case NoiseFamily::Kind::Gaussian:
        case NoiseFamily::Kind::Laplace: return true;
        case NoiseFamily::Kind::StudentT: return order < nf.nu;
    }
    return true;
}

bool negative_noise_moment_exists(const DistributionSpec& spec, double a) {
    if (a <= 0.0) return true;
    const NoiseFamily& nf = spec.noise();
    if (nf.kind == NoiseFamily::Kind::None) return false;
    if (nf.kind == NoiseFamily::Kind::StudentT && nf.shift > 0.0) return true;
    // Density positive and bounded near 0.
    return a < 1.0;
}

bool strongly_nonrealizable(const DistributionSpec& spec) {
    return spec.noise().kind != NoiseFamily::Kind::None;
}

Dataset sample(const DistributionSpec& spec, Eigen::Index n, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("sample: n must be >= 1");
    Dataset ds;
    ds.design.resize(n, spec.dim());
    ds.response.resize(n);
    ds.seed = seed;
    ds.spec_fingerprint = spec.fingerprint();
    const Eigen::VectorXd& w = spec.target_weights();
    for (Eigen::Index i = 0; i < n; ++i) {
        RngStream row(seed, static_cast<std::uint64_t>(i));
        Eigen::VectorXd x = spec.sample_x(row);
        ds.design.row(i) = x;
        ds.response[i] = w.dot(x) + spec.sample_noise(row);
    }
    if (!ds.design.allFinite() || !ds.response.allFinite())
        throw NumericalBreakdown("sample: non-finite draw (overflowing tail parameters?)");
    return ds;
}

void save_csv(const Dataset& ds, const std::string& path) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("save_csv: cannot open " + tmp);
        for (Eigen::Index j = 0; j < ds.dim(); ++j) out << "x" << (j + 1) << ",";
        out << "y\n";
        for (Eigen::Index i = 0; i < ds.n(); ++i) {
            for (Eigen::Index j = 0; j < ds.dim(); ++j)
                out << format_double(ds.design(i, j)) << ",";
            out << format_double(ds.response[i]) << "\n";
        }
        if (!out) throw std::runtime_error("save_csv: write failed for " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

double parse_cell(const std::string& cell, int line_no) {
    double v = 0.0;
    const char* b = cell.data();
    const char* e = b + cell.size();
    auto res = std::from_chars(b, e, v);
    if (res.ec != std::errc{} || res.ptr != e || !std::isfinite(v))
        throw ParseError("load_csv: non-numeric cell '" + cell + "' at line " +
                         std::to_string(line_no));
    return v;
}

}  // namespace

Dataset load_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("load_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("load_csv: empty file " + path);
    auto header = split_csv_line(line);
    if (header.size() < 2 || header.back() != "y")
        throw ParseError("load_csv: malformed header at line 1 (expected x1,...,xd,y)");
    const std::size_t d = header.size() - 1;
    for (std::size_t j = 0; j < d; ++j)
        if (header[j] != "x" + std::to_string(j + 1))
            throw ParseError("load_csv: malformed header at line 1 (expected x" +
                             std::to_string(j + 1) + ", got '" + header[j] + "')");

    std::vector<std::vector<double>> rows;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto cells = split_csv_line(line);
        if (cells.size() != d + 1)
            throw ParseError("load_csv: row of width " + std::to_string(cells.size()) +
                             " at line " + std::to_string(line_no) + " (expected " +
                             std::to_string(d + 1) + ")");
        std::vector<double> row;
        row.reserve(d + 1);
        for (const auto& c : cells) row.push_back(parse_cell(c, line_no));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ParseError("load_csv: no data rows in " + path);

    Dataset ds;
    ds.design.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
    ds.response.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < d; ++j)
            ds.design(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        ds.response[static_cast<Eigen::Index>(i)] = rows[i][d];
    }
    return ds;
}

}  // namespace lpreg
