#include "lpreg/linalg.hpp"

#include <stdexcept>

#include "lpreg/errors.hpp"

namespace lpreg {

Eigen::VectorXd orthogonal_complement(const Eigen::MatrixXd& points, const Eigen::MatrixXd& basis) {
    const Eigen::Index d = points.cols();
    if (points.rows() < 1 || points.rows() > d - 1)
        throw std::invalid_argument("orthogonal_complement: need 1 <= m <= d-1 points");
    if (basis.rows() != d || basis.cols() != d)
        throw std::invalid_argument("orthogonal_complement: basis must be d x d");

    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(points);
    Eigen::MatrixXd pinv = cod.pseudoInverse();
    Eigen::MatrixXd proj = Eigen::MatrixXd::Identity(d, d) - pinv * points;

    // The kernel of the point matrix is nontrivial, so some basis column
    // must project to a nonzero vector. Pick the largest projection among
    // the "first nonzero" candidates for numerical robustness: scan in
    // basis order and accept the first whose norm clears a scaled cutoff.
    const double scale = proj.cwiseAbs().maxCoeff();
    const double cutoff = 1e-12 * (scale > 0.0 ? scale : 1.0);
    Eigen::Index best = -1;
    for (Eigen::Index k = 0; k < d; ++k) {
        Eigen::VectorXd v = proj * basis.col(k);
        if (v.norm() > cutoff * basis.col(k).norm()) {
            best = k;
            break;
        }
    }
    if (best < 0) throw NumericalBreakdown("orthogonal_complement: projector vanished");
    return proj * basis.col(best);
}

Eigen::VectorXd orthogonal_complement(const Eigen::MatrixXd& points) {
    return orthogonal_complement(points, Eigen::MatrixXd::Identity(points.cols(), points.cols()));
}

Eigen::MatrixXd sym_sqrt(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    if (es.info() != Eigen::Success) throw NumericalBreakdown("sym_sqrt: eigensolver failed");
    if (es.eigenvalues().minCoeff() < 0.0)
        throw NonPositiveDefinite("sym_sqrt: negative eigenvalue");
    return es.eigenvectors() * es.eigenvalues().cwiseSqrt().asDiagonal() *
           es.eigenvectors().transpose();
}

Eigen::MatrixXd sym_inv_sqrt(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    if (es.info() != Eigen::Success) throw NumericalBreakdown("sym_inv_sqrt: eigensolver failed");
    if (es.eigenvalues().minCoeff() <= 0.0)
        throw NonPositiveDefinite("sym_inv_sqrt: nonpositive eigenvalue");
    return es.eigenvectors() * es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
           es.eigenvectors().transpose();
}

double min_eigenvalue(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw NumericalBreakdown("min_eigenvalue: eigensolver failed");
    return es.eigenvalues().minCoeff();
}

}  // namespace lpreg
