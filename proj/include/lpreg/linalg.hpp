#pragma once

#include <Eigen/Dense>

namespace lpreg {

// A nonzero vector orthogonal to the span of the given points (rows of
// `points`, m x d with 1 <= m <= d-1): projects the ordered basis columns
// through I - A^+ A and returns the first nonzero projection.
Eigen::VectorXd orthogonal_complement(const Eigen::MatrixXd& points, const Eigen::MatrixXd& basis);

// Same with the standard basis.
Eigen::VectorXd orthogonal_complement(const Eigen::MatrixXd& points);

// Symmetric PSD square root and inverse square root via eigendecomposition.
Eigen::MatrixXd sym_sqrt(const Eigen::MatrixXd& m);
Eigen::MatrixXd sym_inv_sqrt(const Eigen::MatrixXd& m);

// Smallest eigenvalue of a symmetric matrix.
double min_eigenvalue(const Eigen::MatrixXd& m);

}  // namespace lpreg
