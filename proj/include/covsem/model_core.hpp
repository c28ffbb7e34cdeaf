#pragma once

#include "covsem/types.hpp"

namespace covsem {

/// Model-implied covariance blocks of the one-factor model:
///   xx = Lambda_x Lambda_x' + Theta_delta
///   yy = tau Lambda_y Lambda_y' + Theta_eps
///   xy = beta Lambda_x Lambda_y'
struct SigmaBlocks {
    Matrix xx;
    Matrix yy;
    Matrix xy;

    Matrix assemble() const;
};

SigmaBlocks build_sigma_blocks(const FactorParams& theta, double beta);

/// Standardized root mean square residual between two full covariance
/// matrices, summing unique pairs i <= j:
///   sqrt( 2/(p(p+1)) * sum_{i<=j} ((S_ij - Sigma_ij)/sqrt(S_ii S_jj))^2 )
/// Throws std::domain_error when a diagonal entry of `sample` is not
/// strictly positive, naming the index.
double srmr_from_matrices(const Matrix& sample, const Matrix& model);

double srmr(const CovBlocks& s, const FactorParams& theta, double beta);

/// Least-squares beta minimizing ||sparse_xy - beta Lambda_x Lambda_y'||_F
/// for fixed theta:  <sparse_xy, Lx Ly'>_F / (|Lx|^2 |Ly|^2).
double beta_closed_form(const Matrix& sparse_xy, const FactorParams& theta);

}  // namespace covsem
