#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace covsem {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Observed data split into the two indicator blocks; rows are observations.
struct DataBlocks {
    Matrix x;  // n x p1
    Matrix y;  // n x p2

    DataBlocks() = default;
    DataBlocks(Matrix x_in, Matrix y_in);

    Index n() const { return x.rows(); }
    Index p1() const { return x.cols(); }
    Index p2() const { return y.cols(); }

    DataBlocks rows(const std::vector<Index>& idx) const;
};

/// Partitioned sample covariance (centered, divisor n-1) with its sample count.
struct CovBlocks {
    Matrix s_xx;  // p1 x p1, symmetric
    Matrix s_yy;  // p2 x p2, symmetric
    Matrix s_xy;  // p1 x p2
    Index n = 0;

    static CovBlocks from_data(const DataBlocks& data);

    Index p1() const { return s_xx.rows(); }
    Index p2() const { return s_yy.rows(); }
    Index p() const { return p1() + p2(); }

    /// Full (p1+p2) x (p1+p2) matrix [[s_xx, s_xy], [s_yx, s_yy]].
    Matrix assemble() const;
};

/// One-factor measurement parameters. tau = beta^2 + psi is the variance of
/// the endogenous latent as seen by the y block; psi itself is never stored.
struct FactorParams {
    Vector lambda_x;    // length p1, first entry fixed at 1
    Vector theta_delta; // length p1, diagonal of Theta_delta, > 0
    Vector lambda_y;    // length p2, first entry fixed at 1
    Vector theta_eps;   // length p2, diagonal of Theta_eps, > 0
    double tau = 1.0;   // > 0

    Index p1() const { return lambda_x.size(); }
    Index p2() const { return lambda_y.size(); }

    /// Throws std::invalid_argument on any violated invariant.
    void validate() const;
};

/// Structural coefficient with the implied disturbance variance. A negative
/// psi_implied is reported as-is, never rejected.
struct StructuralCoeff {
    double beta = 0.0;
    double psi_implied = 0.0;  // tau - beta^2

    static StructuralCoeff from(const FactorParams& theta, double beta);
};

}  // namespace covsem
