#include "covsem/types.hpp"

#include <cmath>
#include <vector>

namespace covsem {

DataBlocks::DataBlocks(Matrix x_in, Matrix y_in) : x(std::move(x_in)), y(std::move(y_in)) {
    if (x.rows() != y.rows()) {
        throw std::invalid_argument("DataBlocks: x and y must have the same number of rows");
    }
    if (x.cols() < 1 || y.cols() < 1) {
        throw std::invalid_argument("DataBlocks: both blocks need at least one column");
    }
}

DataBlocks DataBlocks::rows(const std::vector<Index>& idx) const {
    Matrix rx(static_cast<Index>(idx.size()), x.cols());
    Matrix ry(static_cast<Index>(idx.size()), y.cols());
    for (std::size_t k = 0; k < idx.size(); ++k) {
        rx.row(static_cast<Index>(k)) = x.row(idx[k]);
        ry.row(static_cast<Index>(k)) = y.row(idx[k]);
    }
    return DataBlocks(std::move(rx), std::move(ry));
}

CovBlocks CovBlocks::from_data(const DataBlocks& data) {
    const Index n = data.n();
    if (n < 2) {
        throw std::invalid_argument("CovBlocks: need at least 2 observations");
    }
    const Matrix xc = data.x.rowwise() - data.x.colwise().mean();
    const Matrix yc = data.y.rowwise() - data.y.colwise().mean();
    const double denom = static_cast<double>(n - 1);

    CovBlocks s;
    s.s_xx = (xc.transpose() * xc) / denom;
    s.s_yy = (yc.transpose() * yc) / denom;
    s.s_xy = (xc.transpose() * yc) / denom;
    s.n = n;
    // Products above are symmetric only up to rounding.
    s.s_xx = ((s.s_xx + s.s_xx.transpose()) / 2.0).eval();
    s.s_yy = ((s.s_yy + s.s_yy.transpose()) / 2.0).eval();
    return s;
}

Matrix CovBlocks::assemble() const {
    Matrix full(p(), p());
    full.topLeftCorner(p1(), p1()) = s_xx;
    full.topRightCorner(p1(), p2()) = s_xy;
    full.bottomLeftCorner(p2(), p1()) = s_xy.transpose();
    full.bottomRightCorner(p2(), p2()) = s_yy;
    return full;
}

void FactorParams::validate() const {
    if (lambda_x.size() < 1 || lambda_y.size() < 1) {
        throw std::invalid_argument("FactorParams: empty loading vector");
    }
    if (theta_delta.size() != lambda_x.size() || theta_eps.size() != lambda_y.size()) {
        throw std::invalid_argument("FactorParams: variance/loading length mismatch");
    }
    if (lambda_x[0] != 1.0 || lambda_y[0] != 1.0) {
        throw std::invalid_argument("FactorParams: first loadings must be fixed at 1");
    }
    if ((theta_delta.array() <= 0.0).any() || (theta_eps.array() <= 0.0).any()) {
        throw std::invalid_argument("FactorParams: error variances must be strictly positive");
    }
    if (!(tau > 0.0)) {
        throw std::invalid_argument("FactorParams: tau must be strictly positive");
    }
}

StructuralCoeff StructuralCoeff::from(const FactorParams& theta, double beta) {
    return StructuralCoeff{beta, theta.tau - beta * beta};
}

}  // namespace covsem
