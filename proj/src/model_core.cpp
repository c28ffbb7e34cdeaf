#include "covsem/model_core.hpp"

#include <cmath>
#include <string>

namespace covsem {

Matrix SigmaBlocks::assemble() const {
    const Index p1 = xx.rows();
    const Index p2 = yy.rows();
    Matrix full(p1 + p2, p1 + p2);
    full.topLeftCorner(p1, p1) = xx;
    full.topRightCorner(p1, p2) = xy;
    full.bottomLeftCorner(p2, p1) = xy.transpose();
    full.bottomRightCorner(p2, p2) = yy;
    return full;
}

SigmaBlocks build_sigma_blocks(const FactorParams& theta, double beta) {
    theta.validate();
    SigmaBlocks sigma;
    sigma.xx = theta.lambda_x * theta.lambda_x.transpose();
    sigma.xx += theta.theta_delta.asDiagonal();
    sigma.yy = theta.tau * (theta.lambda_y * theta.lambda_y.transpose());
    sigma.yy += theta.theta_eps.asDiagonal();
    sigma.xy = beta * (theta.lambda_x * theta.lambda_y.transpose());
    return sigma;
}

double srmr_from_matrices(const Matrix& sample, const Matrix& model) {
    const Index p = sample.rows();
    if (model.rows() != p || model.cols() != p || sample.cols() != p) {
        throw std::invalid_argument("srmr: dimension mismatch");
    }
    for (Index i = 0; i < p; ++i) {
        if (!(sample(i, i) > 0.0)) {
            throw std::domain_error("srmr: nonpositive sample variance at index " +
                                    std::to_string(i));
        }
    }
    double sum = 0.0;
    for (Index i = 0; i < p; ++i) {
        for (Index j = i; j < p; ++j) {
            const double resid =
                (sample(i, j) - model(i, j)) / std::sqrt(sample(i, i) * sample(j, j));
            sum += resid * resid;
        }
    }
    const double pd = static_cast<double>(p);
    return std::sqrt(2.0 / (pd * (pd + 1.0)) * sum);
}

double srmr(const CovBlocks& s, const FactorParams& theta, double beta) {
    return srmr_from_matrices(s.assemble(), build_sigma_blocks(theta, beta).assemble());
}

double beta_closed_form(const Matrix& sparse_xy, const FactorParams& theta) {
    if (sparse_xy.rows() != theta.p1() || sparse_xy.cols() != theta.p2()) {
        throw std::invalid_argument("beta_closed_form: dimension mismatch");
    }
    const double denom = theta.lambda_x.squaredNorm() * theta.lambda_y.squaredNorm();
    if (!(denom > 0.0)) {
        throw std::invalid_argument("beta_closed_form: zero loading outer product");
    }
    return theta.lambda_x.dot(sparse_xy * theta.lambda_y) / denom;
}

}  // namespace covsem
