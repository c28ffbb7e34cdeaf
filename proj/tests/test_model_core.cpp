#include <doctest.h>

#include <cmath>
#include <random>

#include "covsem/model_core.hpp"
#include "covsem/simlab.hpp"
#include "oracles.hpp"

using namespace covsem;

namespace {

FactorParams make_params(Vector lx, Vector td, Vector ly, Vector te, double tau) {
    FactorParams theta;
    theta.lambda_x = std::move(lx);
    theta.theta_delta = std::move(td);
    theta.lambda_y = std::move(ly);
    theta.theta_eps = std::move(te);
    theta.tau = tau;
    return theta;
}

FactorParams random_params(std::mt19937_64& rng, Index p1, Index p2) {
    std::uniform_real_distribution<double> loading(-1.2, 1.4);
    std::uniform_real_distribution<double> variance(0.2, 1.6);
    FactorParams theta;
    theta.lambda_x = Vector::Ones(p1);
    for (Index i = 1; i < p1; ++i) theta.lambda_x[i] = loading(rng);
    theta.lambda_y = Vector::Ones(p2);
    for (Index i = 1; i < p2; ++i) theta.lambda_y[i] = loading(rng);
    theta.theta_delta = Vector(p1);
    for (Index i = 0; i < p1; ++i) theta.theta_delta[i] = variance(rng);
    theta.theta_eps = Vector(p2);
    for (Index i = 0; i < p2; ++i) theta.theta_eps[i] = variance(rng);
    theta.tau = variance(rng);
    return theta;
}

}  // namespace

TEST_SUITE_BEGIN("model_core");

TEST_CASE("sigma blocks: zero-beta and rank-1 arithmetic") {
    const auto theta = make_params(Vector::Ones(2), Vector::Constant(2, 0.5), Vector::Ones(2),
                                   Vector::Constant(2, 0.5), 1.0);
    const SigmaBlocks zero_beta = build_sigma_blocks(theta, 0.0);
    CHECK(zero_beta.xx(0, 0) == doctest::Approx(1.5));
    CHECK(zero_beta.xx(0, 1) == doctest::Approx(1.0));
    CHECK(zero_beta.xx(1, 1) == doctest::Approx(1.5));
    CHECK(zero_beta.xy.cwiseAbs().maxCoeff() == 0.0);

    const SigmaBlocks rank1 = build_sigma_blocks(theta, 0.4);
    for (Index i = 0; i < 2; ++i) {
        for (Index j = 0; j < 2; ++j) CHECK(rank1.xy(i, j) == doctest::Approx(0.4));
    }
}

TEST_CASE("sigma blocks match an elementwise oracle on the case-1 configuration") {
    SimConfig config;
    config.p1 = 3;
    config.p2 = 3;
    const Vector lambda = pattern_loadings(3, 0.3, 0.75);
    const double tau = config.beta0 * config.beta0 + config.psi;
    const auto theta = make_params(lambda, Vector::Constant(3, 0.5), lambda,
                                   Vector::Constant(3, 0.5), tau);
    const SigmaBlocks sigma = build_sigma_blocks(theta, config.beta0);

    const Matrix xx = oracle::sigma_xx_elementwise(lambda, theta.theta_delta);
    const Matrix yy = oracle::sigma_yy_elementwise(lambda, theta.theta_eps, tau);
    const Matrix xy = oracle::sigma_xy_elementwise(lambda, lambda, config.beta0);
    CHECK((sigma.xx - xx).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((sigma.yy - yy).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((sigma.xy - xy).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("sigma blocks: symmetry, eigenvalue floor, rank-1 cross block") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        const auto theta = random_params(rng, 4, 3);
        // The full-matrix eigenvalue floor needs an implied psi >= 0.
        const double beta = trial == 0 ? 0.0 : unit(rng) * std::sqrt(theta.tau);
        const SigmaBlocks sigma = build_sigma_blocks(theta, beta);

        CHECK((sigma.xx - sigma.xx.transpose()).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((sigma.yy - sigma.yy.transpose()).cwiseAbs().maxCoeff() < 1e-12);

        const double floor = std::min(theta.theta_delta.minCoeff(), theta.theta_eps.minCoeff());
        Eigen::SelfAdjointEigenSolver<Matrix> es(sigma.assemble(), Eigen::EigenvaluesOnly);
        CHECK(es.eigenvalues().minCoeff() >= floor - 1e-10);
        Eigen::SelfAdjointEigenSolver<Matrix> es_xx(sigma.xx, Eigen::EigenvaluesOnly);
        CHECK(es_xx.eigenvalues().minCoeff() >= theta.theta_delta.minCoeff() - 1e-10);
        Eigen::SelfAdjointEigenSolver<Matrix> es_yy(sigma.yy, Eigen::EigenvaluesOnly);
        CHECK(es_yy.eigenvalues().minCoeff() >= theta.theta_eps.minCoeff() - 1e-10);

        if (beta != 0.0) {
            Eigen::JacobiSVD<Matrix> svd(sigma.xy);
            CHECK(svd.singularValues()[1] < 1e-10 * svd.singularValues()[0]);
        }
    }
}

TEST_CASE("srmr: perfect fit, hand-expanded two-variable value, congruence invariance") {
    const auto theta = make_params(Vector::Ones(2), Vector::Constant(2, 0.4), Vector::Ones(3),
                                   Vector::Constant(3, 0.7), 0.9);
    const SigmaBlocks sigma = build_sigma_blocks(theta, 0.3);
    CovBlocks s;
    s.s_xx = sigma.xx;
    s.s_yy = sigma.yy;
    s.s_xy = sigma.xy;
    s.n = 100;
    CHECK(srmr(s, theta, 0.3) == doctest::Approx(0.0).epsilon(1e-14));

    // p1 = p2 = 1: only the cross residual (0 - 0.5)/1 contributes.
    Matrix sample = Matrix::Identity(2, 2);
    Matrix model = Matrix::Identity(2, 2);
    model(0, 1) = model(1, 0) = 0.5;
    CHECK(srmr_from_matrices(sample, model) == doctest::Approx(std::sqrt(1.0 / 12.0)));

    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> scale(0.3, 2.5);
    Matrix a = Matrix::Random(4, 4);
    Matrix sample4 = a * a.transpose() + 2.0 * Matrix::Identity(4, 4);
    Matrix model4 = sample4;
    model4(0, 2) += 0.3;
    model4(2, 0) += 0.3;
    Vector d(4);
    for (Index i = 0; i < 4; ++i) d[i] = scale(rng);
    const Matrix ds = d.asDiagonal() * sample4 * d.asDiagonal();
    const Matrix dm = d.asDiagonal() * model4 * d.asDiagonal();
    CHECK(srmr_from_matrices(ds, dm) ==
          doctest::Approx(srmr_from_matrices(sample4, model4)).epsilon(1e-12));
}

TEST_CASE("srmr: nonnegative, zero only at entrywise equality, diagonal guard") {
    Matrix sample = Matrix::Identity(3, 3);
    CHECK(srmr_from_matrices(sample, sample) == 0.0);
    Matrix model = sample;
    model(0, 1) += 1e-6;
    CHECK(srmr_from_matrices(sample, model) > 0.0);

    Matrix bad = sample;
    bad(1, 1) = 0.0;
    CHECK_THROWS_WITH_AS(srmr_from_matrices(bad, model), doctest::Contains("index 1"),
                         std::domain_error);

    CHECK(srmr_from_matrices(sample, model) == oracle::srmr_elementwise(sample, model));
}

TEST_CASE("beta closed form: exact rank-1, zero, and grid-argmin oracle") {
    const auto theta = make_params(Vector::Ones(2), Vector::Constant(2, 0.5), Vector::Ones(2),
                                   Vector::Constant(2, 0.5), 1.0);
    const Matrix outer = theta.lambda_x * theta.lambda_y.transpose();
    CHECK(beta_closed_form(0.5 * outer, theta) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(beta_closed_form(Matrix::Zero(2, 2), theta) == 0.0);

    Vector lx(3), ly(3);
    lx << 1.0, 0.5, 0.2;
    ly << 1.0, 1.0, 0.1;
    const auto theta3 = make_params(lx, Vector::Constant(3, 0.5), ly, Vector::Constant(3, 0.5), 1.0);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> entry(-1.0, 1.0);
    Matrix target(3, 3);
    for (Index i = 0; i < 3; ++i) {
        for (Index j = 0; j < 3; ++j) target(i, j) = entry(rng);
    }
    const double closed = beta_closed_form(target, theta3);
    const double grid = oracle::grid_argmin_beta(target, lx, ly, -10.0, 10.0, 200001);
    CHECK(std::abs(closed - grid) < 1e-4);

    // The closed form beats every point of a 1e5 grid over [-10, 10].
    const double at_closed = oracle::cross_residual(target, lx, ly, closed);
    for (Index k = 0; k < 100000; ++k) {
        const double beta = -10.0 + 20.0 * static_cast<double>(k) / 99999.0;
        REQUIRE(at_closed <= oracle::cross_residual(target, lx, ly, beta) + 1e-12);
    }
}

TEST_CASE("structural coefficient records tau - beta^2 exactly") {
    const auto theta = make_params(Vector::Ones(2), Vector::Constant(2, 0.5), Vector::Ones(2),
                                   Vector::Constant(2, 0.5), 0.76);
    const StructuralCoeff coeff = StructuralCoeff::from(theta, 0.6);
    CHECK(coeff.psi_implied == 0.76 - 0.36);
    const StructuralCoeff negative = StructuralCoeff::from(theta, 2.0);
    CHECK(negative.psi_implied < 0.0);  // flagged by sign, not rejected
}

TEST_CASE("invariant violations are rejected") {
    auto theta = make_params(Vector::Ones(2), Vector::Constant(2, 0.5), Vector::Ones(2),
                             Vector::Constant(2, 0.5), 1.0);
    theta.lambda_x[0] = 2.0;
    CHECK_THROWS_AS(build_sigma_blocks(theta, 0.0), std::invalid_argument);
    theta.lambda_x[0] = 1.0;
    theta.theta_delta[1] = 0.0;
    CHECK_THROWS_AS(build_sigma_blocks(theta, 0.0), std::invalid_argument);
    theta.theta_delta[1] = 0.5;
    theta.tau = -1.0;
    CHECK_THROWS_AS(build_sigma_blocks(theta, 0.0), std::invalid_argument);
}

TEST_SUITE_END();
