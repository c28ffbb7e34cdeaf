#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "covsem/simlab.hpp"
#include "covsem/types.hpp"

namespace covsem {

/// Validity gate for full-likelihood methods: the assembled (p1+p2) sample
/// covariance must have smallest eigenvalue > tol.
bool is_valid_sample(const CovBlocks& s, double tol = 1e-10);

struct BaselineFit {
    FactorParams theta;  // tau = beta^2 + psi
    double beta = 0.0;
    double psi = 0.0;
    double objective = 0.0;  // penalized negative log-likelihood at the optimum
};

/// Conventional SEM: multi-start minimization of the joint likelihood
/// log|Sigma(theta,beta)| + tr(S Sigma^-1) on the full matrix. Returns
/// nullopt when the sample is invalid (the valid-rate protocol), never throws
/// for that case.
std::optional<BaselineFit> fit_full_ml(const CovBlocks& s, int n_init, std::uint64_t seed);

enum class Penalty { l1, l2 };

/// Joint likelihood plus lambda * ||w||_1 or lambda * ||w||_2^2 where w holds
/// beta and the free loadings (error variances and psi are not penalized).
std::optional<BaselineFit> fit_penalized(const CovBlocks& s, Penalty penalty, double lambda,
                                         int n_init, std::uint64_t seed);

/// The default regularization grid {0.001, ..., 1000}.
const std::vector<double>& default_lambda_grid();

/// Packed coordinates of the joint likelihood:
/// [lambda_x tail, log theta_delta, lambda_y tail, log theta_eps, beta, log psi].
Vector joint_pack(const FactorParams& theta, double beta, double psi);

/// Penalized joint objective value (and gradient when grad is non-null) in
/// packed coordinates; exposed for gradient verification.
double joint_objective(const CovBlocks& s, Penalty penalty, double lambda, const Vector& packed,
                       Vector* grad);

/// Simulation-context tuning: for each grid value, runs `trials` generated
/// datasets and computes the RMSE of the penalized estimate against the true
/// beta; returns the grid value with the smallest RMSE (ties -> smaller).
double oracle_tune_lambda(const SimConfig& gen_config, Penalty penalty,
                          const std::vector<double>& grid, int trials, std::uint64_t seed);

}  // namespace covsem
