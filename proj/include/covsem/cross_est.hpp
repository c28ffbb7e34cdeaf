#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "covsem/types.hpp"

namespace covsem {

/// Centered sample cross-covariance S_xy with divisor n-1. Requires n >= 2.
Matrix sample_cross_cov(const DataBlocks& data);

struct DeltaEstimate {
    double value = 0.0;
    bool floored = false;  // raw estimate was below the 1e-12 floor
};

/// One split-half cross-data-matrix term: tr(S_xy^(A) S_yx^(B)) where each
/// half computes its own centered cross-covariance. Exposed for oracle tests.
double ecdm_split_trace(const DataBlocks& data, const std::vector<Index>& rows_a,
                        const std::vector<Index>& rows_b);

/// Signal-strength estimate Delta_xy = ||Sigma_xy||_F^2 by the cross-data-
/// matrix method: disjoint half-samples A (ceil(n/2) rows) and B, averaged
/// over n_splits random splits. A nonpositive estimate is floored (flagged)
/// to the largest squared entry of S_xy, the one-entry minimum energy the
/// sparsifier retains regardless. Requires n >= 4.
DeltaEstimate estimate_delta_xy(const DataBlocks& data, int n_splits, std::uint64_t seed);

/// Energy-preserving sparsified cross-covariance.
struct SparseCross {
    Matrix matrix;                                // zero off support
    std::vector<std::pair<Index, Index>> support; // nonincreasing by |value|
    double delta_hat = 0.0;
    double energy_retained = 0.0;  // sum of squared retained entries
    bool saturated = false;        // total energy < delta_hat, everything kept
};

/// Sorts entries by |value| descending (ties row-major) and retains the
/// shortest prefix whose cumulative squared sum reaches delta_hat, with a
/// one-entry minimum so the estimate is never identically zero unless s_xy is.
SparseCross sparsify_energy(const Matrix& s_xy, double delta_hat);

/// Estimator of tr(Sigma^2) from an n x p data matrix: the sample is split
/// into subsets S1 (first ceil(n/2) rows) and S2; over all cross pairs
/// (i in S1, j in S2), with x1_i = x_i - mean(S1 \ {i}) and likewise x2_j,
///   W_n = sum_{i,j} [x1_i' x2_j]^2 / (u_n n1 n2),
///   u_n = n1 n2 / ((n1-1)(n2-1)),
/// which makes every term unbiased for tr(Sigma^2). Requires n >= 4.
double w_n_trace(const Matrix& block_data);

/// Theoretical relative-error rate r_{n,p} = log(p)/n + (W1 W2)^{1/4} / sqrt(n Delta).
/// p is the total dimension p1+p2; requires delta_hat > 0 (callers floor first).
double rate_r_np(Index n, Index p, double w1, double w2, double delta_hat);

struct ToleranceParams {
    double xi_n = 0.0;
    double c_hat = 0.0;
    double c_trunc = 0.0;  // min(c_hat, c_max)
    double c_max = 10.0;
    double r_np = 0.0;
    double w1 = 0.0;
    double w2 = 0.0;
    double q_upper = 0.0;  // (1-alpha) quantile of the bootstrap statistics
    double alpha = 0.05;
    bool all_bootstrap_deltas_floored = false;
};

struct XiCalibration {
    ToleranceParams params;
    std::vector<double> t_values;  // T^(b), one per bootstrap replicate
};

/// Bootstrap calibration of the relative-error tolerance. For each replicate
/// (rows of (X, Y) resampled jointly): recompute Delta and the sparsifier,
/// form T^(b) = ||Sparse^(b) - Sparse||_F^2 / Delta^(b); then
///   q = Quantile_{1-alpha}(T), C = q / r_{n,p}, xi_n = min(C, c_max) * r_{n,p}.
XiCalibration calibrate_xi_n(const DataBlocks& data, const SparseCross& base, int B,
                             double alpha, double c_max, std::uint64_t seed, int n_splits = 20);

}  // namespace covsem
