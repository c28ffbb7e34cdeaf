#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "covsem/cross_est.hpp"
#include "covsem/self_mle.hpp"
#include "covsem/types.hpp"

namespace covsem {

struct FitConfig {
    int n_init = 10;
    int b_self = 10;
    int b_cross = 10;
    double alpha = 0.05;
    double c_max = 10.0;
    int n_splits = 20;            // random splits for the Delta estimator
    int enrich_per_candidate = 20;
    double enrich_rel_scale = 0.05;
    int beta_grid_points = 41;  // grid over each candidate's feasible beta interval
    // Settings applied inside nested bootstrap replicates (inference).
    int inner_n_init = 10;
    int inner_b_self = 10;
    int inner_b_cross = 10;
    std::uint64_t seed = 0;
    // Canonical row order applied before any row-indexed operation (empty =
    // identity). Permuting the data rows and supplying the inverse map here
    // yields identical results; this realizes the row-relabeling invariance
    // of the procedure and exists for tests.
    std::vector<Index> row_map;
};

struct FeasiblePair {
    FactorParams theta;
    double beta = 0.0;
    double rel_error = 0.0;  // ||Sparse - beta Lx Ly'||_F^2 / delta_hat
    double ell_self = 0.0;
};

/// Members of F_cross. The relative-error constraint is quadratic in beta,
/// so for each pool candidate the feasible betas form a closed interval
/// around the closed-form least-squares value; that interval is sampled at
/// grid_points values (plus the closed form itself), every one of which
/// satisfies the constraint. Candidates whose interval is empty contribute
/// nothing.
std::vector<FeasiblePair> build_feasible_cross(const FeasiblePool& pool,
                                               const SparseCross& sparse,
                                               const ToleranceParams& tol,
                                               int grid_points = 41);

/// The selected estimate plus everything needed for persistence and inference.
struct FitResult {
    FactorParams theta_hat;
    double beta_hat = 0.0;
    double srmr_value = 0.0;
    double eps_n = 0.0;
    double xi_n = 0.0;
    double delta_hat = 0.0;
    double ell_hat = 0.0;
    int pool_size = 0;
    int feasible_size = 0;
    ToleranceParams tolerance;
    std::map<std::string, bool> diagnostics;

    StructuralCoeff structural() const { return StructuralCoeff::from(theta_hat, beta_hat); }
};

/// SRMR-minimizing pair among the feasible ones (ties: smaller |beta|, then
/// lower ell_self). On an empty feasible set, falls back to the pool pair
/// with minimal relative error and sets diagnostics["empty_feasible_fallback"].
FitResult select_fit(const CovBlocks& s, const std::vector<FeasiblePair>& feasible,
                     const FeasiblePool& pool, const SparseCross& sparse,
                     const ToleranceParams& tol);

/// The full estimation procedure: covariance blocks, multi-start self MLE,
/// eps_n bootstrap, feasible pool (+enrichment), sparsified cross-covariance,
/// xi_n bootstrap, F_cross filtering and SRMR selection. Deterministic given
/// config.seed; stage failures are rethrown with a stage label.
FitResult fit_pipeline(const DataBlocks& data, const FitConfig& config);

}  // namespace covsem
