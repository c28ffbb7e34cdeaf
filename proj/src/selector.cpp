#include "covsem/selector.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "covsem/model_core.hpp"
#include "covsem/rng.hpp"

namespace covsem {

namespace {

constexpr std::uint64_t kStageSelf = 11;
constexpr std::uint64_t kStageEps = 12;
constexpr std::uint64_t kStageEnrich = 13;
constexpr std::uint64_t kStageDelta = 14;
constexpr std::uint64_t kStageXi = 15;

double relative_error(const SparseCross& sparse, const FactorParams& theta, double beta) {
    const Matrix fitted = beta * (theta.lambda_x * theta.lambda_y.transpose());
    return (sparse.matrix - fitted).squaredNorm() / sparse.delta_hat;
}

// The constraint is quadratic in beta, so for a fixed theta the feasible
// betas form the closed interval centered on the least-squares value:
//   [beta_ls - h, beta_ls + h],  h = sqrt(max(xi delta - r_min, 0) / |O|^2),
// where r_min is the residual energy at beta_ls and O the loading outer
// product. Candidates are grid_points values spanning that interval plus
// beta_ls itself; an empty vector means theta admits no feasible beta.
std::vector<double> beta_candidates(const SparseCross& sparse, const FactorParams& theta,
                                    double xi_n, int grid_points) {
    const double outer_sq = theta.lambda_x.squaredNorm() * theta.lambda_y.squaredNorm();
    const double center = beta_closed_form(sparse.matrix, theta);
    const double slack =
        xi_n * sparse.delta_hat - relative_error(sparse, theta, center) * sparse.delta_hat;
    if (slack < 0.0) return {};
    const double half_width = std::sqrt(slack / outer_sq);

    std::vector<double> betas;
    betas.reserve(static_cast<std::size_t>(grid_points) + 1);
    if (grid_points > 1 && half_width > 0.0) {
        for (int k = 0; k < grid_points; ++k) {
            const double t = static_cast<double>(k) / static_cast<double>(grid_points - 1);
            betas.push_back(center - half_width + 2.0 * half_width * t);
        }
    }
    betas.push_back(center);
    return betas;
}

template <typename Fn>
auto run_stage(const char* stage, Fn&& fn) {
    try {
        return fn();
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("fit_pipeline[") + stage + "]: " + e.what());
    }
}

}  // namespace

std::vector<FeasiblePair> build_feasible_cross(const FeasiblePool& pool,
                                               const SparseCross& sparse,
                                               const ToleranceParams& tol, int grid_points) {
    if (pool.candidates.empty()) {
        throw std::invalid_argument("build_feasible_cross: empty pool");
    }
    if (!(sparse.delta_hat > 0.0)) {
        throw std::invalid_argument("build_feasible_cross: delta_hat must be > 0");
    }

    std::vector<FeasiblePair> feasible;
    for (const auto& candidate : pool.candidates) {
        for (double beta : beta_candidates(sparse, candidate.theta, tol.xi_n, grid_points)) {
            const double rel = relative_error(sparse, candidate.theta, beta);
            if (rel <= tol.xi_n) {
                feasible.push_back({candidate.theta, beta, rel, candidate.ell_self});
            }
        }
    }
    return feasible;
}

FitResult select_fit(const CovBlocks& s, const std::vector<FeasiblePair>& feasible,
                     const FeasiblePool& pool, const SparseCross& sparse,
                     const ToleranceParams& tol) {
    if (pool.candidates.empty()) {
        throw std::invalid_argument("select_fit: empty pool");
    }

    FitResult result;
    result.eps_n = pool.eps_n;
    result.xi_n = tol.xi_n;
    result.delta_hat = sparse.delta_hat;
    result.ell_hat = pool.ell_hat;
    result.pool_size = static_cast<int>(pool.candidates.size());
    result.feasible_size = static_cast<int>(feasible.size());
    result.tolerance = tol;
    result.diagnostics["sparsifier_saturated"] = sparse.saturated;
    result.diagnostics["empty_feasible_fallback"] = false;

    if (!feasible.empty()) {
        const FeasiblePair* best = nullptr;
        double best_srmr = std::numeric_limits<double>::infinity();
        for (const auto& pair : feasible) {
            const double value = srmr(s, pair.theta, pair.beta);
            bool take = best == nullptr || value < best_srmr;
            if (!take && value == best_srmr) {
                take = std::abs(pair.beta) < std::abs(best->beta) ||
                       (std::abs(pair.beta) == std::abs(best->beta) &&
                        pair.ell_self < best->ell_self);
            }
            if (take) {
                best = &pair;
                best_srmr = value;
            }
        }
        result.theta_hat = best->theta;
        result.beta_hat = best->beta;
        result.srmr_value = best_srmr;
        return result;
    }

    // Empty F_cross: fall back to the least-violating pair so the procedure
    // still returns an estimate (flagged).
    result.diagnostics["empty_feasible_fallback"] = true;
    const Candidate* best = nullptr;
    double best_beta = 0.0;
    double best_rel = std::numeric_limits<double>::infinity();
    for (const auto& candidate : pool.candidates) {
        const double beta = beta_closed_form(sparse.matrix, candidate.theta);
        const double rel = relative_error(sparse, candidate.theta, beta);
        if (best == nullptr || rel < best_rel) {
            best = &candidate;
            best_beta = beta;
            best_rel = rel;
        }
    }
    result.theta_hat = best->theta;
    result.beta_hat = best_beta;
    result.srmr_value = srmr(s, best->theta, best_beta);
    return result;
}

FitResult fit_pipeline(const DataBlocks& data_in, const FitConfig& config) {
    DataBlocks remapped;
    const DataBlocks* data_ptr = &data_in;
    if (!config.row_map.empty()) {
        if (config.row_map.size() != static_cast<std::size_t>(data_in.n())) {
            throw std::invalid_argument("fit_pipeline[preconditions]: row_map size mismatch");
        }
        remapped = data_in.rows(config.row_map);
        data_ptr = &remapped;
    }
    const DataBlocks& data = *data_ptr;

    const Index n = data.n();
    if (n <= data.p1() || n <= data.p2()) {
        throw std::invalid_argument("fit_pipeline[preconditions]: requires n > p1 and n > p2");
    }
    if (n < 4) {
        throw std::invalid_argument("fit_pipeline[preconditions]: requires n >= 4");
    }

    const CovBlocks s = run_stage("covariance", [&] { return CovBlocks::from_data(data); });

    const std::vector<Candidate> candidates = run_stage("self_mle", [&] {
        return fit_self_mle(s, config.n_init, derive_seed(config.seed, {kStageSelf}));
    });

    const EpsCalibration eps = run_stage("eps_n", [&] {
        return calibrate_eps_n(data, candidates.front().theta, config.b_self, config.alpha,
                               derive_seed(config.seed, {kStageEps}));
    });

    FeasiblePool pool = run_stage("feasible_pool", [&] {
        FeasiblePool initial = build_feasible_pool(candidates, eps.eps_n, config.alpha);
        return enrich_pool(initial, s, config.enrich_per_candidate, config.enrich_rel_scale,
                           derive_seed(config.seed, {kStageEnrich}));
    });

    const DeltaEstimate delta = run_stage("delta_xy", [&] {
        return estimate_delta_xy(data, config.n_splits, derive_seed(config.seed, {kStageDelta}));
    });
    const SparseCross sparse =
        run_stage("sparsify", [&] { return sparsify_energy(s.s_xy, delta.value); });

    const XiCalibration xi = run_stage("xi_n", [&] {
        return calibrate_xi_n(data, sparse, config.b_cross, config.alpha, config.c_max,
                              derive_seed(config.seed, {kStageXi}), config.n_splits);
    });

    const std::vector<FeasiblePair> feasible = run_stage("feasible_cross", [&] {
        return build_feasible_cross(pool, sparse, xi.params, config.beta_grid_points);
    });

    FitResult result = run_stage(
        "select", [&] { return select_fit(s, feasible, pool, sparse, xi.params); });
    result.diagnostics["delta_floored"] = delta.floored;
    result.diagnostics["bootstrap_deltas_all_floored"] = xi.params.all_bootstrap_deltas_floored;
    return result;
}

}  // namespace covsem
