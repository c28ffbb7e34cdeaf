#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "covsem/types.hpp"

namespace covsem {

enum class SimCase { case1, case2 };

enum class Method { proposed, sem, l1, l2 };

std::string method_name(Method m);
std::optional<Method> method_from_name(const std::string& name);

struct SimConfig {
    Index n = 10;
    Index p1 = 5;
    Index p2 = 5;
    double beta0 = 0.6;       // true structural coefficient (assumed, configurable)
    double psi = 0.4;
    double theta_scale = 0.5; // error variance level
    SimCase kind = SimCase::case1;
    double a = 0.3;
    double b = 0.3;
    double alpha_decay = 0.75;  // in (1/2, 1)
    int m = 100;                // Monte Carlo repetitions
    int n_init = 10;
    int b_self = 10;
    int b_cross = 10;
    int b_infer = 100;
    std::uint64_t seed = 1;

    /// Case 2 concrete configuration: n=7 and unit tail coefficients, so the
    /// tails are p^{-alpha} * Uniform(1, p^{7/4}).
    static SimConfig case2_defaults();

    void validate() const;
};

/// Loading vector (1, 1, coef*p^{-alpha}, ..., coef*p^{-alpha}) of length p.
Vector pattern_loadings(Index p, double coef, double alpha);

struct GeneratedData {
    DataBlocks data;
    Vector lambda_x;  // realized loadings (random tails under case 2)
    Vector lambda_y;
    FactorParams truth() const;  // generator parameters as FactorParams
    double beta0 = 0.0;
    double theta_scale = 0.5;
    double psi = 0.4;
};

/// One synthetic dataset; deterministic per (config.seed, rep_index).
/// Case 2 redraws the tail multipliers every repetition.
GeneratedData generate(const SimConfig& config, int rep_index);

/// Share of Delta_xy carried by the dominant {1,2}x{1,2} loading block:
///   sum_{r,s<=2} sigma^2_{(r,s)} / sum_{r,s} sigma^2_{(r,s)},
/// sigma^2_{(r,s)} = beta0^2 lambda_{x,r}^2 lambda_{y,s}^2.
double energy_concentration_ratio(const Vector& lambda_x, const Vector& lambda_y);

/// Ratio for the config's deterministic (case 1 form) loadings.
double energy_concentration_ratio(const SimConfig& config);

struct TrialRecord {
    Method method = Method::proposed;
    bool valid = false;
    double beta_hat = 0.0;      // meaningful iff valid
    double energy_ratio = 0.0;  // generator-side ratio for the rep's data
    int seed_index = 0;         // repetition index
};

struct MetricCI {
    double low = 0.0;
    double high = 0.0;
};

struct MethodMetrics {
    Method method = Method::proposed;
    int trials = 0;
    int valid_count = 0;
    double valid_rate = 0.0;
    // Present only when at least one trial is valid.
    std::optional<double> bias;
    std::optional<double> var;
    std::optional<double> rmse;
    MetricCI bias_ci, var_ci, rmse_ci;
    double pos_ratio = 0.0;   // share of valid trials with beta_hat - beta0 > 0
    double neg_ratio = 0.0;
    double zero_ratio = 0.0;
    std::optional<double> iqr;  // IQR of beta_hat - beta0 over valid trials
};

struct MetricsReport {
    double beta0 = 0.0;
    std::vector<MethodMetrics> per_method;

    const MethodMetrics* find(Method m) const;
};

/// Runs M repetitions; every method sees the same generated data per rep.
/// L1/L2 regularization weights are pre-tuned once via oracle_tune_lambda.
/// Individual method failures become invalid records, never aborting the sweep.
std::vector<TrialRecord> run_monte_carlo(const SimConfig& config,
                                         const std::vector<Method>& methods);

/// Valid rate over all trials; Bias/Var/RMSE, sign ratios and IQR over the
/// valid ones, each point metric with a percentile bootstrap CI
/// (ci_resamples resamples of the valid-trial list).
MetricsReport summarize(const std::vector<TrialRecord>& records, double beta0,
                        int ci_resamples = 1000, std::uint64_t ci_seed = 1234);

struct AppendixRow {
    Index p = 0;
    double ratio = 0.0;     // energy concentration of the {1,2}^2 block
    double tail_max = 0.0;  // max sigma^2 outside the dominant block
};

struct AppendixReport {
    std::vector<AppendixRow> rows;
    bool ratio_increasing = false;
    bool tail_decreasing = false;
};

/// Numerical check of the sparsity proposition for loadings
/// (1, 1, a p^{-alpha}, ...): the dominant-block ratio must increase in p
/// and the largest tail component must decrease. Requires alpha in (1/2, 1).
AppendixReport appendix_a_check(double a, double b, double alpha_decay,
                                const std::vector<Index>& p_list);

}  // namespace covsem
