#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "covsem/selector.hpp"
#include "covsem/types.hpp"

namespace covsem {

struct BootstrapSummary {
    std::vector<double> beta_hats;  // successful replicates only
    double mean = 0.0;
    double sd = 0.0;          // sample sd (n-1)
    double ci_low = 0.0;      // percentile bounds
    double ci_high = 0.0;
    double level = 0.95;
    bool significant = false; // 0 outside [ci_low, ci_high]
    double p_approx = 1.0;    // 2 * min(#{<=0}, #{>=0}) / B_eff, capped at 1
    int requested = 0;        // B as requested
    int failures = 0;         // replicates excluded due to stage errors
};

/// Summary statistics and percentile interval for a list of bootstrap
/// estimates (exposed separately so the quantile rule is testable).
BootstrapSummary summarize_bootstrap(std::vector<double> beta_hats, double level);

/// Percentile bootstrap for the structural coefficient: resamples rows with
/// replacement B times, reruns the full pipeline per replicate (with the
/// config's inner settings), and summarizes the successful estimates.
/// Requires B >= 10; errors when more than half the replicates fail.
BootstrapSummary bootstrap_beta(const DataBlocks& data, const FitConfig& config, int B,
                                double level, std::uint64_t seed);

}  // namespace covsem
