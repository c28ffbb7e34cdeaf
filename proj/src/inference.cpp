#include "covsem/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "covsem/rng.hpp"
#include "covsem/stats.hpp"

namespace covsem {

namespace {
constexpr std::uint64_t kTagInfer = 21;
}

BootstrapSummary summarize_bootstrap(std::vector<double> beta_hats, double level) {
    if (beta_hats.empty()) {
        throw std::invalid_argument("summarize_bootstrap: no estimates");
    }
    if (!(level > 0.0 && level < 1.0)) {
        throw std::invalid_argument("summarize_bootstrap: level must lie in (0, 1)");
    }

    BootstrapSummary summary;
    summary.level = level;
    summary.mean = mean(beta_hats);
    summary.sd = sample_sd(beta_hats);
    const double tail = (1.0 - level) / 2.0;
    summary.ci_low = quantile(beta_hats, tail);
    summary.ci_high = quantile(beta_hats, 1.0 - tail);
    summary.significant = !(summary.ci_low <= 0.0 && 0.0 <= summary.ci_high);

    std::size_t at_or_below = 0;
    std::size_t at_or_above = 0;
    for (double b : beta_hats) {
        if (b <= 0.0) ++at_or_below;
        if (b >= 0.0) ++at_or_above;
    }
    summary.p_approx = std::min(
        1.0, 2.0 * static_cast<double>(std::min(at_or_below, at_or_above)) /
                 static_cast<double>(beta_hats.size()));
    summary.beta_hats = std::move(beta_hats);
    return summary;
}

BootstrapSummary bootstrap_beta(const DataBlocks& data, const FitConfig& config, int B,
                                double level, std::uint64_t seed) {
    if (B < 10) throw std::invalid_argument("bootstrap_beta: B must be >= 10");

    const Index n = data.n();
    std::vector<double> estimates(static_cast<std::size_t>(B),
                                  std::numeric_limits<double>::quiet_NaN());

    parallel_for(static_cast<std::size_t>(B), [&](std::size_t b) {
        auto rng = make_stream(seed, {kTagInfer, static_cast<std::uint64_t>(b)});
        const DataBlocks resampled = data.rows(bootstrap_indices(rng, n));
        FitConfig inner = config;
        inner.n_init = config.inner_n_init;
        inner.b_self = config.inner_b_self;
        inner.b_cross = config.inner_b_cross;
        inner.seed = derive_seed(seed, {kTagInfer, static_cast<std::uint64_t>(b), 1});
        try {
            const double beta = fit_pipeline(resampled, inner).beta_hat;
            if (std::isfinite(beta)) estimates[b] = beta;
        } catch (const std::exception&) {
            // stage failure: replicate excluded, counted below
        }
    });

    std::vector<double> kept;
    kept.reserve(estimates.size());
    for (double e : estimates) {
        if (std::isfinite(e)) kept.push_back(e);
    }
    const int failures = B - static_cast<int>(kept.size());
    if (failures * 2 > B) {
        throw std::runtime_error("bootstrap_beta: more than half the replicates failed");
    }

    BootstrapSummary summary = summarize_bootstrap(std::move(kept), level);
    summary.requested = B;
    summary.failures = failures;
    return summary;
}

}  // namespace covsem
