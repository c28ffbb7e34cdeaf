#include "covsem/simlab.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "covsem/baselines.hpp"
#include "covsem/rng.hpp"
#include "covsem/selector.hpp"
#include "covsem/stats.hpp"

namespace covsem {

namespace {

constexpr std::uint64_t kTagGenerate = 31;
constexpr std::uint64_t kTagRep = 32;
constexpr std::uint64_t kTagTuneL1 = 33;
constexpr std::uint64_t kTagTuneL2 = 34;
constexpr std::uint64_t kTagMetricCI = 35;

double resampled_metric(const std::vector<double>& betas, std::mt19937_64& rng,
                        double beta0, int which) {
    std::uniform_int_distribution<std::size_t> pick(0, betas.size() - 1);
    std::vector<double> sample(betas.size());
    for (auto& v : sample) v = betas[pick(rng)];
    switch (which) {
        case 0: return mean(sample) - beta0;       // bias
        case 1: return variance_population(sample);  // var
        default: {                                   // rmse
            double total = 0.0;
            for (double b : sample) total += (b - beta0) * (b - beta0);
            return std::sqrt(total / static_cast<double>(sample.size()));
        }
    }
}

}  // namespace

std::string method_name(Method m) {
    switch (m) {
        case Method::proposed: return "proposed";
        case Method::sem: return "sem";
        case Method::l1: return "l1";
        case Method::l2: return "l2";
    }
    return "unknown";
}

std::optional<Method> method_from_name(const std::string& name) {
    if (name == "proposed") return Method::proposed;
    if (name == "sem") return Method::sem;
    if (name == "l1") return Method::l1;
    if (name == "l2") return Method::l2;
    return std::nullopt;
}

SimConfig SimConfig::case2_defaults() {
    SimConfig config;
    config.kind = SimCase::case2;
    config.n = 7;
    config.a = 1.0;
    config.b = 1.0;
    return config;
}

void SimConfig::validate() const {
    if (p1 < 2 || p2 < 2) throw std::invalid_argument("SimConfig: p1 and p2 must be >= 2");
    if (n < 2) throw std::invalid_argument("SimConfig: n must be >= 2");
    if (!(psi > 0.0)) throw std::invalid_argument("SimConfig: psi must be > 0");
    if (!(theta_scale > 0.0)) throw std::invalid_argument("SimConfig: theta_scale must be > 0");
    if (!(a > 0.0) || !(b > 0.0)) throw std::invalid_argument("SimConfig: a, b must be > 0");
    if (!(alpha_decay > 0.5 && alpha_decay < 1.0)) {
        throw std::invalid_argument("SimConfig: alpha_decay must lie in (1/2, 1)");
    }
    if (m < 1) throw std::invalid_argument("SimConfig: m must be >= 1");
}

Vector pattern_loadings(Index p, double coef, double alpha) {
    if (p < 2) throw std::invalid_argument("pattern_loadings: p must be >= 2");
    Vector lambda = Vector::Constant(p, coef * std::pow(static_cast<double>(p), -alpha));
    lambda[0] = 1.0;
    lambda[1] = 1.0;
    return lambda;
}

FactorParams GeneratedData::truth() const {
    FactorParams theta;
    theta.lambda_x = lambda_x;
    theta.lambda_y = lambda_y;
    theta.theta_delta = Vector::Constant(lambda_x.size(), theta_scale);
    theta.theta_eps = Vector::Constant(lambda_y.size(), theta_scale);
    theta.tau = beta0 * beta0 + psi;
    return theta;
}

GeneratedData generate(const SimConfig& config, int rep_index) {
    config.validate();
    auto rng = make_stream(config.seed, {kTagGenerate, static_cast<std::uint64_t>(rep_index)});
    std::normal_distribution<double> normal(0.0, 1.0);

    GeneratedData out;
    out.beta0 = config.beta0;
    out.theta_scale = config.theta_scale;
    out.psi = config.psi;
    out.lambda_x = pattern_loadings(config.p1, config.a, config.alpha_decay);
    out.lambda_y = pattern_loadings(config.p2, config.b, config.alpha_decay);
    if (config.kind == SimCase::case2) {
        // Tail multipliers are redrawn every repetition.
        std::uniform_real_distribution<double> eta(
            1.0, std::pow(static_cast<double>(config.p1), 1.75));
        std::uniform_real_distribution<double> zeta(
            1.0, std::pow(static_cast<double>(config.p2), 1.75));
        for (Index r = 2; r < config.p1; ++r) out.lambda_x[r] *= eta(rng);
        for (Index s = 2; s < config.p2; ++s) out.lambda_y[s] *= zeta(rng);
    }

    const double err_sd = std::sqrt(config.theta_scale);
    const double zeta_sd = std::sqrt(config.psi);
    Matrix x(config.n, config.p1);
    Matrix y(config.n, config.p2);
    for (Index i = 0; i < config.n; ++i) {
        const double xi = normal(rng);
        const double eta_latent = config.beta0 * xi + zeta_sd * normal(rng);
        for (Index j = 0; j < config.p1; ++j) {
            x(i, j) = out.lambda_x[j] * xi + err_sd * normal(rng);
        }
        for (Index j = 0; j < config.p2; ++j) {
            y(i, j) = out.lambda_y[j] * eta_latent + err_sd * normal(rng);
        }
    }
    out.data = DataBlocks(std::move(x), std::move(y));
    return out;
}

double energy_concentration_ratio(const Vector& lambda_x, const Vector& lambda_y) {
    if (lambda_x.size() < 1 || lambda_y.size() < 1) {
        throw std::invalid_argument("energy_concentration_ratio: empty loadings");
    }
    // sigma^2_{(r,s)} = beta0^2 lambda_x_r^2 lambda_y_s^2 factorizes, so the
    // ratio reduces to head/total products and beta0^2 cancels.
    const Index hx = std::min<Index>(2, lambda_x.size());
    const Index hy = std::min<Index>(2, lambda_y.size());
    const double head_x = lambda_x.head(hx).squaredNorm();
    const double head_y = lambda_y.head(hy).squaredNorm();
    const double total_x = lambda_x.squaredNorm();
    const double total_y = lambda_y.squaredNorm();
    return (head_x * head_y) / (total_x * total_y);
}

double energy_concentration_ratio(const SimConfig& config) {
    config.validate();
    return energy_concentration_ratio(pattern_loadings(config.p1, config.a, config.alpha_decay),
                                      pattern_loadings(config.p2, config.b, config.alpha_decay));
}

std::vector<TrialRecord> run_monte_carlo(const SimConfig& config,
                                         const std::vector<Method>& methods) {
    config.validate();
    if (methods.empty()) throw std::invalid_argument("run_monte_carlo: no methods");

    double lambda_l1 = 0.0;
    double lambda_l2 = 0.0;
    for (Method m : methods) {
        if (m == Method::l1) {
            lambda_l1 = oracle_tune_lambda(config, Penalty::l1, default_lambda_grid(), 5,
                                           derive_seed(config.seed, {kTagTuneL1}));
        } else if (m == Method::l2) {
            lambda_l2 = oracle_tune_lambda(config, Penalty::l2, default_lambda_grid(), 5,
                                           derive_seed(config.seed, {kTagTuneL2}));
        }
    }

    const std::size_t k = methods.size();
    std::vector<TrialRecord> records(static_cast<std::size_t>(config.m) * k);

    parallel_for(static_cast<std::size_t>(config.m), [&](std::size_t rep) {
        const GeneratedData gen = generate(config, static_cast<int>(rep));
        const double ratio = energy_concentration_ratio(gen.lambda_x, gen.lambda_y);
        const CovBlocks s = CovBlocks::from_data(gen.data);

        for (std::size_t j = 0; j < k; ++j) {
            const Method method = methods[j];
            TrialRecord rec;
            rec.method = method;
            rec.energy_ratio = ratio;
            rec.seed_index = static_cast<int>(rep);
            const std::uint64_t method_seed = derive_seed(
                config.seed, {kTagRep, static_cast<std::uint64_t>(rep),
                              static_cast<std::uint64_t>(method)});
            try {
                std::optional<double> beta;
                switch (method) {
                    case Method::proposed: {
                        FitConfig fc;
                        fc.n_init = config.n_init;
                        fc.b_self = config.b_self;
                        fc.b_cross = config.b_cross;
                        fc.seed = method_seed;
                        beta = fit_pipeline(gen.data, fc).beta_hat;
                        break;
                    }
                    case Method::sem: {
                        if (auto fit = fit_full_ml(s, config.n_init, method_seed)) {
                            beta = fit->beta;
                        }
                        break;
                    }
                    case Method::l1:
                    case Method::l2: {
                        const Penalty pen = method == Method::l1 ? Penalty::l1 : Penalty::l2;
                        const double lambda = method == Method::l1 ? lambda_l1 : lambda_l2;
                        if (auto fit = fit_penalized(s, pen, lambda, config.n_init, method_seed)) {
                            beta = fit->beta;
                        }
                        break;
                    }
                }
                if (beta && std::isfinite(*beta)) {
                    rec.valid = true;
                    rec.beta_hat = *beta;
                }
            } catch (const std::exception&) {
                // method failure: the record stays invalid
            }
            records[rep * k + j] = rec;
        }
    });
    return records;
}

MetricsReport summarize(const std::vector<TrialRecord>& records, double beta0,
                        int ci_resamples, std::uint64_t ci_seed) {
    MetricsReport report;
    report.beta0 = beta0;

    std::vector<Method> order;
    for (const auto& rec : records) {
        if (std::find(order.begin(), order.end(), rec.method) == order.end()) {
            order.push_back(rec.method);
        }
    }

    for (Method method : order) {
        MethodMetrics metrics;
        metrics.method = method;
        std::vector<double> betas;
        for (const auto& rec : records) {
            if (rec.method != method) continue;
            ++metrics.trials;
            if (rec.valid) betas.push_back(rec.beta_hat);
        }
        metrics.valid_count = static_cast<int>(betas.size());
        metrics.valid_rate =
            metrics.trials == 0 ? 0.0
                                : static_cast<double>(metrics.valid_count) /
                                      static_cast<double>(metrics.trials);
        // Canonical order so the report is exactly invariant to record order.
        std::sort(betas.begin(), betas.end());

        if (!betas.empty()) {
            metrics.bias = mean(betas) - beta0;
            metrics.var = variance_population(betas);
            double total_sq = 0.0;
            std::vector<double> errors;
            errors.reserve(betas.size());
            int pos = 0, neg = 0, zero = 0;
            for (double b : betas) {
                const double err = b - beta0;
                errors.push_back(err);
                total_sq += err * err;
                if (err > 0.0) {
                    ++pos;
                } else if (err < 0.0) {
                    ++neg;
                } else {
                    ++zero;
                }
            }
            metrics.rmse = std::sqrt(total_sq / static_cast<double>(betas.size()));
            const double nv = static_cast<double>(betas.size());
            metrics.pos_ratio = pos / nv;
            metrics.neg_ratio = neg / nv;
            metrics.zero_ratio = zero / nv;
            metrics.iqr = interquartile_range(errors);

            auto rng = make_stream(ci_seed, {kTagMetricCI, static_cast<std::uint64_t>(method)});
            std::vector<double> bias_draws, var_draws, rmse_draws;
            bias_draws.reserve(static_cast<std::size_t>(ci_resamples));
            var_draws.reserve(static_cast<std::size_t>(ci_resamples));
            rmse_draws.reserve(static_cast<std::size_t>(ci_resamples));
            for (int r = 0; r < ci_resamples; ++r) {
                bias_draws.push_back(resampled_metric(betas, rng, beta0, 0));
                var_draws.push_back(resampled_metric(betas, rng, beta0, 1));
                rmse_draws.push_back(resampled_metric(betas, rng, beta0, 2));
            }
            metrics.bias_ci = {quantile(bias_draws, 0.025), quantile(bias_draws, 0.975)};
            metrics.var_ci = {quantile(var_draws, 0.025), quantile(var_draws, 0.975)};
            metrics.rmse_ci = {quantile(rmse_draws, 0.025), quantile(rmse_draws, 0.975)};
        }
        report.per_method.push_back(std::move(metrics));
    }
    return report;
}

const MethodMetrics* MetricsReport::find(Method m) const {
    for (const auto& metrics : per_method) {
        if (metrics.method == m) return &metrics;
    }
    return nullptr;
}

AppendixReport appendix_a_check(double a, double b, double alpha_decay,
                                const std::vector<Index>& p_list) {
    if (!(alpha_decay > 0.5 && alpha_decay < 1.0)) {
        throw std::invalid_argument("appendix_a_check: alpha_decay must lie in (1/2, 1)");
    }
    if (p_list.empty()) throw std::invalid_argument("appendix_a_check: empty p list");

    AppendixReport report;
    for (Index p : p_list) {
        if (p < 2) throw std::invalid_argument("appendix_a_check: p must be >= 2");
        const double pd = static_cast<double>(p);
        const double tail_x = a * std::pow(pd, -alpha_decay);
        const double tail_y = b * std::pow(pd, -alpha_decay);
        const double tail_sum_x = static_cast<double>(p - 2) * tail_x * tail_x;
        const double tail_sum_y = static_cast<double>(p - 2) * tail_y * tail_y;
        AppendixRow row;
        row.p = p;
        row.ratio = 4.0 / ((2.0 + tail_sum_x) * (2.0 + tail_sum_y));
        row.tail_max =
            p > 2 ? std::max({tail_x * tail_x, tail_y * tail_y,
                              tail_x * tail_x * tail_y * tail_y})
                  : 0.0;
        report.rows.push_back(row);
    }

    report.ratio_increasing = true;
    report.tail_decreasing = true;
    for (std::size_t i = 1; i < report.rows.size(); ++i) {
        if (!(report.rows[i].ratio > report.rows[i - 1].ratio)) report.ratio_increasing = false;
        if (!(report.rows[i].tail_max < report.rows[i - 1].tail_max)) {
            report.tail_decreasing = false;
        }
    }
    return report;
}

}  // namespace covsem
