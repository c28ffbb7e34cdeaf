#include "covsem/self_mle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "covsem/rng.hpp"
#include "covsem/stats.hpp"

namespace covsem {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPoolTieSlack = 1e-12;
// Heywood guard: boundary estimates of a variance stop here instead of 0.
constexpr double kVarianceFloor = 1e-10;

// Stream tags so every randomized stage draws from its own substream.
constexpr std::uint64_t kTagMultiStart = 1;
constexpr std::uint64_t kTagEpsBoot = 2;
constexpr std::uint64_t kTagEnrich = 3;

// log|Sigma| + tr(S Sigma^-1) for one block; fills G = Sigma^-1 - Sigma^-1 S Sigma^-1
// when requested. Returns +inf if Sigma is numerically singular.
double block_nll(const Matrix& sigma, const Matrix& s, Matrix* g) {
    Eigen::LLT<Matrix> llt(sigma);
    if (llt.info() != Eigen::Success) return kInf;

    double logdet = 0.0;
    const auto& l = llt.matrixLLT();
    for (Index i = 0; i < sigma.rows(); ++i) {
        const double d = l(i, i);
        if (!(d > 0.0) || !std::isfinite(d)) return kInf;
        logdet += std::log(d);
    }
    logdet *= 2.0;

    const Matrix sigma_inv_s = llt.solve(s);  // Sigma^-1 S
    const double value = logdet + sigma_inv_s.trace();
    if (!std::isfinite(value)) return kInf;

    if (g) {
        const Matrix sigma_inv = llt.solve(Matrix::Identity(sigma.rows(), sigma.cols()));
        *g = sigma_inv - sigma_inv_s * sigma_inv;
        *g = ((*g + g->transpose()) / 2.0).eval();
    }
    return value;
}

bool block_is_pd(const Matrix& s) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(s, Eigen::EigenvaluesOnly);
    return es.info() == Eigen::Success && es.eigenvalues().minCoeff() > 0.0;
}

FactorParams random_start(const CovBlocks& s, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> loading(0.2, 1.5);
    std::uniform_real_distribution<double> tau_factor(0.5, 1.5);

    FactorParams start;
    start.lambda_x = Vector::Ones(s.p1());
    for (Index i = 1; i < s.p1(); ++i) start.lambda_x[i] = loading(rng);
    start.lambda_y = Vector::Ones(s.p2());
    for (Index i = 1; i < s.p2(); ++i) start.lambda_y[i] = loading(rng);
    start.theta_delta = (s.s_xx.diagonal() / 2.0).cwiseMax(1e-6);
    start.theta_eps = (s.s_yy.diagonal() / 2.0).cwiseMax(1e-6);

    Eigen::SelfAdjointEigenSolver<Matrix> es(s.s_yy, Eigen::EigenvaluesOnly);
    const double top = es.info() == Eigen::Success ? es.eigenvalues().maxCoeff() : 1.0;
    start.tau = std::max(top, 1e-3) * tau_factor(rng);
    return start;
}

bool usable(const OptimResult& r) {
    // A stall is a numerical stationary point; only clearly unfinished or
    // non-finite runs are dropped.
    if (r.failed) return false;
    if (r.converged || r.stalled) return true;
    return r.gradient_norm <= 1e-2;
}

}  // namespace

double neg_loglik_self(const FactorParams& theta, const CovBlocks& s) {
    theta.validate();
    if (theta.p1() != s.p1() || theta.p2() != s.p2()) {
        throw std::invalid_argument("neg_loglik_self: dimension mismatch");
    }
    Matrix sigma_xx = theta.lambda_x * theta.lambda_x.transpose();
    sigma_xx += theta.theta_delta.asDiagonal();
    Matrix sigma_yy = theta.tau * (theta.lambda_y * theta.lambda_y.transpose());
    sigma_yy += theta.theta_eps.asDiagonal();

    const double lx = block_nll(sigma_xx, s.s_xx, nullptr);
    const double ly = block_nll(sigma_yy, s.s_yy, nullptr);
    const double value = lx + ly;
    if (!std::isfinite(value)) {
        throw std::runtime_error("neg_loglik_self: Sigma block factorization failed");
    }
    return value;
}

Vector SelfParamPacking::pack(const FactorParams& theta) const {
    Vector v(dim());
    Index k = 0;
    for (Index i = 1; i < p1; ++i) v[k++] = theta.lambda_x[i];
    for (Index i = 0; i < p1; ++i) v[k++] = std::log(theta.theta_delta[i]);
    for (Index i = 1; i < p2; ++i) v[k++] = theta.lambda_y[i];
    for (Index i = 0; i < p2; ++i) v[k++] = std::log(theta.theta_eps[i]);
    v[k] = std::log(theta.tau);
    return v;
}

FactorParams SelfParamPacking::unpack(const Vector& v) const {
    FactorParams theta;
    theta.lambda_x = Vector::Ones(p1);
    theta.theta_delta = Vector(p1);
    theta.lambda_y = Vector::Ones(p2);
    theta.theta_eps = Vector(p2);
    Index k = 0;
    for (Index i = 1; i < p1; ++i) theta.lambda_x[i] = v[k++];
    for (Index i = 0; i < p1; ++i) {
        theta.theta_delta[i] = std::max(std::exp(v[k++]), kVarianceFloor);
    }
    for (Index i = 1; i < p2; ++i) theta.lambda_y[i] = v[k++];
    for (Index i = 0; i < p2; ++i) {
        theta.theta_eps[i] = std::max(std::exp(v[k++]), kVarianceFloor);
    }
    theta.tau = std::max(std::exp(v[k]), kVarianceFloor);
    return theta;
}

SelfObjective::SelfObjective(CovBlocks s) : s_(std::move(s)) {
    packing_.p1 = s_.p1();
    packing_.p2 = s_.p2();
}

double SelfObjective::operator()(const Vector& packed, Vector* grad) const {
    const Index p1 = packing_.p1;
    const Index p2 = packing_.p2;
    const FactorParams theta = packing_.unpack(packed);
    if (!(theta.tau > 0.0) || !theta.theta_delta.allFinite() || !theta.theta_eps.allFinite() ||
        !theta.lambda_x.allFinite() || !theta.lambda_y.allFinite() || !std::isfinite(theta.tau)) {
        return kInf;
    }

    Matrix sigma_xx = theta.lambda_x * theta.lambda_x.transpose();
    sigma_xx += theta.theta_delta.asDiagonal();
    Matrix sigma_yy = theta.tau * (theta.lambda_y * theta.lambda_y.transpose());
    sigma_yy += theta.theta_eps.asDiagonal();

    Matrix gx, gy;
    const double lx = block_nll(sigma_xx, s_.s_xx, grad ? &gx : nullptr);
    if (!std::isfinite(lx)) return kInf;
    const double ly = block_nll(sigma_yy, s_.s_yy, grad ? &gy : nullptr);
    if (!std::isfinite(ly)) return kInf;

    if (grad) {
        grad->resize(packing_.dim());
        Index k = 0;
        const Vector gx_lambda = 2.0 * (gx * theta.lambda_x);
        for (Index i = 1; i < p1; ++i) (*grad)[k++] = gx_lambda[i];
        for (Index i = 0; i < p1; ++i) (*grad)[k++] = gx(i, i) * theta.theta_delta[i];
        const Vector gy_lambda = 2.0 * theta.tau * (gy * theta.lambda_y);
        for (Index i = 1; i < p2; ++i) (*grad)[k++] = gy_lambda[i];
        for (Index i = 0; i < p2; ++i) (*grad)[k++] = gy(i, i) * theta.theta_eps[i];
        (*grad)[k] = theta.tau * theta.lambda_y.dot(gy * theta.lambda_y);
    }
    return lx + ly;
}

std::vector<Candidate> fit_self_mle(const CovBlocks& s, int n_init, std::uint64_t seed) {
    if (n_init < 1) throw std::invalid_argument("fit_self_mle: n_init must be >= 1");
    if (s.n <= s.p1()) throw std::invalid_argument("fit_self_mle: requires n > p1");
    if (s.n <= s.p2()) throw std::invalid_argument("fit_self_mle: requires n > p2");
    if (!block_is_pd(s.s_xx)) {
        throw std::invalid_argument("fit_self_mle: S_xx is not positive definite");
    }
    if (!block_is_pd(s.s_yy)) {
        throw std::invalid_argument("fit_self_mle: S_yy is not positive definite");
    }

    const SelfObjective objective(s);
    std::vector<Candidate> candidates;
    candidates.reserve(static_cast<std::size_t>(n_init));
    for (int k = 0; k < n_init; ++k) {
        auto rng = make_stream(seed, {kTagMultiStart, static_cast<std::uint64_t>(k)});
        const Vector x0 = objective.packing().pack(random_start(s, rng));
        const OptimResult run = minimize_bfgs([&objective](const Vector& x, Vector* g) {
            return objective(x, g);
        }, x0);
        if (!usable(run)) continue;
        candidates.push_back({objective.packing().unpack(run.x), run.value});
    }
    if (candidates.empty()) {
        throw std::runtime_error("fit_self_mle: no start converged");
    }
    std::sort(candidates.begin(), candidates.end(),
              [](const Candidate& a, const Candidate& b) { return a.ell_self < b.ell_self; });
    return candidates;
}

EpsCalibration calibrate_eps_n(const DataBlocks& data, const FactorParams& theta_hat, int B,
                               double alpha, std::uint64_t seed) {
    if (B < 2) throw std::invalid_argument("calibrate_eps_n: B must be >= 2");
    if (!(alpha > 0.0 && alpha < 1.0) && alpha != 0.0) {
        throw std::invalid_argument("calibrate_eps_n: alpha must lie in [0, 1)");
    }
    theta_hat.validate();

    const Index n = data.n();
    EpsCalibration cal;
    cal.deltas.reserve(static_cast<std::size_t>(B));
    int attempts = 0;

    for (int b = 0; b < B; ++b) {
        for (std::uint64_t try_idx = 0;; ++try_idx) {
            if (++attempts > 10 * B) {
                throw std::runtime_error(
                    "calibrate_eps_n: bootstrap replicates kept failing (10*B attempts)");
            }
            auto rng = make_stream(seed, {kTagEpsBoot, static_cast<std::uint64_t>(b), try_idx});
            const DataBlocks resampled = data.rows(bootstrap_indices(rng, n));
            const CovBlocks s_b = CovBlocks::from_data(resampled);
            if (!s_b.s_xx.allFinite() || !s_b.s_yy.allFinite()) {
                ++cal.redraws;
                continue;
            }

            const SelfObjective objective(s_b);
            auto fn = [&objective](const Vector& x, Vector* g) { return objective(x, g); };
            const Vector warm = objective.packing().pack(theta_hat);
            const double ell_at_hat = objective(warm, nullptr);
            if (!std::isfinite(ell_at_hat)) {
                ++cal.redraws;
                continue;
            }

            // Warm start from theta_hat guarantees delta_b >= 0 by descent.
            double best = minimize_bfgs(fn, warm).value;
            for (std::uint64_t r = 0; r < 2; ++r) {
                auto restart_rng = make_stream(
                    seed, {kTagEpsBoot, static_cast<std::uint64_t>(b), try_idx, 10 + r});
                const OptimResult run =
                    minimize_bfgs(fn, objective.packing().pack(random_start(s_b, restart_rng)));
                if (!run.failed && run.value < best) best = run.value;
            }
            if (!std::isfinite(best)) {
                ++cal.redraws;
                continue;
            }
            cal.deltas.push_back(ell_at_hat - best);
            break;
        }
    }
    cal.eps_n = quantile(cal.deltas, 1.0 - alpha);
    return cal;
}

FeasiblePool build_feasible_pool(std::vector<Candidate> candidates, double eps_n, double alpha) {
    if (candidates.empty()) {
        throw std::invalid_argument("build_feasible_pool: no candidates");
    }
    double ell_hat = kInf;
    for (const auto& c : candidates) ell_hat = std::min(ell_hat, c.ell_self);

    FeasiblePool pool;
    pool.ell_hat = ell_hat;
    pool.eps_n = eps_n;
    pool.alpha = alpha;
    for (auto& c : candidates) {
        if (c.ell_self <= ell_hat + eps_n + kPoolTieSlack) {
            pool.candidates.push_back(std::move(c));
        }
    }
    std::sort(pool.candidates.begin(), pool.candidates.end(),
              [](const Candidate& a, const Candidate& b) { return a.ell_self < b.ell_self; });
    return pool;
}

FeasiblePool enrich_pool(const FeasiblePool& pool, const CovBlocks& s, int per_candidate,
                         double rel_scale, std::uint64_t seed) {
    if (pool.candidates.empty()) {
        throw std::invalid_argument("enrich_pool: empty pool");
    }
    if (per_candidate <= 0) return pool;

    const SelfObjective objective(s);
    std::normal_distribution<double> normal(0.0, 1.0);

    std::vector<Candidate> all = pool.candidates;
    const std::size_t base = all.size();
    for (std::size_t i = 0; i < base; ++i) {
        const Vector center = objective.packing().pack(all[i].theta);
        for (int j = 0; j < per_candidate; ++j) {
            auto rng = make_stream(
                seed, {kTagEnrich, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(j)});
            Vector perturbed = center;
            for (Index k = 0; k < perturbed.size(); ++k) {
                perturbed[k] += rel_scale * std::abs(center[k]) * normal(rng);
            }
            const double ell = objective(perturbed, nullptr);
            if (std::isfinite(ell) && ell <= pool.ell_hat + pool.eps_n + kPoolTieSlack) {
                all.push_back({objective.packing().unpack(perturbed), ell});
            }
        }
    }
    // A perturbation may (rarely) undercut the optimum; re-threshold so the
    // pool invariants hold against the updated minimum.
    return build_feasible_pool(std::move(all), pool.eps_n, pool.alpha);
}

}  // namespace covsem
