#include "covsem/cross_est.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "covsem/rng.hpp"
#include "covsem/stats.hpp"

namespace covsem {

namespace {

constexpr double kDeltaFloor = 1e-12;
constexpr std::uint64_t kTagSplits = 4;
constexpr std::uint64_t kTagXiBoot = 5;

Matrix centered_cross(const Matrix& x, const Matrix& y) {
    const Matrix xc = x.rowwise() - x.colwise().mean();
    const Matrix yc = y.rowwise() - y.colwise().mean();
    return (xc.transpose() * yc) / static_cast<double>(x.rows() - 1);
}

}  // namespace

Matrix sample_cross_cov(const DataBlocks& data) {
    if (data.n() < 2) {
        throw std::invalid_argument("sample_cross_cov: need at least 2 observations");
    }
    return centered_cross(data.x, data.y);
}

double ecdm_split_trace(const DataBlocks& data, const std::vector<Index>& rows_a,
                        const std::vector<Index>& rows_b) {
    if (rows_a.size() < 2 || rows_b.size() < 2) {
        throw std::invalid_argument("ecdm_split_trace: each half needs at least 2 rows");
    }
    const DataBlocks half_a = data.rows(rows_a);
    const DataBlocks half_b = data.rows(rows_b);
    const Matrix s_a = centered_cross(half_a.x, half_a.y);
    const Matrix s_b = centered_cross(half_b.x, half_b.y);
    return s_a.cwiseProduct(s_b).sum();  // tr(S_a S_b') as a Frobenius inner product
}

DeltaEstimate estimate_delta_xy(const DataBlocks& data, int n_splits, std::uint64_t seed) {
    const Index n = data.n();
    if (n < 4) throw std::invalid_argument("estimate_delta_xy: need n >= 4");
    if (n_splits < 1) throw std::invalid_argument("estimate_delta_xy: n_splits must be >= 1");

    const Index n_a = (n + 1) / 2;
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});

    double total = 0.0;
    for (int split = 0; split < n_splits; ++split) {
        auto rng = make_stream(seed, {kTagSplits, static_cast<std::uint64_t>(split)});
        std::vector<Index> shuffled = order;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        const std::vector<Index> rows_a(shuffled.begin(), shuffled.begin() + n_a);
        const std::vector<Index> rows_b(shuffled.begin() + n_a, shuffled.end());
        total += ecdm_split_trace(data, rows_a, rows_b);
    }
    const double raw = total / static_cast<double>(n_splits);

    DeltaEstimate est;
    est.floored = raw < kDeltaFloor;
    if (est.floored) {
        // A nonpositive estimate carries no scale; fall back to the energy of
        // the largest sample cross-covariance entry, which is the minimum the
        // sparsifier retains anyway. Keeps every downstream ratio finite and
        // commensurable.
        const double top = sample_cross_cov(data).cwiseAbs().maxCoeff();
        est.value = std::max(top * top, kDeltaFloor);
    } else {
        est.value = raw;
    }
    return est;
}

SparseCross sparsify_energy(const Matrix& s_xy, double delta_hat) {
    if (delta_hat < 0.0) {
        throw std::invalid_argument("sparsify_energy: delta_hat must be >= 0");
    }
    const Index p1 = s_xy.rows();
    const Index p2 = s_xy.cols();

    std::vector<std::pair<Index, Index>> cells;
    cells.reserve(static_cast<std::size_t>(p1 * p2));
    for (Index i = 0; i < p1; ++i) {
        for (Index j = 0; j < p2; ++j) cells.emplace_back(i, j);
    }
    // |value| descending; ties resolved row-major.
    std::stable_sort(cells.begin(), cells.end(),
                     [&s_xy](const auto& a, const auto& b) {
                         return std::abs(s_xy(a.first, a.second)) >
                                std::abs(s_xy(b.first, b.second));
                     });

    SparseCross result;
    result.matrix = Matrix::Zero(p1, p2);
    result.delta_hat = delta_hat;

    double cumulative = 0.0;
    std::size_t kept = 0;
    // Shortest prefix reaching delta_hat, with a one-entry minimum.
    while (kept < cells.size() && (kept == 0 || cumulative < delta_hat)) {
        const auto [i, j] = cells[kept];
        const double v = s_xy(i, j);
        cumulative += v * v;
        result.matrix(i, j) = v;
        result.support.emplace_back(i, j);
        ++kept;
    }
    if (cumulative < delta_hat) {
        result.saturated = true;  // everything retained, target not reached
    }
    result.energy_retained = cumulative;
    return result;
}

double w_n_trace(const Matrix& block_data) {
    const Index n = block_data.rows();
    if (n < 4) throw std::invalid_argument("w_n_trace: need n >= 4");

    const Index n1 = (n + 1) / 2;
    const Index n2 = n - n1;
    const auto s1 = block_data.topRows(n1);
    const auto s2 = block_data.bottomRows(n2);

    // Rows centered on the own-subset mean excluding the pivot observation.
    const Vector sum1 = s1.colwise().sum();
    const Vector sum2 = s2.colwise().sum();
    Matrix a(n1, block_data.cols());
    for (Index i = 0; i < n1; ++i) {
        a.row(i) = s1.row(i) -
                   (sum1.transpose() - s1.row(i)) / static_cast<double>(n1 - 1);
    }
    Matrix b(n2, block_data.cols());
    for (Index j = 0; j < n2; ++j) {
        b.row(j) = s2.row(j) -
                   (sum2.transpose() - s2.row(j)) / static_cast<double>(n2 - 1);
    }

    // sum_{i,j} (a_i' b_j)^2 = sum_i a_i' (B'B) a_i with B'B = sum_j b_j b_j'.
    const Matrix btb = b.transpose() * b;
    double total = 0.0;
    for (Index i = 0; i < n1; ++i) {
        total += a.row(i) * btb * a.row(i).transpose();
    }
    const double u_n = static_cast<double>(n1) * static_cast<double>(n2) /
                       (static_cast<double>(n1 - 1) * static_cast<double>(n2 - 1));
    return total / (u_n * static_cast<double>(n1) * static_cast<double>(n2));
}

double rate_r_np(Index n, Index p, double w1, double w2, double delta_hat) {
    if (n < 1) throw std::invalid_argument("rate_r_np: n must be >= 1");
    if (p < 2) throw std::invalid_argument("rate_r_np: p must be >= 2");
    if (w1 < 0.0 || w2 < 0.0) throw std::invalid_argument("rate_r_np: W estimates must be >= 0");
    if (!(delta_hat > 0.0)) {
        throw std::invalid_argument("rate_r_np: delta_hat must be > 0 (floor it first)");
    }
    const double nd = static_cast<double>(n);
    return std::log(static_cast<double>(p)) / nd +
           std::pow(w1, 0.25) * std::pow(w2, 0.25) / std::sqrt(nd * delta_hat);
}

XiCalibration calibrate_xi_n(const DataBlocks& data, const SparseCross& base, int B,
                             double alpha, double c_max, std::uint64_t seed, int n_splits) {
    if (B < 2) throw std::invalid_argument("calibrate_xi_n: B must be >= 2");
    if (!(c_max > 0.0)) throw std::invalid_argument("calibrate_xi_n: c_max must be > 0");
    if (!(base.delta_hat > 0.0)) {
        throw std::invalid_argument("calibrate_xi_n: base delta_hat must be > 0");
    }

    const Index n = data.n();
    XiCalibration cal;
    cal.t_values.reserve(static_cast<std::size_t>(B));
    bool all_floored = true;

    for (int b = 0; b < B; ++b) {
        auto rng = make_stream(seed, {kTagXiBoot, static_cast<std::uint64_t>(b)});
        const DataBlocks resampled = data.rows(bootstrap_indices(rng, n));
        const Matrix s_xy_b = sample_cross_cov(resampled);
        const DeltaEstimate delta_b = estimate_delta_xy(
            resampled, n_splits, derive_seed(seed, {kTagXiBoot, static_cast<std::uint64_t>(b), 1}));
        all_floored = all_floored && delta_b.floored;
        const SparseCross sparse_b = sparsify_energy(s_xy_b, delta_b.value);
        cal.t_values.push_back((sparse_b.matrix - base.matrix).squaredNorm() / delta_b.value);
    }

    ToleranceParams& tol = cal.params;
    tol.alpha = alpha;
    tol.c_max = c_max;
    tol.w1 = w_n_trace(data.x);
    tol.w2 = w_n_trace(data.y);
    tol.r_np = rate_r_np(n, data.p1() + data.p2(), tol.w1, tol.w2, base.delta_hat);
    tol.q_upper = quantile(cal.t_values, 1.0 - alpha);
    tol.c_hat = tol.q_upper / tol.r_np;
    tol.c_trunc = std::min(tol.c_hat, c_max);
    tol.xi_n = tol.c_trunc * tol.r_np;
    tol.all_bootstrap_deltas_floored = all_floored;
    return cal;
}

}  // namespace covsem
