// Independent reference implementations used by the unit suites and the
// acceptance runner. Everything here is coded with plain loops against the
// written formulas, not through the library's code paths, so it can serve as
// an oracle for them.
#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "covsem/types.hpp"

namespace oracle {

using covsem::Index;
using covsem::Matrix;
using covsem::Vector;

// Empirical quantile, h = (n-1)q + 1 rule, written against sorted order.
inline double quantile_sorted(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    if (v.size() == 1) return v[0];
    const double h = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(h);
    const double frac = h - static_cast<double>(lo);
    if (lo + 1 >= v.size()) return v.back();
    return v[lo] * (1.0 - frac) + v[lo + 1] * frac;
}

// Model covariance blocks multiplied out elementwise.
inline Matrix sigma_xx_elementwise(const Vector& lambda, const Vector& theta) {
    const Index p = lambda.size();
    Matrix out(p, p);
    for (Index i = 0; i < p; ++i) {
        for (Index j = 0; j < p; ++j) {
            out(i, j) = lambda[i] * lambda[j] + (i == j ? theta[i] : 0.0);
        }
    }
    return out;
}

inline Matrix sigma_yy_elementwise(const Vector& lambda, const Vector& theta, double tau) {
    const Index p = lambda.size();
    Matrix out(p, p);
    for (Index i = 0; i < p; ++i) {
        for (Index j = 0; j < p; ++j) {
            out(i, j) = tau * lambda[i] * lambda[j] + (i == j ? theta[i] : 0.0);
        }
    }
    return out;
}

inline Matrix sigma_xy_elementwise(const Vector& lx, const Vector& ly, double beta) {
    Matrix out(lx.size(), ly.size());
    for (Index i = 0; i < lx.size(); ++i) {
        for (Index j = 0; j < ly.size(); ++j) out(i, j) = beta * lx[i] * ly[j];
    }
    return out;
}

// SRMR written directly from the definition.
inline double srmr_elementwise(const Matrix& s, const Matrix& sigma) {
    const Index p = s.rows();
    double total = 0.0;
    for (Index i = 0; i < p; ++i) {
        for (Index j = i; j < p; ++j) {
            const double r = (s(i, j) - sigma(i, j)) / std::sqrt(s(i, i) * s(j, j));
            total += r * r;
        }
    }
    const double pd = static_cast<double>(p);
    return std::sqrt(2.0 / (pd * (pd + 1.0)) * total);
}

// Block negative log-likelihood via explicit determinant and inverse.
inline double nll_block_detinv(const Matrix& sigma, const Matrix& s) {
    return std::log(sigma.determinant()) + (s * sigma.inverse()).trace();
}

// Frobenius residual of the rank-1 cross fit at a given beta.
inline double cross_residual(const Matrix& target, const Vector& lx, const Vector& ly,
                             double beta) {
    double total = 0.0;
    for (Index i = 0; i < target.rows(); ++i) {
        for (Index j = 0; j < target.cols(); ++j) {
            const double d = target(i, j) - beta * lx[i] * ly[j];
            total += d * d;
        }
    }
    return total;
}

inline double grid_argmin_beta(const Matrix& target, const Vector& lx, const Vector& ly,
                               double lo, double hi, Index points) {
    double best_beta = lo;
    double best = cross_residual(target, lx, ly, lo);
    for (Index k = 1; k < points; ++k) {
        const double beta =
            lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(points - 1);
        const double value = cross_residual(target, lx, ly, beta);
        if (value < best) {
            best = value;
            best_beta = beta;
        }
    }
    return best_beta;
}

// Centered cross-covariance with divisor n-1, elementwise.
inline Matrix cross_cov_elementwise(const Matrix& x, const Matrix& y) {
    const Index n = x.rows();
    Vector mx = Vector::Zero(x.cols());
    Vector my = Vector::Zero(y.cols());
    for (Index i = 0; i < n; ++i) {
        mx += x.row(i).transpose();
        my += y.row(i).transpose();
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    Matrix out = Matrix::Zero(x.cols(), y.cols());
    for (Index i = 0; i < n; ++i) {
        for (Index a = 0; a < x.cols(); ++a) {
            for (Index b = 0; b < y.cols(); ++b) {
                out(a, b) += (x(i, a) - mx[a]) * (y(i, b) - my[b]);
            }
        }
    }
    return out / static_cast<double>(n - 1);
}

// Split-half trace estimate written as an explicit double sum.
inline double ecdm_trace_elementwise(const Matrix& xa, const Matrix& ya, const Matrix& xb,
                                     const Matrix& yb) {
    const Matrix sa = cross_cov_elementwise(xa, ya);
    const Matrix sb = cross_cov_elementwise(xb, yb);
    double total = 0.0;
    for (Index i = 0; i < sa.rows(); ++i) {
        for (Index j = 0; j < sa.cols(); ++j) total += sa(i, j) * sb(i, j);
    }
    return total;
}

// W_n written as the literal double sum over cross pairs with pivot-excluded
// subset means and the unbiasing normalization 1/(u_n n1 n2).
inline double wn_double_sum(const Matrix& data) {
    const Index n = data.rows();
    const Index n1 = (n + 1) / 2;
    const Index n2 = n - n1;
    double total = 0.0;
    for (Index i = 0; i < n1; ++i) {
        Vector mean1 = Vector::Zero(data.cols());
        for (Index k = 0; k < n1; ++k) {
            if (k != i) mean1 += data.row(k).transpose();
        }
        mean1 /= static_cast<double>(n1 - 1);
        for (Index j = n1; j < n; ++j) {
            Vector mean2 = Vector::Zero(data.cols());
            for (Index k = n1; k < n; ++k) {
                if (k != j) mean2 += data.row(k).transpose();
            }
            mean2 /= static_cast<double>(n2 - 1);
            double dot = 0.0;
            for (Index c = 0; c < data.cols(); ++c) {
                dot += (data(i, c) - mean1[c]) * (data(j, c) - mean2[c]);
            }
            total += dot * dot;
        }
    }
    const double u_n = static_cast<double>(n1) * static_cast<double>(n2) /
                       (static_cast<double>(n1 - 1) * static_cast<double>(n2 - 1));
    return total / (u_n * static_cast<double>(n1) * static_cast<double>(n2));
}

// Minimal magnitude-sorted prefix reaching the energy target, by exhaustion
// over prefix lengths.
inline std::vector<std::pair<Index, Index>> minimal_prefix(const Matrix& m, double target) {
    std::vector<std::pair<Index, Index>> cells;
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) cells.emplace_back(i, j);
    }
    std::stable_sort(cells.begin(), cells.end(), [&m](const auto& a, const auto& b) {
        return std::abs(m(a.first, a.second)) > std::abs(m(b.first, b.second));
    });
    for (std::size_t len = 1; len <= cells.size(); ++len) {
        double energy = 0.0;
        for (std::size_t k = 0; k < len; ++k) {
            const double v = m(cells[k].first, cells[k].second);
            energy += v * v;
        }
        if (energy >= target) {
            return {cells.begin(), cells.begin() + static_cast<std::ptrdiff_t>(len)};
        }
    }
    return cells;
}

// Energy concentration of the dominant 2x2 block as an explicit double sum.
inline double concentration_double_sum(const Vector& lx, const Vector& ly, double beta0) {
    double head = 0.0;
    double total = 0.0;
    for (Index r = 0; r < lx.size(); ++r) {
        for (Index s = 0; s < ly.size(); ++s) {
            const double sigma2 = beta0 * beta0 * lx[r] * lx[r] * ly[s] * ly[s];
            total += sigma2;
            if (r < 2 && s < 2) head += sigma2;
        }
    }
    return head / total;
}

// Central finite-difference gradient of a scalar function.
template <typename Fn>
Vector finite_difference(Fn&& fn, const Vector& x, double step = 1e-5) {
    Vector grad(x.size());
    for (Index k = 0; k < x.size(); ++k) {
        Vector hi = x, lo = x;
        hi[k] += step;
        lo[k] -= step;
        grad[k] = (fn(hi) - fn(lo)) / (2.0 * step);
    }
    return grad;
}

}  // namespace oracle
