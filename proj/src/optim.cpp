#include "covsem/optim.hpp"

#include <cmath>
#include <limits>

namespace covsem {

namespace {
constexpr double kArmijoC1 = 1e-4;
constexpr double kCurvatureFloor = 1e-10;
constexpr int kMaxBacktracks = 60;
}  // namespace

OptimResult minimize_bfgs(const Objective& f, Vector x0, const OptimOptions& opts) {
    const Index dim = x0.size();
    OptimResult res;
    res.x = std::move(x0);

    Vector grad(dim);
    double fx = f(res.x, &grad);
    if (!std::isfinite(fx)) {
        res.failed = true;
        res.value = fx;
        return res;
    }
    res.value = fx;
    if (opts.record_values) res.values.push_back(fx);

    Matrix h_inv = Matrix::Identity(dim, dim);
    bool h_scaled = false;

    Vector x_new(dim), grad_new(dim), direction(dim);

    for (int iter = 0; iter < opts.max_iterations; ++iter) {
        res.gradient_norm = grad.lpNorm<Eigen::Infinity>();
        if (res.gradient_norm <= opts.gradient_tol) {
            res.converged = true;
            return res;
        }

        bool steepest = false;
        direction = -(h_inv * grad);
        double slope = grad.dot(direction);
        if (!(slope < 0.0) || !direction.allFinite()) {
            h_inv.setIdentity();
            h_scaled = false;
            direction = -grad;
            slope = -grad.squaredNorm();
            steepest = true;
        }

        // Backtracking Armijo search; the first (full) trial also evaluates
        // the gradient so an accepted full step needs no second call.
        bool accepted = false;
        bool have_new_grad = false;
        double step = 1.0;
        double f_new = std::numeric_limits<double>::infinity();
        for (;;) {
            for (int bt = 0; bt < kMaxBacktracks; ++bt) {
                x_new = res.x + step * direction;
                if (bt == 0) {
                    f_new = f(x_new, &grad_new);
                    have_new_grad = true;
                } else {
                    f_new = f(x_new, nullptr);
                    have_new_grad = false;
                }
                if (std::isfinite(f_new) && f_new <= fx + kArmijoC1 * step * slope) {
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if (accepted || steepest) break;
            // The quasi-Newton direction failed; fall back to steepest descent.
            h_inv.setIdentity();
            h_scaled = false;
            direction = -grad;
            slope = -grad.squaredNorm();
            steepest = true;
            step = 1.0;
        }
        if (!accepted) {
            res.stalled = true;
            return res;
        }
        if (!have_new_grad) {
            f(x_new, &grad_new);
        }

        const Vector s = x_new - res.x;
        const Vector y = grad_new - grad;
        const double sy = s.dot(y);
        if (sy > kCurvatureFloor * s.norm() * y.norm()) {
            if (!h_scaled) {
                h_inv = (sy / y.squaredNorm()) * Matrix::Identity(dim, dim);
                h_scaled = true;
            }
            const double rho = 1.0 / sy;
            const Vector hy = h_inv * y;
            const double yhy = y.dot(hy);
            h_inv.noalias() -= rho * (s * hy.transpose() + hy * s.transpose());
            h_inv.noalias() += (rho * rho * yhy + rho) * (s * s.transpose());
        }

        res.x = x_new;
        fx = f_new;
        grad = grad_new;
        res.value = fx;
        res.iterations = iter + 1;
        if (opts.record_values) res.values.push_back(fx);
    }

    res.gradient_norm = grad.lpNorm<Eigen::Infinity>();
    res.converged = res.gradient_norm <= opts.gradient_tol;
    return res;
}

}  // namespace covsem
