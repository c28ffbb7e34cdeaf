#pragma once

#include <functional>
#include <vector>

#include "covsem/types.hpp"

namespace covsem {

/// Objective callback: returns the value at x and, when grad is non-null,
/// writes the gradient. May return +infinity outside the numerical domain;
/// grad is only requested at points previously seen to be finite.
using Objective = std::function<double(const Vector& x, Vector* grad)>;

struct OptimOptions {
    int max_iterations = 500;
    double gradient_tol = 1e-6;  // max-norm
    bool record_values = false;
};

struct OptimResult {
    Vector x;
    double value = 0.0;
    double gradient_norm = 0.0;  // max-norm at exit
    int iterations = 0;
    bool converged = false;  // gradient tolerance met
    bool stalled = false;    // line search could make no further progress
    bool failed = false;     // objective non-finite at the starting point
    std::vector<double> values;  // accepted values per iteration, when recorded
};

/// Dense BFGS with backtracking (Armijo) line search. Accepted iterates never
/// increase the objective; non-finite trial values are rejected by the line
/// search, so the iterates stay inside the numerical domain.
OptimResult minimize_bfgs(const Objective& f, Vector x0, const OptimOptions& opts = {});

}  // namespace covsem
