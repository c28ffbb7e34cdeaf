#pragma once

#include <vector>

namespace covsem {

/// Empirical quantile with linear interpolation between order statistics
/// (the h = (n-1)q + 1 rule): q=0 is the minimum, q=1 the maximum.
/// Copies and sorts its input.
double quantile(std::vector<double> values, double q);

double mean(const std::vector<double>& values);

/// Population-form variance (divisor n), the form used by the simulation
/// metrics so that RMSE^2 = Bias^2 + Var holds exactly.
double variance_population(const std::vector<double>& values);

/// Sample standard deviation (divisor n-1).
double sample_sd(const std::vector<double>& values);

/// Q3 - Q1 under the same interpolation rule as quantile().
double interquartile_range(std::vector<double> values);

}  // namespace covsem
