#pragma once

#include <functional>
#include <span>
#include <vector>

namespace mfbd::numerics {

double log_choose(int n, int k);
/// Rising factorial (x)_k = x (x + 1) ... (x + k - 1), (x)_0 = 1.
double pochhammer(double x, int k);

/// Adaptive Simpson quadrature on [a, b] to the given relative tolerance.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double rel_tol = 1e-8, int max_depth = 50);

struct GoldenResult {
  double x;
  double value;
};
/// Minimises a unimodal f on [a, b].
GoldenResult golden_section_min(const std::function<double(double)>& f, double a, double b,
                                double tol = 1e-10);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  /// Classical OLS standard error of the slope (0 for an exact fit).
  double slope_stderr = 0.0;
};
LinearFit ols(std::span<const double> x, std::span<const double> y);

/// Upper tail probability of the chi-square distribution.
double chi_square_sf(double statistic, double dof);

}  // namespace mfbd::numerics
