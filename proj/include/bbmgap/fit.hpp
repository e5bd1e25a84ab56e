#pragma once

#include <span>
#include <vector>

namespace bbmgap {

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    double slope_stderr = 0.0;
    double intercept_stderr = 0.0;
    double rms_residual = 0.0;
    double max_abs_residual = 0.0;
};

/// Least squares y ~ intercept + slope * x. Weights, when non-empty, scale the
/// squared residuals.
LinearFit fit_line(std::span<const double> x, std::span<const double> y, std::span<const double> w = {});

struct ModelFit {
    std::vector<double> coef;
    std::vector<double> stderr_;
    double r_squared = 0.0;
    double max_abs_residual = 0.0;
};

/// Least squares y ~ sum_j coef[j] * columns[j][i] (include a column of ones
/// for an intercept).
ModelFit fit_linear_model(const std::vector<std::vector<double>>& columns, std::span<const double> y);

}  // namespace bbmgap

namespace bbmgap {

/// Fit of y(t) ~ c0 + c1 t^{-1/2} + c2 / t over the samples with t >= t_lo;
/// c0 is the t -> infinity limit.
ModelFit fit_inverse_sqrt_tail(std::span<const double> t, std::span<const double> y, double t_lo);

}  // namespace bbmgap
