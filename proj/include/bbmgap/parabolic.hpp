#pragma once

#include <span>
#include <vector>

#include "bbmgap/grid.hpp"
#include "bbmgap/tridiag.hpp"

namespace bbmgap {

/// theta-scheme for u_t = u_xx + b u_x - c(x) u + s(x) on a uniform grid
/// with Dirichlet values at both ends (theta = 1/2 Crank-Nicolson,
/// theta = 1 backward Euler). Coefficients are frozen over the step; callers
/// pass midpoint values for second order.
///
/// With fit_rate = mu > 0 the diffusion and advection stencils are rescaled
/// by mu^2 dx^2 / (2 cosh(mu dx) - 2) and mu dx / sinh(mu dx), which makes the
/// discrete operator exact on e^{-mu x}. Pulled fronts take their speed from
/// that mode, and the plain centered stencil slows them by O(dx^2).
class ParabolicStepper {
public:
    explicit ParabolicStepper(Grid1D grid, double fit_rate = 0.0);

    const Grid1D& grid() const { return grid_; }

    void step(std::span<double> u, double dt, double theta, double drift, std::span<const double> absorption,
              std::span<const double> source, double left_value, double right_value);

private:
    Grid1D grid_;
    double diffusion_scale_ = 1.0;
    double advection_scale_ = 1.0;
    std::vector<double> lower_, diag_, upper_, rhs_;
    TridiagonalSolver solver_;
};

/// Step sizes (dt, theta) of a Crank-Nicolson run whose first `rannacher`
/// steps are each replaced by two backward Euler half steps.
struct TimeStepPlan {
    double dt = 0.01;
    int rannacher = 2;

    int substeps(long step) const { return step < rannacher ? 2 : 1; }
    double theta(long step) const { return step < rannacher ? 1.0 : 0.5; }
};

}  // namespace bbmgap
