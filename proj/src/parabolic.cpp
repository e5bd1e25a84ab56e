#include "bbmgap/parabolic.hpp"

#include <cmath>
#include <stdexcept>

namespace bbmgap {

ParabolicStepper::ParabolicStepper(Grid1D grid, double fit_rate) : grid_(grid)
{
    if (grid_.n < 3) throw std::invalid_argument("parabolic stepper needs at least three nodes");
    if (fit_rate < 0.0) throw std::invalid_argument("parabolic stepper fit rate must be nonnegative");
    const double z = fit_rate * grid_.dx;
    if (z > 1e-4) {
        diffusion_scale_ = z * z / (2.0 * std::cosh(z) - 2.0);
        advection_scale_ = z / std::sinh(z);
    }
    const std::size_t m = grid_.n - 2;
    lower_.resize(m);
    diag_.resize(m);
    upper_.resize(m);
    rhs_.resize(m);
}

void ParabolicStepper::step(std::span<double> u, double dt, double theta, double drift,
                            std::span<const double> absorption, std::span<const double> source, double left_value,
                            double right_value)
{
    const std::size_t n = grid_.n;
    if (u.size() != n || (!absorption.empty() && absorption.size() != n) || (!source.empty() && source.size() != n))
        throw std::invalid_argument("parabolic step: field size does not match grid");
    const double idx2 = diffusion_scale_ / (grid_.dx * grid_.dx);
    const double adv = advection_scale_ * drift / (2.0 * grid_.dx);
    const double lo = idx2 - adv, up = idx2 + adv;
    const double ex = (1.0 - theta) * dt, im = theta * dt;

    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double c = absorption.empty() ? 0.0 : absorption[i];
        const double di = -2.0 * idx2 - c;
        const std::size_t k = i - 1;
        lower_[k] = -im * lo;
        upper_[k] = -im * up;
        diag_[k] = 1.0 - im * di;
        double r = u[i];
        if (ex != 0.0) r += ex * (lo * u[i - 1] + di * u[i] + up * u[i + 1]);
        if (!source.empty()) r += dt * source[i];
        rhs_[k] = r;
    }
    rhs_.front() += im * lo * left_value;
    rhs_.back() += im * up * right_value;
    solver_.solve(lower_, diag_, upper_, rhs_);
    u[0] = left_value;
    u[n - 1] = right_value;
    for (std::size_t i = 1; i + 1 < n; ++i) u[i] = rhs_[i - 1];
}

}  // namespace bbmgap
