#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace bbmgap {

/// Uniform 1D grid; x_max is derived so that x_max - x_min = (n-1) dx exactly.
struct Grid1D {
    double x_min = 0.0;
    double dx = 0.0;
    std::size_t n = 0;

    double x(std::size_t i) const { return x_min + static_cast<double>(i) * dx; }
    double x_max() const { return x(n - 1); }

    /// Index of the node nearest to xv, clamped to the grid.
    std::size_t nearest(double xv) const
    {
        const double r = std::round((xv - x_min) / dx);
        if (r <= 0) return 0;
        if (r >= static_cast<double>(n - 1)) return n - 1;
        return static_cast<std::size_t>(r);
    }

    bool covers(double lo, double hi) const { return lo >= x_min - 1e-12 && hi <= x_max() + 1e-12; }

    bool same_as(const Grid1D& o) const
    {
        return n == o.n && std::abs(dx - o.dx) <= 1e-14 * dx && std::abs(x_min - o.x_min) <= 1e-9 * dx;
    }

    std::vector<double> nodes() const
    {
        std::vector<double> v(n);
        for (std::size_t i = 0; i < n; ++i) v[i] = x(i);
        return v;
    }
};

/// Grid from x_min with spacing dx reaching at least x_max.
inline Grid1D make_grid(double x_min, double x_max, double dx)
{
    if (!(dx > 0.0) || !(x_max > x_min)) throw std::invalid_argument("make_grid: need dx > 0 and x_max > x_min");
    const auto cells = static_cast<std::size_t>(std::ceil((x_max - x_min) / dx - 1e-9));
    return Grid1D{x_min, dx, cells + 1};
}

/// Trapezoidal quadrature of samples on a uniform grid.
inline double trapezoid(std::span<const double> f, double dx)
{
    if (f.size() < 2) return 0.0;
    double s = 0.5 * (f.front() + f.back());
    for (std::size_t i = 1; i + 1 < f.size(); ++i) s += f[i];
    return s * dx;
}

/// Trapezoidal quadrature of the product f*g.
inline double trapezoid_product(std::span<const double> f, std::span<const double> g, double dx)
{
    const std::size_t n = f.size();
    if (n < 2) return 0.0;
    double s = 0.5 * (f[0] * g[0] + f[n - 1] * g[n - 1]);
    for (std::size_t i = 1; i + 1 < n; ++i) s += f[i] * g[i];
    return s * dx;
}

/// Sixth-order centered first derivative of sampled data; the three nodes at
/// each end fall back to lower order one-sided/centered stencils.
std::vector<double> derivative6(std::span<const double> f, double dx);

}  // namespace bbmgap
