#include "bbmgap/grid.hpp"

namespace bbmgap {

std::vector<double> derivative6(std::span<const double> f, double dx)
{
    const std::size_t n = f.size();
    std::vector<double> d(n, 0.0);
    if (n < 7) throw std::invalid_argument("derivative6 needs at least 7 samples");
    for (std::size_t i = 3; i + 3 < n; ++i)
        d[i] = (-f[i - 3] + 9.0 * f[i - 2] - 45.0 * f[i - 1] + 45.0 * f[i + 1] - 9.0 * f[i + 2] + f[i + 3]) /
               (60.0 * dx);
    for (std::size_t i : {std::size_t{1}, std::size_t{2}, n - 3, n - 2})
        d[i] = (f[i + 1] - f[i - 1]) / (2.0 * dx);
    d[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * dx);
    d[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * dx);
    return d;
}

}  // namespace bbmgap
