#include "bbmgap/tridiag.hpp"

#include <stdexcept>

namespace bbmgap {

void TridiagonalSolver::solve(std::span<const double> lower, std::span<const double> diag,
                              std::span<const double> upper, std::span<double> rhs)
{
    const std::size_t n = diag.size();
    if (lower.size() != n || upper.size() != n || rhs.size() != n)
        throw std::invalid_argument("tridiagonal solve: size mismatch");
    if (n == 0) return;
    scratch_.resize(n);
    double beta = diag[0];
    rhs[0] /= beta;
    for (std::size_t i = 1; i < n; ++i) {
        scratch_[i] = upper[i - 1] / beta;
        beta = diag[i] - lower[i] * scratch_[i];
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / beta;
    }
    for (std::size_t i = n - 1; i-- > 0;) rhs[i] -= scratch_[i + 1] * rhs[i + 1];
}

}  // namespace bbmgap
