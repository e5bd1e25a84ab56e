#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace bbmgap {

/// Thomas algorithm for a tridiagonal system. lower[0] and upper[n-1] are
/// ignored. The right-hand side is overwritten with the solution.
class TridiagonalSolver {
public:
    void solve(std::span<const double> lower, std::span<const double> diag, std::span<const double> upper,
               std::span<double> rhs);

private:
    std::vector<double> scratch_;
};

}  // namespace bbmgap
