#pragma once

#include <vector>

namespace sfk::detail
{

struct LpSolution
{
    std::vector<double> x;
    double value = 0.0;
};

/// max c.x subject to A x <= b, x >= 0, with b >= 0 so that the origin is a
/// feasible basis. Dense tableau, Bland's rule. Throws InfeasibleLP when b
/// has a negative entry or the objective is unbounded.
LpSolution maximize(const std::vector<double>& c, const std::vector<std::vector<double>>& A,
                    const std::vector<double>& b);

} // namespace sfk::detail
