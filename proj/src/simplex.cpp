#include "simplex.hpp"

#include "sfk/error.hpp"

#include <cmath>
#include <limits>

namespace sfk::detail
{

LpSolution maximize(const std::vector<double>& c, const std::vector<std::vector<double>>& A,
                    const std::vector<double>& b)
{
    constexpr double eps = 1e-12;
    const std::size_t m = A.size();
    const std::size_t nv = c.size();
    if (b.size() != m)
        throw Error(ErrorCode::DimensionMismatch, "constraint rows and bounds differ in length");
    for (double v : b)
        if (v < 0.0)
            throw Error(ErrorCode::InfeasibleLP, "origin is not feasible");

    // Columns: structural variables, then one slack per row, then the bound.
    const std::size_t cols = nv + m + 1;
    std::vector<std::vector<double>> t(m + 1, std::vector<double>(cols, 0.0));
    std::vector<std::size_t> basis(m);
    for (std::size_t i = 0; i < m; ++i)
    {
        if (A[i].size() != nv)
            throw Error(ErrorCode::DimensionMismatch, "constraint row has wrong length");
        for (std::size_t j = 0; j < nv; ++j)
            t[i][j] = A[i][j];
        t[i][nv + i] = 1.0;
        t[i][cols - 1] = b[i];
        basis[i] = nv + i;
    }
    for (std::size_t j = 0; j < nv; ++j)
        t[m][j] = -c[j];

    for (;;)
    {
        std::size_t enter = cols;
        for (std::size_t j = 0; j + 1 < cols; ++j)
            if (t[m][j] < -eps)
            {
                enter = j;
                break;
            }
        if (enter == cols)
            break;

        std::size_t leave = m;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < m; ++i)
        {
            if (t[i][enter] <= eps)
                continue;
            const double ratio = t[i][cols - 1] / t[i][enter];
            if (ratio < best - eps || (std::abs(ratio - best) <= eps && basis[i] < basis[leave]))
            {
                best = ratio;
                leave = i;
            }
        }
        if (leave == m)
            throw Error(ErrorCode::InfeasibleLP, "objective is unbounded");

        const double pivot = t[leave][enter];
        for (double& v : t[leave])
            v /= pivot;
        for (std::size_t i = 0; i <= m; ++i)
        {
            if (i == leave || t[i][enter] == 0.0)
                continue;
            const double factor = t[i][enter];
            for (std::size_t j = 0; j < cols; ++j)
                t[i][j] -= factor * t[leave][j];
        }
        basis[leave] = enter;
    }

    LpSolution out;
    out.x.assign(nv, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        if (basis[i] < nv)
            out.x[basis[i]] = t[i][cols - 1];
    out.value = t[m][cols - 1];
    return out;
}

} // namespace sfk::detail
