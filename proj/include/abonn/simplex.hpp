#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "abonn/error.hpp"
#include "abonn/network.hpp"

namespace abonn {

/// One row coeffs . x <= rhs.
struct LpRow {
    Vector coeffs;
    double rhs = 0.0;
};

/// minimize objective . x  s.t.  rows, var_lower <= x <= var_upper (all finite).
struct LinearProgram {
    Vector objective;
    std::vector<LpRow> constraints;
    Vector var_lower;
    Vector var_upper;
};

enum class LpStatus { optimal, infeasible };

struct LpResult {
    LpStatus status = LpStatus::infeasible;
    Vector x;
    double value = 0.0;
};

inline constexpr double lp_feasibility_tolerance = 1e-7;

namespace detail {

/// Dense tableau for two-phase primal simplex with Bland's rule.
class SimplexTableau {
public:
    SimplexTableau(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), t_((rows + 1) * (cols + 1), 0.0) {}

    double& at(std::size_t r, std::size_t c) { return t_[r * (cols_ + 1) + c]; }
    double at(std::size_t r, std::size_t c) const { return t_[r * (cols_ + 1) + c]; }
    double& rhs(std::size_t r) { return at(r, cols_); }
    double& cost(std::size_t c) { return at(rows_, c); }
    double& neg_value() { return at(rows_, cols_); }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    void pivot(std::size_t pr, std::size_t pc) {
        const double p = at(pr, pc);
        for (std::size_t c = 0; c <= cols_; ++c) at(pr, c) /= p;
        for (std::size_t r = 0; r <= rows_; ++r) {
            if (r == pr) continue;
            const double f = at(r, pc);
            if (f == 0.0) continue;
            for (std::size_t c = 0; c <= cols_; ++c) at(r, c) -= f * at(pr, c);
            at(r, pc) = 0.0;
        }
    }

private:
    std::size_t rows_, cols_;
    std::vector<double> t_;
};

inline constexpr double pivot_eps = 1e-9;

/// Minimizes the cost row in place. Columns at or beyond `col_limit` never enter.
inline void run_simplex(SimplexTableau& t, std::vector<std::size_t>& basis, std::size_t col_limit) {
    const std::size_t max_iter = 50000;
    for (std::size_t iter = 0; iter < max_iter; ++iter) {
        std::size_t enter = col_limit;
        for (std::size_t c = 0; c < col_limit; ++c)
            if (t.cost(c) < -pivot_eps) {
                enter = c;
                break;
            }
        if (enter == col_limit) return;
        std::size_t leave = t.rows();
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t r = 0; r < t.rows(); ++r) {
            const double a = t.at(r, enter);
            if (a <= pivot_eps) continue;
            const double ratio = t.rhs(r) / a;
            if (ratio < best - 1e-12) {
                best = ratio;
                leave = r;
            } else if (ratio <= best + 1e-12 && basis[r] < basis[leave]) {
                leave = r;
            }
        }
        if (leave == t.rows()) throw SolverFailure("simplex: unbounded direction in a box-bounded program");
        t.pivot(leave, enter);
        basis[leave] = enter;
    }
    throw SolverFailure("simplex: iteration limit reached");
}

}  // namespace detail

/// Global minimizer of a box-bounded LP, or infeasible. Deterministic.
inline LpResult solve(const LinearProgram& lp) {
    const std::size_t n = lp.objective.size();
    detail::require_dim(lp.var_lower.size() == n && lp.var_upper.size() == n, "LP bound vectors differ in length");
    for (const auto& row : lp.constraints) detail::require_dim(row.coeffs.size() == n, "LP row length differs");
    for (std::size_t j = 0; j < n; ++j) {
        detail::require(std::isfinite(lp.var_lower[j]) && std::isfinite(lp.var_upper[j]), "LP bounds must be finite");
        if (lp.var_lower[j] > lp.var_upper[j]) return {};
    }

    // Shift to x' = x - lower >= 0; box upper bounds become ordinary rows.
    const std::size_t m = lp.constraints.size() + n;
    std::vector<Vector> a(m, Vector(n, 0.0));
    Vector b(m);
    for (std::size_t i = 0; i < lp.constraints.size(); ++i) {
        const auto& row = lp.constraints[i];
        double shifted = row.rhs;
        for (std::size_t j = 0; j < n; ++j) shifted -= row.coeffs[j] * lp.var_lower[j];
        a[i] = row.coeffs;
        b[i] = shifted;
    }
    for (std::size_t j = 0; j < n; ++j) {
        a[lp.constraints.size() + j][j] = 1.0;
        b[lp.constraints.size() + j] = lp.var_upper[j] - lp.var_lower[j];
    }

    std::size_t artificials = 0;
    for (double v : b)
        if (v < 0.0) ++artificials;
    const std::size_t real_cols = n + m;
    detail::SimplexTableau t(m, real_cols + artificials);
    std::vector<std::size_t> basis(m);
    std::size_t next_art = real_cols;
    for (std::size_t i = 0; i < m; ++i) {
        const double sign = b[i] < 0.0 ? -1.0 : 1.0;
        for (std::size_t j = 0; j < n; ++j) t.at(i, j) = sign * a[i][j];
        t.at(i, n + i) = sign;
        t.rhs(i) = sign * b[i];
        if (sign < 0.0) {
            t.at(i, next_art) = 1.0;
            basis[i] = next_art++;
        } else {
            basis[i] = n + i;
        }
    }

    if (artificials > 0) {
        for (std::size_t c = real_cols; c < t.cols(); ++c) t.cost(c) = 1.0;
        for (std::size_t i = 0; i < m; ++i) {
            if (basis[i] < real_cols) continue;
            for (std::size_t c = 0; c <= t.cols(); ++c) t.at(m, c) -= t.at(i, c);
        }
        detail::run_simplex(t, basis, t.cols());
        if (-t.neg_value() > lp_feasibility_tolerance * 0.1) return {};
        for (std::size_t i = 0; i < m; ++i) {
            if (basis[i] < real_cols) continue;
            for (std::size_t c = 0; c < real_cols; ++c) {
                if (std::fabs(t.at(i, c)) > detail::pivot_eps) {
                    t.pivot(i, c);
                    basis[i] = c;
                    break;
                }
            }
        }
    }

    for (std::size_t c = 0; c <= t.cols(); ++c) t.cost(c) = 0.0;
    for (std::size_t j = 0; j < n; ++j) t.cost(j) = lp.objective[j];
    for (std::size_t i = 0; i < m; ++i) {
        if (basis[i] >= n) continue;
        const double cb = lp.objective[basis[i]];
        if (cb == 0.0) continue;
        for (std::size_t c = 0; c <= t.cols(); ++c) t.at(m, c) -= cb * t.at(i, c);
    }
    detail::run_simplex(t, basis, real_cols);

    LpResult res;
    res.status = LpStatus::optimal;
    res.x = lp.var_lower;
    for (std::size_t i = 0; i < m; ++i)
        if (basis[i] < n) res.x[basis[i]] += t.rhs(i);
    for (std::size_t j = 0; j < n; ++j) res.x[j] = std::min(std::max(res.x[j], lp.var_lower[j]), lp.var_upper[j]);
    for (std::size_t j = 0; j < n; ++j) res.value += lp.objective[j] * res.x[j];

    for (const auto& row : lp.constraints) {
        double lhs = 0.0;
        for (std::size_t j = 0; j < n; ++j) lhs += row.coeffs[j] * res.x[j];
        if (lhs > row.rhs + lp_feasibility_tolerance)
            throw SolverFailure("simplex: solution violates a constraint by " + std::to_string(lhs - row.rhs));
    }
    return res;
}

}  // namespace abonn
