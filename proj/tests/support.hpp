#pragma once

// Independent oracles shared by the unit and acceptance tests. Nothing here
// calls the bound, LP or search code it is used to check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "abonn/network.hpp"
#include "abonn/simplex.hpp"
#include "abonn/specification.hpp"

namespace abonn::testing {

inline std::string fixture(const std::string& name) { return std::string(ABONN_FIXTURES) + "/" + name; }

/// The 2-2-1 reference net: W1=[[1,1],[1,-1]], b1=0, W2=[[1,-2]], b2=0.5.
inline Network net_221() {
    return Network({Layer{Matrix::from_rows({{1, 1}, {1, -1}}), {0, 0}, Activation::relu},
                    Layer{Matrix::from_rows({{1, -2}}), {0.5}, Activation::identity}});
}

inline Specification unit_box_spec(std::size_t dim, std::vector<LinearConstraint> cs) {
    return {InputRegion(Vector(dim, 0.0), Vector(dim, 1.0)), OutputProperty(std::move(cs))};
}

/// Random dense net: widths[0] inputs, hidden ReLU layers, identity output.
inline Network random_net(std::mt19937_64& rng, const std::vector<std::size_t>& widths, double scale = 1.0) {
    std::uniform_real_distribution<double> w(-scale, scale);
    std::vector<Layer> layers;
    for (std::size_t i = 1; i < widths.size(); ++i) {
        Layer l{Matrix(widths[i], widths[i - 1]), Vector(widths[i]),
                i + 1 == widths.size() ? Activation::identity : Activation::relu};
        for (std::size_t r = 0; r < widths[i]; ++r) {
            for (std::size_t c = 0; c < widths[i - 1]; ++c) l.weights(r, c) = w(rng);
            l.bias[r] = 0.3 * w(rng);
        }
        layers.push_back(std::move(l));
    }
    return Network(std::move(layers));
}

inline std::vector<std::size_t> random_widths(std::mt19937_64& rng, std::size_t max_inputs = 4) {
    std::uniform_int_distribution<std::size_t> in(1, max_inputs), hidden(1, 3), width(2, 8), out(1, 3);
    std::vector<std::size_t> w{in(rng)};
    const std::size_t h = hidden(rng);
    for (std::size_t i = 0; i < h; ++i) w.push_back(width(rng));
    w.push_back(out(rng));
    return w;
}

inline InputRegion random_box(std::mt19937_64& rng, std::size_t dim) {
    std::uniform_real_distribution<double> c(-1.0, 1.0), r(0.0, 0.6);
    Vector lo(dim), hi(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        const double m = c(rng), h = r(rng);
        lo[i] = m - h;
        hi[i] = m + h;
    }
    return InputRegion(lo, hi);
}

inline OutputProperty random_property(std::mt19937_64& rng, std::size_t out_dim) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_int_distribution<std::size_t> n(1, 3);
    std::vector<LinearConstraint> cs;
    const std::size_t k = n(rng);
    for (std::size_t i = 0; i < k; ++i) {
        LinearConstraint c{Vector(out_dim), u(rng)};
        for (double& v : c.coeffs) v = u(rng);
        cs.push_back(std::move(c));
    }
    return OutputProperty(std::move(cs));
}

inline Vector sample_point(std::mt19937_64& rng, const InputRegion& r) {
    Vector x(r.dim());
    for (std::size_t i = 0; i < r.dim(); ++i) x[i] = std::uniform_real_distribution<double>(r.lower[i], r.upper[i])(rng);
    return x;
}

/// Minimum property margin over a (n+1)^2 grid of a two-input box.
inline double grid_min_margin(const Network& net, const Specification& s, std::size_t n = 100,
                              const std::vector<std::int8_t>* phases = nullptr, bool* any = nullptr) {
    double best = std::numeric_limits<double>::infinity();
    if (any) *any = false;
    for (std::size_t i = 0; i <= n; ++i)
        for (std::size_t j = 0; j <= n; ++j) {
            const double t0 = static_cast<double>(i) / static_cast<double>(n);
            const double t1 = static_cast<double>(j) / static_cast<double>(n);
            const Vector x{s.region.lower[0] + t0 * (s.region.upper[0] - s.region.lower[0]),
                           s.region.lower[1] + t1 * (s.region.upper[1] - s.region.lower[1])};
            if (phases) {
                const Vector z = pre_activations(net, x);
                bool ok = true;
                for (std::size_t k = 0; k < z.size(); ++k)
                    if (((*phases)[k] > 0 && z[k] < 0) || ((*phases)[k] < 0 && z[k] > 0)) ok = false;
                if (!ok) continue;
            }
            if (any) *any = true;
            best = std::min(best, margin(s.property, forward(net, x)));
        }
    return best;
}

/// Solves a square system by Gaussian elimination with partial pivoting.
inline std::optional<Vector> solve_square(std::vector<Vector> a, Vector b) {
    const std::size_t n = b.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
        if (std::fabs(a[piv][col]) < 1e-10) return std::nullopt;
        std::swap(a[piv], a[col]);
        std::swap(b[piv], b[col]);
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = a[r][col] / a[col][col];
            for (std::size_t k = col; k < n; ++k) a[r][k] -= f * a[col][k];
            b[r] -= f * b[col];
        }
    }
    Vector x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = b[i] / a[i][i];
    return x;
}

struct VertexOptimum {
    bool feasible = false;
    double value = 0.0;
};

/// Minimum of a bounded LP by enumerating every basic point: each choice of n
/// tight constraints (rows plus box faces) is solved and kept if feasible.
inline VertexOptimum vertex_enumeration(const LinearProgram& lp, double tol = 1e-9) {
    const std::size_t n = lp.objective.size();
    std::vector<Vector> rows;
    Vector rhs;
    for (const auto& c : lp.constraints) {
        rows.push_back(c.coeffs);
        rhs.push_back(c.rhs);
    }
    for (std::size_t i = 0; i < n; ++i) {
        Vector up(n, 0.0), down(n, 0.0);
        up[i] = 1.0;
        down[i] = -1.0;
        rows.push_back(up);
        rhs.push_back(lp.var_upper[i]);
        rows.push_back(down);
        rhs.push_back(-lp.var_lower[i]);
    }
    const std::size_t m = rows.size();
    VertexOptimum best;
    std::vector<bool> select(m, false);
    std::fill(select.begin(), select.begin() + static_cast<std::ptrdiff_t>(n), true);
    do {
        std::vector<Vector> a;
        Vector b;
        for (std::size_t i = 0; i < m; ++i)
            if (select[i]) {
                a.push_back(rows[i]);
                b.push_back(rhs[i]);
            }
        const auto x = solve_square(a, b);
        if (!x) continue;
        bool ok = true;
        for (std::size_t i = 0; i < m && ok; ++i) {
            double v = 0.0;
            for (std::size_t k = 0; k < n; ++k) v += rows[i][k] * (*x)[k];
            ok = v <= rhs[i] + tol * (1.0 + std::fabs(rhs[i]));
        }
        if (!ok) continue;
        double val = 0.0;
        for (std::size_t k = 0; k < n; ++k) val += lp.objective[k] * (*x)[k];
        if (!best.feasible || val < best.value) best = {true, val};
    } while (std::prev_permutation(select.begin(), select.end()));
    return best;
}

/// Random box-bounded LP with up to max_vars variables and max_rows rows.
inline LinearProgram random_lp(std::mt19937_64& rng, std::size_t max_vars = 6, std::size_t max_rows = 8) {
    std::uniform_int_distribution<std::size_t> nv(1, max_vars), nr(0, max_rows);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const std::size_t n = nv(rng), m = nr(rng);
    LinearProgram lp;
    lp.objective.resize(n);
    for (double& v : lp.objective) v = u(rng);
    lp.var_lower.resize(n);
    lp.var_upper.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        lp.var_lower[i] = u(rng);
        lp.var_upper[i] = lp.var_lower[i] + 0.1 + std::fabs(u(rng));
    }
    for (std::size_t r = 0; r < m; ++r) {
        LpRow row{Vector(n), 0.0};
        for (double& v : row.coeffs) v = u(rng);
        row.rhs = 0.6 * u(rng);
        lp.constraints.push_back(std::move(row));
    }
    return lp;
}

}  // namespace abonn::testing
