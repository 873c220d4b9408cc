#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "abonn/bounds.hpp"
#include "abonn/error.hpp"
#include "abonn/network.hpp"
#include "abonn/simplex.hpp"
#include "abonn/specification.hpp"

namespace abonn {

inline constexpr double leaf_margin_tolerance = 1e-9;
inline constexpr double pos_inf_margin = std::numeric_limits<double>::infinity();

struct LeafResult {
    bool verified = true;
    std::optional<Vector> witness;
    std::size_t lp_solves = 0;
    double min_margin = pos_inf_margin;  // smallest LP margin; +inf when the region is empty
};

/// Exact resolution of a region on which every ReLU has a known phase.
///
/// `phases` holds +1/-1 for every neuron (flat order). The network is then an
/// affine function of the input. Neurons with `constrained[i]` set contribute
/// the half-space h_i(x) >= 0 (or <= 0) to the LP; the others must already be
/// stable across the region. One LP per property constraint minimizes the margin.
inline LeafResult solve_phase_region(const Network& net, const Specification& s, const std::vector<std::int8_t>& phases,
                                     const std::vector<bool>& constrained) {
    check_dimensions(net, s);
    detail::require_dim(phases.size() == net.relu_count() && constrained.size() == net.relu_count(),
                        "phase assignment length differs from relu_count");
    const std::size_t n = net.input_dim();

    // Affine forms of the current layer's outputs: rows over x plus offset.
    std::vector<Vector> forms(n, Vector(n, 0.0));
    Vector offsets(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) forms[i][i] = 1.0;

    LinearProgram lp;
    lp.var_lower = s.region.lower;
    lp.var_upper = s.region.upper;
    std::size_t flat = 0;
    for (std::size_t li = 0; li < net.layers().size(); ++li) {
        const Layer& layer = net.layers()[li];
        std::vector<Vector> next(layer.out_dim(), Vector(n, 0.0));
        Vector next_off(layer.bias);
        for (std::size_t j = 0; j < layer.out_dim(); ++j) {
            auto w = layer.weights.row(j);
            for (std::size_t k = 0; k < w.size(); ++k) {
                if (w[k] == 0.0) continue;
                next_off[j] += w[k] * offsets[k];
                for (std::size_t c = 0; c < n; ++c) next[j][c] += w[k] * forms[k][c];
            }
        }
        if (net.is_relu_layer(li)) {
            for (std::size_t j = 0; j < layer.out_dim(); ++j, ++flat) {
                const bool positive = phases[flat] > 0;
                if (constrained[flat]) {
                    // positive: -h(x) <= 0, negative: h(x) <= 0
                    LpRow row{next[j], positive ? next_off[j] : -next_off[j]};
                    if (positive)
                        for (double& v : row.coeffs) v = -v;
                    lp.constraints.push_back(std::move(row));
                }
                if (!positive) {
                    std::fill(next[j].begin(), next[j].end(), 0.0);
                    next_off[j] = 0.0;
                }
            }
        }
        forms = std::move(next);
        offsets = std::move(next_off);
    }

    LeafResult out;
    double best = 0.0;
    for (const auto& c : s.property.constraints) {
        lp.objective.assign(n, 0.0);
        double off = c.offset;
        for (std::size_t j = 0; j < c.coeffs.size(); ++j) {
            off += c.coeffs[j] * offsets[j];
            for (std::size_t k = 0; k < n; ++k) lp.objective[k] += c.coeffs[j] * forms[j][k];
        }
        LpResult r = solve(lp);
        ++out.lp_solves;
        // Every LP shares the same polytope.
        if (r.status == LpStatus::infeasible) {
            out.min_margin = pos_inf_margin;
            out.witness.reset();
            return out;
        }
        const double value = r.value + off;
        out.min_margin = std::min(out.min_margin, value);
        if (value < best) {
            best = value;
            out.witness = std::move(r.x);
        }
    }
    if (!out.witness) return out;
    if (is_counterexample(net, s, *out.witness)) {
        out.verified = false;
        return out;
    }
    // A minimum this close to zero is a rounding artifact of a tight region.
    if (best >= -leaf_margin_tolerance) {
        out.witness.reset();
        return out;
    }
    throw SolverFailure("leaf LP witness does not reproduce on the network (LP margin " + std::to_string(best) + ")");
}

/// Decides the sub-problem identified by `gamma` exactly. Every neuron outside
/// gamma must be stable under the bounds computed for gamma.
inline LeafResult exact_leaf_check(const Network& net, const Specification& s, const ConstraintSeq& gamma) {
    check_dimensions(net, s);
    const auto ib = preactivation_bounds(net, s.region, gamma, Domain::interval);
    const auto lb = preactivation_bounds(net, s.region, gamma, Domain::linrelax);
    // An empty intersection in either domain means the sub-problem is empty.
    if (ib.size() < net.relu_count() || lb.size() < net.relu_count()) return {};

    const auto table = gamma.phase_table(net);
    std::vector<std::int8_t> phases(net.relu_count());
    std::vector<bool> constrained(net.relu_count(), false);
    for (std::size_t i = 0; i < net.relu_count(); ++i) {
        if (table[i] != 0) {
            phases[i] = table[i];
            constrained[i] = true;
            continue;
        }
        const double lo = std::max(ib[i].lower, lb[i].lower);
        const double hi = std::min(ib[i].upper, lb[i].upper);
        if (lo < 0.0 && hi > 0.0)
            throw PreconditionError("exact_leaf_check: neuron " + std::to_string(i) + " is ambiguous and not fixed");
        phases[i] = lo >= 0.0 ? 1 : -1;
    }
    return solve_phase_region(net, s, phases, constrained);
}

}  // namespace abonn
