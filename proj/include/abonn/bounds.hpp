#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "abonn/error.hpp"
#include "abonn/network.hpp"
#include "abonn/specification.hpp"

namespace abonn {

enum class PhaseSign : std::uint8_t { positive, negative };

/// r+ (pre-activation >= 0) or r- (pre-activation <= 0) on one neuron.
struct PhaseConstraint {
    NeuronRef neuron;
    PhaseSign sign = PhaseSign::positive;

    bool operator==(const PhaseConstraint&) const = default;
};

/// Ordered phase constraints identifying a sub-problem; empty for the root.
class ConstraintSeq {
public:
    ConstraintSeq() = default;
    explicit ConstraintSeq(std::vector<PhaseConstraint> items) : items_(std::move(items)) {
        for (std::size_t i = 0; i < items_.size(); ++i)
            for (std::size_t j = 0; j < i; ++j)
                detail::require(!(items_[i].neuron == items_[j].neuron), "constraint sequence repeats a neuron");
    }

    const std::vector<PhaseConstraint>& items() const noexcept { return items_; }
    std::size_t size() const noexcept { return items_.size(); }
    bool empty() const noexcept { return items_.empty(); }

    bool contains(NeuronRef n) const {
        return std::any_of(items_.begin(), items_.end(), [&](const PhaseConstraint& p) { return p.neuron == n; });
    }

    ConstraintSeq extended(PhaseConstraint pc) const {
        detail::require(!contains(pc.neuron), "neuron already constrained in this sequence");
        ConstraintSeq out = *this;
        out.items_.push_back(pc);
        return out;
    }

    /// +1 / -1 / 0 per flat neuron index.
    std::vector<std::int8_t> phase_table(const Network& net) const {
        std::vector<std::int8_t> t(net.relu_count(), 0);
        for (const auto& p : items_) t[net.flat_index(p.neuron)] = p.sign == PhaseSign::positive ? 1 : -1;
        return t;
    }

private:
    std::vector<PhaseConstraint> items_;
};

struct Interval {
    double lower = 0.0;
    double upper = 0.0;

    bool ambiguous() const noexcept { return lower < 0.0 && upper > 0.0; }
    bool operator==(const Interval&) const = default;
};

/// Outcome of one approximate analysis of a (sub-)problem.
struct BoundResult {
    double p_hat = 0.0;              // +inf when infeasible
    std::optional<Vector> candidate; // absent when infeasible
    bool infeasible = false;
    std::vector<Interval> preact_bounds; // flat order; truncated when infeasible
};

enum class Domain { interval, linrelax };

inline const char* to_string(Domain d) { return d == Domain::interval ? "interval" : "linrelax"; }

/// Settings for the linear-relaxation domain. `pinned_alpha`, when non-empty,
/// fixes the lower-relaxation slope y >= alpha * x of every neuron (flat
/// order), stable and constrained ones included.
struct LinRelaxOptions {
    std::vector<double> pinned_alpha;
};

inline constexpr double infeasibility_tolerance = 1e-9;

struct AffineMinimum {
    Vector argmin;
    double value = 0.0;
};

/// Exact minimum of coeffs . x + offset over the box; zero coefficients take the lower bound.
inline AffineMinimum minimize_affine_over_box(std::span<const double> coeffs, double offset,
                                              const InputRegion& region) {
    detail::require_dim(coeffs.size() == region.dim(), "coefficient length differs from region dimension");
    AffineMinimum m{Vector(coeffs.size()), offset};
    for (std::size_t i = 0; i < coeffs.size(); ++i) {
        m.argmin[i] = coeffs[i] < 0.0 ? region.upper[i] : region.lower[i];
        m.value += coeffs[i] * m.argmin[i];
    }
    return m;
}

namespace detail {

inline constexpr double inf = std::numeric_limits<double>::infinity();

/// Intersects with the phase half-line. Returns false when the result is empty.
inline bool apply_phase(Interval& b, std::int8_t phase) {
    if (phase > 0) b.lower = std::max(b.lower, 0.0);
    if (phase < 0) b.upper = std::min(b.upper, 0.0);
    if (b.lower > b.upper + infeasibility_tolerance) return false;
    if (b.lower > b.upper) b.lower = b.upper = (phase > 0 ? b.lower : b.upper);
    return true;
}

inline Interval relu_image(Interval b) { return {std::max(b.lower, 0.0), std::max(b.upper, 0.0)}; }

inline std::vector<Interval> affine_interval(const Layer& l, const std::vector<Interval>& in) {
    std::vector<Interval> out(l.out_dim());
    for (std::size_t r = 0; r < l.out_dim(); ++r) {
        double lo = l.bias[r], hi = l.bias[r];
        auto w = l.weights.row(r);
        for (std::size_t c = 0; c < w.size(); ++c) {
            if (w[c] >= 0.0) {
                lo += w[c] * in[c].lower;
                hi += w[c] * in[c].upper;
            } else {
                lo += w[c] * in[c].upper;
                hi += w[c] * in[c].lower;
            }
        }
        out[r] = {lo, hi};
    }
    return out;
}

inline std::vector<Interval> region_intervals(const InputRegion& region) {
    std::vector<Interval> v(region.dim());
    for (std::size_t i = 0; i < region.dim(); ++i) v[i] = {region.lower[i], region.upper[i]};
    return v;
}

inline double interval_lower(const LinearConstraint& c, const std::vector<Interval>& y) {
    double v = c.offset;
    for (std::size_t k = 0; k < y.size(); ++k) v += c.coeffs[k] * (c.coeffs[k] >= 0.0 ? y[k].lower : y[k].upper);
    return v;
}

/// Per-neuron relaxation lo_slope * z <= y <= up_slope * z + up_icpt.
struct LayerRelaxation {
    Vector lo_slope, up_slope, up_icpt;
};

inline void relax_neuron(LayerRelaxation& r, std::size_t j, Interval b, std::int8_t phase,
                         const std::vector<double>& pinned, std::size_t flat) {
    const bool pin = !pinned.empty();
    if (phase > 0 || b.lower >= 0.0) {
        r.up_slope[j] = 1.0;
        r.up_icpt[j] = 0.0;
        r.lo_slope[j] = pin ? pinned[flat] : 1.0;
    } else if (phase < 0 || b.upper <= 0.0) {
        r.up_slope[j] = 0.0;
        r.up_icpt[j] = 0.0;
        r.lo_slope[j] = pin ? pinned[flat] : 0.0;
    } else {
        const double width = b.upper - b.lower;
        r.up_slope[j] = b.upper / width;
        r.up_icpt[j] = -b.upper * b.lower / width;
        r.lo_slope[j] = pin ? pinned[flat] : (-b.lower >= b.upper ? 0.0 : 1.0);
    }
}

/// Symbolic lower bound of coeffs . y_last + offset, where y_last is the output
/// of layer `last` (post-activation), rewritten as an affine function of the input.
inline void backsubstitute(const Network& net, const std::vector<LayerRelaxation>& relax, std::size_t last,
                           Vector& coeffs, double& offset) {
    for (std::size_t k = last + 1; k-- > 0;) {
        const Layer& layer = net.layers()[k];
        if (net.is_relu_layer(k)) {
            const auto& r = relax[k];
            for (std::size_t j = 0; j < coeffs.size(); ++j) {
                if (coeffs[j] >= 0.0) {
                    coeffs[j] *= r.lo_slope[j];
                } else {
                    offset += coeffs[j] * r.up_icpt[j];
                    coeffs[j] *= r.up_slope[j];
                }
            }
        }
        Vector next(layer.in_dim(), 0.0);
        for (std::size_t j = 0; j < coeffs.size(); ++j) {
            if (coeffs[j] == 0.0) continue;
            offset += coeffs[j] * layer.bias[j];
            auto w = layer.weights.row(j);
            for (std::size_t c = 0; c < w.size(); ++c) next[c] += coeffs[j] * w[c];
        }
        coeffs = std::move(next);
    }
}

inline void check_inputs(const Network& net, const InputRegion& region, const OutputProperty* property) {
    detail::require_dim(region.dim() == net.input_dim(), "region does not match network input_dim");
    if (property)
        detail::require_dim(property->output_dim() == net.output_dim(), "property does not match network output_dim");
}

inline BoundResult infeasible_result(std::vector<Interval> bounds) {
    BoundResult r;
    r.p_hat = inf;
    r.infeasible = true;
    r.preact_bounds = std::move(bounds);
    return r;
}

inline BoundResult run_interval(const Network& net, const InputRegion& region, const ConstraintSeq& gamma,
                                const OutputProperty* property) {
    check_inputs(net, region, property);
    const auto phase = gamma.phase_table(net);
    std::vector<Interval> bounds;
    bounds.reserve(net.relu_count());
    std::vector<Interval> cur = region_intervals(region);
    const std::size_t relu_layers = net.relu_layer_count();
    std::size_t flat = 0;
    for (std::size_t i = 0; i < relu_layers; ++i) {
        cur = affine_interval(net.layers()[i], cur);
        for (auto& b : cur) {
            if (!apply_phase(b, phase[flat])) return infeasible_result(std::move(bounds));
            bounds.push_back(b);
            b = relu_image(b);
            ++flat;
        }
    }
    BoundResult res;
    res.preact_bounds = std::move(bounds);
    if (!property) return res;

    // A final affine layer is folded into each constraint before interval
    // evaluation, so affine-only networks get the exact box minimum.
    const bool fold = relu_layers < net.layers().size();
    res.p_hat = inf;
    const LinearConstraint* worst = nullptr;
    for (const auto& c : property->constraints) {
        double v = 0.0;
        if (fold) {
            const Layer& out = net.layers().back();
            LinearConstraint folded{Vector(out.in_dim(), 0.0), c.offset};
            for (std::size_t j = 0; j < out.out_dim(); ++j) {
                folded.offset += c.coeffs[j] * out.bias[j];
                auto w = out.weights.row(j);
                for (std::size_t k = 0; k < w.size(); ++k) folded.coeffs[k] += c.coeffs[j] * w[k];
            }
            v = interval_lower(folded, cur);
        } else {
            v = interval_lower(c, cur);
        }
        if (!worst || v < res.p_hat) {
            res.p_hat = v;
            worst = &c;
        }
    }

    // Candidate: push the attaining constraint back to the input with one slope
    // per neuron (0 inactive, 1 active, chord slope when ambiguous) and take the
    // minimizing corner.
    std::vector<LayerRelaxation> slopes(net.relu_layer_count());
    for (std::size_t i = 0, f = 0; i < slopes.size(); ++i) {
        const std::size_t n = net.layers()[i].out_dim();
        slopes[i] = {Vector(n), Vector(n), Vector(n, 0.0)};
        for (std::size_t j = 0; j < n; ++j, ++f) {
            const Interval b = res.preact_bounds[f];
            double s = 0.0;
            if (phase[f] > 0 || b.lower >= 0.0) s = 1.0;
            else if (phase[f] < 0 || b.upper <= 0.0) s = 0.0;
            else s = b.upper / (b.upper - b.lower);
            slopes[i].lo_slope[j] = slopes[i].up_slope[j] = s;
        }
    }
    Vector dir = worst->coeffs;
    double off = worst->offset;
    backsubstitute(net, slopes, net.layers().size() - 1, dir, off);
    res.candidate = minimize_affine_over_box(dir, off, region).argmin;
    return res;
}

inline BoundResult run_linrelax(const Network& net, const InputRegion& region, const ConstraintSeq& gamma,
                                const OutputProperty* property, const LinRelaxOptions& opts) {
    check_inputs(net, region, property);
    detail::require_dim(opts.pinned_alpha.empty() || opts.pinned_alpha.size() == net.relu_count(),
                        "pinned alpha length differs from relu_count");
    const auto phase = gamma.phase_table(net);
    std::vector<Interval> bounds;
    bounds.reserve(net.relu_count());
    std::vector<LayerRelaxation> relax;
    std::vector<Interval> post = region_intervals(region);
    std::size_t flat = 0;
    const std::size_t relu_layers = net.relu_layer_count();
    for (std::size_t i = 0; i < relu_layers; ++i) {
        const Layer& layer = net.layers()[i];
        std::vector<Interval> pre = affine_interval(layer, post);
        const std::size_t n = layer.out_dim();
        LayerRelaxation r{Vector(n), Vector(n), Vector(n)};
        for (std::size_t j = 0; j < n; ++j, ++flat) {
            Interval b = pre[j];
            if (i > 0) {
                Vector lo(layer.weights.row(j).begin(), layer.weights.row(j).end());
                double lo_off = layer.bias[j];
                backsubstitute(net, relax, i - 1, lo, lo_off);
                Vector hi(layer.weights.row(j).begin(), layer.weights.row(j).end());
                for (double& v : hi) v = -v;
                double hi_off = -layer.bias[j];
                backsubstitute(net, relax, i - 1, hi, hi_off);
                b.lower = std::max(b.lower, minimize_affine_over_box(lo, lo_off, region).value);
                b.upper = std::min(b.upper, -minimize_affine_over_box(hi, hi_off, region).value);
            }
            if (!apply_phase(b, phase[flat])) return infeasible_result(std::move(bounds));
            bounds.push_back(b);
            relax_neuron(r, j, b, phase[flat], opts.pinned_alpha, flat);
            pre[j] = relu_image(b);
        }
        relax.push_back(std::move(r));
        post = std::move(pre);
    }
    BoundResult res;
    res.preact_bounds = std::move(bounds);
    if (!property) return res;

    res.p_hat = inf;
    const std::size_t last = net.layers().size() - 1;
    for (const auto& c : property->constraints) {
        Vector g = c.coeffs;
        double off = c.offset;
        backsubstitute(net, relax, last, g, off);
        auto m = minimize_affine_over_box(g, off, region);
        if (!res.candidate || m.value < res.p_hat) {
            res.p_hat = m.value;
            res.candidate = std::move(m.argmin);
        }
    }
    return res;
}

}  // namespace detail

/// Interval propagation with phase constraints enforced by bound intersection.
inline BoundResult interval_analyze(const Network& net, const InputRegion& region, const ConstraintSeq& gamma,
                                    const OutputProperty& property) {
    return detail::run_interval(net, region, gamma, &property);
}

/// Back-substituting linear relaxation (triangle upper bound, 0/1 lower slope).
inline BoundResult linrelax_analyze(const Network& net, const InputRegion& region, const ConstraintSeq& gamma,
                                    const OutputProperty& property, const LinRelaxOptions& opts = {}) {
    return detail::run_linrelax(net, region, gamma, &property, opts);
}

inline BoundResult analyze(Domain d, const Network& net, const InputRegion& region, const ConstraintSeq& gamma,
                           const OutputProperty& property) {
    return d == Domain::interval ? interval_analyze(net, region, gamma, property)
                                 : linrelax_analyze(net, region, gamma, property);
}

/// Same bounds as the matching analyze call, without the output step.
/// Truncated at the first empty intersection.
inline std::vector<Interval> preactivation_bounds(const Network& net, const InputRegion& region,
                                                  const ConstraintSeq& gamma, Domain d) {
    auto r = d == Domain::interval ? detail::run_interval(net, region, gamma, nullptr)
                                   : detail::run_linrelax(net, region, gamma, nullptr, {});
    return std::move(r.preact_bounds);
}

}  // namespace abonn
