#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "abonn/error.hpp"
#include "abonn/network.hpp"

namespace abonn {

/// Axis-aligned input box (the input predicate).
struct InputRegion {
    Vector lower;
    Vector upper;

    InputRegion() = default;
    InputRegion(Vector lo, Vector hi) : lower(std::move(lo)), upper(std::move(hi)) {
        detail::require_dim(lower.size() == upper.size(), "region bounds have different lengths");
        for (std::size_t i = 0; i < lower.size(); ++i)
            detail::require(lower[i] <= upper[i], "region lower bound exceeds upper bound");
    }

    std::size_t dim() const noexcept { return lower.size(); }

    bool contains(std::span<const double> x) const {
        if (x.size() != lower.size()) return false;
        for (std::size_t i = 0; i < x.size(); ++i)
            if (!(x[i] >= lower[i] && x[i] <= upper[i])) return false;
        return true;
    }

    bool operator==(const InputRegion&) const = default;
};

/// coeffs . y + offset >= 0
struct LinearConstraint {
    Vector coeffs;
    double offset = 0.0;

    bool operator==(const LinearConstraint&) const = default;
};

/// Conjunction of closed half-spaces over the network output.
struct OutputProperty {
    std::vector<LinearConstraint> constraints;

    OutputProperty() = default;
    explicit OutputProperty(std::vector<LinearConstraint> cs) : constraints(std::move(cs)) {
        detail::require_dim(!constraints.empty(), "output property needs at least one constraint");
        for (const auto& c : constraints)
            detail::require_dim(c.coeffs.size() == constraints.front().coeffs.size(),
                                "constraint coefficient vectors differ in length");
    }

    std::size_t output_dim() const { return constraints.front().coeffs.size(); }

    bool operator==(const OutputProperty&) const = default;
};

struct Specification {
    InputRegion region;
    OutputProperty property;

    bool operator==(const Specification&) const = default;
};

inline void check_dimensions(const Network& net, const Specification& s) {
    detail::require_dim(s.region.dim() == net.input_dim(), "specification region does not match network input_dim");
    detail::require_dim(s.property.output_dim() == net.output_dim(),
                        "specification property does not match network output_dim");
}

/// L-infinity ball around `center` clipped to [domain_lower, domain_upper], with
/// the property y_label >= y_j for every j != label.
inline Specification robustness_spec(std::span<const double> center, double epsilon, std::size_t label,
                                     double domain_lower, double domain_upper, std::size_t output_dim) {
    detail::require(label < output_dim, "label out of range");
    detail::require(epsilon >= 0.0, "epsilon must be non-negative");
    detail::require(domain_lower <= domain_upper, "domain lower bound exceeds upper bound");
    detail::require(output_dim >= 2, "robustness needs at least two outputs");
    Vector lo(center.size()), hi(center.size());
    for (std::size_t i = 0; i < center.size(); ++i) {
        lo[i] = std::clamp(center[i] - epsilon, domain_lower, domain_upper);
        hi[i] = std::clamp(center[i] + epsilon, domain_lower, domain_upper);
    }
    std::vector<LinearConstraint> cs;
    for (std::size_t j = 0; j < output_dim; ++j) {
        if (j == label) continue;
        LinearConstraint c{Vector(output_dim, 0.0), 0.0};
        c.coeffs[label] = 1.0;
        c.coeffs[j] = -1.0;
        cs.push_back(std::move(c));
    }
    return {InputRegion(std::move(lo), std::move(hi)), OutputProperty(std::move(cs))};
}

inline double constraint_value(const LinearConstraint& c, std::span<const double> y) {
    double v = c.offset;
    for (std::size_t i = 0; i < y.size(); ++i) v += c.coeffs[i] * y[i];
    return v;
}

/// Minimum constraint value; the property holds at y iff the result is >= 0.
inline double margin(const OutputProperty& p, std::span<const double> y) {
    detail::require_dim(y.size() == p.output_dim(), "output length differs from property dimension");
    double m = std::numeric_limits<double>::infinity();
    for (const auto& c : p.constraints) m = std::min(m, constraint_value(c, y));
    return m;
}

/// x lies in the region and violates the property. Phase constraints of a
/// sub-problem never enter into this check.
inline bool is_counterexample(const Network& net, const Specification& s, std::span<const double> x) {
    detail::require_dim(x.size() == net.input_dim(), "candidate length differs from network input_dim");
    if (!s.region.contains(x)) return false;
    return margin(s.property, forward(net, x)) < 0.0;
}

}  // namespace abonn
