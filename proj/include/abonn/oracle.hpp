#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "abonn/bounds.hpp"
#include "abonn/error.hpp"
#include "abonn/leaf.hpp"
#include "abonn/network.hpp"
#include "abonn/specification.hpp"

namespace abonn {

struct OracleVerdict {
    bool verified = true;
    std::optional<Vector> witness;
    std::size_t ambiguous = 0;
    std::size_t assignments = 0;  // phase assignments examined
};

/// Neurons whose root interval bounds straddle zero. Interval propagation is
/// inclusion-monotone, so every other neuron is stable on any sub-region.
inline std::vector<std::size_t> root_ambiguous_neurons(const Network& net, const InputRegion& region) {
    std::vector<std::size_t> out;
    const auto b = preactivation_bounds(net, region, ConstraintSeq{}, Domain::interval);
    for (std::size_t i = 0; i < b.size(); ++i)
        if (b[i].ambiguous()) out.push_back(i);
    return out;
}

/// Ground truth by brute force: every sign assignment of the root-ambiguous
/// neurons is decided by one exact LP region check. Stops at the first
/// violation. Refuses more than `max_ambiguous` neurons.
inline OracleVerdict enumerate_verdict(const Network& net, const Specification& s, std::size_t max_ambiguous = 16) {
    check_dimensions(net, s);
    const auto bounds = preactivation_bounds(net, s.region, ConstraintSeq{}, Domain::interval);
    std::vector<std::size_t> amb;
    std::vector<std::int8_t> phases(net.relu_count());
    for (std::size_t i = 0; i < bounds.size(); ++i) {
        if (bounds[i].ambiguous()) amb.push_back(i);
        phases[i] = bounds[i].lower >= 0.0 ? 1 : -1;
    }
    detail::require(amb.size() <= max_ambiguous, "oracle: too many ambiguous neurons to enumerate");

    std::vector<bool> constrained(net.relu_count(), false);
    for (std::size_t i : amb) constrained[i] = true;

    OracleVerdict out;
    out.ambiguous = amb.size();
    const std::uint64_t total = std::uint64_t{1} << amb.size();
    for (std::uint64_t mask = 0; mask < total; ++mask) {
        for (std::size_t b = 0; b < amb.size(); ++b) phases[amb[b]] = (mask >> b) & 1 ? -1 : 1;
        ++out.assignments;
        LeafResult r = solve_phase_region(net, s, phases, constrained);
        if (!r.verified) {
            out.verified = false;
            out.witness = std::move(r.witness);
            return out;
        }
    }
    return out;
}

}  // namespace abonn
