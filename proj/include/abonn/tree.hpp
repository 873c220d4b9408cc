#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "abonn/bounds.hpp"
#include "abonn/error.hpp"
#include "abonn/network.hpp"

namespace abonn {

using NodeId = std::size_t;

enum class NodeStatus { unexpanded, expanded, verified, violated, exhausted };

inline const char* to_string(NodeStatus s) {
    switch (s) {
        case NodeStatus::unexpanded: return "unexpanded";
        case NodeStatus::expanded: return "expanded";
        case NodeStatus::verified: return "verified";
        case NodeStatus::violated: return "violated";
        case NodeStatus::exhausted: return "exhausted";
    }
    return "?";
}

/// How the p_hat normalizer of the potentiality evolves.
enum class PminMode { frozen_root, running_min };

inline const char* to_string(PminMode m) { return m == PminMode::frozen_root ? "frozen_root" : "running_min"; }

inline constexpr double pos_inf = std::numeric_limits<double>::infinity();
inline constexpr double neg_inf = -std::numeric_limits<double>::infinity();

/// Counterexample potentiality of a node.
///
/// -inf when the node is verified (p_hat >= 0, which includes an infeasible
/// node's +inf), +inf when p_hat < 0 comes with a real counterexample, and
/// otherwise lambda * depth / K + (1 - lambda) * p_hat / p_min with the ratio
/// clamped to [0, 1].
inline double potentiality(double p_hat, bool candidate_valid, std::size_t depth, std::size_t relu_count,
                           double lambda, double p_min) {
    detail::require(relu_count >= 1, "potentiality: relu_count must be positive");
    detail::require(depth <= relu_count, "potentiality: depth exceeds relu_count");
    detail::require(p_min < 0.0, "potentiality: p_min must be negative");
    detail::require(lambda >= 0.0 && lambda <= 1.0, "potentiality: lambda outside [0, 1]");
    if (p_hat >= 0.0) return neg_inf;
    if (candidate_valid) return pos_inf;
    const double ratio = std::clamp(p_hat / p_min, 0.0, 1.0);
    return lambda * static_cast<double>(depth) / static_cast<double>(relu_count) + (1.0 - lambda) * ratio;
}

/// UCB1 selection score; infinite rewards dominate the exploration term.
inline double ucb1_score(double child_reward, std::size_t parent_size, std::size_t child_size, double c) {
    detail::require(child_size >= 1, "ucb1_score: child_size must be positive");
    detail::require(parent_size >= child_size + 1, "ucb1_score: parent_size must exceed child_size");
    detail::require(c >= 0.0, "ucb1_score: exploration constant must be non-negative");
    if (std::isinf(child_reward)) return child_reward;
    if (c == 0.0) return child_reward;
    return child_reward +
           c * std::sqrt(2.0 * std::log(static_cast<double>(parent_size)) / static_cast<double>(child_size));
}

/// AppVer outcome for one child of an expansion.
struct ChildAnalysis {
    double p_hat = 0.0;
    std::optional<Vector> candidate;
    bool valid = false;
    bool infeasible = false;
    std::vector<Interval> preact_bounds;
};

struct BabNode {
    NodeId id = 0;
    std::optional<NodeId> parent;
    std::optional<PhaseConstraint> edge;
    std::size_t depth = 0;
    double p_hat = 0.0;
    std::optional<Vector> candidate;
    double reward = 0.0;
    std::size_t subtree_size = 1;
    std::optional<std::array<NodeId, 2>> children;  // (r+, r-)
    NodeStatus status = NodeStatus::unexpanded;
    std::optional<NeuronRef> split_neuron;
    bool resolved_exactly = false;  // closed by the leaf LP
    bool open = true;               // subtree still holds an unexpanded, unresolved leaf
    std::vector<Interval> preact_bounds;  // kept until the node is expanded
};

/// Search tree of sub-problems. Node ids are creation indices.
class BabTree {
public:
    BabTree(double root_p_hat, std::optional<Vector> root_candidate, std::vector<Interval> root_bounds,
            std::size_t relu_count, double lambda, PminMode mode = PminMode::frozen_root)
        : relu_count_(relu_count), lambda_(lambda), mode_(mode), p_min_(root_p_hat) {
        detail::require(root_p_hat < 0.0, "tree root must be a false alarm (p_hat < 0)");
        BabNode root;
        root.p_hat = root_p_hat;
        root.candidate = std::move(root_candidate);
        root.preact_bounds = std::move(root_bounds);
        root.reward = potentiality(root_p_hat, false, 0, relu_count_, lambda_, p_min_);
        nodes_.push_back(std::move(root));
    }

    NodeId root() const noexcept { return 0; }
    std::size_t size() const noexcept { return nodes_.size(); }
    const BabNode& node(NodeId id) const { return nodes_.at(id); }
    const std::vector<BabNode>& nodes() const noexcept { return nodes_; }
    double p_min() const noexcept { return p_min_; }
    double lambda() const noexcept { return lambda_; }
    std::size_t relu_count() const noexcept { return relu_count_; }

    ConstraintSeq constraints_of(NodeId id) const {
        std::vector<PhaseConstraint> items;
        for (const BabNode* n = &node(id); n->parent; n = &nodes_[*n->parent]) items.push_back(*n->edge);
        std::reverse(items.begin(), items.end());
        return ConstraintSeq(std::move(items));
    }

    /// Creates the (r+, r-) children of an unexpanded node from their analyses.
    std::array<NodeId, 2> expand(NodeId id, NeuronRef neuron, std::array<ChildAnalysis, 2> results) {
        {
            BabNode& n = nodes_.at(id);
            detail::require(n.status == NodeStatus::unexpanded && !n.children, "expand: node already expanded");
        }
        detail::require(!constraints_of(id).contains(neuron), "expand: neuron already split on this path");
        if (mode_ == PminMode::running_min)
            for (const auto& r : results)
                if (!r.infeasible && r.p_hat < 0.0) p_min_ = std::min(p_min_, r.p_hat);

        const std::size_t depth = nodes_[id].depth + 1;
        std::array<NodeId, 2> ids{};
        for (std::size_t i = 0; i < 2; ++i) {
            ChildAnalysis& r = results[i];
            BabNode c;
            c.id = nodes_.size();
            c.parent = id;
            c.edge = PhaseConstraint{neuron, i == 0 ? PhaseSign::positive : PhaseSign::negative};
            c.depth = depth;
            c.p_hat = r.infeasible ? pos_inf : r.p_hat;
            if (!r.infeasible) c.candidate = std::move(r.candidate);
            c.reward = potentiality(c.p_hat, r.valid && !r.infeasible, depth, relu_count_, lambda_, p_min_);
            if (c.reward == neg_inf) c.status = NodeStatus::verified;
            else if (c.reward == pos_inf) c.status = NodeStatus::violated;
            c.open = c.status == NodeStatus::unexpanded;
            if (c.open) c.preact_bounds = std::move(r.preact_bounds);
            ids[i] = c.id;
            nodes_.push_back(std::move(c));
        }
        BabNode& n = nodes_[id];
        n.children = ids;
        n.split_neuron = neuron;
        n.status = NodeStatus::expanded;
        n.preact_bounds.clear();
        n.preact_bounds.shrink_to_fit();
        return ids;
    }

    /// Recomputes reward, size, status and openness from `id` up to the root.
    void backpropagate(NodeId id) {
        detail::require(nodes_.at(id).children.has_value(), "backpropagate: node has no children");
        for (std::optional<NodeId> cur = id; cur; cur = nodes_[*cur].parent) {
            BabNode& n = nodes_[*cur];
            const BabNode& a = nodes_[(*n.children)[0]];
            const BabNode& b = nodes_[(*n.children)[1]];
            n.reward = std::max(a.reward, b.reward);
            n.subtree_size = 1 + a.subtree_size + b.subtree_size;
            if (a.status == NodeStatus::violated || b.status == NodeStatus::violated)
                n.status = NodeStatus::violated;
            else if (a.status == NodeStatus::verified && b.status == NodeStatus::verified)
                n.status = NodeStatus::verified;
            else
                n.status = NodeStatus::expanded;
            n.open = a.open || b.open;
        }
    }

    /// Closes a fully split leaf with the exact answer.
    void resolve_leaf(NodeId id, bool violated, std::optional<Vector> witness = std::nullopt) {
        BabNode& n = nodes_.at(id);
        detail::require(!n.children && n.status == NodeStatus::unexpanded, "resolve_leaf: node is not an open leaf");
        n.status = violated ? NodeStatus::violated : NodeStatus::verified;
        n.reward = violated ? pos_inf : neg_inf;
        n.resolved_exactly = true;
        n.open = false;
        if (witness) n.candidate = std::move(witness);
        n.preact_bounds.clear();
        if (n.parent) backpropagate(*n.parent);
    }

    /// Closes a fully split leaf without an answer; the run can no longer conclude true.
    void mark_exhausted(NodeId id) {
        BabNode& n = nodes_.at(id);
        detail::require(!n.children && n.status == NodeStatus::unexpanded, "mark_exhausted: node is not an open leaf");
        n.status = NodeStatus::exhausted;
        n.open = false;
        n.preact_bounds.clear();
        if (n.parent) backpropagate(*n.parent);
    }

    /// Whole-tree consistency sweep; throws InvariantError on the first breach.
    void check_invariants() const {
        for (const BabNode& n : nodes_) {
            const std::string where = "node " + std::to_string(n.id) + ": ";
            if (std::isfinite(n.reward))
                detail::ensure(n.reward >= 0.0 && n.reward <= 1.0, where + "finite reward outside [0, 1]");
            if (n.parent) {
                const BabNode& p = nodes_[*n.parent];
                detail::ensure(n.depth == p.depth + 1, where + "depth differs from parent depth + 1");
                detail::ensure(p.children && ((*p.children)[0] == n.id || (*p.children)[1] == n.id),
                               where + "parent does not list this child");
            } else {
                detail::ensure(n.id == root() && n.depth == 0, where + "parentless non-root node");
            }
            if (n.children) {
                const BabNode& a = nodes_[(*n.children)[0]];
                const BabNode& b = nodes_[(*n.children)[1]];
                detail::ensure(n.subtree_size == 1 + a.subtree_size + b.subtree_size, where + "subtree size mismatch");
                detail::ensure(n.reward == std::max(a.reward, b.reward), where + "reward is not the max of children");
            } else {
                detail::ensure(n.subtree_size == 1, where + "leaf subtree size is not 1");
                if (n.status == NodeStatus::verified) detail::ensure(n.reward == neg_inf, where + "verified leaf reward");
                if (n.status == NodeStatus::violated) detail::ensure(n.reward == pos_inf, where + "violated leaf reward");
            }
            try {
                (void)constraints_of(n.id);
            } catch (const PreconditionError&) {
                throw InvariantError(where + "root path repeats a neuron");
            }
        }
    }

private:
    std::size_t relu_count_;
    double lambda_;
    PminMode mode_;
    double p_min_;
    std::vector<BabNode> nodes_;
};

}  // namespace abonn
