#pragma once

#include <array>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "abonn/bounds.hpp"
#include "abonn/error.hpp"
#include "abonn/leaf.hpp"
#include "abonn/network.hpp"
#include "abonn/specification.hpp"
#include "abonn/tree.hpp"

namespace abonn {

enum class Strategy { mcts, bfs, greedy };
enum class Heuristic { relax_area, widest, sequential };

/// What to do with a fully split leaf that still reports a false alarm.
enum class LeafMode { exact_lp, unknown };

inline const char* to_string(Strategy s) {
    switch (s) {
        case Strategy::mcts: return "mcts";
        case Strategy::bfs: return "bfs";
        case Strategy::greedy: return "greedy";
    }
    return "?";
}

inline const char* to_string(Heuristic h) {
    switch (h) {
        case Heuristic::relax_area: return "relax_area";
        case Heuristic::widest: return "widest";
        case Heuristic::sequential: return "sequential";
    }
    return "?";
}

inline const char* to_string(LeafMode m) { return m == LeafMode::exact_lp ? "exact_lp" : "unknown"; }

struct SearchConfig {
    double lambda = 0.5;
    double c = 0.2;
    double timeout_seconds = 1000.0;
    Strategy strategy = Strategy::mcts;
    Heuristic heuristic = Heuristic::relax_area;
    Domain domain = Domain::linrelax;
    std::optional<std::size_t> max_nodes;  // cap on tree size
    PminMode pmin_mode = PminMode::frozen_root;
    LeafMode leaf_mode = LeafMode::exact_lp;
    bool record_trace = false;

    void validate() const {
        detail::require(lambda >= 0.0 && lambda <= 1.0, "lambda must lie in [0, 1]");
        detail::require(c >= 0.0, "c must be non-negative");
        detail::require(timeout_seconds >= 0.0, "timeout must be non-negative");
    }
};

enum class Outcome { verified_true, violated_false, timeout };

inline const char* to_string(Outcome o) {
    switch (o) {
        case Outcome::verified_true: return "verified_true";
        case Outcome::violated_false: return "violated_false";
        case Outcome::timeout: return "timeout";
    }
    return "?";
}

struct SearchStats {
    std::size_t nodes_expanded = 0;
    std::size_t appver_calls = 0;
    std::size_t lp_calls = 0;
    std::size_t exact_leaves = 0;
    double wall_time = 0.0;
    std::size_t peak_tree_size = 0;
    std::vector<NodeId> trace;  // expanded or resolved node per step, when requested
};

struct Verdict {
    Outcome outcome = Outcome::timeout;
    std::optional<Vector> counterexample;
    SearchStats stats;
};

/// Neurons that may still be split: ambiguous under `bounds` and not in gamma.
inline bool has_eligible_neuron(const Network& net, const std::vector<Interval>& bounds, const ConstraintSeq& gamma) {
    if (bounds.size() != net.relu_count()) return false;
    const auto table = gamma.phase_table(net);
    for (std::size_t i = 0; i < bounds.size(); ++i)
        if (table[i] == 0 && bounds[i].ambiguous()) return true;
    return false;
}

/// Branching heuristic H. Deterministic; ties go to the lowest flat index.
inline NeuronRef select_relu(Heuristic h, const Network& net, const std::vector<Interval>& bounds,
                             const ConstraintSeq& gamma) {
    detail::require_dim(bounds.size() == net.relu_count(), "select_relu: bounds length differs from relu_count");
    const auto table = gamma.phase_table(net);
    std::optional<std::size_t> best;
    double best_score = 0.0;
    for (std::size_t i = 0; i < bounds.size(); ++i) {
        const Interval b = bounds[i];
        if (table[i] != 0 || !b.ambiguous()) continue;
        double score = 0.0;
        switch (h) {
            case Heuristic::relax_area: score = (-b.lower * b.upper) / (b.upper - b.lower); break;
            case Heuristic::widest: score = b.upper - b.lower; break;
            case Heuristic::sequential: return net.neuron_at(i);
        }
        if (!best || score > best_score) {
            best = i;
            best_score = score;
        }
    }
    if (!best) throw PreconditionError("select_relu: no eligible ambiguous neuron");
    return net.neuron_at(*best);
}

enum class StepResult { progressed, resolved };

/// One verification run: the root analysis happens on construction, then
/// step() advances the configured strategy by one expansion or leaf resolution.
class Searcher {
public:
    Searcher(const Network& net, const Specification& spec, SearchConfig cfg)
        : net_(net), spec_(spec), cfg_(cfg), start_(std::chrono::steady_clock::now()) {
        cfg_.validate();
        check_dimensions(net_, spec_);
        if (cfg_.strategy == Strategy::greedy) cfg_.c = 0.0;

        BoundResult root = run_appver(ConstraintSeq{});
        if (root.infeasible || root.p_hat >= 0.0) {
            finish(Outcome::verified_true);
            return;
        }
        if (root.candidate && is_counterexample(net_, spec_, *root.candidate)) {
            counterexample_ = root.candidate;
            finish(Outcome::violated_false);
            return;
        }
        if (net_.relu_count() == 0) {
            // Affine network: nothing to split, the leaf LP decides.
            LeafResult leaf = exact_leaf_check(net_, spec_, ConstraintSeq{});
            stats_.lp_calls += leaf.lp_solves;
            ++stats_.exact_leaves;
            counterexample_ = leaf.witness;
            finish(leaf.verified ? Outcome::verified_true : Outcome::violated_false);
            return;
        }
        tree_.emplace(root.p_hat, root.candidate, std::move(root.preact_bounds), net_.relu_count(), cfg_.lambda,
                      cfg_.pmin_mode);
        stats_.peak_tree_size = 1;
        if (cfg_.strategy == Strategy::bfs) queue_.push_back(tree_->root());
    }

    bool finished() const noexcept { return outcome_.has_value(); }
    const SearchConfig& config() const noexcept { return cfg_; }
    const SearchStats& stats() const noexcept { return stats_; }
    /// Absent when the root resolved without a tree.
    const BabTree* tree() const noexcept { return tree_ ? &*tree_ : nullptr; }

    /// MCTS descent (or one FIFO pop for bfs).
    StepResult step() {
        detail::require(!finished(), "step called on a finished search");
        if (cfg_.strategy == Strategy::bfs) bfs_step();
        else mcts_step();
        stats_.peak_tree_size = tree_->size();
        check_root();
        return finished() ? StepResult::resolved : StepResult::progressed;
    }

    /// Steps until resolution, deadline, or node cap.
    Verdict run() {
        while (!finished()) {
            if (elapsed() >= cfg_.timeout_seconds ||
                (cfg_.max_nodes && tree_ && tree_->size() >= *cfg_.max_nodes)) {
                finish(Outcome::timeout);
                break;
            }
            step();
        }
        return verdict();
    }

    Verdict verdict() const {
        Verdict v;
        v.outcome = outcome_.value_or(Outcome::timeout);
        v.counterexample = counterexample_;
        v.stats = stats_;
        if (!finished()) v.stats.wall_time = elapsed();
        return v;
    }

private:
    double elapsed() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

    void finish(Outcome o) {
        if (o == Outcome::violated_false) {
            detail::ensure(counterexample_.has_value(), "violated verdict without counterexample");
            detail::ensure(is_counterexample(net_, spec_, *counterexample_),
                           "violated verdict carries a counterexample that does not reproduce");
        }
        outcome_ = o;
        stats_.wall_time = elapsed();
    }

    BoundResult run_appver(const ConstraintSeq& gamma) {
        ++stats_.appver_calls;
        return analyze(cfg_.domain, net_, spec_.region, gamma, spec_.property);
    }

    void check_root() {
        const BabNode& root = tree_->node(tree_->root());
        if (root.reward == pos_inf) finish(Outcome::violated_false);
        else if (root.reward == neg_inf) finish(Outcome::verified_true);
        else if (!root.open) finish(Outcome::timeout);  // only exhausted leaves remain
    }

    /// Expands or resolves one open leaf. Returns the created children, if any.
    std::optional<std::array<NodeId, 2>> process_leaf(NodeId id) {
        if (cfg_.record_trace) stats_.trace.push_back(id);
        const ConstraintSeq gamma = tree_->constraints_of(id);
        const BabNode& leaf = tree_->node(id);
        if (!has_eligible_neuron(net_, leaf.preact_bounds, gamma)) {
            if (cfg_.leaf_mode == LeafMode::unknown) {
                tree_->mark_exhausted(id);
                return std::nullopt;
            }
            LeafResult r = exact_leaf_check(net_, spec_, gamma);
            stats_.lp_calls += r.lp_solves;
            ++stats_.exact_leaves;
            if (!r.verified) counterexample_ = r.witness;
            tree_->resolve_leaf(id, !r.verified, std::move(r.witness));
            return std::nullopt;
        }
        const NeuronRef k = select_relu(cfg_.heuristic, net_, leaf.preact_bounds, gamma);
        std::array<ChildAnalysis, 2> results;
        for (std::size_t i = 0; i < 2; ++i) {
            BoundResult b =
                run_appver(gamma.extended({k, i == 0 ? PhaseSign::positive : PhaseSign::negative}));
            ChildAnalysis& a = results[i];
            a.infeasible = b.infeasible;
            a.p_hat = b.p_hat;
            a.valid = !b.infeasible && b.p_hat < 0.0 && b.candidate && is_counterexample(net_, spec_, *b.candidate);
            if (a.valid && !counterexample_) counterexample_ = b.candidate;
            a.candidate = std::move(b.candidate);
            a.preact_bounds = std::move(b.preact_bounds);
        }
        auto ids = tree_->expand(id, k, std::move(results));
        ++stats_.nodes_expanded;
        tree_->backpropagate(id);
        return ids;
    }

    void mcts_step() {
        NodeId cur = tree_->root();
        while (const auto& children = tree_->node(cur).children) {
            const BabNode& parent = tree_->node(cur);
            const BabNode& pos = tree_->node((*children)[0]);
            const BabNode& neg = tree_->node((*children)[1]);
            auto selectable = [](const BabNode& n) { return n.open && std::isfinite(n.reward); };
            const bool pos_ok = selectable(pos), neg_ok = selectable(neg);
            detail::ensure(pos_ok || neg_ok, "selection reached a node without a selectable child");
            if (pos_ok && neg_ok) {
                const double sp = ucb1_score(pos.reward, parent.subtree_size, pos.subtree_size, cfg_.c);
                const double sn = ucb1_score(neg.reward, parent.subtree_size, neg.subtree_size, cfg_.c);
                cur = sn > sp ? neg.id : pos.id;
            } else {
                cur = pos_ok ? pos.id : neg.id;
            }
        }
        process_leaf(cur);
    }

    void bfs_step() {
        detail::ensure(!queue_.empty(), "bfs queue empty on an unresolved search");
        const NodeId id = queue_.front();
        queue_.pop_front();
        if (auto ids = process_leaf(id)) {
            for (NodeId c : *ids)
                if (tree_->node(c).status == NodeStatus::unexpanded) queue_.push_back(c);
        }
    }

    const Network& net_;
    const Specification& spec_;
    SearchConfig cfg_;
    std::chrono::steady_clock::time_point start_;
    std::optional<BabTree> tree_;
    std::deque<NodeId> queue_;
    std::optional<Outcome> outcome_;
    std::optional<Vector> counterexample_;
    SearchStats stats_;
};

/// A finished run together with its tree (absent when the root resolved).
struct SearchRun {
    Verdict verdict;
    std::optional<BabTree> tree;
};

inline SearchRun run_search(const Network& net, const Specification& spec, const SearchConfig& cfg) {
    Searcher s(net, spec, cfg);
    SearchRun out;
    out.verdict = s.run();
    if (s.tree()) out.tree = *s.tree();
    return out;
}

/// Verifies (net, spec) with the strategy named in cfg.
inline Verdict verify(const Network& net, const Specification& spec, const SearchConfig& cfg) {
    return Searcher(net, spec, cfg).run();
}

inline Verdict bfs_verify(const Network& net, const Specification& spec, SearchConfig cfg) {
    cfg.strategy = Strategy::bfs;
    return verify(net, spec, cfg);
}

inline Verdict greedy_verify(const Network& net, const Specification& spec, SearchConfig cfg) {
    cfg.strategy = Strategy::greedy;
    return verify(net, spec, cfg);
}

}  // namespace abonn
