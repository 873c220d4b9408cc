#include <gtest/gtest.h>

#include <map>
#include <random>
#include <set>

#include "abonn/io.hpp"
#include "abonn/oracle.hpp"
#include "abonn/search.hpp"
#include "support.hpp"

using namespace abonn;
namespace t = abonn::testing;

namespace {

struct Problem {
    Network net;
    Specification spec;
};

Problem toy() {
    Network net = load_network_file(t::fixture("toy.json"));
    Specification s = load_spec(read_text_file(t::fixture("toy_spec.json")), 1);
    return {std::move(net), std::move(s)};
}

/// Random robustness problems with a false-alarm root and few ambiguous neurons.
std::vector<Problem> random_problems(std::uint64_t seed, std::size_t count) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u01(0.2, 0.8), eps(0.02, 0.25);
    std::vector<Problem> out;
    while (out.size() < count) {
        std::vector<std::size_t> w{2 + rng() % 3, 3 + rng() % 6};
        if (rng() % 2) w.push_back(3 + rng() % 4);
        w.push_back(2 + rng() % 2);
        Network net = t::random_net(rng, w);
        Vector c(net.input_dim());
        for (double& v : c) v = u01(rng);
        const Vector y = forward(net, c);
        const auto label = static_cast<std::size_t>(std::max_element(y.begin(), y.end()) - y.begin());
        Specification s = robustness_spec(c, eps(rng), label, 0.0, 1.0, net.output_dim());
        const std::size_t amb = root_ambiguous_neurons(net, s.region).size();
        if (amb < 2 || amb > 10) continue;
        const BoundResult root = linrelax_analyze(net, s.region, ConstraintSeq{}, s.property);
        if (root.p_hat >= 0 || (root.candidate && is_counterexample(net, s, *root.candidate))) continue;
        out.push_back({std::move(net), std::move(s)});
    }
    return out;
}

SearchConfig config(Strategy s) {
    SearchConfig cfg;
    cfg.strategy = s;
    cfg.timeout_seconds = 60;
    return cfg;
}

std::set<std::vector<std::pair<std::size_t, int>>> leaf_sets(const Network& net, const BabTree& tree) {
    std::set<std::vector<std::pair<std::size_t, int>>> out;
    for (const BabNode& n : tree.nodes()) {
        if (n.children) continue;
        std::vector<std::pair<std::size_t, int>> key;
        const ConstraintSeq gamma = tree.constraints_of(n.id);
        for (const auto& pc : gamma.items())
            key.emplace_back(net.flat_index(pc.neuron), pc.sign == PhaseSign::positive ? 1 : -1);
        std::sort(key.begin(), key.end());
        out.insert(key);
    }
    return out;
}

}  // namespace

TEST(Search, AffineRootResolvesVerified) {
    Network net({Layer{Matrix::from_rows({{1, -1}}), {0}, Activation::identity}});
    const Verdict v = verify(net, t::unit_box_spec(2, {LinearConstraint{{1.0}, 2.5}}), config(Strategy::mcts));
    EXPECT_EQ(v.outcome, Outcome::verified_true);
    EXPECT_EQ(v.stats.appver_calls, 1u);
    EXPECT_EQ(v.stats.nodes_expanded, 0u);
}

TEST(Search, RealCounterexampleAtRoot) {
    Network net({Layer{Matrix::from_rows({{1}}), {0}, Activation::identity}});
    const Specification s{InputRegion(Vector{-1}, Vector{1}), OutputProperty({LinearConstraint{{1.0}, 0.0}})};
    for (Strategy st : {Strategy::mcts, Strategy::bfs, Strategy::greedy}) {
        const Verdict v = verify(net, s, config(st));
        EXPECT_EQ(v.outcome, Outcome::violated_false);
        ASSERT_TRUE(v.counterexample);
        EXPECT_EQ(*v.counterexample, Vector{-1});
        EXPECT_EQ(v.stats.appver_calls, 1u);
    }
}

TEST(Search, AffineFalseAlarmFreeViolationUsesLp) {
    // p_hat < 0 with a valid corner is decided at the root; nothing else is needed.
    Network net({Layer{Matrix::from_rows({{1, -1}}), {0}, Activation::identity}});
    const Verdict v = verify(net, t::unit_box_spec(2, {LinearConstraint{{1.0}, 0.5}}), config(Strategy::mcts));
    EXPECT_EQ(v.outcome, Outcome::violated_false);
    EXPECT_EQ(*v.counterexample, (Vector{0, 1}));
}

TEST(Search, ToyFixtureMctsDescendsMostNegativeChild) {
    const Problem p = toy();
    SearchConfig cfg = config(Strategy::mcts);
    cfg.record_trace = true;
    const SearchRun run = run_search(p.net, p.spec, cfg);
    ASSERT_EQ(run.verdict.outcome, Outcome::violated_false);
    EXPECT_TRUE(is_counterexample(p.net, p.spec, *run.verdict.counterexample));
    EXPECT_EQ(run.verdict.stats.appver_calls, 5u);
    ASSERT_TRUE(run.tree);
    const BabTree& tree = *run.tree;
    const auto kids = *tree.node(0).children;
    EXPECT_LT(tree.node(kids[1]).p_hat, tree.node(kids[0]).p_hat);
    ASSERT_EQ(run.verdict.stats.trace.size(), 2u);
    EXPECT_EQ(run.verdict.stats.trace[0], tree.root());
    EXPECT_EQ(run.verdict.stats.trace[1], kids[1]);  // the r- child
    // The counterexample sits at depth 2 below r-.
    bool found = false;
    for (const BabNode& n : tree.nodes())
        if (n.status == NodeStatus::violated && !n.children) {
            EXPECT_EQ(n.depth, 2u);
            EXPECT_EQ(*n.parent, kids[1]);
            found = true;
        }
    EXPECT_TRUE(found);

    const Verdict bfs = verify(p.net, p.spec, config(Strategy::bfs));
    EXPECT_EQ(bfs.outcome, Outcome::violated_false);
    EXPECT_EQ(bfs.stats.appver_calls, 7u);
    EXPECT_GT(bfs.stats.appver_calls, run.verdict.stats.appver_calls);
}

TEST(Search, ToyFixtureRootIsFalseAlarmAndPositiveSideIsSafe) {
    const Problem p = toy();
    const BoundResult root = linrelax_analyze(p.net, p.spec.region, ConstraintSeq{}, p.spec.property);
    ASSERT_LT(root.p_hat, 0.0);
    ASSERT_TRUE(root.candidate);
    EXPECT_FALSE(is_counterexample(p.net, p.spec, *root.candidate));
    // Independent check with a dense grid: the r+ side of the first split, z2 >= 0, is safe.
    const std::vector<std::int8_t> plus{0, 0, 1};
    bool any = false;
    EXPECT_GE(t::grid_min_margin(p.net, p.spec, 400, &plus, &any), 0.0);
    EXPECT_TRUE(any);
    const std::vector<std::int8_t> minus{0, 0, -1};
    EXPECT_LT(t::grid_min_margin(p.net, p.spec, 400, &minus, &any), 0.0);
}

TEST(Search, GreedyOnToyFollowsRewards) {
    const Problem p = toy();
    SearchConfig g = config(Strategy::greedy);
    g.record_trace = true;
    SearchConfig m = config(Strategy::mcts);
    m.c = 0.0;
    m.record_trace = true;
    const SearchRun gr = run_search(p.net, p.spec, g);
    const SearchRun mr = run_search(p.net, p.spec, m);
    EXPECT_EQ(gr.verdict.stats.trace, mr.verdict.stats.trace);
    const auto kids = *gr.tree->node(0).children;
    EXPECT_GT(gr.tree->node(kids[1]).reward, gr.tree->node(kids[0]).reward);
    EXPECT_EQ(gr.verdict.stats.trace.back(), kids[1]);
}

TEST(Search, FirstStepExpandsRoot) {
    const Problem p = toy();
    Searcher s(p.net, p.spec, config(Strategy::mcts));
    ASSERT_FALSE(s.finished());
    EXPECT_EQ(s.stats().appver_calls, 1u);
    s.step();
    EXPECT_EQ(s.stats().appver_calls, 3u);
    EXPECT_EQ(s.tree()->node(0).subtree_size, 3u);
}

TEST(Search, SelectReluHeuristics) {
    Network net({Layer{Matrix(2, 1), Vector(2), Activation::relu}, Layer{Matrix(1, 2), Vector(1), Activation::identity}});
    const std::vector<Interval> b{{-1, 1}, {-0.1, 0.1}};
    EXPECT_EQ(select_relu(Heuristic::relax_area, net, b, ConstraintSeq{}), (NeuronRef{0, 0}));
    EXPECT_EQ(select_relu(Heuristic::widest, net, b, ConstraintSeq{}), (NeuronRef{0, 0}));
    const std::vector<Interval> one{{0.2, 1}, {-0.1, 0.3}};
    for (Heuristic h : {Heuristic::relax_area, Heuristic::widest, Heuristic::sequential})
        EXPECT_EQ(select_relu(h, net, one, ConstraintSeq{}), (NeuronRef{0, 1}));
    const std::vector<Interval> tie{{-1, 1}, {-1, 1}};
    for (Heuristic h : {Heuristic::relax_area, Heuristic::widest, Heuristic::sequential})
        EXPECT_EQ(select_relu(h, net, tie, ConstraintSeq{}), (NeuronRef{0, 0}));
    EXPECT_EQ(select_relu(Heuristic::relax_area, net, tie, ConstraintSeq({{{0, 0}, PhaseSign::positive}})),
              (NeuronRef{0, 1}));
    const std::vector<Interval> none{{0, 1}, {-1, 0}};
    EXPECT_THROW(select_relu(Heuristic::widest, net, none, ConstraintSeq{}), PreconditionError);
}

TEST(Search, StrategiesAgreeWithOracle) {
    const auto problems = random_problems(515, 60);
    std::size_t violated = 0;
    for (const auto& p : problems) {
        const OracleVerdict truth = enumerate_verdict(p.net, p.spec, 12);
        violated += !truth.verified;
        for (Strategy st : {Strategy::mcts, Strategy::greedy, Strategy::bfs})
            for (Domain d : {Domain::linrelax, Domain::interval}) {
                SearchConfig cfg = config(st);
                cfg.domain = d;
                const Verdict v = verify(p.net, p.spec, cfg);
                ASSERT_NE(v.outcome, Outcome::timeout);
                EXPECT_EQ(v.outcome == Outcome::verified_true, truth.verified) << to_string(st) << " " << to_string(d);
                EXPECT_EQ(v.stats.appver_calls, 1 + 2 * v.stats.nodes_expanded);
                if (v.outcome == Outcome::violated_false) {
                    ASSERT_TRUE(v.counterexample);
                    EXPECT_TRUE(is_counterexample(p.net, p.spec, *v.counterexample));
                }
            }
    }
    EXPECT_GT(violated, 5u);
    EXPECT_LT(violated, problems.size() - 5);
}

TEST(Search, HeuristicsAndPminModesStayCorrect) {
    const auto problems = random_problems(616, 25);
    for (const auto& p : problems) {
        const bool truth = enumerate_verdict(p.net, p.spec, 12).verified;
        for (Heuristic h : {Heuristic::relax_area, Heuristic::widest, Heuristic::sequential})
            for (PminMode pm : {PminMode::frozen_root, PminMode::running_min}) {
                SearchConfig cfg = config(Strategy::mcts);
                cfg.heuristic = h;
                cfg.pmin_mode = pm;
                const Verdict v = verify(p.net, p.spec, cfg);
                EXPECT_EQ(v.outcome == Outcome::verified_true, truth);
            }
    }
}

TEST(Search, InvariantsHoldAfterEveryStep) {
    const auto problems = random_problems(717, 20);
    for (const auto& p : problems)
        for (Strategy st : {Strategy::mcts, Strategy::bfs}) {
            Searcher s(p.net, p.spec, config(st));
            while (!s.finished()) {
                s.step();
                s.tree()->check_invariants();
                EXPECT_EQ(s.stats().appver_calls, 1 + 2 * s.stats().nodes_expanded);
                const BabNode& root = s.tree()->node(0);
                EXPECT_EQ(root.subtree_size, s.tree()->size());
            }
        }
}

TEST(Search, VerifiedInstancesProduceTheSameLeavesUnderBfsAndMcts) {
    const auto problems = random_problems(818, 40);
    int compared = 0;
    for (const auto& p : problems) {
        const SearchRun m = run_search(p.net, p.spec, config(Strategy::mcts));
        if (m.verdict.outcome != Outcome::verified_true || !m.tree) continue;
        const SearchRun b = run_search(p.net, p.spec, config(Strategy::bfs));
        ASSERT_EQ(b.verdict.outcome, Outcome::verified_true);
        EXPECT_EQ(leaf_sets(p.net, *m.tree), leaf_sets(p.net, *b.tree));
        EXPECT_EQ(m.verdict.stats.nodes_expanded, b.verdict.stats.nodes_expanded);
        ++compared;
    }
    EXPECT_GT(compared, 5);
}

TEST(Search, TimeoutAndNodeCapAreOutcomes) {
    const Problem p = toy();
    SearchConfig cfg = config(Strategy::bfs);
    cfg.timeout_seconds = 0.0;
    EXPECT_EQ(verify(p.net, p.spec, cfg).outcome, Outcome::timeout);
    cfg.timeout_seconds = 60;
    cfg.max_nodes = 3;
    const Verdict v = verify(p.net, p.spec, cfg);
    EXPECT_EQ(v.outcome, Outcome::timeout);
    EXPECT_EQ(v.stats.peak_tree_size, 3u);
}

TEST(Search, UnknownLeafModeCannotConcludeTrue) {
    const auto problems = random_problems(919, 80);
    int checked = 0;
    for (const auto& p : problems) {
        const Verdict exact = verify(p.net, p.spec, config(Strategy::mcts));
        if (exact.outcome != Outcome::verified_true || exact.stats.exact_leaves == 0) continue;
        SearchConfig cfg = config(Strategy::mcts);
        cfg.leaf_mode = LeafMode::unknown;
        EXPECT_EQ(verify(p.net, p.spec, cfg).outcome, Outcome::timeout);
        ++checked;
    }
    EXPECT_GT(checked, 0);
}

TEST(Search, DeterministicTraces) {
    const auto problems = random_problems(1001, 15);
    for (const auto& p : problems)
        for (Strategy st : {Strategy::mcts, Strategy::bfs, Strategy::greedy}) {
            SearchConfig cfg = config(st);
            cfg.record_trace = true;
            const Verdict a = verify(p.net, p.spec, cfg), b = verify(p.net, p.spec, cfg);
            EXPECT_EQ(a.outcome, b.outcome);
            EXPECT_EQ(a.stats.trace, b.stats.trace);
            EXPECT_EQ(a.stats.nodes_expanded, b.stats.nodes_expanded);
            EXPECT_EQ(a.counterexample, b.counterexample);
        }
}

TEST(Search, ConfigValidation) {
    const Problem p = toy();
    SearchConfig cfg;
    cfg.lambda = 1.5;
    EXPECT_THROW(verify(p.net, p.spec, cfg), PreconditionError);
    cfg.lambda = 0.5;
    cfg.c = -1;
    EXPECT_THROW(verify(p.net, p.spec, cfg), PreconditionError);
    EXPECT_THROW(verify(p.net, t::unit_box_spec(3, {LinearConstraint{{1.0}, 0}}), SearchConfig{}), DimensionError);
}
