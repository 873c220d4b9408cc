#include <gtest/gtest.h>

#include <random>

#include "abonn/io.hpp"
#include "abonn/leaf.hpp"
#include "abonn/oracle.hpp"
#include "support.hpp"

using namespace abonn;
namespace t = abonn::testing;

namespace {

ConstraintSeq full_pattern(const Network& net, const Vector& x) {
    const Vector z = pre_activations(net, x);
    std::vector<PhaseConstraint> items;
    for (std::size_t i = 0; i < z.size(); ++i)
        items.push_back({net.neuron_at(i), z[i] >= 0 ? PhaseSign::positive : PhaseSign::negative});
    return ConstraintSeq(std::move(items));
}

bool in_pattern(const Network& net, const ConstraintSeq& gamma, const Vector& x) {
    const Vector z = pre_activations(net, x);
    for (const auto& pc : gamma.items()) {
        const double v = z[net.flat_index(pc.neuron)];
        if (pc.sign == PhaseSign::positive ? v < 0 : v > 0) return false;
    }
    return true;
}

}  // namespace

TEST(Leaf, AffineNetworkVerified) {
    Network net({Layer{Matrix::from_rows({{1, -1}}), {0}, Activation::identity}});
    const Specification s = t::unit_box_spec(2, {LinearConstraint{{1.0}, 2.5}});
    const LeafResult r = exact_leaf_check(net, s, ConstraintSeq{});
    EXPECT_TRUE(r.verified);
    EXPECT_NEAR(r.min_margin, 1.5, 1e-9);
}

TEST(Leaf, TwoTwoOneBothPositiveAgainstGrid) {
    const Network net = t::net_221();
    const Specification s = t::unit_box_spec(2, {LinearConstraint{{1.0}, 2.5}});
    const ConstraintSeq gamma({{{0, 0}, PhaseSign::positive}, {{0, 1}, PhaseSign::positive}});
    const LeafResult r = exact_leaf_check(net, s, gamma);
    const std::vector<std::int8_t> phases{1, 1};
    bool any = false;
    const double grid = t::grid_min_margin(net, s, 200, &phases, &any);
    ASSERT_TRUE(any);
    EXPECT_TRUE(r.verified);
    EXPECT_LE(r.min_margin, grid + 1e-9);
    EXPECT_NEAR(r.min_margin, 2.0, 1e-7);
    EXPECT_NEAR(grid, 2.0, 1e-12);

    // Tightening the property by 2.1 turns the same region into a violation.
    const Specification tight = t::unit_box_spec(2, {LinearConstraint{{1.0}, 0.4}});
    const LeafResult v = exact_leaf_check(net, tight, gamma);
    ASSERT_FALSE(v.verified);
    ASSERT_TRUE(v.witness);
    EXPECT_TRUE(is_counterexample(net, tight, *v.witness));
}

TEST(Leaf, UnsatisfiablePhasesVerifiedByInfeasibility) {
    // z0 = x - 0.6 and z1 = 0.4 - x cannot both be non-negative.
    Network net({Layer{Matrix::from_rows({{1}, {-1}}), {-0.6, 0.4}, Activation::relu},
                 Layer{Matrix::from_rows({{-1, -1}}), {0}, Activation::identity}});
    const Specification s{InputRegion(Vector{0}, Vector{1}), OutputProperty({LinearConstraint{{1.0}, 0.0}})};
    const ConstraintSeq gamma({{{0, 0}, PhaseSign::positive}, {{0, 1}, PhaseSign::positive}});
    EXPECT_FALSE(interval_analyze(net, s.region, gamma, s.property).infeasible);
    const LeafResult r = exact_leaf_check(net, s, gamma);
    EXPECT_TRUE(r.verified);
    EXPECT_EQ(r.min_margin, pos_inf_margin);
    EXPECT_FALSE(r.witness);
}

TEST(Leaf, AmbiguousUnfixedNeuronRejected) {
    EXPECT_THROW(exact_leaf_check(t::net_221(), t::unit_box_spec(2, {LinearConstraint{{1.0}, 2.5}}), ConstraintSeq{}),
                 PreconditionError);
}

TEST(Leaf, RandomFullySplitRegions) {
    std::mt19937_64 rng(606);
    int violated = 0, verified = 0;
    for (int trial = 0; trial < 300; ++trial) {
        const Network net = t::random_net(rng, t::random_widths(rng));
        const InputRegion box = t::random_box(rng, net.input_dim());
        const Vector seed = t::sample_point(rng, box);
        const ConstraintSeq gamma = full_pattern(net, seed);
        // Offset chosen so the seed point's margin is near zero.
        OutputProperty prop = t::random_property(rng, net.output_dim());
        const double m = margin(prop, forward(net, seed));
        for (auto& c : prop.constraints) c.offset -= m - 0.05 * std::uniform_real_distribution<double>(-1, 1)(rng);
        const Specification s{box, prop};
        const LeafResult r = exact_leaf_check(net, s, gamma);
        if (!r.verified) {
            ++violated;
            ASSERT_TRUE(r.witness);
            EXPECT_TRUE(is_counterexample(net, s, *r.witness));
            continue;
        }
        ++verified;
        EXPECT_LE(r.min_margin, margin(prop, forward(net, seed)) + 1e-9);
        for (int k = 0; k < 200; ++k) {
            const Vector x = t::sample_point(rng, box);
            if (in_pattern(net, gamma, x)) { EXPECT_GE(margin(prop, forward(net, x)), -1e-9); }
        }
    }
    EXPECT_GT(violated, 30);
    EXPECT_GT(verified, 30);
}

TEST(Oracle, FixturesAndReferenceNet) {
    const Network toy = load_network_file(t::fixture("toy.json"));
    const Specification toy_spec = load_spec(read_text_file(t::fixture("toy_spec.json")), 1);
    const OracleVerdict v = enumerate_verdict(toy, toy_spec);
    EXPECT_FALSE(v.verified);
    ASSERT_TRUE(v.witness);
    EXPECT_TRUE(is_counterexample(toy, toy_spec, *v.witness));
    EXPECT_EQ(v.ambiguous, 2u);

    const OracleVerdict ref = enumerate_verdict(t::net_221(), t::unit_box_spec(2, {LinearConstraint{{1.0}, 2.5}}));
    EXPECT_TRUE(ref.verified);
    EXPECT_EQ(ref.ambiguous, 1u);  // neuron 0 has bounds [0, 2]
    EXPECT_EQ(ref.assignments, 2u);
}

TEST(Oracle, AgreesWithDenseGridOnTwoInputNets) {
    std::mt19937_64 rng(4040);
    int agree_violated = 0, agree_verified = 0;
    for (int trial = 0; trial < 150; ++trial) {
        std::vector<std::size_t> w{2, static_cast<std::size_t>(2 + trial % 5), 1};
        if (trial % 3 == 0) w.insert(w.begin() + 2, 3);
        const Network net = t::random_net(rng, w);
        const InputRegion box = t::random_box(rng, 2);
        const Specification probe{box, OutputProperty({LinearConstraint{{1.0}, 0.0}})};
        // Place the threshold near the grid minimum so both verdicts occur.
        const double gmin = t::grid_min_margin(net, probe, 60);
        const double off = -gmin + std::uniform_real_distribution<double>(-0.2, 0.2)(rng);
        const Specification s{box, OutputProperty({LinearConstraint{{1.0}, off}})};
        if (root_ambiguous_neurons(net, box).size() > 12) continue;
        const OracleVerdict v = enumerate_verdict(net, s, 12);
        const double grid = t::grid_min_margin(net, s, 300);
        if (grid < -1e-9) {
            EXPECT_FALSE(v.verified) << "grid found a violation the oracle missed, trial " << trial;
            ++agree_violated;
        }
        if (v.verified) {
            ++agree_verified;
        } else {
            ASSERT_TRUE(v.witness);
            EXPECT_TRUE(is_counterexample(net, s, *v.witness));
        }
    }
    EXPECT_GT(agree_violated, 20);
    EXPECT_GT(agree_verified, 20);
}

TEST(Oracle, RefusesTooManyAmbiguousNeurons) {
    std::mt19937_64 rng(1);
    const Network net = t::random_net(rng, {3, 40, 1}, 2.0);
    const Specification s{InputRegion(Vector(3, -1.0), Vector(3, 1.0)), OutputProperty({LinearConstraint{{1.0}, 0.0}})};
    ASSERT_GT(root_ambiguous_neurons(net, s.region).size(), 3u);
    EXPECT_THROW(enumerate_verdict(net, s, 3), PreconditionError);
}
