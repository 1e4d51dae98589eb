#include <gtest/gtest.h>

#include <cmath>

#include "offirl/instances.hpp"
#include "offirl/metrics.hpp"

using namespace offirl;

namespace {

// All deterministic policies of a tiny instance.
std::vector<DeterministicPolicy> all_policies(Dims d) {
    std::vector<DeterministicPolicy> out;
    int total = 1;
    for (int i = 0; i < d.horizon * d.states; ++i) total *= d.actions;
    for (int code = 0; code < total; ++code) {
        DeterministicPolicy pi(d);
        int c = code;
        for (int h = 0; h < d.horizon; ++h)
            for (int s = 0; s < d.states; ++s) {
                pi(h, s) = c % d.actions;
                c /= d.actions;
            }
        out.push_back(pi);
    }
    return out;
}

}  // namespace

TEST(Metrics, Normalizer) {
    const Dims d{2, 2, 2};
    EXPECT_EQ(normalizer(RewardFunction(d), RewardFunction(d)), 0.0);
    SplitMix64 rng(51);
    const auto r = uniform_reward(d, rng);
    RewardFunction twice = r;
    for (int h = 0; h < 2; ++h)
        for (int s = 0; s < 2; ++s)
            for (int a = 0; a < 2; ++a) twice(h, s, a) *= 2;
    EXPECT_DOUBLE_EQ(normalizer(r, twice), 2 * r.sup_norm());
    const auto q = uniform_reward(d, rng);
    double scan = 0.0;
    for (double x : r.values()) scan = std::max(scan, std::abs(x));
    for (double x : q.values()) scan = std::max(scan, std::abs(x));
    EXPECT_EQ(normalizer(r, q), scan);
}

TEST(Metrics, DistanceD) {
    const Dims one{1, 1, 1};
    const auto mdp = MdpWithoutReward({1.0}, TransitionModel([] {
                                           TransitionModel p(Dims{1, 1, 1});
                                           p(0, 0, 0, 0) = 1.0;
                                           return p;
                                       }()));
    const auto vis = visitation(mdp, DeterministicPolicy(one, 0));
    const auto zb = supports(vis).triples;
    EXPECT_NEAR(dist_d(RewardFunction(one, 1.0), RewardFunction(one, 3.0), vis, zb), 2.0 / 3.0, 1e-15);
    EXPECT_EQ(dist_d(RewardFunction(one, 0.0), RewardFunction(one, 0.0), vis, zb), 0.0);

    // One covered and one uncovered action: both terms saturate.
    const Dims two{1, 2, 1};
    const auto mdp2 = MdpWithoutReward({1.0}, TransitionModel([] {
                                            TransitionModel p(Dims{1, 2, 1});
                                            p(0, 0, 0, 0) = p(0, 0, 1, 0) = 1.0;
                                            return p;
                                        }()));
    const auto vis2 = visitation(mdp2, DeterministicPolicy(two, 0));
    EXPECT_DOUBLE_EQ(dist_d(RewardFunction(two, 1.0), RewardFunction(two, -1.0), vis2, supports(vis2).triples), 4.0);

    SplitMix64 rng(52);
    for (int trial = 0; trial < 20; ++trial) {
        const Dims d = random_dims(rng, 4, 3, 4);
        const auto inst = random_instance(d, rng(), 0.5);
        const auto vb = visitation(inst.mdp, inst.behavioral);
        const auto z = supports(vb).triples;
        for (int j = 0; j < 500; ++j) {
            const auto x = uniform_reward(d, rng);
            const auto y = uniform_reward(d, rng);
            const double dxy = dist_d(x, y, vb, z);
            EXPECT_GE(dxy, 0.0);
            EXPECT_LE(dxy, 4.0 * d.horizon + 1e-12);
            EXPECT_LE(dxy, 2.0 * dist_dinf(x, y) + 1e-12);
            EXPECT_NEAR(dxy, dist_d(y, x, vb, z), 1e-15);
            EXPECT_EQ(dist_d(x, x, vb, z), 0.0);
        }
    }
    EXPECT_THROW(dist_d(RewardFunction({2, 2, 2}), RewardFunction({2, 2, 3}), vis, zb), DimensionMismatch);
}

TEST(Metrics, DistanceDInf) {
    SplitMix64 rng(53);
    const Dims d{3, 2, 3};
    const auto r = uniform_reward(d, rng);
    EXPECT_EQ(dist_dinf(r, r), 0.0);
    double stage_norms = 0.0;
    for (int h = 0; h < d.horizon; ++h) {
        double m = 0.0;
        for (double x : r.stage(h)) m = std::max(m, std::abs(x));
        stage_norms += m;
    }
    EXPECT_NEAR(dist_dinf(r, -r), 2.0 * stage_norms / r.sup_norm(), 1e-12);
    const Dims flat{3, 2, 1};
    const auto r1 = uniform_reward(flat, rng);
    EXPECT_NEAR(dist_dinf(r1, -r1), 2.0, 1e-15);

    const Dims two{1, 2, 2};
    RewardFunction x(two), y(two);
    x(0, 0, 0) = 1.0;
    x(1, 0, 1) = -4.0;
    y(0, 0, 1) = 2.0;
    y(1, 0, 1) = -1.0;
    // stage gaps: max(1, 2) = 2 and max(0, 3) = 3; M = 4
    EXPECT_DOUBLE_EQ(dist_dinf(x, y), 5.0 / 4.0);
    EXPECT_THROW(dist_dinf(x, RewardFunction(d)), DimensionMismatch);
}

TEST(Metrics, FullSupportSeparatesPoints) {
    SplitMix64 rng(54);
    const Dims d{3, 2, 2};
    const auto mdp = random_mdp(d, 5, 1.0);
    const auto vb = visitation(mdp, StochasticPolicy::uniform(d));
    const auto z = supports(vb).triples;
    ASSERT_EQ(z.size(), d.triple_count());
    const auto x = uniform_reward(d, rng);
    auto y = x;
    y(1, 2, 1) += 1e-3;
    EXPECT_GT(dist_d(x, y, vb, z), 0.0);
}

TEST(Metrics, Hausdorff) {
    SplitMix64 rng(55);
    const Dims d{3, 2, 2};
    const MetricContext dinf{MetricKind::DInf, std::nullopt, std::nullopt};
    RewardPanel a, b;
    for (int i = 0; i < 3; ++i) {
        a.push_back({"a" + std::to_string(i), uniform_reward(d, rng)});
        b.push_back({"b" + std::to_string(i), uniform_reward(d, rng)});
    }
    EXPECT_EQ(hausdorff(a, a, dinf), 0.0);
    EXPECT_EQ(hausdorff({a[0]}, {b[1]}, dinf), dist_dinf(a[0].reward, b[1].reward));

    double forward = 0.0, backward = 0.0;
    for (const auto& x : a) {
        double m = 1e300;
        for (const auto& y : b) m = std::min(m, dist_dinf(x.reward, y.reward));
        forward = std::max(forward, m);
    }
    for (const auto& y : b) {
        double m = 1e300;
        for (const auto& x : a) m = std::min(m, dist_dinf(x.reward, y.reward));
        backward = std::max(backward, m);
    }
    EXPECT_DOUBLE_EQ(hausdorff(a, b, dinf), std::max(forward, backward));
    EXPECT_THROW(hausdorff(a, {}, dinf), EmptyPanel);

    const auto mdp = random_mdp(d, 6);
    const auto vb = visitation(mdp, StochasticPolicy::uniform(d));
    const MetricContext dd{MetricKind::D, vb, supports(vb).triples};
    EXPECT_EQ(hausdorff(b, b, dd), 0.0);
    EXPECT_THROW(hausdorff(a, b, MetricContext{MetricKind::D, std::nullopt, std::nullopt}), SchemaError);
}

TEST(Metrics, ValueGapZeroCases) {
    SplitMix64 rng(56);
    for (int trial = 0; trial < 30; ++trial) {
        const Dims d = random_dims(rng, 4, 3, 4);
        const auto mdp = random_mdp(d, rng());
        const auto r = uniform_reward(d, rng);
        EXPECT_NEAR(dg_vstar(r, r, mdp), 0.0, 1e-12);
        auto shifted = r;
        for (int h = 0; h < d.horizon; ++h) {
            const double c = rng.uniform(-2, 2);
            for (int s = 0; s < d.states; ++s)
                for (int a = 0; a < d.actions; ++a) shifted(h, s, a) += c;
        }
        EXPECT_NEAR(dg_vstar(r, shifted, mdp), 0.0, 1e-12);
    }
}

TEST(Metrics, ValueGapMatchesPolicyEnumeration) {
    SplitMix64 rng(57);
    for (int trial = 0; trial < 40; ++trial) {
        const Dims d{2, 2, 2};
        const auto mdp = random_mdp(d, rng());
        const auto r = uniform_reward(d, rng);
        // Coarse estimate so that ties among optimal actions occur.
        RewardFunction r_hat(d);
        for (int h = 0; h < 2; ++h)
            for (int s = 0; s < 2; ++s)
                for (int a = 0; a < 2; ++a) r_hat(h, s, a) = static_cast<double>(rng.below(2));
        const auto opt_hat = optimal_q_value(mdp, r_hat);
        const auto opt = optimal_q_value(mdp, r);
        double worst = 0.0;
        for (const auto& pi : all_policies(d)) {
            bool optimal = true;
            for (int h = 0; h < 2; ++h)
                for (int s = 0; s < 2; ++s)
                    optimal = optimal && opt_hat.Q(h, s, pi(h, s)) >= opt_hat.V(h, s) - 1e-9;
            if (!optimal) continue;
            const auto val = policy_q_value(mdp, pi, r);
            for (int h = 0; h < 2; ++h)
                for (int s = 0; s < 2; ++s) worst = std::max(worst, opt.V(h, s) - val.V(h, s));
        }
        EXPECT_NEAR(dg_vstar(r, r_hat, mdp), worst / normalizer(r, r_hat), 1e-12);
    }
}
