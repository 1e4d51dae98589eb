#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "offirl/estimation.hpp"
#include "offirl/instances.hpp"
#include "offirl/membership.hpp"
#include "offirl/oracle.hpp"

using namespace offirl;

namespace {

// Brute force over the constraint set on a 1e-3 grid (three next states).
double grid_extreme(const std::vector<double>& v, const std::vector<double>& p, double budget,
                    const std::vector<char>& allowed, bool maximize) {
    double best = maximize ? -1e300 : 1e300;
    const int n = 1000;
    for (int i = 0; i <= n; ++i)
        for (int j = 0; i + j <= n; ++j) {
            const double q[3] = {i / 1000.0, j / 1000.0, (n - i - j) / 1000.0};
            double dist = 0.0, val = 0.0;
            bool ok = true;
            for (int k = 0; k < 3; ++k) {
                if (!allowed[k] && q[k] > 0.0) ok = false;
                dist += std::abs(q[k] - p[k]);
                val += q[k] * v[k];
            }
            if (!ok || dist > budget + 1e-9) continue;
            best = maximize ? std::max(best, val) : std::min(best, val);
        }
    return best;
}

EmpiricalModel truth_model(const Instance& inst) {
    return model_from_truth(inst.mdp, inst.expert, inst.behavioral_support());
}

}  // namespace

TEST(Membership, ActionSetsFollowExpertSupport) {
    const Dims d{3, 2, 2};
    EmpiricalModel em;
    em.dims = d;
    em.expert_support = StateStageSet(d);
    em.expert_policy = PartialPolicy(d);
    const auto none = restricted_action_sets(em);
    for (int h = 0; h < 2; ++h)
        for (int s = 0; s < 3; ++s) EXPECT_FALSE(none.is_singleton(h, s));

    for (int h = 0; h < 2; ++h)
        for (int s = 0; s < 3; ++s) {
            em.expert_support.insert(h, s);
            em.expert_policy(h, s) = (h + s) % 2;
        }
    const auto all = restricted_action_sets(em);
    for (int h = 0; h < 2; ++h)
        for (int s = 0; s < 3; ++s) {
            EXPECT_TRUE(all.is_singleton(h, s));
            EXPECT_TRUE(all.allows(h, s, (h + s) % 2));
        }

    const auto inst = random_instance({4, 3, 3}, 31, 0.4);
    const auto mixed_em = truth_model(inst);
    const auto mixed = restricted_action_sets(mixed_em);
    for (int h = 0; h < 3; ++h)
        for (int s = 0; s < 4; ++s)
            for (int a = 0; a < 3; ++a) {
                const bool expected =
                    !mixed_em.expert_support.contains(h, s) || a == mixed_em.expert_policy(h, s);
                EXPECT_EQ(mixed.allows(h, s, a), expected);
            }
}

TEST(Membership, InnerZeroAndFullBudget) {
    const std::vector<double> v{0.3, -1.0, 2.0, 0.5};
    const std::vector<double> p{0.1, 0.4, 0.2, 0.3};
    const auto zero = inner_linear_max_l1(v, p, 0.0);
    EXPECT_EQ(zero.q, p);
    EXPECT_NEAR(zero.value, 0.03 - 0.4 + 0.4 + 0.15, 1e-12);
    const auto full = inner_linear_max_l1(v, p, 2.0);
    EXPECT_EQ(full.q, (std::vector<double>{0, 0, 1, 0}));
    EXPECT_DOUBLE_EQ(full.value, 2.0);
    const auto low = inner_linear_min_l1(v, p, 2.0);
    EXPECT_DOUBLE_EQ(low.value, -1.0);

    const std::vector<char> allowed{1, 1, 0, 1};
    const std::vector<double> p2{0.1, 0.4, 0.0, 0.5};
    const auto restricted = inner_linear_max_l1(v, p2, 2.0, std::span<const char>(allowed));
    EXPECT_EQ(restricted.q, (std::vector<double>{0, 0, 0, 1}));
}

TEST(Membership, InnerWorkedExample) {
    const auto sol = inner_linear_max_l1(std::vector<double>{1, 0, -1}, std::vector<double>{0.5, 0.3, 0.2}, 0.4);
    EXPECT_NEAR(sol.q[0], 0.7, 1e-12);
    EXPECT_NEAR(sol.q[1], 0.3, 1e-12);
    EXPECT_NEAR(sol.q[2], 0.0, 1e-12);
    EXPECT_NEAR(sol.value, 0.7, 1e-12);
    const std::vector<char> all{1, 1, 1};
    EXPECT_NEAR(grid_extreme({1, 0, -1}, {0.5, 0.3, 0.2}, 0.4, all, true), 0.7, 1e-9);
}

TEST(Membership, InnerMatchesGridSearch) {
    SplitMix64 rng(32);
    for (int trial = 0; trial < 40; ++trial) {
        std::vector<double> v(3), p(3);
        for (auto& x : v) x = rng.uniform(-1, 1);
        double total = 0.0;
        for (auto& x : p) total += (x = std::round(rng.uniform() * 10) / 10.0 + 0.1);
        for (auto& x : p) x = std::round(1000 * x / total) / 1000.0;
        p[2] = 1.0 - p[0] - p[1];
        std::vector<char> allowed{1, 1, 1};
        if (trial % 3 == 0 && p[1] > 0.0) {
            p[0] += p[2];
            p[2] = 0.0;
            allowed[2] = 0;
        }
        const double budget = std::round(rng.uniform(0, 2) * 100) / 100.0;
        const auto hi = inner_linear_max_l1(v, p, budget, std::span<const char>(allowed));
        const auto lo = inner_linear_min_l1(v, p, budget, std::span<const char>(allowed));
        EXPECT_NEAR(hi.value, grid_extreme(v, p, budget, allowed, true), 2e-3);
        EXPECT_NEAR(lo.value, grid_extreme(v, p, budget, allowed, false), 2e-3);
        EXPECT_GE(hi.value, grid_extreme(v, p, budget, allowed, true) - 1e-9);
        EXPECT_LE(lo.value, grid_extreme(v, p, budget, allowed, false) + 1e-9);
        double l1 = 0.0, mass = 0.0;
        for (int k = 0; k < 3; ++k) {
            l1 += std::abs(hi.q[k] - p[k]);
            mass += hi.q[k];
            EXPECT_GE(hi.q[k], 0.0);
        }
        EXPECT_LE(l1, budget + 1e-12);
        EXPECT_NEAR(mass, 1.0, 1e-12);
    }
}

TEST(Membership, InnerRejectsDisallowedMass) {
    const std::vector<char> allowed{1, 0};
    EXPECT_THROW(inner_linear_max_l1(std::vector<double>{0, 1}, std::vector<double>{0.5, 0.5}, 0.1,
                                     std::span<const char>(allowed)),
                 SupportInfeasible);
}

TEST(Membership, FullCoverageCollapsesToRestrictedOptimum) {
    SplitMix64 rng(33);
    for (int trial = 0; trial < 20; ++trial) {
        const Dims d = random_dims(rng, 4, 3, 4);
        const auto mdp = random_mdp(d, rng());
        const auto expert = random_deterministic_policy(d, rng);
        const auto em = model_from_truth(mdp, expert, TripleSet::full(d));
        const auto r = uniform_reward(d, rng);
        const auto sets = restricted_action_sets(em);
        const auto ref = optimal_q_value(mdp, r, sets);
        for (const auto& spec : {build_confidence_irlo(em), build_confidence_pirlo(em, BonusTable(d, 0.5))}) {
            const auto qb = evi_bounds(r, spec, sets);
            for (std::size_t i = 0; i < ref.q.size(); ++i) {
                EXPECT_NEAR(qb.upper.q[i], ref.q[i], 1e-12);
                EXPECT_NEAR(qb.lower.q[i], ref.q[i], 1e-12);
            }
        }
    }
}

TEST(Membership, LowerNeverExceedsUpper) {
    SplitMix64 rng(34);
    for (int trial = 0; trial < 50; ++trial) {
        const Dims d = random_dims(rng, 4, 3, 4);
        const auto inst = random_instance(d, rng());
        const auto em = estimate(simulate(inst.mdp, inst.expert, 50, rng()),
                                 simulate(inst.mdp, inst.behavioral, 200, rng()), d);
        const auto r = mixed_reward(inst.expert, rng);
        for (const auto& spec : {build_confidence_irlo(em), build_confidence_pirlo(em, 0.1)}) {
            const auto qb = evi_bounds(r, spec, restricted_action_sets(em));
            for (std::size_t i = 0; i < qb.upper.q.size(); ++i) EXPECT_LE(qb.lower.q[i], qb.upper.q[i] + 1e-9);
            for (int s = 0; s < d.states; ++s)
                for (int a = 0; a < d.actions; ++a) {
                    EXPECT_EQ(qb.upper.Q(d.horizon - 1, s, a), r(d.horizon - 1, s, a));
                    EXPECT_EQ(qb.lower.Q(d.horizon - 1, s, a), r(d.horizon - 1, s, a));
                }
        }
    }
}

TEST(Membership, SingleFreeRowMatchesEnumeration) {
    SplitMix64 rng(35);
    for (int trial = 0; trial < 30; ++trial) {
        const Dims d{3, 2, 2};
        const auto mdp = random_mdp(d, rng());
        const auto expert = random_deterministic_policy(d, rng);
        TripleSet zb = TripleSet::full(d);
        // Remove one first-stage row that the expert does not use.
        TripleSet known(d);
        const int s_free = rng.below(3);
        const int a_free = 1 - expert(0, s_free);
        for (const auto& t : zb.elements())
            if (!(t.stage == 0 && t.state == s_free && t.action == a_free)) known.insert(t.stage, t.state, t.action);
        const auto em = model_from_truth(mdp, expert, known);
        const auto r = uniform_reward(d, rng);
        const auto sets = restricted_action_sets(em);
        const auto qb = evi_bounds(r, build_confidence_irlo(em), sets);
        double hi = -1e300, lo = 1e300;
        for (int n = 0; n < 3; ++n) {
            TransitionModel p = mdp.transitions();
            p.set_unit_row(0, s_free, a_free, n);
            const auto q = optimal_q_value(mdp.with_transitions(p), r, sets);
            hi = std::max(hi, q.Q(0, s_free, a_free));
            lo = std::min(lo, q.Q(0, s_free, a_free));
        }
        EXPECT_NEAR(qb.upper.Q(0, s_free, a_free), hi, 1e-12);
        EXPECT_NEAR(qb.lower.Q(0, s_free, a_free), lo, 1e-12);
    }
}

TEST(Membership, SpecMismatchDetected) {
    const auto inst = random_instance({3, 2, 2}, 36);
    const auto em = truth_model(inst);
    const auto qb = evi_bounds(RewardFunction(em.dims), build_confidence_irlo(em), restricted_action_sets(em));
    EXPECT_THROW(check_membership(qb, em, Algorithm::PIRLO), SpecMismatch);
    EXPECT_NO_THROW(check_membership(qb, em, Algorithm::IRLO));
}

TEST(Membership, ConstantRewardsAreInBothSets) {
    SplitMix64 rng(37);
    for (int trial = 0; trial < 30; ++trial) {
        const Dims d = random_dims(rng, 4, 3, 3);
        const auto inst = random_instance(d, rng());
        const auto em = estimate(simulate(inst.mdp, inst.expert, 100, rng()),
                                 simulate(inst.mdp, inst.behavioral, 400, rng()), d);
        const RewardFunction r(d, rng.uniform(-3, 3));
        for (const auto& spec : {build_confidence_irlo(em), build_confidence_pirlo(em, 0.1)}) {
            const auto v = check_reward(r, spec);
            EXPECT_TRUE(v.in_cap);
            EXPECT_TRUE(v.in_union);
        }
    }
}

TEST(Membership, CloningRewardAndItsNegation) {
    const Dims d{5, 2, 5};
    const auto mdp = chain_mdp(d);
    const DeterministicPolicy expert(d, 0);
    SplitMix64 rng(38);
    const auto behavioral = covering_behavioral_policy(expert, rng, 1.0, 0.5);
    const auto em = estimate(simulate(mdp, expert, 10, 1), simulate(mdp, behavioral, 2000, 2), d);
    const auto bc = behavioral_cloning_reward(em.expert_policy, em.expert_support);
    for (const auto& spec : {build_confidence_irlo(em), build_confidence_pirlo(em, 0.1)}) {
        const auto yes = check_reward(bc, spec);
        EXPECT_TRUE(yes.in_union && yes.in_cap);
        const auto no = check_reward(-bc, spec);
        EXPECT_FALSE(no.in_union || no.in_cap);
    }
}

TEST(Membership, SanityLabels) {
    EXPECT_EQ(sanity_check({true, true, Algorithm::PIRLO}), SanityLabel::FeasibleWHP);
    EXPECT_EQ(sanity_check({false, false, Algorithm::PIRLO}), SanityLabel::InfeasibleWHP);
    EXPECT_EQ(sanity_check({true, false, Algorithm::PIRLO}), SanityLabel::Undecided);
    EXPECT_THROW(sanity_check({true, true, Algorithm::IRLO}), SpecMismatch);
}

TEST(Membership, PirloInnerImpliesOuter) {
    SplitMix64 rng(39);
    int covered = 0;
    for (int trial = 0; trial < 40; ++trial) {
        const Dims d = random_dims(rng, 4, 3, 3);
        const auto inst = random_instance(d, rng());
        const auto em = estimate(simulate(inst.mdp, inst.expert, 50, rng()),
                                 simulate(inst.mdp, inst.behavioral, 200, rng()), d);
        ConfidenceSpec spec;
        try {
            spec = build_confidence_pirlo(em, 0.1);
        } catch (const ExpertTripleUncovered&) {
            continue;
        }
        ++covered;
        for (int j = 0; j < 20; ++j) {
            const auto v = check_reward(mixed_reward(inst.expert, rng), spec);
            EXPECT_TRUE(!v.in_cap || v.in_union);
        }
    }
    EXPECT_GT(covered, 10);
}

TEST(Membership, LargerBonusesOnlyWiden) {
    SplitMix64 rng(40);
    int flips = 0;
    for (int trial = 0; trial < 40; ++trial) {
        const Dims d = random_dims(rng, 4, 3, 3);
        const auto inst = random_instance(d, rng());
        const auto em = std::make_shared<const EmpiricalModel>(estimate(
            simulate(inst.mdp, inst.expert, 100, rng()), simulate(inst.mdp, inst.behavioral, 3000, rng()), d));
        const auto base = bonus_table(*em, 0.1).scaled(0.1);
        const auto s1 = build_confidence_pirlo(em, base);
        const auto s2 = build_confidence_pirlo(em, base.scaled(2));
        const auto s4 = build_confidence_pirlo(em, base.scaled(4));
        for (int j = 0; j < 20; ++j) {
            const auto r = mixed_reward(inst.expert, rng);
            const auto v1 = check_reward(r, s1), v2 = check_reward(r, s2), v4 = check_reward(r, s4);
            EXPECT_TRUE(!v2.in_cap || v1.in_cap);
            EXPECT_TRUE(!v4.in_cap || v2.in_cap);
            EXPECT_TRUE(!v1.in_union || v2.in_union);
            EXPECT_TRUE(!v2.in_union || v4.in_union);
            flips += (v1.in_cap != v4.in_cap) + (v1.in_union != v4.in_union);
        }
    }
    EXPECT_GT(flips, 0);
}

TEST(Membership, OperationCountWithinBudget) {
    SplitMix64 rng(41);
    int covered = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const Dims d{2 + rng.below(6), 1 + rng.below(4), 2 + rng.below(4)};
        const auto inst = random_instance(d, rng());
        const auto em = estimate(simulate(inst.mdp, inst.expert, 50, rng()),
                                 simulate(inst.mdp, inst.behavioral, 200, rng()), d);
        ConfidenceSpec spec;
        try {
            spec = build_confidence_pirlo(em, 0.1);
        } catch (const ExpertTripleUncovered&) {
            continue;
        }
        ++covered;
        EviStats stats;
        evi_bounds(uniform_reward(d, rng), spec, restricted_action_sets(em), &stats);
        const double nominal = 2.0 * (d.horizon - 1) * d.states * d.actions;
        EXPECT_LE(stats.inner_solves, 4 * nominal);
        EXPECT_GE(stats.inner_solves, nominal);
        const double per_sort = d.states * std::ceil(std::log2(d.states) + 1);
        EXPECT_LE(stats.comparisons, 4 * nominal * per_sort);
    }
    EXPECT_GT(covered, 5);
}
