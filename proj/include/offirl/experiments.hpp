#pragma once

// Seeded experiment drivers shared by the command-line tool and the
// acceptance suite. Trials fan out over threads; every trial derives its own
// seed, so results do not depend on the thread count.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

#include "offirl/estimation.hpp"
#include "offirl/instances.hpp"
#include "offirl/mdp.hpp"
#include "offirl/membership.hpp"
#include "offirl/oracle.hpp"
#include "offirl/rng.hpp"
#include "offirl/trajectory.hpp"

namespace offirl {

/// Runs body(i) for i in [0, n) on up to `threads` workers (0 = hardware).
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body, unsigned threads = 0) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

struct OracleSweepConfig {
    int instances = 100;
    int uniform_rewards = 20;
    int mixed_rewards = 20;
    int max_states = 4;
    int max_actions = 3;
    int max_horizon = 3;
    std::uint64_t seed = 1;
    double cap = kDefaultEnumerationCap;
    double injected_bonus = 10.0;
    double tol = kValueTol;
};

struct OracleSweepReport {
    std::int64_t queries = 0;
    std::int64_t irlo_disagreements = 0;
    std::int64_t squeeze_violations = 0;
    std::int64_t brute_force_checked = 0;
    std::int64_t brute_force_disagreements = 0;
    std::int64_t brute_force_skipped = 0;
    std::int64_t zero_bonus_mismatches = 0;
    std::int64_t widened = 0;
    std::int64_t widening_violations = 0;
    std::int64_t in_sub_count = 0;
    std::int64_t in_super_count = 0;

    OracleSweepReport& operator+=(const OracleSweepReport& o) {
        queries += o.queries;
        irlo_disagreements += o.irlo_disagreements;
        squeeze_violations += o.squeeze_violations;
        brute_force_checked += o.brute_force_checked;
        brute_force_disagreements += o.brute_force_disagreements;
        brute_force_skipped += o.brute_force_skipped;
        zero_bonus_mismatches += o.zero_bonus_mismatches;
        widened += o.widened;
        widening_violations += o.widening_violations;
        in_sub_count += o.in_sub_count;
        in_super_count += o.in_super_count;
        return *this;
    }

    bool ok() const {
        return irlo_disagreements == 0 && squeeze_violations == 0 && brute_force_disagreements == 0 &&
               zero_bonus_mismatches == 0 && widening_violations == 0;
    }
};

/// Exact-input sweep: IRLO on the true model against the closed-form and
/// enumerated oracles, plus the PIRLO zero-bonus and inflated-bonus cases.
inline OracleSweepReport verify_oracle(const OracleSweepConfig& cfg) {
    std::vector<OracleSweepReport> parts(static_cast<std::size_t>(cfg.instances));
    parallel_for(parts.size(), [&](std::size_t i) {
        SplitMix64 rng(cfg.seed, i);
        const Dims dims = random_dims(rng, cfg.max_states, cfg.max_actions, cfg.max_horizon);
        const Instance inst = random_instance(dims, rng());
        const TripleSet zb = inst.behavioral_support();
        const auto em = std::make_shared<const EmpiricalModel>(model_from_truth(inst.mdp, inst.expert, zb));
        const ConfidenceSpec irlo = build_confidence_irlo(em);
        const ConfidenceSpec pirlo0 = build_confidence_pirlo(em, BonusTable(dims, 0.5));
        BonusTable wide(dims, 0.5);
        for (const auto& t : zb.elements()) wide(t.stage, t.state, t.action) = std::min(2.0, cfg.injected_bonus);
        const ConfidenceSpec pirlo_wide = build_confidence_pirlo(em, wide);

        auto& rep = parts[i];
        const int total = cfg.uniform_rewards + cfg.mixed_rewards;
        for (int j = 0; j < total; ++j) {
            const RewardFunction r =
                j < cfg.uniform_rewards ? uniform_reward(dims, rng) : mixed_reward(inst.expert, rng);
            ++rep.queries;
            const Verdict vi = check_reward(r, irlo, cfg.tol);
            const SubSuper truth = sub_super_membership(inst.mdp, inst.expert, zb, r, cfg.tol);
            const bool feasible = feasible_membership(inst.mdp, inst.expert, r, cfg.tol);
            rep.in_sub_count += truth.in_sub;
            rep.in_super_count += truth.in_super;
            if (vi.in_cap != truth.in_sub || vi.in_union != truth.in_super) ++rep.irlo_disagreements;
            if ((truth.in_sub && !feasible) || (feasible && !truth.in_super)) ++rep.squeeze_violations;
            try {
                const SubSuper bf = brute_force_sub_super(inst.mdp, inst.expert, zb, r, cfg.cap, cfg.tol);
                ++rep.brute_force_checked;
                if (bf.in_sub != truth.in_sub || bf.in_super != truth.in_super) ++rep.brute_force_disagreements;
            } catch (const EnumerationTooLarge&) {
                ++rep.brute_force_skipped;
            }
            const Verdict vp = check_reward(r, pirlo0, cfg.tol);
            if (vp.in_cap != vi.in_cap || vp.in_union != vi.in_union) ++rep.zero_bonus_mismatches;
            const Verdict vw = check_reward(r, pirlo_wide, cfg.tol);
            if ((vw.in_cap && !vi.in_cap) || (vi.in_union && !vw.in_union)) ++rep.widening_violations;
            if (vw.in_cap != vi.in_cap || vw.in_union != vi.in_union) ++rep.widened;
        }
    });
    OracleSweepReport total;
    for (const auto& p : parts) total += p;
    return total;
}

/// Draws expert and behavioral datasets for one trial.
struct TrialData {
    Dataset expert;
    Dataset behavioral;
};

inline TrialData draw_trial(const Instance& inst, std::size_t tau_e, std::size_t tau_b, std::uint64_t seed) {
    return {simulate(inst.mdp, inst.expert, tau_e, derive_seed(seed, 0), Role::Expert),
            simulate(inst.mdp, inst.behavioral, tau_b, derive_seed(seed, 1), Role::Behavioral)};
}

struct MonotonicityReport {
    int trials = 0;
    int trials_with_violation = 0;
    int coverage_failures = 0;
    std::int64_t queries = 0;
    std::int64_t violations = 0;
    std::int64_t feasible_hp = 0;
    std::int64_t infeasible_hp = 0;
    std::int64_t undecided = 0;

    double violation_rate() const { return trials == 0 ? 0.0 : static_cast<double>(trials_with_violation) / trials; }
};

/// Per trial: fresh datasets, PIRLO at confidence delta, and the check
/// inner ⊆ true feasible ⊆ outer on a reward panel.
inline MonotonicityReport monotonicity_trials(const Instance& inst, std::size_t tau_e, std::size_t tau_b, double delta,
                                              int trials, int panel_size, std::uint64_t seed) {
    struct Trial {
        bool violated = false;
        bool uncovered = false;
        std::int64_t violations = 0, feasible = 0, infeasible = 0, undecided = 0, queries = 0;
    };
    std::vector<Trial> out(static_cast<std::size_t>(trials));
    const Dims dims = inst.mdp.dims();
    parallel_for(out.size(), [&](std::size_t t) {
        const std::uint64_t ts = derive_seed(seed, t);
        const TrialData data = draw_trial(inst, tau_e, tau_b, ts);
        auto& tr = out[t];
        ConfidenceSpec spec;
        try {
            spec = build_confidence_pirlo(estimate(data.expert, data.behavioral, dims), delta);
        } catch (const ExpertTripleUncovered&) {
            tr.uncovered = true;
            tr.violated = true;
            return;
        }
        SplitMix64 rng(ts, 2);
        for (int j = 0; j < panel_size; ++j) {
            const RewardFunction r = mixed_reward(inst.expert, rng);
            const Verdict v = check_reward(r, spec);
            const bool truth = feasible_membership(inst.mdp, inst.expert, r);
            ++tr.queries;
            switch (sanity_check(v)) {
                case SanityLabel::FeasibleWHP: ++tr.feasible; break;
                case SanityLabel::InfeasibleWHP: ++tr.infeasible; break;
                default: ++tr.undecided;
            }
            if ((v.in_cap && !truth) || (truth && !v.in_union)) {
                ++tr.violations;
                tr.violated = true;
            }
        }
    });
    MonotonicityReport rep;
    rep.trials = trials;
    for (const auto& tr : out) {
        rep.trials_with_violation += tr.violated;
        rep.coverage_failures += tr.uncovered;
        rep.queries += tr.queries;
        rep.violations += tr.violations;
        rep.feasible_hp += tr.feasible;
        rep.infeasible_hp += tr.infeasible;
        rep.undecided += tr.undecided;
    }
    return rep;
}

struct ConvergencePoint {
    std::size_t tau = 0;
    std::int64_t queries = 0;
    std::int64_t disagreements = 0;
    int support_recovered = 0;
    int monotonicity_violations = 0;
    int coverage_failures = 0;
    int trials = 0;
    double seconds = 0.0;

    double disagreement_rate() const { return queries == 0 ? 0.0 : static_cast<double>(disagreements) / queries; }
    double violation_rate() const { return trials == 0 ? 0.0 : static_cast<double>(monotonicity_violations) / trials; }
};

/// For each τ (= τ^E = τ^b): IRLO membership against the exact inner/outer
/// sets on a fixed panel, exact support recovery, and PIRLO monotonicity.
inline std::vector<ConvergencePoint> convergence_experiment(const Instance& inst, const std::vector<std::size_t>& taus,
                                                            int panel_size, int trials, double delta,
                                                            std::uint64_t seed) {
    const Dims dims = inst.mdp.dims();
    const TripleSet zb = inst.behavioral_support();
    const StateStageSet se = inst.expert_support();

    std::vector<RewardFunction> panel;
    std::vector<SubSuper> truth;
    std::vector<bool> feasible;
    SplitMix64 rng(seed, 0xC0FFEE);
    for (int j = 0; j < panel_size; ++j) {
        panel.push_back(mixed_reward(inst.expert, rng));
        truth.push_back(sub_super_membership(inst.mdp, inst.expert, zb, panel.back()));
        feasible.push_back(feasible_membership(inst.mdp, inst.expert, panel.back()));
    }

    std::vector<ConvergencePoint> points;
    for (std::size_t k = 0; k < taus.size(); ++k) {
        const auto start = std::chrono::steady_clock::now();
        struct Trial {
            std::int64_t disagreements = 0;
            bool recovered = false, violated = false, uncovered = false;
        };
        std::vector<Trial> out(static_cast<std::size_t>(trials));
        parallel_for(out.size(), [&](std::size_t t) {
            const std::uint64_t ts = derive_seed(derive_seed(seed, k + 1), t);
            const TrialData data = draw_trial(inst, taus[k], taus[k], ts);
            const auto em = std::make_shared<const EmpiricalModel>(estimate(data.expert, data.behavioral, dims));
            auto& tr = out[t];
            tr.recovered = em->expert_support == se && em->behavioral_support == zb;
            const ConfidenceSpec irlo = build_confidence_irlo(em);
            for (std::size_t j = 0; j < panel.size(); ++j) {
                const Verdict v = check_reward(panel[j], irlo);
                if (v.in_cap != truth[j].in_sub || v.in_union != truth[j].in_super) ++tr.disagreements;
            }
            try {
                const ConfidenceSpec pirlo = build_confidence_pirlo(em, delta);
                for (std::size_t j = 0; j < panel.size(); ++j) {
                    const Verdict v = check_reward(panel[j], pirlo);
                    if ((v.in_cap && !feasible[j]) || (feasible[j] && !v.in_union)) tr.violated = true;
                }
            } catch (const ExpertTripleUncovered&) {
                tr.uncovered = true;
                tr.violated = true;
            }
        });
        ConvergencePoint pt;
        pt.tau = taus[k];
        pt.trials = trials;
        for (const auto& tr : out) {
            pt.queries += static_cast<std::int64_t>(panel.size());
            pt.disagreements += tr.disagreements;
            pt.support_recovered += tr.recovered;
            pt.monotonicity_violations += tr.violated;
            pt.coverage_failures += tr.uncovered;
        }
        pt.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        points.push_back(pt);
    }
    return points;
}

/// S=4, A=2, H=3 with dense stochastic transitions and a behavioral policy
/// that plays every action; every visitation entry is at least 0.05.
inline Instance reference_stochastic_instance() {
    const Dims dims{4, 2, 3};
    TransitionModel p(dims);
    for (int h = 0; h < dims.horizon; ++h)
        for (int s = 0; s < dims.states; ++s)
            for (int a = 0; a < dims.actions; ++a) {
                const int main = (s + 2 * a + h + 1) % dims.states;
                for (int n = 0; n < dims.states; ++n) p(h, s, a, n) = n == main ? 0.55 : 0.15;
            }
    MdpWithoutReward mdp(std::vector<double>(4, 0.25), std::move(p));
    DeterministicPolicy expert(dims);
    for (int h = 0; h < dims.horizon; ++h)
        for (int s = 0; s < dims.states; ++s) expert(h, s) = (s + h) % 2;
    StochasticPolicy behavioral(dims);
    for (int h = 0; h < dims.horizon; ++h)
        for (int s = 0; s < dims.states; ++s)
            for (int a = 0; a < dims.actions; ++a) behavioral(h, s, a) = a == expert(h, s) ? 0.6 : 0.4;
    return {std::move(mdp), std::move(expert), std::move(behavioral)};
}

/// S=4, A=2, H=3 with deterministic transitions, a random start state and
/// a behavioral policy that explores only some states, so part of the
/// model stays unknown at any sample size.
inline Instance reference_convergence_instance() {
    const Dims dims{4, 2, 3};
    TransitionModel p(dims);
    for (int h = 0; h < dims.horizon; ++h)
        for (int s = 0; s < dims.states; ++s)
            for (int a = 0; a < dims.actions; ++a) p.set_unit_row(h, s, a, a == 0 ? (s + 1) % 4 : (s + 3) % 4);
    MdpWithoutReward mdp({0.6, 0.3, 0.1, 0.0}, std::move(p));
    DeterministicPolicy expert(dims);
    for (int h = 0; h < dims.horizon; ++h)
        for (int s = 0; s < dims.states; ++s) expert(h, s) = (s + h) % 2 == 0 ? 0 : 1;
    StochasticPolicy behavioral(dims);
    for (int h = 0; h < dims.horizon; ++h)
        for (int s = 0; s < dims.states; ++s) {
            const int ae = expert(h, s);
            const double explore = s == 0 ? 0.25 : (s == 2 ? 0.15 : 0.0);
            behavioral(h, s, ae) = 1.0 - explore;
            behavioral(h, s, 1 - ae) += explore;
        }
    return {std::move(mdp), std::move(expert), std::move(behavioral)};
}

}  // namespace offirl
