#pragma once

// Exhaustive and closed-form reference checks for small instances. Nothing
// here is estimated from data: every function takes the true model.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "offirl/error.hpp"
#include "offirl/mdp.hpp"

namespace offirl {

inline constexpr double kDefaultEnumerationCap = 1e5;

inline StateStageSet expert_state_support(const MdpWithoutReward& mdp, const DeterministicPolicy& expert) {
    return supports(visitation(mdp, expert)).states;
}

/// J(π^E) attains J* within tol.
inline bool feasible_membership(const MdpWithoutReward& mdp, const DeterministicPolicy& expert,
                                const RewardFunction& r, double tol = kValueTol) {
    return utility(mdp, expert, r) >= optimal_utility(mdp, r) - tol;
}

/// Expert action is Q*-greedy on the expert support.
inline bool feasible_membership_qstar(const MdpWithoutReward& mdp, const DeterministicPolicy& expert,
                                      const StateStageSet& expert_support, const RewardFunction& r,
                                      double tol = kValueTol) {
    const ValueTable q = optimal_q_value(mdp, r);
    for (const auto& e : expert_support.elements()) {
        const double qe = q.Q(e.stage, e.state, expert(e.stage, e.state));
        for (int a = 0; a < mdp.actions(); ++a)
            if (qe < q.Q(e.stage, e.state, a) - tol) return false;
    }
    return true;
}

/// Expert action is Q^π-greedy on the expert support.
inline bool expert_dominates(const MdpWithoutReward& mdp, const DeterministicPolicy& expert,
                             const StateStageSet& expert_support, const DeterministicPolicy& pi,
                             const RewardFunction& r, double tol) {
    const ValueTable q = policy_q_value(mdp, pi, r);
    for (const auto& e : expert_support.elements()) {
        const double qe = q.Q(e.stage, e.state, expert(e.stage, e.state));
        for (int a = 0; a < mdp.actions(); ++a)
            if (qe < q.Q(e.stage, e.state, a) - tol) return false;
    }
    return true;
}

namespace detail {

/// Calls `visit` with every assignment of `radix` values to `slots` slots.
/// Returns false as soon as `visit` does.
inline bool for_each_assignment(std::size_t slots, int radix, double cap,
                                const std::function<bool(const std::vector<int>&)>& visit) {
    const double total = std::pow(static_cast<double>(radix), static_cast<double>(slots));
    if (total > cap) throw EnumerationTooLarge(total);
    std::vector<int> digits(slots, 0);
    while (true) {
        if (!visit(digits)) return false;
        std::size_t i = 0;
        while (i < slots && ++digits[i] == radix) digits[i++] = 0;
        if (i == slots) return true;
    }
}

inline std::vector<StateStage> cells_outside(const StateStageSet& set) {
    std::vector<StateStage> out;
    const Dims d = set.dims();
    for (int h = 0; h < d.horizon; ++h)
        for (int s = 0; s < d.states; ++s)
            if (!set.contains(h, s)) out.push_back({h, s});
    return out;
}

/// Triples without a known row that still have a successor stage.
inline std::vector<Triple> free_rows(const TripleSet& zb) {
    std::vector<Triple> out;
    const Dims d = zb.dims();
    for (int h = 0; h + 1 < d.horizon; ++h)
        for (int s = 0; s < d.states; ++s)
            for (int a = 0; a < d.actions; ++a)
                if (!zb.contains(h, s, a)) out.push_back({h, s, a});
    return out;
}

inline int argmax_index(std::span<const double> v) {
    return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

inline int argmin_index(std::span<const double> v) {
    return static_cast<int>(std::min_element(v.begin(), v.end()) - v.begin());
}

}  // namespace detail

/// Expert dominance under every deterministic completion of the expert
/// outside its support.
inline bool feasible_membership_completions(const MdpWithoutReward& mdp, const DeterministicPolicy& expert,
                                            const StateStageSet& expert_support, const RewardFunction& r,
                                            double cap = kDefaultEnumerationCap, double tol = kValueTol) {
    const auto cells = detail::cells_outside(expert_support);
    return detail::for_each_assignment(cells.size(), mdp.actions(), cap, [&](const std::vector<int>& digits) {
        DeterministicPolicy pi = expert;
        for (std::size_t i = 0; i < cells.size(); ++i) pi(cells[i].stage, cells[i].state) = digits[i];
        return expert_dominates(mdp, expert, expert_support, pi, r, tol);
    });
}

/// p^M, p^m, π^M, π^m for one reward.
struct OracleConstruction {
    TransitionModel p_cap_m;
    TransitionModel p_m;
    DeterministicPolicy pi_cap_m;
    DeterministicPolicy pi_m;
};

inline OracleConstruction build_extremes(const MdpWithoutReward& mdp, const DeterministicPolicy& expert,
                                         const TripleSet& zb, const RewardFunction& r) {
    const Dims d = mdp.dims();
    require_same(zb.dims(), d, "support vs mdp");
    require_same(r.dims(), d, "reward vs mdp");
    const StateStageSet se = expert_state_support(mdp, expert);
    for (const auto& e : se.elements())
        if (!zb.contains(e.stage, e.state, expert(e.stage, e.state))) throw ExpertTripleUncovered(e.state, e.stage);

    OracleConstruction oc{mdp.transitions(), mdp.transitions(), DeterministicPolicy(d), DeterministicPolicy(d)};
    std::vector<double> v_hi(static_cast<std::size_t>(d.states), 0.0);
    std::vector<double> v_lo(static_cast<std::size_t>(d.states), 0.0);
    std::vector<double> q_hi(static_cast<std::size_t>(d.actions)), q_lo(static_cast<std::size_t>(d.actions));

    for (int h = d.horizon - 1; h >= 0; --h) {
        const bool last = h + 1 == d.horizon;
        const int up = last ? 0 : detail::argmax_index(v_hi);
        const int down = last ? 0 : detail::argmin_index(v_lo);
        std::vector<double> nv_hi(v_hi.size()), nv_lo(v_lo.size());
        for (int s = 0; s < d.states; ++s) {
            for (int a = 0; a < d.actions; ++a) {
                if (!last && !zb.contains(h, s, a)) {
                    oc.p_cap_m.set_unit_row(h, s, a, up);
                    oc.p_m.set_unit_row(h, s, a, down);
                }
                q_hi[a] = r(h, s, a) + (last ? 0.0 : detail::expect(oc.p_cap_m.row(h, s, a), v_hi));
                q_lo[a] = r(h, s, a) + (last ? 0.0 : detail::expect(oc.p_m.row(h, s, a), v_lo));
            }
            const bool on = se.contains(h, s);
            oc.pi_cap_m(h, s) = on ? expert(h, s) : detail::argmax_index(q_hi);
            oc.pi_m(h, s) = on ? expert(h, s) : detail::argmax_index(q_lo);
            nv_hi[s] = q_hi[oc.pi_cap_m(h, s)];
            nv_lo[s] = q_lo[oc.pi_m(h, s)];
        }
        v_hi = std::move(nv_hi);
        v_lo = std::move(nv_lo);
    }
    return oc;
}

struct SubSuper {
    bool in_sub = false;
    bool in_super = false;
};

inline SubSuper sub_super_membership(const MdpWithoutReward& mdp, const DeterministicPolicy& expert,
                                     const TripleSet& zb, const RewardFunction& r, double tol = kValueTol) {
    const OracleConstruction oc = build_extremes(mdp, expert, zb, r);
    const StateStageSet se = expert_state_support(mdp, expert);
    const ValueTable qe = policy_q_value(mdp, expert, r);
    const ValueTable q_hi = policy_q_value(mdp.with_transitions(oc.p_cap_m), oc.pi_cap_m, r);
    const ValueTable q_lo = policy_q_value(mdp.with_transitions(oc.p_m), oc.pi_m, r);
    SubSuper out{true, true};
    for (const auto& e : se.elements()) {
        const int ae = expert(e.stage, e.state);
        const double v = qe.Q(e.stage, e.state, ae);
        for (int a = 0; a < mdp.actions(); ++a) {
            if (a == ae) continue;
            if (v < q_hi.Q(e.stage, e.state, a) - tol) out.in_sub = false;
            if (v < q_lo.Q(e.stage, e.state, a) - tol) out.in_super = false;
        }
    }
    return out;
}

/// Quantifies over every deterministic completion of the rows outside `zb`.
inline SubSuper brute_force_sub_super(const MdpWithoutReward& mdp, const DeterministicPolicy& expert,
                                      const TripleSet& zb, const RewardFunction& r,
                                      double cap = kDefaultEnumerationCap, double tol = kValueTol) {
    const auto rows = detail::free_rows(zb);
    SubSuper out{true, false};
    TransitionModel p = mdp.transitions();
    detail::for_each_assignment(rows.size(), mdp.states(), cap, [&](const std::vector<int>& digits) {
        for (std::size_t i = 0; i < rows.size(); ++i) p.set_unit_row(rows[i].stage, rows[i].state, rows[i].action, digits[i]);
        const bool ok = feasible_membership(mdp.with_transitions(p), expert, r, tol);
        out.in_sub = out.in_sub && ok;
        out.in_super = out.in_super || ok;
        return true;
    });
    return out;
}

/// Expert action Q*-greedy in every (state, stage).
inline bool old_feasible_membership(const MdpWithoutReward& mdp, const DeterministicPolicy& expert,
                                    const RewardFunction& r, double tol = kValueTol) {
    const ValueTable q = optimal_q_value(mdp, r);
    for (int h = 0; h < mdp.horizon(); ++h)
        for (int s = 0; s < mdp.states(); ++s) {
            const double qe = q.Q(h, s, expert(h, s));
            if (qe < q.V(h, s) - tol) return false;
        }
    return true;
}

/// Some completion of the expert outside its support makes r old-feasible.
inline bool fs_union_crosscheck(const MdpWithoutReward& mdp, const DeterministicPolicy& expert,
                                const StateStageSet& expert_support, const RewardFunction& r,
                                double cap = kDefaultEnumerationCap, double tol = kValueTol) {
    const auto cells = detail::cells_outside(expert_support);
    const bool none = detail::for_each_assignment(cells.size(), mdp.actions(), cap, [&](const std::vector<int>& digits) {
        DeterministicPolicy pi = expert;
        for (std::size_t i = 0; i < cells.size(); ++i) pi(cells[i].stage, cells[i].state) = digits[i];
        return !old_feasible_membership(mdp, pi, r, tol);
    });
    return !none;
}

struct OldSubsetWitness {
    std::vector<double> k;           // one per stage
    std::map<int, double> r_bar;     // keyed by initial-support state
};

/// Almost-constant structure: outside the behavioral state support every
/// action earns k_h; inside, the expert action earns x(h,s) and the others
/// at most that, with x = r̄_s at the first stage and k_h later.
inline std::optional<OldSubsetWitness> old_subset_characterization(const RewardFunction& r,
                                                                   const DeterministicPolicy& expert,
                                                                   const StateStageSet& behavioral_states,
                                                                   const std::vector<int>& mu0_support,
                                                                   double tol = kValueTol) {
    const Dims d = r.dims();
    require_same(behavioral_states.dims(), d, "behavioral states vs reward");
    OldSubsetWitness w;
    w.k.assign(static_cast<std::size_t>(d.horizon), 0.0);
    for (int h = 0; h < d.horizon; ++h) {
        int outside = -1;
        for (int s = 0; s < d.states && outside < 0; ++s)
            if (!behavioral_states.contains(h, s)) outside = s;
        if (outside < 0) throw HypothesisUnmet("stage " + std::to_string(h) + " has no state outside the behavioral support");
        w.k[static_cast<std::size_t>(h)] = r(h, outside, 0);
    }
    for (int s : mu0_support) w.r_bar[s] = r(0, s, expert(0, s));

    for (int h = 0; h < d.horizon; ++h)
        for (int s = 0; s < d.states; ++s) {
            const double kh = w.k[static_cast<std::size_t>(h)];
            if (!behavioral_states.contains(h, s)) {
                for (int a = 0; a < d.actions; ++a)
                    if (std::abs(r(h, s, a) - kh) > tol) return std::nullopt;
                continue;
            }
            double x = kh;
            if (h == 0) {
                const auto it = w.r_bar.find(s);
                if (it == w.r_bar.end()) return std::nullopt;
                x = it->second;
            }
            const int ae = expert(h, s);
            if (std::abs(r(h, s, ae) - x) > tol) return std::nullopt;
            for (int a = 0; a < d.actions; ++a)
                if (a != ae && r(h, s, a) > x + tol) return std::nullopt;
        }
    return w;
}

/// Subset of the old feasible set checked on a grid: every completion of the
/// unknown rows with probabilities in multiples of `step`, and every expert
/// completion (all actions optimal outside the expert support).
inline bool old_subset_grid_membership(const MdpWithoutReward& mdp, const DeterministicPolicy& expert,
                                       const TripleSet& zb, const RewardFunction& r, double step,
                                       double cap = kDefaultEnumerationCap, double tol = kValueTol) {
    const Dims d = mdp.dims();
    const int ticks = static_cast<int>(std::lround(1.0 / step));
    std::vector<std::vector<int>> points;
    std::vector<int> cur(static_cast<std::size_t>(d.states), 0);
    std::function<void(int, int)> compose = [&](int i, int left) {
        if (i + 1 == d.states) {
            cur[static_cast<std::size_t>(i)] = left;
            points.push_back(cur);
            return;
        }
        for (int v = 0; v <= left; ++v) {
            cur[static_cast<std::size_t>(i)] = v;
            compose(i + 1, left - v);
        }
    };
    compose(0, ticks);

    const StateStageSet se = expert_state_support(mdp, expert);
    const auto rows = detail::free_rows(zb);
    TransitionModel p = mdp.transitions();
    return detail::for_each_assignment(rows.size(), static_cast<int>(points.size()), cap, [&](const std::vector<int>& digits) {
        for (std::size_t i = 0; i < rows.size(); ++i) {
            auto row = p.row(rows[i].stage, rows[i].state, rows[i].action);
            const auto& pt = points[static_cast<std::size_t>(digits[i])];
            for (int n = 0; n < d.states; ++n) row[n] = pt[static_cast<std::size_t>(n)] / static_cast<double>(ticks);
        }
        const ValueTable q = optimal_q_value(mdp.with_transitions(p), r);
        for (int h = 0; h < d.horizon; ++h)
            for (int s = 0; s < d.states; ++s) {
                if (se.contains(h, s)) {
                    if (q.Q(h, s, expert(h, s)) < q.V(h, s) - tol) return false;
                } else {
                    for (int a = 0; a < d.actions; ++a)
                        if (q.Q(h, s, a) < q.V(h, s) - tol) return false;
                }
            }
        return true;
    });
}

/// Expert action carries the largest immediate reward on the expert support.
inline bool greedy_property_check(const RewardFunction& r, const DeterministicPolicy& expert,
                                  const StateStageSet& expert_support, double tol = kValueTol) {
    for (const auto& e : expert_support.elements()) {
        const double re = r(e.stage, e.state, expert(e.stage, e.state));
        for (int a = 0; a < r.dims().actions; ++a)
            if (re < r(e.stage, e.state, a) - tol) return false;
    }
    return true;
}

}  // namespace offirl
