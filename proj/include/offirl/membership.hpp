#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "offirl/error.hpp"
#include "offirl/estimation.hpp"
#include "offirl/mdp.hpp"

namespace offirl {

/// Singleton {π̂E_h(s)} on the expert support, every action elsewhere.
inline ActionSets restricted_action_sets(const EmpiricalModel& em) {
    ActionSets sets(em.dims);
    for (const auto& e : em.expert_support.elements()) sets.restrict_to(e.stage, e.state, em.expert_policy(e.stage, e.state));
    return sets;
}

struct InnerSolution {
    std::vector<double> q;
    double value = 0.0;
};

/// Operation counters for one EVI pass.
struct EviStats {
    std::int64_t inner_solves = 0;
    std::int64_t comparisons = 0;
};

namespace detail {

inline InnerSolution l1_extreme(std::span<const double> values, std::span<const double> p_hat, double budget,
                                std::optional<std::span<const char>> allowed, bool maximize, EviStats* stats) {
    const std::size_t n = values.size();
    if (p_hat.size() != n) throw DimensionMismatch("value and distribution lengths differ");
    auto is_allowed = [&](std::size_t i) { return !allowed || (*allowed)[i] != 0; };
    auto key = [&](std::size_t i) { return maximize ? values[i] : -values[i]; };

    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < n; ++i) {
        if (!is_allowed(i)) {
            if (p_hat[i] > 0.0) throw SupportInfeasible("empirical row puts mass on a disallowed next state");
            continue;
        }
        if (!best || key(i) > key(*best)) best = i;
    }
    if (!best) throw SupportInfeasible("no allowed next state");

    InnerSolution out;
    out.q.assign(p_hat.begin(), p_hat.end());
    double excess = std::min(std::clamp(budget, 0.0, 2.0) / 2.0, 1.0 - p_hat[*best]);
    if (excess > 0.0) {
        out.q[*best] += excess;
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::int64_t cmp = 0;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
            ++cmp;
            return key(x) < key(y);
        });
        if (stats) stats->comparisons += cmp;
        for (std::size_t i : order) {
            if (excess <= 0.0) break;
            if (i == *best) continue;
            if (out.q[i] <= excess + kSupportThreshold) {
                excess -= out.q[i];
                out.q[i] = 0.0;
            } else {
                out.q[i] -= excess;
                excess = 0.0;
            }
        }
    }
    for (std::size_t i = 0; i < n; ++i) out.value += out.q[i] * values[i];
    if (stats) ++stats->inner_solves;
    return out;
}

}  // namespace detail

/// argmax of q·values over the simplex points within ℓ1 distance `budget` of
/// p_hat whose support lies in `allowed`.
inline InnerSolution inner_linear_max_l1(std::span<const double> values, std::span<const double> p_hat, double budget,
                                         std::optional<std::span<const char>> allowed = std::nullopt,
                                         EviStats* stats = nullptr) {
    return detail::l1_extreme(values, p_hat, budget, allowed, true, stats);
}

inline InnerSolution inner_linear_min_l1(std::span<const double> values, std::span<const double> p_hat, double budget,
                                         std::optional<std::span<const char>> allowed = std::nullopt,
                                         EviStats* stats = nullptr) {
    return detail::l1_extreme(values, p_hat, budget, allowed, false, stats);
}

/// Upper and lower Q over the confidence set. `v` holds the max over the
/// allowed actions of each table.
struct QBounds {
    ConfidenceKind kind = ConfidenceKind::EquivalenceClass;
    ValueTable upper;
    ValueTable lower;
};

inline QBounds evi_bounds(const RewardFunction& reward, const ConfidenceSpec& spec, const ActionSets& action_sets,
                          EviStats* stats = nullptr) {
    const EmpiricalModel& em = spec.model();
    const Dims d = em.dims;
    require_same(reward.dims(), d, "reward vs model");
    require_same(action_sets.dims(), d, "action sets vs model");
    action_sets.validate();
    if (spec.kind == ConfidenceKind::L1Ball && (!spec.bonuses || !spec.allowed_next)) {
        throw SpecMismatch("l1-ball confidence set without bonuses");
    }

    QBounds qb{spec.kind, ValueTable(d), ValueTable(d)};
    std::vector<double> next_up(static_cast<std::size_t>(d.states), 0.0);
    std::vector<double> next_lo(static_cast<std::size_t>(d.states), 0.0);
    double max_up = 0.0, min_lo = 0.0;

    for (int h = d.horizon - 1; h >= 0; --h) {
        const bool last = h + 1 == d.horizon;
        for (int s = 0; s < d.states; ++s) {
            const bool expert_state = em.is_expert_state(h, s);
            for (int a = 0; a < d.actions; ++a) {
                double up = reward(h, s, a);
                double lo = up;
                if (!last) {
                    if (em.behavioral_support.contains(h, s, a)) {
                        const auto row = em.p_hat.row(h, s, a);
                        if (spec.kind == ConfidenceKind::EquivalenceClass) {
                            up += detail::expect(row, next_up);
                            lo += detail::expect(row, next_lo);
                            if (stats) stats->inner_solves += 2;
                        } else {
                            const double b = (*spec.bonuses)(h, s, a);
                            std::optional<std::span<const char>> allowed;
                            if (expert_state && a == em.expert_policy(h, s)) allowed = spec.allowed_row(h, s);
                            up += inner_linear_max_l1(next_up, row, b, allowed, stats).value;
                            lo += inner_linear_min_l1(next_lo, row, b, allowed, stats).value;
                        }
                    } else {
                        up += max_up;
                        lo += min_lo;
                        if (stats) stats->inner_solves += 2;
                    }
                }
                qb.upper.Q(h, s, a) = up;
                qb.lower.Q(h, s, a) = lo;
            }
            double vu = -std::numeric_limits<double>::infinity();
            double vl = -std::numeric_limits<double>::infinity();
            for (int a = 0; a < d.actions; ++a) {
                if (!action_sets.allows(h, s, a)) continue;
                vu = std::max(vu, qb.upper.Q(h, s, a));
                vl = std::max(vl, qb.lower.Q(h, s, a));
            }
            qb.upper.V(h, s) = vu;
            qb.lower.V(h, s) = vl;
        }
        for (int s = 0; s < d.states; ++s) {
            next_up[static_cast<std::size_t>(s)] = qb.upper.V(h, s);
            next_lo[static_cast<std::size_t>(s)] = qb.lower.V(h, s);
        }
        max_up = *std::max_element(next_up.begin(), next_up.end());
        min_lo = *std::min_element(next_lo.begin(), next_lo.end());
    }
    return qb;
}

enum class Algorithm { IRLO, PIRLO };

inline const char* to_string(Algorithm a) { return a == Algorithm::IRLO ? "irlo" : "pirlo"; }

struct Verdict {
    bool in_union = true;
    bool in_cap = true;
    Algorithm algorithm = Algorithm::IRLO;
};

/// Compares the expert action against every alternative on the expert
/// support. A reward leaves the outer set when even the most favourable
/// expert value falls below the least favourable alternative, and leaves the
/// inner set when the least favourable expert value falls below the most
/// favourable alternative.
inline Verdict check_membership(const QBounds& qb, const EmpiricalModel& em, Algorithm algo,
                                double tol = kValueTol) {
    const bool matches = (algo == Algorithm::IRLO) == (qb.kind == ConfidenceKind::EquivalenceClass);
    if (!matches) throw SpecMismatch(std::string("bounds were not computed for ") + to_string(algo));
    require_same(qb.upper.dims, em.dims, "bounds vs model");

    Verdict v;
    v.algorithm = algo;
    for (const auto& e : em.expert_support.elements()) {
        const int ae = em.expert_policy(e.stage, e.state);
        const double e_up = qb.upper.Q(e.stage, e.state, ae);
        const double e_lo = qb.lower.Q(e.stage, e.state, ae);
        for (int a = 0; a < em.dims.actions; ++a) {
            if (a == ae) continue;
            if (e_up < qb.lower.Q(e.stage, e.state, a) - tol) v.in_union = false;
            if (e_lo < qb.upper.Q(e.stage, e.state, a) - tol) v.in_cap = false;
        }
    }
    return v;
}

/// Action sets, bounds and verdict in one call.
inline Verdict check_reward(const RewardFunction& reward, const ConfidenceSpec& spec, double tol = kValueTol) {
    const Algorithm algo = spec.kind == ConfidenceKind::EquivalenceClass ? Algorithm::IRLO : Algorithm::PIRLO;
    const QBounds qb = evi_bounds(reward, spec, restricted_action_sets(spec.model()));
    return check_membership(qb, spec.model(), algo, tol);
}

enum class SanityLabel { FeasibleWHP, InfeasibleWHP, Undecided };

inline const char* to_string(SanityLabel l) {
    switch (l) {
        case SanityLabel::FeasibleWHP: return "feasible";
        case SanityLabel::InfeasibleWHP: return "infeasible";
        default: return "undecided";
    }
}

inline SanityLabel sanity_check(const Verdict& v) {
    if (v.algorithm != Algorithm::PIRLO) throw SpecMismatch("sanity labels need a pirlo verdict");
    if (v.in_cap) return SanityLabel::FeasibleWHP;
    if (!v.in_union) return SanityLabel::InfeasibleWHP;
    return SanityLabel::Undecided;
}

}  // namespace offirl
