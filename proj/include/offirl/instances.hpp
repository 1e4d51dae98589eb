#pragma once

// Instance generators: random and structured MDPs, expert/behavioral policy
// pairs, and reward samplers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "offirl/error.hpp"
#include "offirl/estimation.hpp"
#include "offirl/mdp.hpp"
#include "offirl/rng.hpp"

namespace offirl {

/// True model, deterministic expert, behavioral policy covering the expert.
struct Instance {
    MdpWithoutReward mdp;
    DeterministicPolicy expert;
    StochasticPolicy behavioral;

    TripleSet behavioral_support() const { return supports(visitation(mdp, behavioral)).triples; }
    StateStageSet expert_support() const { return supports(visitation(mdp, expert)).states; }
};

namespace detail {

/// Random probability vector; with `keep` < 1 each entry survives with that
/// probability (at least one always does).
inline std::vector<double> random_simplex(int n, SplitMix64& rng, double keep = 1.0) {
    std::vector<double> w(static_cast<std::size_t>(n), 0.0);
    const int forced = rng.below(n);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        if (i != forced && rng.uniform() >= keep) continue;
        w[static_cast<std::size_t>(i)] = -std::log(1.0 - rng.uniform()) + 1e-3;
        total += w[static_cast<std::size_t>(i)];
    }
    for (auto& x : w) x /= total;
    return w;
}

}  // namespace detail

/// Random transitions. Each next state is kept in a row with probability `keep`.
inline MdpWithoutReward random_mdp(Dims dims, std::uint64_t seed, double keep = 0.6) {
    dims.validate();
    SplitMix64 rng(seed, 0xA11CE);
    TransitionModel p(dims);
    for (int h = 0; h < dims.horizon; ++h)
        for (int s = 0; s < dims.states; ++s)
            for (int a = 0; a < dims.actions; ++a) {
                const auto row = detail::random_simplex(dims.states, rng, keep);
                std::copy(row.begin(), row.end(), p.row(h, s, a).begin());
            }
    return MdpWithoutReward(detail::random_simplex(dims.states, rng, keep), std::move(p));
}

/// Deterministic chain: action 0 advances one state, every other action
/// falls back to state 0. Starts in state 0.
inline MdpWithoutReward chain_mdp(Dims dims) {
    dims.validate();
    TransitionModel p(dims);
    for (int h = 0; h < dims.horizon; ++h)
        for (int s = 0; s < dims.states; ++s)
            for (int a = 0; a < dims.actions; ++a) p.set_unit_row(h, s, a, a == 0 ? std::min(s + 1, dims.states - 1) : 0);
    std::vector<double> mu0(static_cast<std::size_t>(dims.states), 0.0);
    mu0[0] = 1.0;
    return MdpWithoutReward(std::move(mu0), std::move(p));
}

/// Highway lane-change abstraction: state = (left lane free, right lane
/// free, speed 0..3), actions 0 = move left, 1 = keep lane, 2 = move right.
namespace lanechange {

inline constexpr int kStates = 16;
inline constexpr int kActions = 3;
inline constexpr int kLeft = 0;
inline constexpr int kKeep = 1;
inline constexpr int kRight = 2;

inline int encode(bool left_free, bool right_free, int speed) {
    return (left_free ? 8 : 0) + (right_free ? 4 : 0) + speed;
}
inline bool left_free(int s) { return (s & 8) != 0; }
inline bool right_free(int s) { return (s & 4) != 0; }
inline int speed(int s) { return s & 3; }

inline MdpWithoutReward mdp(int horizon = 4) {
    const Dims dims{kStates, kActions, horizon};
    TransitionModel p(dims);
    for (int h = 0; h < horizon; ++h)
        for (int s = 0; s < kStates; ++s)
            for (int a = 0; a < kActions; ++a) {
                int v = speed(s);
                const bool blocked = (a == kLeft && !left_free(s)) || (a == kRight && !right_free(s));
                if (blocked) {
                    v = std::max(0, v - 1);
                } else if (a == kLeft) {
                    v = std::min(3, v + 1);
                } else if (a == kRight) {
                    v = std::max(0, v - 1);
                }
                // Traffic around the car reshuffles; the left lane is busier at high speed.
                const double pl = v >= 2 ? 0.4 : 0.6;
                const double pr = 0.5;
                for (int l = 0; l < 2; ++l)
                    for (int r = 0; r < 2; ++r)
                        p(h, s, a, encode(l, r, v)) += (l ? pl : 1.0 - pl) * (r ? pr : 1.0 - pr);
            }
    std::vector<double> mu0(kStates, 0.0);
    for (int l = 0; l < 2; ++l)
        for (int r = 0; r < 2; ++r) mu0[static_cast<std::size_t>(encode(l, r, 1))] = 0.25;
    return MdpWithoutReward(std::move(mu0), std::move(p));
}

/// The three synthetic drivers: speedy-left, keep-right, steady-forward.
inline std::vector<DeterministicPolicy> experts(int horizon = 4) {
    const Dims dims{kStates, kActions, horizon};
    std::vector<DeterministicPolicy> out(3, DeterministicPolicy(dims, kKeep));
    for (int h = 0; h < horizon; ++h)
        for (int s = 0; s < kStates; ++s) {
            out[0](h, s) = left_free(s) ? kLeft : kKeep;
            out[1](h, s) = right_free(s) && speed(s) > 0 ? kRight : kKeep;
            out[2](h, s) = kKeep;
        }
    return out;
}

inline const char* expert_name(int i) {
    static const char* names[] = {"speedy-left", "keep-right", "steady-forward"};
    return names[i];
}

}  // namespace lanechange

inline DeterministicPolicy random_deterministic_policy(Dims dims, SplitMix64& rng) {
    DeterministicPolicy pi(dims);
    for (int h = 0; h < dims.horizon; ++h)
        for (int s = 0; s < dims.states; ++s) pi(h, s) = rng.below(dims.actions);
    return pi;
}

/// Behavioral policy that always gives the expert action at least
/// `expert_mass`, spreading the rest over a random subset of the other
/// actions (each kept with probability `keep`).
inline StochasticPolicy covering_behavioral_policy(const DeterministicPolicy& expert, SplitMix64& rng, double keep = 0.6,
                                                   double expert_mass = 0.3) {
    const Dims dims = expert.dims();
    StochasticPolicy pi(dims);
    for (int h = 0; h < dims.horizon; ++h)
        for (int s = 0; s < dims.states; ++s) {
            const int ae = expert(h, s);
            std::vector<double> w(static_cast<std::size_t>(dims.actions), 0.0);
            double total = 0.0;
            for (int a = 0; a < dims.actions; ++a) {
                if (a == ae || rng.uniform() >= keep) continue;
                w[static_cast<std::size_t>(a)] = 0.2 + rng.uniform();
                total += w[static_cast<std::size_t>(a)];
            }
            if (total == 0.0) {
                pi(h, s, ae) = 1.0;
                continue;
            }
            for (int a = 0; a < dims.actions; ++a)
                pi(h, s, a) = (a == ae) ? expert_mass : (1.0 - expert_mass) * w[static_cast<std::size_t>(a)] / total;
        }
    return pi;
}

inline Instance random_instance(Dims dims, std::uint64_t seed, double keep = 0.6) {
    SplitMix64 rng(seed, 0xBEEF);
    MdpWithoutReward mdp = random_mdp(dims, seed, keep);
    DeterministicPolicy expert = random_deterministic_policy(dims, rng);
    StochasticPolicy behavioral = covering_behavioral_policy(expert, rng, keep);
    return {std::move(mdp), std::move(expert), std::move(behavioral)};
}

/// Random sizes up to the given bounds.
inline Dims random_dims(SplitMix64& rng, int max_s, int max_a, int max_h) {
    return {1 + rng.below(max_s), 1 + rng.below(max_a), 1 + rng.below(max_h)};
}

inline RewardFunction uniform_reward(Dims dims, SplitMix64& rng, double lo = -1.0, double hi = 1.0) {
    RewardFunction r(dims);
    for (int h = 0; h < dims.horizon; ++h)
        for (int s = 0; s < dims.states; ++s)
            for (int a = 0; a < dims.actions; ++a) r(h, s, a) = rng.uniform(lo, hi);
    return r;
}

/// 0 on the expert action, -1 on every other action.
inline RewardFunction behavioral_cloning_reward(const PartialPolicy& expert, const StateStageSet& support) {
    const Dims dims = support.dims();
    RewardFunction r(dims, -1.0);
    for (const auto& e : support.elements()) r(e.stage, e.state, expert(e.stage, e.state)) = 0.0;
    return r;
}

/// Mixture used for membership sweeps: uniform draws, expert-favouring
/// draws, coarse integer rewards with ties, and constants.
inline RewardFunction mixed_reward(const DeterministicPolicy& expert, SplitMix64& rng) {
    const Dims dims = expert.dims();
    const double u = rng.uniform();
    if (u < 0.4) return uniform_reward(dims, rng);
    if (u < 0.75) {
        RewardFunction r = uniform_reward(dims, rng);
        const double lift = rng.uniform(0.0, 2.0);
        for (int h = 0; h < dims.horizon; ++h)
            for (int s = 0; s < dims.states; ++s) r(h, s, expert(h, s)) += lift;
        return r;
    }
    if (u < 0.95) {
        RewardFunction r(dims);
        for (int h = 0; h < dims.horizon; ++h)
            for (int s = 0; s < dims.states; ++s)
                for (int a = 0; a < dims.actions; ++a) r(h, s, a) = static_cast<double>(rng.below(3) - 1);
        return r;
    }
    return RewardFunction(dims, rng.uniform(-1.0, 1.0));
}

}  // namespace offirl
