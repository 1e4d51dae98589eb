#pragma once

// Tabular finite-horizon MDPs without reward: transition models, policies,
// rewards, and the exact backward/forward recursions over them.
//
// Index convention: stages are 0-based (stage 0 is the first decision
// stage) and every accessor takes (stage, state, action[, next_state]).
// Tensors are dense and stage-major.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "offirl/error.hpp"

namespace offirl {

inline constexpr double kProbTol = 1e-9;
inline constexpr double kSupportThreshold = 1e-12;
inline constexpr double kValueTol = 1e-9;

struct Dims {
    int states = 0;
    int actions = 0;
    int horizon = 0;

    friend bool operator==(const Dims&, const Dims&) = default;

    std::size_t state_stage_count() const {
        return static_cast<std::size_t>(horizon) * static_cast<std::size_t>(states);
    }
    std::size_t triple_count() const { return state_stage_count() * static_cast<std::size_t>(actions); }

    void validate() const {
        if (states < 1 || actions < 1 || horizon < 1) {
            throw SchemaError("dimensions must be positive (S=" + std::to_string(states) +
                              ", A=" + std::to_string(actions) + ", H=" + std::to_string(horizon) + ")");
        }
    }
};

inline void require_same(const Dims& a, const Dims& b, const char* what) {
    if (!(a == b)) throw DimensionMismatch(std::string("dimension mismatch: ") + what);
}

struct StateStage {
    int stage;
    int state;
    friend bool operator==(const StateStage&, const StateStage&) = default;
};

struct Triple {
    int stage;
    int state;
    int action;
    friend bool operator==(const Triple&, const Triple&) = default;
};

/// Set of (state, stage) pairs stored as a dense mask.
class StateStageSet {
public:
    StateStageSet() = default;
    explicit StateStageSet(Dims dims) : dims_(dims), mask_(dims.state_stage_count(), 0) {}

    const Dims& dims() const { return dims_; }

    bool contains(int h, int s) const { return mask_[index(h, s)] != 0; }
    void insert(int h, int s) {
        auto& m = mask_[index(h, s)];
        if (!m) {
            m = 1;
            ++size_;
        }
    }
    std::size_t size() const { return size_; }
    bool empty() const { return size_ == 0; }

    std::size_t stage_size(int h) const {
        std::size_t n = 0;
        for (int s = 0; s < dims_.states; ++s) n += contains(h, s) ? 1 : 0;
        return n;
    }
    int max_stage_size() const {
        std::size_t best = 0;
        for (int h = 0; h < dims_.horizon; ++h) best = std::max(best, stage_size(h));
        return static_cast<int>(best);
    }

    std::vector<StateStage> elements() const {
        std::vector<StateStage> out;
        out.reserve(size_);
        for (int h = 0; h < dims_.horizon; ++h)
            for (int s = 0; s < dims_.states; ++s)
                if (contains(h, s)) out.push_back({h, s});
        return out;
    }

    friend bool operator==(const StateStageSet& a, const StateStageSet& b) {
        return a.dims_ == b.dims_ && a.mask_ == b.mask_;
    }

private:
    std::size_t index(int h, int s) const {
        return static_cast<std::size_t>(h) * dims_.states + static_cast<std::size_t>(s);
    }

    Dims dims_{};
    std::vector<char> mask_;
    std::size_t size_ = 0;
};

/// Set of (state, action, stage) triples stored as a dense mask.
class TripleSet {
public:
    TripleSet() = default;
    explicit TripleSet(Dims dims) : dims_(dims), mask_(dims.triple_count(), 0) {}

    static TripleSet full(Dims dims) {
        TripleSet t(dims);
        std::fill(t.mask_.begin(), t.mask_.end(), 1);
        t.size_ = t.mask_.size();
        return t;
    }

    const Dims& dims() const { return dims_; }

    bool contains(int h, int s, int a) const { return mask_[index(h, s, a)] != 0; }
    void insert(int h, int s, int a) {
        auto& m = mask_[index(h, s, a)];
        if (!m) {
            m = 1;
            ++size_;
        }
    }
    std::size_t size() const { return size_; }
    bool empty() const { return size_ == 0; }

    /// Projection onto (state, stage).
    StateStageSet states() const {
        StateStageSet out(dims_);
        for (int h = 0; h < dims_.horizon; ++h)
            for (int s = 0; s < dims_.states; ++s)
                for (int a = 0; a < dims_.actions; ++a)
                    if (contains(h, s, a)) out.insert(h, s);
        return out;
    }

    std::vector<Triple> elements() const {
        std::vector<Triple> out;
        out.reserve(size_);
        for (int h = 0; h < dims_.horizon; ++h)
            for (int s = 0; s < dims_.states; ++s)
                for (int a = 0; a < dims_.actions; ++a)
                    if (contains(h, s, a)) out.push_back({h, s, a});
        return out;
    }

    friend bool operator==(const TripleSet& a, const TripleSet& b) {
        return a.dims_ == b.dims_ && a.mask_ == b.mask_;
    }

private:
    std::size_t index(int h, int s, int a) const {
        return (static_cast<std::size_t>(h) * dims_.states + static_cast<std::size_t>(s)) * dims_.actions +
               static_cast<std::size_t>(a);
    }

    Dims dims_{};
    std::vector<char> mask_;
    std::size_t size_ = 0;
};

/// Dense stage-major tensor p_h(s'|s,a). Rows are not validated here; an
/// estimated model legitimately carries all-zero rows where it has no data.
class TransitionModel {
public:
    TransitionModel() = default;
    explicit TransitionModel(Dims dims)
        : dims_(dims), data_(dims.triple_count() * static_cast<std::size_t>(dims.states), 0.0) {}

    const Dims& dims() const { return dims_; }

    std::span<const double> row(int h, int s, int a) const {
        return {data_.data() + offset(h, s, a), static_cast<std::size_t>(dims_.states)};
    }
    std::span<double> row(int h, int s, int a) {
        return {data_.data() + offset(h, s, a), static_cast<std::size_t>(dims_.states)};
    }
    double operator()(int h, int s, int a, int next) const { return data_[offset(h, s, a) + next]; }
    double& operator()(int h, int s, int a, int next) { return data_[offset(h, s, a) + next]; }

    void set_unit_row(int h, int s, int a, int next) {
        auto r = row(h, s, a);
        std::fill(r.begin(), r.end(), 0.0);
        r[static_cast<std::size_t>(next)] = 1.0;
    }

    friend bool operator==(const TransitionModel&, const TransitionModel&) = default;

private:
    std::size_t offset(int h, int s, int a) const {
        return ((static_cast<std::size_t>(h) * dims_.states + static_cast<std::size_t>(s)) * dims_.actions +
                static_cast<std::size_t>(a)) *
               static_cast<std::size_t>(dims_.states);
    }

    Dims dims_{};
    std::vector<double> data_;
};

/// Throws SchemaError naming `where` if `row` is not a probability vector.
inline void validate_simplex(std::span<const double> row, const std::string& where) {
    double total = 0.0;
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (!std::isfinite(row[i]) || row[i] < 0.0) {
            throw SchemaError(where + ": entry " + std::to_string(i) + " is negative or not finite");
        }
        total += row[i];
    }
    if (std::abs(total - 1.0) > kProbTol) {
        throw SchemaError(where + ": row sums to " + std::to_string(total) + ", expected 1");
    }
}

/// ⟨S, A, μ0, p, H⟩. Immutable after construction; the constructor enforces
/// the simplex invariants.
class MdpWithoutReward {
public:
    MdpWithoutReward(std::vector<double> initial, TransitionModel transitions)
        : initial_(std::move(initial)), p_(std::move(transitions)) {
        p_.dims().validate();
        if (initial_.size() != static_cast<std::size_t>(p_.dims().states)) {
            throw DimensionMismatch("initial distribution has " + std::to_string(initial_.size()) +
                                    " entries, expected " + std::to_string(p_.dims().states));
        }
        validate_simplex(initial_, "mu0");
        const auto& d = p_.dims();
        for (int h = 0; h < d.horizon; ++h)
            for (int s = 0; s < d.states; ++s)
                for (int a = 0; a < d.actions; ++a)
                    validate_simplex(p_.row(h, s, a), "p[h=" + std::to_string(h) + "][s=" + std::to_string(s) +
                                                          "][a=" + std::to_string(a) + "]");
    }

    const Dims& dims() const { return p_.dims(); }
    int states() const { return dims().states; }
    int actions() const { return dims().actions; }
    int horizon() const { return dims().horizon; }
    std::span<const double> initial() const { return initial_; }
    const TransitionModel& transitions() const { return p_; }

    MdpWithoutReward with_transitions(TransitionModel p) const {
        require_same(p.dims(), dims(), "replacement transition model");
        return MdpWithoutReward(initial_, std::move(p));
    }

private:
    std::vector<double> initial_;
    TransitionModel p_;
};

/// r_h(s,a); real valued, unbounded, finite.
class RewardFunction {
public:
    RewardFunction() = default;
    explicit RewardFunction(Dims dims, double fill = 0.0) : dims_(dims), values_(dims.triple_count(), fill) {}
    RewardFunction(Dims dims, std::vector<double> values) : dims_(dims), values_(std::move(values)) {
        if (values_.size() != dims_.triple_count()) throw DimensionMismatch("reward table has the wrong size");
        for (double v : values_)
            if (!std::isfinite(v)) throw SchemaError("reward entries must be finite");
    }

    const Dims& dims() const { return dims_; }
    double operator()(int h, int s, int a) const { return values_[index(h, s, a)]; }
    double& operator()(int h, int s, int a) { return values_[index(h, s, a)]; }
    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }
    std::span<const double> stage(int h) const {
        return {values_.data() + index(h, 0, 0), static_cast<std::size_t>(dims_.states * dims_.actions)};
    }

    double sup_norm() const {
        double m = 0.0;
        for (double v : values_) m = std::max(m, std::abs(v));
        return m;
    }

    RewardFunction operator-() const {
        RewardFunction out(*this);
        for (auto& v : out.values_) v = -v;
        return out;
    }

    friend bool operator==(const RewardFunction&, const RewardFunction&) = default;

private:
    std::size_t index(int h, int s, int a) const {
        return (static_cast<std::size_t>(h) * dims_.states + static_cast<std::size_t>(s)) * dims_.actions +
               static_cast<std::size_t>(a);
    }

    Dims dims_{};
    std::vector<double> values_;
};

class DeterministicPolicy {
public:
    DeterministicPolicy() = default;
    explicit DeterministicPolicy(Dims dims, int fill = 0) : dims_(dims), action_(dims.state_stage_count(), fill) {}

    const Dims& dims() const { return dims_; }
    int operator()(int h, int s) const { return action_[index(h, s)]; }
    int& operator()(int h, int s) { return action_[index(h, s)]; }

    void validate() const {
        for (int v : action_)
            if (v < 0 || v >= dims_.actions) throw SchemaError("policy action index out of range");
    }

    friend bool operator==(const DeterministicPolicy&, const DeterministicPolicy&) = default;

private:
    std::size_t index(int h, int s) const {
        return static_cast<std::size_t>(h) * dims_.states + static_cast<std::size_t>(s);
    }

    Dims dims_{};
    std::vector<int> action_;
};

class StochasticPolicy {
public:
    StochasticPolicy() = default;
    explicit StochasticPolicy(Dims dims) : dims_(dims), dist_(dims.triple_count(), 0.0) {}

    /// Uniform over actions at every (state, stage).
    static StochasticPolicy uniform(Dims dims) {
        StochasticPolicy pi(dims);
        std::fill(pi.dist_.begin(), pi.dist_.end(), 1.0 / dims.actions);
        return pi;
    }

    static StochasticPolicy from(const DeterministicPolicy& det) {
        StochasticPolicy pi(det.dims());
        const auto& d = det.dims();
        for (int h = 0; h < d.horizon; ++h)
            for (int s = 0; s < d.states; ++s) pi(h, s, det(h, s)) = 1.0;
        return pi;
    }

    const Dims& dims() const { return dims_; }
    double operator()(int h, int s, int a) const { return dist_[index(h, s, a)]; }
    double& operator()(int h, int s, int a) { return dist_[index(h, s, a)]; }
    std::span<const double> row(int h, int s) const {
        return {dist_.data() + index(h, s, 0), static_cast<std::size_t>(dims_.actions)};
    }

    void validate() const {
        for (int h = 0; h < dims_.horizon; ++h)
            for (int s = 0; s < dims_.states; ++s)
                validate_simplex(row(h, s), "pi[h=" + std::to_string(h) + "][s=" + std::to_string(s) + "]");
    }

    friend bool operator==(const StochasticPolicy&, const StochasticPolicy&) = default;

private:
    std::size_t index(int h, int s, int a) const {
        return (static_cast<std::size_t>(h) * dims_.states + static_cast<std::size_t>(s)) * dims_.actions +
               static_cast<std::size_t>(a);
    }

    Dims dims_{};
    std::vector<double> dist_;
};

/// Allowed actions per (state, stage). Every set is nonempty.
class ActionSets {
public:
    ActionSets() = default;
    explicit ActionSets(Dims dims) : dims_(dims), allowed_(dims.triple_count(), 1) {}

    const Dims& dims() const { return dims_; }
    bool allows(int h, int s, int a) const { return allowed_[index(h, s, a)] != 0; }

    void restrict_to(int h, int s, int a) {
        for (int b = 0; b < dims_.actions; ++b) allowed_[index(h, s, b)] = (b == a) ? 1 : 0;
    }
    void set(int h, int s, int a, bool allowed) { allowed_[index(h, s, a)] = allowed ? 1 : 0; }

    bool is_singleton(int h, int s) const {
        int n = 0;
        for (int a = 0; a < dims_.actions; ++a) n += allows(h, s, a) ? 1 : 0;
        return n == 1;
    }

    void validate() const {
        for (int h = 0; h < dims_.horizon; ++h)
            for (int s = 0; s < dims_.states; ++s) {
                bool any = false;
                for (int a = 0; a < dims_.actions; ++a) any = any || allows(h, s, a);
                if (!any) {
                    throw EmptyActionSet("empty action set at state " + std::to_string(s) + ", stage " +
                                         std::to_string(h));
                }
            }
    }

    friend bool operator==(const ActionSets&, const ActionSets&) = default;

private:
    std::size_t index(int h, int s, int a) const {
        return (static_cast<std::size_t>(h) * dims_.states + static_cast<std::size_t>(s)) * dims_.actions +
               static_cast<std::size_t>(a);
    }

    Dims dims_{};
    std::vector<char> allowed_;
};

/// Q and V tables. The virtual stage after the horizon is implicitly zero.
struct ValueTable {
    Dims dims;
    std::vector<double> q;  // [h][s][a]
    std::vector<double> v;  // [h][s]

    explicit ValueTable(Dims d = {}) : dims(d), q(d.triple_count(), 0.0), v(d.state_stage_count(), 0.0) {}

    double Q(int h, int s, int a) const { return q[(static_cast<std::size_t>(h) * dims.states + s) * dims.actions + a]; }
    double& Q(int h, int s, int a) { return q[(static_cast<std::size_t>(h) * dims.states + s) * dims.actions + a]; }
    double V(int h, int s) const { return v[static_cast<std::size_t>(h) * dims.states + s]; }
    double& V(int h, int s) { return v[static_cast<std::size_t>(h) * dims.states + s]; }
};

struct VisitationTable {
    Dims dims;
    std::vector<double> rho;        // [h][s][a]
    std::vector<double> rho_state;  // [h][s]

    explicit VisitationTable(Dims d = {})
        : dims(d), rho(d.triple_count(), 0.0), rho_state(d.state_stage_count(), 0.0) {}

    double at(int h, int s, int a) const {
        return rho[(static_cast<std::size_t>(h) * dims.states + s) * dims.actions + a];
    }
    double& at(int h, int s, int a) { return rho[(static_cast<std::size_t>(h) * dims.states + s) * dims.actions + a]; }
    double state(int h, int s) const { return rho_state[static_cast<std::size_t>(h) * dims.states + s]; }
    double& state(int h, int s) { return rho_state[static_cast<std::size_t>(h) * dims.states + s]; }
};

struct SupportSets {
    StateStageSet states;
    TripleSet triples;
    int s_max = 0;
};

namespace detail {

inline double expect(std::span<const double> dist, std::span<const double> values) {
    double acc = 0.0;
    for (std::size_t i = 0; i < dist.size(); ++i) acc += dist[i] * values[i];
    return acc;
}

}  // namespace detail

/// Q^π by backward recursion; V_h(s) = Σ_a π_h(a|s) Q_h(s,a).
inline ValueTable policy_q_value(const MdpWithoutReward& mdp, const StochasticPolicy& policy,
                                 const RewardFunction& reward) {
    const Dims d = mdp.dims();
    require_same(policy.dims(), d, "policy vs mdp");
    require_same(reward.dims(), d, "reward vs mdp");

    ValueTable out(d);
    std::vector<double> next(static_cast<std::size_t>(d.states), 0.0);
    for (int h = d.horizon - 1; h >= 0; --h) {
        for (int s = 0; s < d.states; ++s) {
            double v = 0.0;
            for (int a = 0; a < d.actions; ++a) {
                double q = reward(h, s, a);
                if (h + 1 < d.horizon) q += detail::expect(mdp.transitions().row(h, s, a), next);
                out.Q(h, s, a) = q;
                v += policy(h, s, a) * q;
            }
            out.V(h, s) = v;
        }
        for (int s = 0; s < d.states; ++s) next[s] = out.V(h, s);
    }
    return out;
}

inline ValueTable policy_q_value(const MdpWithoutReward& mdp, const DeterministicPolicy& policy,
                                 const RewardFunction& reward) {
    return policy_q_value(mdp, StochasticPolicy::from(policy), reward);
}

/// Q* with the max at each successor restricted to `action_sets` when given.
/// V_h(s) is the restricted max. Ties never matter for the values.
inline ValueTable optimal_q_value(const MdpWithoutReward& mdp, const RewardFunction& reward,
                                  const std::optional<ActionSets>& action_sets = std::nullopt) {
    const Dims d = mdp.dims();
    require_same(reward.dims(), d, "reward vs mdp");
    if (action_sets) {
        require_same(action_sets->dims(), d, "action sets vs mdp");
        action_sets->validate();
    }

    ValueTable out(d);
    std::vector<double> next(static_cast<std::size_t>(d.states), 0.0);
    for (int h = d.horizon - 1; h >= 0; --h) {
        for (int s = 0; s < d.states; ++s) {
            double best = -std::numeric_limits<double>::infinity();
            for (int a = 0; a < d.actions; ++a) {
                double q = reward(h, s, a);
                if (h + 1 < d.horizon) q += detail::expect(mdp.transitions().row(h, s, a), next);
                out.Q(h, s, a) = q;
                if (!action_sets || action_sets->allows(h, s, a)) best = std::max(best, q);
            }
            out.V(h, s) = best;
        }
        for (int s = 0; s < d.states; ++s) next[s] = out.V(h, s);
    }
    return out;
}

/// Greedy deterministic policy from a Q table (lowest action index on ties).
inline DeterministicPolicy greedy_policy(const ValueTable& q) {
    DeterministicPolicy pi(q.dims);
    for (int h = 0; h < q.dims.horizon; ++h)
        for (int s = 0; s < q.dims.states; ++s) {
            int best = 0;
            for (int a = 1; a < q.dims.actions; ++a)
                if (q.Q(h, s, a) > q.Q(h, s, best)) best = a;
            pi(h, s) = best;
        }
    return pi;
}

/// J(π; μ0, p, r).
inline double utility(const MdpWithoutReward& mdp, const StochasticPolicy& policy, const RewardFunction& reward) {
    const ValueTable vt = policy_q_value(mdp, policy, reward);
    double j = 0.0;
    for (int s = 0; s < mdp.states(); ++s) j += mdp.initial()[s] * vt.V(0, s);
    return j;
}

inline double utility(const MdpWithoutReward& mdp, const DeterministicPolicy& policy, const RewardFunction& reward) {
    return utility(mdp, StochasticPolicy::from(policy), reward);
}

/// J*(μ0, p, r).
inline double optimal_utility(const MdpWithoutReward& mdp, const RewardFunction& reward) {
    const ValueTable vt = optimal_q_value(mdp, reward);
    double j = 0.0;
    for (int s = 0; s < mdp.states(); ++s) j += mdp.initial()[s] * vt.V(0, s);
    return j;
}

/// Forward recursion for ρ_h(s,a) = P(s_h = s, a_h = a).
inline VisitationTable visitation(const MdpWithoutReward& mdp, const StochasticPolicy& policy) {
    const Dims d = mdp.dims();
    require_same(policy.dims(), d, "policy vs mdp");

    VisitationTable out(d);
    for (int s = 0; s < d.states; ++s) {
        out.state(0, s) = mdp.initial()[s];
        for (int a = 0; a < d.actions; ++a) out.at(0, s, a) = mdp.initial()[s] * policy(0, s, a);
    }
    for (int h = 0; h + 1 < d.horizon; ++h) {
        for (int s = 0; s < d.states; ++s)
            for (int a = 0; a < d.actions; ++a) {
                const double mass = out.at(h, s, a);
                if (mass == 0.0) continue;
                const auto row = mdp.transitions().row(h, s, a);
                for (int n = 0; n < d.states; ++n) out.state(h + 1, n) += mass * row[n];
            }
        for (int n = 0; n < d.states; ++n)
            for (int a = 0; a < d.actions; ++a) out.at(h + 1, n, a) = out.state(h + 1, n) * policy(h + 1, n, a);
    }
    return out;
}

inline VisitationTable visitation(const MdpWithoutReward& mdp, const DeterministicPolicy& policy) {
    return visitation(mdp, StochasticPolicy::from(policy));
}

/// Positivity sets of a visitation table (threshold kSupportThreshold).
inline SupportSets supports(const VisitationTable& vis) {
    SupportSets out{StateStageSet(vis.dims), TripleSet(vis.dims), 0};
    for (int h = 0; h < vis.dims.horizon; ++h)
        for (int s = 0; s < vis.dims.states; ++s)
            for (int a = 0; a < vis.dims.actions; ++a)
                if (vis.at(h, s, a) > kSupportThreshold) {
                    out.triples.insert(h, s, a);
                    out.states.insert(h, s);
                }
    out.s_max = out.states.max_stage_size();
    return out;
}

/// min over `subset` of ρ_h(s,a).
inline double rho_min(const VisitationTable& vis, const TripleSet& subset) {
    require_same(subset.dims(), vis.dims, "subset vs visitation");
    double best = std::numeric_limits<double>::infinity();
    for (const auto& t : subset.elements()) {
        const double r = vis.at(t.stage, t.state, t.action);
        if (!(r > kSupportThreshold)) {
            throw SubsetOutsideSupport("triple (s=" + std::to_string(t.state) + ", a=" + std::to_string(t.action) +
                                       ", h=" + std::to_string(t.stage) + ") lies outside the support");
        }
        best = std::min(best, r);
    }
    return best;
}

/// p1 ≡ p2 on `zbar`: rows coincide within kProbTol on every listed triple.
inline bool transition_equiv(const TransitionModel& p1, const TransitionModel& p2, const TripleSet& zbar) {
    require_same(p1.dims(), p2.dims(), "transition models");
    require_same(zbar.dims(), p1.dims(), "triple set vs transition model");
    for (const auto& t : zbar.elements()) {
        const auto r1 = p1.row(t.stage, t.state, t.action);
        const auto r2 = p2.row(t.stage, t.state, t.action);
        for (std::size_t i = 0; i < r1.size(); ++i)
            if (std::abs(r1[i] - r2[i]) > kProbTol) return false;
    }
    return true;
}

inline bool policy_equiv(const StochasticPolicy& pi1, const StochasticPolicy& pi2, const StateStageSet& sbar) {
    require_same(pi1.dims(), pi2.dims(), "policies");
    require_same(sbar.dims(), pi1.dims(), "state set vs policy");
    for (const auto& e : sbar.elements()) {
        const auto r1 = pi1.row(e.stage, e.state);
        const auto r2 = pi2.row(e.stage, e.state);
        for (std::size_t i = 0; i < r1.size(); ++i)
            if (std::abs(r1[i] - r2[i]) > kProbTol) return false;
    }
    return true;
}

}  // namespace offirl
