#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "offirl/error.hpp"
#include "offirl/mdp.hpp"
#include "offirl/trajectory.hpp"

namespace offirl {

/// Deterministic policy defined on a subset of (state, stage); -1 elsewhere.
class PartialPolicy {
public:
    PartialPolicy() = default;
    explicit PartialPolicy(Dims dims) : dims_(dims), action_(dims.state_stage_count(), -1) {}

    const Dims& dims() const { return dims_; }
    bool defined(int h, int s) const { return (*this)(h, s) >= 0; }
    int operator()(int h, int s) const { return action_[static_cast<std::size_t>(h) * dims_.states + s]; }
    int& operator()(int h, int s) { return action_[static_cast<std::size_t>(h) * dims_.states + s]; }

    static PartialPolicy restrict(const DeterministicPolicy& pi, const StateStageSet& on) {
        PartialPolicy out(pi.dims());
        for (const auto& e : on.elements()) out(e.stage, e.state) = pi(e.stage, e.state);
        return out;
    }

    friend bool operator==(const PartialPolicy&, const PartialPolicy&) = default;

private:
    Dims dims_{};
    std::vector<int> action_;
};

struct EmpiricalModel {
    Dims dims;
    StateStageSet expert_support;
    PartialPolicy expert_policy;
    TripleSet behavioral_support;
    TransitionModel p_hat;
    CountTable counts;
    int z_count = 0;
    int s_max_hat = 0;

    bool is_expert_state(int h, int s) const { return expert_support.contains(h, s); }
};

inline StateStageSet estimate_expert_support(const Dataset& d, const Dims& dims) {
    validate_dataset(d, dims);
    StateStageSet out(dims);
    for (const auto& t : d.trajectories)
        for (int h = 0; h < dims.horizon; ++h) out.insert(h, t.steps[static_cast<std::size_t>(h)].state);
    return out;
}

inline PartialPolicy estimate_expert_policy(const Dataset& d, const StateStageSet& support) {
    const Dims dims = support.dims();
    validate_dataset(d, dims);
    PartialPolicy pi(dims);
    for (const auto& t : d.trajectories)
        for (int h = 0; h < dims.horizon; ++h) {
            const auto& st = t.steps[static_cast<std::size_t>(h)];
            if (!support.contains(h, st.state)) continue;
            int& slot = pi(h, st.state);
            if (slot < 0) {
                slot = st.action;
            } else if (slot != st.action) {
                throw NonDeterministicExpert(st.state, h, slot, st.action);
            }
        }
    return pi;
}

inline TripleSet estimate_behavioral_support(const Dataset& d, const Dims& dims) {
    validate_dataset(d, dims);
    TripleSet out(dims);
    for (const auto& t : d.trajectories)
        for (int h = 0; h < dims.horizon; ++h) {
            const auto& st = t.steps[static_cast<std::size_t>(h)];
            out.insert(h, st.state, st.action);
        }
    return out;
}

/// p̂_h(s'|s,a) = N_h(s,a,s') / max{1, N_h(s,a)} on `support`, stages with a successor only.
inline TransitionModel estimate_transition(const CountTable& c, const TripleSet& support) {
    const Dims dims = c.dims();
    require_same(support.dims(), dims, "support vs counts");
    TransitionModel p(dims);
    for (const auto& t : support.elements()) {
        if (t.stage + 1 >= dims.horizon) continue;
        const double n = static_cast<double>(std::max<std::int64_t>(1, c.n2(t.stage, t.state, t.action)));
        for (int next = 0; next < dims.states; ++next)
            p(t.stage, t.state, t.action, next) = static_cast<double>(c.n3(t.stage, t.state, t.action, next)) / n;
    }
    return p;
}

/// Runs the whole estimation pass on an expert and a behavioral dataset.
inline EmpiricalModel estimate(const Dataset& expert, const Dataset& behavioral, const Dims& dims) {
    if (expert.empty() || behavioral.empty()) throw SchemaError("estimation needs nonempty datasets");
    EmpiricalModel em;
    em.dims = dims;
    em.expert_support = estimate_expert_support(expert, dims);
    em.expert_policy = estimate_expert_policy(expert, em.expert_support);
    em.behavioral_support = estimate_behavioral_support(behavioral, dims);
    em.counts = counts(behavioral, dims);
    em.p_hat = estimate_transition(em.counts, em.behavioral_support);
    em.z_count = static_cast<int>(em.behavioral_support.size());
    em.s_max_hat = em.behavioral_support.states().max_stage_size();
    return em;
}

/// Model carrying the true quantities: true supports, the expert's policy on
/// its support and p itself on the behavioral support. Counts stay empty.
inline EmpiricalModel model_from_truth(const MdpWithoutReward& mdp, const DeterministicPolicy& expert,
                                       const TripleSet& behavioral_support) {
    const Dims dims = mdp.dims();
    require_same(behavioral_support.dims(), dims, "behavioral support vs mdp");
    EmpiricalModel em;
    em.dims = dims;
    em.expert_support = supports(visitation(mdp, expert)).states;
    em.expert_policy = PartialPolicy::restrict(expert, em.expert_support);
    em.behavioral_support = behavioral_support;
    em.counts = CountTable(dims);
    em.p_hat = TransitionModel(dims);
    for (const auto& t : behavioral_support.elements()) {
        if (t.stage + 1 >= dims.horizon) continue;
        const auto src = mdp.transitions().row(t.stage, t.state, t.action);
        std::copy(src.begin(), src.end(), em.p_hat.row(t.stage, t.state, t.action).begin());
    }
    em.z_count = static_cast<int>(behavioral_support.size());
    em.s_max_hat = behavioral_support.states().max_stage_size();
    return em;
}

inline EmpiricalModel model_from_truth(const MdpWithoutReward& mdp, const DeterministicPolicy& expert,
                                       const StochasticPolicy& behavioral) {
    return model_from_truth(mdp, expert, supports(visitation(mdp, behavioral)).triples);
}

inline double beta(double n, double delta, int z_count, int s_max) {
    const double first = std::log(4.0 * z_count / delta);
    if (s_max <= 1) return first;
    const double k = s_max - 1.0;
    return first + k * std::log(std::exp(1.0) * (1.0 + n / k));
}

struct BonusTable {
    Dims dims;
    std::vector<double> b;  // [h][s][a]
    double delta = 0.0;

    explicit BonusTable(Dims d = {}, double delta_ = 0.0) : dims(d), b(d.triple_count(), 0.0), delta(delta_) {}

    double operator()(int h, int s, int a) const {
        return b[(static_cast<std::size_t>(h) * dims.states + s) * dims.actions + a];
    }
    double& operator()(int h, int s, int a) { return b[(static_cast<std::size_t>(h) * dims.states + s) * dims.actions + a]; }

    BonusTable scaled(double factor) const {
        BonusTable out(*this);
        for (auto& v : out.b) v = std::min(2.0, v * factor);
        return out;
    }
};

inline void check_delta(double delta) {
    if (!(delta > 0.0 && delta < 1.0)) throw SchemaError("delta must lie in (0, 1)");
}

inline BonusTable bonus_table(const EmpiricalModel& em, double delta) {
    check_delta(delta);
    BonusTable out(em.dims, delta);
    const int z = std::max(1, em.z_count);
    const int smax = std::max(1, em.s_max_hat);
    for (const auto& t : em.behavioral_support.elements()) {
        const double n = static_cast<double>(em.counts.n2(t.stage, t.state, t.action));
        out(t.stage, t.state, t.action) =
            std::min(2.0, std::sqrt(2.0 * beta(n, delta, z, smax) / std::max(1.0, n)));
    }
    return out;
}

enum class ConfidenceKind { EquivalenceClass, L1Ball };

struct ConfidenceSpec {
    ConfidenceKind kind = ConfidenceKind::EquivalenceClass;
    std::shared_ptr<const EmpiricalModel> base;
    std::optional<BonusTable> bonuses;
    /// [h][s][s'] mask, meaningful only at expert (s,h) with a successor stage.
    std::optional<std::vector<char>> allowed_next;

    const EmpiricalModel& model() const { return *base; }

    bool next_allowed(int h, int s, int next) const {
        const Dims& d = base->dims;
        return (*allowed_next)[(static_cast<std::size_t>(h) * d.states + s) * d.states + next] != 0;
    }
    std::span<const char> allowed_row(int h, int s) const {
        const Dims& d = base->dims;
        return {allowed_next->data() + (static_cast<std::size_t>(h) * d.states + s) * d.states,
                static_cast<std::size_t>(d.states)};
    }
};

inline ConfidenceSpec build_confidence_irlo(std::shared_ptr<const EmpiricalModel> em) {
    ConfidenceSpec spec;
    spec.kind = ConfidenceKind::EquivalenceClass;
    spec.base = std::move(em);
    return spec;
}

inline ConfidenceSpec build_confidence_irlo(const EmpiricalModel& em) {
    return build_confidence_irlo(std::make_shared<const EmpiricalModel>(em));
}

/// ℓ1-ball set with the given bonuses. For every expert (s,h) the expert
/// action may only move to next-stage expert states or to states p̂ already
/// reaches from there.
inline ConfidenceSpec build_confidence_pirlo(std::shared_ptr<const EmpiricalModel> em, BonusTable bonuses) {
    const EmpiricalModel& m = *em;
    const Dims d = m.dims;
    require_same(bonuses.dims, d, "bonus table vs model");
    std::vector<char> allowed(d.state_stage_count() * static_cast<std::size_t>(d.states), 0);
    for (const auto& e : m.expert_support.elements()) {
        const int a = m.expert_policy(e.stage, e.state);
        if (!m.behavioral_support.contains(e.stage, e.state, a)) throw ExpertTripleUncovered(e.state, e.stage);
        if (e.stage + 1 >= d.horizon) continue;
        const auto row = m.p_hat.row(e.stage, e.state, a);
        for (int next = 0; next < d.states; ++next) {
            const bool ok = m.expert_support.contains(e.stage + 1, next) || row[next] > 0.0;
            allowed[(static_cast<std::size_t>(e.stage) * d.states + e.state) * d.states + next] = ok ? 1 : 0;
        }
    }
    ConfidenceSpec spec;
    spec.kind = ConfidenceKind::L1Ball;
    spec.base = std::move(em);
    spec.bonuses = std::move(bonuses);
    spec.allowed_next = std::move(allowed);
    return spec;
}

inline ConfidenceSpec build_confidence_pirlo(std::shared_ptr<const EmpiricalModel> em, double delta) {
    BonusTable b = bonus_table(*em, delta);
    return build_confidence_pirlo(std::move(em), std::move(b));
}

inline ConfidenceSpec build_confidence_pirlo(const EmpiricalModel& em, double delta) {
    return build_confidence_pirlo(std::make_shared<const EmpiricalModel>(em), delta);
}

inline ConfidenceSpec build_confidence_pirlo(const EmpiricalModel& em, BonusTable bonuses) {
    return build_confidence_pirlo(std::make_shared<const EmpiricalModel>(em), std::move(bonuses));
}

}  // namespace offirl
