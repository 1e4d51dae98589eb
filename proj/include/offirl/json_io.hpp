#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "offirl/error.hpp"
#include "offirl/estimation.hpp"
#include "offirl/mdp.hpp"
#include "offirl/membership.hpp"

namespace offirl::io {

using nlohmann::json;

inline json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw SchemaError(path + ": " + e.what());
    }
}

inline void write_json(const json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << j.dump(1) << '\n';
    if (!out) throw IoError("write failed for " + path);
}

namespace detail {

template <class F>
auto guarded(const char* what, F&& f) {
    try {
        return f();
    } catch (const json::exception& e) {
        throw SchemaError(std::string(what) + ": " + e.what());
    }
}

inline void expect_size(const json& j, std::size_t n, const std::string& where) {
    if (!j.is_array() || j.size() != n) {
        throw SchemaError(where + ": expected an array of length " + std::to_string(n));
    }
}

}  // namespace detail

inline json to_json(const MdpWithoutReward& mdp) {
    const Dims d = mdp.dims();
    json p = json::array();
    for (int h = 0; h < d.horizon; ++h) {
        json stage = json::array();
        for (int s = 0; s < d.states; ++s) {
            json st = json::array();
            for (int a = 0; a < d.actions; ++a) {
                const auto row = mdp.transitions().row(h, s, a);
                st.push_back(std::vector<double>(row.begin(), row.end()));
            }
            stage.push_back(std::move(st));
        }
        p.push_back(std::move(stage));
    }
    return {{"S", d.states},
            {"A", d.actions},
            {"H", d.horizon},
            {"mu0", std::vector<double>(mdp.initial().begin(), mdp.initial().end())},
            {"p", std::move(p)}};
}

inline MdpWithoutReward mdp_from_json(const json& j) {
    return detail::guarded("mdp", [&] {
        const Dims d{j.at("S").get<int>(), j.at("A").get<int>(), j.at("H").get<int>()};
        d.validate();
        const auto& mu0 = j.at("mu0");
        detail::expect_size(mu0, static_cast<std::size_t>(d.states), "mu0");
        const auto& pj = j.at("p");
        detail::expect_size(pj, static_cast<std::size_t>(d.horizon), "p");
        TransitionModel p(d);
        for (int h = 0; h < d.horizon; ++h) {
            const std::string wh = "p[" + std::to_string(h) + "]";
            detail::expect_size(pj[h], static_cast<std::size_t>(d.states), wh);
            for (int s = 0; s < d.states; ++s) {
                const std::string ws = wh + "[" + std::to_string(s) + "]";
                detail::expect_size(pj[h][s], static_cast<std::size_t>(d.actions), ws);
                for (int a = 0; a < d.actions; ++a) {
                    const std::string wa = ws + "[" + std::to_string(a) + "]";
                    detail::expect_size(pj[h][s][a], static_cast<std::size_t>(d.states), wa);
                    for (int n = 0; n < d.states; ++n) p(h, s, a, n) = pj[h][s][a][n].get<double>();
                }
            }
        }
        return MdpWithoutReward(mu0.get<std::vector<double>>(), std::move(p));
    });
}

inline json to_json(const RewardFunction& r) {
    const Dims d = r.dims();
    json out = json::array();
    for (int h = 0; h < d.horizon; ++h) {
        json stage = json::array();
        for (int s = 0; s < d.states; ++s) {
            json row = json::array();
            for (int a = 0; a < d.actions; ++a) row.push_back(r(h, s, a));
            stage.push_back(std::move(row));
        }
        out.push_back(std::move(stage));
    }
    return {{"r", std::move(out)}};
}

inline RewardFunction reward_from_json(const json& j, const Dims& d) {
    return detail::guarded("reward", [&] {
        const auto& rj = j.at("r");
        detail::expect_size(rj, static_cast<std::size_t>(d.horizon), "r");
        std::vector<double> values;
        values.reserve(d.triple_count());
        for (int h = 0; h < d.horizon; ++h) {
            detail::expect_size(rj[h], static_cast<std::size_t>(d.states), "r[" + std::to_string(h) + "]");
            for (int s = 0; s < d.states; ++s) {
                detail::expect_size(rj[h][s], static_cast<std::size_t>(d.actions),
                                    "r[" + std::to_string(h) + "][" + std::to_string(s) + "]");
                for (int a = 0; a < d.actions; ++a) values.push_back(rj[h][s][a].get<double>());
            }
        }
        return RewardFunction(d, std::move(values));
    });
}

inline json to_json(const DeterministicPolicy& pi) {
    const Dims d = pi.dims();
    json out = json::array();
    for (int h = 0; h < d.horizon; ++h) {
        json stage = json::array();
        for (int s = 0; s < d.states; ++s) stage.push_back(pi(h, s));
        out.push_back(std::move(stage));
    }
    return {{"action", std::move(out)}};
}

inline json to_json(const StochasticPolicy& pi) {
    const Dims d = pi.dims();
    json out = json::array();
    for (int h = 0; h < d.horizon; ++h) {
        json stage = json::array();
        for (int s = 0; s < d.states; ++s) {
            const auto row = pi.row(h, s);
            stage.push_back(std::vector<double>(row.begin(), row.end()));
        }
        out.push_back(std::move(stage));
    }
    return {{"pi", std::move(out)}};
}

/// Accepts {"action": [H][S]} or {"pi": [H][S][A]}.
inline StochasticPolicy policy_from_json(const json& j, const Dims& d) {
    return detail::guarded("policy", [&] {
        if (j.contains("action")) {
            const auto& aj = j.at("action");
            detail::expect_size(aj, static_cast<std::size_t>(d.horizon), "action");
            DeterministicPolicy pi(d);
            for (int h = 0; h < d.horizon; ++h) {
                detail::expect_size(aj[h], static_cast<std::size_t>(d.states), "action[" + std::to_string(h) + "]");
                for (int s = 0; s < d.states; ++s) pi(h, s) = aj[h][s].get<int>();
            }
            pi.validate();
            return StochasticPolicy::from(pi);
        }
        const auto& pj = j.at("pi");
        detail::expect_size(pj, static_cast<std::size_t>(d.horizon), "pi");
        StochasticPolicy pi(d);
        for (int h = 0; h < d.horizon; ++h) {
            detail::expect_size(pj[h], static_cast<std::size_t>(d.states), "pi[" + std::to_string(h) + "]");
            for (int s = 0; s < d.states; ++s) {
                detail::expect_size(pj[h][s], static_cast<std::size_t>(d.actions),
                                    "pi[" + std::to_string(h) + "][" + std::to_string(s) + "]");
                for (int a = 0; a < d.actions; ++a) pi(h, s, a) = pj[h][s][a].get<double>();
            }
        }
        pi.validate();
        return pi;
    });
}

/// Deterministic policy from either schema; a stochastic input must put all
/// mass on one action per cell.
inline DeterministicPolicy deterministic_policy_from_json(const json& j, const Dims& d) {
    const StochasticPolicy pi = policy_from_json(j, d);
    DeterministicPolicy out(d);
    for (int h = 0; h < d.horizon; ++h)
        for (int s = 0; s < d.states; ++s) {
            int chosen = -1;
            for (int a = 0; a < d.actions; ++a)
                if (std::abs(pi(h, s, a) - 1.0) <= kProbTol) chosen = a;
            if (chosen < 0) throw SchemaError("policy is not deterministic at stage " + std::to_string(h));
            out(h, s) = chosen;
        }
    return out;
}

inline json to_json(const EmpiricalModel& em) {
    const Dims d = em.dims;
    json es = json::array(), ep = json::array(), bs = json::array(), ph = json::array(), n2 = json::array(),
         n3 = json::array();
    for (int h = 0; h < d.horizon; ++h) {
        json es_h = json::array(), ep_h = json::array(), bs_h = json::array(), ph_h = json::array(),
             n2_h = json::array(), n3_h = json::array();
        for (int s = 0; s < d.states; ++s) {
            es_h.push_back(em.expert_support.contains(h, s) ? 1 : 0);
            ep_h.push_back(em.expert_policy(h, s));
            json bs_s = json::array(), ph_s = json::array(), n2_s = json::array(), n3_s = json::array();
            for (int a = 0; a < d.actions; ++a) {
                bs_s.push_back(em.behavioral_support.contains(h, s, a) ? 1 : 0);
                n2_s.push_back(em.counts.n2(h, s, a));
                json row = json::array(), cnt = json::array();
                for (int n = 0; n < d.states; ++n) {
                    row.push_back(em.p_hat(h, s, a, n));
                    cnt.push_back(em.counts.n3(h, s, a, n));
                }
                ph_s.push_back(std::move(row));
                n3_s.push_back(std::move(cnt));
            }
            bs_h.push_back(std::move(bs_s));
            n2_h.push_back(std::move(n2_s));
            ph_h.push_back(std::move(ph_s));
            n3_h.push_back(std::move(n3_s));
        }
        es.push_back(std::move(es_h));
        ep.push_back(std::move(ep_h));
        bs.push_back(std::move(bs_h));
        n2.push_back(std::move(n2_h));
        if (h + 1 < d.horizon) {
            ph.push_back(std::move(ph_h));
            n3.push_back(std::move(n3_h));
        }
    }
    return {{"S", d.states},          {"A", d.actions},        {"H", d.horizon},
            {"expert_support", es},   {"expert_policy", ep},   {"behavioral_support", bs},
            {"p_hat", ph},            {"n2", n2},              {"n3", n3}};
}

inline EmpiricalModel model_from_json(const json& j) {
    return detail::guarded("empirical model", [&] {
        EmpiricalModel em;
        const Dims d{j.at("S").get<int>(), j.at("A").get<int>(), j.at("H").get<int>()};
        d.validate();
        em.dims = d;
        em.expert_support = StateStageSet(d);
        em.expert_policy = PartialPolicy(d);
        em.behavioral_support = TripleSet(d);
        em.p_hat = TransitionModel(d);
        em.counts = CountTable(d);
        const auto& es = j.at("expert_support");
        const auto& ep = j.at("expert_policy");
        const auto& bs = j.at("behavioral_support");
        const auto& ph = j.at("p_hat");
        const auto& n2 = j.at("n2");
        const auto& n3 = j.at("n3");
        detail::expect_size(ph, static_cast<std::size_t>(d.horizon - 1), "p_hat");
        detail::expect_size(n3, static_cast<std::size_t>(d.horizon - 1), "n3");
        for (int h = 0; h < d.horizon; ++h)
            for (int s = 0; s < d.states; ++s) {
                if (es.at(h).at(s).get<int>() != 0) em.expert_support.insert(h, s);
                const int act = ep.at(h).at(s).get<int>();
                if (act >= d.actions) throw SchemaError("expert_policy action out of range");
                em.expert_policy(h, s) = em.expert_support.contains(h, s) ? act : -1;
                if (em.expert_support.contains(h, s) && act < 0) throw SchemaError("expert_policy undefined on support");
                for (int a = 0; a < d.actions; ++a) {
                    if (bs.at(h).at(s).at(a).get<int>() != 0) em.behavioral_support.insert(h, s, a);
                    em.counts.n2(h, s, a) = n2.at(h).at(s).at(a).get<std::int64_t>();
                    if (h + 1 < d.horizon)
                        for (int n = 0; n < d.states; ++n) {
                            em.p_hat(h, s, a, n) = ph.at(h).at(s).at(a).at(n).get<double>();
                            em.counts.n3(h, s, a, n) = n3.at(h).at(s).at(a).at(n).get<std::int64_t>();
                        }
                }
            }
        for (const auto& t : em.behavioral_support.elements())
            if (t.stage + 1 < d.horizon)
                validate_simplex(em.p_hat.row(t.stage, t.state, t.action),
                                 "p_hat[h=" + std::to_string(t.stage) + "][s=" + std::to_string(t.state) +
                                     "][a=" + std::to_string(t.action) + "]");
        em.z_count = static_cast<int>(em.behavioral_support.size());
        em.s_max_hat = em.behavioral_support.states().max_stage_size();
        return em;
    });
}

inline json to_json(const std::string& reward_id, const Verdict& v) {
    json out{{"reward_id", reward_id},
             {"algo", to_string(v.algorithm)},
             {"in_union", v.in_union},
             {"in_cap", v.in_cap},
             {"label", nullptr}};
    if (v.algorithm == Algorithm::PIRLO) out["label"] = to_string(sanity_check(v));
    return out;
}

}  // namespace offirl::io
