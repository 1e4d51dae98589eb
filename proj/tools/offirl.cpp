#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "offirl/estimation.hpp"
#include "offirl/experiments.hpp"
#include "offirl/instances.hpp"
#include "offirl/json_io.hpp"
#include "offirl/membership.hpp"
#include "offirl/metrics.hpp"
#include "offirl/trajectory.hpp"

using namespace offirl;
using io::json;

namespace {

struct RunConfig {
    std::uint64_t seed = 0;
    double delta = 0.1;
    double tol = kValueTol;
    std::string algo = "pirlo";
    std::string out;
};

// Sink that is stdout unless --out was given.
class Output {
public:
    explicit Output(const std::string& path) {
        if (path.empty() || path == "-") return;
        file_.open(path);
        if (!file_) throw IoError("cannot open " + path + " for writing");
    }
    std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

private:
    std::ofstream file_;
};

void emit(const json& j, const std::string& out) {
    Output o(out);
    o.stream() << j.dump(1) << '\n';
}

Algorithm parse_algo(const std::string& s) {
    if (s == "irlo") return Algorithm::IRLO;
    if (s == "pirlo") return Algorithm::PIRLO;
    throw SchemaError("unknown algorithm " + s);
}

// A reward file holds either {"r": ...} or {"rewards": [{"id": ..., "r": ...}]}.
RewardPanel load_rewards(const std::string& path, const Dims& d) {
    const json j = io::read_json(path);
    RewardPanel panel;
    if (j.contains("rewards")) {
        if (!j["rewards"].is_array()) throw SchemaError(path + ": rewards must be an array");
        int k = 0;
        for (const auto& item : j["rewards"]) {
            const std::string id = item.contains("id") ? item["id"].get<std::string>() : "r" + std::to_string(k);
            panel.push_back({id, io::reward_from_json(item, d)});
            ++k;
        }
    } else {
        panel.push_back({j.value("id", std::string("r")), io::reward_from_json(j, d)});
    }
    if (panel.empty()) throw EmptyPanel("no rewards in " + path);
    return panel;
}

json panel_json(const RewardPanel& panel) {
    json arr = json::array();
    for (const auto& nr : panel) {
        json item = io::to_json(nr.reward);
        item["id"] = nr.id;
        arr.push_back(std::move(item));
    }
    return {{"rewards", std::move(arr)}};
}

ConfidenceSpec make_spec(const EmpiricalModel& em, Algorithm algo, double delta) {
    auto shared = std::make_shared<const EmpiricalModel>(em);
    return algo == Algorithm::IRLO ? build_confidence_irlo(shared) : build_confidence_pirlo(shared, delta);
}

std::vector<std::size_t> parse_taus(const std::string& s) {
    std::vector<std::size_t> out;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) {
        try {
            out.push_back(static_cast<std::size_t>(std::stod(item)));
        } catch (const std::exception&) {
            throw SchemaError("bad tau value '" + item + "'");
        }
    }
    if (out.empty()) throw SchemaError("empty tau grid");
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Offline inverse RL: feasible reward sets for tabular MDPs"};
    app.require_subcommand(1);
    app.fallthrough();
    RunConfig cfg;
    app.add_option("--seed", cfg.seed, "RNG seed");
    app.add_option("--delta", cfg.delta, "confidence level")->check(CLI::Range(0.0, 1.0));
    app.add_option("--tol", cfg.tol, "value tolerance")->check(CLI::PositiveNumber);
    app.add_option("--algo", cfg.algo, "irlo or pirlo")->check(CLI::IsMember({"irlo", "pirlo"}));
    app.add_option("--out", cfg.out, "output file (stdout if omitted)");

    int code = 0;

    // gen-mdp
    std::string structure = "random";
    int n_states = 4, n_actions = 2, horizon = 3, expert_index = 0;
    double keep = 0.6;
    std::string expert_out, behavioral_out;
    auto* gen = app.add_subcommand("gen-mdp", "generate an MDP (and optionally policies)");
    gen->add_option("--structure", structure)->check(CLI::IsMember({"random", "chain", "lanechange"}));
    gen->add_option("-S,--states", n_states)->check(CLI::PositiveNumber);
    gen->add_option("-A,--actions", n_actions)->check(CLI::PositiveNumber);
    gen->add_option("-H,--horizon", horizon)->check(CLI::PositiveNumber);
    gen->add_option("--keep", keep, "support density of random rows")->check(CLI::Range(0.0, 1.0));
    gen->add_option("--expert-out", expert_out);
    gen->add_option("--behavioral-out", behavioral_out);
    gen->add_option("--expert-index", expert_index, "lanechange expert (0-2)")->check(CLI::Range(0, 2));
    gen->callback([&] {
        const Dims d{n_states, n_actions, horizon};
        SplitMix64 rng(cfg.seed, 1);
        std::optional<MdpWithoutReward> mdp;
        DeterministicPolicy expert;
        if (structure == "lanechange") {
            mdp = lanechange::mdp(horizon);
            expert = lanechange::experts(horizon).at(static_cast<std::size_t>(expert_index));
        } else {
            mdp = structure == "chain" ? chain_mdp(d) : random_mdp(d, cfg.seed, keep);
            expert = structure == "chain" ? DeterministicPolicy(d, 0) : random_deterministic_policy(d, rng);
        }
        emit(io::to_json(*mdp), cfg.out);
        if (!expert_out.empty()) io::write_json(io::to_json(expert), expert_out);
        if (!behavioral_out.empty())
            io::write_json(io::to_json(covering_behavioral_policy(expert, rng)), behavioral_out);
    });

    // simulate
    std::string mdp_path, policy_path, role = "behavioral";
    std::size_t n_traj = 100;
    auto* sim = app.add_subcommand("simulate", "sample trajectories (JSON lines)");
    sim->add_option("--mdp", mdp_path)->required();
    sim->add_option("--policy", policy_path)->required();
    sim->add_option("-n,--trajectories", n_traj)->check(CLI::PositiveNumber);
    sim->add_option("--role", role)->check(CLI::IsMember({"expert", "behavioral"}));
    sim->callback([&] {
        const auto mdp = io::mdp_from_json(io::read_json(mdp_path));
        const auto pj = io::read_json(policy_path);
        const Dataset data =
            role == "expert"
                ? simulate(mdp, io::deterministic_policy_from_json(pj, mdp.dims()), n_traj, cfg.seed)
                : simulate(mdp, io::policy_from_json(pj, mdp.dims()), n_traj, cfg.seed);
        Output o(cfg.out);
        save_dataset(data, o.stream());
    });

    // ingest
    std::string csv_path;
    int stage_base = 0;
    auto* ing = app.add_subcommand("ingest", "convert episode_id,h,s,a CSV to JSON lines");
    ing->add_option("--csv", csv_path)->required();
    ing->add_option("-H,--horizon", horizon)->required()->check(CLI::PositiveNumber);
    ing->add_option("--stage-base", stage_base);
    ing->add_option("--role", role)->check(CLI::IsMember({"expert", "behavioral"}));
    ing->callback([&] {
        std::ifstream in(csv_path);
        if (!in) throw IoError("cannot open " + csv_path);
        const Dataset data =
            ingest_csv(in, horizon, stage_base, role == "expert" ? Role::Expert : Role::Behavioral);
        Output o(cfg.out);
        save_dataset(data, o.stream());
    });

    // estimate
    std::string expert_data, behavioral_data;
    auto* est = app.add_subcommand("estimate", "estimate supports, expert policy and transitions");
    est->add_option("--mdp", mdp_path, "MDP file supplying S, A, H");
    est->add_option("-S,--states", n_states);
    est->add_option("-A,--actions", n_actions);
    est->add_option("-H,--horizon", horizon);
    est->add_option("--expert-data", expert_data)->required();
    est->add_option("--behavioral-data", behavioral_data)->required();
    est->callback([&] {
        const Dims d = mdp_path.empty() ? Dims{n_states, n_actions, horizon}
                                        : io::mdp_from_json(io::read_json(mdp_path)).dims();
        d.validate();
        const auto em =
            estimate(load_dataset(expert_data, d, Role::Expert), load_dataset(behavioral_data, d, Role::Behavioral), d);
        emit(io::to_json(em), cfg.out);
    });

    // check / sanity
    std::string model_path, reward_path;
    auto check_cmd = [&](bool sanity) {
        const auto em = io::model_from_json(io::read_json(model_path));
        const auto panel = load_rewards(reward_path, em.dims);
        const Algorithm algo = sanity ? Algorithm::PIRLO : parse_algo(cfg.algo);
        const auto spec = make_spec(em, algo, cfg.delta);
        json out = json::array();
        for (const auto& nr : panel) out.push_back(io::to_json(nr.id, check_reward(nr.reward, spec, cfg.tol)));
        emit(out, cfg.out);
    };
    auto* chk = app.add_subcommand("check", "membership of rewards in the estimated sets");
    chk->add_option("--model", model_path)->required();
    chk->add_option("--reward", reward_path)->required();
    chk->callback([&] { check_cmd(false); });
    auto* san = app.add_subcommand("sanity", "PIRLO sanity labels for rewards");
    san->add_option("--model", model_path)->required();
    san->add_option("--reward", reward_path)->required();
    san->callback([&] { check_cmd(true); });

    // bc-reward
    bool with_negation = false;
    auto* bc = app.add_subcommand("bc-reward", "behavioral-cloning reward from an estimated model");
    bc->add_option("--model", model_path)->required();
    bc->add_flag("--with-negation", with_negation);
    bc->callback([&] {
        const auto em = io::model_from_json(io::read_json(model_path));
        const auto r = behavioral_cloning_reward(em.expert_policy, em.expert_support);
        RewardPanel panel{{"bc", r}};
        if (with_negation) panel.push_back({"bc_neg", -r});
        emit(panel_json(panel), cfg.out);
    });

    // distance
    std::string other_path;
    auto* dist = app.add_subcommand("distance", "pairwise reward distances as CSV");
    dist->add_option("--mdp", mdp_path)->required();
    dist->add_option("--policy", policy_path, "behavioral policy")->required();
    dist->add_option("--reward", reward_path)->required();
    dist->add_option("--against", other_path, "second panel (default: same)");
    dist->callback([&] {
        const auto mdp = io::mdp_from_json(io::read_json(mdp_path));
        const auto vis = visitation(mdp, io::policy_from_json(io::read_json(policy_path), mdp.dims()));
        const auto zb = supports(vis).triples;
        const auto a = load_rewards(reward_path, mdp.dims());
        const auto b = other_path.empty() ? a : load_rewards(other_path, mdp.dims());
        Output o(cfg.out);
        auto& os = o.stream();
        os.precision(17);
        os << "pair_id,d,dinf,dg\n";
        for (const auto& x : a)
            for (const auto& y : b)
                os << x.id << ':' << y.id << ',' << dist_d(x.reward, y.reward, vis, zb) << ','
                   << dist_dinf(x.reward, y.reward) << ',' << dg_vstar(x.reward, y.reward, mdp) << '\n';
    });

    // verify-oracle
    OracleSweepConfig vcfg;
    auto* ver = app.add_subcommand("verify-oracle", "EVI membership against the exact oracles");
    ver->add_option("--instances", vcfg.instances)->check(CLI::PositiveNumber);
    ver->add_option("--uniform-rewards", vcfg.uniform_rewards);
    ver->add_option("--mixed-rewards", vcfg.mixed_rewards);
    ver->add_option("--max-states", vcfg.max_states)->check(CLI::PositiveNumber);
    ver->add_option("--max-actions", vcfg.max_actions)->check(CLI::PositiveNumber);
    ver->add_option("--max-horizon", vcfg.max_horizon)->check(CLI::PositiveNumber);
    ver->add_option("--cap", vcfg.cap);
    ver->add_option("--bonus", vcfg.injected_bonus, "injected PIRLO bonus");
    ver->callback([&] {
        vcfg.seed = cfg.seed;
        vcfg.tol = cfg.tol;
        const auto rep = verify_oracle(vcfg);
        emit({{"queries", rep.queries},
              {"irlo_disagreements", rep.irlo_disagreements},
              {"squeeze_violations", rep.squeeze_violations},
              {"brute_force_checked", rep.brute_force_checked},
              {"brute_force_disagreements", rep.brute_force_disagreements},
              {"brute_force_skipped", rep.brute_force_skipped},
              {"zero_bonus_mismatches", rep.zero_bonus_mismatches},
              {"widened", rep.widened},
              {"widening_violations", rep.widening_violations},
              {"in_sub", rep.in_sub_count},
              {"in_super", rep.in_super_count},
              {"ok", rep.ok()}},
             cfg.out);
        if (!rep.ok()) code = 1;
    });

    // convergence
    std::string taus = "100,1000,10000", expert_path, behavioral_path;
    int panel_size = 50, trials = 20;
    auto* conv = app.add_subcommand("convergence", "disagreement and monotonicity vs sample size (CSV)");
    conv->add_option("--mdp", mdp_path, "omit to use the built-in reference instance");
    conv->add_option("--expert", expert_path);
    conv->add_option("--behavioral", behavioral_path);
    conv->add_option("--taus", taus, "comma-separated sample sizes");
    conv->add_option("--panel", panel_size)->check(CLI::PositiveNumber);
    conv->add_option("--trials", trials)->check(CLI::PositiveNumber);
    conv->callback([&] {
        Instance inst = reference_convergence_instance();
        if (!mdp_path.empty()) {
            if (expert_path.empty() || behavioral_path.empty())
                throw SchemaError("--mdp needs --expert and --behavioral");
            auto mdp = io::mdp_from_json(io::read_json(mdp_path));
            const Dims d = mdp.dims();
            inst = Instance{std::move(mdp), io::deterministic_policy_from_json(io::read_json(expert_path), d),
                            io::policy_from_json(io::read_json(behavioral_path), d)};
        }
        const auto points = convergence_experiment(inst, parse_taus(taus), panel_size, trials, cfg.delta, cfg.seed);
        Output o(cfg.out);
        auto& os = o.stream();
        os << "tau,trials,queries,disagreements,disagreement_rate,support_recovered,monotonicity_violations,"
              "violation_rate,coverage_failures,seconds\n";
        for (const auto& p : points)
            os << p.tau << ',' << p.trials << ',' << p.queries << ',' << p.disagreements << ','
               << p.disagreement_rate() << ',' << p.support_recovered << ',' << p.monotonicity_violations << ','
               << p.violation_rate() << ',' << p.coverage_failures << ',' << p.seconds << '\n';
    });

    // demo
    std::size_t demo_tau = 2000;
    auto* demo = app.add_subcommand("demo", "lanechange sanity-check table for the synthetic experts");
    demo->add_option("--tau", demo_tau)->check(CLI::PositiveNumber);
    demo->callback([&] {
        const auto mdp = lanechange::mdp();
        const Dims d = mdp.dims();
        const auto experts = lanechange::experts();
        Dataset pooled;
        pooled.role = Role::Behavioral;
        std::vector<Dataset> expert_data;
        for (std::size_t i = 0; i < experts.size(); ++i) {
            expert_data.push_back(simulate(mdp, experts[i], demo_tau, derive_seed(cfg.seed, i)));
            pooled.trajectories.insert(pooled.trajectories.end(), expert_data.back().trajectories.begin(),
                                       expert_data.back().trajectories.end());
        }
        const Algorithm algo = parse_algo(cfg.algo);
        json rows = json::array();
        for (std::size_t i = 0; i < experts.size(); ++i) {
            const auto em = estimate(expert_data[i], pooled, d);
            const auto spec = make_spec(em, algo, cfg.delta);
            const auto r = behavioral_cloning_reward(em.expert_policy, em.expert_support);
            for (const auto& nr : RewardPanel{{"bc", r}, {"bc_neg", -r}}) {
                auto rec = io::to_json(nr.id, check_reward(nr.reward, spec, cfg.tol));
                rec["expert"] = lanechange::expert_name(static_cast<int>(i));
                rows.push_back(std::move(rec));
            }
        }
        emit(rows, cfg.out);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return code;
}
