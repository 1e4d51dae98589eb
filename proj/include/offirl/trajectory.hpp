#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "offirl/error.hpp"
#include "offirl/mdp.hpp"
#include "offirl/rng.hpp"

namespace offirl {

struct Step {
    int state;
    int action;
    friend bool operator==(const Step&, const Step&) = default;
};

/// One episode: exactly H (state, action) pairs.
struct Trajectory {
    std::vector<Step> steps;
    friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

enum class Role { Expert, Behavioral };

struct Dataset {
    std::vector<Trajectory> trajectories;
    Role role = Role::Behavioral;
    std::optional<std::uint64_t> source_seed;

    std::size_t size() const { return trajectories.size(); }
    bool empty() const { return trajectories.empty(); }
    int horizon() const { return empty() ? 0 : static_cast<int>(trajectories.front().steps.size()); }

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Transition counts. n3 is populated for stages 0..H-2 only; n2 covers all
/// H stages and at the last stage counts the pairs themselves.
class CountTable {
public:
    CountTable() = default;
    explicit CountTable(Dims dims)
        : dims_(dims), n3_(dims.triple_count() * static_cast<std::size_t>(dims.states), 0),
          n2_(dims.triple_count(), 0) {}

    const Dims& dims() const { return dims_; }

    std::int64_t n3(int h, int s, int a, int next) const { return n3_[idx3(h, s, a, next)]; }
    std::int64_t& n3(int h, int s, int a, int next) { return n3_[idx3(h, s, a, next)]; }
    std::int64_t n2(int h, int s, int a) const { return n2_[idx2(h, s, a)]; }
    std::int64_t& n2(int h, int s, int a) { return n2_[idx2(h, s, a)]; }

    CountTable& operator+=(const CountTable& other) {
        require_same(dims_, other.dims_, "count tables");
        for (std::size_t i = 0; i < n3_.size(); ++i) n3_[i] += other.n3_[i];
        for (std::size_t i = 0; i < n2_.size(); ++i) n2_[i] += other.n2_[i];
        return *this;
    }

    friend bool operator==(const CountTable&, const CountTable&) = default;

private:
    std::size_t idx2(int h, int s, int a) const {
        return (static_cast<std::size_t>(h) * dims_.states + static_cast<std::size_t>(s)) * dims_.actions +
               static_cast<std::size_t>(a);
    }
    std::size_t idx3(int h, int s, int a, int next) const {
        return idx2(h, s, a) * static_cast<std::size_t>(dims_.states) + static_cast<std::size_t>(next);
    }

    Dims dims_{};
    std::vector<std::int64_t> n3_;
    std::vector<std::int64_t> n2_;
};

/// Checks lengths and index ranges against `dims`.
inline void validate_dataset(const Dataset& d, const Dims& dims) {
    for (std::size_t i = 0; i < d.trajectories.size(); ++i) {
        const auto& t = d.trajectories[i];
        if (t.steps.size() != static_cast<std::size_t>(dims.horizon)) {
            throw SchemaError("trajectory " + std::to_string(i) + " has " + std::to_string(t.steps.size()) +
                              " steps, expected " + std::to_string(dims.horizon));
        }
        for (const auto& st : t.steps) {
            if (st.state < 0 || st.state >= dims.states || st.action < 0 || st.action >= dims.actions) {
                throw SchemaError("trajectory " + std::to_string(i) + " has an out-of-range index");
            }
        }
    }
}

inline Trajectory simulate_one(const MdpWithoutReward& mdp, const StochasticPolicy& policy, SplitMix64& rng) {
    const Dims d = mdp.dims();
    Trajectory t;
    t.steps.reserve(static_cast<std::size_t>(d.horizon));
    int s = rng.categorical(mdp.initial());
    for (int h = 0; h < d.horizon; ++h) {
        const int a = rng.categorical(policy.row(h, s));
        t.steps.push_back({s, a});
        if (h + 1 < d.horizon) s = rng.categorical(mdp.transitions().row(h, s, a));
    }
    return t;
}

/// n trajectories; trajectory i draws from stream (seed, i).
inline Dataset simulate(const MdpWithoutReward& mdp, const StochasticPolicy& policy, std::size_t n, std::uint64_t seed,
                        Role role = Role::Behavioral) {
    require_same(policy.dims(), mdp.dims(), "policy vs mdp");
    if (n == 0) throw SchemaError("simulate: n must be positive");
    Dataset out;
    out.role = role;
    out.source_seed = seed;
    out.trajectories.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        SplitMix64 rng(seed, i);
        out.trajectories.push_back(simulate_one(mdp, policy, rng));
    }
    return out;
}

inline Dataset simulate(const MdpWithoutReward& mdp, const DeterministicPolicy& policy, std::size_t n,
                        std::uint64_t seed, Role role = Role::Expert) {
    return simulate(mdp, StochasticPolicy::from(policy), n, seed, role);
}

inline CountTable counts(const Dataset& d, const Dims& dims) {
    validate_dataset(d, dims);
    CountTable c(dims);
    for (const auto& t : d.trajectories) {
        for (int h = 0; h < dims.horizon; ++h) {
            const auto& st = t.steps[static_cast<std::size_t>(h)];
            ++c.n2(h, st.state, st.action);
            if (h + 1 < dims.horizon) ++c.n3(h, st.state, st.action, t.steps[static_cast<std::size_t>(h) + 1].state);
        }
    }
    return c;
}

inline void save_dataset(const Dataset& d, std::ostream& out) {
    for (const auto& t : d.trajectories) {
        nlohmann::json steps = nlohmann::json::array();
        for (const auto& st : t.steps) steps.push_back({st.state, st.action});
        out << nlohmann::json{{"steps", std::move(steps)}}.dump() << '\n';
    }
}

inline void save_dataset(const Dataset& d, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    save_dataset(d, out);
    if (!out) throw IoError("write failed for " + path);
}

/// Reads JSON Lines. All trajectories must share one length; with `dims`
/// given, lengths and indices are also range-checked. Errors name the line.
inline Dataset load_dataset(std::istream& in, std::optional<Dims> dims = std::nullopt, Role role = Role::Behavioral) {
    Dataset d;
    d.role = role;
    std::string line;
    std::size_t lineno = 0;
    std::optional<std::size_t> length;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = "line " + std::to_string(lineno);
        Trajectory t;
        try {
            const auto j = nlohmann::json::parse(line);
            for (const auto& pair : j.at("steps")) {
                if (!pair.is_array() || pair.size() != 2) throw SchemaError(where + ": each step must be [s, a]");
                t.steps.push_back({pair.at(0).get<int>(), pair.at(1).get<int>()});
            }
        } catch (const nlohmann::json::exception& e) {
            throw SchemaError(where + ": " + e.what());
        }
        const std::size_t expected = dims ? static_cast<std::size_t>(dims->horizon) : length.value_or(t.steps.size());
        if (t.steps.empty() || t.steps.size() != expected) {
            throw SchemaError(where + ": trajectory has " + std::to_string(t.steps.size()) + " steps, expected " +
                              std::to_string(expected));
        }
        length = t.steps.size();
        if (dims) {
            for (const auto& st : t.steps)
                if (st.state < 0 || st.state >= dims->states || st.action < 0 || st.action >= dims->actions)
                    throw SchemaError(where + ": index out of range");
        }
        d.trajectories.push_back(std::move(t));
    }
    if (d.trajectories.empty()) throw SchemaError("dataset contains no trajectories");
    return d;
}

inline Dataset load_dataset(const std::string& path, std::optional<Dims> dims = std::nullopt,
                            Role role = Role::Behavioral) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    return load_dataset(in, dims, role);
}

/// CSV rows `episode_id,h,s,a` (optional header line). `stage_base` is the
/// index of the first stage in the file. Episodes keep first-appearance order.
inline Dataset ingest_csv(std::istream& in, int horizon, int stage_base = 0, Role role = Role::Behavioral) {
    std::vector<std::string> order;
    std::map<std::string, std::vector<std::pair<int, Step>>> episodes;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 4) throw SchemaError("csv line " + std::to_string(lineno) + ": expected 4 fields");
        int h = 0, s = 0, a = 0;
        try {
            h = std::stoi(cells[1]);
            s = std::stoi(cells[2]);
            a = std::stoi(cells[3]);
        } catch (const std::exception&) {
            if (lineno == 1) continue;
            throw SchemaError("csv line " + std::to_string(lineno) + ": non-integer field");
        }
        auto [it, inserted] = episodes.try_emplace(cells[0]);
        if (inserted) order.push_back(cells[0]);
        it->second.push_back({h - stage_base, {s, a}});
    }
    Dataset d;
    d.role = role;
    for (const auto& id : order) {
        auto rows = episodes[id];
        std::sort(rows.begin(), rows.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
        if (rows.size() != static_cast<std::size_t>(horizon)) {
            throw SchemaError("episode " + id + " has " + std::to_string(rows.size()) + " steps, expected " +
                              std::to_string(horizon));
        }
        Trajectory t;
        for (int h = 0; h < horizon; ++h) {
            if (rows[static_cast<std::size_t>(h)].first != h)
                throw SchemaError("episode " + id + " does not cover stages contiguously");
            t.steps.push_back(rows[static_cast<std::size_t>(h)].second);
        }
        d.trajectories.push_back(std::move(t));
    }
    if (d.trajectories.empty()) throw SchemaError("csv contains no episodes");
    return d;
}

}  // namespace offirl
