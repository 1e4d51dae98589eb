#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

#include "offirl/instances.hpp"
#include "offirl/trajectory.hpp"

using namespace offirl;

TEST(Trajectory, DeterministicModelGivesIdenticalEpisodes) {
    const Dims d{4, 2, 5};
    const auto data = simulate(chain_mdp(d), DeterministicPolicy(d, 0), 20, 3);
    ASSERT_EQ(data.size(), 20u);
    for (const auto& t : data.trajectories) EXPECT_EQ(t, data.trajectories.front());
    EXPECT_EQ(data.trajectories.front().steps.back().state, 3);
}

TEST(Trajectory, SameSeedSameBytes) {
    const auto inst = random_instance({4, 3, 4}, 8);
    const auto a = simulate(inst.mdp, inst.behavioral, 200, 42);
    const auto b = simulate(inst.mdp, inst.behavioral, 200, 42);
    std::ostringstream sa, sb;
    save_dataset(a, sa);
    save_dataset(b, sb);
    EXPECT_EQ(sa.str(), sb.str());
    EXPECT_EQ(a.source_seed, 42u);
    const auto c = simulate(inst.mdp, inst.behavioral, 200, 43);
    EXPECT_NE(a, c);
}

TEST(Trajectory, PrefixStableAcrossSizes) {
    const auto inst = random_instance({3, 2, 3}, 9);
    const auto small = simulate(inst.mdp, inst.behavioral, 10, 5);
    const auto large = simulate(inst.mdp, inst.behavioral, 100, 5);
    for (std::size_t i = 0; i < small.size(); ++i) EXPECT_EQ(small.trajectories[i], large.trajectories[i]);
}

TEST(Trajectory, EmpiricalVisitationWithinTolerance) {
    const auto inst = random_instance({3, 3, 3}, 10, 1.0);
    const auto data = simulate(inst.mdp, inst.behavioral, 100000, 6);
    const auto c = counts(data, inst.mdp.dims());
    const auto vis = visitation(inst.mdp, inst.behavioral);
    for (int h = 0; h < 3; ++h)
        for (int s = 0; s < 3; ++s)
            for (int a = 0; a < 3; ++a) EXPECT_NEAR(c.n2(h, s, a) / 1e5, vis.at(h, s, a), 0.01);
}

TEST(Trajectory, SingleTrajectoryCounts) {
    const Dims d{3, 2, 4};
    Dataset data;
    data.trajectories.push_back({{{0, 1}, {2, 0}, {2, 1}, {1, 1}}});
    const auto c = counts(data, d);
    int units = 0;
    for (int h = 0; h < 4; ++h)
        for (int s = 0; s < 3; ++s)
            for (int a = 0; a < 2; ++a)
                for (int n = 0; n < 3; ++n) {
                    EXPECT_LE(c.n3(h, s, a, n), 1);
                    units += static_cast<int>(c.n3(h, s, a, n));
                }
    EXPECT_EQ(units, 3);
    EXPECT_EQ(c.n3(0, 0, 1, 2), 1);
    EXPECT_EQ(c.n2(3, 1, 1), 1);
}

TEST(Trajectory, CountsAreLinearAndOrderFree) {
    const auto inst = random_instance({4, 2, 3}, 11);
    const Dims d = inst.mdp.dims();
    auto data = simulate(inst.mdp, inst.behavioral, 300, 7);
    const auto once = counts(data, d);

    Dataset doubled = data;
    doubled.trajectories.insert(doubled.trajectories.end(), data.trajectories.begin(), data.trajectories.end());
    auto twice = once;
    twice += once;
    EXPECT_EQ(counts(doubled, d), twice);

    std::reverse(data.trajectories.begin(), data.trajectories.end());
    EXPECT_EQ(counts(data, d), once);
}

TEST(Trajectory, CountsMatchNaiveScan) {
    const auto inst = random_instance({4, 3, 4}, 12);
    const Dims d = inst.mdp.dims();
    const auto data = simulate(inst.mdp, inst.behavioral, 500, 8);
    const auto c = counts(data, d);
    for (int h = 0; h + 1 < d.horizon; ++h) {
        std::int64_t stage_total = 0;
        for (int s = 0; s < d.states; ++s)
            for (int a = 0; a < d.actions; ++a) {
                std::int64_t marginal = 0;
                for (int n = 0; n < d.states; ++n) {
                    std::int64_t naive = 0;
                    for (const auto& t : data.trajectories)
                        naive += t.steps[h].state == s && t.steps[h].action == a && t.steps[h + 1].state == n;
                    EXPECT_EQ(c.n3(h, s, a, n), naive);
                    marginal += c.n3(h, s, a, n);
                }
                EXPECT_EQ(c.n2(h, s, a), marginal);
                stage_total += marginal;
            }
        EXPECT_EQ(stage_total, 500);
    }
}

TEST(Trajectory, JsonLinesRoundTrip) {
    const auto inst = random_instance({4, 3, 3}, 13);
    const auto data = simulate(inst.mdp, inst.behavioral, 50, 9);
    std::stringstream buf;
    save_dataset(data, buf);
    auto back = load_dataset(buf, inst.mdp.dims());
    back.source_seed = data.source_seed;
    EXPECT_EQ(back, data);
}

TEST(Trajectory, EmptyFileRejected) {
    std::istringstream empty("");
    EXPECT_THROW(load_dataset(empty), SchemaError);
}

TEST(Trajectory, ShortLineNamesLineNumber) {
    std::istringstream in("{\"steps\":[[0,0],[1,1],[0,1]]}\n{\"steps\":[[0,0],[1,1]]}\n");
    try {
        load_dataset(in, Dims{2, 2, 3});
        FAIL() << "expected SchemaError";
    } catch (const SchemaError& e) {
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
    }
    std::istringstream bad_index("{\"steps\":[[0,0],[5,1],[0,1]]}\n");
    EXPECT_THROW(load_dataset(bad_index, Dims{2, 2, 3}), SchemaError);
    std::istringstream garbage("not json\n");
    EXPECT_THROW(load_dataset(garbage), SchemaError);
}

TEST(Trajectory, MissingFileIsIoError) {
    EXPECT_THROW(load_dataset(std::string("/nonexistent/dir/data.jsonl")), IoError);
}

TEST(Trajectory, CsvIngestion) {
    std::istringstream in("episode_id,h,s,a\nA,1,0,1\nA,0,2,0\nB,0,1,1\nB,1,1,0\n");
    const auto data = ingest_csv(in, 2);
    ASSERT_EQ(data.size(), 2u);
    EXPECT_EQ(data.trajectories[0].steps[0], (Step{2, 0}));
    EXPECT_EQ(data.trajectories[0].steps[1], (Step{0, 1}));
    EXPECT_EQ(data.trajectories[1].steps[1], (Step{1, 0}));

    std::istringstream one_based("e,1,0,0\ne,2,1,1\n");
    EXPECT_EQ(ingest_csv(one_based, 2, 1).trajectories[0].steps[1], (Step{1, 1}));

    std::istringstream short_episode("e,0,0,0\ne,1,1,1\nf,0,0,0\n");
    EXPECT_THROW(ingest_csv(short_episode, 2), SchemaError);
    std::istringstream gap("e,0,0,0\ne,2,1,1\n");
    EXPECT_THROW(ingest_csv(gap, 2), SchemaError);
}
