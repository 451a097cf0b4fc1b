#include <catch2/catch_amalgamated.hpp>

#include "c2sim/eval.hpp"
#include "fixtures.hpp"

using namespace c2sim;
using c2sim_test::micro1;

namespace {

// Replays a fixed action script and records it in trajectory form.
Trajectory scripted(const Scenario& s, const std::vector<int>& actions, std::uint64_t seed = 0) {
    Environment env(s, 0);
    std::vector<double> obs = env.reset(seed);
    Trajectory traj;
    for (int a : actions) {
        if (env.done()) break;
        StepOutcome so = env.step(a);
        TrajectoryStep ts;
        ts.step = env.state().step_count;
        ts.clock = env.state().clock;
        ts.action_index = a;
        ts.action = env.catalog()[static_cast<std::size_t>(a)];
        ts.legal = !so.info.misaligned;
        ts.reward = so.reward;
        ts.info = so.info;
        ts.done = so.done;
        traj.steps.push_back(std::move(ts));
        traj.total_return += so.reward;
    }
    traj.cause = env.state().cause;
    traj.success = traj.cause == TerminalCause::PayloadComplete;
    return traj;
}

Checkpoint random_checkpoint(const Scenario& s, std::uint64_t seed) {
    Environment env(s, 0);
    std::mt19937_64 rng(seed);
    Checkpoint ck;
    ck.scenario_digest = scenario_digest(s);
    ck.actor = NetParams::init({env.observation_size(), 16,
                                static_cast<int>(env.catalog().size())}, rng);
    ck.critic = NetParams::init({env.observation_size(), 16, 1}, rng);
    ck.actor_opt = OptimizerState::for_net(ck.actor);
    ck.critic_opt = OptimizerState::for_net(ck.critic);
    return ck;
}

}  // namespace

TEST_CASE("stats_of basics") {
    StatTriple empty = stats_of({});
    CHECK(empty.mean == 0.0);
    CHECK(empty.std_dev == 0.0);

    StatTriple one = stats_of({7.0});
    CHECK(one.mean == 7.0);
    CHECK(one.median == 7.0);
    CHECK(one.std_dev == 0.0);

    StatTriple four = stats_of({1.0, 3.0, 2.0, 4.0});
    CHECK(four.mean == 2.5);
    CHECK(four.median == 2.5);
    CHECK_THAT(four.std_dev, Catch::Matchers::WithinAbs(std::sqrt(1.25), 1e-12));
}

TEST_CASE("summarize over the optimal micro-1 episode") {
    Trajectory t = scripted(micro1(), {1, 3, 4, 6});
    REQUIRE(t.success);
    CHECK(t.total_return == 13095.0);

    SummaryStats s = summarize({t});
    CHECK(s.count == 1);
    CHECK(s.success_count == 1);
    CHECK(s.defined);
    CHECK(s.returns.mean == 13095.0);
    CHECK(s.returns.std_dev == 0.0);
    CHECK(s.steps.mean == 4.0);
    CHECK(s.public_connections.mean == 1.0);
    CHECK(s.tor_connections.mean == 0.0);

    std::string csv = summary_csv(s);
    CHECK(csv.find("metric,mean,median,std") == 0);
    CHECK(csv.find("return,13095") != std::string::npos);
    CHECK(csv.find("successes,1") != std::string::npos);
}

TEST_CASE("summaries with no successes are undefined") {
    Scenario s = micro1();
    s.constants.max_steps = 3;
    Trajectory t = scripted(s, {0, 0, 0});
    CHECK_FALSE(t.success);
    CHECK(t.cause == TerminalCause::StepCap);

    SummaryStats stats = summarize({t, t});
    CHECK(stats.count == 2);
    CHECK(stats.success_count == 0);
    CHECK_FALSE(stats.defined);
    CHECK(summary_csv(stats).find("defined,0") != std::string::npos);
}

TEST_CASE("key steps of the optimal trajectory") {
    Trajectory t = scripted(micro1(), {1, 3, 4, 6});
    std::vector<KeyStep> ks = extract_key_steps(micro1(), t);
    REQUIRE(ks.size() == 4);
    CHECK(ks[0].action == "subnet_scan");
    CHECK(ks[0].target == "(1,0)");
    CHECK(ks[1].action == "exploit");
    CHECK(ks[1].target == "(1,1)");
    CHECK(ks[2].action == "connect_public");
    CHECK(ks[3].action == "upload_public");

    std::string table = key_steps_table(ks);
    CHECK(table.find("action,target") == 0);
    CHECK(table.find("exploit,(1,1)") != std::string::npos);
}

TEST_CASE("key steps drop noise actions") {
    // sleep, redundant re-scan, misaligned upload, then the productive path
    Trajectory t = scripted(micro1(), {0, 1, 1, 6, 3, 4, 6});
    REQUIRE(t.success);
    std::vector<KeyStep> ks = extract_key_steps(micro1(), t);
    REQUIRE(ks.size() == 4);  // the second scan and the noise are gone
    CHECK(ks[0].action == "subnet_scan");
    CHECK(ks[1].action == "exploit");
}

TEST_CASE("key steps require success") {
    Scenario s = micro1();
    s.constants.max_steps = 2;
    Trajectory t = scripted(s, {1, 3});
    CHECK_FALSE(t.success);
    CHECK_THROWS_AS(extract_key_steps(s, t), EvalError);
}

TEST_CASE("timeline of the optimal trajectory") {
    Trajectory t = scripted(micro1(), {1, 3, 4, 6});
    std::vector<TimelineRecord> tl = export_timeline(t);
    REQUIRE(tl.size() == 2);  // stage-I actions carry no traffic
    CHECK(tl[0].event == "connect");
    CHECK(tl[0].mode == "public");
    CHECK(tl[0].outcome == "success");
    CHECK(tl[0].clock == 50.0);
    CHECK(tl[1].event == "upload");
    CHECK(tl[1].outcome == "success");
    CHECK(tl[1].clock == 60.0);
    CHECK(tl[1].mb == 1000.0);

    std::string csv = timeline_csv(tl);
    CHECK(csv.find("clock,event,mode,outcome,mb") == 0);
    CHECK(csv.find("50,connect,public,success,0") != std::string::npos);
    CHECK(csv.find("60,upload,public,success,1000") != std::string::npos);
}

TEST_CASE("timeline outcome labels") {
    SECTION("failed and alert connects") {
        Scenario s = micro1();
        s.constants.pass_prob_tor = 0.0;
        Trajectory t = scripted(s, {1, 3, 5, 5, 5, 5});
        std::vector<TimelineRecord> tl = export_timeline(t);
        REQUIRE(tl.size() == 4);
        CHECK(tl[0].outcome == "failed");
        CHECK(tl[2].outcome == "failed");
        CHECK(tl[3].outcome == "alert");
    }
    SECTION("dropped upload") {
        Scenario s = micro1();
        s.constants.cutoff_prob_public = 1.0;
        Trajectory t = scripted(s, {1, 3, 4, 6});
        std::vector<TimelineRecord> tl = export_timeline(t);
        REQUIRE(tl.size() == 2);
        CHECK(tl[1].outcome == "dropped");
        CHECK(tl[1].mb == 0.0);
    }
    SECTION("detected upload") {
        Scenario s = micro1();
        s.sensitive[0].payload_mb = 10000.0;
        Trajectory t = scripted(s, {1, 3, 4, 6, 6, 6, 6, 6, 6});
        std::vector<TimelineRecord> tl = export_timeline(t);
        REQUIRE(tl.size() == 7);
        CHECK(tl.back().outcome == "detected");
    }
    SECTION("misaligned upload is failed") {
        Trajectory t = scripted(micro1(), {1, 3, 6, 4, 6});
        std::vector<TimelineRecord> tl = export_timeline(t);
        REQUIRE(tl.size() == 3);
        CHECK(tl[0].outcome == "failed");
        CHECK(tl[0].mb == 0.0);
    }
    SECTION("empty trajectory gives an empty timeline") {
        CHECK(export_timeline(Trajectory{}).empty());
        CHECK(timeline_csv({}) == "clock,event,mode,outcome,mb\n");
    }
}

TEST_CASE("rollout_policy is seeded and reproducible") {
    Scenario s = micro1();
    Checkpoint ck = random_checkpoint(s, 3);

    auto returns = [&](std::uint64_t seed, PolicyMode mode) {
        std::vector<double> r;
        for (const auto& t : rollout_policy(s, ck, 3, seed, mode)) r.push_back(t.total_return);
        return r;
    };
    CHECK(returns(1, PolicyMode::Stochastic) == returns(1, PolicyMode::Stochastic));
    CHECK(returns(1, PolicyMode::Greedy) == returns(2, PolicyMode::Greedy));  // no sampling
    CHECK(rollout_policy(s, ck, 0, 0, PolicyMode::Greedy).empty());

    std::vector<Trajectory> ts = rollout_policy(s, ck, 2, 0, PolicyMode::Stochastic);
    REQUIRE(ts.size() == 2);
    for (const auto& t : ts) {
        CHECK(t.cause != TerminalCause::None);
        double sum = 0.0;
        for (const auto& st : t.steps) sum += st.reward;
        CHECK(sum == t.total_return);
    }
}

TEST_CASE("rollout_policy rejects mismatched checkpoints") {
    Checkpoint ck = random_checkpoint(micro1(), 3);
    ck.scenario_digest ^= 1;
    CHECK_THROWS_AS(rollout_policy(micro1(), ck, 1, 0, PolicyMode::Greedy), EvalError);
}
