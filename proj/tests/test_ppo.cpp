#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

#include "c2sim/ppo.hpp"
#include "fixtures.hpp"

using namespace c2sim;
using c2sim_test::micro1;

namespace {

// Reference GAE by direct summation: A_t = sum_l (gamma*lambda)^l * delta_{t+l},
// truncated at the first episode boundary.
GaeResult gae_direct(const std::vector<double>& rewards, const std::vector<double>& values,
                     double bootstrap, const std::vector<double>& dones, double gamma,
                     double lambda) {
    std::size_t T = rewards.size();
    GaeResult out;
    out.advantages.assign(T, 0.0);
    out.returns.assign(T, 0.0);
    for (std::size_t t = 0; t < T; ++t) {
        double acc = 0.0, w = 1.0;
        for (std::size_t l = t; l < T; ++l) {
            double next = (l + 1 < T) ? values[l + 1] : bootstrap;
            double mask = 1.0 - dones[l];
            acc += w * (rewards[l] + gamma * next * mask - values[l]);
            if (dones[l] == 1.0) break;
            w *= gamma * lambda;
        }
        out.advantages[t] = acc;
        out.returns[t] = acc + values[t];
    }
    return out;
}

}  // namespace

TEST_CASE("gae hand-worked cases") {
    SECTION("single terminal step") {
        GaeResult g = compute_gae({1.0}, {0.0}, 99.0, {1.0}, 0.99, 0.95);
        CHECK(g.advantages == std::vector<double>{1.0});
        CHECK(g.returns == std::vector<double>{1.0});
    }
    SECTION("lambda zero reduces to one-step deltas") {
        GaeResult g = compute_gae({1.0, 1.0}, {0.5, 0.5}, 0.0, {0.0, 1.0}, 1.0, 0.0);
        CHECK_THAT(g.advantages[0], Catch::Matchers::WithinAbs(1.0, 1e-15));
        CHECK_THAT(g.advantages[1], Catch::Matchers::WithinAbs(0.5, 1e-15));
    }
    SECTION("two-step recursion with the reference coefficients") {
        GaeResult g = compute_gae({1.0, 1.0}, {0.5, 0.5}, 0.0, {0.0, 1.0}, 0.99, 0.95);
        CHECK_THAT(g.advantages[0], Catch::Matchers::WithinAbs(1.46525, 1e-12));
        CHECK_THAT(g.advantages[1], Catch::Matchers::WithinAbs(0.5, 1e-15));
        CHECK_THAT(g.returns[0], Catch::Matchers::WithinAbs(1.96525, 1e-12));
    }
    SECTION("bootstrap feeds the last delta when unterminated") {
        GaeResult g = compute_gae({0.0}, {0.0}, 2.0, {0.0}, 0.5, 1.0);
        CHECK_THAT(g.advantages[0], Catch::Matchers::WithinAbs(1.0, 1e-15));
    }
    SECTION("length mismatch throws") {
        CHECK_THROWS_AS(compute_gae({1.0}, {1.0, 2.0}, 0.0, {0.0}, 0.99, 0.95), PpoError);
    }
}

TEST_CASE("gae matches direct summation on random instances") {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 300; ++trial) {
        std::size_t T = 1 + uniform_index(rng, 64);
        std::vector<double> r(T), v(T), d(T, 0.0);
        for (auto& x : r) x = 20.0 * uniform01(rng) - 10.0;
        for (auto& x : v) x = 20.0 * uniform01(rng) - 10.0;
        for (auto& x : d) x = uniform01(rng) < 0.15 ? 1.0 : 0.0;
        double bootstrap = 20.0 * uniform01(rng) - 10.0;
        double gamma = uniform01(rng);
        double lambda = uniform01(rng);

        GaeResult fast = compute_gae(r, v, bootstrap, d, gamma, lambda);
        GaeResult slow = gae_direct(r, v, bootstrap, d, gamma, lambda);
        for (std::size_t t = 0; t < T; ++t) {
            REQUIRE_THAT(fast.advantages[t],
                         Catch::Matchers::WithinAbs(slow.advantages[t], 1e-9));
            REQUIRE_THAT(fast.returns[t], Catch::Matchers::WithinAbs(slow.returns[t], 1e-9));
        }
    }
}

TEST_CASE("clipped surrogate worked examples") {
    std::vector<double> logits = {0.3, -0.2, 0.1};
    int action = 1;
    double lp = log_prob(logits, action);
    std::vector<double> dlogits;
    bool clipped = false;

    SECTION("ratio 1 is never clipped") {
        double surr =
            clipped_objective_logit_grad(logits, action, lp, 2.0, 0.2, 0.0, dlogits, clipped);
        CHECK_THAT(surr, Catch::Matchers::WithinAbs(2.0, 1e-12));
        CHECK_FALSE(clipped);
    }
    SECTION("ratio 1.5 with positive advantage clips to 1.2 and kills the gradient") {
        double old_lp = lp - std::log(1.5);
        double surr =
            clipped_objective_logit_grad(logits, action, old_lp, 1.0, 0.2, 0.0, dlogits, clipped);
        CHECK_THAT(surr, Catch::Matchers::WithinAbs(1.2, 1e-12));
        CHECK(clipped);
        for (double d : dlogits) CHECK(d == 0.0);
    }
    SECTION("ratio 0.5 with negative advantage clips to -0.8") {
        double old_lp = lp - std::log(0.5);
        double surr =
            clipped_objective_logit_grad(logits, action, old_lp, -1.0, 0.2, 0.0, dlogits, clipped);
        CHECK_THAT(surr, Catch::Matchers::WithinAbs(-0.8, 1e-12));
        CHECK(clipped);
        for (double d : dlogits) CHECK(d == 0.0);
    }
    SECTION("out-of-band ratio still passes gradient when unclipped branch is lower") {
        // ratio 1.5, advantage -1: min(-1.5, -1.2) keeps the unclipped branch
        double old_lp = lp - std::log(1.5);
        double surr =
            clipped_objective_logit_grad(logits, action, old_lp, -1.0, 0.2, 0.0, dlogits, clipped);
        CHECK_THAT(surr, Catch::Matchers::WithinAbs(-1.5, 1e-12));
        double norm = 0.0;
        for (double d : dlogits) norm += std::abs(d);
        CHECK(norm > 0.0);
    }
}

TEST_CASE("infinite clip band with zero entropy equals the plain surrogate gradient") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 200; ++trial) {
        std::size_t n = 2 + uniform_index(rng, 8);
        std::vector<double> logits(n);
        for (auto& v : logits) v = 4.0 * uniform01(rng) - 2.0;
        int action = static_cast<int>(uniform_index(rng, n));
        double old_lp = log_prob(logits, action) + (uniform01(rng) - 0.5);
        double adv = 6.0 * uniform01(rng) - 3.0;

        std::vector<double> dlogits;
        bool clipped = false;
        double surr = clipped_objective_logit_grad(logits, action, old_lp, adv, 1e18, 0.0,
                                                   dlogits, clipped);
        CHECK_FALSE(clipped);

        double ratio = std::exp(log_prob(logits, action) - old_lp);
        CHECK_THAT(surr, Catch::Matchers::WithinAbs(ratio * adv, 1e-9));
        std::vector<double> probs = softmax(logits);
        for (std::size_t k = 0; k < n; ++k) {
            double expected =
                ratio * adv * ((static_cast<int>(k) == action ? 1.0 : 0.0) - probs[k]);
            REQUIRE_THAT(dlogits[k], Catch::Matchers::WithinAbs(expected, 1e-9));
        }
    }
}

TEST_CASE("surrogate gradient survives finite differencing") {
    std::mt19937_64 rng(5);
    const double h = 1e-6;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> logits(5);
        for (auto& v : logits) v = 2.0 * uniform01(rng) - 1.0;
        int action = static_cast<int>(uniform_index(rng, 5));
        // keep the ratio well inside the band so the objective is smooth
        double old_lp = log_prob(logits, action) + 0.1 * (uniform01(rng) - 0.5);
        double adv = 4.0 * uniform01(rng) - 2.0;
        double beta = uniform01(rng) < 0.5 ? 0.0 : 0.01;

        std::vector<double> dlogits, scratch;
        bool clipped = false;
        clipped_objective_logit_grad(logits, action, old_lp, adv, 0.2, beta, dlogits, clipped);
        if (clipped) continue;

        for (std::size_t k = 0; k < logits.size(); ++k) {
            std::vector<double> up = logits, dn = logits;
            up[k] += h;
            dn[k] -= h;
            bool c2 = false;
            double fu =
                clipped_objective_logit_grad(up, action, old_lp, adv, 0.2, beta, scratch, c2);
            double fd =
                clipped_objective_logit_grad(dn, action, old_lp, adv, 0.2, beta, scratch, c2);
            double numeric = (fu - fd) / (2.0 * h);
            REQUIRE_THAT(dlogits[k], Catch::Matchers::WithinAbs(numeric, 1e-6));
        }
    }
}

TEST_CASE("checkpoints round-trip bit for bit") {
    std::mt19937_64 rng(31);
    Checkpoint ck;
    ck.scenario_digest = 0xdeadbeefcafe1234ull;
    ck.actor = NetParams::init({44, 16, 8}, rng);
    ck.critic = NetParams::init({44, 16, 1}, rng);
    ck.actor_opt = OptimizerState::for_net(ck.actor);
    ck.critic_opt = OptimizerState::for_net(ck.critic);
    ck.actor_opt.step = 7;
    ck.actor_opt.m.layers[0].w[3] = 0.125;
    ck.episodes = 42;
    ck.steps = 12345;
    std::ostringstream rs;
    rs << rng;
    ck.rng_state = rs.str();

    auto path = std::filesystem::temp_directory_path() / "c2sim_ck_test.c2rl";
    save_checkpoint(ck, path);
    Checkpoint back = load_checkpoint(path);
    std::filesystem::remove(path);

    CHECK(back.version == 1);
    CHECK(back.scenario_digest == ck.scenario_digest);
    CHECK(back.episodes == 42);
    CHECK(back.steps == 12345);
    CHECK(back.rng_state == ck.rng_state);
    CHECK(back.actor_opt.step == 7);
    CHECK(back.actor_opt.m.layers[0].w[3] == 0.125);
    REQUIRE(back.actor.dims == ck.actor.dims);
    for (std::size_t li = 0; li < ck.actor.layers.size(); ++li) {
        CHECK(back.actor.layers[li].w == ck.actor.layers[li].w);
        CHECK(back.actor.layers[li].b == ck.actor.layers[li].b);
    }
    std::vector<double> x(44, 0.25);
    CHECK(forward(back.actor, x) == forward(ck.actor, x));
    CHECK(forward(back.critic, x) == forward(ck.critic, x));
}

TEST_CASE("corrupt checkpoints are rejected") {
    auto path = std::filesystem::temp_directory_path() / "c2sim_ck_bad.c2rl";
    {
        std::ofstream os(path, std::ios::binary);
        os << "not a checkpoint";
    }
    CHECK_THROWS_AS(load_checkpoint(path), PpoError);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_checkpoint(path), PpoError);  // missing file
}

TEST_CASE("rollout collector spans episode boundaries") {
    Scenario s = micro1();
    Environment env(s, 1);
    RolloutCollector collector(env, 9);
    std::mt19937_64 rng(substream_seed(3, "sampling"));
    NetParams actor = NetParams::init({env.observation_size(), 16, 8}, rng);
    NetParams critic = NetParams::init({env.observation_size(), 16, 1}, rng);

    std::vector<EpisodeRecord> episodes;
    RolloutBuffer buf = collector.collect(actor, critic, 4096, rng, &episodes);
    CHECK(buf.horizon == 4096);
    CHECK(buf.obs_dim == env.observation_size());
    // the 2000-step cap closes at least two episodes inside this horizon
    CHECK(episodes.size() >= 2);
    CHECK(collector.episodes_completed() == static_cast<int>(episodes.size()));
    double done_count = 0.0;
    for (double d : buf.dones) done_count += d;
    CHECK(done_count == static_cast<double>(episodes.size()));
    for (const auto& ep : episodes) {
        CHECK(ep.steps > 0);
        CHECK(ep.clock > 0.0);
    }
    // indices are consecutive from zero
    for (std::size_t i = 0; i < episodes.size(); ++i)
        CHECK(episodes[i].index == static_cast<int>(i));
}

TEST_CASE("ppo update moves parameters and reports sane metrics") {
    Scenario s = micro1();
    Environment env(s, 1);
    RolloutCollector collector(env, 9);
    std::mt19937_64 rng(substream_seed(3, "sampling"));
    Hyperparameters hp;
    hp.horizon = 256;
    hp.hidden = {16};
    NetParams actor = NetParams::init({env.observation_size(), 16, 8}, rng);
    NetParams critic = NetParams::init({env.observation_size(), 16, 1}, rng);
    OptimizerState aopt = OptimizerState::for_net(actor);
    OptimizerState copt = OptimizerState::for_net(critic);

    RolloutBuffer buf = collector.collect(actor, critic, hp.horizon, rng);
    NetParams before = actor;
    UpdateMetrics m = ppo_update(buf, actor, critic, aopt, copt, hp, rng);
    CHECK(std::isfinite(m.actor_loss));
    CHECK(m.critic_loss > 0.0);
    CHECK(m.entropy > 0.0);
    CHECK(m.entropy <= std::log(8.0) + 1e-9);
    CHECK(m.clip_fraction >= 0.0);
    CHECK(m.clip_fraction <= 1.0);
    CHECK(actor.layers[0].w != before.layers[0].w);
    // 5 epochs * ceil(256/64) minibatches
    CHECK(aopt.step == 20);
}

TEST_CASE("training is deterministic in the seed") {
    Scenario s = micro1();
    Hyperparameters hp;
    hp.horizon = 256;
    hp.hidden = {16};

    auto run = [&](std::uint64_t seed) {
        std::ostringstream metrics;
        TrainResult r = train(s, hp, 8, seed, metrics);
        return std::pair<std::string, TrainResult>(metrics.str(), std::move(r));
    };
    auto [ma, ra] = run(0);
    auto [mb, rb] = run(0);
    auto [mc, rc] = run(1);

    CHECK(ma == mb);
    CHECK(ma != mc);
    CHECK(ra.episodes == rb.episodes);
    CHECK(ra.episodes >= 8);
    CHECK(ra.checkpoint.rng_state == rb.checkpoint.rng_state);
    for (std::size_t li = 0; li < ra.checkpoint.actor.layers.size(); ++li)
        CHECK(ra.checkpoint.actor.layers[li].w == rb.checkpoint.actor.layers[li].w);
    CHECK(ra.checkpoint.scenario_digest == scenario_digest(s));
    CHECK(ra.steps == static_cast<long>(ra.updates) * hp.horizon);

    // metrics stream carries both record types
    CHECK(ma.find("episode,0,") != std::string::npos);
    CHECK(ma.find("update,1,") != std::string::npos);
}

TEST_CASE("zero episode budget trains nothing") {
    std::ostringstream metrics;
    TrainResult r = train(micro1(), Hyperparameters{}, 0, 0, metrics);
    CHECK(r.updates == 0);
    CHECK(r.episodes == 0);
    CHECK(metrics.str().empty());
}
