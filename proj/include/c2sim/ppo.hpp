#ifndef C2SIM_PPO_HPP
#define C2SIM_PPO_HPP

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "c2sim/env.hpp"
#include "c2sim/neural.hpp"
#include "c2sim/rng.hpp"
#include "c2sim/scenario.hpp"

namespace c2sim {

class PpoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Hyperparameters {
    double gamma = 0.99;
    double lambda = 0.95;
    double clip_epsilon = 0.2;
    double entropy_coeff = 0.001;
    int epochs = 5;
    int minibatch = 64;
    double actor_lr = 3e-5;
    double critic_lr = 3e-4;
    int horizon = 4096;
    double value_loss_coeff = 0.5;
    bool normalize_advantages = true;
    // Rewards span five orders of magnitude; the critic regresses scaled
    // returns so its output stays near unit scale. Advantage normalization
    // makes the actor invariant to the constant.
    double reward_scale = 1e-4;
    std::vector<int> hidden = {128, 64};
};

// Fixed-horizon transition store for one PPO update.
struct RolloutBuffer {
    int horizon = 0;
    int obs_dim = 0;
    std::vector<double> observations;  // horizon * obs_dim, flattened
    std::vector<int> actions;
    std::vector<double> log_probs;  // behavior policy
    std::vector<double> rewards;
    std::vector<double> dones;  // 0/1
    std::vector<double> values;
    double bootstrap_value = 0.0;

    void resize(int T, int dim) {
        horizon = T;
        obs_dim = dim;
        observations.assign(static_cast<std::size_t>(T) * dim, 0.0);
        actions.assign(static_cast<std::size_t>(T), 0);
        log_probs.assign(static_cast<std::size_t>(T), 0.0);
        rewards.assign(static_cast<std::size_t>(T), 0.0);
        dones.assign(static_cast<std::size_t>(T), 0.0);
        values.assign(static_cast<std::size_t>(T), 0.0);
    }
    std::vector<double> obs_at(int t) const {
        auto b = observations.begin() + static_cast<std::ptrdiff_t>(t) * obs_dim;
        return {b, b + obs_dim};
    }
};

struct GaeResult {
    std::vector<double> advantages;
    std::vector<double> returns;
};

/// Generalized advantage estimation over one buffer. Episode boundaries are
/// masked by `dones`; `bootstrap` stands in for the value past the horizon.
inline GaeResult compute_gae(const std::vector<double>& rewards, const std::vector<double>& values,
                             double bootstrap, const std::vector<double>& dones, double gamma,
                             double lambda) {
    std::size_t T = rewards.size();
    if (values.size() != T || dones.size() != T)
        throw PpoError("compute_gae: length mismatch");
    GaeResult out;
    out.advantages.assign(T, 0.0);
    out.returns.assign(T, 0.0);
    double gae = 0.0;
    for (std::size_t t = T; t-- > 0;) {
        double mask = 1.0 - dones[t];
        double next_value = (t + 1 < T) ? values[t + 1] : bootstrap;
        double delta = rewards[t] + gamma * next_value * mask - values[t];
        gae = delta + gamma * lambda * mask * gae;
        out.advantages[t] = gae;
        out.returns[t] = gae + values[t];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Rollout collection

struct EpisodeRecord {
    int index = 0;
    double episode_return = 0.0;
    int steps = 0;
    double clock = 0.0;
};

/// Steps the environment for a fixed horizon, resetting on episode end.
/// Completed episodes are appended to `episodes`; partial-episode accumulators
/// persist in the collector between calls so a horizon boundary does not lose
/// an episode.
class RolloutCollector {
public:
    RolloutCollector(Environment& env, std::uint64_t env_seed) : env_(env) {
        obs_ = env_.reset(env_seed);
    }

    RolloutBuffer collect(const NetParams& actor, const NetParams& critic, int horizon,
                          std::mt19937_64& rng, std::vector<EpisodeRecord>* episodes = nullptr) {
        RolloutBuffer buf;
        buf.resize(horizon, env_.observation_size());
        for (int t = 0; t < horizon; ++t) {
            std::vector<double> logits = forward(actor, obs_);
            PolicySample sample = categorical_policy(logits, rng);
            double value = forward(critic, obs_)[0];

            StepOutcome out = env_.step(sample.action);
            std::copy(obs_.begin(), obs_.end(),
                      buf.observations.begin() + static_cast<std::ptrdiff_t>(t) * buf.obs_dim);
            buf.actions[static_cast<std::size_t>(t)] = sample.action;
            buf.log_probs[static_cast<std::size_t>(t)] = sample.log_prob;
            buf.rewards[static_cast<std::size_t>(t)] = out.reward;
            buf.dones[static_cast<std::size_t>(t)] = out.done ? 1.0 : 0.0;
            buf.values[static_cast<std::size_t>(t)] = value;

            episode_return_ += out.reward;
            episode_steps_ += 1;
            if (out.done) {
                if (episodes)
                    episodes->push_back({episode_index_, episode_return_, episode_steps_,
                                         env_.state().clock});
                episode_index_ += 1;
                episode_return_ = 0.0;
                episode_steps_ = 0;
                obs_ = env_.reset();
            } else {
                obs_ = out.observation;
            }
        }
        // Bootstrap with the critic on the final observation; a done boundary
        // is already masked by the last done flag.
        buf.bootstrap_value = forward(critic, obs_)[0];
        return buf;
    }

    int episodes_completed() const { return episode_index_; }

private:
    Environment& env_;
    std::vector<double> obs_;
    double episode_return_ = 0.0;
    int episode_steps_ = 0;
    int episode_index_ = 0;
};

// ---------------------------------------------------------------------------
// Clipped-surrogate update

struct UpdateMetrics {
    double actor_loss = 0.0;   // negative mean surrogate objective
    double critic_loss = 0.0;  // mean squared error to returns
    double entropy = 0.0;
    double clip_fraction = 0.0;
};

// Gradient of the per-sample clipped objective + entropy bonus w.r.t. logits.
// Returns the surrogate value; flags `clipped` when the ratio left the band.
inline double clipped_objective_logit_grad(const std::vector<double>& logits, int action,
                                           double old_log_prob, double advantage, double eps,
                                           double beta, std::vector<double>& dlogits,
                                           bool& clipped) {
    std::vector<double> probs = softmax(logits);
    double lp = log_prob(logits, action);
    double ratio = std::exp(lp - old_log_prob);
    double unclipped = ratio * advantage;
    double clamped = std::clamp(ratio, 1.0 - eps, 1.0 + eps) * advantage;
    double surr = std::min(unclipped, clamped);
    clipped = ratio < 1.0 - eps || ratio > 1.0 + eps;

    // The min gates the gradient: nothing flows once the ratio is clipped and
    // the clipped branch is active.
    bool pass = !(clipped && clamped < unclipped);
    double coeff = pass ? ratio * advantage : 0.0;

    double h = entropy(probs);
    dlogits.assign(logits.size(), 0.0);
    for (std::size_t k = 0; k < logits.size(); ++k) {
        double dlp = (static_cast<int>(k) == action ? 1.0 : 0.0) - probs[k];
        double dh = -probs[k] * (std::log(std::max(probs[k], 1e-300)) + h);
        dlogits[k] = coeff * dlp + beta * dh;
    }
    return surr + beta * h;
}

/// One PPO update: `epochs` passes over shuffled minibatches; the actor
/// ascends the clipped surrogate plus entropy bonus, the critic descends the
/// squared error to the returns.
inline UpdateMetrics ppo_update(const RolloutBuffer& buf, NetParams& actor, NetParams& critic,
                                OptimizerState& actor_opt, OptimizerState& critic_opt,
                                const Hyperparameters& hp, std::mt19937_64& rng) {
    // The critic lives in reward_scale space; scale the rewards to match.
    std::vector<double> scaled_rewards = buf.rewards;
    for (double& r : scaled_rewards) r *= hp.reward_scale;
    GaeResult gae = compute_gae(scaled_rewards, buf.values, buf.bootstrap_value, buf.dones,
                                hp.gamma, hp.lambda);
    std::vector<double> adv = gae.advantages;
    if (hp.normalize_advantages) {
        double mean = 0.0;
        for (double a : adv) mean += a;
        mean /= static_cast<double>(adv.size());
        double var = 0.0;
        for (double a : adv) var += (a - mean) * (a - mean);
        var /= static_cast<double>(adv.size());
        double sd = std::sqrt(var) + 1e-8;
        for (double& a : adv) a = (a - mean) / sd;
    }

    UpdateMetrics metrics;
    long samples_seen = 0, clipped_seen = 0;
    double sum_surr = 0.0, sum_vloss = 0.0, sum_entropy = 0.0;

    std::vector<int> order(static_cast<std::size_t>(buf.horizon));
    for (int i = 0; i < buf.horizon; ++i) order[static_cast<std::size_t>(i)] = i;

    for (int epoch = 0; epoch < hp.epochs; ++epoch) {
        shuffle_in_place(order, rng);
        for (int start = 0; start < buf.horizon; start += hp.minibatch) {
            int end = std::min(start + hp.minibatch, buf.horizon);
            int n = end - start;
            NetGrads actor_grad = NetParams::zeros(actor.dims);
            NetGrads critic_grad = NetParams::zeros(critic.dims);
            for (int i = start; i < end; ++i) {
                int t = order[static_cast<std::size_t>(i)];
                std::vector<double> obs = buf.obs_at(t);

                ForwardCache acache;
                std::vector<double> logits = forward(actor, obs, &acache);
                std::vector<double> dlogits;
                bool was_clipped = false;
                double surr = clipped_objective_logit_grad(
                    logits, buf.actions[static_cast<std::size_t>(t)],
                    buf.log_probs[static_cast<std::size_t>(t)], adv[static_cast<std::size_t>(t)],
                    hp.clip_epsilon, hp.entropy_coeff, dlogits, was_clipped);
                if (!std::isfinite(surr))
                    throw PpoError("ppo_update: non-finite surrogate objective");
                // Ascend: feed the negated objective gradient to the optimizer.
                for (double& d : dlogits) d = -d / static_cast<double>(n);
                backward(actor, acache, dlogits, actor_grad);

                ForwardCache ccache;
                double v = forward(critic, obs, &ccache)[0];
                double err = v - gae.returns[static_cast<std::size_t>(t)];
                std::vector<double> dv = {hp.value_loss_coeff * 2.0 * err /
                                          static_cast<double>(n)};
                backward(critic, ccache, dv, critic_grad);

                sum_surr += surr;
                sum_vloss += err * err;
                sum_entropy += entropy(softmax(logits));
                clipped_seen += was_clipped ? 1 : 0;
                samples_seen += 1;
            }
            optimizer_step(actor, actor_grad, actor_opt, hp.actor_lr);
            optimizer_step(critic, critic_grad, critic_opt, hp.critic_lr);
        }
    }
    metrics.actor_loss = -sum_surr / static_cast<double>(samples_seen);
    metrics.critic_loss = sum_vloss / static_cast<double>(samples_seen);
    metrics.entropy = sum_entropy / static_cast<double>(samples_seen);
    metrics.clip_fraction = static_cast<double>(clipped_seen) / static_cast<double>(samples_seen);
    return metrics;
}

// ---------------------------------------------------------------------------
// Checkpoints

struct Checkpoint {
    std::uint32_t version = 1;
    std::uint64_t scenario_digest = 0;
    NetParams actor;
    NetParams critic;
    OptimizerState actor_opt;
    OptimizerState critic_opt;
    long episodes = 0;
    long steps = 0;
    std::string rng_state;  // serialized mt19937_64
};

namespace detail {

inline void write_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 4);
}
inline void write_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}
inline void write_f64(std::ostream& os, double d) {
    std::uint64_t v;
    std::memcpy(&v, &d, 8);
    write_u64(os, v);
}
inline std::uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}
inline std::uint64_t read_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}
inline double read_f64(std::istream& is) {
    std::uint64_t v = read_u64(is);
    double d;
    std::memcpy(&d, &v, 8);
    return d;
}

inline void write_net(std::ostream& os, const NetParams& p) {
    write_u32(os, static_cast<std::uint32_t>(p.dims.size()));
    for (int d : p.dims) write_u32(os, static_cast<std::uint32_t>(d));
    for (const auto& l : p.layers) {
        for (double v : l.w) write_f64(os, v);
        for (double v : l.b) write_f64(os, v);
    }
}
inline NetParams read_net(std::istream& is) {
    std::uint32_t nd = read_u32(is);
    std::vector<int> dims(nd);
    for (auto& d : dims) d = static_cast<int>(read_u32(is));
    NetParams p = NetParams::zeros(dims);
    for (auto& l : p.layers) {
        for (double& v : l.w) v = read_f64(is);
        for (double& v : l.b) v = read_f64(is);
    }
    return p;
}
inline void write_opt(std::ostream& os, const OptimizerState& s) {
    write_u64(os, static_cast<std::uint64_t>(s.step));
    write_f64(os, s.beta1);
    write_f64(os, s.beta2);
    write_f64(os, s.epsilon);
    write_net(os, s.m);
    write_net(os, s.v);
}
inline OptimizerState read_opt(std::istream& is) {
    OptimizerState s;
    s.step = static_cast<long>(read_u64(is));
    s.beta1 = read_f64(is);
    s.beta2 = read_f64(is);
    s.epsilon = read_f64(is);
    s.m = read_net(is);
    s.v = read_net(is);
    return s;
}

}  // namespace detail

// File layout: magic "C2RL", version, scenario digest, episode/step counters,
// actor net, critic net, optimizer states, RNG state; all integers and
// 64-bit reals little-endian.
inline void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary);
        if (!os) throw PpoError("cannot open " + tmp.string() + " for writing");
        os.write("C2RL", 4);
        detail::write_u32(os, ck.version);
        detail::write_u64(os, ck.scenario_digest);
        detail::write_u64(os, static_cast<std::uint64_t>(ck.episodes));
        detail::write_u64(os, static_cast<std::uint64_t>(ck.steps));
        detail::write_net(os, ck.actor);
        detail::write_net(os, ck.critic);
        detail::write_opt(os, ck.actor_opt);
        detail::write_opt(os, ck.critic_opt);
        detail::write_u64(os, ck.rng_state.size());
        os.write(ck.rng_state.data(), static_cast<std::streamsize>(ck.rng_state.size()));
        if (!os) throw PpoError("write failure on " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw PpoError("cannot open checkpoint " + path.string());
    char magic[4];
    is.read(magic, 4);
    if (std::memcmp(magic, "C2RL", 4) != 0) throw PpoError("bad checkpoint magic");
    Checkpoint ck;
    ck.version = detail::read_u32(is);
    if (ck.version != 1) throw PpoError("unrecognized checkpoint version");
    ck.scenario_digest = detail::read_u64(is);
    ck.episodes = static_cast<long>(detail::read_u64(is));
    ck.steps = static_cast<long>(detail::read_u64(is));
    ck.actor = detail::read_net(is);
    ck.critic = detail::read_net(is);
    ck.actor_opt = detail::read_opt(is);
    ck.critic_opt = detail::read_opt(is);
    std::uint64_t rlen = detail::read_u64(is);
    ck.rng_state.resize(rlen);
    is.read(ck.rng_state.data(), static_cast<std::streamsize>(rlen));
    if (!is) throw PpoError("truncated checkpoint " + path.string());
    return ck;
}

// ---------------------------------------------------------------------------
// Training loop

struct TrainResult {
    Checkpoint checkpoint;
    int episodes = 0;
    long steps = 0;
    int updates = 0;
};

/// Alternates rollout collection and PPO updates until at least
/// `episode_budget` episodes have finished. Per-episode and per-update
/// metrics are appended to `metrics` as type-tagged comma-separated lines.
/// Fully reproducible from (scenario, hyperparameters, seed).
inline TrainResult train(const Scenario& scenario, const Hyperparameters& hp, int episode_budget,
                         std::uint64_t seed, std::ostream& metrics,
                         const std::function<void(const Checkpoint&, int)>& on_checkpoint = {}) {
    Environment env(scenario, substream_seed(seed, "env"));
    std::mt19937_64 init_rng(substream_seed(seed, "policy-init"));
    std::mt19937_64 sample_rng(substream_seed(seed, "sampling"));

    std::vector<int> actor_dims = {env.observation_size()};
    for (int h : hp.hidden) actor_dims.push_back(h);
    actor_dims.push_back(static_cast<int>(env.catalog().size()));
    std::vector<int> critic_dims = {env.observation_size()};
    for (int h : hp.hidden) critic_dims.push_back(h);
    critic_dims.push_back(1);

    NetParams actor = NetParams::init(actor_dims, init_rng);
    NetParams critic = NetParams::init(critic_dims, init_rng);
    OptimizerState actor_opt = OptimizerState::for_net(actor);
    OptimizerState critic_opt = OptimizerState::for_net(critic);

    RolloutCollector collector(env, substream_seed(seed, "env-reset"));
    long total_steps = 0;
    int updates = 0;

    char line[256];
    while (collector.episodes_completed() < episode_budget) {
        std::vector<EpisodeRecord> episodes;
        RolloutBuffer buf = collector.collect(actor, critic, hp.horizon, sample_rng, &episodes);
        total_steps += hp.horizon;
        for (const auto& ep : episodes) {
            std::snprintf(line, sizeof(line), "episode,%d,%.17g,%d,%.17g\n", ep.index,
                          ep.episode_return, ep.steps, ep.clock);
            metrics << line;
        }
        UpdateMetrics um = ppo_update(buf, actor, critic, actor_opt, critic_opt, hp, sample_rng);
        updates += 1;
        std::snprintf(line, sizeof(line), "update,%d,%.17g,%.17g,%.17g,%.17g\n", updates,
                      um.actor_loss, um.critic_loss, um.entropy, um.clip_fraction);
        metrics << line;

        if (on_checkpoint && updates % 50 == 0) {
            Checkpoint periodic{1, scenario_digest(scenario), actor, critic, actor_opt,
                                critic_opt, collector.episodes_completed(), total_steps, {}};
            on_checkpoint(periodic, updates);
        }
    }

    TrainResult result;
    result.episodes = collector.episodes_completed();
    result.steps = total_steps;
    result.updates = updates;
    std::ostringstream rs;
    rs << sample_rng;
    result.checkpoint = Checkpoint{1, scenario_digest(scenario), std::move(actor),
                                   std::move(critic), std::move(actor_opt), std::move(critic_opt),
                                   result.episodes, total_steps, rs.str()};
    return result;
}

}  // namespace c2sim

#endif  // C2SIM_PPO_HPP
