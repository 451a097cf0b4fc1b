#ifndef C2SIM_EVAL_HPP
#define C2SIM_EVAL_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "c2sim/env.hpp"
#include "c2sim/neural.hpp"
#include "c2sim/ppo.hpp"
#include "c2sim/rng.hpp"

namespace c2sim {

class EvalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct TrajectoryStep {
    int step = 0;
    double clock = 0.0;  // after the action
    int action_index = 0;
    Action action;
    bool legal = true;
    double reward = 0.0;
    StepInfo info;
    bool done = false;
};

struct Trajectory {
    std::vector<TrajectoryStep> steps;
    TerminalCause cause = TerminalCause::None;
    double total_return = 0.0;
    bool success = false;  // payload completed
};

enum class PolicyMode { Stochastic, Greedy };

/// Runs `n` independent episodes of the frozen actor. Stochastic mode samples
/// the actor's distribution, greedy takes the argmax logits. Seeded and
/// reproducible; the checkpoint digest must match the scenario.
inline std::vector<Trajectory> rollout_policy(const Scenario& scenario, const Checkpoint& ck,
                                              int n, std::uint64_t seed, PolicyMode mode) {
    if (ck.scenario_digest != scenario_digest(scenario))
        throw EvalError("checkpoint was trained on a different scenario (digest mismatch)");
    Environment env(scenario, substream_seed(seed, "eval-env"));
    std::mt19937_64 sample_rng(substream_seed(seed, "eval-sampling"));

    std::vector<Trajectory> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int ep = 0; ep < n; ++ep) {
        std::vector<double> obs = env.reset();
        Trajectory traj;
        while (!env.done()) {
            std::vector<double> logits = forward(ck.actor, obs);
            int a;
            if (mode == PolicyMode::Greedy) {
                a = 0;
                for (std::size_t i = 1; i < logits.size(); ++i)
                    if (logits[i] > logits[static_cast<std::size_t>(a)]) a = static_cast<int>(i);
            } else {
                a = categorical_policy(logits, sample_rng).action;
            }
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
            obs = so.observation;
        }
        traj.cause = env.state().cause;
        traj.success = traj.cause == TerminalCause::PayloadComplete;
        out.push_back(std::move(traj));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Summary statistics

struct StatTriple {
    double mean = 0.0;
    double median = 0.0;
    double std_dev = 0.0;
};

inline StatTriple stats_of(std::vector<double> xs) {
    StatTriple t;
    if (xs.empty()) return t;
    double n = static_cast<double>(xs.size());
    for (double x : xs) t.mean += x;
    t.mean /= n;
    double var = 0.0;
    for (double x : xs) var += (x - t.mean) * (x - t.mean);
    t.std_dev = std::sqrt(var / n);
    std::sort(xs.begin(), xs.end());
    std::size_t m = xs.size() / 2;
    t.median = xs.size() % 2 ? xs[m] : 0.5 * (xs[m - 1] + xs[m]);
    return t;
}

// Computed over successful trajectories only; `defined` is false when there
// are none. Connection counts tally successful connect actions per channel.
struct SummaryStats {
    int count = 0;
    int success_count = 0;
    bool defined = false;
    StatTriple returns;
    StatTriple steps;
    StatTriple public_connections;
    StatTriple tor_connections;
};

inline SummaryStats summarize(const std::vector<Trajectory>& trajectories) {
    SummaryStats s;
    s.count = static_cast<int>(trajectories.size());
    std::vector<double> rets, steps, pub, tor;
    for (const auto& t : trajectories) {
        if (!t.success) continue;
        s.success_count += 1;
        rets.push_back(t.total_return);
        steps.push_back(static_cast<double>(t.steps.size()));
        double np = 0.0, nt = 0.0;
        for (const auto& st : t.steps)
            if (st.action.kind == ActionKind::Connect && st.info.connect_success)
                (st.action.mode == Channel::Public ? np : nt) += 1.0;
        pub.push_back(np);
        tor.push_back(nt);
    }
    s.defined = s.success_count > 0;
    s.returns = stats_of(rets);
    s.steps = stats_of(steps);
    s.public_connections = stats_of(pub);
    s.tor_connections = stats_of(tor);
    return s;
}

inline std::string summary_csv(const SummaryStats& s) {
    std::string out =
        "metric,mean,median,std\n";
    char line[160];
    auto row = [&](const char* name, const StatTriple& t) {
        std::snprintf(line, sizeof(line), "%s,%.6g,%.6g,%.6g\n", name, t.mean, t.median, t.std_dev);
        out += line;
    };
    std::snprintf(line, sizeof(line), "episodes,%d,,\nsuccesses,%d,,\ndefined,%d,,\n", s.count,
                  s.success_count, s.defined ? 1 : 0);
    out += line;
    row("return", s.returns);
    row("steps", s.steps);
    row("connections", s.public_connections);
    row("tor_connections", s.tor_connections);
    return out;
}

// ---------------------------------------------------------------------------
// Key-step extraction

struct KeyStep {
    std::string action;
    std::string target;
};

/// Filters a successful trajectory down to productive actions: scans that
/// discovered a host later exploited on the path, first successful exploits,
/// successful connects, and uploads that moved data. Order preserved.
inline std::vector<KeyStep> extract_key_steps(const Scenario& scenario, const Trajectory& traj) {
    if (!traj.success) throw EvalError("key steps are defined for successful trajectories only");

    std::set<int> exploited;  // hosts with a successful exploit anywhere on the path
    for (const auto& st : traj.steps)
        if (st.action.kind == ActionKind::Exploit && st.info.exploit_success)
            exploited.insert(st.action.host);

    std::vector<KeyStep> out;
    std::set<int> exploit_seen;
    for (const auto& st : traj.steps) {
        const Action& a = st.action;
        bool keep = false;
        std::string name;
        switch (a.kind) {
            case ActionKind::SubnetScan:
                for (int h : st.info.newly_discovered)
                    if (exploited.contains(h)) { keep = true; break; }
                name = "subnet_scan";
                break;
            case ActionKind::Exploit:
                keep = st.info.exploit_success && exploit_seen.insert(a.host).second;
                name = "exploit";
                break;
            case ActionKind::Connect:
                keep = st.info.connect_success;
                name = std::string("connect_") + channel_name(a.mode);
                break;
            case ActionKind::Upload:
                keep = st.info.bytes_mb > 0.0;
                name = std::string("upload_") + channel_name(a.mode);
                break;
            case ActionKind::Sleep:
                break;
        }
        if (keep) out.push_back({name, scenario.hosts[a.host].address.str()});
    }
    return out;
}

inline std::string key_steps_table(const std::vector<KeyStep>& steps) {
    std::string out = "action,target\n";
    for (const auto& k : steps) out += k.action + "," + k.target + "\n";
    return out;
}

// ---------------------------------------------------------------------------
// Communication timeline

struct TimelineRecord {
    double clock = 0.0;
    std::string event;    // "connect" or "upload"
    std::string mode;     // "public" or "tor"
    std::string outcome;  // "success", "failed", "alert", "dropped", "detected"
    double mb = 0.0;
};

/// Emits every stage-II/III action with its wall-clock time; the gaps between
/// records reflect sleeps and other stage-I actions.
inline std::vector<TimelineRecord> export_timeline(const Trajectory& traj) {
    std::vector<TimelineRecord> out;
    for (const auto& st : traj.steps) {
        const Action& a = st.action;
        if (a.kind != ActionKind::Connect && a.kind != ActionKind::Upload) continue;
        TimelineRecord r;
        r.clock = st.clock;
        r.mode = channel_name(a.mode);
        if (a.kind == ActionKind::Connect) {
            r.event = "connect";
            r.outcome = st.info.alert ? "alert" : (st.info.connect_success ? "success" : "failed");
        } else {
            r.event = "upload";
            r.mb = st.info.bytes_mb;
            if (st.info.detection_mode) r.outcome = "detected";
            else if (st.info.connection_dropped) r.outcome = "dropped";
            else if (!st.legal) r.outcome = "failed";
            else r.outcome = "success";
        }
        out.push_back(std::move(r));
    }
    return out;
}

inline std::string timeline_csv(const std::vector<TimelineRecord>& records) {
    std::string out = "clock,event,mode,outcome,mb\n";
    char line[160];
    for (const auto& r : records) {
        std::snprintf(line, sizeof(line), "%.17g,%s,%s,%s,%.17g\n", r.clock, r.event.c_str(),
                      r.mode.c_str(), r.outcome.c_str(), r.mb);
        out += line;
    }
    return out;
}

}  // namespace c2sim

#endif  // C2SIM_EVAL_HPP
