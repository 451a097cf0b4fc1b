#ifndef C2SIM_ENV_HPP
#define C2SIM_ENV_HPP

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "c2sim/rng.hpp"
#include "c2sim/scenario.hpp"

namespace c2sim {

// ---------------------------------------------------------------------------
// World state

struct HostState {
    bool discovered = false;
    bool compromised = false;
    double infection_time = 0.0;  // defined when compromised
};

struct FirewallState {
    double last_update_time = -1.0;  // -1 = never updated
    bool blacklist = false;          // C2 address blocked (public channel)
};

struct WindowEvent {
    double end_time = 0.0;
    double volume_mb = 0.0;
    double active_s = 0.0;
};

struct SensitiveState {
    bool public_connected = false;
    bool tor_connected = false;
    bool isolated = false;
    int attempts_public = 0;
    int attempts_tor = 0;
    bool tor_accessible = true;
    bool connection_rewarded = false;  // the connection reward is granted once per host
    double remaining_payload = 0.0;
    std::vector<WindowEvent> window_events;
    double last_activity_public = 0.0;  // valid while public_connected
    double last_activity_tor = 0.0;     // valid while tor_connected

    bool connected(Channel m) const { return m == Channel::Public ? public_connected : tor_connected; }
    void set_connected(Channel m, bool v) {
        (m == Channel::Public ? public_connected : tor_connected) = v;
    }
    int attempts(Channel m) const { return m == Channel::Public ? attempts_public : attempts_tor; }
    double last_activity(Channel m) const {
        return m == Channel::Public ? last_activity_public : last_activity_tor;
    }
};

enum class TerminalCause { None, PayloadComplete, Isolated, StepCap, ClockCap };

inline const char* terminal_cause_name(TerminalCause c) {
    switch (c) {
        case TerminalCause::None: return "none";
        case TerminalCause::PayloadComplete: return "payload_complete";
        case TerminalCause::Isolated: return "isolated";
        case TerminalCause::StepCap: return "step_cap";
        case TerminalCause::ClockCap: return "clock_cap";
    }
    return "?";
}

struct WorldState {
    double clock = 0.0;
    int step_count = 0;
    std::vector<HostState> hosts;
    std::vector<FirewallState> firewalls;
    std::vector<SensitiveState> sensitive;
    bool done = false;
    TerminalCause cause = TerminalCause::None;
};

// Structured per-step record mirrored into trajectory traces.
struct StepInfo {
    bool misaligned = false;
    double wall_time = 0.0;
    bool alert = false;
    std::optional<Channel> detection_mode;
    double bytes_mb = 0.0;
    std::vector<int> newly_discovered;  // host indices
    bool exploit_success = false;
    bool connect_success = false;
    bool connection_dropped = false;    // upload cut-off
    TerminalCause terminal_cause = TerminalCause::None;
};

struct StepOutcome {
    std::vector<double> observation;
    double reward = 0.0;
    bool done = false;
    StepInfo info;
};

class EnvError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Observation layout, fixed by the scenario

struct ObservationLayout {
    std::vector<int> subnet_ids;         // one-hot positions
    int max_local = 0;                   // local one-hot width = max_local + 1
    std::vector<std::string> os_labels;  // sorted unique
    std::vector<std::string> process_labels;

    int per_host = 0;
    int per_sensitive = 10;
    int total = 0;

    static ObservationLayout from(const Scenario& s) {
        ObservationLayout L;
        L.subnet_ids = s.subnets;
        std::sort(L.subnet_ids.begin(), L.subnet_ids.end());
        std::set<std::string> os, procs;
        for (const auto& h : s.hosts) {
            L.max_local = std::max(L.max_local, h.address.local);
            os.insert(h.os);
            for (const auto& p : h.processes) procs.insert(p);
        }
        L.os_labels.assign(os.begin(), os.end());
        L.process_labels.assign(procs.begin(), procs.end());
        L.per_host = static_cast<int>(L.subnet_ids.size()) + (L.max_local + 1) +
                     static_cast<int>(L.os_labels.size()) +
                     static_cast<int>(service_universe().size()) +
                     static_cast<int>(L.process_labels.size()) + 4;
        L.total = L.per_host * static_cast<int>(s.hosts.size()) +
                  L.per_sensitive * static_cast<int>(s.sensitive.size());
        return L;
    }
};

// ---------------------------------------------------------------------------
// Environment

/// Episodic simulator of the three-stage campaign: infection (scan/exploit),
/// connection (public/Tor C2), exfiltration (chunked uploads under volume and
/// active-time detection). One instance is a single logical thread of
/// control; independent instances may run concurrently.
class Environment {
public:
    explicit Environment(Scenario scenario, std::uint64_t seed = 0)
        : scenario_(std::move(scenario)),
          catalog_(enumerate_actions(scenario_)),
          layout_(ObservationLayout::from(scenario_)),
          rng_(seed) {
        auto violations = validate_scenario(scenario_);
        if (!violations.empty())
            throw EnvError("invalid scenario: " + violations.front().field + ": " +
                           violations.front().rule);
        // Precompute chains and subnet adjacency once.
        for (int sn : scenario_.subnets) chains_[sn] = firewall_chain(scenario_, sn);
        for (const auto& f : scenario_.firewalls) {
            if (f.inner != kInternet && f.outer != kInternet) {
                adjacency_[f.inner].insert(f.outer);
                adjacency_[f.outer].insert(f.inner);
            }
        }
        goal_sensitive_ = scenario_.goal_index();
        reset(seed);
    }

    const Scenario& scenario() const { return scenario_; }
    const ActionCatalog& catalog() const { return catalog_; }
    const ObservationLayout& layout() const { return layout_; }
    int observation_size() const { return layout_.total; }

    /// Starts a new episode. Passing a seed reseeds the RNG stream; omitting
    /// it continues the current stream (used between training episodes).
    std::vector<double> reset(std::optional<std::uint64_t> seed = std::nullopt) {
        if (seed) rng_.seed(*seed);
        state_ = WorldState{};
        state_.hosts.assign(scenario_.hosts.size(), HostState{});
        state_.firewalls.assign(scenario_.firewalls.size(), FirewallState{});
        state_.sensitive.assign(scenario_.sensitive.size(), SensitiveState{});
        for (std::size_t i = 0; i < scenario_.sensitive.size(); ++i)
            state_.sensitive[i].remaining_payload = scenario_.sensitive[i].payload_mb;
        int fh = scenario_.host_index(scenario_.foothold);
        state_.hosts[fh].discovered = true;
        state_.hosts[fh].compromised = true;
        state_.hosts[fh].infection_time = 0.0;
        return observe();
    }

    StepOutcome step(int action_index) {
        if (state_.done) throw EnvError("step called on finished episode");
        if (action_index < 0 || action_index >= static_cast<int>(catalog_.size()))
            throw EnvError("action index out of range");
        const Action& a = catalog_[static_cast<std::size_t>(action_index)];
        const ConstantSet& c = scenario_.constants;

        StepOutcome out;
        // Idle connections found expired at the start of a step are dropped
        // before the action is interpreted.
        apply_idle_drops();

        out.info.misaligned = is_misaligned(a);
        double wall = out.info.misaligned ? c.wall_times.misaligned : wall_time(a);
        advance_clock(wall);
        out.info.wall_time = wall;

        double reward = -action_cost(a, out.info.misaligned);
        if (!out.info.misaligned) {
            switch (a.kind) {
                case ActionKind::Sleep: break;
                case ActionKind::SubnetScan: reward += apply_subnet_scan(a.host, out.info); break;
                case ActionKind::Exploit: reward += apply_exploit(a.host, a.exploit, out.info); break;
                case ActionKind::Connect: reward += apply_connect(a.host, a.mode, out.info); break;
                case ActionKind::Upload: reward += apply_upload(a.host, a.mode, out.info); break;
            }
        }

        state_.step_count += 1;
        if (!state_.done) {
            if (state_.step_count >= c.max_steps) finish(TerminalCause::StepCap);
            else if (state_.clock >= c.max_seconds) finish(TerminalCause::ClockCap);
        }

        out.reward = reward;
        out.done = state_.done;
        out.info.terminal_cause = state_.cause;
        out.observation = observe();
        return out;
    }

    bool done() const { return state_.done; }
    const WorldState& state() const { return state_; }
    void set_state(const WorldState& w) { state_ = w; }
    const std::vector<int>& chain(int subnet) const { return chains_.at(subnet); }

    /// True when the action's preconditions are unmet in the current state.
    bool is_misaligned(const Action& a) const {
        switch (a.kind) {
            case ActionKind::Sleep:
                return false;
            case ActionKind::SubnetScan:
                return !state_.hosts[a.host].compromised;
            case ActionKind::Exploit:
                return !state_.hosts[a.host].discovered;
            case ActionKind::Connect: {
                int t = sensitive_of(a.host);
                return !state_.hosts[a.host].compromised || state_.sensitive[t].isolated;
            }
            case ActionKind::Upload: {
                int t = sensitive_of(a.host);
                return !state_.sensitive[t].connected(a.mode);
            }
        }
        return true;
    }

    /// Flat feature vector; layout is a pure function of the scenario.
    std::vector<double> observe() const {
        const auto& L = layout_;
        std::vector<double> obs(static_cast<std::size_t>(L.total), 0.0);
        std::size_t off = 0;
        for (std::size_t h = 0; h < scenario_.hosts.size(); ++h) {
            const HostSpec& spec = scenario_.hosts[h];
            const HostState& st = state_.hosts[h];
            auto one_hot = [&](int pos, int width) {
                if (pos >= 0 && pos < width) obs[off + static_cast<std::size_t>(pos)] = 1.0;
                off += static_cast<std::size_t>(width);
            };
            int sn_pos = static_cast<int>(
                std::find(L.subnet_ids.begin(), L.subnet_ids.end(), spec.address.subnet) -
                L.subnet_ids.begin());
            one_hot(sn_pos, static_cast<int>(L.subnet_ids.size()));
            one_hot(spec.address.local, L.max_local + 1);
            int os_pos = static_cast<int>(
                std::find(L.os_labels.begin(), L.os_labels.end(), spec.os) - L.os_labels.begin());
            one_hot(os_pos, static_cast<int>(L.os_labels.size()));
            for (const auto& label : service_universe()) {
                if (std::find(spec.services.begin(), spec.services.end(), label) != spec.services.end())
                    obs[off] = 1.0;
                ++off;
            }
            for (const auto& label : L.process_labels) {
                if (std::find(spec.processes.begin(), spec.processes.end(), label) !=
                    spec.processes.end())
                    obs[off] = 1.0;
                ++off;
            }
            obs[off++] = st.discovered ? 1.0 : 0.0;
            obs[off++] = spec.discovery_value / 1000.0;
            obs[off++] = st.compromised ? 1.0 : 0.0;
            obs[off++] = spec.infection_value / 1000.0;
        }
        const ConstantSet& c = scenario_.constants;
        for (std::size_t t = 0; t < scenario_.sensitive.size(); ++t) {
            const SensitiveState& ss = state_.sensitive[t];
            int h = scenario_.host_index(scenario_.sensitive[t].address);
            const HostState& hs = state_.hosts[static_cast<std::size_t>(h)];
            obs[off++] = hs.compromised ? (state_.clock - hs.infection_time) / 3600.0 : 0.0;
            obs[off++] = ss.public_connected ? 1.0 : 0.0;
            obs[off++] = ss.tor_connected ? 1.0 : 0.0;
            obs[off++] = ss.isolated ? 1.0 : 0.0;
            obs[off++] = static_cast<double>(ss.attempts_public) / c.connect_attempt_limit;
            obs[off++] = static_cast<double>(ss.attempts_tor) / c.connect_attempt_limit;
            obs[off++] = ss.tor_accessible ? 1.0 : 0.0;
            obs[off++] = ss.remaining_payload / scenario_.sensitive[t].payload_mb;
            auto [vol, act] = window_sums(ss);
            obs[off++] = vol / c.egress_volume_mb;
            obs[off++] = act / c.active_upload_s;
        }
        return obs;
    }

private:
    int sensitive_of(int host) const {
        return scenario_.sensitive_index(scenario_.hosts[host].address);
    }

    double wall_time(const Action& a) const {
        const WallTimes& w = scenario_.constants.wall_times;
        switch (a.kind) {
            case ActionKind::Sleep: return w.sleep;
            case ActionKind::SubnetScan: return w.scan;
            case ActionKind::Exploit: return w.exploit;
            case ActionKind::Connect: return a.mode == Channel::Public ? w.connect_public : w.connect_tor;
            case ActionKind::Upload: return w.upload;
        }
        return 1.0;
    }

    // Cost = base cost, scaled for targeted actions by the target's best
    // defended service tier.
    double action_cost(const Action& a, bool misaligned) const {
        const ActionCosts& b = scenario_.constants.base_costs;
        if (misaligned) return b.misaligned;
        switch (a.kind) {
            case ActionKind::Sleep: return b.sleep;
            case ActionKind::SubnetScan: return b.scan * scenario_.tier_multiplier(a.host);
            case ActionKind::Exploit: return b.exploit * scenario_.tier_multiplier(a.host);
            case ActionKind::Connect: return b.connect * scenario_.tier_multiplier(a.host);
            case ActionKind::Upload: return b.upload * scenario_.tier_multiplier(a.host);
        }
        return b.misaligned;
    }

    bool bernoulli(double p) {
        if (p >= 1.0) return true;
        if (p <= 0.0) return false;
        return uniform01(rng_) < p;
    }

    void finish(TerminalCause cause) {
        state_.done = true;
        state_.cause = cause;
    }

    // Connections with no upload activity for idle_drop_s or longer are
    // cleared at the start of the following step.
    void apply_idle_drops() {
        double timeout = scenario_.constants.idle_drop_s;
        for (auto& ss : state_.sensitive) {
            if (ss.public_connected && state_.clock - ss.last_activity_public >= timeout)
                ss.public_connected = false;
            if (ss.tor_connected && state_.clock - ss.last_activity_tor >= timeout)
                ss.tor_connected = false;
        }
    }

    // Advances the wall clock and applies any periodic firewall updates whose
    // schedule has a point in (old clock, new clock].
    void advance_clock(double seconds) {
        double old_clock = state_.clock;
        state_.clock += seconds;
        for (std::size_t i = 0; i < scenario_.firewalls.size(); ++i) {
            double period = scenario_.firewalls[i].update_period;
            if (period <= 0.0) continue;
            double point = std::floor(state_.clock / period) * period;
            if (point > old_clock && point <= state_.clock)
                state_.firewalls[i].last_update_time = point;
        }
    }

    double apply_subnet_scan(int host, StepInfo& info) {
        double reward = 0.0;
        int subnet = scenario_.hosts[host].address.subnet;
        auto adj_it = adjacency_.find(subnet);
        for (std::size_t h = 0; h < scenario_.hosts.size(); ++h) {
            const HostSpec& spec = scenario_.hosts[h];
            bool visible = false;
            if (spec.address.subnet == subnet) {
                visible = true;
            } else if (adj_it != adjacency_.end() && adj_it->second.contains(spec.address.subnet)) {
                for (const auto& svc : spec.services)
                    if (scenario_.service_exposed(svc)) { visible = true; break; }
            }
            if (visible && !state_.hosts[h].discovered) {
                state_.hosts[h].discovered = true;
                reward += spec.discovery_value;
                info.newly_discovered.push_back(static_cast<int>(h));
            }
        }
        return reward;
    }

    double apply_exploit(int host, int exploit, StepInfo& info) {
        const HostSpec& spec = scenario_.hosts[host];
        const ExploitSpec& x = scenario_.exploits[exploit];
        if (!exploit_applicable(spec, x)) return 0.0;
        if (!bernoulli(x.success_prob)) return 0.0;
        info.exploit_success = true;
        HostState& hs = state_.hosts[host];
        double reward = 0.0;
        if (!hs.compromised) {
            hs.compromised = true;
            reward += spec.infection_value;
        }
        // Refreshing the infection time is the only recovery path after a
        // firewall update; no repeat reward.
        hs.infection_time = state_.clock;
        return reward;
    }

    double apply_connect(int host, Channel mode, StepInfo& info) {
        const ConstantSet& c = scenario_.constants;
        int t = sensitive_of(host);
        SensitiveState& ss = state_.sensitive[t];
        const auto& chain = chains_.at(scenario_.hosts[host].address.subnet);

        (mode == Channel::Public ? ss.attempts_public : ss.attempts_tor) += 1;
        if (ss.attempts(mode) > c.connect_attempt_limit) {
            // Emergency update of the subnet's gateway firewall.
            info.alert = true;
            FirewallState& gw = state_.firewalls[chain.front()];
            gw.last_update_time = state_.clock;
            if (mode == Channel::Tor) ss.tor_accessible = false;
            else gw.blacklist = true;
            return 0.0;
        }

        double infection_time = state_.hosts[host].infection_time;
        for (int fw : chain)
            if (state_.firewalls[fw].last_update_time > infection_time) return 0.0;
        if (mode == Channel::Tor && !ss.tor_accessible) return 0.0;
        if (mode == Channel::Public)
            for (int fw : chain)
                if (state_.firewalls[fw].blacklist) return 0.0;

        double p = mode == Channel::Public ? c.pass_prob_public : c.pass_prob_tor;
        if (!bernoulli(std::pow(p, static_cast<double>(chain.size())))) return 0.0;

        info.connect_success = true;
        ss.set_connected(mode, true);
        if (mode == Channel::Public) ss.last_activity_public = state_.clock;
        else ss.last_activity_tor = state_.clock;
        // First successful connect per host earns the connection reward;
        // re-established channels do not, which rules out reconnect farming.
        if (ss.connection_rewarded) return 0.0;
        ss.connection_rewarded = true;
        return c.reward_connection;
    }

    std::pair<double, double> window_sums(const SensitiveState& ss) const {
        const ConstantSet& c = scenario_.constants;
        double vol = 0.0, act = 0.0;
        for (const auto& e : ss.window_events) {
            if (e.end_time > state_.clock - c.monitor_window_s) {
                vol += e.volume_mb;
                act += e.active_s;
            }
        }
        return {vol, act};
    }

    double apply_upload(int host, Channel mode, StepInfo& info) {
        const ConstantSet& c = scenario_.constants;
        int t = sensitive_of(host);
        SensitiveState& ss = state_.sensitive[t];

        double cutoff = mode == Channel::Public ? c.cutoff_prob_public : c.cutoff_prob_tor;
        if (bernoulli(cutoff)) {
            // Connection drops before any data moves; no detection penalty.
            ss.set_connected(mode, false);
            info.connection_dropped = true;
            return 0.0;
        }

        double chunk = mode == Channel::Public ? c.chunk_public_mb : c.chunk_tor_mb;
        double volume = std::min(chunk, ss.remaining_payload);
        ss.remaining_payload -= volume;
        info.bytes_mb = volume;
        double reward = c.reward_per_mb * volume;

        ss.window_events.push_back({state_.clock, volume, c.wall_times.upload});
        // Drop expired events; both channels share one per-host ledger.
        std::erase_if(ss.window_events, [&](const WindowEvent& e) {
            return e.end_time <= state_.clock - c.monitor_window_s;
        });
        if (mode == Channel::Public) ss.last_activity_public = state_.clock;
        else ss.last_activity_tor = state_.clock;

        auto [vol, act] = window_sums(ss);
        if (vol > c.egress_volume_mb || act > c.active_upload_s) {
            info.detection_mode = mode;
            if (mode == Channel::Tor) {
                reward += c.penalty_tor;
                ss.tor_accessible = false;
                ss.tor_connected = false;
            } else {
                reward += c.penalty_public;
                ss.isolated = true;
                ss.public_connected = false;
                ss.tor_connected = false;
                if (t == goal_sensitive_) finish(TerminalCause::Isolated);
            }
        }
        if (ss.remaining_payload <= 0.0 && t == goal_sensitive_) {
            reward += c.reward_completion;
            finish(TerminalCause::PayloadComplete);
        }
        return reward;
    }

    Scenario scenario_;
    ActionCatalog catalog_;
    ObservationLayout layout_;
    std::map<int, std::vector<int>> chains_;
    std::map<int, std::set<int>> adjacency_;
    int goal_sensitive_ = -1;
    WorldState state_;
    std::mt19937_64 rng_;
};

// ---------------------------------------------------------------------------
// Trace export

struct TraceRecord {
    int step = 0;
    double clock = 0.0;
    ActionKind kind = ActionKind::Sleep;
    std::string target;   // "s:l" or "-" for sleep
    std::string mode;     // "public", "tor" or "-"
    bool legal = true;
    double reward = 0.0;
    bool done = false;
    bool alert = false;
    double bytes_mb = 0.0;
};

inline std::string trace_header() {
    return "step,clock,action,target,mode,legal,reward,done,alert,bytes";
}

inline std::string trace_line(const TraceRecord& r) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%s,%s,%s,%d,%.17g,%d,%d,%.17g", r.step, r.clock,
                  kind_name(r.kind), r.target.c_str(), r.mode.c_str(), r.legal ? 1 : 0, r.reward,
                  r.done ? 1 : 0, r.alert ? 1 : 0, r.bytes_mb);
    return buf;
}

inline TraceRecord make_trace_record(const Scenario& s, int step, double clock, const Action& a,
                                     const StepOutcome& out) {
    TraceRecord r;
    r.step = step;
    r.clock = clock;
    r.kind = a.kind;
    if (a.host >= 0) {
        const HostAddr& addr = s.hosts[a.host].address;
        r.target = std::to_string(addr.subnet) + ":" + std::to_string(addr.local);
    } else {
        r.target = "-";
    }
    r.mode = (a.kind == ActionKind::Connect || a.kind == ActionKind::Upload)
                 ? channel_name(a.mode)
                 : "-";
    r.legal = !out.info.misaligned;
    r.reward = out.reward;
    r.done = out.done;
    r.alert = out.info.alert || out.info.detection_mode.has_value();
    r.bytes_mb = out.info.bytes_mb;
    return r;
}

}  // namespace c2sim

#endif  // C2SIM_ENV_HPP
