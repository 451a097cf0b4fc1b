#ifndef C2SIM_ORACLE_HPP
#define C2SIM_ORACLE_HPP

#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

#include "c2sim/env.hpp"
#include "c2sim/scenario.hpp"

namespace c2sim {

class OracleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Exact solving requires every outcome probability to be 0 or 1.
inline bool scenario_deterministic(const Scenario& s) {
    auto det = [](double p) { return p == 0.0 || p == 1.0; };
    for (const auto& x : s.exploits)
        if (!det(x.success_prob)) return false;
    return det(s.constants.pass_prob_public) && det(s.constants.pass_prob_tor) &&
           det(s.constants.cutoff_prob_public) && det(s.constants.cutoff_prob_tor);
}

namespace detail {

// The oracle solves the uncapped process; on scenarios within the guards the
// optimum completes far inside the episode caps.
inline Scenario uncapped(Scenario s) {
    s.constants.max_steps = std::numeric_limits<int>::max() / 2;
    s.constants.max_seconds = 1e18;
    return s;
}

// Canonical digest of the dynamics-relevant state. Clock enters only through
// bounded relative quantities (window offsets, idle gaps, periodic-update
// phase), which keeps the reachable digest set finite on guarded scenarios.
inline std::string state_digest(const Scenario& s, const Environment& env, const WorldState& w) {
    std::string d;
    d.reserve(256);
    auto num = [&](double x) {
        // raw little-endian bytes: exact and much cheaper than formatting
        char buf[sizeof(double)];
        std::memcpy(buf, &x, sizeof(double));
        d.append(buf, sizeof(double));
    };
    for (const auto& h : w.hosts) {
        d += h.discovered ? 'D' : '.';
        d += h.compromised ? 'C' : '.';
    }
    d += '|';
    for (const auto& f : w.firewalls) d += f.blacklist ? 'B' : '.';
    d += '|';
    const ConstantSet& c = s.constants;
    for (std::size_t t = 0; t < s.sensitive.size(); ++t) {
        const SensitiveState& ss = w.sensitive[t];
        int h = s.host_index(s.sensitive[t].address);
        const auto& chain = env.chain(s.hosts[h].address.subnet);
        for (int fw : chain)
            d += (w.hosts[h].compromised &&
                  w.firewalls[fw].last_update_time > w.hosts[h].infection_time)
                     ? 'X'
                     : '.';
        d += ss.public_connected ? 'P' : '.';
        d += ss.tor_connected ? 'T' : '.';
        d += ss.isolated ? 'I' : '.';
        d += ss.tor_accessible ? 'a' : '.';
        d += ss.connection_rewarded ? 'r' : '.';
        num(std::min(ss.attempts_public, c.connect_attempt_limit + 1));
        num(std::min(ss.attempts_tor, c.connect_attempt_limit + 1));
        num(ss.remaining_payload);
        if (ss.public_connected)
            num(std::min(w.clock - ss.last_activity_public, c.idle_drop_s));
        if (ss.tor_connected) num(std::min(w.clock - ss.last_activity_tor, c.idle_drop_s));
        for (const auto& e : ss.window_events) {
            double age = w.clock - e.end_time;
            if (age < c.monitor_window_s) {
                num(age);
                num(e.volume_mb);
                num(e.active_s);
            }
        }
        d += ';';
    }
    for (std::size_t i = 0; i < s.firewalls.size(); ++i)
        if (s.firewalls[i].update_period > 0.0)
            num(std::fmod(w.clock, s.firewalls[i].update_period));
    return d;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Exhaustive search

struct SearchResult {
    double best_return = -std::numeric_limits<double>::infinity();
    std::vector<int> sequence;  // witnessing action indices
    long nodes = 0;
};

/// Maximum undiscounted return over all action sequences of length up to
/// `max_depth`, with one witnessing sequence. Misaligned branches are pruned:
/// a misaligned step strictly loses reward and time.
inline SearchResult exhaustive_best_return(const Scenario& scenario, int max_depth,
                                           long node_guard = 10'000'000) {
    if (!scenario_deterministic(scenario))
        throw OracleError("exhaustive search requires a deterministic scenario");
    Environment env(detail::uncapped(scenario), 0);
    SearchResult result;
    std::vector<int> seq;

    struct Dfs {
        Environment& env;
        SearchResult& result;
        std::vector<int>& seq;
        long guard;
        int max_depth;

        void visit(double total) {
            result.nodes += 1;
            if (result.nodes > guard) throw OracleError("exhaustive search node budget exceeded");
            if (total > result.best_return) {
                result.best_return = total;
                result.sequence = seq;
            }
            if (env.done() || static_cast<int>(seq.size()) >= max_depth) return;
            WorldState saved = env.state();
            for (int a = 0; a < static_cast<int>(env.catalog().size()); ++a) {
                if (env.is_misaligned(env.catalog()[static_cast<std::size_t>(a)])) continue;
                StepOutcome out = env.step(a);
                seq.push_back(a);
                visit(total + out.reward);
                seq.pop_back();
                env.set_state(saved);
            }
        }
    };
    Dfs dfs{env, result, seq, node_guard, max_depth};
    env.reset(0);
    dfs.visit(0.0);
    return result;
}

// ---------------------------------------------------------------------------
// Tabular value iteration

struct QTable {
    // digest -> Q-value per catalog action
    std::unordered_map<std::string, std::vector<double>> q;
    // digest -> per action (reward, next digest; empty next = terminal)
    std::unordered_map<std::string, std::vector<std::pair<double, std::string>>> transitions;
    std::string initial_digest;
    int sweeps = 0;
};

/// Enumerates the reachable state set and iterates the Bellman optimality
/// backup Q(s,a) <- r + gamma * max_a' Q(s',a') to a sup-norm fixed point.
/// Misaligned actions are pruned like in the exhaustive search and pinned at
/// `value_floor`: they lose reward and advance time at one-second granularity,
/// which is never optimal on guarded scenarios but would blow the digest set
/// up to per-second timing histories. Values are also floored at
/// `value_floor`: dead-end states (both channels lost with payload remaining)
/// would otherwise drift to -inf at gamma = 1; the floor is far below any
/// terminating path, so the argmax is unaffected.
inline QTable value_iteration(const Scenario& scenario, double gamma, double tolerance,
                              long state_guard = 1'000'000, int sweep_cap = 100000,
                              double value_floor = -1e6) {
    if (!scenario_deterministic(scenario))
        throw OracleError("value iteration requires a deterministic scenario");
    Scenario unc = detail::uncapped(scenario);
    Environment env(unc, 0);
    std::size_t n_actions = env.catalog().size();

    QTable table;

    // Digests interned to dense ids; sweeps run on flat arrays and the
    // string-keyed table is materialized afterwards.
    std::unordered_map<std::string, int> id_of;
    std::vector<std::string> digests;
    std::vector<WorldState> reps;
    auto intern = [&](std::string d, const WorldState& w) {
        auto [it, fresh] = id_of.try_emplace(std::move(d), static_cast<int>(digests.size()));
        if (fresh) {
            digests.push_back(it->first);
            reps.push_back(w);
            if (static_cast<long>(digests.size()) > state_guard)
                throw OracleError("value iteration state budget exceeded");
        }
        return it->second;
    };

    env.reset(0);
    table.initial_digest = detail::state_digest(unc, env, env.state());
    intern(table.initial_digest, env.state());

    // (reward, next id); -1 marks a terminal transition, -2 a pruned action.
    std::vector<std::vector<std::pair<double, int>>> trans;
    for (int s = 0; s < static_cast<int>(digests.size()); ++s) {
        const WorldState rep = reps[static_cast<std::size_t>(s)];
        std::vector<std::pair<double, int>> row;
        if (!rep.done) {
            row.reserve(n_actions);
            for (std::size_t a = 0; a < n_actions; ++a) {
                env.set_state(rep);
                if (env.is_misaligned(env.catalog()[a])) {
                    row.emplace_back(value_floor, -2);
                    continue;
                }
                StepOutcome out = env.step(static_cast<int>(a));
                if (out.done) {
                    row.emplace_back(out.reward, -1);
                } else {
                    std::string next = detail::state_digest(unc, env, env.state());
                    row.emplace_back(out.reward, intern(std::move(next), env.state()));
                }
            }
        }
        trans.push_back(std::move(row));
    }

    std::size_t n_states = digests.size();
    // Initialized at the floor so doomed self-loops are a fixed point from the
    // start; elsewhere the iterates rise monotonically to the optimum.
    std::vector<std::vector<double>> q(n_states, std::vector<double>(n_actions, value_floor));
    std::vector<double> best(n_states, value_floor);
    for (std::size_t s = 0; s < n_states; ++s)
        if (trans[s].empty()) {
            std::fill(q[s].begin(), q[s].end(), 0.0);
            best[s] = 0.0;  // terminal states contribute no future value
        }

    bool converged = false;
    for (int sweep = 0; sweep < sweep_cap && !converged; ++sweep) {
        double delta = 0.0;
        for (std::size_t s = 0; s < n_states; ++s) {
            if (trans[s].empty()) continue;
            double b = -std::numeric_limits<double>::infinity();
            for (std::size_t a = 0; a < n_actions; ++a) {
                const auto& [r, next] = trans[s][a];
                double updated;
                if (next == -2) updated = value_floor;
                else if (next == -1) updated = std::max(r, value_floor);
                else updated = std::max(r + gamma * best[static_cast<std::size_t>(next)],
                                        value_floor);
                delta = std::max(delta, std::abs(updated - q[s][a]));
                q[s][a] = updated;
                b = std::max(b, updated);
            }
            best[s] = b;
        }
        table.sweeps = sweep + 1;
        converged = delta < tolerance;
    }
    if (!converged) throw OracleError("value iteration did not converge within the sweep cap");

    for (std::size_t s = 0; s < n_states; ++s) {
        if (trans[s].empty()) continue;  // terminal: no outgoing transitions
        std::vector<std::pair<double, std::string>> row;
        row.reserve(n_actions);
        for (const auto& [r, next] : trans[s])
            row.emplace_back(r, next >= 0 ? digests[static_cast<std::size_t>(next)]
                                          : std::string());
        table.transitions[digests[s]] = std::move(row);
        table.q[digests[s]] = q[s];
    }
    return table;
}

/// pi*(s) = argmax_a Q*(s,a); ties broken by the lowest action index.
inline int greedy_action(const QTable& table, const std::string& digest) {
    auto it = table.q.find(digest);
    if (it == table.q.end()) throw OracleError("state absent from Q-table");
    const std::vector<double>& qs = it->second;
    int best = 0;
    for (std::size_t a = 1; a < qs.size(); ++a)
        if (qs[a] > qs[static_cast<std::size_t>(best)]) best = static_cast<int>(a);
    return best;
}

inline std::unordered_map<std::string, int> greedy_policy(const QTable& table) {
    std::unordered_map<std::string, int> policy;
    for (const auto& [digest, qs] : table.q) policy[digest] = greedy_action(table, digest);
    return policy;
}

struct GreedyRollout {
    double total_return = 0.0;
    std::vector<int> sequence;
};

/// Rolls the greedy policy out from the initial state.
inline GreedyRollout greedy_rollout(const Scenario& scenario, const QTable& table,
                                    int step_guard = 100000) {
    Scenario unc = detail::uncapped(scenario);
    Environment env(unc, 0);
    env.reset(0);
    GreedyRollout r;
    for (int i = 0; i < step_guard && !env.done(); ++i) {
        std::string digest = detail::state_digest(unc, env, env.state());
        int a = greedy_action(table, digest);
        StepOutcome out = env.step(a);
        r.sequence.push_back(a);
        r.total_return += out.reward;
    }
    return r;
}

}  // namespace c2sim

#endif  // C2SIM_ORACLE_HPP
