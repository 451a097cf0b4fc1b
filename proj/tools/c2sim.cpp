// Operator entry point: scenario inspection, PPO training, policy
// evaluation, and exact-oracle verification with persisted run artifacts.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "c2sim/env.hpp"
#include "c2sim/eval.hpp"
#include "c2sim/neural.hpp"
#include "c2sim/oracle.hpp"
#include "c2sim/ppo.hpp"
#include "c2sim/scenario.hpp"

namespace fs = std::filesystem;
using namespace c2sim;

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

// Atomic write: write-then-rename so partial files never appear.
void write_file(const fs::path& path, const std::string& content) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary);
        if (!os) throw std::runtime_error("cannot write " + tmp.string());
        os << content;
    }
    fs::rename(tmp, path);
}

Scenario load_scenario_checked(const fs::path& path) {
    if (!fs::exists(path)) throw std::runtime_error("scenario not found: " + path.string());
    Scenario s = parse_scenario(read_file(path));
    auto violations = validate_scenario(s);
    if (!violations.empty()) {
        std::string msg = "scenario invalid:";
        for (const auto& v : violations) msg += "\n  " + v.field + ": " + v.rule;
        throw std::runtime_error(msg);
    }
    return s;
}

// Hyperparameter overrides given as repeated --set key=value.
void apply_overrides(Hyperparameters& hp, const std::vector<std::string>& sets) {
    for (const auto& kv : sets) {
        auto eq = kv.find('=');
        if (eq == std::string::npos) throw std::runtime_error("--set expects key=value, got " + kv);
        std::string key = kv.substr(0, eq);
        std::string value = kv.substr(eq + 1);
        if (key == "gamma") hp.gamma = std::stod(value);
        else if (key == "lambda") hp.lambda = std::stod(value);
        else if (key == "clip_epsilon") hp.clip_epsilon = std::stod(value);
        else if (key == "entropy_coeff") hp.entropy_coeff = std::stod(value);
        else if (key == "epochs") hp.epochs = std::stoi(value);
        else if (key == "minibatch") hp.minibatch = std::stoi(value);
        else if (key == "actor_lr") hp.actor_lr = std::stod(value);
        else if (key == "critic_lr") hp.critic_lr = std::stod(value);
        else if (key == "horizon") hp.horizon = std::stoi(value);
        else if (key == "value_loss_coeff") hp.value_loss_coeff = std::stod(value);
        else if (key == "reward_scale") hp.reward_scale = std::stod(value);
        else if (key == "normalize_advantages") hp.normalize_advantages = value == "1" || value == "true";
        else throw std::runtime_error("unknown hyperparameter key: " + key);
    }
}

json hyper_json(const Hyperparameters& hp) {
    json j;
    j["gamma"] = hp.gamma;
    j["lambda"] = hp.lambda;
    j["clip_epsilon"] = hp.clip_epsilon;
    j["entropy_coeff"] = hp.entropy_coeff;
    j["epochs"] = hp.epochs;
    j["minibatch"] = hp.minibatch;
    j["actor_lr"] = hp.actor_lr;
    j["critic_lr"] = hp.critic_lr;
    j["horizon"] = hp.horizon;
    j["value_loss_coeff"] = hp.value_loss_coeff;
    j["reward_scale"] = hp.reward_scale;
    j["normalize_advantages"] = hp.normalize_advantages;
    return j;
}

// Run manifest: everything needed to reproduce the run bit-for-bit.
void write_manifest(const fs::path& outdir, const std::string& command,
                    const fs::path& scenario_path, std::uint64_t digest, std::uint64_t seed,
                    const json& extra) {
    json m;
    m["artifact_version"] = 1;
    m["command"] = command;
    m["scenario"] = scenario_path.string();
    m["scenario_digest"] = digest;
    m["seed"] = seed;
    for (auto it = extra.begin(); it != extra.end(); ++it) m[it.key()] = it.value();
    write_file(outdir / "manifest.json", m.dump(2) + "\n");
}

int cmd_train(const fs::path& scenario_path, std::uint64_t seed, int episodes,
              const std::vector<std::string>& sets, const fs::path& outdir) {
    Scenario s = load_scenario_checked(scenario_path);
    Hyperparameters hp;
    apply_overrides(hp, sets);
    fs::create_directories(outdir);

    std::ostringstream metrics;
    auto on_checkpoint = [&](const Checkpoint& ck, int update) {
        save_checkpoint(ck, outdir / ("checkpoint_update" + std::to_string(update) + ".c2rl"));
    };
    TrainResult result = train(s, hp, episodes, seed, metrics, on_checkpoint);
    save_checkpoint(result.checkpoint, outdir / "final.c2rl");
    write_file(outdir / "metrics.csv", metrics.str());

    json extra;
    extra["episodes_budget"] = episodes;
    extra["episodes_completed"] = result.episodes;
    extra["updates"] = result.updates;
    extra["env_steps"] = result.steps;
    extra["hyperparameters"] = hyper_json(hp);
    extra["overrides"] = sets;
    write_manifest(outdir, "train", scenario_path, scenario_digest(s), seed, extra);
    std::cout << "trained " << result.episodes << " episodes (" << result.updates
              << " updates); artifacts in " << outdir.string() << "\n";
    return 0;
}

int cmd_eval(const fs::path& scenario_path, const fs::path& checkpoint_path, int n,
             std::uint64_t seed, const std::string& mode_name, bool traces,
             const fs::path& outdir) {
    Scenario s = load_scenario_checked(scenario_path);
    if (!fs::exists(checkpoint_path))
        throw std::runtime_error("checkpoint not found: " + checkpoint_path.string());
    Checkpoint ck = load_checkpoint(checkpoint_path);
    PolicyMode mode = mode_name == "greedy" ? PolicyMode::Greedy : PolicyMode::Stochastic;
    fs::create_directories(outdir);

    std::vector<Trajectory> trajs = rollout_policy(s, ck, n, seed, mode);
    SummaryStats stats = summarize(trajs);
    write_file(outdir / "summary.csv", summary_csv(stats));

    const Trajectory* first_success = nullptr;
    for (const auto& t : trajs)
        if (t.success) { first_success = &t; break; }
    if (first_success) {
        write_file(outdir / "keysteps.txt",
                   key_steps_table(extract_key_steps(s, *first_success)));
        write_file(outdir / "timeline.csv", timeline_csv(export_timeline(*first_success)));
    } else {
        write_file(outdir / "keysteps.txt", "action,target\n");
        write_file(outdir / "timeline.csv", "clock,event,mode,outcome,mb\n");
    }
    if (traces) {
        std::string out = trace_header() + "\n";
        for (std::size_t i = 0; i < trajs.size(); ++i) {
            out += "# trajectory " + std::to_string(i) + "\n";
            for (const auto& st : trajs[i].steps) {
                StepOutcome so;
                so.reward = st.reward;
                so.done = st.done;
                so.info = st.info;
                out += trace_line(make_trace_record(s, st.step, st.clock, st.action, so)) + "\n";
            }
        }
        write_file(outdir / "traces.csv", out);
    }

    json extra;
    extra["checkpoint"] = checkpoint_path.string();
    extra["episodes"] = n;
    extra["mode"] = mode_name;
    extra["successes"] = stats.success_count;
    write_manifest(outdir, "eval", scenario_path, scenario_digest(s), seed, extra);
    std::cout << "eval: " << stats.success_count << "/" << n << " successes";
    if (stats.defined)
        std::cout << ", mean return " << stats.returns.mean << ", mean steps " << stats.steps.mean
                  << ", connections " << stats.public_connections.mean << ", tor connections "
                  << stats.tor_connections.mean;
    std::cout << "\n";
    return 0;
}

int cmd_oracle(const fs::path& scenario_path, int depth, double gamma, double tolerance,
               const fs::path& outdir) {
    Scenario s = load_scenario_checked(scenario_path);
    if (!scenario_deterministic(s))
        throw std::runtime_error("stochastic scenario: the oracle requires all probabilities in {0,1}");
    fs::create_directories(outdir);

    SearchResult search = exhaustive_best_return(s, depth);
    std::cout << "exhaustive search: best return " << search.best_return << " ("
              << search.nodes << " nodes)\n";
    if (static_cast<int>(search.sequence.size()) >= depth)
        std::cout << "warning: witness saturates the depth limit; the bound may be shallow\n";

    Environment env(s, 0);
    std::string trace = trace_header() + "\n";
    std::cout << "witness sequence:\n";
    env.reset(0);
    int step = 0;
    for (int a : search.sequence) {
        const Action& act = env.catalog()[static_cast<std::size_t>(a)];
        StepOutcome out = env.step(a);
        std::cout << "  " << action_str(s, act) << "  (reward " << out.reward << ")\n";
        trace += trace_line(make_trace_record(s, ++step, env.state().clock, act, out)) + "\n";
    }
    write_file(outdir / "optimal_trace.csv", trace);

    std::string vi_note;
    try {
        QTable table = value_iteration(s, gamma, tolerance);
        GreedyRollout rollout = greedy_rollout(s, table);
        std::cout << "value iteration (gamma " << gamma << "): " << table.q.size()
                  << " states, greedy return " << rollout.total_return << "\n";
        vi_note = std::to_string(rollout.total_return);
        if (std::abs(rollout.total_return - search.best_return) > 1e-9)
            std::cout << "warning: solvers disagree (depth limit or discounting)\n";
    } catch (const OracleError& e) {
        std::cout << "value iteration skipped: " << e.what() << "\n";
        vi_note = std::string("skipped: ") + e.what();
    }

    json extra;
    extra["depth"] = depth;
    extra["best_return"] = search.best_return;
    extra["value_iteration"] = vi_note;
    write_manifest(outdir, "oracle", scenario_path, scenario_digest(s), 0, extra);
    return 0;
}

int cmd_inspect(const fs::path& scenario_path) {
    if (!fs::exists(scenario_path))
        throw std::runtime_error("scenario not found: " + scenario_path.string());
    Scenario s = parse_scenario(read_file(scenario_path));
    auto violations = validate_scenario(s);
    if (!violations.empty()) {
        std::cout << "validation: " << violations.size() << " violation(s)\n";
        for (const auto& v : violations) std::cout << "  " << v.field << ": " << v.rule << "\n";
        return 1;
    }
    std::cout << "validation: ok\n";
    std::cout << "subnets: " << s.subnets.size() << ", hosts: " << s.hosts.size()
              << ", firewalls: " << s.firewalls.size() << ", exploits: " << s.exploits.size()
              << ", sensitive: " << s.sensitive.size() << "\n";
    std::cout << "hosts:\n";
    for (const auto& h : s.hosts) {
        std::cout << "  " << h.address.str() << " os=" << h.os << " services=";
        for (std::size_t i = 0; i < h.services.size(); ++i)
            std::cout << (i ? "," : "") << h.services[i];
        if (h.services.empty()) std::cout << "-";
        std::cout << "\n";
    }
    std::cout << "firewall chains:\n";
    for (int sn : s.subnets) {
        std::cout << "  subnet " << sn << " -> [";
        auto ids = firewall_chain_ids(s, sn);
        for (std::size_t i = 0; i < ids.size(); ++i) std::cout << (i ? ", " : "") << ids[i];
        std::cout << "]\n";
    }
    ActionCatalog cat = enumerate_actions(s);
    std::cout << "action catalog size: " << cat.size() << "\n";
    std::cout << "observation length: " << ObservationLayout::from(s).total << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"c2sim: C2 attack-campaign simulator, PPO trainer and exact oracle"};
    app.require_subcommand(1);

    std::string scenario, checkpoint, out = "runs/out", mode = "stochastic";
    std::uint64_t seed = 0;
    int episodes = 2000, n = 100, depth = 12;
    double gamma = 1.0, tolerance = 1e-9;
    bool traces = false;
    std::vector<std::string> sets;

    CLI::App* t = app.add_subcommand("train", "train a PPO agent on a scenario");
    t->add_option("--scenario", scenario)->required();
    t->add_option("--episodes", episodes);
    t->add_option("--seed", seed);
    t->add_option("--out", out);
    t->add_option("--set", sets, "hyperparameter override key=value (repeatable)");

    CLI::App* e = app.add_subcommand("eval", "evaluate a trained checkpoint");
    e->add_option("--scenario", scenario)->required();
    e->add_option("--checkpoint", checkpoint)->required();
    e->add_option("--n", n);
    e->add_option("--seed", seed);
    e->add_option("--mode", mode)->check(CLI::IsMember({"stochastic", "greedy"}));
    e->add_flag("--traces", traces, "also export per-step trajectory traces");
    e->add_option("--out", out);

    CLI::App* o = app.add_subcommand("oracle", "exact solvers for deterministic scenarios");
    o->add_option("--scenario", scenario)->required();
    o->add_option("--depth", depth);
    o->add_option("--gamma", gamma);
    o->add_option("--tolerance", tolerance);
    o->add_option("--out", out);

    CLI::App* i = app.add_subcommand("inspect", "validate and describe a scenario");
    i->add_option("--scenario", scenario)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (t->parsed()) return cmd_train(scenario, seed, episodes, sets, out);
        if (e->parsed()) return cmd_eval(scenario, checkpoint, n, seed, mode, traces, out);
        if (o->parsed()) return cmd_oracle(scenario, depth, gamma, tolerance, out);
        if (i->parsed()) return cmd_inspect(scenario);
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }
    return 0;
}
