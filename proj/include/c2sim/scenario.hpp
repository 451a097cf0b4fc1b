#ifndef C2SIM_SCENARIO_HPP
#define C2SIM_SCENARIO_HPP

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace c2sim {

using json = nlohmann::ordered_json;

// (subnet id, local id). Subnet ids start at 1; 0 denotes the internet in
// firewall edges.
struct HostAddr {
    int subnet = 0;
    int local = 0;
    auto operator<=>(const HostAddr&) const = default;
    std::string str() const { return "(" + std::to_string(subnet) + "," + std::to_string(local) + ")"; }
};

inline constexpr int kInternet = 0;

// The fixed service label universe.
inline const std::vector<std::string>& service_universe() {
    static const std::vector<std::string> u = {
        "ftp", "http", "vpn", "sql", "ssh", "samba", "pki", "smtp", "mongodb"};
    return u;
}

struct HostSpec {
    HostAddr address;
    std::string os;
    std::vector<std::string> services;
    std::vector<std::string> processes;
    double discovery_value = 0.0;
    double infection_value = 0.0;
};

// A firewall sits on the edge between two subnets, or between a subnet and
// the internet (outer == 0). update_period 0 disables periodic updates.
struct FirewallSpec {
    std::string id;
    int inner = 0;
    int outer = 0;
    double update_period = 0.0;
};

struct ExploitSpec {
    std::string id;
    std::string required_service;
    std::string required_os = "*";      // "*" matches any OS
    std::string required_process;       // empty = no process requirement
    double success_prob = 0.8;
};

struct SensitiveSpec {
    HostAddr address;
    double payload_mb = 10000.0;
    bool is_goal = false;
};

struct ActionCosts {
    double scan = 1.0;
    double exploit = 2.0;
    double connect = 1.0;
    double upload = 1.0;
    double sleep = 1.0;
    double misaligned = 1.0;
};

struct WallTimes {
    double scan = 30.0;
    double exploit = 10.0;
    double connect_public = 10.0;
    double connect_tor = 30.0;
    double upload = 10.0;
    double sleep = 60.0;
    double misaligned = 1.0;
};

// Every tunable constant of the simulation. Defaults reproduce the reference
// experiment configuration.
struct ConstantSet {
    WallTimes wall_times;
    ActionCosts base_costs;

    double reward_connection = 1000.0;
    double reward_per_mb = 0.1;
    double reward_completion = 10000.0;
    double penalty_tor = -1000.0;
    double penalty_public = -2000.0;

    double pass_prob_public = 0.9;
    double pass_prob_tor = 0.75;
    int connect_attempt_limit = 3;

    double monitor_window_s = 300.0;
    double egress_volume_mb = 5000.0;
    double active_upload_s = 60.0;
    double idle_drop_s = 300.0;

    double cutoff_prob_public = 0.3;
    double cutoff_prob_tor = 0.1;
    double chunk_public_mb = 1000.0;
    double chunk_tor_mb = 500.0;

    double payload_mb = 10000.0;  // default for sensitive entries that omit it

    int max_steps = 2000;
    double max_seconds = 36000.0;

    // Defense tiers: each service belongs to exactly one group; the cost of a
    // targeted action is base_cost * max tier among the target's services.
    std::vector<std::string> defense_tier1 = {"ftp", "http", "smtp"};
    std::vector<std::string> defense_tier2 = {"ssh", "vpn", "samba", "pki"};
    std::vector<std::string> defense_tier3 = {"sql", "mongodb"};

    // Services in this list are invisible to cross-subnet scans.
    std::vector<std::string> exposed_blocklist;
};

struct Scenario {
    int format = 1;
    std::vector<int> subnets;
    std::vector<HostSpec> hosts;
    std::vector<FirewallSpec> firewalls;
    std::vector<ExploitSpec> exploits;
    std::vector<SensitiveSpec> sensitive;
    HostAddr foothold;
    ConstantSet constants;

    int host_index(HostAddr a) const {
        for (std::size_t i = 0; i < hosts.size(); ++i)
            if (hosts[i].address == a) return static_cast<int>(i);
        return -1;
    }
    int sensitive_index(HostAddr a) const {
        for (std::size_t i = 0; i < sensitive.size(); ++i)
            if (sensitive[i].address == a) return static_cast<int>(i);
        return -1;
    }
    int goal_index() const {
        for (std::size_t i = 0; i < sensitive.size(); ++i)
            if (sensitive[i].is_goal) return static_cast<int>(i);
        return -1;
    }
    int defense_tier(const std::string& service) const {
        auto in = [&](const std::vector<std::string>& g) {
            return std::find(g.begin(), g.end(), service) != g.end();
        };
        if (in(constants.defense_tier3)) return 3;
        if (in(constants.defense_tier2)) return 2;
        if (in(constants.defense_tier1)) return 1;
        return 1;
    }
    // Cost multiplier of a targeted action: the best defended service on the
    // target; hosts with no services count as tier 1.
    int tier_multiplier(int host) const {
        int t = 1;
        for (const auto& s : hosts[host].services) t = std::max(t, defense_tier(s));
        return t;
    }
    bool service_exposed(const std::string& s) const {
        const auto& bl = constants.exposed_blocklist;
        return std::find(bl.begin(), bl.end(), s) == bl.end();
    }
};

class ScenarioError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

inline void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                                const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.contains(it.key()))
            throw ScenarioError("unknown field '" + it.key() + "' in " + where);
}

inline HostAddr parse_addr(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer())
        throw ScenarioError("expected [subnet, local] address in " + where);
    return HostAddr{j[0].get<int>(), j[1].get<int>()};
}

inline std::vector<std::string> parse_labels(const json& j, const std::string& where) {
    if (!j.is_array()) throw ScenarioError("expected label list in " + where);
    std::vector<std::string> out;
    for (const auto& e : j) {
        if (!e.is_string()) throw ScenarioError("expected string label in " + where);
        out.push_back(e.get<std::string>());
    }
    return out;
}

inline void check_service_labels(const std::vector<std::string>& labels, const std::string& where) {
    const auto& u = service_universe();
    for (const auto& s : labels)
        if (std::find(u.begin(), u.end(), s) == u.end())
            throw ScenarioError("unknown service label '" + s + "' in " + where);
}

inline void parse_constants(const json& j, ConstantSet& c) {
    static const std::set<std::string> allowed = {
        "wall_times", "base_costs", "reward_connection", "reward_per_mb",
        "reward_completion", "penalty_tor", "penalty_public", "pass_prob_public",
        "pass_prob_tor", "connect_attempt_limit", "monitor_window_s",
        "egress_volume_mb", "active_upload_s", "idle_drop_s", "cutoff_prob_public",
        "cutoff_prob_tor", "chunk_public_mb", "chunk_tor_mb", "payload_mb",
        "max_steps", "max_seconds", "defense_tier1", "defense_tier2",
        "defense_tier3", "exposed_blocklist"};
    reject_unknown_keys(j, allowed, "constants");

    auto num = [&](const char* key, double& dst) {
        if (j.contains(key)) dst = j.at(key).get<double>();
    };
    auto inum = [&](const char* key, int& dst) {
        if (j.contains(key)) dst = j.at(key).get<int>();
    };
    if (j.contains("wall_times")) {
        const json& w = j.at("wall_times");
        reject_unknown_keys(w, {"scan", "exploit", "connect_public", "connect_tor",
                                "upload", "sleep", "misaligned"}, "constants.wall_times");
        auto& t = c.wall_times;
        if (w.contains("scan")) t.scan = w.at("scan").get<double>();
        if (w.contains("exploit")) t.exploit = w.at("exploit").get<double>();
        if (w.contains("connect_public")) t.connect_public = w.at("connect_public").get<double>();
        if (w.contains("connect_tor")) t.connect_tor = w.at("connect_tor").get<double>();
        if (w.contains("upload")) t.upload = w.at("upload").get<double>();
        if (w.contains("sleep")) t.sleep = w.at("sleep").get<double>();
        if (w.contains("misaligned")) t.misaligned = w.at("misaligned").get<double>();
    }
    if (j.contains("base_costs")) {
        const json& b = j.at("base_costs");
        reject_unknown_keys(b, {"scan", "exploit", "connect", "upload", "sleep", "misaligned"},
                            "constants.base_costs");
        auto& k = c.base_costs;
        if (b.contains("scan")) k.scan = b.at("scan").get<double>();
        if (b.contains("exploit")) k.exploit = b.at("exploit").get<double>();
        if (b.contains("connect")) k.connect = b.at("connect").get<double>();
        if (b.contains("upload")) k.upload = b.at("upload").get<double>();
        if (b.contains("sleep")) k.sleep = b.at("sleep").get<double>();
        if (b.contains("misaligned")) k.misaligned = b.at("misaligned").get<double>();
    }
    num("reward_connection", c.reward_connection);
    num("reward_per_mb", c.reward_per_mb);
    num("reward_completion", c.reward_completion);
    num("penalty_tor", c.penalty_tor);
    num("penalty_public", c.penalty_public);
    num("pass_prob_public", c.pass_prob_public);
    num("pass_prob_tor", c.pass_prob_tor);
    inum("connect_attempt_limit", c.connect_attempt_limit);
    num("monitor_window_s", c.monitor_window_s);
    num("egress_volume_mb", c.egress_volume_mb);
    num("active_upload_s", c.active_upload_s);
    num("idle_drop_s", c.idle_drop_s);
    num("cutoff_prob_public", c.cutoff_prob_public);
    num("cutoff_prob_tor", c.cutoff_prob_tor);
    num("chunk_public_mb", c.chunk_public_mb);
    num("chunk_tor_mb", c.chunk_tor_mb);
    num("payload_mb", c.payload_mb);
    inum("max_steps", c.max_steps);
    num("max_seconds", c.max_seconds);
    if (j.contains("defense_tier1")) c.defense_tier1 = parse_labels(j.at("defense_tier1"), "defense_tier1");
    if (j.contains("defense_tier2")) c.defense_tier2 = parse_labels(j.at("defense_tier2"), "defense_tier2");
    if (j.contains("defense_tier3")) c.defense_tier3 = parse_labels(j.at("defense_tier3"), "defense_tier3");
    if (j.contains("exposed_blocklist"))
        c.exposed_blocklist = parse_labels(j.at("exposed_blocklist"), "exposed_blocklist");
}

}  // namespace detail

/// Parses a scenario document. Throws ScenarioError on syntax errors
/// (position-annotated), unknown fields, unknown labels or duplicate
/// addresses. Omitted constants fall back to the documented defaults.
inline Scenario parse_scenario(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ScenarioError(std::string("syntax error: ") + e.what());
    }
    if (!doc.is_object()) throw ScenarioError("syntax error: top level must be an object");

    detail::reject_unknown_keys(doc, {"format", "subnets", "hosts", "firewalls",
                                      "exploits", "sensitive", "foothold", "constants"},
                                "document");
    if (!doc.contains("format")) throw ScenarioError("missing mandatory 'format' field");

    Scenario s;
    s.format = doc.at("format").get<int>();
    if (s.format != 1) throw ScenarioError("unsupported format version " + std::to_string(s.format));

    for (const auto& e : doc.value("subnets", json::array())) {
        if (!e.is_number_integer()) throw ScenarioError("subnet ids must be integers");
        s.subnets.push_back(e.get<int>());
    }

    if (doc.contains("constants")) detail::parse_constants(doc.at("constants"), s.constants);

    std::set<std::pair<int, int>> seen_addr;
    std::set<HostAddr> sensitive_addrs;
    if (doc.contains("sensitive")) {
        for (const auto& e : doc.at("sensitive")) {
            detail::reject_unknown_keys(e, {"address", "payload_mb", "goal"}, "sensitive entry");
            SensitiveSpec sp;
            sp.address = detail::parse_addr(e.at("address"), "sensitive entry");
            sp.payload_mb = e.value("payload_mb", s.constants.payload_mb);
            sp.is_goal = e.value("goal", false);
            sensitive_addrs.insert(sp.address);
            s.sensitive.push_back(sp);
        }
    }

    for (const auto& e : doc.value("hosts", json::array())) {
        detail::reject_unknown_keys(e, {"address", "os", "services", "processes",
                                        "discovery_value", "infection_value"},
                                    "host entry");
        HostSpec h;
        h.address = detail::parse_addr(e.at("address"), "host entry");
        if (!seen_addr.insert({h.address.subnet, h.address.local}).second)
            throw ScenarioError("duplicate address " + h.address.str());
        h.os = e.value("os", std::string("linux"));
        if (e.contains("services")) h.services = detail::parse_labels(e.at("services"), "host " + h.address.str());
        detail::check_service_labels(h.services, "host " + h.address.str());
        if (e.contains("processes")) h.processes = detail::parse_labels(e.at("processes"), "host " + h.address.str());
        // Sensitive hosts default to the reference discovery/infection values.
        double default_value = sensitive_addrs.contains(h.address) ? 1000.0 : 0.0;
        h.discovery_value = e.value("discovery_value", default_value);
        h.infection_value = e.value("infection_value", default_value);
        s.hosts.push_back(h);
    }

    for (const auto& e : doc.value("firewalls", json::array())) {
        detail::reject_unknown_keys(e, {"id", "between", "update_period"}, "firewall entry");
        FirewallSpec f;
        f.id = e.at("id").get<std::string>();
        const json& b = e.at("between");
        if (!b.is_array() || b.size() != 2) throw ScenarioError("firewall 'between' must be [inner, outer]");
        f.inner = b[0].get<int>();
        f.outer = b[1].get<int>();
        f.update_period = e.value("update_period", 0.0);
        s.firewalls.push_back(f);
    }

    for (const auto& e : doc.value("exploits", json::array())) {
        detail::reject_unknown_keys(e, {"id", "service", "os", "process", "success_prob"},
                                    "exploit entry");
        ExploitSpec x;
        x.id = e.at("id").get<std::string>();
        x.required_service = e.at("service").get<std::string>();
        detail::check_service_labels({x.required_service}, "exploit " + x.id);
        x.required_os = e.value("os", std::string("*"));
        x.required_process = e.value("process", std::string());
        x.success_prob = e.value("success_prob", 0.8);
        s.exploits.push_back(x);
    }

    if (!doc.contains("foothold")) throw ScenarioError("missing mandatory 'foothold' field");
    s.foothold = detail::parse_addr(doc.at("foothold"), "foothold");
    return s;
}

/// Canonical serialization; parse(serialize(parse(x))) == parse(x).
inline std::string serialize_scenario(const Scenario& s) {
    json doc;
    doc["format"] = s.format;
    doc["subnets"] = s.subnets;
    doc["hosts"] = json::array();
    for (const auto& h : s.hosts) {
        json e;
        e["address"] = {h.address.subnet, h.address.local};
        e["os"] = h.os;
        e["services"] = h.services;
        e["processes"] = h.processes;
        e["discovery_value"] = h.discovery_value;
        e["infection_value"] = h.infection_value;
        doc["hosts"].push_back(e);
    }
    doc["firewalls"] = json::array();
    for (const auto& f : s.firewalls) {
        json e;
        e["id"] = f.id;
        e["between"] = {f.inner, f.outer};
        e["update_period"] = f.update_period;
        doc["firewalls"].push_back(e);
    }
    doc["exploits"] = json::array();
    for (const auto& x : s.exploits) {
        json e;
        e["id"] = x.id;
        e["service"] = x.required_service;
        e["os"] = x.required_os;
        e["process"] = x.required_process;
        e["success_prob"] = x.success_prob;
        doc["exploits"].push_back(e);
    }
    doc["sensitive"] = json::array();
    for (const auto& t : s.sensitive) {
        json e;
        e["address"] = {t.address.subnet, t.address.local};
        e["payload_mb"] = t.payload_mb;
        e["goal"] = t.is_goal;
        doc["sensitive"].push_back(e);
    }
    doc["foothold"] = {s.foothold.subnet, s.foothold.local};
    const ConstantSet& c = s.constants;
    json k;
    k["wall_times"] = {{"scan", c.wall_times.scan},
                       {"exploit", c.wall_times.exploit},
                       {"connect_public", c.wall_times.connect_public},
                       {"connect_tor", c.wall_times.connect_tor},
                       {"upload", c.wall_times.upload},
                       {"sleep", c.wall_times.sleep},
                       {"misaligned", c.wall_times.misaligned}};
    k["base_costs"] = {{"scan", c.base_costs.scan},
                       {"exploit", c.base_costs.exploit},
                       {"connect", c.base_costs.connect},
                       {"upload", c.base_costs.upload},
                       {"sleep", c.base_costs.sleep},
                       {"misaligned", c.base_costs.misaligned}};
    k["reward_connection"] = c.reward_connection;
    k["reward_per_mb"] = c.reward_per_mb;
    k["reward_completion"] = c.reward_completion;
    k["penalty_tor"] = c.penalty_tor;
    k["penalty_public"] = c.penalty_public;
    k["pass_prob_public"] = c.pass_prob_public;
    k["pass_prob_tor"] = c.pass_prob_tor;
    k["connect_attempt_limit"] = c.connect_attempt_limit;
    k["monitor_window_s"] = c.monitor_window_s;
    k["egress_volume_mb"] = c.egress_volume_mb;
    k["active_upload_s"] = c.active_upload_s;
    k["idle_drop_s"] = c.idle_drop_s;
    k["cutoff_prob_public"] = c.cutoff_prob_public;
    k["cutoff_prob_tor"] = c.cutoff_prob_tor;
    k["chunk_public_mb"] = c.chunk_public_mb;
    k["chunk_tor_mb"] = c.chunk_tor_mb;
    k["payload_mb"] = c.payload_mb;
    k["max_steps"] = c.max_steps;
    k["max_seconds"] = c.max_seconds;
    k["defense_tier1"] = c.defense_tier1;
    k["defense_tier2"] = c.defense_tier2;
    k["defense_tier3"] = c.defense_tier3;
    k["exposed_blocklist"] = c.exposed_blocklist;
    doc["constants"] = k;
    return doc.dump(2);
}

/// FNV-1a over the canonical serialization; identifies the scenario a
/// checkpoint was trained on.
inline std::uint64_t scenario_digest(const Scenario& s) {
    std::string t = serialize_scenario(s);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : t) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

// ---------------------------------------------------------------------------
// Validation

struct Violation {
    std::string field;
    std::string rule;
};

namespace detail {

// Firewall edges as a subnet graph including the internet node 0.
inline std::multimap<int, std::pair<int, int>> firewall_graph(const Scenario& s) {
    std::multimap<int, std::pair<int, int>> g;  // subnet -> (firewall index, neighbor)
    for (std::size_t i = 0; i < s.firewalls.size(); ++i) {
        const auto& f = s.firewalls[i];
        g.insert({f.inner, {static_cast<int>(i), f.outer}});
        g.insert({f.outer, {static_cast<int>(i), f.inner}});
    }
    return g;
}

// DFS path of firewall indices from `subnet` to the internet; empty if none.
// `unique` is cleared when more than one path exists.
inline bool chain_dfs(const std::multimap<int, std::pair<int, int>>& g, int node, int parent_fw,
                      std::vector<int>& path, std::vector<int>& found, int& paths) {
    if (node == kInternet) {
        ++paths;
        if (paths == 1) found = path;
        return true;
    }
    bool any = false;
    auto [lo, hi] = g.equal_range(node);
    for (auto it = lo; it != hi; ++it) {
        auto [fw, next] = it->second;
        if (fw == parent_fw) continue;
        path.push_back(fw);
        any = chain_dfs(g, next, fw, path, found, paths) || any;
        path.pop_back();
        if (paths > 1) return any;
    }
    return any;
}

}  // namespace detail

/// The unique ordered firewall sequence from `subnet` to the internet,
/// innermost first. Throws ScenarioError when no path exists.
inline std::vector<int> firewall_chain(const Scenario& s, int subnet) {
    auto g = detail::firewall_graph(s);
    std::vector<int> path, found;
    int paths = 0;
    detail::chain_dfs(g, subnet, -1, path, found, paths);
    if (paths == 0)
        throw ScenarioError("subnet " + std::to_string(subnet) + " has no firewall path to the internet");
    return found;
}

/// Firewall ids along the chain (convenience for reports).
inline std::vector<std::string> firewall_chain_ids(const Scenario& s, int subnet) {
    std::vector<std::string> ids;
    for (int i : firewall_chain(s, subnet)) ids.push_back(s.firewalls[i].id);
    return ids;
}

/// Checks every scenario invariant; an empty result means the scenario is
/// valid. Violations are data, not failures.
inline std::vector<Violation> validate_scenario(const Scenario& s) {
    std::vector<Violation> v;
    auto prob = [&](double p, const std::string& field) {
        if (!(p >= 0.0 && p <= 1.0)) v.push_back({field, "probability out of range [0,1]"});
    };
    auto positive = [&](double x, const std::string& field) {
        if (!(x > 0.0)) v.push_back({field, "must be positive"});
    };

    std::set<std::pair<int, int>> addrs;
    for (const auto& h : s.hosts) {
        if (!addrs.insert({h.address.subnet, h.address.local}).second)
            v.push_back({"hosts", "duplicate address " + h.address.str()});
        if (std::find(s.subnets.begin(), s.subnets.end(), h.address.subnet) == s.subnets.end())
            v.push_back({"hosts", "host " + h.address.str() + " references undeclared subnet"});
        if (h.discovery_value < 0) v.push_back({"hosts", h.address.str() + " discovery_value < 0"});
        if (h.infection_value < 0) v.push_back({"hosts", h.address.str() + " infection_value < 0"});
    }

    int goals = 0;
    for (const auto& t : s.sensitive) {
        if (s.host_index(t.address) < 0)
            v.push_back({"sensitive", "sensitive host " + t.address.str() + " does not exist"});
        positive(t.payload_mb, "sensitive " + t.address.str() + " payload_mb");
        if (t.is_goal) ++goals;
    }
    if (goals != 1) v.push_back({"sensitive", "exactly one goal host required, found " + std::to_string(goals)});

    if (s.host_index(s.foothold) < 0) v.push_back({"foothold", "foothold host does not exist"});

    std::set<std::string> fw_ids;
    for (const auto& f : s.firewalls) {
        if (!fw_ids.insert(f.id).second) v.push_back({"firewalls", "duplicate firewall id " + f.id});
        if (f.update_period < 0) v.push_back({"firewalls", f.id + " update_period < 0"});
        for (int side : {f.inner, f.outer})
            if (side != kInternet &&
                std::find(s.subnets.begin(), s.subnets.end(), side) == s.subnets.end())
                v.push_back({"firewalls", f.id + " references undeclared subnet " + std::to_string(side)});
    }

    // Every subnet needs exactly one acyclic firewall chain to the internet.
    auto g = detail::firewall_graph(s);
    for (int sn : s.subnets) {
        std::vector<int> path, found;
        int paths = 0;
        detail::chain_dfs(g, sn, -1, path, found, paths);
        if (paths == 0)
            v.push_back({"firewalls", "subnet " + std::to_string(sn) + " has no path to the internet"});
        else if (paths > 1)
            v.push_back({"firewalls", "subnet " + std::to_string(sn) + " has multiple paths to the internet (cycle)"});
        else if (found.empty())
            v.push_back({"firewalls", "subnet " + std::to_string(sn) + " reaches the internet without a firewall"});
    }

    for (const auto& x : s.exploits) prob(x.success_prob, "exploit " + x.id + " success_prob");

    const ConstantSet& c = s.constants;
    prob(c.pass_prob_public, "constants.pass_prob_public");
    prob(c.pass_prob_tor, "constants.pass_prob_tor");
    prob(c.cutoff_prob_public, "constants.cutoff_prob_public");
    prob(c.cutoff_prob_tor, "constants.cutoff_prob_tor");
    for (auto [x, name] : std::initializer_list<std::pair<double, const char*>>{
             {c.wall_times.scan, "wall_times.scan"},
             {c.wall_times.exploit, "wall_times.exploit"},
             {c.wall_times.connect_public, "wall_times.connect_public"},
             {c.wall_times.connect_tor, "wall_times.connect_tor"},
             {c.wall_times.upload, "wall_times.upload"},
             {c.wall_times.sleep, "wall_times.sleep"},
             {c.wall_times.misaligned, "wall_times.misaligned"},
             {c.monitor_window_s, "monitor_window_s"},
             {c.egress_volume_mb, "egress_volume_mb"},
             {c.active_upload_s, "active_upload_s"},
             {c.idle_drop_s, "idle_drop_s"},
             {c.chunk_public_mb, "chunk_public_mb"},
             {c.chunk_tor_mb, "chunk_tor_mb"},
             {c.payload_mb, "payload_mb"},
             {c.max_seconds, "max_seconds"}})
        positive(x, std::string("constants.") + name);
    if (c.connect_attempt_limit < 1) v.push_back({"constants.connect_attempt_limit", "must be >= 1"});
    if (c.max_steps < 1) v.push_back({"constants.max_steps", "must be >= 1"});

    // The three defense groups must partition the service universe.
    std::map<std::string, int> seen;
    for (const auto& g1 : c.defense_tier1) seen[g1]++;
    for (const auto& g2 : c.defense_tier2) seen[g2]++;
    for (const auto& g3 : c.defense_tier3) seen[g3]++;
    for (const auto& label : service_universe()) {
        auto it = seen.find(label);
        if (it == seen.end())
            v.push_back({"constants.defense_groups", "service '" + label + "' missing from defense groups"});
        else if (it->second > 1)
            v.push_back({"constants.defense_groups", "service '" + label + "' in multiple defense groups"});
    }
    return v;
}

// ---------------------------------------------------------------------------
// Action catalog

enum class ActionKind { Sleep, SubnetScan, Exploit, Connect, Upload };
enum class Channel { Public, Tor };

inline const char* kind_name(ActionKind k) {
    switch (k) {
        case ActionKind::Sleep: return "sleep";
        case ActionKind::SubnetScan: return "subnet_scan";
        case ActionKind::Exploit: return "exploit";
        case ActionKind::Connect: return "connect";
        case ActionKind::Upload: return "upload";
    }
    return "?";
}

inline const char* channel_name(Channel c) { return c == Channel::Public ? "public" : "tor"; }

struct Action {
    ActionKind kind = ActionKind::Sleep;
    int host = -1;      // index into Scenario::hosts (absent for sleep)
    int exploit = -1;   // index into Scenario::exploits (exploit only)
    Channel mode = Channel::Public;  // connect/upload only
};

struct ActionCatalog {
    std::vector<Action> actions;
    std::size_t size() const { return actions.size(); }
    const Action& operator[](std::size_t i) const { return actions.at(i); }
};

inline bool exploit_applicable(const HostSpec& h, const ExploitSpec& x) {
    if (std::find(h.services.begin(), h.services.end(), x.required_service) == h.services.end())
        return false;
    if (x.required_os != "*" && x.required_os != h.os) return false;
    if (!x.required_process.empty() &&
        std::find(h.processes.begin(), h.processes.end(), x.required_process) == h.processes.end())
        return false;
    return true;
}

/// Deterministic, stable flat action enumeration:
/// [sleep] + [scan per host] + [exploit per (host, applicable exploit)] +
/// [connect(public), connect(tor), upload(public), upload(tor) per sensitive host].
inline ActionCatalog enumerate_actions(const Scenario& s) {
    ActionCatalog cat;
    cat.actions.push_back({ActionKind::Sleep, -1, -1, Channel::Public});
    for (std::size_t h = 0; h < s.hosts.size(); ++h)
        cat.actions.push_back({ActionKind::SubnetScan, static_cast<int>(h), -1, Channel::Public});
    for (std::size_t h = 0; h < s.hosts.size(); ++h)
        for (std::size_t x = 0; x < s.exploits.size(); ++x)
            if (exploit_applicable(s.hosts[h], s.exploits[x]))
                cat.actions.push_back({ActionKind::Exploit, static_cast<int>(h),
                                       static_cast<int>(x), Channel::Public});
    for (const auto& t : s.sensitive) {
        int h = s.host_index(t.address);
        cat.actions.push_back({ActionKind::Connect, h, -1, Channel::Public});
        cat.actions.push_back({ActionKind::Connect, h, -1, Channel::Tor});
        cat.actions.push_back({ActionKind::Upload, h, -1, Channel::Public});
        cat.actions.push_back({ActionKind::Upload, h, -1, Channel::Tor});
    }
    return cat;
}

inline std::string action_str(const Scenario& s, const Action& a) {
    switch (a.kind) {
        case ActionKind::Sleep: return "sleep";
        case ActionKind::SubnetScan: return "subnet_scan " + s.hosts[a.host].address.str();
        case ActionKind::Exploit:
            return "exploit " + s.hosts[a.host].address.str() + " [" + s.exploits[a.exploit].id + "]";
        case ActionKind::Connect:
            return std::string("connect ") + channel_name(a.mode) + " " + s.hosts[a.host].address.str();
        case ActionKind::Upload:
            return std::string("upload ") + channel_name(a.mode) + " " + s.hosts[a.host].address.str();
    }
    return "?";
}

}  // namespace c2sim

#endif  // C2SIM_SCENARIO_HPP
