#ifndef C2SIM_TEST_FIXTURES_HPP
#define C2SIM_TEST_FIXTURES_HPP

#include <fstream>
#include <sstream>
#include <string>

#include "c2sim/scenario.hpp"

namespace c2sim_test {

inline std::string read_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot read " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

inline std::string scenario_path(const std::string& name) {
    return std::string(C2SIM_SCENARIO_DIR) + "/" + name;
}

inline c2sim::Scenario load_scenario(const std::string& name) {
    return c2sim::parse_scenario(read_file(scenario_path(name)));
}

inline c2sim::Scenario micro1() { return load_scenario("micro1.json"); }
inline c2sim::Scenario ninesubnet51() { return load_scenario("ninesubnet_51.json"); }
inline c2sim::Scenario ninesubnet73() { return load_scenario("ninesubnet_73.json"); }

}  // namespace c2sim_test

#endif
