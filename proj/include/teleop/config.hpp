#pragma once

#include "teleop/demonstrator.hpp"
#include "teleop/evaluate.hpp"
#include "teleop/session.hpp"

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace teleop {

nlohmann::json load_json_file(const std::filesystem::path& path);

// "a.b.c=value": value is parsed as JSON when possible, otherwise taken as a string.
void apply_override(nlohmann::json& j, const std::string& assignment);

ArmModel arm_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
ImpedanceGains gains_from_json(const nlohmann::json& j, int n);
ControlScheme scheme_from_json(const nlohmann::json& j, int n);
nlohmann::json scheme_to_json(const ControlScheme& s);
ChannelConfig channel_from_json(const nlohmann::json& j);
EnvPrimitive env_from_json(const nlohmann::json& j);
TargetTrajectory trajectory_from_json(const nlohmann::json& j, int n);
OperatorModel operator_from_json(const nlohmann::json& j, int n);

SessionConfig session_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);

struct DrawerSetup {
    DrawerScenarioConfig scenario;
    TeleopRig rig;
    DemonstratorConfig demonstrator;
    int n_demos = 25;
    std::uint64_t demo_seed_base = 1000;
    BenchmarkConfig benchmark;
};

DrawerSetup drawer_setup_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);

struct SweepSetup {
    SessionConfig base;
    std::vector<double> kf_grid;
    std::vector<double> delays;
    InstabilityParams instability;
};

SweepSetup sweep_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
InstabilityParams instability_from_json(const nlohmann::json& j);

}  // namespace teleop
