#pragma once

#include "teleop/contact_sim.hpp"
#include "teleop/controllers.hpp"
#include "teleop/datalog.hpp"
#include "teleop/session.hpp"
#include "teleop/sweep.hpp"

#include <vector>

namespace teleop {

// Teleoperation hardware used while demonstrating: scaled leader, hand model and scheme.
struct TeleopRig {
    double leader_scale = 0.5;
    Eigen::VectorXd leader_inertia;
    Eigen::VectorXd leader_damping;
    OperatorModel hand;
    ControlScheme scheme;  // follower gains live here
    ChannelConfig channel;
};

struct DemonstratorConfig {
    int approach_ticks = 50;
    int dwell_ticks = 8;
    int pull_ticks = 30;
    double pull_distance = 0.22;
    int probe_ticks = 10;
    double eps_force = 0.05;  // N m
    int retry_cap = 3;
    double side_offset = 0.08;  // via point for re-approach: home + side_offset * side_axis
    Eigen::Vector3d side_axis = Eigen::Vector3d::UnitY();
    int side_ticks = 20;
    int settle_ticks = 10;  // ticks kept after success
    int max_ticks = 500;
};

struct DemoResult {
    SessionTrace trace;
    bool success = false;
    int pull_attempts = 0;
    int grasp_attempts = 0;
    bool retried = false;
};

SessionConfig demo_session_config(const Scenario& sc, const TeleopRig& rig);

// Scripted expert operating the leader: approach, grasp, pull; if no force shows up while
// pulling, back off along a side path and try again.
DemoResult scripted_demonstrator(const Scenario& sc, const TeleopRig& rig, const DemonstratorConfig& dc = {});

DemonstrationRecord demo_to_record(const DemoResult& d, const Scenario& sc, const TeleopRig& rig);

// Demos for seeds seed_base .. seed_base + n - 1.
std::vector<DemoResult> generate_demos(const DrawerScenarioConfig& base, const TeleopRig& rig,
                                       const DemonstratorConfig& dc, int n, std::uint64_t seed_base,
                                       Exec exec = Exec::parallel);

// Records for demos produced by generate_demos with the same base and seed_base.
std::vector<DemonstrationRecord> demos_to_records(const std::vector<DemoResult>& demos, const DrawerScenarioConfig& base,
                                                  const TeleopRig& rig, std::uint64_t seed_base);

}  // namespace teleop
