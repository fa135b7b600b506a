#pragma once

#include "teleop/kinematics.hpp"

#include <cstdint>
#include <utility>
#include <variant>

namespace teleop {

struct ArmModel {
    KinematicChain chain;
    Eigen::VectorXd inertia;
    Eigen::VectorXd damping;

    int dof() const { return chain.dof(); }
    void validate() const;
};

struct ArmState {
    JointPositions q;
    JointVelocities qdot;
    double t = 0.0;

    static ArmState at_rest(const JointPositions& q0) {
        return {q0, Eigen::VectorXd::Zero(q0.size()), 0.0};
    }
};

struct FreeSpace {};

// Free side is normal . p >= offset.
struct HalfSpace {
    Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
    double offset = 0.0;
    double stiffness = 1000.0;
    double damping = 0.0;
};

struct DrawerHandle {
    Eigen::Vector3d axis = -Eigen::Vector3d::UnitX();
    Eigen::Vector3d handle_home = Eigen::Vector3d(0.65, 0.0, 0.0);
    double travel_max = 0.3;
    double static_friction = 8.0;
    double dynamic_friction = 5.0;
    double capture_radius = 0.035;
    double grasp_success_prob = 0.7;
    double grip_stiffness = 2000.0;
    // gripper reflex: close after this many consecutive ticks inside the capture radius
    int dwell_ticks = 2;
    // after a miss, ticks before the reflex re-arms while still inside the radius
    int rearm_ticks = 10;
};

using EnvPrimitive = std::variant<FreeSpace, HalfSpace, DrawerHandle>;

struct ContactState {
    bool in_contact = false;
    bool grasped = false;
    double drawer_extension = 0.0;
    Wrench wrench;

    // drawer bookkeeping
    Eigen::Vector3d grasp_offset = Eigen::Vector3d::Zero();
    bool sliding = false;
    bool missed = false;
    int dwell = 0;
    int grasp_attempts = 0;
};

void validate_env(const EnvPrimitive& env);

// Uniform [0, 1) draw that depends only on (seed, stream).
double uniform_draw(std::uint64_t seed, std::uint64_t stream);

// Wrench the end effector applies on the environment, and the updated contact state.
std::pair<Wrench, ContactState> contact_wrench(const EnvPrimitive& env, const Pose& ee_pose,
                                               const Eigen::Vector3d& ee_linvel,
                                               const ContactState& contact, std::uint64_t rng_seed);

// Once-per-tick gripper logic for the drawer handle. Each grasp attempt is a Bernoulli draw
// keyed on (seed, attempt number). An open command releases a held handle.
ContactState gripper_update(const DrawerHandle& drawer, const Pose& ee_pose,
                            const ContactState& contact, std::uint64_t rng_seed, bool close_cmd = true);

double contact_potential(const EnvPrimitive& env, const Pose& ee_pose, const ContactState& contact);

double kinetic_energy(const ArmModel& model, const ArmState& state);

// Semi-implicit Euler on M qdd = tau_cmd + tau_ext - B qdot, with joint limits as hard stops.
ArmState step(const ArmModel& model, const ArmState& state, const JointTorques& tau_cmd,
              const JointTorques& tau_ext, double dt);

struct DrawerScenarioConfig {
    ArmModel arm;
    DrawerHandle drawer;
    JointPositions start_q;
    Eigen::Vector3d randomization_axis = Eigen::Vector3d::UnitX();
    double randomization = 0.03;
    double success_threshold = 0.15;
    double dt = 0.02;
    int substeps = 4;
    std::uint64_t seed = 0;
};

struct Scenario {
    ArmModel follower;
    DrawerHandle drawer;
    JointPositions start_q;
    Eigen::Vector3d randomization_axis = Eigen::Vector3d::UnitX();
    double success_threshold = 0.15;
    double dt = 0.02;
    int substeps = 4;
    std::uint64_t seed = 0;

    bool success(const ContactState& c) const { return c.drawer_extension > success_threshold; }
};

Scenario make_drawer_scenario(const DrawerScenarioConfig& cfg);

}  // namespace teleop
