#pragma once

#include "teleop/contact_sim.hpp"
#include "teleop/kinematics.hpp"

#include <functional>
#include <string>
#include <variant>

namespace teleop {

struct ImpedanceGains {
    Eigen::VectorXd kp;
    Eigen::VectorXd kd;

    static ImpedanceGains uniform(int n, double kp, double kd) {
        return {Eigen::VectorXd::Constant(n, kp), Eigen::VectorXd::Constant(n, kd)};
    }
    void validate(int n) const;
};

struct PPScheme {
    ImpedanceGains leader_gains;
    ImpedanceGains follower_gains;
};

struct FPScheme {
    double k_f = 0.3;
    ImpedanceGains follower_gains;
};

struct FourCScheme {
    ImpedanceGains follower_gains;
    double force_gain = 1.0;
};

using ControlScheme = std::variant<PPScheme, FPScheme, FourCScheme>;

std::string scheme_name(const ControlScheme& s);
const ImpedanceGains& follower_gains(const ControlScheme& s);
void validate_scheme(const ControlScheme& s, int n);

// tau = kp (q_ref - q) - kd qdot
JointTorques impedance_torque(const ImpedanceGains& g, const JointPositions& q_ref,
                              const JointPositions& q, const JointVelocities& qdot);

// tau_l_ref = -k_f tau_ext
JointTorques fp_leader_torque(double k_f, const JointTorques& tau_ext_f);

JointTorques pp_leader_torque(const ImpedanceGains& g, const JointPositions& q_follower,
                              const JointPositions& q_leader, const JointVelocities& qdot_leader);

struct FourChannelTorques {
    JointTorques leader;
    JointTorques follower;
};

// Leader: -g tau_ext plus position/velocity coupling to the follower.
// Follower: coupling to the leader plus the operator torque fed forward.
FourChannelTorques four_channel_torques(const ArmState& leader, const ArmState& follower,
                                        const JointTorques& tau_ext_f, const JointTorques& tau_op,
                                        const FourCScheme& scheme);

// Throws ConfigError unless the two chains are identical.
void check_four_channel_chains(const KinematicChain& leader, const KinematicChain& follower);

using TargetTrajectory = std::function<JointPositions(double)>;

struct OperatorModel {
    Eigen::VectorXd hand_kp;
    Eigen::VectorXd hand_kd;
    double tau_max = 20.0;
    TargetTrajectory target;

    void validate(int n) const;
};

JointTorques operator_torque(const OperatorModel& m, double t, const JointPositions& q_l,
                             const JointVelocities& qdot_l);

// Same law with an explicit target instead of the trajectory.
JointTorques operator_torque_to(const OperatorModel& m, const JointPositions& target,
                                const JointPositions& q_l, const JointVelocities& qdot_l);

}  // namespace teleop
