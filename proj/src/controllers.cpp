#include "teleop/controllers.hpp"

#include "teleop/errors.hpp"

#include <cmath>

namespace teleop {

void ImpedanceGains::validate(int n) const {
    require_dim(kp.size(), n, "kp");
    require_dim(kd.size(), n, "kd");
    for (int i = 0; i < n; ++i) {
        if (!(kp[i] > 0) || !std::isfinite(kp[i])) throw ConfigError("kp must be positive");
        if (!(kd[i] >= 0) || !std::isfinite(kd[i])) throw ConfigError("kd must be non-negative");
    }
}

std::string scheme_name(const ControlScheme& s) {
    switch (s.index()) {
        case 0: return "PP";
        case 1: return "FP";
        default: return "4C";
    }
}

const ImpedanceGains& follower_gains(const ControlScheme& s) {
    return std::visit([](const auto& x) -> const ImpedanceGains& { return x.follower_gains; }, s);
}

void validate_scheme(const ControlScheme& s, int n) {
    follower_gains(s).validate(n);
    if (const auto* pp = std::get_if<PPScheme>(&s)) pp->leader_gains.validate(n);
    if (const auto* fp = std::get_if<FPScheme>(&s))
        if (!(fp->k_f > 0) || !std::isfinite(fp->k_f)) throw ConfigError("k_f must be positive");
    if (const auto* fc = std::get_if<FourCScheme>(&s))
        if (!std::isfinite(fc->force_gain)) throw ConfigError("force_gain must be finite");
}

JointTorques impedance_torque(const ImpedanceGains& g, const JointPositions& q_ref,
                              const JointPositions& q, const JointVelocities& qdot) {
    const long n = q.size();
    require_dim(q_ref.size(), n, "q_ref");
    require_dim(qdot.size(), n, "qdot");
    require_dim(g.kp.size(), n, "kp");
    require_dim(g.kd.size(), n, "kd");
    return (g.kp.array() * (q_ref - q).array() - g.kd.array() * qdot.array()).matrix();
}

JointTorques fp_leader_torque(double k_f, const JointTorques& tau_ext_f) {
    if (!(k_f > 0)) throw ConfigError("k_f must be positive");
    // adding +0.0 turns -0.0 into +0.0 so free motion gives exact zeros
    return ((-k_f * tau_ext_f).array() + 0.0).matrix();
}

JointTorques pp_leader_torque(const ImpedanceGains& g, const JointPositions& q_follower,
                              const JointPositions& q_leader, const JointVelocities& qdot_leader) {
    return impedance_torque(g, q_follower, q_leader, qdot_leader);
}

FourChannelTorques four_channel_torques(const ArmState& leader, const ArmState& follower,
                                        const JointTorques& tau_ext_f, const JointTorques& tau_op,
                                        const FourCScheme& scheme) {
    const long n = leader.q.size();
    require_dim(follower.q.size(), n, "follower q");
    require_dim(tau_ext_f.size(), n, "tau_ext");
    require_dim(tau_op.size(), n, "tau_op");
    const auto& g = scheme.follower_gains;
    require_dim(g.kp.size(), n, "kp");
    const Eigen::ArrayXd dq = (follower.q - leader.q).array();
    const Eigen::ArrayXd dv = (follower.qdot - leader.qdot).array();
    FourChannelTorques out;
    out.leader = (-scheme.force_gain * tau_ext_f.array() + g.kp.array() * dq + g.kd.array() * dv).matrix();
    out.follower = (-g.kp.array() * dq - g.kd.array() * dv + tau_op.array()).matrix();
    return out;
}

void check_four_channel_chains(const KinematicChain& leader, const KinematicChain& follower) {
    const double s = chain_scale_between(follower, leader);
    if (s < 0 || std::abs(s - 1.0) > 1e-9)
        throw ConfigError("4C needs identical leader and follower chains");
}

void OperatorModel::validate(int n) const {
    require_dim(hand_kp.size(), n, "hand_kp");
    require_dim(hand_kd.size(), n, "hand_kd");
    for (int i = 0; i < n; ++i) {
        if (!(hand_kp[i] > 0)) throw ConfigError("hand_kp must be positive");
        if (!(hand_kd[i] >= 0)) throw ConfigError("hand_kd must be non-negative");
    }
    if (!(tau_max > 0)) throw ConfigError("tau_max must be positive");
}

JointTorques operator_torque_to(const OperatorModel& m, const JointPositions& target,
                                const JointPositions& q_l, const JointVelocities& qdot_l) {
    const long n = q_l.size();
    require_dim(target.size(), n, "operator target");
    require_dim(qdot_l.size(), n, "leader qdot");
    const Eigen::ArrayXd tau = m.hand_kp.array() * (target - q_l).array() - m.hand_kd.array() * qdot_l.array();
    return tau.min(m.tau_max).max(-m.tau_max).matrix();
}

JointTorques operator_torque(const OperatorModel& m, double t, const JointPositions& q_l,
                             const JointVelocities& qdot_l) {
    if (!m.target) return Eigen::VectorXd::Zero(q_l.size());
    return operator_torque_to(m, m.target(t), q_l, qdot_l);
}

}  // namespace teleop
