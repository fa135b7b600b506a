#include "teleop/session.hpp"

#include "teleop/errors.hpp"

#include <cmath>
#include <utility>

namespace teleop {

long SessionConfig::ticks() const { return std::lround(duration_s * rate_hz); }

void SessionConfig::validate() const {
    follower.validate();
    leader.validate();
    const int n = follower.dof();
    if (leader.dof() != n) throw ConfigError("leader and follower DoF differ");
    if (chain_scale_between(follower.chain, leader.chain) <= 0)
        throw ConfigError("leader chain is not a scaled copy of the follower chain");
    validate_scheme(scheme, n);
    if (std::holds_alternative<FourCScheme>(scheme)) {
        check_four_channel_chains(leader.chain, follower.chain);
    }
    channel_up.validate();
    channel_down.validate();
    validate_env(env);
    op.validate(n);
    require_dim(initial_q.size(), n, "initial_q");
    if (!(rate_hz > 0) || !std::isfinite(rate_hz)) throw ConfigError("rate_hz must be positive");
    if (!(duration_s >= 0) || !std::isfinite(duration_s)) throw ConfigError("duration_s must be >= 0");
    if (substeps < 1) throw ConfigError("substeps must be >= 1");
}

FollowerPlant::FollowerPlant(ArmModel model, EnvPrimitive env, double dt, int substeps,
                             std::uint64_t seed, const JointPositions& q0)
    : model_(std::move(model)), env_(std::move(env)), dt_(dt), substeps_(substeps), seed_(seed),
      state_(ArmState::at_rest(q0)), tau_ext_(Eigen::VectorXd::Zero(q0.size())) {
    require_dim(q0.size(), model_.dof(), "initial q");
}

JointTorques FollowerPlant::evaluate_contact() {
    if (std::holds_alternative<FreeSpace>(env_)) {
        contact_.wrench = Wrench{};
        return Eigen::VectorXd::Zero(model_.dof());
    }
    const Pose pose = forward_kinematics(model_.chain, state_.q);
    const JacobianMatrix J = geometric_jacobian(model_.chain, state_.q);
    const Eigen::Vector3d v = J.linear * state_.qdot;
    auto [w, next] = contact_wrench(env_, pose, v, contact_, seed_);
    contact_ = next;
    return external_joint_torque(J, w);
}

const JointTorques& FollowerPlant::sense() {
    tau_ext_ = evaluate_contact();
    sensed_ = true;
    return tau_ext_;
}

void FollowerPlant::advance(const CommandFn& command, bool gripper_close) {
    const double h = dt_ / substeps_;
    const double t_end = state_.t + dt_;
    for (int s = 0; s < substeps_; ++s) {
        const JointTorques tau_ext = (s == 0 && sensed_) ? tau_ext_ : evaluate_contact();
        const JointTorques tau_cmd = command(state_);
        // the arm feels the reaction of what it applies on the environment
        state_ = step(model_, state_, tau_cmd, -tau_ext, h);
    }
    state_.t = t_end;
    sensed_ = false;
    if (const auto* d = std::get_if<DrawerHandle>(&env_)) {
        contact_ = gripper_update(*d, forward_kinematics(model_.chain, state_.q), contact_, seed_, gripper_close);
    }
}

void FollowerPlant::track(const ImpedanceGains& g, const JointPositions& q_ref, bool gripper_close) {
    advance([&](const ArmState& s) { return impedance_torque(g, q_ref, s.q, s.qdot); }, gripper_close);
}

Session::Session(const SessionConfig& cfg, bool keep_trace)
    : cfg_(cfg),
      keep_trace_(keep_trace),
      leader_(ArmState::at_rest(cfg.initial_q)),
      plant_(cfg.follower, cfg.env, cfg.dt(), cfg.substeps, cfg.seed, cfg.initial_q),
      up_(cfg.channel_up),
      down_(cfg.channel_down) {
    cfg_.validate();
    const long n = cfg.initial_q.size();
    held_up_.value = {cfg.initial_q, Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
    held_down_.value = {cfg.initial_q, Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
    trace_.dt = cfg.dt();
    if (keep_trace_) trace_.entries.reserve(static_cast<std::size_t>(std::max(0L, cfg.ticks())));
}

void Session::set_operator_target(const JointPositions& q) {
    require_dim(q.size(), cfg_.follower.dof(), "operator target");
    target_override_ = q;
}

void Session::clear_operator_target() { target_override_.reset(); }

void Session::set_scheme(const ControlScheme& s) {
    validate_scheme(s, cfg_.follower.dof());
    if (std::holds_alternative<FourCScheme>(s)) check_four_channel_chains(cfg_.leader.chain, cfg_.follower.chain);
    pending_scheme_ = s;
}

JointTorques Session::leader_feedback(const ArmState& l) const {
    const DownSample& d = held_down_.value;
    if (const auto* fp = std::get_if<FPScheme>(&cfg_.scheme)) return fp_leader_torque(fp->k_f, d.tau_ext);
    if (const auto* pp = std::get_if<PPScheme>(&cfg_.scheme))
        return pp_leader_torque(pp->leader_gains, d.q, l.q, l.qdot);
    const auto& fc = std::get<FourCScheme>(cfg_.scheme);
    ArmState remote{d.q, d.qdot, l.t};
    return four_channel_torques(l, remote, d.tau_ext, Eigen::VectorXd::Zero(l.q.size()), fc).leader;
}

const TraceEntry& Session::tick() {
    if (pending_scheme_) {
        cfg_.scheme = *pending_scheme_;
        pending_scheme_.reset();
    }
    const double dt = cfg_.dt();
    const double t = static_cast<double>(tick_) * dt;
    leader_.t = t;
    plant_.set_time(t);

    const JointTorques tau_ext = plant_.sense();
    const ArmState& f = plant_.state();
    const JointTorques tau_op = target_override_
                                    ? operator_torque_to(cfg_.op, *target_override_, leader_.q, leader_.qdot)
                                    : operator_torque(cfg_.op, t, leader_.q, leader_.qdot);

    TraceEntry e;
    e.tick = tick_;
    e.t = t;
    e.up_sent = up_.send({leader_.q, leader_.qdot, tau_op}, t);
    e.down_sent = down_.send({f.q, f.qdot, tau_ext}, t);
    const auto up_batch = up_.deliver(t);
    const auto down_batch = down_.deliver(t);
    held_up_.accept(up_batch);
    held_down_.accept(down_batch);
    e.up_delivered = static_cast<int>(up_batch.size());
    e.down_delivered = static_cast<int>(down_batch.size());

    e.q_l = leader_.q;
    e.qdot_l = leader_.qdot;
    e.q_f = f.q;
    e.qdot_f = f.qdot;
    e.tau_ext = tau_ext;
    e.tau_l_ref = leader_feedback(leader_);
    e.tau_op = tau_op;
    e.wrench = plant_.wrench();
    e.in_contact = plant_.contact().in_contact;
    e.grasped = plant_.contact().grasped;
    e.drawer_extension = plant_.contact().drawer_extension;

    // follower substeps against the held leader sample
    const UpSample& u = held_up_.value;
    if (const auto* fc = std::get_if<FourCScheme>(&cfg_.scheme)) {
        const FourCScheme scheme = *fc;
        plant_.advance([&](const ArmState& s) {
            ArmState remote{u.q, u.qdot, s.t};
            const JointTorques zero = Eigen::VectorXd::Zero(s.q.size());
            // the coupling law is symmetric, so the follower side is the leader law with roles swapped
            FourCScheme no_force = scheme;
            no_force.force_gain = 0.0;
            return (four_channel_torques(s, remote, zero, zero, no_force).leader + u.tau_op).eval();
        }, gripper_close_);
    } else {
        plant_.track(follower_gains(cfg_.scheme), u.q, gripper_close_);
    }

    // leader substeps against the held follower sample
    const double h = dt / cfg_.substeps;
    const JointTorques zero = Eigen::VectorXd::Zero(leader_.q.size());
    for (int s = 0; s < cfg_.substeps; ++s) {
        const JointTorques fb = s == 0 ? e.tau_l_ref : leader_feedback(leader_);
        leader_ = step(cfg_.leader, leader_, tau_op + fb, zero, h);
    }

    ++tick_;
    leader_.t = static_cast<double>(tick_) * dt;
    plant_.set_time(leader_.t);
    trace_.up = up_.stats();
    trace_.down = down_.stats();
    if (keep_trace_) trace_.entries.push_back(e);
    last_ = std::move(e);
    return last_;
}

SessionTrace Session::take_trace() {
    SessionTrace out = std::move(trace_);
    trace_ = SessionTrace{};
    trace_.dt = cfg_.dt();
    return out;
}

SessionTrace run_session(const SessionConfig& cfg) {
    Session s(cfg);
    const long n = cfg.ticks();
    for (long k = 0; k < n; ++k) {
        try {
            s.tick();
        } catch (const NonFiniteError& err) {
            s.trace().diverged_tick = k;
            s.trace().failure = err.what();
            break;
        }
    }
    return s.take_trace();
}

}  // namespace teleop
