#pragma once

#include "teleop/channel.hpp"
#include "teleop/contact_sim.hpp"
#include "teleop/controllers.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace teleop {

struct UpSample {
    JointPositions q;
    JointVelocities qdot;
    JointTorques tau_op;
};

struct DownSample {
    JointPositions q;
    JointVelocities qdot;
    JointTorques tau_ext;
};

struct SessionConfig {
    ArmModel leader;
    ArmModel follower;
    ControlScheme scheme;
    ChannelConfig channel_up;
    ChannelConfig channel_down;
    EnvPrimitive env = FreeSpace{};
    OperatorModel op;
    JointPositions initial_q;
    double duration_s = 10.0;
    double rate_hz = 50.0;
    int substeps = 4;
    std::uint64_t seed = 0;

    double dt() const { return 1.0 / rate_hz; }
    long ticks() const;
    void validate() const;
};

struct TraceEntry {
    long tick = 0;
    double t = 0.0;
    JointPositions q_l, qdot_l, q_f, qdot_f;
    JointTorques tau_ext;    // J_f^T F_ext at the tick
    JointTorques tau_l_ref;  // scheme feedback torque applied to the leader
    JointTorques tau_op;
    Wrench wrench;
    bool in_contact = false;
    bool grasped = false;
    double drawer_extension = 0.0;
    bool up_sent = false;
    bool down_sent = false;
    int up_delivered = 0;
    int down_delivered = 0;
};

struct SessionTrace {
    double dt = 0.02;
    std::vector<TraceEntry> entries;
    std::optional<long> diverged_tick;
    std::string failure;
    ChannelStats up;
    ChannelStats down;

    std::size_t size() const { return entries.size(); }
};

// Follower arm plus environment, advanced one control tick at a time.
class FollowerPlant {
public:
    using CommandFn = std::function<JointTorques(const ArmState&)>;

    FollowerPlant(ArmModel model, EnvPrimitive env, double dt, int substeps, std::uint64_t seed,
                  const JointPositions& q0);

    // Evaluates the contact at the current state and returns tau_ext = J^T F_ext.
    const JointTorques& sense();
    // Runs the substeps with the given torque law, then the once-per-tick gripper logic.
    void advance(const CommandFn& command, bool gripper_close = true);
    // Impedance tracking of a fixed reference for one tick.
    void track(const ImpedanceGains& g, const JointPositions& q_ref, bool gripper_close = true);

    const ArmState& state() const { return state_; }
    const ContactState& contact() const { return contact_; }
    const JointTorques& tau_ext() const { return tau_ext_; }
    const Wrench& wrench() const { return contact_.wrench; }
    const ArmModel& model() const { return model_; }
    const EnvPrimitive& env() const { return env_; }
    void set_time(double t) { state_.t = t; }

private:
    JointTorques evaluate_contact();

    ArmModel model_;
    EnvPrimitive env_;
    double dt_;
    int substeps_;
    std::uint64_t seed_;
    ArmState state_;
    ContactState contact_;
    JointTorques tau_ext_;
    bool sensed_ = false;
};

class Session {
public:
    explicit Session(const SessionConfig& cfg, bool keep_trace = true);

    // Advances one control tick and returns the entry recorded at its start.
    const TraceEntry& tick();

    // Replaces the scripted operator trajectory with a fixed joint target.
    void set_operator_target(const JointPositions& q);
    void clear_operator_target();
    // Takes effect at the next tick.
    void set_scheme(const ControlScheme& s);
    // Open gripper disables the grasp reflex.
    void set_gripper(bool close) { gripper_close_ = close; }
    bool gripper() const { return gripper_close_; }

    long tick_index() const { return tick_; }
    double time() const { return static_cast<double>(tick_) * cfg_.dt(); }
    const SessionConfig& config() const { return cfg_; }
    const ControlScheme& scheme() const { return cfg_.scheme; }
    const ArmState& leader() const { return leader_; }
    const FollowerPlant& follower() const { return plant_; }
    const TraceEntry& last() const { return last_; }
    SessionTrace& trace() { return trace_; }
    SessionTrace take_trace();

private:
    JointTorques leader_feedback(const ArmState& l) const;

    SessionConfig cfg_;
    bool keep_trace_;
    long tick_ = 0;
    ArmState leader_;
    FollowerPlant plant_;
    Channel<UpSample> up_;
    Channel<DownSample> down_;
    LatestSample<UpSample> held_up_;
    LatestSample<DownSample> held_down_;
    std::optional<JointPositions> target_override_;
    std::optional<ControlScheme> pending_scheme_;
    bool gripper_close_ = true;
    TraceEntry last_;
    SessionTrace trace_;
};

// Runs cfg.ticks() ticks. A non-finite state ends the run early and is recorded in the trace.
SessionTrace run_session(const SessionConfig& cfg);

}  // namespace teleop
