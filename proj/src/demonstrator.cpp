#include "teleop/demonstrator.hpp"

#include "teleop/errors.hpp"
#include "teleop/targeting.hpp"

#include <algorithm>

namespace teleop {

namespace {

using Path = std::vector<Eigen::Vector3d>;

void append_lerp(Path& path, const Eigen::Vector3d& a, const Eigen::Vector3d& b, int n) {
    for (int i = 0; i < n; ++i) path.push_back(a + (b - a) * std::min(1.0, (i + 1.0) / n));
}

void append_hold(Path& path, const Eigen::Vector3d& p, int n) { path.insert(path.end(), n, p); }

}  // namespace

SessionConfig demo_session_config(const Scenario& sc, const TeleopRig& rig) {
    SessionConfig cfg;
    cfg.follower = sc.follower;
    cfg.leader.chain = scale_chain(sc.follower.chain, rig.leader_scale);
    cfg.leader.inertia = rig.leader_inertia;
    cfg.leader.damping = rig.leader_damping;
    cfg.scheme = rig.scheme;
    cfg.channel_up = rig.channel;
    cfg.channel_down = rig.channel;
    cfg.env = sc.drawer;
    cfg.op = rig.hand;
    cfg.initial_q = sc.start_q;
    cfg.rate_hz = 1.0 / sc.dt;
    cfg.substeps = sc.substeps;
    cfg.seed = sc.seed;
    return cfg;
}

DemoResult scripted_demonstrator(const Scenario& sc, const TeleopRig& rig, const DemonstratorConfig& dc) {
    SessionConfig cfg = demo_session_config(sc, rig);
    cfg.duration_s = dc.max_ticks * sc.dt;
    Session session(cfg);
    const KinematicChain& chain = sc.follower.chain;
    const Eigen::Vector3d home = sc.drawer.handle_home;
    const Eigen::Vector3d pull_to = home + dc.pull_distance * sc.drawer.axis;

    enum class Phase { approach, pull, fail } phase = Phase::approach;
    JointPositions target_q = sc.start_q;
    Path path;
    append_lerp(path, forward_kinematics(chain, target_q).position, home, dc.approach_ticks);
    append_hold(path, home, dc.dwell_ticks);
    std::size_t at = 0;
    int probe = 0, settled = 0;
    double max_force = 0.0;
    Eigen::VectorXd tau = Eigen::VectorXd::Zero(chain.dof());
    DemoResult out;

    for (int t = 0; t < dc.max_ticks; ++t) {
        Eigen::Vector3d goal;
        if (at < path.size()) {
            goal = path[at++];
        } else {
            goal = path.back();
            if (phase == Phase::approach) {
                phase = Phase::pull;
                path.clear();
                append_lerp(path, goal, pull_to, dc.pull_ticks);
                at = 0;
                probe = 0;
                max_force = 0.0;
                ++out.pull_attempts;
            }
        }
        if (phase == Phase::pull) {
            ++probe;
            max_force = std::max(max_force, tau.cwiseAbs().maxCoeff());
            if (probe == dc.probe_ticks && max_force < dc.eps_force) {
                const Eigen::Vector3d here = forward_kinematics(chain, target_q).position;
                path.clear();
                at = 0;
                if (out.pull_attempts < dc.retry_cap) {
                    phase = Phase::approach;
                    out.retried = true;
                    const Eigen::Vector3d via = home + dc.side_offset * dc.side_axis;
                    append_lerp(path, here, via, dc.side_ticks);
                    append_lerp(path, via, home, dc.side_ticks);
                    append_hold(path, home, dc.dwell_ticks);
                } else {
                    phase = Phase::fail;
                    path.push_back(here);
                }
            }
        }
        target_q = solve_position_ik(chain, goal, target_q);
        session.set_operator_target(target_q);
        const TraceEntry& e = session.tick();
        tau = e.tau_ext;
        if (sc.success(session.follower().contact()) && ++settled > dc.settle_ticks) break;
    }
    out.trace = session.take_trace();
    out.success = sc.success(session.follower().contact());
    out.grasp_attempts = session.follower().contact().grasp_attempts;
    return out;
}

DemonstrationRecord demo_to_record(const DemoResult& d, const Scenario& sc, const TeleopRig& rig) {
    DemoMeta meta;
    meta.task = "drawer";
    meta.scheme = scheme_name(rig.scheme);
    if (const auto* fp = std::get_if<FPScheme>(&rig.scheme)) meta.k_f = fp->k_f;
    meta.seed = sc.seed;
    meta.success = d.success;
    meta.extra = {{"pull_attempts", d.pull_attempts},
                  {"grasp_attempts", d.grasp_attempts},
                  {"retried", d.retried}};
    return record_demonstration(d.trace, meta);
}

std::vector<DemoResult> generate_demos(const DrawerScenarioConfig& base, const TeleopRig& rig,
                                       const DemonstratorConfig& dc, int n, std::uint64_t seed_base, Exec exec) {
    std::vector<DemoResult> out(static_cast<std::size_t>(std::max(n, 0)));
    auto one = [&](int i) {
        DrawerScenarioConfig c = base;
        c.seed = seed_base + static_cast<std::uint64_t>(i);
        out[i] = scripted_demonstrator(make_drawer_scenario(c), rig, dc);
    };
    if (exec == Exec::serial) {
        for (int i = 0; i < n; ++i) one(i);
    } else {
#pragma omp parallel for schedule(dynamic, 1)
        for (int i = 0; i < n; ++i) one(i);
    }
    return out;
}

std::vector<DemonstrationRecord> demos_to_records(const std::vector<DemoResult>& demos, const DrawerScenarioConfig& base,
                                                  const TeleopRig& rig, std::uint64_t seed_base) {
    std::vector<DemonstrationRecord> out;
    out.reserve(demos.size());
    for (std::size_t i = 0; i < demos.size(); ++i) {
        DrawerScenarioConfig c = base;
        c.seed = seed_base + static_cast<std::uint64_t>(i);
        out.push_back(demo_to_record(demos[i], make_drawer_scenario(c), rig));
    }
    return out;
}

}  // namespace teleop
