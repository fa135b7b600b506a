#include "teleop/contact_sim.hpp"

#include "teleop/errors.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace teleop {

void ArmModel::validate() const {
    chain.validate();
    require_dim(inertia.size(), dof(), "inertia");
    require_dim(damping.size(), dof(), "damping");
    for (int i = 0; i < dof(); ++i) {
        if (!(inertia[i] > 0)) throw ConfigError("inertia must be positive (joint " + std::to_string(i) + ")");
        if (!(damping[i] >= 0)) throw ConfigError("damping must be non-negative (joint " + std::to_string(i) + ")");
    }
}

void validate_env(const EnvPrimitive& env) {
    if (const auto* h = std::get_if<HalfSpace>(&env)) {
        if (std::abs(h->normal.norm() - 1.0) > 1e-9) throw ConfigError("half-space normal must be unit length");
        if (!(h->stiffness > 0)) throw ConfigError("half-space stiffness must be positive");
        if (!(h->damping >= 0)) throw ConfigError("half-space damping must be non-negative");
    } else if (const auto* d = std::get_if<DrawerHandle>(&env)) {
        if (std::abs(d->axis.norm() - 1.0) > 1e-9) throw ConfigError("drawer axis must be unit length");
        if (!(d->travel_max > 0)) throw ConfigError("drawer travel_max must be positive");
        if (!(d->grasp_success_prob >= 0 && d->grasp_success_prob <= 1))
            throw ConfigError("grasp_success_prob must lie in [0, 1]");
        if (!(d->dynamic_friction >= 0 && d->static_friction >= d->dynamic_friction))
            throw ConfigError("drawer friction needs 0 <= dynamic <= static");
        if (!(d->capture_radius > 0)) throw ConfigError("capture_radius must be positive");
        if (!(d->grip_stiffness > 0)) throw ConfigError("grip_stiffness must be positive");
        if (d->dwell_ticks < 1 || d->rearm_ticks < 0) throw ConfigError("invalid gripper reflex timing");
    }
}

double uniform_draw(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    std::mt19937_64 rng(seq);
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

namespace {

Eigen::Vector3d handle_position(const DrawerHandle& d, const ContactState& c) {
    return d.handle_home + c.drawer_extension * d.axis;
}

}  // namespace

std::pair<Wrench, ContactState> contact_wrench(const EnvPrimitive& env, const Pose& ee_pose,
                                               const Eigen::Vector3d& ee_linvel,
                                               const ContactState& contact, std::uint64_t) {
    ContactState next = contact;
    Wrench w;
    const Eigen::Vector3d& p = ee_pose.position;

    if (const auto* h = std::get_if<HalfSpace>(&env)) {
        const double depth = std::max(0.0, h->offset - h->normal.dot(p));
        const double fn =
            depth > 0.0 ? std::max(0.0, h->stiffness * depth - h->damping * h->normal.dot(ee_linvel)) : 0.0;
        next.in_contact = depth > 0.0;
        if (fn > 0.0) w.force = -fn * h->normal;
    } else if (const auto* d = std::get_if<DrawerHandle>(&env)) {
        next.in_contact = contact.grasped;
        if (contact.grasped) {
            // quasi-static stick-slip: the handle follows the grip only once the axial pull beats friction
            const double u = d->axis.dot(p - d->handle_home - contact.grasp_offset);
            const double axial = d->grip_stiffness * (u - contact.drawer_extension);
            const double threshold = contact.sliding ? d->dynamic_friction : d->static_friction;
            double ext = contact.drawer_extension;
            if (axial > threshold) {
                ext = u - d->dynamic_friction / d->grip_stiffness;
                next.sliding = true;
            } else if (axial < -threshold) {
                ext = u + d->dynamic_friction / d->grip_stiffness;
                next.sliding = true;
            } else {
                next.sliding = false;
            }
            next.drawer_extension = std::clamp(ext, 0.0, d->travel_max);
            w.force = d->grip_stiffness * (p - handle_position(*d, next) - contact.grasp_offset);
        }
    }
    next.wrench = w;
    return {w, next};
}

ContactState gripper_update(const DrawerHandle& d, const Pose& ee_pose, const ContactState& contact,
                            std::uint64_t rng_seed, bool close_cmd) {
    ContactState next = contact;
    if (contact.grasped) {
        if (!close_cmd) {
            next.grasped = false;
            next.dwell = 0;
        }
        return next;
    }
    const double dist = (ee_pose.position - handle_position(d, contact)).norm();
    if (dist < d.capture_radius && close_cmd) {
        next.dwell += 1;
        if (next.dwell >= d.dwell_ticks) {
            next.grasp_attempts += 1;
            if (uniform_draw(rng_seed, static_cast<std::uint64_t>(next.grasp_attempts)) < d.grasp_success_prob) {
                next.grasped = true;
                next.missed = false;
                next.grasp_offset = ee_pose.position - handle_position(d, contact);
            } else {
                next.missed = true;
                next.dwell = -d.rearm_ticks;
            }
        }
    } else {
        next.dwell = 0;
        next.missed = false;
    }
    return next;
}

double contact_potential(const EnvPrimitive& env, const Pose& ee_pose, const ContactState& contact) {
    if (const auto* h = std::get_if<HalfSpace>(&env)) {
        const double depth = std::max(0.0, h->offset - h->normal.dot(ee_pose.position));
        return 0.5 * h->stiffness * depth * depth;
    }
    if (const auto* d = std::get_if<DrawerHandle>(&env)) {
        if (!contact.grasped) return 0.0;
        const Eigen::Vector3d s = ee_pose.position - handle_position(*d, contact) - contact.grasp_offset;
        return 0.5 * d->grip_stiffness * s.squaredNorm();
    }
    return 0.0;
}

double kinetic_energy(const ArmModel& model, const ArmState& state) {
    return 0.5 * (model.inertia.array() * state.qdot.array().square()).sum();
}

ArmState step(const ArmModel& model, const ArmState& state, const JointTorques& tau_cmd,
              const JointTorques& tau_ext, double dt) {
    const int n = model.dof();
    if (!(dt > 0)) throw ConfigError("dt must be positive");
    require_dim(state.q.size(), n, "state.q");
    require_dim(state.qdot.size(), n, "state.qdot");
    require_dim(tau_cmd.size(), n, "tau_cmd");
    require_dim(tau_ext.size(), n, "tau_ext");
    for (int i = 0; i < n; ++i)
        if (!std::isfinite(tau_cmd[i]) || !std::isfinite(tau_ext[i]))
            throw NonFiniteError("non-finite torque on joint " + std::to_string(i), i);

    ArmState next;
    next.t = state.t + dt;
    const Eigen::ArrayXd qdd =
        (tau_cmd.array() + tau_ext.array() - model.damping.array() * state.qdot.array()) / model.inertia.array();
    next.qdot = (state.qdot.array() + dt * qdd).matrix();
    next.q = state.q + dt * next.qdot;
    for (int i = 0; i < n; ++i) {
        const auto [lo, hi] = model.chain.limits[i];
        if (next.q[i] < lo) {
            next.q[i] = lo;
            next.qdot[i] = 0.0;
        } else if (next.q[i] > hi) {
            next.q[i] = hi;
            next.qdot[i] = 0.0;
        }
    }
    return next;
}

Scenario make_drawer_scenario(const DrawerScenarioConfig& cfg) {
    cfg.arm.validate();
    validate_env(cfg.drawer);
    if (!(cfg.randomization >= 0)) throw ConfigError("randomization must be non-negative");
    if (!(cfg.success_threshold > 0 && cfg.success_threshold < cfg.drawer.travel_max))
        throw ConfigError("success_threshold must lie in (0, travel_max)");
    if (!(cfg.dt > 0) || cfg.substeps < 1) throw ConfigError("invalid dt or substeps");
    require_dim(cfg.start_q.size(), cfg.arm.dof(), "start_q");

    Scenario s;
    s.follower = cfg.arm;
    s.drawer = cfg.drawer;
    s.start_q = cfg.start_q;
    s.randomization_axis = cfg.randomization_axis.normalized();
    s.success_threshold = cfg.success_threshold;
    s.dt = cfg.dt;
    s.substeps = cfg.substeps;
    s.seed = cfg.seed;
    const double u = uniform_draw(cfg.seed, 0);
    s.drawer.handle_home += (2.0 * u - 1.0) * cfg.randomization * s.randomization_axis;
    return s;
}

}  // namespace teleop
