#include "teleop/config.hpp"

#include "teleop/errors.hpp"
#include "teleop/json_util.hpp"
#include "teleop/targeting.hpp"

#include <cmath>
#include <fstream>

namespace teleop {

namespace fs = std::filesystem;

json load_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config file not found: " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

void apply_override(json& j, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like key=value: " + assignment);
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(text);
    } catch (const json::parse_error&) {
        value = text;
    }
    json* node = &j;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw ConfigError("bad override key: " + key);
        if (!node->is_object()) throw ConfigError("override path '" + key + "' crosses a non-object");
        if (dot == std::string::npos) {
            (*node)[part] = value;
            return;
        }
        node = &(*node)[part];
        if (node->is_null()) *node = json::object();
        start = dot + 1;
    }
}

namespace {

KinematicChain chain_ref(const json& j, const fs::path& base_dir) {
    if (j.is_string()) {
        fs::path p = j.get<std::string>();
        if (p.is_relative()) p = base_dir / p;
        if (!fs::exists(p)) throw ConfigError("chain file not found: " + p.string());
        return load_chain(p.string());
    }
    return chain_from_json(j);
}

std::uint64_t get_seed(const json& j, const char* key, std::uint64_t fallback) {
    if (!j.contains(key)) return fallback;
    const json& v = j.at(key);
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0))
        throw ConfigError(std::string("field '") + key + "' must be a non-negative integer");
    return v.get<std::uint64_t>();
}

int get_int(const json& j, const char* key, int fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number_integer()) throw ConfigError(std::string("field '") + key + "' must be an integer");
    return j.at(key).get<int>();
}

}  // namespace

ArmModel arm_from_json(const json& j, const fs::path& base_dir) {
    ArmModel m;
    m.chain = chain_ref(require(j, "chain"), base_dir);
    const int n = m.chain.dof();
    m.inertia = as_vector(require(j, "inertia"), n, "inertia");
    m.damping = j.contains("damping") ? as_vector(j.at("damping"), n, "damping") : Eigen::VectorXd::Zero(n);
    m.validate();
    return m;
}

ImpedanceGains gains_from_json(const json& j, int n) {
    ImpedanceGains g{as_vector(require(j, "kp"), n, "kp"), as_vector(require(j, "kd"), n, "kd")};
    g.validate(n);
    return g;
}

ControlScheme scheme_from_json(const json& j, int n) {
    const std::string name = require(j, "scheme").get<std::string>();
    const ImpedanceGains fg = j.contains("follower_gains") ? gains_from_json(j.at("follower_gains"), n)
                                                           : ImpedanceGains::uniform(n, 100.0, 10.0);
    ControlScheme s;
    if (name == "FP") {
        s = FPScheme{as_double(require(j, "k_f"), "k_f"), fg};
    } else if (name == "PP") {
        s = PPScheme{gains_from_json(require(j, "leader_gains"), n), fg};
    } else if (name == "4C") {
        s = FourCScheme{fg, get_or(j, "force_gain", 1.0)};
    } else {
        throw ConfigError("unknown scheme '" + name + "' (expected PP, FP or 4C)");
    }
    validate_scheme(s, n);
    return s;
}

json scheme_to_json(const ControlScheme& s) {
    auto gains = [](const ImpedanceGains& g) { return json{{"kp", to_json_array(g.kp)}, {"kd", to_json_array(g.kd)}}; };
    json j = {{"scheme", scheme_name(s)}, {"follower_gains", gains(follower_gains(s))}};
    if (const auto* fp = std::get_if<FPScheme>(&s)) j["k_f"] = fp->k_f;
    if (const auto* pp = std::get_if<PPScheme>(&s)) j["leader_gains"] = gains(pp->leader_gains);
    if (const auto* fc = std::get_if<FourCScheme>(&s)) j["force_gain"] = fc->force_gain;
    return j;
}

ChannelConfig channel_from_json(const json& j) {
    ChannelConfig c;
    c.rate_hz = get_or(j, "rate_hz", c.rate_hz);
    c.latency_s = get_or(j, "latency_s", c.latency_s);
    c.jitter_s = get_or(j, "jitter_s", c.jitter_s);
    c.drop_prob = get_or(j, "drop_prob", c.drop_prob);
    c.seed = get_seed(j, "seed", c.seed);
    c.validate();
    return c;
}

EnvPrimitive env_from_json(const json& j) {
    const std::string type = j.value("type", std::string("free"));
    EnvPrimitive env;
    if (type == "free") {
        env = FreeSpace{};
    } else if (type == "halfspace") {
        HalfSpace h;
        h.normal = as_vec3(require(j, "normal"), "normal");
        h.offset = as_double(require(j, "offset"), "offset");
        h.stiffness = as_double(require(j, "stiffness"), "stiffness");
        h.damping = get_or(j, "damping", 0.0);
        env = h;
    } else if (type == "drawer") {
        DrawerHandle d;
        if (j.contains("axis")) d.axis = as_vec3(j.at("axis"), "axis");
        if (j.contains("handle_home")) d.handle_home = as_vec3(j.at("handle_home"), "handle_home");
        d.travel_max = get_or(j, "travel_max", d.travel_max);
        d.static_friction = get_or(j, "static_friction", d.static_friction);
        d.dynamic_friction = get_or(j, "dynamic_friction", d.dynamic_friction);
        d.capture_radius = get_or(j, "capture_radius", d.capture_radius);
        d.grasp_success_prob = get_or(j, "grasp_success_prob", d.grasp_success_prob);
        d.grip_stiffness = get_or(j, "grip_stiffness", d.grip_stiffness);
        d.dwell_ticks = get_int(j, "dwell_ticks", d.dwell_ticks);
        d.rearm_ticks = get_int(j, "rearm_ticks", d.rearm_ticks);
        env = d;
    } else {
        throw ConfigError("unknown env type '" + type + "'");
    }
    validate_env(env);
    return env;
}

TargetTrajectory trajectory_from_json(const json& j, int n) {
    const std::string kind = require(j, "kind").get<std::string>();
    if (kind == "hold") {
        const Eigen::VectorXd q = as_vector(require(j, "q"), n, "q");
        return [q](double) { return q; };
    }
    if (kind == "ramp") {
        const Eigen::VectorXd a = as_vector(require(j, "from"), n, "from");
        const Eigen::VectorXd b = as_vector(require(j, "to"), n, "to");
        const double t0 = get_or(j, "t0", 0.0), t1 = as_double(require(j, "t1"), "t1");
        if (!(t1 > t0)) throw ConfigError("ramp needs t1 > t0");
        return [a, b, t0, t1](double t) -> Eigen::VectorXd {
            const double s = std::clamp((t - t0) / (t1 - t0), 0.0, 1.0);
            return a + s * (b - a);
        };
    }
    if (kind == "sine") {
        const Eigen::VectorXd c = as_vector(require(j, "center"), n, "center");
        const Eigen::VectorXd amp = as_vector(require(j, "amplitude"), n, "amplitude");
        const double f = as_double(require(j, "freq_hz"), "freq_hz");
        const double ph = get_or(j, "phase", 0.0);
        return [c, amp, f, ph](double t) -> Eigen::VectorXd { return c + amp * std::sin(2 * M_PI * f * t + ph); };
    }
    if (kind == "waypoints") {
        const json& times = require(j, "times");
        const json& points = require(j, "points");
        if (!times.is_array() || !points.is_array() || times.size() != points.size() || times.empty())
            throw ConfigError("waypoints need equal-length, nonempty times and points");
        std::vector<double> ts;
        std::vector<Eigen::VectorXd> ps;
        for (std::size_t i = 0; i < times.size(); ++i) {
            ts.push_back(as_double(times[i], "times"));
            ps.push_back(as_vector(points[i], n, "points"));
            if (i && !(ts[i] > ts[i - 1])) throw ConfigError("waypoint times must increase");
        }
        return [ts, ps](double t) -> Eigen::VectorXd {
            if (t <= ts.front()) return ps.front();
            for (std::size_t i = 1; i < ts.size(); ++i)
                if (t <= ts[i]) return ps[i - 1] + (t - ts[i - 1]) / (ts[i] - ts[i - 1]) * (ps[i] - ps[i - 1]);
            return ps.back();
        };
    }
    throw ConfigError("unknown trajectory kind '" + kind + "'");
}

OperatorModel operator_from_json(const json& j, int n) {
    OperatorModel m;
    m.hand_kp = as_vector(require(j, "hand_kp"), n, "hand_kp");
    m.hand_kd = j.contains("hand_kd") ? as_vector(j.at("hand_kd"), n, "hand_kd") : Eigen::VectorXd::Zero(n);
    m.tau_max = get_or(j, "tau_max", m.tau_max);
    if (j.contains("target")) m.target = trajectory_from_json(j.at("target"), n);
    m.validate(n);
    return m;
}

SessionConfig session_from_json(const json& j, const fs::path& base_dir) {
    SessionConfig c;
    c.follower = arm_from_json(require(j, "follower"), base_dir);
    const int n = c.follower.dof();
    const json& lj = require(j, "leader");
    if (lj.contains("chain")) {
        c.leader = arm_from_json(lj, base_dir);
    } else {
        c.leader.chain = scale_chain(c.follower.chain, get_or(lj, "scale", 0.5));
        c.leader.inertia = as_vector(require(lj, "inertia"), n, "leader.inertia");
        c.leader.damping = lj.contains("damping") ? as_vector(lj.at("damping"), n, "leader.damping")
                                                  : Eigen::VectorXd::Zero(n);
    }
    c.scheme = scheme_from_json(require(j, "scheme"), n);
    const json empty = json::object();
    c.channel_up = channel_from_json(j.contains("channel_up") ? j.at("channel_up") : empty);
    c.channel_down = channel_from_json(j.contains("channel_down") ? j.at("channel_down") : empty);
    c.env = env_from_json(j.contains("env") ? j.at("env") : empty);
    c.op = operator_from_json(require(j, "operator"), n);
    c.initial_q = j.contains("initial_q") ? as_vector(j.at("initial_q"), n, "initial_q") : Eigen::VectorXd::Zero(n);
    c.duration_s = get_or(j, "duration_s", c.duration_s);
    c.rate_hz = get_or(j, "rate_hz", c.rate_hz);
    c.substeps = get_int(j, "substeps", c.substeps);
    c.seed = get_seed(j, "seed", c.seed);
    c.validate();
    return c;
}

DrawerSetup drawer_setup_from_json(const json& j, const fs::path& base_dir) {
    DrawerSetup s;
    DrawerScenarioConfig& sc = s.scenario;
    sc.arm = arm_from_json(require(j, "arm"), base_dir);
    const int n = sc.arm.dof();
    json dj = j.contains("drawer") ? j.at("drawer") : json::object();
    dj["type"] = "drawer";
    sc.drawer = std::get<DrawerHandle>(env_from_json(dj));
    if (j.contains("start_q")) {
        sc.start_q = as_vector(j.at("start_q"), n, "start_q");
    } else {
        const json& st = require(j, "start");
        const Eigen::Vector3d ee = as_vec3(require(st, "ee"), "start.ee");
        const Eigen::VectorXd guess = as_vector(require(st, "q_guess"), n, "start.q_guess");
        sc.start_q = solve_position_ik(sc.arm.chain, ee, guess);
    }
    if (j.contains("randomization_axis")) sc.randomization_axis = as_vec3(j.at("randomization_axis"), "randomization_axis");
    sc.randomization = get_or(j, "randomization", sc.randomization);
    sc.success_threshold = get_or(j, "success_threshold", sc.success_threshold);
    sc.dt = get_or(j, "dt", sc.dt);
    sc.substeps = get_int(j, "substeps", sc.substeps);
    sc.seed = get_seed(j, "seed", sc.seed);
    make_drawer_scenario(sc);  // validates

    const json& rj = require(j, "rig");
    TeleopRig& rig = s.rig;
    rig.leader_scale = get_or(rj, "leader_scale", rig.leader_scale);
    rig.leader_inertia = as_vector(require(rj, "leader_inertia"), n, "rig.leader_inertia");
    rig.leader_damping = rj.contains("leader_damping") ? as_vector(rj.at("leader_damping"), n, "rig.leader_damping")
                                                       : Eigen::VectorXd::Zero(n);
    rig.hand = operator_from_json(require(rj, "hand"), n);
    rig.scheme = scheme_from_json(require(rj, "scheme"), n);
    rig.channel = channel_from_json(rj.contains("channel") ? rj.at("channel") : json::object());

    if (j.contains("demonstrator")) {
        const json& d = j.at("demonstrator");
        DemonstratorConfig& dc = s.demonstrator;
        dc.approach_ticks = get_int(d, "approach_ticks", dc.approach_ticks);
        dc.dwell_ticks = get_int(d, "dwell_ticks", dc.dwell_ticks);
        dc.pull_ticks = get_int(d, "pull_ticks", dc.pull_ticks);
        dc.pull_distance = get_or(d, "pull_distance", dc.pull_distance);
        dc.probe_ticks = get_int(d, "probe_ticks", dc.probe_ticks);
        dc.eps_force = get_or(d, "eps_force", dc.eps_force);
        dc.retry_cap = get_int(d, "retry_cap", dc.retry_cap);
        dc.side_offset = get_or(d, "side_offset", dc.side_offset);
        dc.side_ticks = get_int(d, "side_ticks", dc.side_ticks);
        if (d.contains("side_axis")) dc.side_axis = as_vec3(d.at("side_axis"), "side_axis").normalized();
        dc.settle_ticks = get_int(d, "settle_ticks", dc.settle_ticks);
        dc.max_ticks = get_int(d, "max_ticks", dc.max_ticks);
        if (dc.approach_ticks < 1 || dc.pull_ticks < 1 || dc.side_ticks < 1 || dc.probe_ticks < 1 ||
            dc.retry_cap < 1 || dc.max_ticks < 1)
            throw ConfigError("demonstrator tick counts must be positive");
    }
    if (j.contains("demos")) {
        s.n_demos = get_int(j.at("demos"), "count", s.n_demos);
        s.demo_seed_base = get_seed(j.at("demos"), "seed_base", s.demo_seed_base);
    }
    if (j.contains("policy")) s.benchmark.policy = policy_config_from_json(j.at("policy"));
    if (j.contains("evaluation")) {
        const json& e = j.at("evaluation");
        BenchmarkConfig& b = s.benchmark;
        b.n_validation = static_cast<std::size_t>(get_int(e, "n_validation", static_cast<int>(b.n_validation)));
        b.n_rollouts = get_int(e, "n_rollouts", b.n_rollouts);
        b.rollout_seed_base = get_seed(e, "rollout_seed_base", b.rollout_seed_base);
        b.max_ticks = get_int(e, "max_ticks", b.max_ticks);
        if (e.contains("train_seeds")) b.train_seeds = e.at("train_seeds").get<std::vector<std::uint64_t>>();
    }
    return s;
}

InstabilityParams instability_from_json(const json& j) {
    InstabilityParams p;
    p.qdot_max = get_or(j, "qdot_max", p.qdot_max);
    p.window = static_cast<std::size_t>(get_int(j, "window", static_cast<int>(p.window)));
    p.growth_ratio = get_or(j, "growth_ratio", p.growth_ratio);
    p.growth_windows = get_int(j, "growth_windows", p.growth_windows);
    p.envelope_floor = get_or(j, "envelope_floor", p.envelope_floor);
    p.relative_floor = get_or(j, "relative_floor", p.relative_floor);
    return p;
}

SweepSetup sweep_from_json(const json& j, const fs::path& base_dir) {
    SweepSetup s;
    const json& sj = require(j, "session");
    if (sj.is_string()) {
        fs::path p = sj.get<std::string>();
        if (p.is_relative()) p = base_dir / p;
        s.base = session_from_json(load_json_file(p), p.parent_path());
    } else {
        s.base = session_from_json(sj, base_dir);
    }
    const Eigen::VectorXd kf = as_vector(require(j, "k_f_grid"), -1, "k_f_grid");
    const Eigen::VectorXd dl = as_vector(require(j, "delays_s"), -1, "delays_s");
    s.kf_grid.assign(kf.data(), kf.data() + kf.size());
    s.delays.assign(dl.data(), dl.data() + dl.size());
    if (j.contains("instability")) s.instability = instability_from_json(j.at("instability"));
    return s;
}

}  // namespace teleop
