#include "teleop/contact_sim.hpp"
#include "teleop/errors.hpp"
#include "teleop/session.hpp"

#include <doctest.h>

using namespace teleop;

namespace {

Pose at(const Eigen::Vector3d& p) {
    Pose pose;
    pose.position = p;
    return pose;
}

KinematicChain planar3() {
    KinematicChain c;
    c.name = "planar3";
    for (double a : {0.4, 0.35, 0.25}) {
        DHRow r;
        r.a = a;
        c.rows.push_back(r);
        c.limits.emplace_back(-2.9, 2.9);
    }
    return c;
}

ArmModel arm3(double damping) {
    return {planar3(), Eigen::Vector3d(0.6, 0.4, 0.2), Eigen::Vector3d::Constant(damping)};
}

}  // namespace

TEST_CASE("half-space: no contact outside") {
    HalfSpace h;
    h.normal = Eigen::Vector3d::UnitX();
    h.offset = 0.0;
    auto [w, c] = contact_wrench(h, at({0.1, 0, 0}), Eigen::Vector3d::Zero(), {}, 0);
    CHECK(w.is_zero());
    CHECK_FALSE(c.in_contact);
}

TEST_CASE("half-space: K * depth") {
    HalfSpace h;
    h.normal = Eigen::Vector3d::UnitX();
    h.offset = 0.0;
    h.stiffness = 1000.0;
    auto [w, c] = contact_wrench(h, at({-0.01, 0, 0}), Eigen::Vector3d::Zero(), {}, 0);
    CHECK(c.in_contact);
    // the EE pushes into the wall, against the normal
    CHECK(w.force.x() == doctest::Approx(-10.0));
    CHECK(w.force.tail<2>().norm() == 0.0);
    CHECK(w.moment.norm() == 0.0);
}

TEST_CASE("half-space is never adhesive") {
    HalfSpace h;
    h.normal = Eigen::Vector3d::UnitZ();
    h.stiffness = 500.0;
    h.damping = 50.0;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
        const Eigen::Vector3d p(u(rng), u(rng), 0.05 * u(rng));
        const Eigen::Vector3d v(u(rng), u(rng), 5 * u(rng));
        auto [w, c] = contact_wrench(h, at(p), v, {}, 0);
        // the force on the environment points into it, so the normal component is never positive
        CHECK(h.normal.dot(w.force) <= 0.0);
        if (!c.in_contact) CHECK(w.is_zero());
    }
}

TEST_CASE("drawer with zero grasp probability gives no resistance") {
    DrawerHandle d;
    d.grasp_success_prob = 0.0;
    ContactState c;
    for (int k = 0; k < 40; ++k) c = gripper_update(d, at(d.handle_home), c, 9);
    CHECK_FALSE(c.grasped);
    CHECK(c.grasp_attempts >= 1);
    for (int k = 0; k < 100; ++k) {
        const Eigen::Vector3d p = d.handle_home + 0.003 * k * d.axis;
        auto [w, next] = contact_wrench(d, at(p), 0.15 * d.axis, c, 9);
        CHECK(w.is_zero());
        CHECK(next.drawer_extension == 0.0);
        c = gripper_update(d, at(p), next, 9);
    }
}

TEST_CASE("drawer: static then dynamic friction, extension bounded") {
    DrawerHandle d;
    d.grasp_success_prob = 1.0;
    ContactState c;
    for (int k = 0; k < d.dwell_ticks; ++k) c = gripper_update(d, at(d.handle_home), c, 1);
    REQUIRE(c.grasped);

    // below the static threshold the drawer sticks
    const double stick = 0.5 * d.static_friction / d.grip_stiffness;
    auto [w0, c0] = contact_wrench(d, at(d.handle_home + stick * d.axis), Eigen::Vector3d::Zero(), c, 1);
    CHECK(c0.drawer_extension == 0.0);
    CHECK(w0.force.dot(d.axis) == doctest::Approx(0.5 * d.static_friction));

    ContactState s = c;
    double prev = 0.0;
    for (int k = 1; k <= 200; ++k) {
        auto [w, next] = contact_wrench(d, at(d.handle_home + 0.002 * k * d.axis), Eigen::Vector3d::Zero(), s, 1);
        CHECK(next.drawer_extension >= prev);
        CHECK(next.drawer_extension <= d.travel_max);
        if (next.sliding && next.drawer_extension < d.travel_max)
            CHECK(w.force.dot(d.axis) == doctest::Approx(d.dynamic_friction));
        prev = next.drawer_extension;
        s = next;
    }
    CHECK(prev == d.travel_max);

    // open command releases
    const ContactState released = gripper_update(d, at(d.handle_home), s, 1, false);
    CHECK_FALSE(released.grasped);
}

TEST_CASE("grasp draw depends only on seed and attempt number") {
    CHECK(uniform_draw(5, 1) == uniform_draw(5, 1));
    CHECK(uniform_draw(5, 1) != uniform_draw(5, 2));
    CHECK(uniform_draw(5, 1) != uniform_draw(6, 1));
    double mean = 0.0;
    for (std::uint64_t s = 0; s < 10000; ++s) {
        const double u = uniform_draw(s, 1);
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        mean += u / 10000.0;
    }
    CHECK(mean == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("step: equilibrium and Euler arithmetic") {
    KinematicChain one;
    one.rows.push_back(DHRow{});
    one.limits.emplace_back(-10.0, 10.0);
    const ArmModel m{one, Eigen::VectorXd::Ones(1), Eigen::VectorXd::Zero(1)};

    const ArmState s0 = ArmState::at_rest(Eigen::VectorXd::Constant(1, 0.3));
    const ArmState s1 = step(m, s0, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1), 0.02);
    CHECK(s1.q[0] == s0.q[0]);
    CHECK(s1.qdot[0] == 0.0);
    CHECK(s1.t == doctest::Approx(0.02));

    const ArmState r = step(m, ArmState::at_rest(Eigen::VectorXd::Zero(1)), Eigen::VectorXd::Ones(1),
                            Eigen::VectorXd::Zero(1), 0.02);
    CHECK(r.qdot[0] == doctest::Approx(0.02));
    CHECK(r.q[0] == doctest::Approx(0.0004));
}

TEST_CASE("step: limits stop the joint") {
    const ArmModel m = arm3(0.0);
    ArmState s = ArmState::at_rest(Eigen::Vector3d(2.85, 0, 0));
    for (int k = 0; k < 20; ++k) s = step(m, s, Eigen::Vector3d(5, 0, 0), Eigen::Vector3d::Zero(), 0.02);
    CHECK(s.q[0] == 2.9);
    CHECK(s.qdot[0] == 0.0);
}

TEST_CASE("step: errors") {
    const ArmModel m = arm3(0.1);
    const ArmState s = ArmState::at_rest(Eigen::Vector3d::Zero());
    CHECK_THROWS_AS(step(m, s, Eigen::Vector2d::Zero(), Eigen::Vector3d::Zero(), 0.02), DimensionError);
    try {
        step(m, s, Eigen::Vector3d(0, NAN, 0), Eigen::Vector3d::Zero(), 0.02);
        FAIL("expected NonFiniteError");
    } catch (const NonFiniteError& e) {
        CHECK(e.index() == 1);
    }
    CHECK_THROWS_AS(step(m, s, Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero(), 0.0), ConfigError);
}

TEST_CASE("damped free arm loses kinetic energy") {
    const ArmModel m = arm3(0.5);
    ArmState s{Eigen::Vector3d(0.1, -0.5, 0.3), Eigen::Vector3d(2.0, -1.0, 3.0), 0.0};
    double prev = kinetic_energy(m, s);
    for (int k = 0; k < 2000; ++k) {
        s = step(m, s, Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero(), 0.005);
        const double e = kinetic_energy(m, s);
        CHECK(e <= prev);
        prev = e;
    }
}

TEST_CASE("passivity: damped arm bouncing on a wall") {
    const ArmModel m = arm3(0.5);
    HalfSpace h;
    h.normal = -Eigen::Vector3d::UnitX();
    h.offset = -0.75;
    h.stiffness = 1000.0;
    h.damping = 5.0;
    // start short of the wall, swinging towards it
    ArmState s{Eigen::Vector3d(0.5, 0.5, 0.5), Eigen::Vector3d(-1.5, 0.0, 0.0), 0.0};
    REQUIRE(forward_kinematics(m.chain, s.q).position.x() < 0.75);
    const double h_dt = 0.02 / 8;
    ContactState c;
    auto energy = [&](const ArmState& st) {
        return kinetic_energy(m, st) + contact_potential(h, forward_kinematics(m.chain, st.q), c);
    };
    double prev = energy(s);
    bool touched = false;
    for (int k = 0; k < 4000; ++k) {
        const auto J = geometric_jacobian(m.chain, s.q);
        auto [w, next] = contact_wrench(h, forward_kinematics(m.chain, s.q), J.linear * s.qdot, c, 0);
        c = next;
        touched = touched || c.in_contact;
        s = step(m, s, Eigen::Vector3d::Zero(), -external_joint_torque(J, w), h_dt);
        const double e = energy(s);
        CHECK(e <= prev + 1e-6);
        prev = e;
    }
    CHECK(touched);
}

TEST_CASE("follower plant is deterministic") {
    DrawerHandle d;
    auto run = [&] {
        FollowerPlant p(arm3(0.5), d, 0.02, 4, 42, Eigen::Vector3d(0.3, -1.2, -0.8));
        std::vector<Eigen::VectorXd> qs;
        for (int k = 0; k < 100; ++k) {
            p.sense();
            p.track(ImpedanceGains::uniform(3, 100, 10), Eigen::Vector3d(0.1 * std::sin(0.1 * k), -1.0, -0.9));
            qs.push_back(p.state().q);
        }
        return qs;
    };
    const auto a = run(), b = run();
    for (std::size_t k = 0; k < a.size(); ++k) CHECK((a[k].array() == b[k].array()).all());
}

TEST_CASE("drawer scenario") {
    DrawerScenarioConfig cfg;
    cfg.arm = arm3(0.5);
    cfg.start_q = Eigen::Vector3d(0.3, -1.2, -0.8);
    CHECK(cfg.success_threshold == 0.15);
    CHECK(cfg.randomization == 0.03);

    cfg.seed = 7;
    const Scenario a = make_drawer_scenario(cfg), b = make_drawer_scenario(cfg);
    CHECK((a.drawer.handle_home.array() == b.drawer.handle_home.array()).all());
    CHECK(a.success_threshold == 0.15);

    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        cfg.seed = seed;
        const Scenario s = make_drawer_scenario(cfg);
        CHECK((s.drawer.handle_home - cfg.drawer.handle_home).norm() <= 0.03 + 1e-12);
    }

    ContactState c;
    c.drawer_extension = 0.16;
    CHECK(a.success(c));
    c.drawer_extension = 0.15;
    CHECK_FALSE(a.success(c));

    cfg.success_threshold = 0.5;
    CHECK_THROWS_AS(make_drawer_scenario(cfg), ConfigError);
}

TEST_CASE("environment validation") {
    HalfSpace h;
    h.stiffness = 0.0;
    CHECK_THROWS_AS(validate_env(h), ConfigError);
    DrawerHandle d;
    d.grasp_success_prob = 1.5;
    CHECK_THROWS_AS(validate_env(d), ConfigError);
    d = DrawerHandle{};
    d.travel_max = 0.0;
    CHECK_THROWS_AS(validate_env(d), ConfigError);
    CHECK_NOTHROW(validate_env(FreeSpace{}));
}
