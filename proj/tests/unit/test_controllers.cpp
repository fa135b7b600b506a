#include "support/configs.hpp"
#include "support/traces.hpp"
#include "teleop/controllers.hpp"
#include "teleop/errors.hpp"
#include "teleop/session.hpp"

#include <doctest.h>

using namespace teleop;

namespace {

Eigen::VectorXd v1(double x) { return Eigen::VectorXd::Constant(1, x); }

}  // namespace

TEST_CASE("impedance torque") {
    const auto g = ImpedanceGains::uniform(1, 10.0, 1.0);
    CHECK(impedance_torque(g, v1(0.3), v1(0.3), v1(0.0))[0] == 0.0);
    CHECK(impedance_torque(g, v1(0.1), v1(0.0), v1(0.2))[0] == doctest::Approx(0.8));
    CHECK_THROWS_AS(impedance_torque(g, Eigen::Vector2d::Zero(), v1(0), v1(0)), DimensionError);
    CHECK_THROWS_AS(ImpedanceGains::uniform(2, 0.0, 1.0).validate(2), ConfigError);
    CHECK_THROWS_AS(ImpedanceGains::uniform(2, 1.0, -1.0).validate(2), ConfigError);
}

TEST_CASE("impedance closed loop settles on a one-joint arm") {
    KinematicChain one;
    one.rows.push_back(DHRow{});
    one.limits.emplace_back(-3.0, 3.0);
    const ArmModel m{one, v1(0.1), v1(0.05)};
    const auto g = ImpedanceGains::uniform(1, 100.0, 5.0);
    ArmState s = ArmState::at_rest(v1(0.0));
    const double target = 0.5;
    int settled_at = -1;
    for (int k = 0; k < 2000; ++k) {
        s = step(m, s, impedance_torque(g, v1(target), s.q, s.qdot), v1(0.0), 0.005);
        const bool inside = std::abs(s.q[0] - target) <= 0.02 * target;
        if (inside && settled_at < 0) settled_at = k;
        if (!inside) settled_at = -1;
    }
    CHECK(settled_at >= 0);
    CHECK(settled_at < 1000);
}

TEST_CASE("force-position leader torque") {
    CHECK(fp_leader_torque(0.3, Eigen::Vector2d::Zero()).norm() == 0.0);
    const Eigen::Vector2d t = fp_leader_torque(0.5, Eigen::Vector2d(1, -2));
    CHECK(t[0] == -0.5);
    CHECK(t[1] == 1.0);
    CHECK_THROWS_AS(fp_leader_torque(0.0, Eigen::Vector2d(1, 1)), ConfigError);
    CHECK_THROWS_AS(fp_leader_torque(-1.0, Eigen::Vector2d(1, 1)), ConfigError);

    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-5, 5), k(0.01, 3);
    for (int i = 0; i < 200; ++i) {
        const Eigen::Vector3d tau(u(rng), u(rng), u(rng));
        const double kf = k(rng);
        CHECK((fp_leader_torque(2 * kf, tau) - 2 * fp_leader_torque(kf, tau)).norm() == 0.0);
    }
}

TEST_CASE("force-position feedback opposes the push into a wall") {
    const SessionTrace tr = run_session(testcfg::session("fp_wall.json"));
    int contact = 0;
    for (const auto& e : tr.entries) {
        if (!e.in_contact) {
            CHECK(e.tau_l_ref.norm() == 0.0);
            continue;
        }
        ++contact;
        // the wall pushes the leader back against the operator's hand
        CHECK(e.tau_l_ref.dot(e.tau_op) < 0.0);
    }
    CHECK(contact > 100);
}

TEST_CASE("position-position leader torque") {
    const auto g = ImpedanceGains::uniform(2, 20.0, 1.0);
    const Eigen::Vector2d q(0.2, -0.4);
    CHECK(pp_leader_torque(g, q, q, Eigen::Vector2d::Zero()).norm() == 0.0);
    CHECK(pp_leader_torque(g, Eigen::Vector2d(0.1, 0), Eigen::Vector2d::Zero(), Eigen::Vector2d(0, 1))
              .isApprox(Eigen::Vector2d(2.0, -1.0)));
}

TEST_CASE("position-position: feedback emerges from tracking error against a wall") {
    const auto cfg = testcfg::session("pp_wall.json");
    const auto& pp = std::get<PPScheme>(cfg.scheme);
    const SessionTrace tr = run_session(cfg);
    const Eigen::VectorXd felt = testtrace::tail_mean(tr, 50, [](const TraceEntry& e) { return e.tau_l_ref; });
    const Eigen::VectorXd err = testtrace::tail_mean(tr, 50, [](const TraceEntry& e) { return Eigen::VectorXd(e.q_f - e.q_l); });
    const Eigen::VectorXd expect = pp.leader_gains.kp.cwiseProduct(err);
    REQUIRE(expect.norm() > 1e-3);
    CHECK((felt - expect).norm() <= 0.05 * expect.norm());

    // any nonzero tracking error is felt
    for (const auto& e : tr.entries)
        if ((e.q_f - e.q_l).norm() > 1e-9 && e.qdot_l.norm() == 0.0) CHECK(e.tau_l_ref.norm() > 0.0);
}

TEST_CASE("position-position: steady-state resistance grows with commanded depth") {
    const auto base = testcfg::session("pp_wall.json");
    const auto& wall = std::get<HalfSpace>(base.env);
    double prev_felt = 0.0, prev_depth = 0.0;
    // joint 1 closes in on the wall while the elbow stays bent, away from the straight-arm singularity
    for (double a : {0.32, 0.29, 0.26, 0.23, 0.20}) {
        const std::string q = "[" + std::to_string(a) + ",0.6]";
        const auto cfg = testcfg::session("pp_wall.json", {"operator.target.to=" + q});
        const double depth =
            wall.offset - wall.normal.dot(forward_kinematics(cfg.follower.chain, Eigen::Vector2d(a, 0.6)).position);
        REQUIRE(depth > prev_depth);
        const SessionTrace tr = run_session(cfg);
        const double felt = testtrace::tail_mean(tr, 50, [](const TraceEntry& e) { return e.tau_l_ref; }).norm();
        CHECK(felt > prev_felt);
        prev_felt = felt;
        prev_depth = depth;
    }
}

TEST_CASE("four-channel law") {
    FourCScheme s{ImpedanceGains::uniform(2, 100.0, 10.0), 1.0};
    const ArmState rest = ArmState::at_rest(Eigen::Vector2d(0.1, 0.2));
    const auto z = Eigen::Vector2d::Zero();
    const auto t = four_channel_torques(rest, rest, z, z, s);
    CHECK(t.leader.norm() == 0.0);
    CHECK(t.follower.norm() == 0.0);

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int i = 0; i < 100; ++i) {
        const ArmState a{Eigen::Vector2d(u(rng), u(rng)), Eigen::Vector2d(u(rng), u(rng)), 0.0};
        const ArmState b{Eigen::Vector2d(u(rng), u(rng)), Eigen::Vector2d(u(rng), u(rng)), 0.0};
        const Eigen::Vector2d ext(u(rng), u(rng));
        const auto ab = four_channel_torques(a, b, ext, z, s);
        const auto ba = four_channel_torques(b, a, z, z, s);
        // swapped roles give mirrored coupling
        CHECK((ab.leader + s.force_gain * ext - ba.follower).norm() < 1e-12);
        CHECK((ab.follower + ab.leader + s.force_gain * ext).norm() < 1e-12);
    }
}

TEST_CASE("four-channel needs identical chains") {
    const auto cfg = testcfg::session("fourc_free.json");
    CHECK_NOTHROW(check_four_channel_chains(cfg.leader.chain, cfg.follower.chain));
    CHECK_THROWS_AS(check_four_channel_chains(scale_chain(cfg.follower.chain, 0.5), cfg.follower.chain), ConfigError);
    auto j = testcfg::load("fourc_free.json");
    j.erase("leader");
    j["leader"] = {{"scale", 0.5}, {"inertia", 0.1}, {"damping", 0.5}};
    CHECK_THROWS_AS(session_from_json(j, testcfg::config_dir()), ConfigError);
}

TEST_CASE("four-channel: at rest without input") {
    auto cfg = testcfg::session("fourc_free.json", {"operator.target={\"kind\":\"hold\",\"q\":[0.3,-1.2,-0.8]}"});
    const SessionTrace tr = run_session(cfg);
    for (const auto& e : tr.entries) {
        CHECK(e.q_l == cfg.initial_q);
        CHECK(e.q_f == cfg.initial_q);
    }
}

TEST_CASE("four-channel: identical arms move together in free motion") {
    const SessionTrace tr = run_session(testcfg::session("fourc_free.json"));
    double worst = 0.0, motion = 0.0;
    for (const auto& e : tr.entries) {
        worst = std::max(worst, (e.q_l - e.q_f).cwiseAbs().maxCoeff());
        motion = std::max(motion, (e.q_l - tr.entries.front().q_l).cwiseAbs().maxCoeff());
    }
    CHECK(motion > 0.1);
    CHECK(worst <= 1e-6);
}

TEST_CASE("four-channel: leader feels the follower's contact torque") {
    const SessionTrace tr = run_session(testcfg::session("fourc_wall.json"));
    REQUIRE(tr.entries.back().in_contact);
    const Eigen::VectorXd felt = testtrace::tail_mean(tr, 50, [](const TraceEntry& e) { return e.tau_l_ref; });
    const Eigen::VectorXd ext = testtrace::tail_mean(tr, 50, [](const TraceEntry& e) { return e.tau_ext; });
    REQUIRE(ext.norm() > 0.1);
    CHECK((felt + ext).norm() <= 0.02 * ext.norm());
}

TEST_CASE("operator hand") {
    OperatorModel m{v1(5.0), v1(0.0), 20.0, [](double) { return v1(0.1); }};
    CHECK(operator_torque(m, 0.0, v1(0.1), v1(0.0))[0] == 0.0);
    CHECK(operator_torque(m, 0.0, v1(0.0), v1(0.0))[0] == doctest::Approx(0.5));

    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(-100, 100);
    OperatorModel stiff{Eigen::Vector3d::Constant(500.0), Eigen::Vector3d::Constant(50.0), 7.5,
                        [](double t) { return Eigen::Vector3d::Constant(std::sin(t)); }};
    for (int i = 0; i < 500; ++i) {
        const auto tau = operator_torque(stiff, std::abs(u(rng)), Eigen::Vector3d(u(rng), u(rng), u(rng)),
                                         Eigen::Vector3d(u(rng), u(rng), u(rng)));
        CHECK(tau.cwiseAbs().maxCoeff() <= 7.5);
    }
    OperatorModel bad = m;
    bad.hand_kp = v1(0.0);
    CHECK_THROWS_AS(bad.validate(1), ConfigError);
}

TEST_CASE("scheme validation") {
    CHECK_THROWS_AS(validate_scheme(FPScheme{0.0, ImpedanceGains::uniform(2, 1, 1)}, 2), ConfigError);
    CHECK_THROWS_AS(validate_scheme(FPScheme{0.3, ImpedanceGains::uniform(3, 1, 1)}, 2), DimensionError);
    CHECK_NOTHROW(validate_scheme(FPScheme{0.3, ImpedanceGains::uniform(2, 1, 1)}, 2));
    CHECK(scheme_name(PPScheme{}) == "PP");
    CHECK(scheme_name(FPScheme{}) == "FP");
    CHECK(scheme_name(FourCScheme{}) == "4C");
}
