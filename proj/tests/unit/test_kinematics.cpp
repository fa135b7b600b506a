#include "support/oracles.hpp"
#include "teleop/errors.hpp"
#include "teleop/kinematics.hpp"

#include <doctest.h>

using namespace teleop;

namespace {

KinematicChain planar(std::initializer_list<double> lengths) {
    KinematicChain c;
    c.name = "planar";
    for (double a : lengths) {
        DHRow r;
        r.a = a;
        c.rows.push_back(r);
        c.limits.emplace_back(-M_PI, M_PI);
    }
    return c;
}

Eigen::VectorXd vec(std::initializer_list<double> xs) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v[i++] = x;
    return v;
}

}  // namespace

TEST_CASE("forward kinematics of simple planar chains") {
    auto p = forward_kinematics(planar({1.0}), vec({0.0}));
    CHECK((p.position - Eigen::Vector3d(1, 0, 0)).norm() < 1e-12);
    CHECK(p.orientation.angularDistance(Eigen::Quaterniond::Identity()) < 1e-12);

    p = forward_kinematics(planar({1.0, 1.0}), vec({M_PI / 2, 0.0}));
    CHECK((p.position - Eigen::Vector3d(0, 2, 0)).norm() < 1e-12);
}

TEST_CASE("forward kinematics matches the transform-composition oracle") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const auto c = oracle::random_chain(rng, 7);
        const auto q = oracle::random_q(rng, c);
        const auto p = forward_kinematics(c, q);
        const auto T = oracle::fk(c, q);
        CHECK((p.position - oracle::position(T)).norm() <= 1e-9);
        CHECK(std::abs(p.orientation.norm() - 1.0) <= 1e-9);
        CHECK((p.orientation.toRotationMatrix() - oracle::rotation(T)).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("base transform is applied") {
    auto c = planar({1.0});
    c.base.translation() = Eigen::Vector3d(0.1, 0.2, 0.3);
    const auto p = forward_kinematics(c, vec({0.0}));
    CHECK((p.position - Eigen::Vector3d(1.1, 0.2, 0.3)).norm() < 1e-12);
}

TEST_CASE("forward kinematics rejects bad input") {
    const auto c = planar({1.0, 1.0});
    CHECK_THROWS_AS(forward_kinematics(c, vec({0.0})), DimensionError);
    CHECK_THROWS_AS(forward_kinematics(c, vec({0.0, NAN})), NonFiniteError);
}

TEST_CASE("geometric jacobian, hand-computed columns") {
    auto J = geometric_jacobian(planar({1.0}), vec({0.0}));
    CHECK(J.cols() == 1);
    CHECK((J.linear.col(0) - Eigen::Vector3d(0, 1, 0)).norm() < 1e-12);
    CHECK((J.angular.col(0) - Eigen::Vector3d(0, 0, 1)).norm() < 1e-12);

    KinematicChain slide;
    DHRow r;
    r.kind = JointKind::prismatic;
    slide.rows.push_back(r);
    slide.limits.emplace_back(-1.0, 1.0);
    J = geometric_jacobian(slide, vec({0.3}));
    CHECK((J.linear.col(0) - Eigen::Vector3d(0, 0, 1)).norm() < 1e-12);
    CHECK(J.angular.col(0).norm() == 0.0);
}

TEST_CASE("geometric jacobian matches central finite differences") {
    std::mt19937_64 rng(12);
    std::uniform_int_distribution<int> dof(1, 7);
    for (int trial = 0; trial < 100; ++trial) {
        const auto c = oracle::random_chain(rng, dof(rng));
        const auto q = oracle::random_q(rng, c);
        const Eigen::MatrixXd Jfd = oracle::fd_jacobian(c, q);
        const Eigen::MatrixXd J = geometric_jacobian(c, q).stacked();
        CHECK((J - Jfd).cwiseAbs().maxCoeff() <= 1e-5);
    }
}

TEST_CASE("scale_chain") {
    const auto c = planar({1.0, 1.0});
    const auto same = scale_chain(c, 1.0);
    for (int i = 0; i < 2; ++i) CHECK(same.rows[i].a == c.rows[i].a);

    const auto half = scale_chain(c, 0.5);
    CHECK(half.rows[0].a == 0.5);
    CHECK(half.rows[1].a == 0.5);
    CHECK(chain_scale_between(c, half) == doctest::Approx(0.5));
    CHECK(chain_scale_between(c, planar({0.5, 0.7})) < 0);

    CHECK_THROWS_AS(scale_chain(c, 0.0), ConfigError);
    CHECK_THROWS_AS(scale_chain(c, -1.0), ConfigError);
}

TEST_CASE("scaled chain: linear jacobian scales, angular unchanged") {
    std::mt19937_64 rng(13);
    for (double s : {0.25, 0.5, 2.0}) {
        for (int trial = 0; trial < 50; ++trial) {
            const auto c = oracle::random_chain(rng, 6, false);
            const auto q = oracle::random_q(rng, c);
            const auto J = geometric_jacobian(c, q);
            const auto Js = geometric_jacobian(scale_chain(c, s), q);
            CHECK((Js.linear - s * J.linear).cwiseAbs().maxCoeff() <= 1e-9);
            CHECK((Js.angular - J.angular).cwiseAbs().maxCoeff() <= 1e-9);
        }
    }
}

TEST_CASE("external joint torque") {
    const auto c = planar({1.0});
    const auto J = geometric_jacobian(c, vec({0.0}));
    CHECK(external_joint_torque(J, Wrench{}).norm() == 0.0);

    Wrench w;
    w.force = Eigen::Vector3d(0, 2, 0);
    CHECK(external_joint_torque(J, w)[0] == doctest::Approx(2.0));
}

TEST_CASE("external joint torque matches the virtual-work oracle") {
    std::mt19937_64 rng(14);
    std::uniform_int_distribution<int> dof(1, 7);
    for (int trial = 0; trial < 100; ++trial) {
        const auto c = oracle::random_chain(rng, dof(rng));
        const auto q = oracle::random_q(rng, c);
        const auto w = oracle::random_wrench(rng);
        const auto tau = external_joint_torque(geometric_jacobian(c, q), w);
        CHECK((tau - oracle::virtual_work_torque(c, q, w)).cwiseAbs().maxCoeff() <= 1e-5);
    }
}

TEST_CASE("external joint torque is linear in the wrench") {
    std::mt19937_64 rng(15);
    for (int trial = 0; trial < 50; ++trial) {
        const auto c = oracle::random_chain(rng, 7);
        const auto J = geometric_jacobian(c, oracle::random_q(rng, c));
        const auto w1 = oracle::random_wrench(rng), w2 = oracle::random_wrench(rng);
        Wrench sum;
        sum.force = w1.force + w2.force;
        sum.moment = w1.moment + w2.moment;
        const Eigen::VectorXd lhs = external_joint_torque(J, sum);
        const Eigen::VectorXd rhs = external_joint_torque(J, w1) + external_joint_torque(J, w2);
        CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("chain json round trip and validation") {
    std::mt19937_64 rng(16);
    const auto c = oracle::random_chain(rng, 5);
    const auto back = chain_from_json(chain_to_json(c));
    REQUIRE(back.dof() == c.dof());
    for (int i = 0; i < c.dof(); ++i) {
        CHECK(back.rows[i].a == c.rows[i].a);
        CHECK(back.rows[i].alpha == c.rows[i].alpha);
        CHECK(back.rows[i].d == c.rows[i].d);
        CHECK(back.rows[i].kind == c.rows[i].kind);
        CHECK(back.limits[i] == c.limits[i]);
    }

    auto j = chain_to_json(c);
    j["rows"][0]["kind"] = "spherical";
    CHECK_THROWS_AS(chain_from_json(j), ConfigError);
    j = chain_to_json(c);
    j["limits"].erase(0);
    CHECK_THROWS_AS(chain_from_json(j), ConfigError);
    CHECK_THROWS_AS(load_chain("/nonexistent/chain.json"), ConfigError);
}

TEST_CASE("shipped chain files load") {
    for (const char* f : {"planar3.json", "generic7.json", "planar2_short.json"}) {
        const auto c = load_chain(std::string(TELEOP_CONFIG_DIR) + "/chains/" + f);
        CHECK(c.dof() >= 2);
    }
}
