#include "support/configs.hpp"
#include "support/tempdir.hpp"
#include "teleop/errors.hpp"

#include <doctest.h>

#include <fstream>

using namespace teleop;
using nlohmann::json;

TEST_CASE("overrides") {
    json j = {{"a", {{"b", 1}}}, {"s", "x"}};
    apply_override(j, "a.b=2.5");
    CHECK(j["a"]["b"] == 2.5);
    apply_override(j, "a.c.d=[1,2]");
    CHECK(j["a"]["c"]["d"] == json::array({1, 2}));
    apply_override(j, "s=hello");
    CHECK(j["s"] == "hello");
    apply_override(j, "s=\"3\"");
    CHECK(j["s"] == "3");
    apply_override(j, "flag=true");
    CHECK(j["flag"] == true);
    apply_override(j, "empty=");
    CHECK(j["empty"] == "");

    CHECK_THROWS_AS(apply_override(j, "novalue"), ConfigError);
    CHECK_THROWS_AS(apply_override(j, "=1"), ConfigError);
    CHECK_THROWS_AS(apply_override(j, "a..b=1"), ConfigError);
    CHECK_THROWS_AS(apply_override(j, "s.x=1"), ConfigError);
}

TEST_CASE("every shipped session config loads") {
    for (const char* name : {"fp_wall.json", "fp_freemotion.json", "pp_wall.json", "fourc_free.json", "fourc_wall.json"}) {
        CAPTURE(name);
        const SessionConfig c = testcfg::session(name);
        CHECK(c.leader.dof() == c.follower.dof());
        CHECK(c.ticks() > 0);
    }
    CHECK(scheme_name(testcfg::session("fp_wall.json").scheme) == "FP");
    CHECK(scheme_name(testcfg::session("pp_wall.json").scheme) == "PP");
    CHECK(scheme_name(testcfg::session("fourc_wall.json").scheme) == "4C");

    const auto sw = sweep_from_json(testcfg::load("sweep.json"), testcfg::config_dir());
    CHECK(sw.kf_grid.size() == 10);
    CHECK(sw.delays == std::vector<double>{0.0, 0.05, 0.1});
    CHECK(sw.instability.qdot_max == 20.0);

    const auto d = testcfg::drawer();
    CHECK(d.scenario.arm.dof() == 3);
    CHECK(load_chain((testcfg::config_dir() / "chains/generic7.json").string()).dof() == 7);
    CHECK(d.n_demos == 25);
}

TEST_CASE("leader chain is the scaled follower chain unless given") {
    const SessionConfig c = testcfg::session("fp_wall.json");
    const KinematicChain want = scale_chain(c.follower.chain, 0.5);
    for (int i = 0; i < c.follower.dof(); ++i) {
        CHECK(c.leader.chain.rows[i].a == doctest::Approx(want.rows[i].a));
        CHECK(c.leader.chain.rows[i].d == doctest::Approx(want.rows[i].d));
    }
    const SessionConfig f = testcfg::session("fourc_wall.json");
    CHECK(f.leader.chain.rows[0].a == f.follower.chain.rows[0].a);
}

TEST_CASE("scheme json round trip") {
    for (const char* name : {"fp_wall.json", "pp_wall.json", "fourc_wall.json"}) {
        const SessionConfig c = testcfg::session(name);
        const ControlScheme back = scheme_from_json(scheme_to_json(c.scheme), c.follower.dof());
        CHECK(scheme_to_json(back) == scheme_to_json(c.scheme));
    }
}

TEST_CASE("scalar gains broadcast, vectors must match dof") {
    CHECK(gains_from_json({{"kp", 3.0}, {"kd", 1.0}}, 3).kp == Eigen::Vector3d(3, 3, 3));
    CHECK_THROWS(gains_from_json({{"kp", {1.0, 2.0}}, {"kd", 1.0}}, 3));
    CHECK_THROWS(gains_from_json({{"kp", -1.0}, {"kd", 1.0}}, 3));
    CHECK_THROWS(gains_from_json({{"kd", 1.0}}, 3));
}

TEST_CASE("config errors") {
    CHECK_THROWS_AS(testcfg::session("fp_wall.json", {"scheme.scheme=XY"}), ConfigError);
    CHECK_THROWS_AS(testcfg::session("fp_wall.json", {"env.type=sphere"}), ConfigError);
    CHECK_THROWS_AS(testcfg::session("fp_wall.json", {"operator.target.kind=spiral"}), ConfigError);
    CHECK_THROWS_AS(testcfg::session("fp_wall.json", {"operator.target.t1=0.5"}), ConfigError);
    CHECK_THROWS_AS(testcfg::session("fp_wall.json", {"follower.chain=chains/missing.json"}), ConfigError);
    CHECK_THROWS_AS(testcfg::session("fp_wall.json", {"seed=-1"}), ConfigError);
    CHECK_THROWS_AS(testcfg::session("fp_wall.json", {"substeps=1.5"}), ConfigError);
    CHECK_THROWS(testcfg::session("fp_wall.json", {"initial_q=[1,2,3]"}));
    CHECK_THROWS(testcfg::session("fp_wall.json", {"scheme.k_f=-1"}));
    CHECK_THROWS(testcfg::session("fp_wall.json", {"channel_up={\"drop_prob\":1.5}"}));
    CHECK_THROWS(testcfg::drawer({"demonstrator.retry_cap=0"}));
    CHECK_THROWS_AS(load_json_file(testcfg::config_dir() / "nope.json"), ConfigError);

    testfs::TempDir dir("cfg");
    {
        std::ofstream(dir / "bad.json") << "{ not json";
    }
    try {
        load_json_file(dir / "bad.json");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("bad.json") != std::string::npos);
    }
}

TEST_CASE("waypoint trajectory") {
    const json j = {{"kind", "waypoints"}, {"times", {0.0, 1.0, 3.0}}, {"points", {{0.0}, {1.0}, {-1.0}}}};
    const auto f = trajectory_from_json(j, 1);
    CHECK(f(-1.0)(0) == 0.0);
    CHECK(f(0.5)(0) == doctest::Approx(0.5));
    CHECK(f(2.0)(0) == doctest::Approx(0.0));
    CHECK(f(9.0)(0) == -1.0);
    json bad = j;
    bad["times"] = {0.0, 2.0, 1.0};
    CHECK_THROWS_AS(trajectory_from_json(bad, 1), ConfigError);
    bad = j;
    bad["times"] = {0.0, 1.0};
    CHECK_THROWS_AS(trajectory_from_json(bad, 1), ConfigError);
}

TEST_CASE("sweep config accepts an inline session") {
    json j = testcfg::load("sweep.json");
    j["session"] = testcfg::load("fp_wall.json");
    const auto sw = sweep_from_json(j, testcfg::config_dir());
    CHECK(sw.base.follower.dof() == 2);
}
