#pragma once

#include "teleop/session.hpp"

#include <optional>

namespace teleop {

double tracking_rmse(const SessionTrace& trace);

struct StiffnessEstimate {
    double leader_slope = 0.0;    // N m/rad felt on the leader
    double follower_slope = 0.0;  // N m/rad seen by the follower
    double ratio = 0.0;
    std::size_t begin = 0;  // contact segment [begin, end)
    std::size_t end = 0;
};

// Least-squares slopes of torque against joint displacement, both projected on the mean
// contact-torque direction, over the longest sustained contact segment.
StiffnessEstimate perceived_stiffness(const SessionTrace& trace, std::size_t min_segment = 10);

struct InstabilityParams {
    double qdot_max = 20.0;
    std::size_t window = 25;
    double growth_ratio = 1.05;
    int growth_windows = 5;
    double envelope_floor = 1e-6;
    // oscillation below this fraction of the window's torque level counts as a smooth trend
    double relative_floor = 0.01;
};

struct InstabilityReport {
    bool unstable = false;
    std::optional<double> onset;
};

InstabilityReport detect_instability(const SessionTrace& trace, const InstabilityParams& p = {});

struct SessionMetrics {
    double tracking_rmse = 0.0;
    std::optional<double> perceived_stiffness;
    std::optional<double> stiffness_ratio;
    bool unstable = false;
    std::optional<double> instability_onset;
};

SessionMetrics compute_metrics(const SessionTrace& trace, const InstabilityParams& p = {});

}  // namespace teleop
