#pragma once

#include "teleop/metrics.hpp"
#include "teleop/session.hpp"

#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace teleop {

// serial is the reference path; parallel fans independent work items out with OpenMP
enum class Exec { serial, parallel };

struct SweepRow {
    double k_f = 0.0;
    double delay_s = 0.0;
    bool unstable = false;
    std::optional<double> onset_s;
    double rmse = 0.0;
    std::optional<double> stiffness_ratio;
    std::string error;
};

// Copy of base with an FP scheme at k_f and the same one-way latency on both channels.
SessionConfig sweep_cell_config(const SessionConfig& base, double k_f, double delay_s);

SweepRow run_sweep_cell(const SessionConfig& base, double k_f, double delay_s,
                        const InstabilityParams& p = {});

// Rows ordered delay-major, then k_f in grid order.
std::vector<SweepRow> sweep_kf(const SessionConfig& base, const std::vector<double>& kf_grid,
                               const std::vector<double>& delays, Exec exec = Exec::parallel,
                               const InstabilityParams& p = {});

// Smallest k_f above which every cell of that delay is unstable; empty if the top cell is stable.
std::optional<double> stability_boundary(const std::vector<SweepRow>& rows, double delay_s);
bool unstable_set_upward_closed(const std::vector<SweepRow>& rows, double delay_s);

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

}  // namespace teleop
