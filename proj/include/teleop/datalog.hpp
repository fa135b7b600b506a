#pragma once

#include "teleop/controllers.hpp"
#include "teleop/session.hpp"

#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace teleop {

inline constexpr const char* kSchemaVersion = "1";

struct DemoMeta {
    std::string task = "teleop";
    int dof = 0;
    double rate_hz = 50.0;
    std::string scheme = "FP";
    std::optional<double> k_f;
    std::uint64_t seed = 0;
    bool success = false;
    nlohmann::json extra = nlohmann::json::object();

    bool operator==(const DemoMeta&) const = default;
};

struct DemoStep {
    double t = 0.0;
    Eigen::VectorXd q_leader, q_follower, qdot_follower, tau_ext, action;

    bool operator==(const DemoStep& o) const;
};

struct DemonstrationRecord {
    DemoMeta meta;
    std::vector<DemoStep> steps;

    bool operator==(const DemonstrationRecord&) const = default;
    void validate() const;
};

struct Dataset {
    std::vector<DemonstrationRecord> records;
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;

    void validate() const;
};

inline double tick_time(long k, double rate_hz) { return static_cast<double>(k) * (1.0 / rate_hz); }

DemonstrationRecord record_demonstration(const SessionTrace& trace, DemoMeta meta);

std::string serialize_record(const DemonstrationRecord& r);
DemonstrationRecord parse_record(std::istream& in);

void write_record(const DemonstrationRecord& r, const std::filesystem::path& path);
DemonstrationRecord read_record(const std::filesystem::path& path);

// Writes text to path through a temporary file and a rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& text);

// Shuffled split with n_validation held out; deterministic in seed.
void split_dataset(Dataset& ds, std::size_t n_validation, std::uint64_t seed);

void write_dataset(const Dataset& ds, const std::filesystem::path& dir);
Dataset read_dataset(const std::filesystem::path& dir);

// Session trace as JSON Lines: one header line, then one line per tick. Non-finite numbers become null.
std::string serialize_trace(const SessionTrace& trace);
void write_trace(const SessionTrace& trace, const std::filesystem::path& path);

// Open-loop replay: recorded actions drive the follower impedance controller tick by tick.
SessionTrace replay(const DemonstrationRecord& r, const ArmModel& follower, const ImpedanceGains& gains,
                    const EnvPrimitive& env, std::uint64_t env_seed, int substeps = 4);

}  // namespace teleop
