#pragma once

#include "teleop/session.hpp"

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>

#include <json.hpp>

namespace teleop {

namespace wire {

inline constexpr const char* kWireSchemaVersion = "1";

struct CommandMsg {
    std::optional<long> seq;
    std::optional<Eigen::VectorXd> target_q;
    std::optional<Eigen::Vector3d> target_ee;  // follower base frame
    std::optional<bool> gripper;               // true = close
};

struct ConfigureMsg {
    std::optional<long> seq;
    std::optional<std::string> scheme;
    std::optional<double> k_f;
    std::optional<nlohmann::json> gains;         // follower {kp, kd}
    std::optional<nlohmann::json> leader_gains;  // PP only
};

struct RecordControlMsg {
    std::optional<long> seq;
    bool start = true;
    std::string task = "teleop";
};

using ClientMessage = std::variant<CommandMsg, ConfigureMsg, RecordControlMsg>;

class WireError : public std::runtime_error {
public:
    WireError(std::string code, const std::string& msg) : std::runtime_error(msg), code_(std::move(code)) {}
    const std::string& code() const { return code_; }

private:
    std::string code_;
};

// Throws WireError with code "malformed", "schema_version", "unknown_type" or "invalid".
ClientMessage parse_client_message(const std::string& text, int dof);

nlohmann::json ack_frame(std::optional<long> seq, const nlohmann::json& extra = nlohmann::json::object());
nlohmann::json error_frame(const std::string& code, const std::string& msg, std::optional<long> seq = {});
nlohmann::json state_frame(const Session& s, bool recording, bool gripper_closed);

}  // namespace wire

// Session owner for the service: applies messages at tick boundaries and produces State frames.
// Not thread-safe; the network layer calls it from a single thread.
class ServiceCore {
public:
    ServiceCore(const SessionConfig& cfg, std::filesystem::path record_dir);

    void apply_command(const wire::CommandMsg& m);
    // Either the whole parameter set is staged for the next tick (Ack) or nothing changes (Error).
    nlohmann::json apply_configure(const wire::ConfigureMsg& m);
    nlohmann::json apply_record(const wire::RecordControlMsg& m);
    // Advances one tick and returns its State frame.
    nlohmann::json step();

    const Session& session() const { return session_; }
    bool recording() const { return recording_.has_value(); }
    int records_written() const { return records_written_; }

private:
    SessionConfig cfg_;
    Session session_;
    std::filesystem::path record_dir_;
    JointPositions ik_seed_;
    std::optional<std::string> recording_;
    SessionTrace buffer_;
    int records_written_ = 0;
};

struct ServiceOptions {
    std::string bind = "127.0.0.1:8765";
    std::filesystem::path record_dir = "recordings";
    std::size_t max_queued_frames = 8;
    std::optional<long> max_ticks;  // stop after this many ticks
};

// CLI value wins, then TELEOP_BIND, then the default.
std::string resolve_bind(const std::optional<std::string>& cli_value);

// WebSocket service. One thread steps the session at the configured rate, one thread runs network I/O.
class SessionService {
public:
    SessionService(const SessionConfig& cfg, ServiceOptions opts);
    ~SessionService();
    SessionService(const SessionService&) = delete;
    SessionService& operator=(const SessionService&) = delete;

    // Binds and starts both threads. Returns the bound port.
    std::uint16_t start();
    void stop();
    // Asks the session thread to finish; safe from any thread. wait() then returns.
    void request_stop();
    // Blocks until stop() or max_ticks is reached.
    void wait();

    long ticks() const;
    long skipped_ticks() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace teleop
