#include "teleop/service.hpp"

#include "teleop/config.hpp"
#include "teleop/datalog.hpp"
#include "teleop/errors.hpp"
#include "teleop/json_util.hpp"
#include "teleop/targeting.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include <chrono>
#include <condition_variable>
#include <cstdio>
#include <cstdlib>
#include <deque>
#include <map>
#include <mutex>
#include <thread>

namespace teleop {

namespace wire {

namespace {

std::optional<long> read_seq(const json& j) {
    if (!j.contains("seq")) return std::nullopt;
    if (!j.at("seq").is_number_integer()) throw WireError("invalid", "seq must be an integer");
    return j.at("seq").get<long>();
}

Eigen::VectorXd read_vector(const json& j, const char* key, int n) {
    const json& v = j.at(key);
    if (!v.is_array() || static_cast<int>(v.size()) != n)
        throw WireError("invalid", std::string(key) + " must be an array of " + std::to_string(n) + " numbers");
    Eigen::VectorXd out(n);
    for (int i = 0; i < n; ++i) {
        if (!v[i].is_number()) throw WireError("invalid", std::string(key) + " holds a non-number");
        out[i] = v[i].get<double>();
    }
    if (!out.allFinite()) throw WireError("invalid", std::string(key) + " holds a non-finite value");
    return out;
}

}  // namespace

ClientMessage parse_client_message(const std::string& text, int dof) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw WireError("malformed", e.what());
    }
    if (!j.is_object()) throw WireError("malformed", "frame must be a JSON object");
    if (!j.contains("schema_version") || j.at("schema_version") != kWireSchemaVersion)
        throw WireError("schema_version", std::string("expected schema_version ") + kWireSchemaVersion);
    if (!j.contains("type") || !j.at("type").is_string()) throw WireError("malformed", "missing type");
    const std::string type = j.at("type").get<std::string>();
    const auto seq = read_seq(j);

    if (type == "Command") {
        CommandMsg m;
        m.seq = seq;
        if (j.contains("target_q") && j.contains("target_ee"))
            throw WireError("invalid", "give target_q or target_ee, not both");
        if (j.contains("target_q")) m.target_q = read_vector(j, "target_q", dof);
        if (j.contains("target_ee")) m.target_ee = read_vector(j, "target_ee", 3);
        if (j.contains("gripper")) {
            if (!j.at("gripper").is_boolean()) throw WireError("invalid", "gripper must be a boolean");
            m.gripper = j.at("gripper").get<bool>();
        }
        if (!m.target_q && !m.target_ee && !m.gripper) throw WireError("invalid", "empty Command");
        return m;
    }
    if (type == "Configure") {
        ConfigureMsg m;
        m.seq = seq;
        if (j.contains("scheme")) {
            if (!j.at("scheme").is_string()) throw WireError("invalid", "scheme must be a string");
            m.scheme = j.at("scheme").get<std::string>();
            if (*m.scheme != "PP" && *m.scheme != "FP" && *m.scheme != "4C")
                throw WireError("invalid", "scheme must be PP, FP or 4C");
        }
        if (j.contains("k_f")) {
            if (!j.at("k_f").is_number()) throw WireError("invalid", "k_f must be a number");
            m.k_f = j.at("k_f").get<double>();
            if (!(std::isfinite(*m.k_f) && *m.k_f > 0)) throw WireError("invalid", "k_f must be > 0");
        }
        if (j.contains("gains")) m.gains = j.at("gains");
        if (j.contains("leader_gains")) m.leader_gains = j.at("leader_gains");
        return m;
    }
    if (type == "RecordControl") {
        RecordControlMsg m;
        m.seq = seq;
        const std::string action = j.value("action", std::string());
        if (action != "start" && action != "stop") throw WireError("invalid", "action must be start or stop");
        m.start = action == "start";
        if (j.contains("task")) {
            if (!j.at("task").is_string() || j.at("task").get<std::string>().empty())
                throw WireError("invalid", "task must be a non-empty string");
            m.task = j.at("task").get<std::string>();
        }
        return m;
    }
    throw WireError("unknown_type", "unknown frame type '" + type + "'");
}

json ack_frame(std::optional<long> seq, const json& extra) {
    json j = {{"type", "Ack"}, {"schema_version", kWireSchemaVersion}};
    j["seq"] = seq ? json(*seq) : json(nullptr);
    for (const auto& [k, v] : extra.items()) j[k] = v;
    return j;
}

json error_frame(const std::string& code, const std::string& msg, std::optional<long> seq) {
    json j = {{"type", "Error"}, {"schema_version", kWireSchemaVersion}, {"code", code}, {"msg", msg}};
    if (seq) j["seq"] = *seq;
    return j;
}

json state_frame(const Session& s, bool recording, bool gripper) {
    const TraceEntry& e = s.last();
    json j = {{"type", "State"}, {"schema_version", kWireSchemaVersion}};
    j["tick"] = e.tick;
    j["t"] = e.t;
    j["q_l"] = to_json_array(e.q_l);
    j["q_f"] = to_json_array(e.q_f);
    j["tau_ext"] = to_json_array(e.tau_ext);
    j["tau_l_ref"] = to_json_array(e.tau_l_ref);
    j["wrench"] = {{"force", to_json_array(e.wrench.force)}, {"moment", to_json_array(e.wrench.moment)}};
    j["contact"] = {{"in_contact", e.in_contact}, {"grasped", e.grasped}, {"drawer_extension", e.drawer_extension}};
    const auto* fp = std::get_if<FPScheme>(&s.scheme());
    j["k_f"] = fp ? json(fp->k_f) : json(nullptr);
    j["scheme"] = scheme_name(s.scheme());
    j["recording"] = recording;
    j["gripper"] = gripper ? "closed" : "open";
    return j;
}

}  // namespace wire

ServiceCore::ServiceCore(const SessionConfig& cfg, std::filesystem::path record_dir)
    : cfg_(cfg), session_(cfg, false), record_dir_(std::move(record_dir)), ik_seed_(cfg.initial_q) {
    buffer_.dt = cfg.dt();
}

void ServiceCore::apply_command(const wire::CommandMsg& m) {
    const KinematicChain& chain = cfg_.follower.chain;
    if (m.target_q) {
        ik_seed_ = chain.clamp(*m.target_q);
        session_.set_operator_target(ik_seed_);
    } else if (m.target_ee) {
        ik_seed_ = solve_position_ik(chain, *m.target_ee, ik_seed_);
        session_.set_operator_target(ik_seed_);
    }
    if (m.gripper) session_.set_gripper(*m.gripper);
}

json ServiceCore::apply_configure(const wire::ConfigureMsg& m) {
    const int n = cfg_.follower.dof();
    const ControlScheme& cur = session_.scheme();
    try {
        const std::string name = m.scheme.value_or(scheme_name(cur));
        if (m.k_f && name != "FP") throw ConfigError("k_f applies to the FP scheme only");
        const ImpedanceGains fg = m.gains ? gains_from_json(*m.gains, n) : follower_gains(cur);
        ControlScheme next;
        if (name == "FP") {
            const auto* fp = std::get_if<FPScheme>(&cur);
            if (!m.k_f && !fp) throw ConfigError("switching to FP needs k_f");
            next = FPScheme{m.k_f ? *m.k_f : fp->k_f, fg};
        } else if (name == "PP") {
            const auto* pp = std::get_if<PPScheme>(&cur);
            if (!m.leader_gains && !pp) throw ConfigError("switching to PP needs leader_gains");
            next = PPScheme{m.leader_gains ? gains_from_json(*m.leader_gains, n) : pp->leader_gains, fg};
        } else {
            const auto* fc = std::get_if<FourCScheme>(&cur);
            next = FourCScheme{fg, fc ? fc->force_gain : 1.0};
        }
        session_.set_scheme(next);
    } catch (const std::exception& e) {
        return wire::error_frame("invalid", e.what(), m.seq);
    }
    return wire::ack_frame(m.seq);
}

json ServiceCore::apply_record(const wire::RecordControlMsg& m) {
    if (m.start) {
        if (recording_) return wire::error_frame("recording", "already recording", m.seq);
        recording_ = m.task;
        buffer_ = SessionTrace{};
        buffer_.dt = cfg_.dt();
        return wire::ack_frame(m.seq);
    }
    if (!recording_) return wire::error_frame("recording", "not recording", m.seq);
    const std::string task = *recording_;
    recording_.reset();
    if (buffer_.entries.empty()) return wire::error_frame("recording", "no ticks recorded", m.seq);
    DemoMeta meta;
    meta.task = task;
    meta.scheme = scheme_name(session_.scheme());
    if (const auto* fp = std::get_if<FPScheme>(&session_.scheme())) meta.k_f = fp->k_f;
    meta.seed = cfg_.seed;
    meta.success = false;
    meta.extra = {{"source", "serve"}, {"first_tick", buffer_.entries.front().tick}};
    try {
        std::filesystem::create_directories(record_dir_);
        char name[64];
        std::snprintf(name, sizeof name, "_%03d.jsonl", records_written_);
        const auto path = record_dir_ / (task + name);
        write_record(record_demonstration(buffer_, meta), path);
        ++records_written_;
        buffer_.entries.clear();
        return wire::ack_frame(m.seq, {{"path", path.string()}});
    } catch (const std::exception& e) {
        return wire::error_frame("io", e.what(), m.seq);
    }
}

json ServiceCore::step() {
    session_.tick();
    if (recording_) buffer_.entries.push_back(session_.last());
    return wire::state_frame(session_, recording_.has_value(), session_.gripper());
}

std::string resolve_bind(const std::optional<std::string>& cli_value) {
    if (cli_value && !cli_value->empty()) return *cli_value;
    if (const char* env = std::getenv("TELEOP_BIND"); env && *env) return env;
    return ServiceOptions{}.bind;
}

// ---------------------------------------------------------------------------------------------

namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

namespace {

struct Outgoing {
    std::shared_ptr<const std::string> text;
    bool droppable;
};

}  // namespace

struct SessionService::Impl {
    struct Connection;
    using Control = std::variant<wire::ConfigureMsg, wire::RecordControlMsg>;

    Impl(const SessionConfig& cfg, ServiceOptions o) : opts(std::move(o)), core(cfg, opts.record_dir), dof(cfg.follower.dof()), rate_hz(cfg.rate_hz) {}

    ServiceOptions opts;
    ServiceCore core;
    int dof;
    double rate_hz;

    net::io_context ioc{1};
    tcp::acceptor acceptor{ioc};
    std::thread io_thread, session_thread;

    std::mutex reg_mu;
    std::map<std::uint64_t, std::weak_ptr<Connection>> conns;
    std::optional<std::uint64_t> owner;
    std::uint64_t next_id = 1;

    std::mutex inbox_mu;
    std::optional<wire::CommandMsg> command;
    std::deque<std::pair<std::uint64_t, Control>> controls;

    std::mutex run_mu;
    std::condition_variable run_cv;
    bool stopping = false;
    std::atomic<long> ticks{0};
    std::atomic<long> skipped{0};

    struct Connection : std::enable_shared_from_this<Connection> {
        Connection(Impl& i, tcp::socket s, std::uint64_t id_) : impl(i), ws(std::move(s)), id(id_) {}

        Impl& impl;
        websocket::stream<beast::tcp_stream> ws;
        std::uint64_t id;
        beast::flat_buffer buf;
        std::deque<Outgoing> out;
        bool writing = false;
        bool open = false;

        void run() {
            ws.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
            ws.async_accept([self = shared_from_this()](beast::error_code ec) {
                if (ec) return;
                self->open = true;
                self->impl.attach(self);
                self->read();
            });
        }

        void read() {
            ws.async_read(buf, [self = shared_from_this()](beast::error_code ec, std::size_t) {
                if (ec) {
                    self->close();
                    return;
                }
                const std::string text = beast::buffers_to_string(self->buf.data());
                self->buf.consume(self->buf.size());
                self->impl.on_message(*self, text);
                self->read();
            });
        }

        // I/O thread only. Back-pressure drops the oldest queued State frame, never blocks.
        void send(Outgoing m) {
            if (!open) return;
            if (m.droppable) {
                std::size_t queued = 0;
                for (const auto& o : out) queued += o.droppable ? 1 : 0;
                if (queued >= impl.opts.max_queued_frames) {
                    const std::size_t first = writing ? 1 : 0;
                    for (std::size_t i = first; i < out.size(); ++i)
                        if (out[i].droppable) {
                            out.erase(out.begin() + static_cast<long>(i));
                            break;
                        }
                }
            }
            out.push_back(std::move(m));
            if (!writing) write();
        }

        void write() {
            writing = true;
            ws.text(true);
            ws.async_write(net::buffer(*out.front().text), [self = shared_from_this()](beast::error_code ec, std::size_t) {
                self->out.pop_front();
                if (ec) {
                    self->writing = false;
                    self->close();
                    return;
                }
                if (self->out.empty())
                    self->writing = false;
                else
                    self->write();
            });
        }

        void close() {
            if (!open) return;
            open = false;
            out.clear();
            impl.detach(id);
        }
    };

    void attach(const std::shared_ptr<Connection>& c) {
        std::lock_guard lk(reg_mu);
        conns[c->id] = c;
        if (!owner) owner = c->id;
    }

    void detach(std::uint64_t id) {
        std::lock_guard lk(reg_mu);
        conns.erase(id);
        if (owner == id) owner = conns.empty() ? std::nullopt : std::optional<std::uint64_t>(conns.begin()->first);
    }

    bool is_owner(std::uint64_t id) { return current_owner() == id; }

    std::optional<std::uint64_t> current_owner() {
        std::lock_guard lk(reg_mu);
        return owner;
    }

    static void reply(Connection& c, const json& frame) {
        c.send({std::make_shared<const std::string>(frame.dump()), false});
    }

    void on_message(Connection& c, const std::string& text) {
        wire::ClientMessage msg;
        try {
            msg = wire::parse_client_message(text, dof);
        } catch (const wire::WireError& e) {
            reply(c, wire::error_frame(e.code(), e.what()));
            return;
        }
        if (!is_owner(c.id)) {
            std::optional<long> seq;
            std::visit([&](const auto& m) { seq = m.seq; }, msg);
            reply(c, wire::error_frame("not_owner", "another connection holds command authority", seq));
            return;
        }
        std::lock_guard lk(inbox_mu);
        if (auto* cmd = std::get_if<wire::CommandMsg>(&msg)) {
            // latest wins, but a gripper state from a superseded command is kept
            if (command && !cmd->gripper) cmd->gripper = command->gripper;
            if (command && !cmd->target_q && !cmd->target_ee) {
                cmd->target_q = command->target_q;
                cmd->target_ee = command->target_ee;
            }
            command = std::move(*cmd);
        } else if (auto* cf = std::get_if<wire::ConfigureMsg>(&msg)) {
            controls.emplace_back(c.id, std::move(*cf));
        } else {
            controls.emplace_back(c.id, std::get<wire::RecordControlMsg>(std::move(msg)));
        }
    }

    void post_to(std::uint64_t id, const json& frame) {
        std::shared_ptr<Connection> c;
        {
            std::lock_guard lk(reg_mu);
            auto it = conns.find(id);
            if (it != conns.end()) c = it->second.lock();
        }
        if (!c) return;
        auto text = std::make_shared<const std::string>(frame.dump());
        net::post(ioc, [c, text] { c->send({text, false}); });
    }

    void broadcast(const json& frame, bool droppable) {
        std::vector<std::shared_ptr<Connection>> targets;
        {
            std::lock_guard lk(reg_mu);
            for (auto& [id, w] : conns)
                if (auto c = w.lock()) targets.push_back(std::move(c));
        }
        if (targets.empty()) return;
        auto text = std::make_shared<const std::string>(frame.dump());
        net::post(ioc, [targets = std::move(targets), text, droppable] {
            for (const auto& c : targets) c->send({text, droppable});
        });
    }

    void accept() {
        acceptor.async_accept([this](beast::error_code ec, tcp::socket s) {
            if (ec) return;
            std::uint64_t id;
            {
                std::lock_guard lk(reg_mu);
                id = next_id++;
            }
            std::make_shared<Connection>(*this, std::move(s), id)->run();
            accept();
        });
    }

    void session_loop() {
        using clock = std::chrono::steady_clock;
        const auto period = std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(1.0 / rate_hz));
        auto next = clock::now();
        while (true) {
            std::optional<wire::CommandMsg> cmd;
            std::deque<std::pair<std::uint64_t, Control>> ctl;
            {
                std::lock_guard lk(inbox_mu);
                cmd.swap(command);
                ctl.swap(controls);
            }
            try {
                if (cmd) core.apply_command(*cmd);
            } catch (const std::exception& e) {
                if (const auto id = current_owner()) post_to(*id, wire::error_frame("invalid", e.what(), cmd->seq));
            }
            for (auto& [id, c] : ctl) {
                const json r = std::holds_alternative<wire::ConfigureMsg>(c)
                                   ? core.apply_configure(std::get<wire::ConfigureMsg>(c))
                                   : core.apply_record(std::get<wire::RecordControlMsg>(c));
                post_to(id, r);
            }
            try {
                broadcast(core.step(), true);
            } catch (const std::exception& e) {
                broadcast(wire::error_frame("diverged", e.what()), false);
                request_stop();
                return;
            }
            const long done = ++ticks;
            if (opts.max_ticks && done >= *opts.max_ticks) {
                request_stop();
                return;
            }

            next += period;
            const auto now = clock::now();
            if (now >= next + period) {
                // overrun: drop the missed slots instead of stepping twice
                const auto missed = (now - next) / period;
                skipped += static_cast<long>(missed);
                next += missed * period;
            }
            std::unique_lock lk(run_mu);
            if (run_cv.wait_until(lk, next, [this] { return stopping; })) return;
        }
    }

    void request_stop() {
        {
            std::lock_guard lk(run_mu);
            stopping = true;
        }
        run_cv.notify_all();
    }
};

SessionService::SessionService(const SessionConfig& cfg, ServiceOptions opts)
    : impl_(std::make_unique<Impl>(cfg, std::move(opts))) {}

SessionService::~SessionService() { stop(); }

std::uint16_t SessionService::start() {
    Impl& m = *impl_;
    const std::string& bind = m.opts.bind;
    const auto colon = bind.rfind(':');
    if (colon == std::string::npos) throw ConfigError("bind address must be host:port, got '" + bind + "'");
    const std::string host = bind.substr(0, colon);
    unsigned long port = 0;
    try {
        port = std::stoul(bind.substr(colon + 1));
    } catch (const std::exception&) {
        throw ConfigError("bad port in bind address '" + bind + "'");
    }
    if (port > 65535) throw ConfigError("bad port in bind address '" + bind + "'");
    boost::system::error_code ec;
    const auto addr = net::ip::make_address(host, ec);
    if (ec) throw ConfigError("bad host in bind address '" + bind + "'");
    const tcp::endpoint ep(addr, static_cast<std::uint16_t>(port));
    m.acceptor.open(ep.protocol());
    m.acceptor.set_option(net::socket_base::reuse_address(true));
    m.acceptor.bind(ep);
    m.acceptor.listen();
    const auto bound = m.acceptor.local_endpoint().port();
    m.accept();
    m.io_thread = std::thread([&m] {
        auto guard = net::make_work_guard(m.ioc);
        m.ioc.run();
    });
    m.session_thread = std::thread([&m] { m.session_loop(); });
    return bound;
}

void SessionService::wait() {
    Impl& m = *impl_;
    std::unique_lock lk(m.run_mu);
    m.run_cv.wait(lk, [&m] { return m.stopping; });
}

void SessionService::stop() {
    Impl& m = *impl_;
    m.request_stop();
    if (m.session_thread.joinable()) m.session_thread.join();
    if (m.io_thread.joinable()) {
        // let queued frames (final Acks, Errors) go out before tearing down
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
        m.ioc.stop();
        m.io_thread.join();
    }
}

void SessionService::request_stop() { impl_->request_stop(); }

long SessionService::ticks() const { return impl_->ticks.load(); }
long SessionService::skipped_ticks() const { return impl_->skipped.load(); }

}  // namespace teleop
