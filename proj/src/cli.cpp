#include "teleop/cli.hpp"

#include "teleop/config.hpp"
#include "teleop/datalog.hpp"
#include "teleop/errors.hpp"
#include "teleop/evaluate.hpp"
#include "teleop/json_util.hpp"
#include "teleop/metrics.hpp"
#include "teleop/policy.hpp"
#include "teleop/service.hpp"
#include "teleop/sweep.hpp"

#include <CLI11.hpp>
#include <boost/asio/io_context.hpp>
#include <boost/asio/signal_set.hpp>

#include <csignal>
#include <fstream>
#include <thread>

namespace teleop {

namespace {

namespace fs = std::filesystem;

struct Common {
    std::string config;
    std::string output;
    std::vector<std::string> overrides;
};

// Raised for problems with the configuration itself; maps to the usage exit code.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

json load_config(const Common& c) {
    json j = load_json_file(c.config);
    for (const auto& o : c.overrides) apply_override(j, o);
    return j;
}

fs::path config_dir(const Common& c) { return fs::path(c.config).parent_path(); }

template <class F>
auto parse_config(F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const ConfigError& e) {
        throw UsageError(e.what());
    } catch (const DimensionError& e) {
        throw UsageError(e.what());
    } catch (const nlohmann::json::exception& e) {
        throw UsageError(std::string("config: ") + e.what());
    }
}

std::ofstream open_output(const fs::path& p) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream f(p);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    return f;
}

json metrics_json(const SessionMetrics& m) {
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    return {{"tracking_rmse", m.tracking_rmse},
            {"perceived_stiffness", opt(m.perceived_stiffness)},
            {"stiffness_ratio", opt(m.stiffness_ratio)},
            {"unstable", m.unstable},
            {"instability_onset", opt(m.instability_onset)}};
}

json mode_json(const ModeSummary& m) {
    return {{"input_mode", m.input_mode}, {"per_seed", m.per_seed},           {"mean", m.mean},
            {"std_over_seeds", m.std_over_seeds}, {"std_over_rollouts", m.std_over_rollouts}};
}

// Session config from either a plain session file or a drawer setup (recognized by "rig").
SessionConfig any_session(const json& j, const fs::path& dir) {
    if (!j.contains("rig")) return session_from_json(j, dir);
    const DrawerSetup s = drawer_setup_from_json(j, dir);
    SessionConfig cfg = demo_session_config(make_drawer_scenario(s.scenario), s.rig);
    if (j.contains("duration_s")) cfg.duration_s = as_double(j.at("duration_s"), "duration_s");
    return cfg;
}

int cmd_simulate(const Common& c, std::ostream& out) {
    const SessionConfig cfg = parse_config([&] { return session_from_json(load_config(c), config_dir(c)); });
    const SessionTrace trace = run_session(cfg);
    const fs::path path = c.output.empty() ? "trace.jsonl" : c.output;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_trace(trace, path);
    json summary = metrics_json(compute_metrics(trace));
    summary["ticks"] = trace.size();
    summary["trace"] = path.string();
    if (trace.diverged_tick) summary["diverged_tick"] = *trace.diverged_tick;
    out << summary.dump() << '\n';
    return 0;
}

int cmd_sweep(const Common& c, std::ostream& out) {
    const SweepSetup s = parse_config([&] { return sweep_from_json(load_config(c), config_dir(c)); });
    const auto rows = sweep_kf(s.base, s.kf_grid, s.delays, Exec::parallel, s.instability);
    const fs::path path = c.output.empty() ? "sweep.csv" : c.output;
    auto f = open_output(path);
    write_sweep_csv(f, rows);
    for (double d : s.delays) {
        const auto b = stability_boundary(rows, d);
        out << "delay_s=" << d << " boundary_k_f=" << (b ? std::to_string(*b) : std::string("none"))
            << " upward_closed=" << (unstable_set_upward_closed(rows, d) ? "yes" : "no") << '\n';
    }
    out << "wrote " << rows.size() << " rows to " << path.string() << '\n';
    return 0;
}

int cmd_record(const Common& c, std::ostream& out) {
    const DrawerSetup s = parse_config([&] { return drawer_setup_from_json(load_config(c), config_dir(c)); });
    const auto demos = generate_demos(s.scenario, s.rig, s.demonstrator, s.n_demos, s.demo_seed_base);
    Dataset ds;
    ds.records = demos_to_records(demos, s.scenario, s.rig, s.demo_seed_base);
    int ok = 0;
    for (const auto& d : demos) ok += d.success ? 1 : 0;
    const std::uint64_t split_seed = s.benchmark.train_seeds.empty() ? 0 : s.benchmark.train_seeds.front();
    split_dataset(ds, std::min(s.benchmark.n_validation, ds.records.size()), split_seed);
    const fs::path dir = c.output.empty() ? "demos" : c.output;
    write_dataset(ds, dir);
    out << "recorded " << ds.records.size() << " demonstrations (" << ok << " successful) to " << dir.string() << '\n';
    return 0;
}

int cmd_train(const Common& c, const std::string& dataset, const std::string& mode, std::ostream& out) {
    const DrawerSetup s = parse_config([&] { return drawer_setup_from_json(load_config(c), config_dir(c)); });
    PolicyConfig pc = s.benchmark.policy;
    pc.include_force = mode == "force";
    const Dataset ds = read_dataset(dataset);
    const ChunkPredictor p = fit(build_dataset(ds, pc), pc, s.scenario.arm.chain);
    const fs::path path = c.output.empty() ? "policy.json" : c.output;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    save_predictor(p, path);
    out << "trained " << mode << " policy on " << ds.train.size() << " demonstrations, wrote " << path.string() << '\n';
    return 0;
}

int cmd_eval(const Common& c, const std::string& policy, const std::string& dataset, std::ostream& out) {
    const DrawerSetup s = parse_config([&] { return drawer_setup_from_json(load_config(c), config_dir(c)); });
    const ImpedanceGains gains = follower_gains(s.rig.scheme);
    const fs::path path = c.output.empty() ? "eval.csv" : c.output;
    if (!policy.empty()) {
        const ChunkPredictor p = load_predictor(policy);
        std::vector<std::uint64_t> seeds;
        for (int r = 0; r < s.benchmark.n_rollouts; ++r)
            seeds.push_back(s.benchmark.rollout_seed_base + static_cast<std::uint64_t>(r));
        const EvalSummary e = evaluate_policy(p, s.scenario, gains, seeds, s.benchmark.max_ticks);
        std::vector<EvalRow> rows;
        const std::string mode = p.cfg.include_force ? "force" : "position";
        for (std::size_t r = 0; r < e.results.size(); ++r) rows.push_back({0, mode, static_cast<int>(r), e.results[r].success});
        auto f = open_output(path);
        write_eval_csv(f, rows);
        out << json{{"input_mode", mode}, {"success_rate", e.success_rate}, {"rollouts", rows.size()}}.dump() << '\n';
        return 0;
    }
    std::vector<DemonstrationRecord> demos;
    if (!dataset.empty()) {
        demos = read_dataset(dataset).records;
    } else {
        const auto results = generate_demos(s.scenario, s.rig, s.demonstrator, s.n_demos, s.demo_seed_base);
        demos = demos_to_records(results, s.scenario, s.rig, s.demo_seed_base);
    }
    const BenchmarkReport rep = run_drawer_benchmark(demos, s.scenario, gains, s.benchmark);
    auto f = open_output(path);
    write_eval_csv(f, rep.rows);
    out << json{{"position", mode_json(rep.position_only)},
                {"force", mode_json(rep.force_aware)},
                {"convex", rep.all_convex},
                {"max_jump_ensembled", rep.audit.max_jump_ensembled},
                {"max_jump_raw", rep.audit.max_jump_raw}}
               .dump()
        << '\n';
    return 0;
}

int cmd_replay(const Common& c, const std::string& record, std::ostream& out) {
    struct Setup {
        ArmModel follower;
        ImpedanceGains gains;
        EnvPrimitive env;
        int substeps;
        bool drawer;
        DrawerScenarioConfig scenario;
    };
    const Setup s = parse_config([&] {
        const json j = load_config(c);
        if (j.contains("rig")) {
            const DrawerSetup d = drawer_setup_from_json(j, config_dir(c));
            return Setup{d.scenario.arm, follower_gains(d.rig.scheme), d.scenario.drawer, d.scenario.substeps, true, d.scenario};
        }
        const SessionConfig cfg = session_from_json(j, config_dir(c));
        return Setup{cfg.follower, follower_gains(cfg.scheme), cfg.env, cfg.substeps, false, {}};
    });
    const DemonstrationRecord r = read_record(record);
    EnvPrimitive env = s.env;
    if (s.drawer) {
        // the recorded seed fixes the handle placement
        DrawerScenarioConfig sc = s.scenario;
        sc.seed = r.meta.seed;
        env = make_drawer_scenario(sc).drawer;
    }
    const SessionTrace trace = replay(r, s.follower, s.gains, env, r.meta.seed, s.substeps);
    const fs::path path = c.output.empty() ? "replay.jsonl" : c.output;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_trace(trace, path);
    out << "replayed " << trace.size() << " ticks to " << path.string() << '\n';
    return 0;
}

int cmd_serve(const Common& c, const std::string& bind, const std::string& record_dir, long max_ticks,
              std::ostream& out) {
    const SessionConfig cfg = parse_config([&] { return any_session(load_config(c), config_dir(c)); });
    ServiceOptions opts;
    opts.bind = resolve_bind(bind.empty() ? std::nullopt : std::optional<std::string>(bind));
    opts.record_dir = record_dir;
    if (max_ticks > 0) opts.max_ticks = max_ticks;
    SessionService svc(cfg, opts);
    std::uint16_t port = 0;
    try {
        port = svc.start();
    } catch (const ConfigError& e) {
        throw UsageError(e.what());
    }
    const auto host = opts.bind.substr(0, opts.bind.rfind(':'));
    out << "serving ws://" << host << ':' << port << " at " << cfg.rate_hz << " Hz" << std::endl;

    boost::asio::io_context sig_ioc;
    boost::asio::signal_set signals(sig_ioc, SIGINT, SIGTERM);
    signals.async_wait([&svc](const boost::system::error_code& ec, int) {
        if (!ec) svc.request_stop();
    });
    std::thread sig_thread([&sig_ioc] { sig_ioc.run(); });
    svc.wait();
    svc.stop();
    sig_ioc.stop();
    sig_thread.join();
    out << "stopped after " << svc.ticks() << " ticks (" << svc.skipped_ticks() << " skipped)" << std::endl;
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Leader-follower teleoperation simulator", "teleop"};
    app.require_subcommand(1);
    Common common;
    std::string dataset, mode = "force", policy, record, bind, record_dir = "recordings";
    long max_ticks = 0;

    auto add_common = [&](CLI::App* sub, bool output = true) {
        sub->add_option("-c,--config", common.config, "JSON configuration file")->required();
        if (output) sub->add_option("-o,--output", common.output, "output path");
        sub->add_option("-s,--set", common.overrides, "override a config value, key.path=value");
    };
    auto* simulate = app.add_subcommand("simulate", "run one teleoperation session and write its trace");
    add_common(simulate);
    auto* sweep = app.add_subcommand("sweep-kf", "stability map over k_f and channel delay");
    add_common(sweep);
    auto* rec = app.add_subcommand("record", "generate scripted drawer demonstrations");
    add_common(rec);
    auto* train = app.add_subcommand("train", "fit a chunk policy on a recorded dataset");
    add_common(train);
    train->add_option("-d,--dataset", dataset, "dataset directory")->required();
    train->add_option("-m,--input-mode", mode, "force or position")->check(CLI::IsMember({"force", "position"}));
    auto* eval = app.add_subcommand("eval", "evaluate a policy, or run the position vs force benchmark");
    add_common(eval);
    eval->add_option("-p,--policy", policy, "policy file; without it the full benchmark runs");
    eval->add_option("-d,--dataset", dataset, "dataset directory for the benchmark");
    auto* serve = app.add_subcommand("serve", "live session over WebSocket");
    add_common(serve, false);
    serve->add_option("-b,--bind", bind, "host:port (default TELEOP_BIND or 127.0.0.1:8765)");
    serve->add_option("-r,--record-dir", record_dir, "directory for recorded demonstrations");
    serve->add_option("--max-ticks", max_ticks, "stop after this many ticks");
    auto* rep = app.add_subcommand("replay", "replay a demonstration open loop on the follower");
    add_common(rep);
    rep->add_option("-r,--record", record, "demonstration file")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "teleop: " << e.what() << '\n';
        return kExitUsage;
    }

    try {
        if (simulate->parsed()) return cmd_simulate(common, out);
        if (sweep->parsed()) return cmd_sweep(common, out);
        if (rec->parsed()) return cmd_record(common, out);
        if (train->parsed()) return cmd_train(common, dataset, mode, out);
        if (eval->parsed()) return cmd_eval(common, policy, dataset, out);
        if (serve->parsed()) return cmd_serve(common, bind, record_dir, max_ticks, out);
        if (rep->parsed()) return cmd_replay(common, record, out);
    } catch (const UsageError& e) {
        err << "teleop: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "teleop: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitUsage;
}

}  // namespace teleop
