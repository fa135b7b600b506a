#include "teleop/datalog.hpp"

#include "teleop/errors.hpp"
#include "teleop/format.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <unistd.h>

namespace teleop {

using nlohmann::json;

namespace {

bool same(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return a.size() == b.size() && (a.array() == b.array()).all();
}

Eigen::VectorXd read_array(const json& obj, const char* key, int dof, std::size_t line) {
    if (!obj.contains(key)) throw ParseError(std::string("missing field '") + key + "'", line);
    const json& a = obj.at(key);
    if (!a.is_array()) throw ParseError(std::string("field '") + key + "' is not an array", line);
    if (static_cast<int>(a.size()) != dof)
        throw ParseError(std::string("field '") + key + "' has length " + std::to_string(a.size()) +
                             ", expected " + std::to_string(dof),
                         line);
    Eigen::VectorXd v(dof);
    for (int i = 0; i < dof; ++i) {
        if (!a[i].is_number()) throw ParseError(std::string("field '") + key + "' holds a non-number", line);
        v[i] = a[i].get<double>();
    }
    return v;
}

}  // namespace

bool DemoStep::operator==(const DemoStep& o) const {
    return t == o.t && same(q_leader, o.q_leader) && same(q_follower, o.q_follower) &&
           same(qdot_follower, o.qdot_follower) && same(tau_ext, o.tau_ext) && same(action, o.action);
}

void DemonstrationRecord::validate() const {
    if (meta.dof < 1) throw DimensionError("record dof must be >= 1");
    if (!(meta.rate_hz > 0)) throw DimensionError("record rate_hz must be positive");
    for (const auto& s : steps) {
        for (const auto* v : {&s.q_leader, &s.q_follower, &s.qdot_follower, &s.tau_ext, &s.action}) {
            require_dim(v->size(), meta.dof, "record step");
            if (!v->allFinite()) throw NonFiniteError("record step holds a non-finite value", -1);
        }
        if (!std::isfinite(s.t)) throw NonFiniteError("record step time is not finite", -1);
    }
}

void Dataset::validate() const {
    std::set<std::size_t> seen;
    for (auto i : train) {
        if (i >= records.size()) throw ConfigError("train index out of range");
        seen.insert(i);
    }
    for (auto i : validation) {
        if (i >= records.size()) throw ConfigError("validation index out of range");
        if (seen.count(i)) throw ConfigError("train and validation splits overlap");
    }
}

DemonstrationRecord record_demonstration(const SessionTrace& trace, DemoMeta meta) {
    if (trace.entries.empty()) throw std::invalid_argument("record_demonstration: empty trace");
    DemonstrationRecord r;
    meta.dof = static_cast<int>(trace.entries.front().q_f.size());
    meta.rate_hz = 1.0 / trace.dt;
    r.meta = std::move(meta);
    r.steps.reserve(trace.entries.size());
    for (const auto& e : trace.entries) {
        DemoStep s;
        s.t = e.t;
        s.q_leader = e.q_l;
        s.q_follower = e.q_f;
        s.qdot_follower = e.qdot_f;
        s.tau_ext = e.tau_ext;
        s.action = e.q_l;
        r.steps.push_back(std::move(s));
    }
    return r;
}

std::string serialize_record(const DemonstrationRecord& r) {
    r.validate();
    std::string out;
    out += "{\"schema_version\":\"";
    out += kSchemaVersion;
    out += "\",\"task\":" + json(r.meta.task).dump();
    out += ",\"dof\":" + std::to_string(r.meta.dof);
    out += ",\"rate_hz\":" + format_double(r.meta.rate_hz);
    out += ",\"scheme\":" + json(r.meta.scheme).dump();
    out += ",\"k_f\":" + (r.meta.k_f ? format_double(*r.meta.k_f) : std::string("null"));
    out += ",\"seed\":" + std::to_string(r.meta.seed);
    out += std::string(",\"success\":") + (r.meta.success ? "true" : "false");
    out += ",\"steps\":" + std::to_string(r.steps.size());
    out += ",\"extra\":" + r.meta.extra.dump();
    out += "}\n";
    for (const auto& s : r.steps) {
        out += "{\"t\":" + format_double(s.t);
        out += ",\"q_leader\":";
        append_array(out, s.q_leader);
        out += ",\"q_follower\":";
        append_array(out, s.q_follower);
        out += ",\"qdot_follower\":";
        append_array(out, s.qdot_follower);
        out += ",\"tau_ext\":";
        append_array(out, s.tau_ext);
        out += ",\"action\":";
        append_array(out, s.action);
        out += "}\n";
    }
    return out;
}

namespace {

std::string num_or_null(double x) { return std::isfinite(x) ? format_double(x) : std::string("null"); }

void append_lenient(std::string& out, const Eigen::VectorXd& v) {
    out += '[';
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += num_or_null(v[i]);
    }
    out += ']';
}

json stats_json(const ChannelStats& s) {
    return {{"sent", s.sent}, {"delivered", s.delivered}, {"dropped", s.dropped}, {"in_flight", s.in_flight},
            {"mean_delay", std::isfinite(s.mean_delay) ? json(s.mean_delay) : json(nullptr)}};
}

}  // namespace

std::string serialize_trace(const SessionTrace& trace) {
    std::string out = "{\"schema_version\":\"";
    out += kSchemaVersion;
    out += "\",\"kind\":\"trace\",\"dt\":" + format_double(trace.dt);
    out += ",\"ticks\":" + std::to_string(trace.entries.size());
    out += ",\"diverged_tick\":" + (trace.diverged_tick ? std::to_string(*trace.diverged_tick) : std::string("null"));
    out += ",\"failure\":" + json(trace.failure).dump();
    out += ",\"up\":" + stats_json(trace.up).dump();
    out += ",\"down\":" + stats_json(trace.down).dump();
    out += "}\n";
    for (const auto& e : trace.entries) {
        out += "{\"tick\":" + std::to_string(e.tick) + ",\"t\":" + num_or_null(e.t);
        const std::pair<const char*, const Eigen::VectorXd*> vecs[] = {
            {"q_l", &e.q_l},         {"qdot_l", &e.qdot_l},       {"q_f", &e.q_f},
            {"qdot_f", &e.qdot_f},   {"tau_ext", &e.tau_ext},     {"tau_l_ref", &e.tau_l_ref},
            {"tau_op", &e.tau_op}};
        for (const auto& [k, v] : vecs) {
            out += ",\"";
            out += k;
            out += "\":";
            append_lenient(out, *v);
        }
        out += ",\"force\":";
        append_lenient(out, e.wrench.force);
        out += ",\"moment\":";
        append_lenient(out, e.wrench.moment);
        out += std::string(",\"in_contact\":") + (e.in_contact ? "true" : "false");
        out += std::string(",\"grasped\":") + (e.grasped ? "true" : "false");
        out += ",\"drawer_extension\":" + num_or_null(e.drawer_extension);
        out += std::string(",\"up_sent\":") + (e.up_sent ? "true" : "false");
        out += std::string(",\"down_sent\":") + (e.down_sent ? "true" : "false");
        out += ",\"up_delivered\":" + std::to_string(e.up_delivered);
        out += ",\"down_delivered\":" + std::to_string(e.down_delivered);
        out += "}\n";
    }
    return out;
}

void write_trace(const SessionTrace& trace, const std::filesystem::path& path) {
    write_file_atomic(path, serialize_trace(trace));
}

DemonstrationRecord parse_record(std::istream& in) {
    DemonstrationRecord r;
    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(in, line)) throw ParseError("empty file", 1);
    ++lineno;
    json meta;
    try {
        meta = json::parse(line);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("malformed metadata: ") + e.what(), lineno);
    }
    if (!meta.is_object() || !meta.contains("schema_version")) throw ParseError("missing schema_version", lineno);
    if (meta.at("schema_version") != kSchemaVersion)
        throw ParseError("unsupported schema_version " + meta.at("schema_version").dump(), lineno);
    try {
        r.meta.task = meta.at("task").get<std::string>();
        r.meta.dof = meta.at("dof").get<int>();
        r.meta.rate_hz = meta.at("rate_hz").get<double>();
        r.meta.scheme = meta.at("scheme").get<std::string>();
        if (!meta.at("k_f").is_null()) r.meta.k_f = meta.at("k_f").get<double>();
        r.meta.seed = meta.at("seed").get<std::uint64_t>();
        r.meta.success = meta.at("success").get<bool>();
        if (meta.contains("extra")) r.meta.extra = meta.at("extra");
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad metadata: ") + e.what(), lineno);
    }
    if (r.meta.dof < 1) throw ParseError("dof must be >= 1", lineno);
    if (!(r.meta.rate_hz > 0)) throw ParseError("rate_hz must be positive", lineno);
    std::optional<std::size_t> expected;
    if (meta.contains("steps")) expected = meta.at("steps").get<std::size_t>();

    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json o;
        try {
            o = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(std::string("malformed step: ") + e.what(), lineno);
        }
        if (!o.is_object()) throw ParseError("step is not an object", lineno);
        DemoStep s;
        if (!o.contains("t") || !o.at("t").is_number()) throw ParseError("missing field 't'", lineno);
        s.t = o.at("t").get<double>();
        s.q_leader = read_array(o, "q_leader", r.meta.dof, lineno);
        s.q_follower = read_array(o, "q_follower", r.meta.dof, lineno);
        s.qdot_follower = read_array(o, "qdot_follower", r.meta.dof, lineno);
        s.tau_ext = read_array(o, "tau_ext", r.meta.dof, lineno);
        s.action = read_array(o, "action", r.meta.dof, lineno);
        r.steps.push_back(std::move(s));
    }
    if (expected && *expected != r.steps.size())
        throw ParseError("expected " + std::to_string(*expected) + " steps, found " + std::to_string(r.steps.size()),
                         lineno + 1);
    return r;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::filesystem::path tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
        out << text;
        out.flush();
        if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
    }
    std::filesystem::rename(tmp, path);
}

void write_record(const DemonstrationRecord& r, const std::filesystem::path& path) {
    write_file_atomic(path, serialize_record(r));
}

DemonstrationRecord read_record(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
    try {
        return parse_record(in);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what(), e.line());
    }
}

void split_dataset(Dataset& ds, std::size_t n_validation, std::uint64_t seed) {
    const std::size_t n = ds.records.size();
    if (n_validation > n) throw ConfigError("validation split larger than the dataset");
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    std::mt19937_64 rng(seed);
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(idx[i - 1], idx[j]);
    }
    ds.validation.assign(idx.end() - static_cast<long>(n_validation), idx.end());
    ds.train.assign(idx.begin(), idx.end() - static_cast<long>(n_validation));
    std::sort(ds.train.begin(), ds.train.end());
    std::sort(ds.validation.begin(), ds.validation.end());
}

void write_dataset(const Dataset& ds, const std::filesystem::path& dir) {
    ds.validate();
    std::filesystem::create_directories(dir);
    json files = json::array();
    for (std::size_t i = 0; i < ds.records.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "demo_%03zu.jsonl", i);
        write_record(ds.records[i], dir / name);
        files.push_back(name);
    }
    json index = {{"schema_version", kSchemaVersion},
                  {"records", files},
                  {"split", {{"train", ds.train}, {"validation", ds.validation}}}};
    write_file_atomic(dir / "dataset.json", index.dump(2) + "\n");
}

Dataset read_dataset(const std::filesystem::path& dir) {
    std::ifstream in(dir / "dataset.json");
    if (!in) throw std::runtime_error("cannot open '" + (dir / "dataset.json").string() + "'");
    json index;
    try {
        index = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("dataset.json: ") + e.what(), 0);
    }
    if (index.value("schema_version", std::string()) != kSchemaVersion)
        throw ParseError("dataset.json: unsupported schema_version", 0);
    Dataset ds;
    for (const auto& f : index.at("records")) ds.records.push_back(read_record(dir / f.get<std::string>()));
    ds.train = index.at("split").at("train").get<std::vector<std::size_t>>();
    ds.validation = index.at("split").at("validation").get<std::vector<std::size_t>>();
    ds.validate();
    return ds;
}

SessionTrace replay(const DemonstrationRecord& r, const ArmModel& follower, const ImpedanceGains& gains,
                    const EnvPrimitive& env, std::uint64_t env_seed, int substeps) {
    if (r.steps.empty()) throw std::invalid_argument("replay: empty record");
    if (r.meta.dof != follower.dof())
        throw DimensionError("replay: record has " + std::to_string(r.meta.dof) + " joints, model has " +
                             std::to_string(follower.dof()));
    const double dt = 1.0 / r.meta.rate_hz;
    FollowerPlant plant(follower, env, dt, substeps, env_seed, r.steps.front().q_follower);
    SessionTrace trace;
    trace.dt = dt;
    for (std::size_t k = 0; k < r.steps.size(); ++k) {
        const double t = tick_time(static_cast<long>(k), r.meta.rate_hz);
        plant.set_time(t);
        TraceEntry e;
        e.tick = static_cast<long>(k);
        e.t = t;
        e.tau_ext = plant.sense();
        e.q_l = r.steps[k].action;
        e.qdot_l = Eigen::VectorXd::Zero(follower.dof());
        e.q_f = plant.state().q;
        e.qdot_f = plant.state().qdot;
        e.tau_l_ref = Eigen::VectorXd::Zero(follower.dof());
        e.tau_op = Eigen::VectorXd::Zero(follower.dof());
        e.wrench = plant.wrench();
        e.in_contact = plant.contact().in_contact;
        e.grasped = plant.contact().grasped;
        e.drawer_extension = plant.contact().drawer_extension;
        trace.entries.push_back(std::move(e));
        plant.track(gains, r.steps[k].action);
    }
    return trace;
}

}  // namespace teleop
