#include "teleop/sweep.hpp"

#include "teleop/errors.hpp"
#include "teleop/format.hpp"

#include <algorithm>
#include <stdexcept>

namespace teleop {

SessionConfig sweep_cell_config(const SessionConfig& base, double k_f, double delay_s) {
    SessionConfig cfg = base;
    FPScheme fp;
    fp.k_f = k_f;
    fp.follower_gains = follower_gains(base.scheme);
    cfg.scheme = fp;
    cfg.channel_up.latency_s = delay_s;
    cfg.channel_down.latency_s = delay_s;
    cfg.channel_up.jitter_s = std::min(cfg.channel_up.jitter_s, delay_s);
    cfg.channel_down.jitter_s = std::min(cfg.channel_down.jitter_s, delay_s);
    return cfg;
}

SweepRow run_sweep_cell(const SessionConfig& base, double k_f, double delay_s, const InstabilityParams& p) {
    SweepRow row;
    row.k_f = k_f;
    row.delay_s = delay_s;
    try {
        const SessionTrace trace = run_session(sweep_cell_config(base, k_f, delay_s));
        const SessionMetrics m = compute_metrics(trace, p);
        row.unstable = m.unstable;
        row.onset_s = m.instability_onset;
        row.rmse = m.tracking_rmse;
        row.stiffness_ratio = m.stiffness_ratio;
        if (trace.diverged_tick) row.error = trace.failure;
    } catch (const std::exception& e) {
        row.error = e.what();
    }
    return row;
}

std::vector<SweepRow> sweep_kf(const SessionConfig& base, const std::vector<double>& kf_grid,
                               const std::vector<double>& delays, Exec exec, const InstabilityParams& p) {
    if (kf_grid.empty() || delays.empty()) throw ConfigError("sweep grid must be nonempty");
    if (!std::is_sorted(kf_grid.begin(), kf_grid.end()) ||
        std::adjacent_find(kf_grid.begin(), kf_grid.end()) != kf_grid.end())
        throw ConfigError("k_f grid must be strictly ascending");
    base.validate();
    const long nk = static_cast<long>(kf_grid.size());
    const long cells = nk * static_cast<long>(delays.size());
    std::vector<SweepRow> rows(static_cast<std::size_t>(cells));
    if (exec == Exec::serial) {
        for (long c = 0; c < cells; ++c) rows[c] = run_sweep_cell(base, kf_grid[c % nk], delays[c / nk], p);
    } else {
#pragma omp parallel for schedule(dynamic, 1)
        for (long c = 0; c < cells; ++c) rows[c] = run_sweep_cell(base, kf_grid[c % nk], delays[c / nk], p);
    }
    return rows;
}

namespace {

std::vector<const SweepRow*> rows_for(const std::vector<SweepRow>& rows, double delay_s) {
    std::vector<const SweepRow*> out;
    for (const auto& r : rows)
        if (r.delay_s == delay_s) out.push_back(&r);
    std::sort(out.begin(), out.end(), [](auto* a, auto* b) { return a->k_f < b->k_f; });
    return out;
}

}  // namespace

std::optional<double> stability_boundary(const std::vector<SweepRow>& rows, double delay_s) {
    const auto r = rows_for(rows, delay_s);
    std::optional<double> k;
    for (auto it = r.rbegin(); it != r.rend() && (*it)->unstable; ++it) k = (*it)->k_f;
    return k;
}

bool unstable_set_upward_closed(const std::vector<SweepRow>& rows, double delay_s) {
    bool seen_unstable = false;
    for (const auto* r : rows_for(rows, delay_s)) {
        if (r->unstable) seen_unstable = true;
        else if (seen_unstable) return false;
    }
    return true;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
    out << "k_f,delay_s,unstable,onset_s,rmse,stiffness_ratio\n";
    for (const auto& r : rows) {
        out << format_double(r.k_f) << ',' << format_double(r.delay_s) << ',' << (r.unstable ? 1 : 0) << ','
            << (r.onset_s ? format_double(*r.onset_s) : "") << ',' << format_double(r.rmse) << ','
            << (r.stiffness_ratio ? format_double(*r.stiffness_ratio) : "") << '\n';
    }
}

}  // namespace teleop
