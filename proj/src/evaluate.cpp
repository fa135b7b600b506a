#include "teleop/evaluate.hpp"

#include "teleop/errors.hpp"

#include <cmath>

namespace teleop {

RolloutResult rollout(const ChunkPredictor& p, const Scenario& sc, const ImpedanceGains& gains, int max_ticks) {
    RolloutResult res;
    try {
        require_dim(p.dof, sc.follower.dof(), "policy dof");
        FollowerPlant plant(sc.follower, sc.drawer, sc.dt, sc.substeps, sc.seed, sc.start_q);
        EnsembleBuffer buf(p.cfg.chunk_size);
        std::vector<Observation> history;
        ActionChunk held;
        Eigen::VectorXd prev_a, prev_raw;
        for (int t = 0; t < max_ticks; ++t) {
            plant.set_time(t * sc.dt);
            const JointTorques& tau = plant.sense();
            history.push_back({plant.state().q, tau});
            ActionChunk c = p.predict(history, t);
            if (t % p.cfg.chunk_size == 0) held = c;
            buf.push(std::move(c));
            buf.evict(t);
            const JointPositions a = temporal_ensemble(buf, t, p.cfg);

            Eigen::VectorXd lo = Eigen::VectorXd::Constant(p.dof, INFINITY);
            Eigen::VectorXd hi = Eigen::VectorXd::Constant(p.dof, -INFINITY);
            for (const auto& ch : buf.chunks()) {
                const Eigen::VectorXd row = ch.actions.row(t - ch.issued_at).transpose();
                lo = lo.cwiseMin(row);
                hi = hi.cwiseMax(row);
            }
            const double slack = 1e-12 * (1.0 + hi.cwiseAbs().maxCoeff());
            if (((a - lo).array() < -slack).any() || ((a - hi).array() > slack).any()) res.audit.convex = false;

            const Eigen::VectorXd raw = held.actions.row(t - held.issued_at).transpose();
            if (t > 0) {
                res.audit.max_jump_ensembled = std::max(res.audit.max_jump_ensembled, (a - prev_a).cwiseAbs().maxCoeff());
                res.audit.max_jump_raw = std::max(res.audit.max_jump_raw, (raw - prev_raw).cwiseAbs().maxCoeff());
            }
            prev_a = a;
            prev_raw = raw;

            plant.track(gains, a);
            res.ticks = t + 1;
            if (sc.success(plant.contact())) {
                res.success = true;
                break;
            }
        }
        res.grasp_attempts = plant.contact().grasp_attempts;
    } catch (const std::exception& e) {
        res.success = false;
        res.error = e.what();
    }
    return res;
}

EvalSummary evaluate_policy(const ChunkPredictor& p, const DrawerScenarioConfig& base, const ImpedanceGains& gains,
                            const std::vector<std::uint64_t>& rollout_seeds, int max_ticks, Exec exec) {
    EvalSummary s;
    const long n = static_cast<long>(rollout_seeds.size());
    s.results.resize(rollout_seeds.size());
    auto one = [&](long i) {
        DrawerScenarioConfig c = base;
        c.seed = rollout_seeds[i];
        s.results[i] = rollout(p, make_drawer_scenario(c), gains, max_ticks);
    };
    if (exec == Exec::serial) {
        for (long i = 0; i < n; ++i) one(i);
    } else {
#pragma omp parallel for schedule(dynamic, 1)
        for (long i = 0; i < n; ++i) one(i);
    }
    int ok = 0;
    for (const auto& r : s.results) ok += r.success ? 1 : 0;
    s.success_rate = n ? static_cast<double>(ok) / static_cast<double>(n) : 0.0;
    return s;
}

std::vector<std::uint64_t> rollout_seeds_for(const BenchmarkConfig& cfg, std::uint64_t train_seed) {
    std::vector<std::uint64_t> seeds;
    for (int r = 0; r < cfg.n_rollouts; ++r)
        seeds.push_back(cfg.rollout_seed_base + train_seed * 1000 + static_cast<std::uint64_t>(r));
    return seeds;
}

namespace {

double population_std(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size()));
}

void summarize(ModeSummary& m, const std::vector<EvalRow>& rows) {
    std::vector<double> outcomes;
    for (const auto& r : rows)
        if (r.input_mode == m.input_mode) outcomes.push_back(r.success ? 1.0 : 0.0);
    m.std_over_rollouts = population_std(outcomes);
    double s = 0.0;
    for (double v : m.per_seed) s += v;
    m.mean = m.per_seed.empty() ? 0.0 : s / static_cast<double>(m.per_seed.size());
    m.std_over_seeds = population_std(m.per_seed);
}

}  // namespace

BenchmarkReport run_drawer_benchmark(const std::vector<DemonstrationRecord>& demos, const DrawerScenarioConfig& base,
                                     const ImpedanceGains& gains, const BenchmarkConfig& cfg, Exec exec) {
    BenchmarkReport rep;
    rep.position_only.input_mode = "position";
    rep.force_aware.input_mode = "force";
    Dataset ds;
    ds.records = demos;
    for (const auto seed : cfg.train_seeds) {
        split_dataset(ds, cfg.n_validation, seed);
        const auto seeds = rollout_seeds_for(cfg, seed);
        for (const bool force : {false, true}) {
            PolicyConfig pc = cfg.policy;
            pc.include_force = force;
            const ChunkPredictor p = fit(build_dataset(ds, pc), pc, base.arm.chain);
            const EvalSummary s = evaluate_policy(p, base, gains, seeds, cfg.max_ticks, exec);
            ModeSummary& m = force ? rep.force_aware : rep.position_only;
            m.per_seed.push_back(s.success_rate);
            for (std::size_t r = 0; r < s.results.size(); ++r) {
                const auto& res = s.results[r];
                rep.rows.push_back({seed, m.input_mode, static_cast<int>(r), res.success});
                rep.all_convex = rep.all_convex && res.audit.convex;
                rep.audit.max_jump_ensembled = std::max(rep.audit.max_jump_ensembled, res.audit.max_jump_ensembled);
                rep.audit.max_jump_raw = std::max(rep.audit.max_jump_raw, res.audit.max_jump_raw);
            }
        }
    }
    rep.audit.convex = rep.all_convex;
    summarize(rep.position_only, rep.rows);
    summarize(rep.force_aware, rep.rows);
    return rep;
}

void write_eval_csv(std::ostream& out, const std::vector<EvalRow>& rows) {
    out << "seed,input_mode,rollout,success\n";
    for (const auto& r : rows) out << r.seed << ',' << r.input_mode << ',' << r.rollout << ',' << (r.success ? 1 : 0) << '\n';
}

}  // namespace teleop
