#pragma once

#include "teleop/contact_sim.hpp"
#include "teleop/controllers.hpp"
#include "teleop/datalog.hpp"
#include "teleop/policy.hpp"
#include "teleop/sweep.hpp"

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace teleop {

struct RolloutAudit {
    bool convex = true;               // every ensembled action inside its predictions' bounds
    double max_jump_ensembled = 0.0;  // max per-tick change of the executed action (inf-norm)
    double max_jump_raw = 0.0;        // same, for executing each chunk in full before the next
};

struct RolloutResult {
    bool success = false;
    int ticks = 0;
    int grasp_attempts = 0;
    RolloutAudit audit;
    std::string error;
};

// Follower-only closed loop: observe, predict a chunk, ensemble, track.
RolloutResult rollout(const ChunkPredictor& p, const Scenario& sc, const ImpedanceGains& gains, int max_ticks = 500);

struct EvalSummary {
    std::vector<RolloutResult> results;
    double success_rate = 0.0;
};

EvalSummary evaluate_policy(const ChunkPredictor& p, const DrawerScenarioConfig& base, const ImpedanceGains& gains,
                            const std::vector<std::uint64_t>& rollout_seeds, int max_ticks = 500,
                            Exec exec = Exec::parallel);

struct BenchmarkConfig {
    std::size_t n_validation = 3;
    std::vector<std::uint64_t> train_seeds{1, 2, 3};
    int n_rollouts = 15;
    std::uint64_t rollout_seed_base = 5000;
    int max_ticks = 500;
    PolicyConfig policy;
};

struct EvalRow {
    std::uint64_t seed = 0;
    std::string input_mode;
    int rollout = 0;
    bool success = false;
};

struct ModeSummary {
    std::string input_mode;
    std::vector<double> per_seed;
    double mean = 0.0;
    double std_over_seeds = 0.0;
    double std_over_rollouts = 0.0;
};

struct BenchmarkReport {
    std::vector<EvalRow> rows;
    ModeSummary position_only;
    ModeSummary force_aware;
    RolloutAudit audit;  // worst case over all rollouts
    bool all_convex = true;
};

// Rollout seeds are shared between the two input modes of a training seed.
std::vector<std::uint64_t> rollout_seeds_for(const BenchmarkConfig& cfg, std::uint64_t train_seed);

// For each training seed: resplit the demos, fit a position-only and a force-aware policy,
// and evaluate both on the same rollout seeds.
BenchmarkReport run_drawer_benchmark(const std::vector<DemonstrationRecord>& demos, const DrawerScenarioConfig& base,
                                     const ImpedanceGains& gains, const BenchmarkConfig& cfg,
                                     Exec exec = Exec::parallel);

void write_eval_csv(std::ostream& out, const std::vector<EvalRow>& rows);

}  // namespace teleop
