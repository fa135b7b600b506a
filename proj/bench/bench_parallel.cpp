#include "teleop/config.hpp"
#include "teleop/demonstrator.hpp"
#include "teleop/evaluate.hpp"
#include "teleop/sweep.hpp"

#include <benchmark/benchmark.h>

using namespace teleop;

namespace {

const std::filesystem::path kConfigs = TELEOP_CONFIG_DIR;

const SweepSetup& sweep_setup() {
    static const SweepSetup s = sweep_from_json(load_json_file(kConfigs / "sweep.json"), kConfigs);
    return s;
}

const DrawerSetup& drawer() {
    static const DrawerSetup s = drawer_setup_from_json(load_json_file(kConfigs / "drawer_scenario.json"), kConfigs);
    return s;
}

Exec exec_of(const benchmark::State& st) { return st.range(0) ? Exec::parallel : Exec::serial; }

void BM_SweepKf(benchmark::State& st) {
    const auto& s = sweep_setup();
    for (auto _ : st) benchmark::DoNotOptimize(sweep_kf(s.base, s.kf_grid, s.delays, exec_of(st), s.instability));
    st.SetItemsProcessed(st.iterations() * static_cast<long>(s.kf_grid.size() * s.delays.size()));
}

void BM_GenerateDemos(benchmark::State& st) {
    const auto& s = drawer();
    for (auto _ : st)
        benchmark::DoNotOptimize(
            generate_demos(s.scenario, s.rig, s.demonstrator, s.n_demos, s.demo_seed_base, exec_of(st)));
    st.SetItemsProcessed(st.iterations() * s.n_demos);
}

void BM_EvaluatePolicy(benchmark::State& st) {
    const auto& s = drawer();
    static const ChunkPredictor policy = [&] {
        const auto demos = generate_demos(s.scenario, s.rig, s.demonstrator, s.n_demos, s.demo_seed_base);
        Dataset ds;
        ds.records = demos_to_records(demos, s.scenario, s.rig, s.demo_seed_base);
        split_dataset(ds, s.benchmark.n_validation, 1);
        return fit(build_dataset(ds, s.benchmark.policy), s.benchmark.policy, s.scenario.arm.chain);
    }();
    std::vector<std::uint64_t> seeds;
    for (std::uint64_t r = 0; r < 45; ++r) seeds.push_back(s.benchmark.rollout_seed_base + r);
    const auto gains = follower_gains(s.rig.scheme);
    for (auto _ : st)
        benchmark::DoNotOptimize(evaluate_policy(policy, s.scenario, gains, seeds, s.benchmark.max_ticks, exec_of(st)));
    st.SetItemsProcessed(st.iterations() * static_cast<long>(seeds.size()));
}

}  // namespace

// Arg 0 = serial reference, 1 = OpenMP
BENCHMARK(BM_SweepKf)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_GenerateDemos)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_EvaluatePolicy)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
