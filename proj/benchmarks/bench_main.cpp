#include <benchmark/benchmark.h>

#include <sdpse/estimate.hpp>
#include <sdpse/measurement.hpp>
#include <sdpse/partition.hpp>
#include <sdpse/sdp_matrices.hpp>

#include "fixtures.hpp"

using namespace sdpse;

static void BM_MatrixSet(benchmark::State& state) {
    const auto model = fixtures::radial_feeder(static_cast<int>(state.range(0)), 7);
    for (auto _ : state) benchmark::DoNotOptimize(MeasurementMatrixSet::build(model));
}
BENCHMARK(BM_MatrixSet)->Arg(40)->Arg(100)->Arg(500)->Unit(benchmark::kMillisecond);

static void BM_EvalMeasurement(benchmark::State& state) {
    const auto model = fixtures::ieee13_like();
    const auto set = MeasurementMatrixSet::build(model);
    const auto x = stack_state(fixtures::smooth_state(model, 3));
    const auto sites = full_placement(model);
    for (auto _ : state)
        for (const auto& s : sites) {
            const Measurement m{s.kind, s.node, s.to_node, 0.0, 1.0};
            benchmark::DoNotOptimize(eval_measurement(matrix_for(set, m), x));
        }
    state.SetItemsProcessed(state.iterations() * static_cast<long>(sites.size()));
}
BENCHMARK(BM_EvalMeasurement);

static void BM_EstimateIeee13(benchmark::State& state) {
    const auto model = fixtures::ieee13_like();
    const auto truth = fixtures::smooth_state(model, 3);
    const auto anchors = fixtures::head_anchors(model, truth);
    const auto meas = synthesize(model, stack_state(truth), one_sided_placement(model), NoiseSpec::level(2, 1));
    for (auto _ : state) benchmark::DoNotOptimize(estimate(model, meas, anchors));
}
BENCHMARK(BM_EstimateIeee13)->Unit(benchmark::kMillisecond);

static void BM_EstimateFeeder(benchmark::State& state) {
    const auto model = fixtures::radial_feeder(static_cast<int>(state.range(0)), 7);
    const auto truth = fixtures::smooth_state(model, 3);
    const auto anchors = fixtures::head_anchors(model, truth);
    const auto meas = synthesize(model, stack_state(truth), one_sided_placement(model), NoiseSpec::level(2, 1));
    for (auto _ : state) benchmark::DoNotOptimize(estimate(model, meas, anchors));
}
BENCHMARK(BM_EstimateFeeder)->Arg(20)->Arg(50)->Unit(benchmark::kMillisecond);

static void BM_Separate(benchmark::State& state) {
    const auto model = fixtures::radial_feeder(500, 1);
    for (auto _ : state) {
        const auto topo = detect_topology(model);
        benchmark::DoNotOptimize(separate(model, topo, 60));
    }
}
BENCHMARK(BM_Separate)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
