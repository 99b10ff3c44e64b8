#include <benchmark/benchmark.h>

#include "mwb/decomp.hpp"
#include "mwb/dgp.hpp"
#include "mwb/hetero.hpp"
#include "mwb/panel.hpp"

namespace {

const mwb::DgpOutput& sample() {
    static const mwb::DgpOutput data = mwb::generate(mwb::paper_scenario(7, 2.0e5), 1);
    return data;
}

mwb::StudyWindow window() { return {}; }

void BM_generate(benchmark::State& state) {
    const auto cfg = mwb::paper_scenario(7, 2.0e5);
    const int jobs = static_cast<int>(state.range(0));
    for (auto _ : state) {
        auto out = jobs == 0 ? mwb::generate_serial(cfg) : mwb::generate(cfg, jobs);
        benchmark::DoNotOptimize(out.records.data());
    }
}
BENCHMARK(BM_generate)->Arg(0)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_build_panel(benchmark::State& state) {
    const auto& d = sample();
    const int jobs = static_cast<int>(state.range(0));
    mwb::PanelOptions po;
    po.jobs = std::max(1, jobs);
    for (auto _ : state) {
        auto p = jobs == 0 ? mwb::build_panel_serial(d.records, d.schedule, window(), po)
                           : mwb::build_panel(d.records, d.schedule, window(), po);
        benchmark::DoNotOptimize(p.cells.data());
    }
}
BENCHMARK(BM_build_panel)->Arg(0)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_bootstrap(benchmark::State& state) {
    const auto& d = sample();
    const auto panel = mwb::build_panel(d.records, d.schedule, window());
    const auto obs = mwb::make_observations(panel);
    const auto design = mwb::design_for(window(), {});
    const auto stat = mwb::elasticity_statistic(d.schedule, mwb::BaselineWeighting::Postings,
                                                mwb::WageValuation::UpperEdge);
    mwb::BootstrapOptions bo;
    bo.replicates = 99;
    bo.jobs = std::max(1, static_cast<int>(state.range(0)));
    for (auto _ : state) {
        auto r = state.range(0) == 0 ? mwb::bootstrap_inference_serial(obs, design, stat, bo)
                                     : mwb::bootstrap_inference(obs, design, stat, bo);
        benchmark::DoNotOptimize(r.se.data());
    }
}
BENCHMARK(BM_bootstrap)->Arg(0)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_stratified(benchmark::State& state) {
    const auto& d = sample();
    mwb::StratifiedOptions so;
    so.jobs = std::max(1, static_cast<int>(state.range(0)));
    so.min_records_per_cell = 1;
    for (auto _ : state) {
        auto r = state.range(0) == 0
                     ? mwb::run_stratified_serial(d.records, d.schedule, window(),
                                                  mwb::StratumDimension::Occupation, so)
                     : mwb::run_stratified(d.records, d.schedule, window(),
                                           mwb::StratumDimension::Occupation, so);
        benchmark::DoNotOptimize(r.strata.data());
    }
}
BENCHMARK(BM_stratified)->Arg(0)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
