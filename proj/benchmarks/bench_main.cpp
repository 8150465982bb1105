#include <benchmark/benchmark.h>

#include "plateflow/fluid_subproblem.hpp"
#include "plateflow/galerkin_basis.hpp"
#include "plateflow/plate_models.hpp"
#include "plateflow/splitting_driver.hpp"

using namespace plateflow;

namespace {

const PlateGrid kPlate{1.0, 1.0, 16, 16};
const ReferenceGrid kGrid{kPlate, 8};

FspInputs bench_inputs(const GalerkinBasis& basis, const FluidSubproblem& fsp) {
  const int k = basis.size();
  FspInputs in;
  in.u_prev_faces = fsp.lift_boundary(Eigen::VectorXd::Unit(k, 0) * 0.05).faces;
  in.eta_tilde_prev = Eigen::VectorXd::Unit(k, 0) * 0.02;
  in.eta_tilde_next = Eigen::VectorXd::Unit(k, 0) * 0.025;
  in.dteta_avg = Eigen::VectorXd::Unit(k, 1) * 0.01;
  in.dt = 1e-3;
  in.mu = 0.1;
  return in;
}

void BM_BasisBuild(benchmark::State& state) {
  for (auto _ : state) {
    auto basis = GalerkinBasis::build(kPlate, static_cast<int>(state.range(0)));
    benchmark::DoNotOptimize(basis.eigenvalues());
  }
}
BENCHMARK(BM_BasisBuild)->Arg(4)->Arg(8);

void BM_FspAssemble(benchmark::State& state) {
  const auto basis = GalerkinBasis::build(kPlate, 4);
  const FluidSubproblem fsp(kGrid, basis);
  const FspInputs in = bench_inputs(basis, fsp);
  for (auto _ : state) {
    auto sys = fsp.assemble(in);
    benchmark::DoNotOptimize(sys.K);
  }
}
BENCHMARK(BM_FspAssemble)->Unit(benchmark::kMillisecond);

void BM_FspSolve(benchmark::State& state) {
  const auto basis = GalerkinBasis::build(kPlate, 4);
  const FluidSubproblem fsp(kGrid, basis);
  const auto sys = fsp.assemble(bench_inputs(basis, fsp));
  for (auto _ : state) {
    auto out = fsp.solve(sys, 1e-8);
    benchmark::DoNotOptimize(out.faces);
  }
}
BENCHMARK(BM_FspSolve)->Unit(benchmark::kMillisecond);

void BM_SspStep(benchmark::State& state) {
  const auto basis = GalerkinBasis::build(kPlate, 4);
  PlateModelConfig cfg;
  cfg.kind = PlateModelKind::Kirchhoff;
  cfg.kirchhoff.f = KirchhoffF::Cubic;
  const auto model = PlateModel::make(basis, cfg);
  Eigen::VectorXd a0(4), v(4);
  a0 << 0.02, -0.01, 0.0, 0.005;
  v << 0.0, 0.05, 0.0, 0.0;
  for (auto _ : state) {
    auto res = ssp_step(basis, model, a0, v, 1e-3, 1e-10);
    benchmark::DoNotOptimize(res.alpha_end);
  }
}
BENCHMARK(BM_SspStep)->Unit(benchmark::kMillisecond);

void BM_AirySolve(benchmark::State& state) {
  const auto basis = GalerkinBasis::build(kPlate, 4);
  const Eigen::VectorXd eta = 0.1 * basis.mode_field(0);
  for (auto _ : state) {
    auto airy = airy_solve(basis, eta);
    benchmark::DoNotOptimize(airy.v);
  }
}
BENCHMARK(BM_AirySolve)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
