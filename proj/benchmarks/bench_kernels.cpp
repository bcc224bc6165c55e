// Hot-path microbenchmarks: the matrix-free spin Hamiltonian, a Krylov
// propagator step, one full TEBD Trotter step, one gaussian record sample and
// one master-coefficient evaluation.

#include <benchmark/benchmark.h>

#include "gapchannel/ed.hpp"
#include "gapchannel/gaussian.hpp"
#include "gapchannel/master.hpp"
#include "gapchannel/model.hpp"
#include "gapchannel/mps.hpp"

using namespace gapchannel;

namespace {

SpinSystemConfig spin_config(int n) {
  SpinSystemConfig c;
  c.n_sites = n;
  c.b_field = 1.0;
  c.j_x = 0.3;
  c.b_ancilla = 0.6;
  c.j_ancilla = 0.05;
  c.m_sender = n / 2 - 1;
  c.m_receiver = c.m_sender + 2;
  return c;
}

HarmonicSystemConfig harmonic_config(int n) {
  HarmonicSystemConfig c;
  c.n_sites = n;
  c.omega_coupling = 1.0;
  c.omega_onsite = 0.7;
  c.omega_ancilla = 0.5;
  c.j_ancilla = 0.05;
  c.m_sender = n / 2 - 4;
  c.m_receiver = c.m_sender + 9;
  return c;
}

void BM_EdMatvec(benchmark::State& state) {
  const auto config = spin_config(static_cast<int>(state.range(0)));
  const ed::HamiltonianApplier h(build_spin_terms(config));
  Eigen::VectorXcd in = Eigen::VectorXcd::Random(h.dimension()).normalized();
  Eigen::VectorXcd out(h.dimension());
  for (auto _ : state) {
    h.apply(in, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * h.dimension());
}
BENCHMARK(BM_EdMatvec)->Arg(8)->Arg(10)->Arg(12);

void BM_KrylovStep(benchmark::State& state) {
  const auto config = spin_config(static_cast<int>(state.range(0)));
  const ed::HamiltonianApplier h(build_spin_terms(config));
  ed::KrylovPropagator prop(h, 1e-10, 96);
  Eigen::VectorXcd psi = Eigen::VectorXcd::Random(h.dimension()).normalized();
  for (auto _ : state) {
    prop.step(psi, 1.0);
    benchmark::DoNotOptimize(psi.data());
  }
}
BENCHMARK(BM_KrylovStep)->Arg(10)->Arg(12)->Unit(benchmark::kMicrosecond);

void BM_TrotterStep(benchmark::State& state) {
  const auto config = spin_config(20);
  const auto layout = mps::embed_ancillas(config);
  const mps::TruncationPolicy policy{static_cast<int>(state.range(0)), 1e-10};
  const auto plan = mps::make_trotter_plan(build_spin_terms(config), layout, 0.05,
                                           policy);
  mps::ItebdOptions itebd;
  itebd.truncation = policy;
  auto psi = mps::initial_transfer_state(config, layout, itebd);
  for (auto _ : state) {
    mps::apply_trotter_step(psi, plan);
    benchmark::DoNotOptimize(psi.length());
  }
  state.SetLabel("L=22");
}
BENCHMARK(BM_TrotterStep)->Arg(10)->Arg(20)->Unit(benchmark::kMicrosecond);

void BM_GaussianRun(benchmark::State& state) {
  const auto config = harmonic_config(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    const auto trace = gaussian::transfer_run(config, 100.0, 1.0);
    benchmark::DoNotOptimize(trace.n_samples());
  }
  state.SetItemsProcessed(state.iterations() * 101);  // samples per run
}
BENCHMARK(BM_GaussianRun)->Arg(200)->Arg(400)->Unit(benchmark::kMillisecond);

void BM_MasterCoefficients(benchmark::State& state) {
  master::CorrelationKernel kernel;
  kernel.delta = 9;
  kernel.omega_coupling = 1.0;
  kernel.omega_onsite = 0.2;
  kernel.omega_ancilla = 0.5;
  for (auto _ : state) {
    const auto c = master::asymptotic_coefficients(kernel);
    benchmark::DoNotOptimize(c.x0);
  }
}
BENCHMARK(BM_MasterCoefficients)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
