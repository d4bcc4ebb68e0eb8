#include <benchmark/benchmark.h>

#include "gbhammer/scenario.hpp"

using namespace gbh;

namespace {

void BM_Walk(benchmark::State& state) {
  const auto isa = static_cast<Isa>(state.range(0));
  const auto& profile = PagingProfile::get(isa);
  PhysMem mem(DramGeometry{});
  Tlb tlb(TlbConfig{});
  Kernel kernel(mem, tlb, profile, KernelPolicy{});
  const Pid pid = kernel.spawn("p", {}).pid;
  const VirtAddr va = kernel.mmap(pid, 0x20000, 64 * kPageSize, true);
  const PhysAddr root = kernel.process(pid).root_pa;
  std::uint64_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(walk(profile, root, va + (i++ % 64) * kPageSize, mem));
  }
  state.SetLabel(std::string(isa_name(isa)));
}
BENCHMARK(BM_Walk)->Arg(static_cast<int>(Isa::X86_64))->Arg(static_cast<int>(Isa::RV39))->Arg(static_cast<int>(Isa::ARMV7));

void BM_TlbLookup(benchmark::State& state) {
  TlbConfig cfg;
  cfg.entries_per_kind = static_cast<std::size_t>(state.range(0));
  Tlb tlb(cfg);
  for (Vpn v = 0; v < cfg.entries_per_kind; ++v) tlb.insert(TlbEntry{v, v + 100, 1, v % 8 == 0, TlbKind::Data});
  Vpn v = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(tlb.lookup(TlbKind::Data, v, 2));
    v = (v + 1) % cfg.entries_per_kind;
  }
}
BENCHMARK(BM_TlbLookup)->Arg(16)->Arg(64)->Arg(256);

void BM_Scenario(benchmark::State& state, const char* name) {
  const auto config = builtin_scenario(name, 1);
  for (auto _ : state) benchmark::DoNotOptimize(run_scenario(config));
}
BENCHMARK_CAPTURE(BM_Scenario, binary_exec, "binary_exec")->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Scenario, riscv_span, "riscv_span")->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
